"""
Report emission: run manifests, JSON documents, JSON Schema files, Markdown
summaries and plot-ready CSVs.

JSON is the canonical output; Markdown is rendered from the JSON dict.
"""

import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import pandas as pd
from pydantic import BaseModel

from . import __version__
from .models import AuditDocument, ProbeDocument, RunManifest, SimulationDocument, WeightsDocument

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCHEMA_DOCUMENTS = {
    "audit": AuditDocument,
    "simulation": SimulationDocument,
    "probe": ProbeDocument,
    "weights": WeightsDocument,
}


def file_digest(path: PathLike) -> str:
    """sha256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def build_manifest(
    command: str,
    seed: int,
    inputs: Optional[Mapping[str, Optional[PathLike]]] = None,
    schema_path: Optional[PathLike] = None,
    parameters: Optional[Dict[str, Any]] = None,
) -> RunManifest:
    """
    Describe a run: command, input digests, seed, version and parameters.

    Args:
        command: CLI command name
        seed: Run seed
        inputs: Role -> input file; missing entries are skipped
        schema_path: Attribute schema file, digested separately
        parameters: Every resolved parameter of the run
    """
    digests = {role: file_digest(path) for role, path in (inputs or {}).items() if path is not None}
    return RunManifest(
        command=command,
        tool_version=__version__,
        seed=seed,
        input_digests=digests,
        schema_digest=file_digest(schema_path) if schema_path is not None else None,
        parameters=parameters or {},
        created_at=datetime.now(timezone.utc),
    )


def dumps(payload: Union[BaseModel, Dict[str, Any]]) -> str:
    data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: PathLike, payload: Union[BaseModel, Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def write_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g")
    return path


def schema_documents() -> Dict[str, Dict[str, Any]]:
    """JSON Schema of every top-level document, generated from the models."""
    return {name: model.model_json_schema() for name, model in SCHEMA_DOCUMENTS.items()}


def write_schemas(out_dir: PathLike) -> List[Path]:
    out_dir = Path(out_dir)
    return [write_json(out_dir / f"{name}.schema.json", schema) for name, schema in schema_documents().items()]


def write_document(out_dir: PathLike, kind: str, document: BaseModel, stem: str = "report") -> Dict[str, Path]:
    """
    Write a document, its schema and its manifest into out_dir.

    The document embeds its manifest without the timestamp so reruns with
    the same inputs are byte-identical; manifest.json carries the timestamp.

    Returns:
        Written paths keyed by role (json, schema, manifest)
    """
    out_dir = Path(out_dir)
    manifest: RunManifest = document.manifest
    stable = document.model_copy(update={"manifest": manifest.model_copy(update={"created_at": None})})
    paths = {
        "json": write_json(out_dir / f"{stem}.json", stable),
        "schema": write_json(out_dir / f"{stem}.schema.json", SCHEMA_DOCUMENTS[kind].model_json_schema()),
        "manifest": write_json(out_dir / "manifest.json", manifest),
    }
    logger.info("Wrote %s", paths["json"])
    return paths


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "undefined" if value is None else f"{value:.{digits}f}"


def _estimate_cell(estimate: Dict[str, Any]) -> str:
    ci = estimate.get("ci")
    if ci is None:
        return f"undefined ({estimate.get('undefined_reason')})"
    return f"{_fmt(ci['point'])} [{_fmt(ci['lower'])}, {_fmt(ci['upper'])}]"


def _table(header: List[str], rows: List[List[str]]) -> List[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return lines


def render_audit_markdown(document: Dict[str, Any]) -> str:
    """Human summary of an audit document (the dict form of AuditDocument)."""
    manifest = document["manifest"]
    lines = [
        "# Shortcut audit",
        "",
        f"Tool version {manifest['tool_version']}, seed {manifest['seed']}.",
        "",
    ]
    for report in document["reports"]:
        attribute = report["attribute"]
        lines += [f"## Attribute `{attribute}`", "", "### Cancer prevalence", ""]
        lines += _table(
            ["value", "prevalence", "cancers", "exams"],
            [
                [r["value"], f"{100 * r['prevalence']:.1f}%", str(r["positive_count"]), str(r["total_count"])]
                for r in report["prevalence"]["rows"]
            ],
        )
        lines += ["", "### Score distributions", ""]
        lines += _table(
            ["value", "label", "n", "mean", "q1", "median", "q3"],
            [
                [s["value"], s["label"], str(s["count"]), _fmt(s["mean"]), _fmt(s["q1"]), _fmt(s["median"]), _fmt(s["q3"])]
                for s in report["distribution"]["summaries"]
            ],
        )
        if report["distribution"]["ks"]:
            lines += [""]
            lines += _table(
                ["label", "values", "KS"],
                [[k["label"], f"{k['value_a']} vs {k['value_b']}", _fmt(k["statistic"])] for k in report["distribution"]["ks"]],
            )
        gap = report.get("bias_gap")
        if gap:
            lines += [
                "",
                "### Bias-aligned vs bias-conflicting",
                "",
                f"High-prevalence value `{gap['high_value']}` ({gap['high_value_source']}).",
                "",
            ]
            lines += _table(
                ["subset", "AUC [CI]"],
                [["aligned", _estimate_cell(gap["aligned_auc"])], ["conflicting", _estimate_cell(gap["conflicting_auc"])]],
            )
            lines += ["", f"Gap: {_fmt(gap['gap'])}"]
        stratified = report.get("stratified")
        if stratified:
            lines += ["", "### Stratified AUC", ""]
            rows = [[s["value"], _estimate_cell(s["estimate"])] for s in stratified["strata"]]
            rows.append(["combined", _estimate_cell(stratified["combined"])])
            lines += _table(["stratum", "AUC [CI]"], rows)
            verdict = "yes" if stratified["paradox_flag"] else "no"
            lines += ["", f"Combined AUC exceeds every stratum: **{verdict}**"]
        curve = report.get("composition")
        if curve:
            lines += [
                "",
                f"### Composition sweep ({curve['value_b']} share, N = {curve['subset_size']})",
                "",
            ]
            lines += _table(
                ["fraction", "mean AUC", "std"],
                [[f"{p['fraction']:.2f}", _fmt(p["mean_auc"]), _fmt(p["std_auc"])] for p in curve["points"]],
            )
        if report["notes"]:
            lines += ["", "Notes:", ""] + [f"- {note}" for note in report["notes"]]
        lines.append("")
    return "\n".join(lines)


def render_simulation_markdown(document: Dict[str, Any]) -> str:
    grid = document["grid"]
    lines = [
        f"# Simulation ({grid['mode']})",
        "",
        f"{len(grid['cells'])} cells, {grid['repetitions']} repetitions each, seed {document['manifest']['seed']}.",
        "",
        f"## Zero crossings along `{grid['crossing_axis']}`",
        "",
    ]
    crossings = document["zero_crossings"]
    if not crossings:
        lines.append("No sign change found.")
    else:
        names = list(crossings[0]["coords"])
        lines += _table(
            names + [grid["crossing_axis"]],
            [[f"{c['coords'][n]:.4g}" for n in names] + [f"{c['value']:.4f}"] for c in crossings],
        )
    lines.append("")
    return "\n".join(lines)


def render_probe_markdown(document: Dict[str, Any]) -> str:
    report = document["report"]
    return "\n".join(
        [
            "# Attribute probe",
            "",
            f"AUC: {_estimate_cell(report['auc'])}",
            "",
            f"Train {report['n_train']} / test {report['n_test']} vectors of dimension {report['dimension']}; "
            f"l2 {report['l2_penalty']}, {report['iterations_run']} iterations, final loss {report['final_loss']:.6f}.",
            "",
        ]
    )


def write_markdown(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
