"""
Command-line interface for shortcut-audit.

Exit codes: 0 on success, 2 on invalid input (bad files, rows, flags or
parameters), 1 on any other failure.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import pandas as pd
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__
from .config import AuditConfig, load_config
from .core import ShortcutAudit
from .exceptions import InputValidationError, ShortcutAuditError
from .frames import exams_to_frame
from .models import (
    AuditDocument,
    ExamLabel,
    ProbeDocument,
    SimulationDocument,
)
from .modules.audit import curve_to_frame, distribution_to_frame
from .modules.binormal import analytic_p0p1_grid, crossings_to_frame, find_zero_crossings, grid_to_frame
from .modules.ingestion import (
    aggregate_exams,
    image_level_records,
    parse_exam_metadata,
    parse_image_scores,
    parse_schema,
    population_summary,
    write_exam_scores,
)
from .modules.mitigation import balanced_weights, filter_by_attribute, write_weight_table
from .modules.probe import probe_report, probe_scores, read_feature_vectors
from .report import (
    build_manifest,
    render_audit_markdown,
    render_probe_markdown,
    render_simulation_markdown,
    write_csv,
    write_document,
    write_json,
    write_markdown,
    write_schemas,
)

logger = logging.getLogger(__name__)

console = Console(stderr=True)

EXIT_INVALID = 2
EXIT_FAILURE = 1


class FloatList(click.ParamType):
    """Comma-separated floats, e.g. 0,0.1,0.5."""

    name = "floats"

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        try:
            values = [float(v) for v in str(value).split(",") if v.strip()]
        except ValueError:
            self.fail(f"{value!r} is not a comma-separated list of numbers", param, ctx)
        if not values:
            self.fail("empty list", param, ctx)
        return values


FLOATS = FloatList()


class AuditGroup(click.Group):
    """Maps package errors to exit codes."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except InputValidationError as e:
            logger.debug("Invalid input", exc_info=True)
            click.echo(f"error: {e}", err=True)
            ctx.exit(EXIT_INVALID)
        except ShortcutAuditError as e:
            logger.debug("Run failed", exc_info=True)
            click.echo(f"error: {e}", err=True)
            ctx.exit(EXIT_FAILURE)
        except Exception as e:
            logger.exception("Internal error")
            click.echo(f"internal error: {e}", err=True)
            ctx.exit(EXIT_FAILURE)


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _config(ctx: click.Context, seed: Optional[int] = None, **bootstrap: Any) -> AuditConfig:
    options = ctx.obj or {}
    overrides: Dict[str, Any] = {"seed": seed, "threads": options.get("threads")}
    bootstrap = {k: v for k, v in bootstrap.items() if v is not None}
    if bootstrap:
        overrides["bootstrap"] = bootstrap
    return load_config(options.get("config"), overrides=overrides)


def _outputs(paths: List[Path]) -> None:
    for path in paths:
        click.echo(str(path))


@click.group(cls=AuditGroup)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML configuration file")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads")
@click.version_option(version=__version__)
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], log_level: Optional[str], threads: Optional[int]):
    """Audit classifiers for shortcuts and the AUC paradox."""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config_path, threads=threads)
    if log_level is None:
        try:
            log_level = load_config(config_path).log_level
        except InputValidationError:
            log_level = "INFO"
    _setup_logging(log_level)


def _bootstrap_options(func):
    func = click.option("--seed", type=click.IntRange(min=0), default=None, help="Run seed (default 0)")(func)
    func = click.option("--bootstrap", type=click.IntRange(min=1), default=None, help="Bootstrap replicates (default 10000)")(func)
    func = click.option("--level", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None, help="CI level")(func)
    func = click.option("--stratified-bootstrap", is_flag=True, help="Resample classes separately")(func)
    return func


@cli.command()
@click.option("--predictions", required=True, type=click.Path(), help="Exam CSV")
@click.option("--schema", "schema_path", required=True, type=click.Path(), help="Attribute schema JSON")
@click.option("--attribute", default="all", show_default=True, help="Attribute to audit, or all")
@click.option("--high-value", default=None, help="High-prevalence value (default: schema, then empirical)")
@click.option("--within", default=None, help="Repeat stratified AUC and composition inside each value of this attribute")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory")
@_bootstrap_options
@click.pass_context
def audit(ctx, predictions, schema_path, attribute, high_value, within, out_dir, seed, bootstrap, level, stratified_bootstrap):
    """Run the shortcut audit battery."""
    config = _config(ctx, seed, replicates=bootstrap, level=level, stratified=stratified_bootstrap or None)
    app = ShortcutAudit(config)
    schema = parse_schema(schema_path)
    exams = app.ingestion.load_exams(predictions, schema)
    if attribute == "all":
        attributes = schema.names
    elif attribute in schema.names:
        attributes = [attribute]
    else:
        raise InputValidationError(f"attribute {attribute!r} not in schema; declared: {schema.names}", path=schema_path)
    if high_value is not None and len(attributes) != 1:
        raise InputValidationError("--high-value needs a single --attribute")
    if within is not None and within not in schema.names:
        raise InputValidationError(f"--within attribute {within!r} not in schema", path=schema_path)

    reports = [
        app.audit.run_battery(exams, name, schema, high_value=high_value, within=within, progress=True)
        for name in attributes
    ]
    settings = config.bootstrap_settings()
    manifest = build_manifest(
        "audit",
        config.seed,
        inputs={"predictions": predictions},
        schema_path=schema_path,
        parameters={
            "attributes": attributes,
            "high_value": high_value,
            "within": within,
            "bootstrap": settings.model_dump(),
            "composition": config.composition.model_dump(),
            "composition_subset_size": "labeled exams of the input set",
        },
    )
    document = AuditDocument(
        manifest=manifest,
        schema_value_order={spec.name: spec.values for spec in schema.attributes},
        reports=reports,
    )
    out = Path(out_dir)
    paths = write_document(out, "audit", document)
    stable = document.model_copy(update={"manifest": manifest.model_copy(update={"created_at": None})})
    written = list(paths.values()) + [write_markdown(out / "report.md", render_audit_markdown(stable.model_dump(mode="json")))]

    prevalence = pd.DataFrame.from_records(
        [dict(attribute=r.attribute, **row.model_dump()) for r in reports for row in r.prevalence.rows]
    )
    distribution = pd.concat([distribution_to_frame(r.distribution) for r in reports], ignore_index=True)
    curves = [r.composition for r in reports if r.composition] + [c for r in reports for c in r.composition_within]
    written.append(write_csv(out / "prevalence.csv", prevalence))
    written.append(write_csv(out / "distribution.csv", distribution))
    if curves:
        written.append(write_csv(out / "composition.csv", pd.concat([curve_to_frame(c) for c in curves], ignore_index=True)))
    written.append(
        write_csv(out / "population.csv", pd.DataFrame.from_records([row.model_dump() for row in population_summary(exams, schema)]))
    )

    table = Table(title="AUC paradox check")
    for column in ("attribute", "combined AUC", "max stratum AUC", "paradox", "bias gap"):
        table.add_column(column)
    for r in reports:
        s = r.stratified
        strata = [x.estimate.point for x in s.strata if x.estimate.defined] if s else []
        table.add_row(
            r.attribute,
            f"{s.combined.point:.4f}" if s else "-",
            f"{max(strata):.4f}" if strata else "-",
            ("yes" if s.paradox_flag else "no") if s else "-",
            f"{r.bias_gap.gap:.4f}" if r.bias_gap and r.bias_gap.gap is not None else "-",
        )
    console.print(table)
    _outputs(written)


@cli.command()
@click.option("--mode", type=click.Choice(["prevalence-bias", "p0p1"]), default="prevalence-bias", show_default=True)
@click.option("--preset", default="desk", show_default=True, help="Simulation preset (desk, full, or the paper-fig5b alias of full)")
@click.option("--target-auc", type=FLOATS, default=None, help="Within-set AUC(s), comma-separated")
@click.option("--m", "m_values", type=FLOATS, default=None, help="Model bias values for p0p1 mode")
@click.option("--repetitions", type=click.IntRange(min=1), default=None, help="Override the preset's repetitions")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Run seed (default 0)")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory")
@click.pass_context
def simulate(ctx, mode, preset, target_auc, m_values, repetitions, seed, out_dir):
    """Run a binormal AUC-paradox sweep."""
    config = _config(ctx, seed)
    app = ShortcutAudit(config)
    settings = config.preset(preset)
    if repetitions is not None:
        settings = settings.model_copy(update={"repetitions": repetitions})
    for value in target_auc or []:
        if not 0.0 < value < 1.0:
            raise InputValidationError(f"--target-auc {value} must lie in the open interval (0, 1)")
    if m_values is not None and mode != "p0p1":
        raise InputValidationError("--m applies to --mode p0p1 only")

    out = Path(out_dir)
    written = []
    if mode == "prevalence-bias":
        grid = app.binormal.prevalence_bias_sweep(settings, target_aucs=target_auc, progress=True)
    else:
        grid = app.binormal.p0p1_sweep(settings, target_aucs=target_auc, m_values=m_values, progress=True)
        analytic = analytic_p0p1_grid(target_auc or settings.target_aucs, m_values or settings.m_values, settings.p_axis.values())
        written.append(write_csv(out / "analytic.csv", grid_to_frame(analytic)))
    crossings = find_zero_crossings(grid)
    manifest = build_manifest(
        "simulate",
        config.seed,
        parameters={
            "mode": mode,
            "preset": preset,
            "settings": settings.model_dump(),
            "target_auc": target_auc,
            "m": m_values,
            "threads": config.threads,
        },
    )
    document = SimulationDocument(manifest=manifest, grid=grid, zero_crossings=crossings)
    paths = write_document(out, "simulation", document)
    written += list(paths.values())
    written.append(write_csv(out / "grid.csv", grid_to_frame(grid)))
    written.append(write_csv(out / "zero_crossings.csv", crossings_to_frame(crossings)))
    stable = document.model_copy(update={"manifest": manifest.model_copy(update={"created_at": None})})
    written.append(write_markdown(out / "report.md", render_simulation_markdown(stable.model_dump(mode="json"))))
    logger.info("%d cells, %d zero crossings", len(grid.cells), len(crossings))
    _outputs(written)


@cli.command()
@click.option("--train", "train_path", required=True, type=click.Path(), help="Training feature vectors (CSV or JSONL)")
@click.option("--test", "test_path", required=True, type=click.Path(), help="Test feature vectors (CSV or JSONL)")
@click.option("--l2", type=click.FloatRange(min=0), default=None, help="L2 penalty (default 1.0)")
@click.option("--iterations", type=click.IntRange(min=1), default=None, help="Gradient steps (default 500)")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory")
@_bootstrap_options
@click.pass_context
def probe(ctx, train_path, test_path, l2, iterations, out_dir, seed, bootstrap, level, stratified_bootstrap):
    """Train and evaluate a logistic-regression attribute probe."""
    config = _config(ctx, seed, replicates=bootstrap, level=level, stratified=stratified_bootstrap or None)
    app = ShortcutAudit(config)
    train = read_feature_vectors(train_path)
    test = read_feature_vectors(test_path)
    model = app.probe.train(train, l2=l2, iterations=iterations)
    report = probe_report(model, test, app.probe.bootstrap_settings(), n_train=len(train), progress=True)
    manifest = build_manifest(
        "probe",
        config.seed,
        inputs={"train": train_path, "test": test_path},
        parameters={"probe": app.probe.settings(l2=l2, iterations=iterations).model_dump(), "bootstrap": config.bootstrap_settings().model_dump()},
    )
    document = ProbeDocument(manifest=manifest, report=report, model=model)
    out = Path(out_dir)
    written = list(write_document(out, "probe", document).values())
    stable = document.model_copy(update={"manifest": manifest.model_copy(update={"created_at": None})})
    written.append(write_markdown(out / "report.md", render_probe_markdown(stable.model_dump(mode="json"))))
    scores = pd.DataFrame(
        {"id": [r.id for r in test], "attribute_label": [r.attribute_label for r in test], "score": probe_scores(model, test)}
    )
    written.append(write_csv(out / "probe_scores.csv", scores))
    _outputs(written)


@cli.command()
@click.option("--predictions", required=True, type=click.Path(), help="Exam CSV")
@click.option("--attribute", required=True, help="Attribute to balance")
@click.option("--schema", "schema_path", default=None, type=click.Path(), help="Attribute schema JSON")
@click.option("--draws", type=click.IntRange(min=1), default=10000, show_default=True, help="Reference draw count for expected cell draws")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Weight CSV")
@click.pass_context
def balance(ctx, predictions, attribute, schema_path, draws, out_path):
    """Write balanced sampling weights and their JSON sidecar."""
    config = _config(ctx)
    schema = parse_schema(schema_path) if schema_path else None
    exams = ShortcutAudit(config).ingestion.load_exams(predictions, schema)
    table = balanced_weights(exams, attribute, schema)
    manifest = build_manifest(
        "balance", config.seed, inputs={"predictions": predictions}, schema_path=schema_path,
        parameters={"attribute": attribute, "draws": draws},
    )
    sidecar = write_weight_table(table, out_path, manifest, reference_draws=draws)
    _outputs([Path(out_path), sidecar])


def _manifest_sidecar(out_path: str, manifest) -> Path:
    path = Path(out_path)
    return write_json(path.with_name(path.stem + ".manifest.json"), manifest)


@cli.command()
@click.option("--history", "history_path", required=True, type=click.Path(), help="History JSONL")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Label CSV")
@click.pass_context
def label(ctx, history_path, out_path):
    """Assign cancer / non_cancer / unknown labels from exam histories."""
    config = _config(ctx)
    labels = ShortcutAudit(config).ingestion.label_histories(history_path)
    frame = pd.DataFrame({"exam_id": [e for e, _ in labels], "label": [value.value for _, value in labels]})
    written = [write_csv(out_path, frame)]
    written.append(_manifest_sidecar(out_path, build_manifest("label", config.seed, inputs={"history": history_path})))
    _outputs(written)


@cli.command()
@click.option("--images", "images_path", required=True, type=click.Path(), help="Image score CSV")
@click.option("--metadata", "metadata_path", required=True, type=click.Path(), help="Exam metadata CSV")
@click.option("--schema", "schema_path", default=None, type=click.Path(), help="Attribute schema JSON")
@click.option("--image-level", is_flag=True, help="Emit one record per image instead of per exam")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Exam CSV")
@click.pass_context
def aggregate(ctx, images_path, metadata_path, schema_path, image_level, out_path):
    """Aggregate image scores into exam scores."""
    config = _config(ctx)
    schema = parse_schema(schema_path) if schema_path else None
    images = parse_image_scores(images_path)
    metadata = parse_exam_metadata(metadata_path, schema)
    records = image_level_records(images, metadata) if image_level else aggregate_exams(images, metadata)
    write_exam_scores(exams_to_frame(records), out_path)
    manifest = build_manifest(
        "aggregate", config.seed, inputs={"images": images_path, "metadata": metadata_path},
        schema_path=schema_path, parameters={"image_level": image_level},
    )
    _outputs([Path(out_path), _manifest_sidecar(out_path, manifest)])


@cli.command(name="filter")
@click.option("--predictions", required=True, type=click.Path(), help="Exam CSV")
@click.option("--attribute", required=True, help="Attribute to filter on")
@click.option("--keep", "keep_value", required=True, help="Value to keep")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Exam CSV")
@click.pass_context
def filter_cmd(ctx, predictions, attribute, keep_value, out_path):
    """Keep only exams with one attribute value (e.g. screening)."""
    config = _config(ctx)
    exams = ShortcutAudit(config).ingestion.load_exams(predictions)
    result = filter_by_attribute(exams, attribute, keep_value)
    write_exam_scores(result.exams, out_path)
    manifest = build_manifest(
        "filter", config.seed, inputs={"predictions": predictions},
        parameters={"attribute": attribute, "keep": keep_value, "kept": result.kept, "removed": result.removed},
    )
    _outputs([Path(out_path), _manifest_sidecar(out_path, manifest)])


@cli.command()
@click.option("--predictions", required=True, type=click.Path(), help="Exam CSV")
@click.option("--attribute", required=True, help="Attribute whose values are matched")
@click.option("--target", type=float, required=True, help="Target cancer prevalence in (0, 1)")
@click.option("--schema", "schema_path", default=None, type=click.Path(), help="Attribute schema JSON")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Run seed (default 0)")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Exam CSV")
@click.pass_context
def match(ctx, predictions, attribute, target, schema_path, seed, out_path):
    """Downsample each attribute value to a common cancer prevalence."""
    config = _config(ctx, seed)
    app = ShortcutAudit(config)
    schema = parse_schema(schema_path) if schema_path else None
    exams = app.ingestion.load_exams(predictions, schema)
    matched = app.mitigation.prevalence_matched_eval(exams, attribute, target, schema)
    write_exam_scores(matched, out_path)
    cancers = int((matched["label"] == ExamLabel.CANCER.value).sum())
    logger.info("Matched set: %d exams, %d cancers", len(matched), cancers)
    manifest = build_manifest(
        "match", config.seed, inputs={"predictions": predictions}, schema_path=schema_path,
        parameters={"attribute": attribute, "target": target},
    )
    _outputs([Path(out_path), _manifest_sidecar(out_path, manifest)])


@cli.command(name="schema")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory")
def schema_cmd(out_dir):
    """Write the JSON Schema documents of every report."""
    _outputs(write_schemas(out_dir))


def main() -> None:
    cli(prog_name="shortcut-audit")


if __name__ == "__main__":
    main()
