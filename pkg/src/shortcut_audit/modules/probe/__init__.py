from .probe import ProbeModule, eval_probe, probe_report, probe_scores, read_feature_vectors, train_probe

__all__ = ["ProbeModule", "eval_probe", "probe_report", "probe_scores", "read_feature_vectors", "train_probe"]
