"""Python surface for the criteria-optimization core.

Re-exports the compiled operations: task discrepancies, evaluation metrics,
response parsing, template rendering, and the deterministic dataset split.
"""

try:
    from . import _tide  # installed package layout
except ImportError:
    import _tide  # build-tree layout: extension module on sys.path

TaskKind = _tide.TaskKind
ari_f1 = _tide.ari_f1
classification_f1 = _tide.classification_f1
d_acd = _tide.d_acd
d_aes = _tide.d_aes
d_ari = _tide.d_ari
parse_score = _tide.parse_score
parse_unit_lines = _tide.parse_unit_lines
parse_update = _tide.parse_update
parse_verdict = _tide.parse_verdict
pearson = _tide.pearson
qwk = _tide.qwk
render_template = _tide.render_template
split_indices = _tide.split_indices
strip_reasoning = _tide.strip_reasoning

__all__ = [
    "TaskKind",
    "ari_f1",
    "classification_f1",
    "d_acd",
    "d_aes",
    "d_ari",
    "parse_score",
    "parse_unit_lines",
    "parse_update",
    "parse_verdict",
    "pearson",
    "qwk",
    "render_template",
    "split_indices",
    "strip_reasoning",
]
