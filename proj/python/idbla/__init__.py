"""Crowd label aggregation: confusion-matrix models with per-item difficulty.

Everything heavy lives in the compiled `_core` extension; this package adds
path-based conveniences around its text parsers. Items, workers and classes
are 0-based in memory, while the CSV formats use 1-based class labels.
"""

from ._core import (
    ConfusionTensor,
    CviResult,
    DataError,
    DsState,
    Hyperparams,
    InitResult,
    LabelSet,
    Matrix,
    ModelKind,
    PosteriorSummary,
    SelectMethod,
    SelectResult,
    SelectRow,
    SynthConfig,
    SynthData,
    TruthMap,
    VariationalState,
    __version__,
    assign_levels,
    difficulty_quality,
    ds_em,
    error_rate,
    fixed_pi_matrices,
    generate_synthetic,
    glad_init,
    labels_to_csv,
    majority_vote,
    merge_summaries,
    nll_confusion,
    nll_idbla,
    parse_labels_text,
    parse_truth_text,
    posterior_mean_confusion,
    random_init,
    run_cvi,
    run_gibbs,
    select_H,
    truth_to_csv,
    worker_correct_rates,
)


def load_labels(path, num_classes=0):
    """Read an `item,worker,label` CSV file (labels 1..C) into a LabelSet."""
    with open(path, "r", encoding="utf-8") as f:
        return parse_labels_text(f.read(), num_classes)


def load_truth(path, labels):
    """Read an `item,label` CSV file joined onto `labels`.

    Returns (truth, warnings); rows whose item id the LabelSet does not know
    are skipped and reported in the warnings list.
    """
    with open(path, "r", encoding="utf-8") as f:
        return parse_truth_text(f.read(), labels)


def save_labels(path, labels):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(labels_to_csv(labels))


def save_truth(path, labels, truth):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(truth_to_csv(labels, truth))
