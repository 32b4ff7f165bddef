"""Row-column intersection table question answering."""

from ._core import (
    Bundle,
    Error,
    NotFoundError,
    Service,
    Table,
    ValidationError,
    aggregate,
    derive_targets,
    evaluate_ranking,
    generate_corpus,
    heatmap,
    load_tables,
    parse_number,
    rank_cells,
    serialize_column,
    serialize_row,
    train,
    weak_supervise,
)

__all__ = [
    "Bundle",
    "Error",
    "NotFoundError",
    "Service",
    "Table",
    "ValidationError",
    "aggregate",
    "derive_targets",
    "evaluate_ranking",
    "generate_corpus",
    "heatmap",
    "load_tables",
    "parse_number",
    "rank_cells",
    "serialize_column",
    "serialize_row",
    "train",
    "weak_supervise",
]
