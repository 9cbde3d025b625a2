"""Python bindings for the os2e C++ core."""

from ._core import (
    Os2eError,
    average_precision,
    bayes_posterior,
    conditional_entropy,
    estimate_conditional,
    evaluate,
    exhaustive_select,
    fuse_streams,
    gen_responses,
    generate_regions,
    greedy_select,
    resize_bilinear,
    run_cli,
)

__all__ = [
    "Os2eError",
    "average_precision",
    "bayes_posterior",
    "conditional_entropy",
    "estimate_conditional",
    "evaluate",
    "exhaustive_select",
    "fuse_streams",
    "gen_responses",
    "generate_regions",
    "greedy_select",
    "resize_bilinear",
    "run_cli",
]
