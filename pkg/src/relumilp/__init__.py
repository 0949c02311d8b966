"""Exact MILP embedding of ReLU networks with big-M bound tightening.

The package bundles a small modeling stack (dense simplex LP solver and a
branch-and-bound MILP solver), the 0-1 big-M encoding of dense ReLU
networks, five bound-tightening procedures, a minimal SGD trainer, and
reproducible experiment builders.
"""

from .net import (
    LabeledDataset,
    ReluNetwork,
    forward,
    forward_batch,
    forward_trace,
    he_initialize,
    load_network,
    mape,
    save_network,
)
from .trainer import TrainConfig, gradients, loss, sgd_train
from .lp import LinearModel, LpParams, LpSolution, solve_lp, write_lp
from .milp import MilpModel, MilpResult, SolveParams, solve_milp
from .encode import (
    BoundSet,
    NetworkEmbedding,
    RelaxSpec,
    build_problem,
    embed_network,
    relu_relaxation_upper,
)
from .bt import BtReport, BtScheme, tighten, mad, mrd, bbp_threshold, parse_scheme

__all__ = [
    "LabeledDataset",
    "ReluNetwork",
    "forward",
    "forward_batch",
    "forward_trace",
    "he_initialize",
    "load_network",
    "mape",
    "save_network",
    "TrainConfig",
    "gradients",
    "loss",
    "sgd_train",
    "LinearModel",
    "LpParams",
    "LpSolution",
    "solve_lp",
    "write_lp",
    "MilpModel",
    "MilpResult",
    "SolveParams",
    "solve_milp",
    "BoundSet",
    "NetworkEmbedding",
    "RelaxSpec",
    "build_problem",
    "embed_network",
    "relu_relaxation_upper",
    "BtReport",
    "BtScheme",
    "tighten",
    "mad",
    "mrd",
    "bbp_threshold",
    "parse_scheme",
]
