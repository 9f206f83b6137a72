"""Bit-parallel boolean-circuit classifiers.

Binary inputs are stored feature-major as packed machine words, so one
bitwise operation evaluates a gate on word_size examples at once.  Circuits
are full a-ary trees of lookup-table gates, trained greedily bottom-up and
refined by leaf-rewiring hill climbing.
"""

from ._backend import BACKEND, get_kernels
from .bitcore import (
    MAX_ARITY,
    BitDataset,
    FeaturePair,
    PatternSlices,
    count_per_slice,
    pack_and_transpose,
    tensor_product,
)
from .circuit import (
    CircuitTree,
    EvalCache,
    OpCounter,
    TruthTable,
    apply_gate,
    compile_gate,
    deserialize,
    evaluate,
    export_netlist,
    gate_count_universe,
    predict,
    serialize,
    tree_shape,
)
from .data import (
    CubesSpec,
    GaussSpec,
    QuantizeSpec,
    gen_cubes,
    gen_gauss,
    load_amat,
    load_cifar10,
    load_idx,
    quantize_msb,
    read_bgd,
    write_bgd,
)
from .learn import (
    PatternCounts,
    TrainConfig,
    TrainReport,
    error_rate,
    fit_gate_accuracy,
    fit_gate_infogain,
    gather_pattern_counts,
    hill_climb,
    info_gain_of_split,
    train_circuit,
    train_greedy,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BitDataset",
    "CircuitTree",
    "CubesSpec",
    "EvalCache",
    "FeaturePair",
    "GaussSpec",
    "MAX_ARITY",
    "OpCounter",
    "PatternCounts",
    "PatternSlices",
    "QuantizeSpec",
    "TrainConfig",
    "TrainReport",
    "TruthTable",
    "apply_gate",
    "compile_gate",
    "count_per_slice",
    "deserialize",
    "error_rate",
    "evaluate",
    "export_netlist",
    "fit_gate_accuracy",
    "fit_gate_infogain",
    "gate_count_universe",
    "gather_pattern_counts",
    "gen_cubes",
    "gen_gauss",
    "get_kernels",
    "hill_climb",
    "info_gain_of_split",
    "load_amat",
    "load_cifar10",
    "load_idx",
    "pack_and_transpose",
    "predict",
    "quantize_msb",
    "read_bgd",
    "serialize",
    "tensor_product",
    "train_circuit",
    "train_greedy",
    "tree_shape",
    "write_bgd",
]
