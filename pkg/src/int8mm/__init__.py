"""Int8 quantization schemes for matrix multiplication.

Implements absmax, zeropoint, row-wise and vector-wise quantization, exact
integer GEMM with 32-bit accumulation, and mixed-precision decomposition
that routes outlier feature columns through a high-precision path. Ships
with an outlier-feature analyzer, a toy transformer for end-to-end scheme
comparisons and ablations, and a CLI for sweeps, analysis and benchmarks.
"""

from .bench import BenchRow, run_bench, write_bench_csv
from .gemm import (
    MAX_INNER_DIM,
    GemmOverflowError,
    MatmulResult,
    ParamsMismatchError,
    absmax_matmul,
    dequantize_output,
    extract_outlier_columns,
    int8_gemm_i32,
    llm_int8_matmul,
    ordered_matmul_f64,
    vectorwise_matmul,
    zeropoint_gemm_i32,
    zeropoint_matmul,
)
from .memory import MemoryEstimate, estimate_memory
from .outliers import (
    OutlierReport,
    OutlierSet,
    StackDirError,
    detect_outlier_dims,
    load_stack,
    outlier_stats,
    random_control_dims,
    save_stack,
    synthetic_stack,
    write_report_csv,
    write_report_json,
    zero_feature_dims,
)
from .qt8 import (
    BadMagicError,
    QT8Error,
    TruncatedFileError,
    UnknownDtypeError,
    UnsupportedVersionError,
    read_tensor,
    write_tensor,
)
from .quantize import (
    AbsmaxParams,
    ColwiseParams,
    QuantizedTensor,
    QuantParams,
    RowwiseParams,
    ZeropointParams,
    absmax_quantize,
    colwise_quantize,
    dequantize,
    rowwise_quantize,
    round_half_away,
    vectorwise_params,
    zeropoint_quantize,
)
from .sweep import SweepRow, mean_errors, planted_pair, run_sweep, run_trial, write_sweep_csv
from .tensors import (
    DenseMatrix,
    HiddenStateStack,
    Int8Matrix,
    Int32Matrix,
    ShapeMismatchError,
    seeded_random_matrix,
)
from .transformer import (
    ABSMAX,
    EXACT,
    VECTORWISE,
    ZEROPOINT,
    AblationResult,
    ForwardTrace,
    LinearBackend,
    OutlierInjection,
    ToyModel,
    ToyModelConfig,
    ablate_and_measure,
    build_model,
    forward,
    llm_int8_backend,
    load_model,
    save_model,
)

__version__ = "0.1.0"
