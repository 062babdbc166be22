"""Fibonacci codeword quantization, fibbinary compression and OR-multiplier costing."""

from .codec import (
    CompressedStream,
    CompressionReport,
    IndexSequence,
    choose_common,
    compress_grouped,
    compression_ratio,
    pack_6bit,
    word_count_compress,
    word_count_decompress,
    word_length_compress,
)
from .errors import (
    ContainerFormatError,
    ContractViolation,
    CorruptStreamError,
    DivergenceError,
    DomainError,
    FibcqError,
    UnsupportedError,
)
from .fibbinary import (
    FibbinaryTable,
    ZeckendorfExpansion,
    fibbinary_table,
    index_to_value,
    is_fibbinary,
    nearest_fibbinary,
    value_to_index,
    zeckendorf,
)
from .quantizer import (
    AffineParams,
    QuantizedTensor,
    Scheme,
    apply_fcq,
    dequantize,
    mse,
    quantize_fcq,
    quantize_uniform,
    reconstruct,
)

__version__ = "0.1.0"
