from .pipeline import (
    Blur,
    Downsample,
    NoObfuscation,
    Noise,
    ObfuscationMethod,
    Prepared,
    RubberSheet,
    StyleTransfer,
    apply_method,
    obfuscate,
    prepare,
)
from .polar import STRIP_SHAPE, swap_iris, unwrap, wrap
from .style import FeatureExtractor, style_features, style_transfer

__all__ = [
    "Blur", "Downsample", "NoObfuscation", "Noise", "ObfuscationMethod", "Prepared",
    "RubberSheet", "StyleTransfer", "apply_method", "obfuscate", "prepare",
    "STRIP_SHAPE", "swap_iris", "unwrap", "wrap",
    "FeatureExtractor", "style_features", "style_transfer",
]
