"""voxstats: bispectral and cepstral forensics for AI-synthesized speech.

The pipeline decodes WAV clips, extracts higher-order spectral statistics
(segment-averaged bicoherence magnitude/phase moments) and cepstral
statistics (MFCC and its first two differences), and feeds either classical
classifiers or a small conv-recurrent detector trained on 32x32 mel
spectrogram images.
"""

__version__ = "0.1.0"

from .audio_io import AudioClip, ClassLabel, ManifestEntry
from .config import CrnnConfig, FeatureConfig, config_hash
from .features import FeatureTable, FeatureVector, Moments

__all__ = [
    "AudioClip",
    "ClassLabel",
    "CrnnConfig",
    "FeatureConfig",
    "FeatureTable",
    "FeatureVector",
    "ManifestEntry",
    "Moments",
    "config_hash",
    "__version__",
]
