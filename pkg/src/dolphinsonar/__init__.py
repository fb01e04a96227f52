"""Feature-extracting model of bottlenose dolphin echo perception.

Echoes are described by three hierarchical features (MaPS, MiPS, P),
averaged over echo series into target images, and identified senior
feature first.
"""
from .errors import SonarError
from .features import (
    QUEFRENCY_GRID,
    FeatureTriple,
    QuefrencyGrid,
    average_features,
    extract_maps,
    extract_mips,
    extract_power,
    extract_triple,
    feature_arrays,
)
from .signal_core import (
    BANDS,
    Cepstrum,
    PowerSpectrum,
    SampledEcho,
    compute_cepstrum,
    compute_psd,
    window_to_cit,
)
from .synthesis import (
    EchoSpec,
    HighlightParams,
    NoiseReference,
    add_white_noise,
    highlight,
    synth_series,
    synth_three_component,
    synth_two_highlight,
)
from .target_model import (
    Discrimination,
    Identified,
    Indistinguishable,
    Level,
    TargetDatabase,
    TargetImage,
    TrainingConfig,
    Unknown,
    discriminate_sets,
    identify,
    train_target,
)

__version__ = "0.1.0"
