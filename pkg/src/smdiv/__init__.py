"""Transmit-diversity signalling for spatial modulation.

Signal sets, codebooks, three equivalent ML detectors, coding-gain
analysis, and a reproducible Monte Carlo SER harness.
"""

from .constellation import (
    Constellation,
    Kind,
    Normalization,
    PamGrid,
    ROTATION_ANGLE,
    build_constellation,
    constellation_from_name,
    cpd,
    hard_limit,
    rotate,
)
from .channel import (
    ChannelRealization,
    NoiseModel,
    add_noise,
    draw_channel,
    realify_matrix,
    realify_vector,
    snr_to_sigma2,
    substream,
)
from .codebooks import (
    CodewordLabel,
    Scheme,
    SchemeConfig,
    SpaceTimeCodeword,
    deinterleave,
    encode,
    enumerate_codewords,
    high_dosm_encode,
    high_dosm_template,
    interleave,
    low_dosm_encode,
    make_config,
    rate_bpcu,
    sm_encode,
    stbc_sm_rate,
)
from .decoders import (
    DecodeResult,
    RealDecompState,
    build_real_decomp,
    ml_exhaustive_decode,
    ml_mrc_decode,
    ml_sm_decode,
    mrc_ciod_decode,
    qr_hardlimit_decode,
)
from .analysis import (
    GainReport,
    PhaseAssignment,
    coding_gain,
    det_distance,
    diversity_certificate,
    nvd_scan,
    optimize_phases,
)
from .simkit import (
    SchemeRun,
    SimConfig,
    SimResult,
    estimate_diversity_slope,
    run_ser_sweep,
    verify_decoders,
    wilson_interval,
)

__all__ = [name for name in dir() if not name.startswith("_")]
