"""System-level simulation of hybrid beamforming with multi-user SDMA at mmWave.

The package covers uniform planar arrays and DFT codebooks, a clustered
Urban-Macro channel, codebook and MMSE beamforming over analog ports, an
SINR-to-BLER link abstraction, TDMA and padded SDMA round-robin schedulers,
and a deterministic subframe-stepped engine tying them together.
"""

from .arrays import ArrayGeometry, Codebook, dft_codebook, effective_channel, upa_response
from .beamforming import (CodebookBeamformer, MmseBeamformer, cbf_select, get_beamformer,
                          mmse_precoder, ul_mmse_combiner)
from .channel import drop_ues, generate_clusters, pathloss_uma, realize
from .config import PRESETS, ConfigError, ScenarioConfig, TrafficConfig, load_config, preset
from .engine import DropResult, Summary, TrafficSource, aggregate, cbr_arrivals, run_drop, run_drops
from .phy import LinkBudget, effective_sinr, select_mcs, tb_size, tb_verdict
from .scheduler import Direction, FrameConfig, pmrs_schedule, tmrs_schedule, validate_schedule

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "Codebook", "dft_codebook", "effective_channel", "upa_response",
    "CodebookBeamformer", "MmseBeamformer", "cbf_select", "get_beamformer", "mmse_precoder",
    "ul_mmse_combiner", "drop_ues", "generate_clusters", "pathloss_uma", "realize",
    "PRESETS", "ConfigError", "ScenarioConfig", "TrafficConfig", "load_config", "preset",
    "DropResult", "Summary", "TrafficSource", "aggregate", "cbr_arrivals", "run_drop",
    "run_drops", "LinkBudget", "effective_sinr", "select_mcs", "tb_size", "tb_verdict",
    "Direction", "FrameConfig", "pmrs_schedule", "tmrs_schedule", "validate_schedule",
]
