"""Cycle-accurate simulator and analysis toolkit for a scrambler-based
key-leakage hardware Trojan: the Trojan-bearing IP core, the adversary's
key extractor, a noisy channel, a randomness-test battery, and a
trigger-parameter analyzer with class-membership checking."""

from .aes import AES128, encrypt_block
from .channel import ChannelModel, apply_channel
from .errors import ConfigError, ContractError
from .extractor import (
    DetectionReport,
    ExtractorConfig,
    ExtractorState,
    Verdict,
    WindowVerdict,
    classify_window,
    extractor_reset,
    extractor_step,
    recover_key,
)
from .harness import (
    ScenarioConfig,
    default_config,
    gen_design,
    run_scenario,
    sweep,
)
from .hatch import (
    AlphaEstimate,
    DesignGraph,
    ModuleDecl,
    SimulationSetup,
    TriggerQuad,
    TriggerStateSet,
    Wire,
    achievable_region,
    class_membership,
    implicit_behavior_factor,
    load_design,
    measure_payload_delay,
    payload_delay_min,
    save_design,
    shipped_design_path,
    trigger_dimension,
    trigger_locality,
)
from .host import (
    HostConfig,
    HostRun,
    HostState,
    KeyMaterial,
    TrafficModel,
    TrafficTrace,
    TriggerLog,
    generate_traffic,
    host_reset,
    host_step,
    run_host,
)
from .lfsr import (
    DEFAULT_TAPS,
    DEFAULT_WIDTH,
    LfsrConfig,
    ScramblerState,
    descramble_step,
    descramble_stream,
    lfsr_feedback,
    scramble_step,
    scramble_stream,
)
from .stats import TestReport, randomness_battery

__version__ = "0.1.0"
