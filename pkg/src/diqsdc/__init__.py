"""Simulator and analytics for device-independent quantum secure direct communication."""

__version__ = "0.1.0"

from .analytics import EppSchedule, Variant, efficiency_modified, efficiency_original, max_distance, threshold_p  # noqa: E402
from .channel import ChannelParams  # noqa: E402
from .epp import BellDiagonalState, epp_circuit_oracle, plan_epp, purify_step  # noqa: E402
from .nla import apply_nla, fock_nla_oracle, nla_success_probability  # noqa: E402
from .protocol import EveModel, ProtocolConfig, TranscriptStats, run_modified, run_original  # noqa: E402
from .quantum import BellState, SectoredTwoPhotonState  # noqa: E402

__all__ = [
    "BellDiagonalState", "BellState", "ChannelParams", "EppSchedule", "EveModel", "ProtocolConfig",
    "SectoredTwoPhotonState", "TranscriptStats", "Variant", "apply_nla", "efficiency_modified",
    "efficiency_original", "epp_circuit_oracle", "fock_nla_oracle", "max_distance", "nla_success_probability",
    "plan_epp", "purify_step", "run_modified", "run_original", "threshold_p",
]
