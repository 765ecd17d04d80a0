"""Link-level simulator for an RIS-assisted single-user SIMO-OFDM uplink.

Non-coherent differential PSK reception (no CSI) next to a coherent
pilot-based baseline, with closed-form SINR/SEP analysis cross-validated
against Monte Carlo statistics.
"""

from rislink.channel import Scenario, average_gains, gen_geometric, gen_iid
from rislink.mathkit import Region2D, RngStream

__all__ = [
    "Scenario",
    "RngStream",
    "Region2D",
    "gen_iid",
    "gen_geometric",
    "average_gains",
]

__version__ = "0.1.0"
