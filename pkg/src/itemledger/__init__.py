"""itemledger: description-driven provenance and workflow engine.

Versioned item descriptions are instantiated into items whose lifecycles
are activity graphs; every accepted change lands as one seven-Ws event
in an append-only log from which the whole store replays. On top sit a
dataset/pipeline/analysis layer, a deterministic job broker, query and
export services, and an HTTP/CLI gateway.
"""

from .broker import BrokerConfig, SimBroker
from .clock import AnchoredClock, SystemClock, TickingClock
from .ledger import Ledger

__version__ = "0.1.0"

__all__ = [
    "AnchoredClock",
    "BrokerConfig",
    "Ledger",
    "SimBroker",
    "SystemClock",
    "TickingClock",
    "__version__",
]
