"""Ruzsa-Szemerédi coded caching schemes, centralized and decentralized.

Construct Ruzsa-Szemerédi graphs, run XOR-coded delivery and decoding on real
bytes, turn a centralized scheme into a decentralized one with two-choice
placement, and simulate the underlying balls-and-bins processes.
"""

from . import enums, exceptions, utils
from ._ballsbins import (
    BinsState,
    ChurnScript,
    DynamicResult,
    HeightHistogram,
    bound_dynamic,
    bound_static,
    draw_choices,
    height_histogram,
    make_adversary,
    run_dynamic,
    run_static,
)
from ._codec import (
    CacheState,
    DeliveryReport,
    Transmission,
    TransmissionBatch,
    decode,
    deliver,
    dump_transmissions,
    load_transmissions,
    place,
    verify_delivery,
)
from ._decentral import (
    Assignment,
    DecentralizedDelivery,
    DeliveryPlan,
    JoinRecord,
    RateReport,
    VirtualPool,
    build_rounds,
    deliver_decentralized,
    join_overhead_bits,
    leave,
    measure_rate,
    place_all,
    run_churn,
    sample_join,
)
from ._events import ChurnEvent, EventLog, read_event_log, write_event_log
from ._graph_io import read_graph, write_graph
from ._kprime import KPrimeChoice, select_kprime
from ._library import DUMMY_FILE, DemandVector, Library, make_demands
from ._replay import ReplayResult, replay_events
from ._rsgraph import (
    RsGraph,
    SchemeParams,
    ValidationReport,
    Violation,
    construct_binomial,
    construct_mn,
    scheme_params,
    validate_rs,
)
from ._version import __version__

__all__ = [
    "DUMMY_FILE",
    "Assignment",
    "BinsState",
    "CacheState",
    "ChurnEvent",
    "ChurnScript",
    "DecentralizedDelivery",
    "DeliveryPlan",
    "DeliveryReport",
    "DemandVector",
    "DynamicResult",
    "EventLog",
    "HeightHistogram",
    "JoinRecord",
    "KPrimeChoice",
    "Library",
    "RateReport",
    "ReplayResult",
    "RsGraph",
    "SchemeParams",
    "Transmission",
    "TransmissionBatch",
    "ValidationReport",
    "Violation",
    "VirtualPool",
    "__version__",
    "bound_dynamic",
    "bound_static",
    "build_rounds",
    "construct_binomial",
    "construct_mn",
    "decode",
    "deliver",
    "deliver_decentralized",
    "draw_choices",
    "dump_transmissions",
    "enums",
    "exceptions",
    "height_histogram",
    "join_overhead_bits",
    "leave",
    "load_transmissions",
    "make_adversary",
    "make_demands",
    "measure_rate",
    "place",
    "place_all",
    "read_event_log",
    "read_graph",
    "replay_events",
    "run_churn",
    "run_dynamic",
    "run_static",
    "sample_join",
    "scheme_params",
    "select_kprime",
    "utils",
    "validate_rs",
    "verify_delivery",
    "write_event_log",
    "write_graph",
]
