"""Deterministic, quantity-conserving simulator of kinetic automaton (kinon)
networks: tunable collision filters, regular-grid topologies, macrodynamic
analytics, batch CLI and an interactive steering service."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    CollisionTrace,
    KinonState,
    ModelParams,
    PsiSpec,
    collide,
    decode,
    encode,
    kinetic_map,
    leaky_update,
    modulate,
    psi_eval,
)
from .network import (  # noqa: F401
    BalanceReport,
    CycleStats,
    FieldSnapshot,
    LatticeState,
    Network,
    build_grid,
    collide_all,
    init_singularity,
    propagate,
    step,
    validate_balanced,
)
from .analysis import (  # noqa: F401
    MacroRecord,
    MacroSeries,
    ShapeMetrics,
    StasisReport,
    detect_stasis,
    dihedral_asymmetry,
    exchange_rate,
    shape_metrics,
    turnover_rate,
)
from .io import (  # noqa: F401
    ConfigError,
    IsolineSet,
    RunConfig,
    StateSnapshot,
    extract_isolines,
    overlay_contours,
    parse_config,
    render_frame,
    serialize_config,
)
from .run import AuditError, SimulationRun  # noqa: F401
