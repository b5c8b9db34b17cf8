"""abflux: gauge potentials, loop phases and wave packets on a lattice."""

from .errors import (
    AbfluxError,
    AnchorOutsideRegion,
    ConfigError,
    GridMismatch,
    InconsistentState,
    LinearSolveFailure,
    NoConvergence,
    NoFringe,
    NonPlanarContour,
    NoTransmission,
    PacketOverlapsWall,
    PacketTooNarrow,
    PointOnContour,
    RangeError,
    RegionNotSimplyConnected,
    SchemaError,
    SingularEdge,
    SingularEncounter,
    SingularPoint,
)
from .gauge_fields import (
    EPS_STRING,
    EMSample,
    FieldSpec,
    FiniteSolenoid,
    FluxLine,
    GaugeFunction,
    GaugeShifted,
    MonopoleStringNorth,
    MonopoleStringSouth,
    PhysConstants,
    UniformB,
    derive_fields,
    eval_magnetic_field,
    eval_vector_potential,
    gauge_transform_potentials,
    numeric_curl,
    polynomial_gauge,
    spec_from_dict,
    spec_to_dict,
    with_flux,
)
from .path_integrals import (
    DEFAULT_QUADRATURE,
    Path,
    QuadratureSpec,
    ab_phase,
    enclosed_flux_stokes,
    line_integral,
    winding_number,
)

from .schrodinger import (
    HAVE_NUMBA,
    Absorber,
    Grid,
    LinkPhases,
    Propagator,
    PropagatorConfig,
    WaveField,
    apply_hamiltonian,
    born_density,
    build_link_phases,
    construct_ab_solution,
    gauge_transform_wavefunction,
    init_gaussian_packet,
    load_wavefield,
    phase_winding,
    polar_decompose,
    save_wavefield,
    schrodinger_residual,
    step,
)
from .experiments import (
    DoubleSlitGeometry,
    FringeRecord,
    RingModel,
    Trajectory,
    analytic_two_path_pattern,
    classical_trajectory,
    dirac_quantization_check,
    extract_fringe_phase,
    monopole_interference_phase,
    ring_fluxoid,
    run_double_slit,
    trap_flux,
)

__version__ = "0.1.0"

from .config import (  # noqa: E402  (cli layers import the version above)
    EXPERIMENTS,
    DoubleSlitParams,
    FluxQuantParams,
    GaugeCheckParams,
    MonopoleParams,
    RunConfig,
    parse_config,
)
from .cli import main, run  # noqa: E402
