"""Full counting statistics and Fisher information of a squeezed dispersive readout."""

from .information import (
    CountDistribution,
    CumulantSet,
    FisherReport,
    MeanFieldProvider,
    NumericProvider,
    cfi_closed_form,
    cfi_from_distribution,
    cfi_gaussian,
    cumulants,
    distribution,
    eta_resonance,
    fisher_report,
    qfi,
    qfi_closed_form,
    quantum_efficiency,
)
from .liouvillian import (
    Frame,
    GeneralizedState,
    TiltedGenerator,
    build_qfi_generator,
    build_tilted,
    cumulant_rates_by_propagation,
    dominant_eigenvalue,
    propagate,
)
from .meanfield import MeanFields, cgf_rate, closed_form_K, qfi_scalar, solve_fields
from .params import DispersiveInput, ModelParams, dispersive_shift, hyperbolic_factors

__version__ = "0.1.0"
