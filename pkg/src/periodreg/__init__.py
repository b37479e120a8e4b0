"""Internal-model regulators for periodic disturbance rejection.

The package covers the full loop from controller synthesis to
verification: oscillator-bank internal models with damped weights
(:mod:`periodreg.internal_model`), nonlinear benchmark and test plants
(:mod:`periodreg.plants`), fixed-step closed-loop integration
(:mod:`periodreg.simulate`), steady-state error measures and harmonic
content (:mod:`periodreg.analysis`), frequency-domain gain curves and
bounds (:mod:`periodreg.freqdomain`), and structural certification
(:mod:`periodreg.verify`).
"""

from .analysis import (
    HarmonicSpectrum,
    SteadyWindow,
    fft_spectrum,
    fourier_at,
    noisy_period_window,
    norms,
    sigma_scaling_check,
    steady_window,
    write_norms_csv,
)
from .freqdomain import (
    BodeCurve,
    TransferCurve,
    bode_linear,
    bound_constants,
    transfer_curve,
    transfer_gain,
    transfer_gain_normalized,
)
from .internal_model import (
    CoefficientSequence,
    OscillatorBank,
    RegulatorConfig,
    RegulatorState,
    SequenceError,
    build_bank,
    control_output,
    controller_rhs,
    make_bank,
    zeta_coordinates,
)
from .plants import (
    NormalFormReduction,
    PlantModel,
    example_plant,
    harmonic_signal,
    linear_test_plant,
    reduce_relative_degree,
)
from .simulate import (
    NoiseModel,
    SimConfig,
    SimulationOverflowError,
    Trajectory,
    make_noise,
    run,
    step_rk4,
)
from .verify import (
    CertificationReport,
    certify,
    check_hurwitz,
    check_observability,
    check_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "BodeCurve",
    "CertificationReport",
    "CoefficientSequence",
    "HarmonicSpectrum",
    "NoiseModel",
    "NormalFormReduction",
    "OscillatorBank",
    "PlantModel",
    "RegulatorConfig",
    "RegulatorState",
    "SequenceError",
    "SimConfig",
    "SimulationOverflowError",
    "SteadyWindow",
    "Trajectory",
    "TransferCurve",
    "bode_linear",
    "bound_constants",
    "build_bank",
    "certify",
    "check_hurwitz",
    "check_observability",
    "check_sequence",
    "control_output",
    "controller_rhs",
    "example_plant",
    "fft_spectrum",
    "fourier_at",
    "harmonic_signal",
    "linear_test_plant",
    "make_bank",
    "make_noise",
    "noisy_period_window",
    "norms",
    "reduce_relative_degree",
    "run",
    "sigma_scaling_check",
    "steady_window",
    "step_rk4",
    "transfer_curve",
    "transfer_gain",
    "transfer_gain_normalized",
    "write_norms_csv",
    "zeta_coordinates",
]
