"""Finite-information quantities: lazily actualized binary digits with rational propensities."""

__version__ = "0.1.0"

from .fiq import (  # noqa: E402
    HALF,
    Fiq,
    FiqError,
    Propensity,
    binary_entropy,
    digit_status,
    information_content,
    validate,
)
from .actualization import (  # noqa: E402
    MeasurementEngine,
    RandomnessSource,
    SpontaneousEngine,
    actualize_next,
    measure,
    sample_digit,
    step_spontaneous,
)
from .domains import (  # noqa: E402
    ComputableReal,
    PrecisionExceededError,
    RationalQuantity,
    TruncatedReal,
    digit_at,
    non_closure_demo,
    to_fiq,
)
from .dynamics import RotationMap, ShiftMap, evolve_exact, evolve_fiq, evolve_fiq_rotation  # noqa: E402
