"""Exception hierarchy for carpetdim."""


class CarpetError(Exception):
    """Base class for all carpetdim errors."""


class MalformedSpec(CarpetError):
    """Carpet data is structurally broken (bad coefficients, empty rows, parse errors)."""


class InvalidCarpet(CarpetError):
    """A carpet failed hypothesis validation where a validated carpet is required."""


class InfeasibleLayout(CarpetError):
    """Requested Sierpinski layout cannot satisfy the strict-gap inequalities."""


class PerturbationTooLarge(CarpetError):
    """Perturbed carpet failed validation after the allowed rescale attempts."""


class NonContractive(CarpetError):
    """A fiber map system is not uniformly contracting (defensive check)."""


class NonPrimitive(CarpetError):
    """Leading transfer-operator eigenvalue is not simple and positive (defensive check)."""


class NoConvergence(CarpetError):
    """An iterative numerical procedure did not converge within its iteration budget."""


class BracketFailure(CarpetError):
    """A bracketed root search found no sign change in the admissible interval."""


class DegenerateFamily(CarpetError):
    """The fiber branch sum is cohomologous to a constant; the tilt parameter is undefined.

    This is the trivial-carpet regime (all rows carry the same branch structure).
    """


class NoRootInUnitInterval(CarpetError):
    """The level-n fiber equation has no root in [0, 1]."""


class IterationLimit(CarpetError):
    """Optimizer hit its iteration cap before meeting the convergence test."""


class TooDeep(CarpetError):
    """Requested symbolic depth exceeds the enumeration guard."""
