class ThetaForgeError(Exception):
    pass


class NotSymmetric(ThetaForgeError, ValueError):
    def __init__(self, deviation: float):
        self.deviation = deviation
        super().__init__(f"Gram matrix is not symmetric (relative deviation {deviation:.3e})")


class NotPositiveDefinite(ThetaForgeError, ValueError):
    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(f"Gram matrix is not positive definite (Cholesky pivot {pivot} <= 0)")


class CountCapExceeded(ThetaForgeError, RuntimeError):
    def __init__(self, lower_bound: float, cap: int):
        self.lower_bound = lower_bound
        self.cap = cap
        super().__init__(f"Enumeration would visit at least {lower_bound:.3g} points (cap {cap})")


class NotSaturated(ThetaForgeError, ValueError):
    def __init__(self, divisors):
        self.divisors = list(divisors)
        super().__init__(f"Sublattice is not saturated (elementary divisors {self.divisors})")


class RankDeficient(ThetaForgeError, ValueError):
    pass


class DomainError(ThetaForgeError, ValueError):
    pass


class InconsistentBounds(ThetaForgeError, RuntimeError):
    pass


class ViolationDetected(ThetaForgeError, RuntimeError):
    def __init__(self, message: str, witness=None):
        self.witness = witness or {}
        super().__init__(message)


class GridTooCoarse(ThetaForgeError, ValueError):
    pass


class BetaBelowCertified(ThetaForgeError, ValueError):
    def __init__(self, beta: float, beta_min: float):
        self.beta = beta
        self.beta_min = beta_min
        super().__init__(f"beta={beta:g} is below the certified beta_min={beta_min:g}")


class XBelowInfimum(ThetaForgeError, ValueError):
    def __init__(self, x: float, infimum: float):
        self.x = x
        self.infimum = infimum
        super().__init__(f"x={x:g} must exceed the energy infimum {infimum:g}")


class GridOverflow(ThetaForgeError, RuntimeError):
    pass


class NotSummableAtDepth(ThetaForgeError, RuntimeError):
    pass


class LatticeFormatError(ThetaForgeError, ValueError):
    def __init__(self, message: str, path: str = "", line: int = 0, column: int = 0):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}:{column}: " if path else ""
        super().__init__(f"{where}{message}")
