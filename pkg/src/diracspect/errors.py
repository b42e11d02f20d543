"""Exception hierarchy shared across the package."""


class DiracSpectError(Exception):
    """Base class for all library-specific failures."""


class StructureViolation(DiracSpectError):
    """A matrix field does not have the symmetric trace-free off-diagonal form."""


class StepSizeUnderflow(DiracSpectError):
    """Propagation would need more sub-steps than the safety cap allows."""


class RootNotBracketed(DiracSpectError):
    """No sign change found in a search window after maximal scan widening."""

    def __init__(self, n: int, window: tuple):
        self.n = n
        self.window = window
        super().__init__(
            f"no root bracketed for index n={n} in window "
            f"[{window[0]:.6g}, {window[1]:.6g}] after maximal widening"
        )


class DuplicateRoot(DiracSpectError):
    """Two search windows resolved to the same root within tolerance."""

    def __init__(self, n: int, root: float):
        self.n = n
        self.root = root
        super().__init__(f"indices near n={n} claim the same root {root:.12g}")


class NonPositiveAlpha(DiracSpectError):
    """A norming constant came out non-positive, signalling corrupted enumeration."""

    def __init__(self, n: int, value: float):
        self.n = n
        self.value = value
        super().__init__(f"norming constant alpha_{n} = {value:.6g} is not positive")


class NotPositive(DiracSpectError):
    """A leading principal block of the discretized operator is not positive."""

    def __init__(self, t_index: int):
        self.t_index = t_index
        super().__init__(f"leading principal block {t_index} is not positive definite")


class SingularSystem(DiracSpectError):
    """A per-slice linear system is numerically singular."""

    def __init__(self, i: int, cond: float):
        self.i = i
        self.cond = cond
        super().__init__(f"slice {i}: system condition estimate {cond:.3g} exceeds limit")


class NearZeroSymbol(DiracSpectError):
    """A Fourier symbol value 1 + e_n(f) is too close to zero to invert."""

    def __init__(self, n: int, value: complex):
        self.n = n
        self.value = value
        super().__init__(f"symbol 1 + e_{n}(f) = {value:.3g} is within 1e-8 of zero")


class AliasRisk(DiracSpectError):
    """Too few samples to resolve the requested Fourier coefficient."""

    def __init__(self, n: int, count: int):
        self.n = n
        self.count = count
        super().__init__(f"coefficient n={n} needs >= {4 * abs(n)} samples, got {count}")
