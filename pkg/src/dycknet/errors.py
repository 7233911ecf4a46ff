"""Exception hierarchy shared by every module in the package."""


class DycknetError(Exception):
    """Base class for all package errors."""


class UnknownSymbol(DycknetError, KeyError):
    def __init__(self, symbol, alphabet=None):
        self.symbol = symbol
        self.alphabet = alphabet
        msg = f"unknown symbol {symbol!r}"
        if alphabet is not None:
            msg += f" (alphabet: {' '.join(map(str, alphabet))})"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class AlphabetMismatch(DycknetError, ValueError):
    pass


class PreconditionError(DycknetError, ValueError):
    pass


class DomainError(DycknetError, ValueError):
    """Argument outside the domain of an elementary function."""


class SingularMatrixError(DycknetError, ArithmeticError):
    def __init__(self, det):
        self.det = det
        super().__init__(f"matrix is singular (determinant found: {det})")


class NumericError(DycknetError, ArithmeticError):
    """Numeric failures: illegal infinity arithmetic, division by zero, bad precision."""


class KTooSmall(NumericError):
    pass


class GateDegenerate(NumericError):
    pass


class BoundViolated(NumericError):
    def __init__(self, step, error, bound, channel="h1"):
        self.step = step
        self.error = error
        self.bound = bound
        self.channel = channel
        super().__init__(
            f"{channel} tracking error {float(error):.3e} at t={step} "
            f"is not below the bound {float(bound):.3e}"
        )


class StateBudgetExceeded(DycknetError, RuntimeError):
    def __init__(self, budget):
        self.budget = budget
        super().__init__(f"more than {budget} reachable quantized states")


class Ambiguous(DycknetError, ValueError):
    """Two candidate states are equally close to a hidden vector."""


class DivisionByZero(NumericError, ZeroDivisionError):
    pass
