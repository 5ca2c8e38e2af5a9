"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the physical model."""


class SingularityError(ArithmeticError):
    """A model denominator vanished."""


class DivergenceError(ArithmeticError):
    """A wave-train series ratio has magnitude >= 1."""


class InputError(ValueError):
    """Malformed or inconsistent input file.

    ``line`` and ``column`` are 1-based when known.
    """

    def __init__(self, message, path=None, line=None, column=None):
        self.message = message
        self.path = path
        self.line = line
        self.column = column
        super().__init__(str(self))

    def __str__(self):
        where = []
        if self.path is not None:
            where.append(str(self.path))
        if self.line is not None:
            where.append(f"line {self.line}")
            if self.column is not None:
                where.append(f"column {self.column}")
        prefix = ", ".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message
