"""Exception hierarchy shared across the package.

ValidationError covers bad user input (CLI exit code 1); NumericalError
covers failures of the linear algebra (CLI exit code 2).
"""


class GlgpError(Exception):
    pass


class ValidationError(GlgpError, ValueError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(GlgpError, RuntimeError):
    pass
