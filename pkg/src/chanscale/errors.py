"""Exception hierarchy. Exit codes are attached so the CLI can map them."""


class ChanscaleError(Exception):
    exit_code = 1


class ValidationError(ChanscaleError, ValueError):
    """Bad input: malformed files, wrong orders, inconsistent metadata."""

    exit_code = 2


class NumericalError(ChanscaleError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""

    exit_code = 3


class StageError(ChanscaleError):
    """Wraps an error raised inside a pipeline stage with stage and input identity."""

    def __init__(self, stage, source, cause):
        self.stage = stage
        self.source = source
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        text = str(cause)
        if not text.startswith(str(source)):
            text = f"{source}: {text}"
        super().__init__(f"[{stage}] {text}")
