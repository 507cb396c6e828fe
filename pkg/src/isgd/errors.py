class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss, gradient or weight.

    ``report`` carries whatever the trainer had recorded up to the failure,
    when raised from inside a training run.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class WorkerError(RuntimeError):
    """A data-parallel worker failed; no partial reduce is returned."""
