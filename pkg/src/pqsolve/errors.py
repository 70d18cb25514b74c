class PQSolveError(Exception):
    pass


class MaxIterExceeded(PQSolveError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class InadmissibleLambda(PQSolveError):
    """The constructed sub/supersolution pair is not ordered at this lambda."""


class ConfigError(PQSolveError):
    pass
