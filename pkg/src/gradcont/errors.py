class GradContError(Exception):
    """Base class for recoverable numerical failures."""


class SingularJacobian(GradContError):
    pass


class NoConvergence(GradContError):
    pass


class BracketFailure(GradContError):
    pass


class SeedRejected(GradContError):
    pass


class SignFlip(GradContError):
    pass
