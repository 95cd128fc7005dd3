"""Exception types. Each maps onto one CLI exit code."""


class RpcpError(Exception):
    exit_code = 1


class ConfigError(RpcpError):
    """Malformed config document or violated config invariant."""

    exit_code = 2


class DatasetIOError(RpcpError):
    """Missing directories, unreadable or undecodable files, write failures."""

    exit_code = 3


class DataMismatchError(RpcpError):
    """Inputs that decode fine but disagree with each other or the class scheme."""

    exit_code = 4


class TransformCollapse(RpcpError):
    """A rotate/scale transform left the patch mask with no pixels."""
