"""Exception hierarchy shared by all marsit modules."""


class MarsitError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(MarsitError, ValueError):
    """An argument is outside its valid domain."""


class ProtocolError(MarsitError):
    """Participants of a collective disagree on shapes, lengths or state."""


class UnsupportedError(MarsitError):
    """The requested combination of options is not implemented."""


class DatasetError(MarsitError):
    """A dataset could not be read or does not fit the model."""


class ConfigError(MarsitError):
    """A configuration document is malformed."""
