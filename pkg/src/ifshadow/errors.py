"""Exception hierarchy shared by every module."""


class IFSError(Exception):
    """Base class for library errors."""


class SpaceMismatchError(IFSError, ValueError):
    """A point does not belong to the space it is used with."""


class SymbolError(IFSError, IndexError):
    """Symbol out of range, or a word queried outside its coverage."""


class NotInvertibleError(IFSError):
    """Backward iteration requested through a map that is not a homeomorphism."""


class NonFiniteFiberError(IFSError):
    """A preimage set is infinite and has no finite representation."""


class SizeCapError(IFSError):
    """An enumeration would exceed its configured cap."""


class PreconditionError(IFSError, ValueError):
    """A hypothesis required by an operation does not hold."""


class CertificateViolation(IFSError):
    """The pullback found no preimage inside the radius the certificate promises."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InternalInvariantError(IFSError):
    """Something that the analysis proves impossible happened anyway."""


class InsufficientWindowError(IFSError):
    """A truncated-window quantity cannot meet the requested tail bound."""


class UniquenessViolation(IFSError):
    """The oracle found shadows in more than one cluster."""

    def __init__(self, message, clusters=None):
        super().__init__(message)
        self.clusters = clusters or []
