"""Exception hierarchy shared across the package."""


class SeatcheckError(Exception):
    """Base class for every error this package raises on purpose."""


class ValidationError(SeatcheckError):
    """Malformed input: bad file, bad field value, bad configuration."""


class SchemaError(ValidationError):
    """A dataset header does not match the declared column mapping."""


class AmbiguityError(ValidationError):
    """Course definitions overlap; the active-course lookup would be ambiguous."""


class ConflictError(SeatcheckError):
    """The entity already exists (duplicate uid, enrollment, open session)."""


class NotFoundError(SeatcheckError):
    """The referenced entity does not exist."""


class DomainError(SeatcheckError):
    """An argument is outside the operation's domain (e.g. non-positive BMI)."""


class NoReferenceError(DomainError):
    """No reference statistics exist for the student's (age, gender) cell."""


class CalibrationError(DomainError):
    """Calibration inputs cannot produce a usable scale factor."""


class WrongTimeError(SeatcheckError):
    """The operation falls outside the course's time slot."""


class ProtocolError(SeatcheckError):
    """A wire-protocol line could not be encoded or decoded."""


class FramingError(ProtocolError):
    """The byte stream lost line framing (oversize unterminated line)."""


class TransportBusyError(SeatcheckError):
    """The serial transport is already owned by another endpoint."""
