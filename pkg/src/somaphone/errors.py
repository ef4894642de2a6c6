"""Exception types shared across the package."""


class SomaphoneError(Exception):
    """Base class for all somaphone errors."""


class InvalidTimestep(SomaphoneError):
    """A simulation step was requested with dt <= 0."""


class InvalidPlacement(SomaphoneError):
    """Zone-to-pillow mapping is not a bijection over the four slots."""


class AddressError(SomaphoneError):
    """OSC address string violates the address grammar."""


class MalformedPacket(SomaphoneError):
    """Byte string cannot be decoded as an OSC packet."""


class UnroutedMessage(SomaphoneError):
    """Decoded OSC message matched no route (or its arguments did not fit)."""


class TransportError(SomaphoneError):
    """UDP socket could not be set up."""


class DegenerateRange(SomaphoneError):
    """Calibration window has insufficient pressure span."""


class SectionMismatch(SomaphoneError):
    """A section evaluator was invoked with the wrong section spec."""


class InvalidAssignment(SomaphoneError):
    """Pillow-to-voice (or pillow-to-parameter) assignment is not a bijection."""


class TrackTooShort(SomaphoneError):
    """Breath track does not cover the scene duration."""


class MissingAsset(SomaphoneError):
    """A file referenced by the scene does not exist."""


class EmptyLog(SomaphoneError):
    """Session log holds no pressure frames."""


class SceneError(SomaphoneError):
    """Scene file failed to parse or validate.

    `field` carries the offending config path when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
