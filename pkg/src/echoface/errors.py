"""Exception hierarchy shared by all subsystems.

The CLI maps these onto process exit codes: ConfigError -> 2,
InvariantError -> 3, DataFormatError -> 4.
"""


class EchoFaceError(Exception):
    """Base class for all echoface errors."""


class ConfigError(EchoFaceError):
    """Bad configuration: unknown key, wrong type, missing file."""


class InvariantError(EchoFaceError):
    """A pipeline invariant was breached (frozen weights changed,
    stages invoked out of order, checkpoint/config mismatch)."""


class DataFormatError(EchoFaceError):
    """Corrupt or malformed on-disk artifact (blob, manifest, checkpoint)."""
