"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class TfmoeError(Exception):
    """Base class for all package errors."""


class ConfigError(TfmoeError):
    """Invalid configuration value or combination."""


class DimensionError(TfmoeError):
    """Tensor shapes incompatible with the requested operation."""


class InvariantError(TfmoeError):
    """A structural invariant was violated (e.g. missing gradient)."""


class NumericError(TfmoeError):
    """Non-finite values or numerical divergence."""


class DegenerateDegreeError(NumericError):
    """Adjacency row or column with non-positive sum fed to diffusion."""


class DataError(TfmoeError):
    """Problems with input data files or stream protocol."""


class GapError(DataError):
    """Missing time bins in a sensor series."""


class ProtocolError(DataError):
    """Data violates the evolving-network protocol (shrinking node set,
    series too short for the split, ...)."""


class CheckpointError(TfmoeError):
    """Base for checkpoint load failures."""


class VersionError(CheckpointError):
    """Checkpoint format version is not supported by this reader."""


class ChecksumError(CheckpointError):
    """Checkpoint payload does not match its recorded checksum."""
