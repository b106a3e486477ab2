"""Exception and warning types shared across the package."""


class MiadsError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(MiadsError):
    """A file is not in the expected format or uses an unsupported feature."""


class CorruptFileError(FormatError):
    """A file matches the expected format but its content is inconsistent."""


class NotADatasetError(FormatError):
    """The file is not a dataset container (bad magic)."""


class VersionError(FormatError):
    """The container was written by an incompatible format version."""


class CreationError(MiadsError):
    """Dataset creation failed (inconsistent plan or source data)."""


class DanglingSourceError(MiadsError):
    """A recorded source file is no longer readable."""


class ConfigurationError(MiadsError):
    """A datasource, strategy, or extractor configuration is invalid."""


class AssemblyError(MiadsError):
    """A prediction could not be accumulated into an assembly buffer."""


class NotReadyError(AssemblyError):
    """Assembly was requested before all expected predictions arrived."""


class EvaluationError(MiadsError):
    """Evaluation inputs are inconsistent (shapes, geometry, result sets)."""


class MetricWarning(UserWarning):
    """A metric value is undefined for the given input and was set to NaN."""
