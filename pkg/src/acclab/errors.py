"""Exception types shared across the package.

Every domain error raised by the library derives from AcclabError so the
CLI can map them to exit code 1 without special-casing modules.
"""


class AcclabError(Exception):
    pass


class ConfigError(AcclabError):
    """Bad machine configuration: parse error, broken invariant, or an
    instruction layout that cannot fit the fixed instruction width."""


class WorkloadError(AcclabError):
    """Bad layer description."""


class TilingError(AcclabError):
    """No feasible tiling, or tiling preconditions violated."""


class CodegenError(AcclabError):
    """Stream generation failed: scratchpad/uop overflow, field overflow,
    or unsupported layer shape."""


class AnalysisError(AcclabError):
    """Degenerate report data (zero cycles or bytes) fed to a report builder."""


class FloorplanError(AcclabError):
    """Malformed floorplan tree or tech table."""
