"""Exception types shared across the package.

Every failure mode that callers are expected to catch gets its own class;
anything else is a plain ValueError/RuntimeError and means a bug.
"""


class ErgolabError(Exception):
    """Base class for package-specific failures."""


class NotInvertible(ErgolabError):
    """Inverse step requested for a non-invertible system."""


class BranchAmbiguous(ErgolabError):
    """Inverse branch selection failed to produce a unique admissible preimage."""


class DomainEscape(ErgolabError):
    """An orbit left the system's domain; indicates corrupted state or a bug."""


class PreconditionViolated(ErgolabError):
    """Arguments violate a documented precondition (e.g. a_j > L in the Pliss scan)."""


class InsufficientData(ErgolabError):
    """Too few usable data points for a fit or estimate."""


class NotSameFiber(ErgolabError):
    """Holonomy comparison requested for points on different fibers."""


class ConfigInvalid(ErgolabError):
    """Experiment configuration failed validation.

    Carries the offending field name so CLI errors can point at it.
    """

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"config field '{field}': {message}")
