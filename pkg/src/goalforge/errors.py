"""Exception types. Every error carries a stable kebab-case ``code`` used by the CLI."""


class GoalForgeError(Exception):
    code = "error"
    exit_code = 1

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


# core math
class PointBehindCamera(GoalForgeError):
    code = "point-behind-camera"


class DegenerateProjection(GoalForgeError):
    code = "degenerate-projection"


# physics
class InvalidScene(GoalForgeError):
    code = "invalid-scene"


class InvalidTarget(GoalForgeError):
    code = "invalid-target"


class UnknownTarget(GoalForgeError):
    code = "unknown-target"
    exit_code = 2


class NonConvergent(GoalForgeError):
    code = "non-convergent"


# planner
class AlreadyTouching(GoalForgeError):
    code = "already-touching"


class NoFeasiblePlan(GoalForgeError):
    code = "no-feasible-plan"
    exit_code = 2

    def __init__(self, message, rejected=()):
        super().__init__(message)
        self.rejected = list(rejected)

    def to_dict(self):
        d = super().to_dict()
        d["rejected_candidates"] = [{"id": i, "reason": r} for i, r in self.rejected]
        return d


# control signal
class DurationOverflow(GoalForgeError):
    code = "duration-overflow"


class MassOutOfRange(GoalForgeError):
    code = "mass-out-of-range"


class MissingChannel(GoalForgeError):
    code = "missing-channel"


class DimensionMismatch(GoalForgeError):
    code = "dimension-mismatch"


class TensorFormatError(GoalForgeError):
    code = "tensor-format"


class BadMagic(TensorFormatError):
    code = "bad-magic"


class BadVersion(TensorFormatError):
    code = "bad-version"


class ShapeMismatch(TensorFormatError):
    code = "shape-mismatch"


class TensorIOError(TensorFormatError):
    code = "io"


# datagen
class PlacementFailure(GoalForgeError):
    code = "placement-failure"


# eval
class SupportMismatch(GoalForgeError):
    code = "support-mismatch"


class EmptyCounts(GoalForgeError):
    code = "empty-counts"


class NoValidTrials(GoalForgeError):
    code = "no-valid-trials"


class NoCollisionDetected(GoalForgeError):
    code = "no-collision-detected"


class InsufficientGroups(GoalForgeError):
    code = "insufficient-groups"


# cli / config
class ConfigError(GoalForgeError):
    def __init__(self, message, code="bad-config"):
        super().__init__(message)
        self.code = code
