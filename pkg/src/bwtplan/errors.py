"""Exception types raised by the planners and the harness."""


class MapError(ValueError):
    """A map operation was called outside its domain (e.g. pose out of bounds)."""


class PlannerError(RuntimeError):
    """A planner could not produce a valid result."""


class UnsafeStart(PlannerError):
    def __init__(self, detail="unsafe start"):
        super().__init__(detail)


class InspectionGraphUnreachable(PlannerError):
    def __init__(self, detail="inspection graph unreachable"):
        super().__init__(detail)


class NoGlobalRoute(PlannerError):
    def __init__(self, detail="no global route"):
        super().__init__(detail)


class TourInfeasible(PlannerError):
    def __init__(self, detail="tour infeasible"):
        super().__init__(detail)


class ManholeInfeasible(PlannerError):
    def __init__(self, detail="manhole infeasible"):
        super().__init__(detail)


class PathCollision(PlannerError):
    """A waypoint was found in collision while executing a path."""


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` is the dotted path of the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
