"""
Exception hierarchy shared by the cavcoord libraries

Library code raises these, the command-line tools map them to exit codes
"""


class CavCoordError(Exception):
    pass


class ConfigError(CavCoordError, ValueError):
    """Scenario or geometry document failed to parse or validate"""
    pass


class TrajectoryDomainError(CavCoordError, ValueError):
    """Trajectory evaluated or inverted outside of where it is defined"""
    pass


class InfeasibleWindowError(CavCoordError):
    """No exit time produces a cubic trajectory within the vehicle limits"""
    pass


class EmptyWindowError(InfeasibleWindowError):
    pass


class PlannerInfeasibleError(CavCoordError):
    """No safe exit time inside the feasible window

    state holds a JSON-serializable dump of the simulation at the failure
    """
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state if state is not None else {}


class SchedulingError(CavCoordError, ValueError):
    pass
