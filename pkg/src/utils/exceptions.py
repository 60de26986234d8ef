"""
Exception hierarchy shared by the scheduling toolkit
"""


class NdsError(Exception):
    """Base class for every error raised by the toolkit"""


class InvalidSpecError(NdsError, ValueError):
    """A flow set, link or parameter document is malformed or inconsistent"""


class NotApplicableError(NdsError):
    """The operation does not apply to this kind of flow"""


class ArithmeticOverflowError(NdsError, OverflowError):
    """An intermediate value left the checked 128-bit range"""


class HyperperiodOverflowError(ArithmeticOverflowError):
    """The least common multiple of the periods exceeds the configured cap"""


class NoSolutionError(NdsError):
    """A linear Diophantine system has no integer solution"""


class PreconditionError(NdsError):
    """The combinability conditions required by an algorithm do not hold"""


class RelaxationExhaustedError(NdsError):
    """A packet would have to move beyond its jitter or delay budget"""

    def __init__(self, message, flow_id=None, packet_index=None):
        super().__init__(message)
        self.flow_id = flow_id
        self.packet_index = packet_index


class ScheduleTimeoutError(NdsError, TimeoutError):
    """The schedule search ran out of wall-clock time"""


class QueueAssignmentError(NdsError):
    """Flows cannot be mapped onto the egress port queues"""


class UnschedulableError(NdsError):
    """No valid static schedule exists under the given constraints"""
