"""Exception hierarchy shared by every module."""


class ShardLedgerError(Exception):
    """Base class for all protocol errors."""


# ledger
class EmptyBlock(ShardLedgerError):
    pass


class StaleTimestamp(ShardLedgerError):
    pass


class MalformedBlock(ShardLedgerError):
    pass


# sharded verification
class ZeroClusters(ShardLedgerError):
    pass


class PartitionTooFine(ShardLedgerError):
    pass


class WrongCluster(ShardLedgerError):
    pass


class NoVotes(ShardLedgerError):
    pass


class MixedTransactions(ShardLedgerError):
    pass


# stake accounting
class InsufficientBalance(ShardLedgerError):
    pass


class ZeroDeposit(ShardLedgerError):
    pass


class UnknownCluster(ShardLedgerError):
    pass


class ZeroParticipants(ShardLedgerError):
    pass


class UnknownParticipant(ShardLedgerError):
    pass


class AlreadySettled(ShardLedgerError):
    pass


class InvalidSchedule(ShardLedgerError):
    pass


# oracle network
class CommitteeTooLarge(ShardLedgerError):
    pass


class NoEligibleOracles(ShardLedgerError):
    pass


class DeadlinePassed(ShardLedgerError):
    pass


class NotSelected(ShardLedgerError):
    pass


class ClaimNotReady(ShardLedgerError):
    pass


# harness
class ScenarioError(ShardLedgerError):
    """Scenario failed validation; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class TickError(ShardLedgerError):
    """Wraps a module error with the tick at which it happened."""

    def __init__(self, tick, cause):
        self.tick = tick
        self.cause = cause
        super().__init__(f"tick {tick}: {type(cause).__name__}: {cause}")
