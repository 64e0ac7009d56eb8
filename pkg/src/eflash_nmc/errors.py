"""Exception hierarchy. Exit codes are consumed by the CLI."""


class SimError(Exception):
    exit_code = 1


class ConfigError(SimError):
    exit_code = 2


class ModelError(SimError):
    exit_code = 3


class CapacityError(SimError):
    exit_code = 4


class VerifyTimeout(SimError):
    """Pulse budget exhausted before a cell passed verify."""

    exit_code = 5

    def __init__(self, bank, row, col, state, pulses):
        super().__init__(
            f"verify timeout: bank {bank} row {row} col {col} "
            f"target state {state} after {pulses} pulses"
        )
        self.bank = bank
        self.row = row
        self.col = col
        self.state = state
        self.pulses = pulses


class UnreachableReference(SimError):
    """The active WL driver variant cannot present the requested reference."""

    exit_code = 6


class PumpNotReady(SimError):
    """Program attempted while the charge pump is not regulated."""

    exit_code = 1


# The WL driver raises the same condition under its own name.
ProgramWhileUnregulated = PumpNotReady
