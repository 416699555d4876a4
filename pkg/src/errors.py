# src/errors.py
"""
Exception and warning hierarchy for the SEQIR toolkit.

Two families matter to the CLI:
-   `ConfigError`: the input is wrong (exit code 1).
-   `ModelError`: the input is fine but the mathematics says no (exit code 2).
"""


class SeqirError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(SeqirError):
    def __init__(self, message: str, diagnostics: list | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class ModelError(SeqirError):
    pass


class DegenerateDemography(ModelError):
    pass


class ConservationViolation(ModelError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t = {t:.6g})")
        self.t = t


class NoBracket(ModelError):
    pass


class NoInfection(ModelError):
    pass


class KernelMismatch(ModelError):
    pass


class Infeasible(ModelError):
    pass


class NotConverged(ModelError):
    def __init__(self, message: str, h_sequence: list[float]):
        super().__init__(message)
        self.h_sequence = list(h_sequence)


class ScenarioFailure(ModelError):
    """A module error re-raised with the scenario name and run type in front."""

    def __init__(self, scenario: str, run: str, cause: SeqirError):
        super().__init__(f"[{scenario}/{run}] {cause}")
        self.scenario = scenario
        self.run = run
        self.cause = cause


# --- Advisory warnings (never fatal) ---

class SeqirWarning(UserWarning):
    pass


class NetReproductionRateWarning(SeqirWarning):
    pass


class TruncationWarning(SeqirWarning):
    pass


class QuarantineIgnoredWarning(SeqirWarning):
    pass
