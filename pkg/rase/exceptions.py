"""错误类型 - 每个错误带一个稳定的机器可读 code"""


class RaseError(ValueError):
    """所有模拟错误的基类"""

    code = "internal-error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {"success": False, "code": self.code, "error": str(self), "details": self.details}


class GridError(RaseError):
    code = "grid-error"


class SequenceError(RaseError):
    code = "sequence-error"


class RegimeError(RaseError):
    code = "regime-error"


class WindowError(RaseError):
    code = "window-error"


class SymplecticError(RaseError):
    code = "symplectic-error"


class DegenerateStateError(RaseError):
    code = "degenerate-state"


class DivergenceError(RaseError):
    code = "divergence"


class StepConditionError(RaseError):
    code = "step-condition"


class NaNDetectedError(RaseError):
    code = "nan-detected"


class OracleCapError(RaseError):
    code = "oracle-cap"


class PairingError(RaseError):
    code = "pairing-error"


class ConfigError(RaseError):
    code = "config-error"


class UnknownExperimentError(ConfigError):
    code = "unknown-experiment"
