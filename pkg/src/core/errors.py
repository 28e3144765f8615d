"""
Error types shared across the energy management toolkit
"""
from typing import Optional


class EnergyManagementError(Exception):
    """Base class for toolkit errors"""
    pass


class ConfigError(EnergyManagementError, ValueError):
    """Configuration related errors"""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key and key not in message:
            message = f"{key}: {message}"
        super().__init__(message)


class InfeasibleError(EnergyManagementError):
    """Raised when an accuracy target cannot be met by any consumption level"""
    pass


class TraceFormatError(EnergyManagementError, ValueError):
    """Malformed trace, schedule or model file"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrainingError(EnergyManagementError):
    """Predictor could not be fitted"""
    pass
