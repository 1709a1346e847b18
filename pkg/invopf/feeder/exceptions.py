from typing import List

from ..common.exceptions import InvopfError

class FeederError(InvopfError):
    """Base exception for feeder data errors"""

class FeederSchemaError(FeederError):
    """Raised when a feeder document does not conform to the schema"""
    def __init__(self, details: str):
        self.details = details
        super().__init__(f"Feeder document does not conform to schema: {details}")

class DuplicateBusError(FeederError):
    def __init__(self, bus: str):
        self.bus = bus
        super().__init__(f"Duplicate bus id '{bus}'")

class DanglingEndpointError(FeederError):
    def __init__(self, line: str, bus: str):
        self.line = line
        self.bus = bus
        super().__init__(f"Line {line} references unknown bus '{bus}'")

class InvalidBaseError(FeederError):
    def __init__(self, name: str, value: float):
        self.name = name
        self.value = value
        super().__init__(f"Per-unit base {name} must be positive, got {value}")

class NonRadialError(FeederError):
    """Raised when an operation needs a radial feeder and gets something else"""
    def __init__(self, violations: List[str]):
        self.violations = violations
        super().__init__(f"Feeder is not radial: {'; '.join(violations)}")

class PartitionError(FeederError):
    def __init__(self, details: str):
        self.details = details
        super().__init__(f"Invalid area partition: {details}")
