from ..common.exceptions import InvopfError

class ScenarioError(InvopfError):
    """Raised when a scenario file or its DER assignment is invalid"""

class ScenarioMismatchError(ScenarioError):
    """Raised when reports compared together come from different scenarios"""
    def __init__(self, first: str, other: str):
        self.first = first
        self.other = other
        super().__init__(f"Reports come from different scenarios: '{first}' and '{other}'")
