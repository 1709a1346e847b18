class InvopfError(Exception):
    """Base exception for all invopf errors"""
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)
