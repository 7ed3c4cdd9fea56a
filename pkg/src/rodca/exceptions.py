class ConfigError(ValueError):
    """Raised when a parameter set cannot describe a well-formed network or run."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
