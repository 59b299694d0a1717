class ConfigError(ValueError):
    """Invalid link or experiment configuration."""


class PlacementError(ConfigError):
    """Requested pilot pattern does not fit the grid."""


class SizeError(ValueError):
    """Array length does not match the frame or code dimensions."""
