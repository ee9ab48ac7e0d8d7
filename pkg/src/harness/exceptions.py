from src.exceptions import ConfigError


class UnknownConfigKey(ConfigError):
    DETAIL = "Unknown configuration key"


class InvalidOverride(ConfigError):
    DETAIL = "Override must have the form section.key=value"


class ConfigFileNotFound(ConfigError):
    DETAIL = "Configuration file not found"


class InvalidStudy(ConfigError):
    DETAIL = "Study parameters are inconsistent"
