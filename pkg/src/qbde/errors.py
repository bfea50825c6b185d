"""Exception types shared across the pipeline."""


class ConfigError(Exception):
    """Invalid run configuration (bad key, out-of-range value, missing path)."""


class SchemaError(Exception):
    """A structured file (checkpoint, features CSV, report) does not parse."""
