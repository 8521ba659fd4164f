"""Error types shared across the trainer."""


class TrainerError(Exception):
    """Raised for invalid configuration, broken bundles, or failed runs."""


class DatasetMissing(TrainerError):
    """Raised when the requested dataset is neither on disk nor fetchable."""
