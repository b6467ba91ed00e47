"""Dataset certification gate: automated checks plus tracked attestations for 44 dataset recommendations."""

__version__ = "0.1.0"
