"""jitminer: change-level defect dataset mining and baseline prediction.

Builds labeled just-in-time defect datasets from a git repository plus a
bug-tracker export (fix linking, bug-inducing labeling, 14 change metrics,
CSV export) and trains a small from-scratch neural classifier over them.
"""

__version__ = "0.1.0"

from .errors import JitMinerError

__all__ = ["JitMinerError", "__version__"]
