"""
Validators module for fusion app.
"""

from fusion.validators.broadcast_validator import BroadcastPackageValidator

__all__ = [
    "BroadcastPackageValidator",
]
