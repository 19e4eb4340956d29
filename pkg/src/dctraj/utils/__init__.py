"""File, lock and validation helpers."""

from .files import atomic_write, ensure_directory, file_lock
from .validation import ValidationResult, collect_errors

__all__ = [
    "ValidationResult",
    "atomic_write",
    "collect_errors",
    "ensure_directory",
    "file_lock",
]
