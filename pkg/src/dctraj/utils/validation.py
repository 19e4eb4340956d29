"""Input validation utilities.

Small reusable checks for the values that flow into a run:
- Physical parameters (positive, finite, ranges)
- Integer counts
- Document schema versions (PEP 440 via ``packaging``)
- Output directories
- Override keys given on the command line or in a config file

Each check returns a ``ValidationResult``; callers collect the messages and
raise their own module error, so a user sees every problem at once.

File: dctraj/utils/validation.py
"""

import logging
import math
import os
import re
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional

from packaging.version import InvalidVersion, Version, parse

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

class ValidationResult(NamedTuple):
    """Result of a validation check."""
    is_valid: bool
    message: str
    details: Optional[Dict] = None

OVERRIDE_KEY_REGEX = re.compile(r'^(scenario|bcd|pso)(\.[A-Za-z][A-Za-z0-9_]*){1,2}$')

def check_finite(name: str, value: float) -> ValidationResult:
    """Validate that a value is a finite real number."""
    try:
        number = float(value)
    except (TypeError, ValueError):
        return ValidationResult(False, f"{name} must be a number, got {value!r}")
    if not math.isfinite(number):
        return ValidationResult(False, f"{name} must be finite, got {value}")
    return ValidationResult(True, "")

def check_positive(name: str, value: float, allow_zero: bool = False) -> ValidationResult:
    """Validate a strictly positive (or non-negative) finite value.

    Args:
        name: Parameter name used in the message
        value: Value to check
        allow_zero: Accept zero as well

    Returns:
        ValidationResult with validation status and message
    """
    result = check_finite(name, value)
    if not result.is_valid:
        return result
    if value < 0 or (value == 0 and not allow_zero):
        bound = "non-negative" if allow_zero else "positive"
        return ValidationResult(False, f"{name} must be {bound}, got {value}")
    return ValidationResult(True, "")

def check_count(name: str, value: int, minimum: int = 1) -> ValidationResult:
    """Validate an integer count with a lower bound."""
    if isinstance(value, bool) or not isinstance(value, int):
        return ValidationResult(False, f"{name} must be an integer, got {value!r}")
    if value < minimum:
        return ValidationResult(False, f"{name} must be at least {minimum}, got {value}")
    return ValidationResult(True, "")

def check_schema_version(version: str, supported: str = SCHEMA_VERSION) -> ValidationResult:
    """Validate a document schema version against the supported major version.

    Args:
        version: Version string read from a document
        supported: Version written by this release

    Returns:
        ValidationResult; details carry the parsed version when valid
    """
    try:
        parsed = parse(str(version))
    except InvalidVersion:
        return ValidationResult(False, f"schema_version '{version}' is not a valid version")

    current = Version(supported)
    if parsed.major != current.major:
        return ValidationResult(
            False,
            f"schema_version {parsed} is not compatible with {current} "
            f"(major version {current.major} required)"
        )
    if parsed > current:
        logger.warning(f"Document schema {parsed} is newer than {current}; unknown fields are ignored")
    return ValidationResult(True, "", {'parsed_version': str(parsed)})

def check_output_dir(path: Path) -> ValidationResult:
    """Validate that a path can be used as an output directory.

    Checks:
        - Path is not an existing regular file
        - The closest existing ancestor is writable
    """
    try:
        resolved = path.resolve()
    except OSError as e:
        return ValidationResult(False, f"Invalid path: {e}")

    if resolved.exists() and not resolved.is_dir():
        return ValidationResult(False, f"Path exists and is not a directory: {resolved}")

    ancestor = resolved
    while not ancestor.exists():
        ancestor = ancestor.parent
    if not os.access(ancestor, os.W_OK):
        return ValidationResult(False, f"No write permission for directory: {ancestor}")

    return ValidationResult(True, "")

def check_override_key(key: str) -> ValidationResult:
    """Validate a ``section.field`` override key."""
    if not OVERRIDE_KEY_REGEX.match(key):
        return ValidationResult(
            False,
            f"Invalid override key '{key}' (expected scenario.<field>, "
            "scenario.u2d.<field>, scenario.d2b.<field>, bcd.<field> or pso.<field>)"
        )
    return ValidationResult(True, "")

def collect_errors(results: Iterable[ValidationResult]) -> List[str]:
    """Return the messages of all failed checks."""
    return [result.message for result in results if not result.is_valid]
