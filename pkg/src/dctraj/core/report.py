"""Markdown report rendering for comparison sweeps.

Templates live in ``dctraj/templates`` and are rendered with jinja2; the
rendered text is written atomically next to the CSV tables.

File: dctraj/core/report.py
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from jinja2 import (
    Environment,
    FileSystemLoader,
    StrictUndefined,
    TemplateError as Jinja2Error,
    TemplateNotFound,
)

from ..utils.files import atomic_write

logger = logging.getLogger(__name__)

REPORT_FILE = "report.md"

class ReportError(Exception):
    """Base exception for report errors."""
    pass

class RenderError(ReportError):
    """Raised when a report template fails to render."""
    pass

def _db(value: float) -> str:
    return f"{value:.2f}"

def _pct(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}%"

class ReportTemplate:
    """Renders the comparison report."""

    TEMPLATE_FILES = {
        "report.md.jinja2": REPORT_FILE,
    }

    def __init__(self, template_dir: Optional[Path] = None):
        """Initialize the template environment.

        Args:
            template_dir: Custom template directory. If None, uses the packaged one.

        Raises:
            ReportError: If the directory or a template is missing
        """
        if template_dir is None:
            template_dir = Path(__file__).parent.parent / "templates"
        if not template_dir.exists():
            raise ReportError(f"Template directory not found: {template_dir}")

        self.template_dir = template_dir
        self.env = Environment(
            loader=FileSystemLoader(str(template_dir)),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.env.filters["db"] = _db
        self.env.filters["pct"] = _pct

        for name in self.TEMPLATE_FILES:
            if not (template_dir / name).exists():
                raise ReportError(f"Missing template: {name}")

    def render(self, context: Dict[str, Any], name: str = "report.md.jinja2") -> str:
        """Render one template.

        Raises:
            RenderError: If rendering fails
        """
        try:
            return self.env.get_template(name).render(**context)
        except TemplateNotFound as e:
            raise RenderError(f"Template not found: {e}") from e
        except Jinja2Error as e:
            raise RenderError(f"Failed to render {name}: {e}") from e

    def write(self, output_dir: Path, context: Dict[str, Any]) -> Path:
        """Render every report template into output_dir."""
        written = None
        for name, target in self.TEMPLATE_FILES.items():
            path = output_dir / target
            atomic_write(path, self.render(context, name))
            logger.info(f"Wrote report {path}")
            written = path
        return written
