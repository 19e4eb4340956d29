#!/usr/bin/env python3
"""Development workflow script.

File: dctraj/dev.py

Provides commands for common development tasks using uv.
"""

import subprocess
import sys

def run_uv(args, **kwargs):
    """Run a uv command."""
    cmd = ["uv"] + args
    return subprocess.run(cmd, **kwargs, check=True)

def setup():
    """Set up development environment."""
    run_uv(["venv"])
    run_uv(["pip", "install", "--editable", ".[dev]"])

def test():
    """Run the fast test suite."""
    run_uv(["run", "python", "-m", "pytest"])

def test_all():
    """Run every test, including the slow reproduction sweep."""
    run_uv(["run", "python", "-m", "pytest", "-m", "slow or not slow"])

def lint():
    """Run linters and the type checker."""
    run_uv(["run", "python", "-m", "ruff", "check", "."])
    run_uv(["run", "python", "-m", "black", "--check", "src"])
    run_uv(["run", "pyright", "src/dctraj"])

if __name__ == "__main__":
    commands = {
        "setup": setup,
        "test": test,
        "test-all": test_all,
        "lint": lint,
    }

    if len(sys.argv) < 2 or sys.argv[1] not in commands:
        print(f"Usage: {sys.argv[0]} [{' | '.join(commands.keys())}]")
        sys.exit(1)

    commands[sys.argv[1]]()
