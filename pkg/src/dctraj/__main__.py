"""Main entry point for the dctraj CLI.

Runs when the package is executed with `python -m dctraj` or through the
installed `dctraj` console script.

File: dctraj/__main__.py
"""

from .cli.commands import cli

if __name__ == '__main__':
    cli()
