"""Effective diffusion on thin fiber bundles over curves and surfaces."""

from ._core import *  # noqa: F401,F403
from ._core import InvariantViolation, QuadratureError, SolverError, run_cli

__version__ = "0.1.0"


def main() -> int:
    """Entry point mirroring the ``fiberdiff`` executable."""
    import sys

    code, out, err = run_cli(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
