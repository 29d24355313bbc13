"""Exception types shared across the package.

The CLI maps InputError to exit code 1 and InvariantError to exit code 2.
"""


class InputError(ValueError):
    """Bad user input: malformed files, invalid config, out-of-range arguments."""


class InvariantError(RuntimeError):
    """An internal contract was violated; indicates a bug, not bad input."""
