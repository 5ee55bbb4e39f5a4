class InputError(ValueError):
    """Bad user-supplied data: wrong lengths, non-finite values, unreadable files."""


class InvariantError(RuntimeError):
    """An internal consistency check failed (e.g. a plan disagrees with its oracle)."""
