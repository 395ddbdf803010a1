"""Exception taxonomy shared by the whole library."""


class CoarseLabError(Exception):
    """Base class for all library errors."""


class InputError(CoarseLabError):
    """Malformed input: bad indices, bad shapes, unparsable files."""


class NotACoverError(InputError):
    """A family was required to cover the whole space and does not."""


class PreconditionError(CoarseLabError):
    """A documented operation precondition failed; the message names it."""


class OracleContractError(CoarseLabError):
    """A caller-supplied oracle returned a value violating its contract."""


class InternalInvariantError(CoarseLabError):
    """A postcondition that the implementation guarantees failed.

    Seeing this exception means a bug in the library, never bad input.
    """
