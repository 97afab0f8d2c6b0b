"""Exception hierarchy."""


class TdlabError(Exception):
    """Base class for all errors raised by tdlab."""


class DimensionError(TdlabError, ValueError):
    pass


class ReducibleChainError(TdlabError, ValueError):
    """The chain has more than one communicating class.

    ``components`` lists the strongly connected components of the support graph.
    """

    def __init__(self, components):
        self.components = [sorted(int(s) for s in c) for c in components]
        super().__init__(f"chain is reducible; strongly connected components: {self.components}")


class NotReversibleError(TdlabError, ValueError):
    pass


class InputError(TdlabError, ValueError):
    """Malformed input file or argument. ``field`` names the offending location."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
