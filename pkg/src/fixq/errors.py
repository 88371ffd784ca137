"""Exception hierarchy shared by all engine layers."""


class FixqError(Exception):
    """Base class for every error raised by the engine."""


class MalformedXml(FixqError):
    def __init__(self, position, reason):
        self.position = position
        self.reason = reason
        super().__init__(f"malformed XML at {position}: {reason}")


class UnknownNode(FixqError):
    pass


class TypeErr(FixqError):
    """An atomic value showed up where a node was required (or vice versa)."""


class QuerySyntaxError(FixqError):
    def __init__(self, position, expected):
        self.position = position
        self.expected = expected
        super().__init__(f"syntax error at offset {position}: expected {expected}")


class DynamicError(FixqError):
    pass


class UnboundVariable(DynamicError):
    pass


class NoFocus(DynamicError):
    pass


class UnknownFunction(FixqError):
    pass


class FixpointDivergence(FixqError):
    """The inflationary fixed point did not settle within the iteration budget."""

    def __init__(self, iterations, algorithm="naive"):
        self.iterations = iterations
        self.algorithm = algorithm
        super().__init__(
            f"fixpoint did not converge after {iterations} iterations ({algorithm})"
        )


class Unsupported(FixqError):
    """Construct outside the subset handled by the algebraic compiler."""

    def __init__(self, construct):
        self.construct = construct
        super().__init__(f"not compilable: {construct}")


class SchemaMismatch(FixqError):
    pass


class MalformedDag(FixqError):
    pass
