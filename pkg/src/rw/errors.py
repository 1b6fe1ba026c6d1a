"""Exception types shared across the package."""


class RwError(Exception):
    pass


class ParseError(RwError):
    def __init__(self, msg, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            msg = f"{line}:{col}: {msg}"
        super().__init__(msg)


class UnknownIdent(RwError):
    pass


class UnboundVar(RwError):
    pass


class TypeMismatch(RwError):
    def __init__(self, msg, path=()):
        self.path = tuple(path)
        if self.path:
            msg = f"{msg} (at {'.'.join(self.path)})"
        super().__init__(msg)


class UninterpretedIdent(RwError):
    pass


class NonConstVarInCondition(RwError):
    pass


class NonlinearPattern(RwError):
    pass


class FuelExhausted(RwError):
    def __init__(self, msg, partial=None):
        self.partial = partial
        super().__init__(msg)


class BenchTimeout(RwError):
    pass
