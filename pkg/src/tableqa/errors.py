"""Exception taxonomy shared across the pipeline.

Upstream stages raise these; the answer composer maps a recognized subset
onto user-facing error answers (access / no-data / irrelevant) and the
service layer maps the rest onto HTTP status codes.
"""


class TableQaError(Exception):
    """Base class for all pipeline errors."""


# -- gateway ----------------------------------------------------------------

class ProviderUnavailable(TableQaError):
    pass


class DeadlineExceeded(TableQaError):
    pass


class EmptyPrompt(TableQaError):
    pass


class EmptyInput(TableQaError):
    pass


class UnknownSession(TableQaError):
    pass


class MalformedOutput(TableQaError):
    """A completion that should carry structured output failed to parse."""


# -- auth -------------------------------------------------------------------

class UnknownUser(TableQaError):
    pass


class EmptyCatalog(TableQaError):
    pass


class MalformedDocument(TableQaError):
    """Unparseable structured-text document; carries position info."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class UnknownTable(TableQaError):
    pass


# -- router -----------------------------------------------------------------

class UnclassifiableQuery(TableQaError):
    pass


class EmptyPrototypeStore(TableQaError):
    pass


class NoAccessibleTables(TableQaError):
    pass


class MalformedRouteOutput(MalformedOutput):
    pass


# -- retriever / store ------------------------------------------------------

class MissingInput(TableQaError):
    pass


class MalformedSql(MalformedOutput):
    pass


class ForbiddenStatement(TableQaError):
    pass


class AccessDenied(TableQaError):
    def __init__(self, table: str, reason: str = "not in MUP"):
        super().__init__(f"access denied for table '{table}': {reason}")
        self.table = table
        self.reason = reason


class ExecutionError(TableQaError):
    pass


class EmptyResult(TableQaError):
    """Signal only: a zero-row staged table is not a failure, but upstream
    callers use this to route to the no-data answer."""


class UnknownPlugin(TableQaError):
    pass


class PluginFailure(TableQaError):
    pass


class SchemaMismatch(TableQaError):
    pass


class MalformedRow(TableQaError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# -- composer / scorer ------------------------------------------------------

class UnrecognizedSignal(TableQaError):
    pass


class EmptyGazetteer(TableQaError):
    pass
