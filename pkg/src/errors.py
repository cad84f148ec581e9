from typing import Any, Dict

# Códigos de saída da CLI: 0 ok, 1 interno, 2 uso, 3 dados, 4 numérico
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class QdfError(Exception):
    """Erro base do pacote. Cada subclasse define o código de saída da CLI."""
    exit_code = EXIT_USAGE

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details


# --- USO / CONFIGURAÇÃO ---
class InvalidConfigError(QdfError):
    exit_code = EXIT_USAGE


class InvalidDimensionError(QdfError):
    exit_code = EXIT_USAGE


# --- DADOS ---
class DataError(QdfError):
    exit_code = EXIT_DATA


class DataIOError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, row: int, column: str):
        super().__init__(message, row=row, column=column)
        self.row = row
        self.column = column


class InsufficientDataError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class InvalidSplitError(DataError):
    pass


class SpecError(DataError):
    pass


# --- NUMÉRICO ---
class NumericError(QdfError):
    exit_code = EXIT_NUMERIC


class ConditioningError(NumericError):
    pass


class UndefinedCorrelationError(NumericError):
    pass


def error_payload(exc: BaseException) -> Dict[str, Any]:
    """JSON de erro legível por máquina (impresso no stderr pela CLI)."""
    if isinstance(exc, QdfError):
        return {"schema": 1, "error": type(exc).__name__, "message": exc.message,
                "exit_code": exc.exit_code, "details": exc.details}
    return {"schema": 1, "error": type(exc).__name__, "message": str(exc),
            "exit_code": EXIT_INTERNAL, "details": {}}
