import traceback
from typing import Any, Dict, List, Sequence

INPUT_ERROR = 2
NUMERICAL_ERROR = 3


class WorkbenchError(Exception):
    """
    Base class for every failure raised by the analysis modules \nUsage : raise DomainError("negative coordinate", chart="A")
    """

    exit_code = INPUT_ERROR

    def __init__(self, msg: str, **context: Any):
        super().__init__(msg)
        self.msg = msg
        self.context: Dict[str, str] = {
            key: str(value) for key, value in context.items() if value is not None
        }

    def with_context(self, **context: Any) -> "WorkbenchError":
        for key, value in context.items():
            if value is not None:
                self.context.setdefault(key, str(value))
        return self

    def detail(self, debug: bool = False) -> Dict[str, Any]:
        detail = {
            "error": type(self).__name__,
            "msg": self.msg,
            "context": dict(self.context),
        }
        if debug:
            detail["error_root"] = traceback.format_exc()  ## only filled while handling
        return detail

    def __str__(self) -> str:
        if not self.context:
            return self.msg
        where = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{self.msg} ({where})"


class UnexpectedError(WorkbenchError):
    """Any non-workbench exception escaping a command"""

    @classmethod
    def wrap(cls, err: Exception) -> "UnexpectedError":
        return cls(str(err) or repr(err), type=type(err).__name__)


class ParseError(WorkbenchError):
    pass


class ManifestError(WorkbenchError):
    def __init__(self, msg: str, errors: Sequence[Dict[str, Any]] = (), **context: Any):
        super().__init__(msg, **context)
        self.errors: List[Dict[str, Any]] = list(errors)

    def detail(self, debug: bool = False) -> Dict[str, Any]:
        detail = super().detail(debug)
        detail["errors"] = self.errors
        return detail


class UnsupportedNode(WorkbenchError):
    pass


class DomainError(WorkbenchError):
    pass


class Indeterminate(WorkbenchError):
    exit_code = NUMERICAL_ERROR


class FactorizationFailure(WorkbenchError):
    pass


class NotInterior(WorkbenchError):
    pass


class NotADiffeo(WorkbenchError):
    pass


class NotBNormal(WorkbenchError):
    pass


class NotStronglySmooth(WorkbenchError):
    pass


class WeightInconsistent(WorkbenchError):
    pass


class PositivityViolated(WorkbenchError):
    pass


class NotElliptic(WorkbenchError):
    pass


class NotFredholm(WorkbenchError):
    pass


class DiscretizationUnstable(WorkbenchError):
    exit_code = NUMERICAL_ERROR
