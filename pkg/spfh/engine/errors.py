from __future__ import annotations

from typing import Any, Dict, Optional


class SpfhError(Exception):
    """Base error. `code` is machine-readable, `exit_code` is what the CLI returns."""

    code = "engine"
    exit_code = 1

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"code": self.code, "message": self.message}
        if self.details:
            out["details"] = {k: _jsonable(v) for k, v in self.details.items()}
        return out


def _jsonable(v: Any) -> Any:
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return str(v)


class FieldError(SpfhError):
    code = "field"


class ExpressionError(SpfhError):
    code = "expression"


class DegreeCapError(SpfhError):
    code = "degree_cap"


class ResourceCapError(SpfhError):
    code = "resource_cap"

    def __init__(self, message: str, block: Optional[str] = None, size: Optional[int] = None, **details: Any) -> None:
        super().__init__(message, block=block, size=size, **details)
        self.block = block
        self.size = size


class ShapeError(SpfhError):
    code = "shape"


class UnknownMapError(SpfhError):
    code = "unknown_map"


class CacheError(SpfhError):
    code = "cache_io"


class CacheCorruptError(CacheError):
    code = "cache_corrupt"


class TheoremContradiction(SpfhError):
    code = "theorem_contradiction"
    exit_code = 2
