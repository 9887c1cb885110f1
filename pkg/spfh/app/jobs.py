from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from spfh.app.config import settings
from spfh.engine.errors import DegreeCapError, ResourceCapError, ShapeError
from spfh.engine.expr import FunctorExpr, parse

COMMANDS = ("ext", "tor", "generic-ext", "generic-tor", "fqcat-ext", "compare", "oracle", "suite")

Command = Literal["ext", "tor", "generic-ext", "generic-tor", "fqcat-ext", "compare", "oracle", "suite"]


class Job(BaseModel):
    """One CLI invocation. Caps are checked here, before anything is dispatched."""

    command: Command
    F: Optional[str] = None
    G: Optional[str] = None

    # coefficient field k = GF(p^k_degree)
    p: int = Field(2, ge=2)
    k_degree: int = Field(1, ge=1, le=16)

    n: Optional[int] = Field(default=None, ge=1, le=16)
    max_degree: int = Field(2, ge=0, le=64)
    policy: Literal["dominance", "reverse"] = "dominance"

    # truncated categories and comparison maps
    q: Optional[int] = Field(default=None, ge=2)
    N: Optional[int] = Field(default=None, ge=0)
    s: int = Field(2, ge=1, le=4)
    n_twist: int = Field(0, ge=0, le=4)
    map: Literal["strong", "generalized"] = "strong"
    check_stability: bool = False

    # oracle
    oracle: Optional[Literal["ffss", "ffss-tor", "einf", "param", "gl"]] = None
    pair: Optional[str] = None
    r: int = Field(1, ge=0, le=8)
    weight: int = Field(1, ge=0, le=16)
    v_dim: int = Field(1, ge=0, le=16)
    dims: List[int] = Field(default_factory=list)
    ell: int = Field(1, ge=0)
    m: int = Field(1, ge=0)
    mode: Literal["example", "engine"] = "example"

    # suites
    suite: Optional[str] = None
    instances: Optional[List[dict]] = None

    output: Optional[str] = None
    format: Literal["json", "csv"] = "json"
    use_cache: bool = True
    workers: int = Field(default_factory=lambda: settings.workers, ge=1, le=64)

    @property
    def q_field(self) -> int:
        return self.p**self.k_degree

    def expr(self, name: str) -> FunctorExpr:
        text = getattr(self, name)
        if text is None:
            raise ShapeError(f"{self.command} needs --{name}")
        return parse(text)

    @model_validator(mode="after")
    def _check_caps(self) -> "Job":
        if self.q_field > settings.max_field_size:
            raise ResourceCapError(f"field of size {self.q_field} exceeds the cap {settings.max_field_size}")
        needs_pair = self.command in ("ext", "tor", "generic-ext", "generic-tor", "fqcat-ext", "compare")
        if needs_pair:
            for name in ("F", "G"):
                e = self.expr(name)
                if e.max_degree(self.p) > settings.max_degree and self.command not in ("generic-ext", "generic-tor"):
                    raise DegreeCapError(
                        f"{name} has degree {e.max_degree(self.p)} (cap {settings.max_degree})",
                        expr=e.text(),
                    )
        if self.command in ("fqcat-ext", "compare"):
            if self.q is None or self.N is None:
                raise ShapeError(f"{self.command} needs --q and --N")
            if self.q not in settings.fq_sizes_list:
                raise ShapeError(f"q = {self.q} is not one of {settings.fq_sizes_list}")
            if self.N > settings.max_truncation(self.q):
                raise ResourceCapError(f"truncation N = {self.N} exceeds the cap for q = {self.q}")
        if self.command == "oracle" and self.oracle is None:
            raise ShapeError("oracle needs a kind: ffss, ffss-tor, einf, param or gl")
        if self.command == "suite" and not self.suite:
            raise ShapeError("suite needs --name")
        return self
