# schemas.py - pydantic records, configs and enums shared across multisle

import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator

from errors import ConfigError

VERSION = "1.0.0"

Endpoint = Union[float, str]


# Enums
class LinkStatus(str, Enum):
    LP = "LP"
    CLP_ONLY = "CLP_only"
    INVALID = "invalid"


class StopReason(str, Enum):
    T_MAX = "t_max"
    V_SWALLOWED = "v_swallowed"
    TRACKED_SWALLOWED = "tracked_swallowed"
    HALVING_LIMIT = "halving_limit"


class ComponentKind(str, Enum):
    ROOT = "root"
    HULL = "hull"
    LEFT = "left"
    RIGHT = "right"
    POCKET = "pocket"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class VerifySuite(str, Enum):
    MARTINGALE = "martingale"
    PDE = "pde"
    ASYMPTOTICS = "asymptotics"
    SYMMETRY = "symmetry"
    COVARIANCE = "covariance"
    CROSSVAL = "crossval"
    TWOLINK = "twolink"
    AVOIDANCE = "avoidance"
    CONVERGENCE = "convergence"


def parse_endpoint(value: Any) -> float:
    """Real number or the literal inf (either sign)"""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "∞"):
            return math.inf
        if text in ("-inf", "-infinity"):
            return -math.inf
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse boundary point '{value}'") from exc
    return float(value)


def format_endpoint(value: float) -> Union[float, str]:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def parse_links(text: str) -> List[Tuple[float, float]]:
    """Semicolon separated a,b pairs, e.g. '0,inf;1,2'"""
    links = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p for p in chunk.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"link '{chunk}' must have exactly two endpoints")
        links.append((parse_endpoint(parts[0]), parse_endpoint(parts[1])))
    if not links:
        raise ConfigError("at least one link is required")
    return links


def format_links(links) -> str:
    def fmt(x):
        v = format_endpoint(x)
        return v if isinstance(v, str) else format(v, ".17g")

    return ";".join(f"{fmt(a)},{fmt(b)}" for a, b in links)


class Numerics(BaseModel):
    """Every numerical knob of the discretization in one place"""

    model_config = ConfigDict(frozen=True)

    dt: float = Field(1e-3, gt=0)
    t_max: float = Field(1.0, gt=0)
    dist_stop: float = Field(1e-3, gt=0)
    max_extension: float = Field(4.0, ge=1)
    tol_geom: float = Field(1e-3, gt=0)
    tol_swallow_factor: float = Field(5.0, gt=0)
    eps_swallow_factor: float = Field(1e-6, gt=0)
    trace_stride: int = Field(1, ge=1)
    max_trace_points: int = Field(1000, ge=8)
    drift_halving_factor: float = Field(10.0, ge=0)
    max_halvings: int = Field(30, ge=0)
    zipper_points: int = Field(600, ge=16)
    n_jobs: int = Field(1, ge=-1)

    @property
    def tol_swallow(self) -> float:
        return self.tol_swallow_factor * self.dt

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_max / self.dt)))


class RunConfig(BaseModel):
    """Everything a CLI run needs; embedded verbatim in every output file"""

    kappa: float
    links: List[Tuple[float, float]] = Field(default_factory=lambda: [(0.0, math.inf)])
    n_samples: int = Field(1000, ge=1)
    dt: float = Field(1e-3, gt=0)
    t_max: float = Field(1.0, gt=0)
    seed: int = Field(0, ge=0)
    out_path: str = "."
    format: OutputFormat = OutputFormat.JSON
    n_steps: int = Field(1000, ge=0)
    burn_in: int = Field(100, ge=0)
    thin: int = Field(1, ge=1)
    jobs: int = Field(1, ge=-1)
    monte_carlo: bool = False

    @field_validator("links", mode="before")
    @classmethod
    def parse_link_field(cls, v):
        if isinstance(v, str):
            return parse_links(v)
        return [(parse_endpoint(a), parse_endpoint(b)) for a, b in v]

    @field_serializer("links")
    def serialize_links(self, links):
        return [[format_endpoint(a), format_endpoint(b)] for a, b in links]

    def numerics(self, **overrides) -> Numerics:
        values = {"dt": self.dt, "t_max": self.t_max, "n_jobs": self.jobs}
        values.update(overrides)
        return Numerics(**values)

    @classmethod
    def from_key_value_file(cls, path: Union[str, Path]) -> Dict[str, Any]:
        """key=value lines; blank lines and # comments ignored. Returns raw values for merging."""
        values: Dict[str, Any] = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got '{line}'")
            key, value = line.split("=", 1)
            key = key.strip().replace("-", "_")
            if key not in cls.model_fields:
                raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
            values[key] = value.strip()
        return values

    def to_key_value_text(self) -> str:
        lines = []
        for key, value in self.model_dump(mode="json").items():
            if key == "links":
                value = format_links(self.links)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


class PartitionEstimate(BaseModel):
    kappa: float
    links: List[Tuple[float, float]]
    value: float = Field(..., ge=0)
    std_error: float = Field(..., ge=0)
    n_samples: int = Field(..., ge=0)
    n_zero_weight: int = Field(0, ge=0)
    n_rejected: int = Field(0, ge=0)
    dt: float
    t_max: float
    seed: int
    max_weight: float = 0.0
    tail_ratio: float = 0.0
    kappa_regime: str = ""
    bound_violations: int = 0
    warnings: List[str] = Field(default_factory=list)

    @field_serializer("links")
    def serialize_links(self, links):
        return [[format_endpoint(a), format_endpoint(b)] for a, b in links]

    def to_record(self) -> Dict[str, Any]:
        """The exported record: the fixed keys first, diagnostics after"""
        data = self.model_dump(mode="json")
        keys = ["kappa", "links", "value", "std_error", "n_samples", "n_zero_weight", "n_rejected", "dt", "t_max", "seed"]
        record = {k: data[k] for k in keys}
        record["diagnostics"] = {
            "max_weight": self.max_weight,
            "tail_ratio": self.tail_ratio,
            "kappa_regime": self.kappa_regime,
            "bound_violations": self.bound_violations,
            "warnings": self.warnings,
        }
        return record


class MartingaleDiagnostic(BaseModel):
    times: List[float]
    means: List[float]
    std_errors: List[float]
    n_alive: List[int]
    m0: float = Field(..., gt=0)
    n_samples: int = 0

    def z_scores(self) -> List[float]:
        out = []
        for mean, se in zip(self.means, self.std_errors):
            if se > 0:
                out.append((mean - self.m0) / se)
            else:
                out.append(0.0 if mean == self.m0 else math.inf)
        return out


class ObservableComparison(BaseModel):
    name: str
    mean_1: float
    std_error_1: float
    mean_2: float
    std_error_2: float
    z_score: float


class ComparisonReport(BaseModel):
    rows: List[ObservableComparison]
    threshold: float = 3.0
    passed: bool
    note: str = ""

    @property
    def max_abs_z(self) -> float:
        return max((abs(r.z_score) for r in self.rows), default=0.0)


class VerificationResult(BaseModel):
    suite: VerifySuite
    passed: bool
    details: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    version: str = VERSION
    config: Optional[Dict[str, Any]] = None
