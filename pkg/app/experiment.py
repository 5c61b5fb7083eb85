"""Experiment config files.

Format::

    # comment
    [grid]
    d = 1
    n = 1024
    box_length = 200

    [experiment]
    mode = sweep
    sweep = 1.4, 1.6, 1.8

Sections: grid, operator, problem, initial_data, forcing, solver,
experiment.  Every key is validated by a pydantic model; unknown keys,
duplicate keys and missing required sections are reported together with
their line numbers.
"""

import hashlib
import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.errors import ConfigError, DomainError
from app.families import Family, resolve_family
from app.models import Grid, Mode, OperatorParams, SolverConfig, Status

logger = logging.getLogger(__name__)

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


# ---------------------------------------------------------------------------
# Section models
# ---------------------------------------------------------------------------


def _split_list(v: Any) -> Any:
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class ProblemSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p: Optional[float] = Field(None, gt=1, description="Nonlinearity exponent")


class FamilySection(BaseModel):
    """A named data family with its parameters; ``amp = auto`` targets the small-data norm."""

    model_config = ConfigDict(extra="forbid")

    family: Family = Family.ZERO
    amp: Optional[Union[float, Literal["auto"]]] = None
    mass: Optional[float] = None
    center: Optional[float] = None
    width: Optional[float] = Field(None, gt=0)
    sep: Optional[float] = Field(None, gt=0)
    radius: Optional[float] = Field(None, gt=0)
    tail: Optional[float] = Field(None, gt=1)

    @field_validator("family", mode="before")
    @classmethod
    def _known_family(cls, v: Any) -> Any:
        if isinstance(v, str):
            try:
                return resolve_family(v)
            except DomainError as e:
                raise ValueError(str(e)) from None
        return v

    @property
    def auto(self) -> bool:
        return self.amp == "auto"

    def parameters(self) -> dict[str, float]:
        """Numeric family parameters; an ``auto`` amplitude is left for the caller."""
        out = self.model_dump(exclude={"family"}, exclude_none=True)
        if self.auto:
            out.pop("amp")
        return out


class ExperimentSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Mode = Mode.SIMULATE
    sweep: list[float] = Field(default_factory=list, description="p values for mode = sweep")
    output: Optional[str] = Field(None, description="Output directory override")
    R_list: list[float] = Field(default_factory=list, description="Radii for R-sweeps")
    q: float = Field(1.0, ge=1)
    r: float = Field(math.inf, ge=1)
    t_lo: float = Field(10.0, gt=0)
    t_hi: float = Field(1000.0, gt=0)
    t_points: int = Field(16, ge=3)
    sigma: Optional[float] = Field(None, gt=0)
    expected: Optional[Status] = Field(
        None, description="Expected status for every run, overriding the exponent-based gate"
    )

    @field_validator("sweep", "R_list", mode="before")
    @classmethod
    def _comma_list(cls, v: Any) -> Any:
        return _split_list(v)

    @field_validator("sweep")
    @classmethod
    def _p_above_one(cls, v: list[float]) -> list[float]:
        if any(p <= 1 for p in v):
            raise ValueError("every swept p must exceed 1")
        return v

    @field_validator("R_list")
    @classmethod
    def _positive_radii(cls, v: list[float]) -> list[float]:
        if any(R <= 0 for R in v):
            raise ValueError("radii must be positive")
        return v


class ExperimentConfig(BaseModel):
    """A fully validated experiment."""

    grid: Grid
    operator: OperatorParams
    problem: ProblemSection = Field(default_factory=ProblemSection)
    initial_data: FamilySection = Field(default_factory=FamilySection)
    forcing: FamilySection = Field(default_factory=FamilySection)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)

    def snapshot(self) -> dict:
        """JSON-safe dump of every validated field."""
        return json.loads(self.model_dump_json())

    def p_values(self) -> list[float]:
        if self.experiment.mode is Mode.SWEEP:
            return list(self.experiment.sweep)
        return [self.problem.p] if self.problem.p is not None else []


SECTIONS: dict[str, type[BaseModel]] = {
    "grid": Grid,
    "operator": OperatorParams,
    "problem": ProblemSection,
    "initial_data": FamilySection,
    "forcing": FamilySection,
    "solver": SolverConfig,
    "experiment": ExperimentSection,
}
REQUIRED_SECTIONS = ("grid", "operator")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _tokenize(text: str) -> tuple[dict[str, dict[str, tuple[str, int]]], dict[str, int], list[tuple[int, str]]]:
    """Split text into {section: {key: (value, line)}} plus section header lines."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    headers: dict[str, int] = {}
    issues: list[tuple[int, str]] = []
    current: Optional[str] = None
    skipping = False

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1).lower()
            if name not in SECTIONS:
                issues.append((lineno, f"unknown section [{name}]"))
                current, skipping = None, True
                continue
            skipping = False
            if name in headers:
                issues.append((lineno, f"duplicate section [{name}]"))
            headers.setdefault(name, lineno)
            sections.setdefault(name, {})
            current = name
            continue
        m = _KEY_RE.match(line)
        if not m:
            issues.append((lineno, f"expected 'key = value' or '[section]', got {raw.strip()!r}"))
            continue
        if current is None:
            if not skipping:
                issues.append((lineno, "key outside of any section"))
            continue
        key, value = m.group(1), m.group(2).strip()
        if key in sections[current]:
            issues.append((lineno, f"duplicate key {key!r} in [{current}]"))
            continue
        if not value:
            issues.append((lineno, f"[{current}] {key}: empty value"))
            continue
        sections[current][key] = (value, lineno)
    return sections, headers, issues


def _clean_message(msg: str) -> str:
    for prefix in ("Value error, ", "Assertion failed, "):
        if msg.startswith(prefix):
            return msg[len(prefix):]
    return msg


def _validate_section(
    name: str, raw: dict[str, tuple[str, int]], header_line: int
) -> tuple[Optional[BaseModel], list[tuple[int, str]]]:
    model = SECTIONS[name]
    issues = []
    for key, (_, line) in raw.items():
        if key not in model.model_fields:
            issues.append((line, f"[{name}] unknown key {key!r}"))
    values = {k: v for k, (v, _) in raw.items() if k in model.model_fields}
    try:
        return model.model_validate(values), issues
    except ValidationError as e:
        for err in e.errors():
            key = str(err["loc"][0]) if err["loc"] else ""
            line = raw[key][1] if key in raw else header_line
            label = f"[{name}] {key}: " if key else f"[{name}] "
            issues.append((line, label + _clean_message(err["msg"])))
        return None, issues


def _mode_requirements(
    cfg: ExperimentConfig, headers: dict[str, int], mode_line: int
) -> list[tuple[int, str]]:
    mode = cfg.experiment.mode
    exp = cfg.experiment
    issues = []

    def need(ok: bool, msg: str) -> None:
        if not ok:
            issues.append((mode_line, f"mode {mode.value}: {msg}"))

    if mode in (Mode.SIMULATE, Mode.CAPACITY, Mode.NONEXISTENCE):
        need(cfg.problem.p is not None, "missing [problem] p")
    if mode is Mode.SWEEP:
        need(bool(exp.sweep), "sweep list must not be empty")
    if mode in (Mode.SIMULATE, Mode.SWEEP):
        need("initial_data" in headers, "missing section [initial_data]")
    if mode is Mode.NONEXISTENCE:
        need("forcing" in headers, "missing section [forcing]")
    if mode in (Mode.CAPACITY, Mode.NONEXISTENCE):
        need(len(exp.R_list) >= 3, "R_list needs at least 3 radii")
    if mode is Mode.DECAY:
        need("initial_data" in headers, "missing section [initial_data] (the decay probe)")
        need(exp.r >= exp.q, "r must be >= q")
        need(exp.t_lo < exp.t_hi, "t_lo must be below t_hi")
    if cfg.initial_data.mass is not None and cfg.initial_data.family is not Family.GAUSSIAN:
        issues.append((headers.get("initial_data", 0), "[initial_data] mass applies to gaussian only"))
    for name in ("initial_data", "forcing"):
        section = getattr(cfg, name)
        if section.amp is not None and section.mass is not None:
            issues.append((headers.get(name, 0), f"[{name}] give either amp or mass, not both"))
    return issues


def parse_config(text: str, mode: Optional[Mode] = None) -> ExperimentConfig:
    """Parse and validate an experiment config; raises ConfigError with every issue found.

    ``mode`` overrides [experiment] mode (the CLI subcommand wins).
    """
    sections, headers, issues = _tokenize(text)
    validated: dict[str, BaseModel] = {}
    for name in REQUIRED_SECTIONS:
        if name not in headers:
            issues.append((0, f"missing section [{name}]"))
    for name, raw in sections.items():
        model, section_issues = _validate_section(name, raw, headers[name])
        issues.extend(section_issues)
        if model is not None:
            validated[name] = model
    if issues:
        raise ConfigError(sorted(issues))

    cfg = ExperimentConfig(**validated)
    if mode is not None and mode is not cfg.experiment.mode:
        cfg = cfg.model_copy(
            update={"experiment": cfg.experiment.model_copy(update={"mode": mode})}
        )
    mode_line = sections.get("experiment", {}).get("mode", ("", headers.get("experiment", 0)))[1]
    issues = _mode_requirements(cfg, headers, mode_line)
    if issues:
        raise ConfigError(sorted(issues))
    logger.debug("parsed config: mode=%s, p=%s", cfg.experiment.mode.value, cfg.p_values())
    return cfg


def load_config(path: Union[str, Path], mode: Optional[Mode] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError([(0, f"cannot read {path}: {e.strerror or e}")]) from e
    return parse_config(text, mode)


def run_id(cfg: ExperimentConfig, p: Optional[float] = None) -> str:
    """First 16 hex digits of sha256 over the canonical JSON snapshot (plus the swept p)."""
    payload = {"config": cfg.snapshot(), "p": p}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
