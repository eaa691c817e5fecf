"""Run configuration, branch CSV, JSON solution records and checkpoint resume."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boundary import HealthMetrics
from .continuation import BranchConfig, SolutionRecord
from .errors import ConfigError, SchemaError
from .field import CriticalKind, CriticalPoint
from .solver import NewtonConfig, NewtonReport
from .spectral import PatchCoeffs

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "step", "omega", "a1", "max_radius", "min_psi_r", "angle_margin", "saddle_r",
    "saddle_distance", "newton_iters", "residual_norm", "tail_ratio",
]


# ----------------------------------------------------------------- config
def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_steps(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


_BRANCH_KEYS = {
    "m": int, "delta": float, "M": int, "N": int, "max_steps": int,
    "extra_start_points": int, "tail_threshold": float, "secant_guess": _parse_bool,
    "locate_saddle": _parse_bool,
}
_NEWTON_KEYS = {
    "tol_residual": float, "max_newton_iters": int, "fd_epsilon_scale": float,
    "krylov_tol": float, "krylov_restart": int, "krylov_max_iters": int,
    "max_backtracks": int, "line_search": _parse_bool, "lgmres": _parse_bool,
    "preconditioner": str,
}
_RUN_KEYS = {
    "out": str, "plots": _parse_bool, "plot_steps": _parse_steps, "audit": _parse_bool,
    "workers": int, "field_n_r": int, "field_n_theta": int,
}
KNOWN_KEYS = {**_BRANCH_KEYS, **_NEWTON_KEYS, **_RUN_KEYS}


@dataclass(frozen=True)
class RunConfig:
    branch: BranchConfig
    out: str = "out"
    plots: bool = False
    plot_steps: tuple[str, ...] = ("first", "last")
    audit: bool = True
    workers: int = 1
    field_n_r: int = 80
    field_n_theta: int = 40

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.field_n_r < 4 or self.field_n_theta < 4:
            raise ConfigError("field grid needs at least 4 nodes per direction")
        for s in self.plot_steps:
            if s not in ("first", "last", "all"):
                try:
                    float(s)
                except ValueError:
                    raise ConfigError(f"bad plot step {s!r}") from None

    def to_text(self) -> str:
        """Canonical key = value form; parsing it reproduces this config."""
        b = self.branch
        lines = []
        for k in _BRANCH_KEYS:
            lines.append(f"{k} = {_fmt(getattr(b, k))}")
        for k in _NEWTON_KEYS:
            lines.append(f"{k} = {_fmt(getattr(b.newton, k))}")
        for k in _RUN_KEYS:
            v = getattr(self, k)
            lines.append(f"{k} = {','.join(v) if isinstance(v, tuple) else _fmt(v)}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse ``key = value`` lines; '#' starts a comment, unknown keys are errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = KNOWN_KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    values.update(overrides or {})
    if "m" not in values:
        raise ConfigError("missing required key 'm'")
    try:
        newton = NewtonConfig(**{k: values[k] for k in _NEWTON_KEYS if k in values},
                              **({} if "preconditioner" in values else {"preconditioner": "diagonal"}))
        branch = BranchConfig(newton=newton, **{k: values[k] for k in _BRANCH_KEYS if k in values})
        return RunConfig(branch=branch, **{k: values[k] for k in _RUN_KEYS if k in values})
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)


# ------------------------------------------------------------------ records
def step_name(step: float) -> str:
    return f"step_{float(step):g}"


def record_to_dict(rec: SolutionRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "m": rec.coeffs.m,
        "M": rec.coeffs.M,
        "N": rec.N,
        "step": float(rec.step),
        "omega": float(rec.omega),
        "coefficients": [float(x) for x in rec.coeffs.a],
        "tail_ratio": float(rec.tail_ratio),
        "metrics": {k: float(v) for k, v in rec.metrics.as_dict().items()},
        "newton": rec.report.as_dict(),
        "saddle": rec.saddle.as_dict() if rec.saddle is not None else None,
    }


def dumps_record(rec_or_doc) -> str:
    doc = rec_or_doc if isinstance(rec_or_doc, dict) else record_to_dict(rec_or_doc)
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


export_solution = dumps_record


def record_from_dict(doc: dict) -> SolutionRecord:
    ver = doc.get("schema_version")
    if ver != SCHEMA_VERSION:
        raise SchemaError(f"solution schema_version {ver!r} is not supported (expected {SCHEMA_VERSION})")
    try:
        coeffs = PatchCoeffs(int(doc["m"]), np.array(doc["coefficients"], dtype=np.float64))
        if coeffs.M != doc["M"]:
            raise SchemaError("coefficient count does not match M")
        n = doc["newton"]
        report = NewtonReport(bool(n["converged"]), int(n["iters"]), float(n["final_residual"]),
                              int(n["krylov_iters_total"]), int(n["backtracks"]))
        metrics = HealthMetrics(**{k: float(v) for k, v in doc["metrics"].items()})
        sd = doc["saddle"]
        saddle = None
        if sd is not None:
            saddle = CriticalPoint(float(sd["r"]), float(sd["theta"]), CriticalKind(sd["kind"]),
                                   float(sd["hessian_det"]), float(sd["distance_to_boundary"]))
        return SolutionRecord(float(doc["step"]), float(doc["omega"]), coeffs, report, metrics,
                              float(doc["tail_ratio"]), saddle, int(doc["N"]))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed solution document: {exc}") from None


def loads_record(text: str) -> SolutionRecord:
    return record_from_dict(json.loads(text))


def csv_row(rec: SolutionRecord) -> list[str]:
    s = rec.saddle
    vals = [
        float(rec.step), rec.omega, rec.a1, rec.metrics.maxPhi, rec.metrics.minPsiR,
        rec.metrics.angleMargin, s.r if s else None, s.distance_to_boundary if s else None,
        rec.report.iters, rec.report.final_residual, rec.tail_ratio,
    ]
    return ["" if v is None else (repr(float(v)) if isinstance(v, float) else str(v)) for v in vals]


def read_branch_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class OutputDir:
    """Layout of a run directory and the single writer that fills it."""

    def __init__(self, root):
        self.root = Path(root)
        self.solutions = self.root / "solutions"
        self.plots = self.root / "plots"
        self.fields = self.root / "fields"
        self.csv_path = self.root / "branch.csv"

    def prepare(self, cfg: RunConfig, resume: bool) -> list[SolutionRecord]:
        """Create the layout; on resume return saved records and rewrite the CSV to match them."""
        self.solutions.mkdir(parents=True, exist_ok=True)
        records = self.load_records() if resume else []
        if resume and (self.root / "config.txt").exists():
            old = parse_config((self.root / "config.txt").read_text())
            if old.branch != cfg.branch:
                raise ConfigError("resume requested with a branch configuration that differs from the saved run")
        if not resume:
            for p in self.solutions.glob("step_*.json"):
                p.unlink()
        _atomic_write(self.root / "config.txt", cfg.to_text())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(csv_row(r))
        _atomic_write(self.csv_path, buf.getvalue())
        return records

    def write_record(self, rec: SolutionRecord) -> None:
        _atomic_write(self.solutions / f"{step_name(rec.step)}.json", dumps_record(rec))
        with open(self.csv_path, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(csv_row(rec))

    def load_records(self) -> list[SolutionRecord]:
        recs = [loads_record(p.read_text()) for p in self.solutions.glob("step_*.json")]
        return sorted(recs, key=lambda r: r.step)

    def write_json(self, name: str, doc: dict) -> Path:
        path = self.root / name
        _atomic_write(path, json.dumps(doc, indent=2, allow_nan=True) + "\n")
        return path


def save_field_grid(path, grid) -> None:
    """Psi on the sector grid as a plain-text matrix (rows r, columns theta)."""
    header = (f"m={grid.m} omega={grid.omega!r}\n"
              f"theta: {' '.join(repr(float(t)) for t in grid.theta)}\n"
              f"rows: r, then Psi at each theta")
    data = np.column_stack([grid.r, grid.psi])
    np.savetxt(path, data, fmt="%.17g", header=header)


def as_jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {k: as_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, (list, tuple)):
        return [as_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
