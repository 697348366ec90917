"""Run configuration and CSV ingestion."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .gibbs_cusp import Dataset, McmcSettings
from .sim_harness import build_hyper

CUSP_KEYS = ("alpha", "a_theta", "b_theta", "theta_inf")
MGP_KEYS = ("a1", "a2", "nu", "eps_threshold")
SETTINGS_KEYS = ("n_iterations", "burn_in", "thin", "t_bar", "alpha0", "alpha1")


@dataclass
class RunConfig:
    method: str = "cusp"
    alpha: float = 5.0
    a_theta: float = 2.0
    b_theta: float = 2.0
    theta_inf: float = 0.05
    a_sigma: float = 1.0
    b_sigma: float = 0.3
    a1: float = 1.0
    a2: float = 2.0
    nu: float = 3.0
    eps_threshold: float = 1e-4
    n_iterations: int = 15000
    burn_in: int = 5000
    thin: int = 5
    t_bar: int = 500
    alpha0: float = -1.0
    alpha1: float = -5e-4
    seed: int = 0
    allow_heavy_slab: bool = False

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls().updated(raw)

    def updated(self, values: dict) -> "RunConfig":
        known = {f.name for f in fields(self)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged = {**asdict(self), **{k: v for k, v in values.items() if v is not None}}
        return RunConfig(**merged)

    def hyper_overrides(self) -> dict:
        if self.method == "cusp":
            keys = CUSP_KEYS + ("a_sigma", "b_sigma")
            out = {k: getattr(self, k) for k in keys}
            out["allow_heavy_slab"] = self.allow_heavy_slab
            return out
        return {k: getattr(self, k) for k in MGP_KEYS + ("a_sigma", "b_sigma")}

    def build(self):
        """Validate and return ``(hyper, settings)``."""
        hyper = build_hyper(self.method, self.hyper_overrides())
        settings = McmcSettings(seed=int(self.seed), **{k: getattr(self, k) for k in SETTINGS_KEYS})
        return hyper, settings


@dataclass(frozen=True)
class PreprocessSpec:
    center: bool = False
    negate_columns: tuple[int, ...] = field(default_factory=tuple)

    def validate(self, p: int) -> None:
        cols = list(self.negate_columns)
        if len(set(cols)) != len(cols):
            raise ConfigError("duplicate column in negate_columns")
        bad = [c for c in cols if not 1 <= c <= p]
        if bad:
            raise ConfigError(f"negate_columns out of range 1..{p}: {bad}")


def parse_index_list(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def load_csv(path, preprocess: PreprocessSpec = PreprocessSpec()) -> Dataset:
    """Read a numeric CSV with one header row; negate listed columns, then center.

    Row numbers in error messages are file line numbers (the header is row 1).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(f"row {lineno}: expected {len(header)} fields, found {len(record)}")
            values = []
            for name, cell in zip(header, record):
                cell = cell.strip()
                if cell == "" or cell.upper() in ("NA", "NAN"):
                    raise ParseError(f"row {lineno}, column {name!r}: missing value")
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(f"row {lineno}, column {name!r}: non-numeric value {cell!r}") from None
            rows.append(values)
    if not rows:
        raise ParseError(f"{path} has a header but no data rows")
    y = np.array(rows, dtype=float)
    preprocess.validate(y.shape[1])
    if preprocess.negate_columns:
        idx = np.array(preprocess.negate_columns) - 1
        y[:, idx] = -y[:, idx]
    if preprocess.center:
        y = y - y.mean(axis=0)
    provenance = {
        "source": str(path),
        "center": bool(preprocess.center),
        "negate_columns": ",".join(str(c) for c in preprocess.negate_columns),
    }
    return Dataset(y, provenance)


def sample_correlation(y: np.ndarray) -> np.ndarray:
    return np.corrcoef(y, rowvar=False)
