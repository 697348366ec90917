"""Synthetic factor-model data and the replicate runner behind the
method-comparison and sensitivity tables.

Replicate ``r`` of a scenario draws its data from stream ``(seed, r, 0)`` and
its chain from ``(seed, r, code(method))``, so CUSP and MGP see identical
datasets and any single replicate can be rerun in isolation.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cusp_prior import CuspHyper
from .diagnostics import averaged_ess, posterior_mse, posterior_mean_h_star
from .errors import ConfigError, EmptyResultError
from .gibbs_cusp import Dataset, FactorHyper, McmcSettings, run_chain
from .gibbs_mgp import MgpHyper, run_chain_mgp
from .prob_core import RngStream, make_rng

logger = logging.getLogger(__name__)

METHOD_CODES = {"cusp": 1, "mgp": 2}
METRICS = ("mse", "h_star", "ess", "runtime")

# (alpha, a_theta, b_theta, theta_inf) rows of the sensitivity study
SENSITIVITY_GRID = (
    (2.5, 2.0, 2.0, 0.05),
    (10.0, 2.0, 2.0, 0.05),
    (5.0, 2.0, 1.0, 0.05),
    (5.0, 1.0, 2.0, 0.05),
    (5.0, 2.0, 2.0, 0.025),
    (5.0, 2.0, 2.0, 0.1),
)
STANDARD_SCENARIOS = ((20, 5), (50, 10), (100, 15))


def generate_dataset(p: int, h0: int, n: int, rng: RngStream) -> tuple[Dataset, np.ndarray]:
    """Draw Lambda0 with iid N(0,1) entries, set Omega0 = Lambda0 Lambda0^T + I and
    sample n rows from N_p(0, Omega0)."""
    if not (1 <= h0 <= p and n >= 1):
        raise ConfigError(f"need 1 <= h0 <= p and n >= 1, got p={p}, h0={h0}, n={n}")
    lam0 = rng.standard_normal((p, h0))
    omega0 = lam0 @ lam0.T + np.eye(p)
    y = rng.standard_normal((n, h0)) @ lam0.T + rng.standard_normal((n, p))
    return Dataset(y, {"source": "synthetic", "p": p, "h0": h0, "n": n}), omega0


def generate_block_dataset(p: int, h0: int, n: int, rng: RngStream,
                           loading_range: tuple[float, float] = (0.6, 0.9)) -> tuple[Dataset, np.ndarray]:
    """Questionnaire-like data: variables split into ``h0`` contiguous blocks,
    each loading on its own factor only, with unit marginal variances.

    Returns centered data and the true covariance (here also a correlation matrix).
    """
    if not (1 <= h0 <= p and n >= 2):
        raise ConfigError(f"need 1 <= h0 <= p and n >= 2, got p={p}, h0={h0}, n={n}")
    block = np.array_split(np.arange(p), h0)
    lam0 = np.zeros((p, h0))
    for k, idx in enumerate(block):
        lam0[idx, k] = rng.uniform(*loading_range, size=idx.size)
    psi = 1.0 - np.sum(lam0 ** 2, axis=1)
    omega0 = lam0 @ lam0.T + np.diag(psi)
    y = rng.standard_normal((n, h0)) @ lam0.T + rng.standard_normal((n, p)) * np.sqrt(psi)
    y -= y.mean(axis=0)
    return Dataset(y, {"source": "synthetic-block", "p": p, "h0": h0, "n": n, "center": True}), omega0


def build_hyper(method: str, overrides: dict | None = None):
    overrides = dict(overrides or {})
    if method == "cusp":
        cusp_keys = ("alpha", "a_theta", "b_theta", "theta_inf")
        cusp = CuspHyper(**{k: float(overrides.pop(k)) for k in cusp_keys if k in overrides})
        allow = bool(overrides.pop("allow_heavy_slab", False))
        try:
            return FactorHyper(cusp=cusp, allow_heavy_slab=allow,
                               **{k: float(v) for k, v in overrides.items()})
        except TypeError as exc:
            raise ConfigError(f"unknown CUSP hyper-parameter: {exc}") from None
    if method == "mgp":
        try:
            return MgpHyper(**{k: float(v) for k, v in overrides.items()})
        except TypeError as exc:
            raise ConfigError(f"unknown MGP hyper-parameter: {exc}") from None
    raise ConfigError(f"unknown method {method!r}; expected 'cusp' or 'mgp'")


@dataclass
class ScenarioSpec:
    p: int = 20
    h0: int = 5
    n: int = 100
    replicates: int = 5
    method: str = "cusp"
    hyper: dict = field(default_factory=dict)
    settings: McmcSettings = field(default_factory=McmcSettings)
    workers: int = 1

    def __post_init__(self):
        if self.method not in METHOD_CODES:
            raise ConfigError(f"unknown method {self.method!r}")
        if not 1 <= self.h0 <= self.p:
            raise ConfigError("need 1 <= h0 <= p")
        if self.replicates < 1 or self.n < 1:
            raise ConfigError("replicates and n must be positive")
        build_hyper(self.method, self.hyper)


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    rows: list[dict]
    summary: dict

    def write(self, directory, include_runtime: bool = False) -> None:
        """Write ``replicates.csv`` and ``summary.json``.

        Runtimes are machine-dependent, so they are left out unless asked for;
        without them the files are bit-reproducible from the seed.
        """
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        cols = ["replicate", "method", "status", "mse", "h_star", "ess"]
        if include_runtime:
            cols.append("runtime")
        cols.append("error")
        with open(d / "replicates.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for row in self.rows:
                writer.writerow([_fmt_cell(row.get(c, "")) for c in cols])
        summary = {k: v for k, v in self.summary.items() if include_runtime or k != "runtime"}
        payload = {
            "scenario": {
                "p": self.spec.p, "h0": self.spec.h0, "n": self.spec.n,
                "replicates": self.spec.replicates, "method": self.spec.method,
                "hyper": build_hyper(self.spec.method, self.spec.hyper).as_dict(),
                "settings": self.spec.settings.as_dict(),
            },
            "n_failed": sum(r["status"] != "ok" for r in self.rows),
            "summary": summary,
        }
        (d / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def run_replicate(spec: ScenarioSpec, replicate: int) -> dict:
    """Generate replicate ``replicate``'s data, fit it, and score the fit."""
    master = spec.settings.seed
    row = {"replicate": replicate, "method": spec.method}
    try:
        data, omega0 = generate_dataset(spec.p, spec.h0, spec.n, make_rng(master, replicate, 0))
        rng = make_rng(master, replicate, METHOD_CODES[spec.method])
        hyper = build_hyper(spec.method, spec.hyper)
        runner = run_chain if spec.method == "cusp" else run_chain_mgp
        start = time.perf_counter()
        store = runner(data, hyper, spec.settings, rng=rng)
        runtime = time.perf_counter() - start
        row.update(
            status="ok",
            mse=posterior_mse(store, omega0),
            h_star=posterior_mean_h_star(store),
            ess=averaged_ess(store),
            runtime=runtime,
            error="",
        )
    except Exception as exc:  # recorded, never silently dropped
        logger.exception("replicate %d (%s) failed", replicate, spec.method)
        row.update(status="failed", mse=float("nan"), h_star=float("nan"), ess=float("nan"),
                   runtime=float("nan"), error=f"{type(exc).__name__}: {exc}")
    return row


def _run_one(args):
    return run_replicate(*args)


def run_scenario(spec: ScenarioSpec) -> ScenarioResult:
    jobs = [(spec, r) for r in range(spec.replicates)]
    if spec.workers > 1 and spec.replicates > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(job) for job in jobs]
    return ScenarioResult(spec=spec, rows=rows, summary=summarize_replicates(rows))


def summarize_replicates(rows: list[dict]) -> dict:
    """Median and interquartile range of each metric over successful replicates."""
    ok = [r for r in rows if r.get("status", "ok") == "ok"]
    if not ok:
        raise EmptyResultError("no successful replicate to summarize")
    out = {}
    for metric in METRICS:
        vals = np.array([r[metric] for r in ok if metric in r], dtype=float)
        if vals.size == 0:
            continue
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        out[metric] = {"median": float(med), "iqr": float(q3 - q1)}
    return out
