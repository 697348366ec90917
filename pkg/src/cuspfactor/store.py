"""Append-only container for retained posterior draws, and its on-disk format.

A store directory holds three files:

``manifest.txt``
    ``key=value`` lines: run settings, hyper-parameters, seed, ``n_draws`` and a
    ``config_hash`` over everything else.
``omega.csv``
    one row per draw, the upper triangle of Omega (diagonal included) flattened
    row-major; header names entries ``j-q`` (1-based).
``traces.csv``
    ``iteration,h_star,H`` per draw.

Floats are written with 17 significant digits so doubles round-trip exactly.
"""
from __future__ import annotations

import hashlib
import os
import warnings
from pathlib import Path

import numpy as np

from .errors import IntegrityError, ShapeError

FORMAT_VERSION = 1
_RESERVED = ("n_draws", "config_hash", "format_version", "p")


def upper_indices(p: int):
    return np.triu_indices(p)


def diag_positions(p: int) -> np.ndarray:
    """Positions of Omega_jj inside the flattened upper triangle."""
    iu, ju = upper_indices(p)
    return np.flatnonzero(iu == ju)


def unflatten(upper: np.ndarray, p: int) -> np.ndarray:
    """Rebuild symmetric p x p matrices from (..., p(p+1)/2) upper triangles."""
    iu, ju = upper_indices(p)
    out = np.zeros(upper.shape[:-1] + (p, p))
    out[..., iu, ju] = upper
    out[..., ju, iu] = upper
    return out


class DrawStore:
    """Retained draws of Omega with scalar traces of H* and H."""

    def __init__(self, p: int, manifest: dict | None = None):
        self.p = int(p)
        self.manifest = dict(manifest or {})
        self._iu = upper_indices(self.p)
        self._omega: list[np.ndarray] = []
        self._h_star: list[int] = []
        self._H: list[int] = []
        self._iteration: list[int] = []

    @property
    def n_entries(self) -> int:
        return self.p * (self.p + 1) // 2

    def append(self, iteration: int, lam: np.ndarray, sigma2: np.ndarray, h_star: int, H: int) -> None:
        omega = lam @ lam.T
        omega[np.diag_indices(self.p)] += sigma2
        self.append_upper(iteration, omega[self._iu], h_star, H)

    def append_upper(self, iteration: int, upper: np.ndarray, h_star: int, H: int) -> None:
        upper = np.asarray(upper, dtype=float)
        if upper.shape != (self.n_entries,):
            raise ShapeError(f"expected {self.n_entries} upper-triangle entries, got {upper.shape}")
        self._omega.append(upper)
        self._h_star.append(int(h_star))
        self._H.append(int(H))
        self._iteration.append(int(iteration))

    def __len__(self) -> int:
        return len(self._omega)

    @property
    def omega(self) -> np.ndarray:
        """(n_draws, p(p+1)/2) array of flattened upper triangles."""
        if not self._omega:
            return np.empty((0, self.n_entries))
        return np.vstack(self._omega)

    @property
    def h_star(self) -> np.ndarray:
        return np.asarray(self._h_star, dtype=np.int64)

    @property
    def H(self) -> np.ndarray:
        return np.asarray(self._H, dtype=np.int64)

    @property
    def iteration(self) -> np.ndarray:
        return np.asarray(self._iteration, dtype=np.int64)

    def omega_matrices(self) -> np.ndarray:
        return unflatten(self.omega, self.p)


def _hash_text(items: dict) -> str:
    body = "\n".join(f"{k}={items[k]}" for k in sorted(items) if k not in _RESERVED)
    return hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]


def config_hash(manifest: dict) -> str:
    """Hash of the ``key=value`` text as written, reserved keys excluded."""
    return _hash_text({k: _fmt(v) for k, v in manifest.items()})


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str):
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def write_manifest(path: Path, manifest: dict) -> None:
    lines = []
    for key in manifest:
        if "=" in key or "\n" in key or "\n" in _fmt(manifest[key]):
            raise ValueError(f"manifest entry {key!r} cannot be written as key=value")
        lines.append(f"{key}={_fmt(manifest[key])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_manifest_text(path: Path) -> dict:
    raw = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise IntegrityError(f"malformed manifest line {line!r}")
        raw[key] = value
    return raw


def read_manifest(path: Path) -> dict:
    return {k: _parse(v) for k, v in _read_manifest_text(path).items()}


def write_draws(store: DrawStore, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    iu, ju = upper_indices(store.p)
    header = ",".join(f"{i + 1}-{j + 1}" for i, j in zip(iu, ju))
    np.savetxt(d / "omega.csv", store.omega.reshape(len(store), store.n_entries),
               fmt="%.17g", delimiter=",", header=header, comments="")
    traces = np.column_stack([store.iteration, store.h_star, store.H]).reshape(len(store), 3)
    np.savetxt(d / "traces.csv", traces, fmt="%d", delimiter=",", header="iteration,h_star,H", comments="")
    manifest = {k: v for k, v in store.manifest.items() if k not in _RESERVED}
    manifest = {"format_version": FORMAT_VERSION, "p": store.p, **manifest,
                "n_draws": len(store), "config_hash": config_hash(manifest)}
    write_manifest(d / "manifest.txt", manifest)


def _load_rows(path: Path, width: int, dtype) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # header-only file
        try:
            rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=dtype)
        except ValueError as exc:
            raise IntegrityError(f"{path}: {exc}") from None
    if rows.size == 0:
        return rows.reshape(0, width)
    if rows.shape[1] != width:
        raise IntegrityError(f"{path}: expected {width} columns, found {rows.shape[1]}")
    return rows


def read_draws(directory) -> DrawStore:
    d = Path(directory)
    for name in ("manifest.txt", "omega.csv", "traces.csv"):
        if not os.path.exists(d / name):
            raise IntegrityError(f"{d / name} is missing")
    raw = _read_manifest_text(d / "manifest.txt")
    manifest = {k: _parse(v) for k, v in raw.items()}
    try:
        p = int(manifest["p"])
        n_draws = int(manifest["n_draws"])
    except (KeyError, ValueError) as exc:
        raise IntegrityError(f"manifest lacks a valid p or n_draws: {exc}") from None
    body = {k: v for k, v in manifest.items() if k not in _RESERVED}
    if raw.get("config_hash") != _hash_text(raw):
        raise IntegrityError("config_hash does not match the manifest contents")
    m = p * (p + 1) // 2
    omega = _load_rows(d / "omega.csv", m, float)
    traces = _load_rows(d / "traces.csv", 3, np.int64)
    if omega.shape[0] != n_draws or traces.shape[0] != n_draws:
        raise IntegrityError(
            f"manifest says {n_draws} draws but files hold {omega.shape[0]} (omega) "
            f"and {traces.shape[0]} (traces)"
        )
    store = DrawStore(p, body)
    for row, (it, hs, H) in zip(omega, traces):
        store.append_upper(int(it), row, int(hs), int(H))
    return store
