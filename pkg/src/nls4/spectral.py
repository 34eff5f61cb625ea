"""Spectral discretization of Delta^2 and H = Delta^2 + V with functional calculus.

The grid carries the symmetric tridiagonal matrix B representing -Delta in
metric coordinates (see radial.py).  The bi-Laplacian is formed as B @ B,
which is pentadiagonal and guarantees its eigenvalues are the squares of the
eigenvalues of B, hence nonnegative.  Adding the potential on the diagonal
keeps the bandwidth at two, so a dense banded eigensolve
(scipy.linalg.eig_banded) yields the full orthonormal eigenbasis.

All functions f(H) -- propagators exp(itH), heat maps exp(-tH), fractional
powers H^{s/4}, resolvents -- are evaluated exactly in the discretization by
scaling modal coefficients.  |grad|^s is realized as (Delta^2)^{s/4} through
the free operator's calculus.

An optional little-endian binary cache stores eigendecompositions keyed by
(kind, n, r_max, N, potential); the same container layout is reused for
single-field snapshots.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eig_banded

from .potentials import PotentialSpec, evaluate_potential
from .radial import RadialField, RadialGrid

DEFAULT_EIG_BUDGET = 4096
RESOLVENT_MARGIN = 1e-12

_CACHE_MAGIC = b"NLS4EIG\x00"
_FIELD_MAGIC = b"NLS4FLD\x00"
_FORMAT_VERSION = 1


class SpectralError(ValueError):
    """Invalid spectral operator construction or application."""


def apply_tridiag(diag: np.ndarray, off: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = diag * y
    out[:-1] += off * y[1:]
    out[1:] += off * y[:-1]
    return out


def _rmatvec(q: np.ndarray, z: np.ndarray) -> np.ndarray:
    """q.T @ z for real q and complex z without complex promotion of q."""
    if np.iscomplexobj(z):
        return q.T @ z.real + 1j * (q.T @ z.imag)
    return q.T @ z


def _matvec(q: np.ndarray, z: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(z):
        return q @ z.real + 1j * (q @ z.imag)
    return q @ z


# ---------------------------------------------------------------------------
# grid-level stencils (no eigendecomposition required)

def laplacian_values(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    """Delta u on the grid via the metric-symmetric stencil."""
    y = grid.metric_sqrt * values
    return -apply_tridiag(grid.lap_diag, grid.lap_off, y) / grid.metric_sqrt


def laplacian(u: RadialField) -> RadialField:
    return RadialField(u.grid, laplacian_values(u.grid, u.values))


def bilaplacian_values(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    y = grid.metric_sqrt * values
    by = apply_tridiag(grid.lap_diag, grid.lap_off, y)
    return apply_tridiag(grid.lap_diag, grid.lap_off, by) / grid.metric_sqrt


def l2_norm(u: RadialField) -> float:
    return float(np.linalg.norm(u.grid.metric_sqrt * u.values))


def hdot2_norm(u: RadialField) -> float:
    """||Delta u||_{L^2} (homogeneous H^2 seminorm)."""
    y = u.grid.metric_sqrt * u.values
    return float(np.linalg.norm(apply_tridiag(u.grid.lap_diag, u.grid.lap_off, y)))


def h2_norm(u: RadialField) -> float:
    """||(1 - Delta) u||_{L^2}, the inhomogeneous H^2 norm."""
    y = u.grid.metric_sqrt * u.values
    return float(np.linalg.norm(y + apply_tridiag(u.grid.lap_diag, u.grid.lap_off, y)))


def grad_l2_norm(u: RadialField) -> float:
    """||grad u||_{L^2} = <-Delta u, u>^{1/2}."""
    y = u.grid.metric_sqrt * u.values
    by = apply_tridiag(u.grid.lap_diag, u.grid.lap_off, y)
    return float(np.sqrt(max(np.vdot(y, by).real, 0.0)))


# ---------------------------------------------------------------------------
# eigendecomposed operators

@dataclass(eq=False)
class SpectralOperator:
    """Eigendecomposition of Delta^2 (free) or H = Delta^2 + V (full).

    eigenvectors are orthonormal in the flat norm of the metric coordinates,
    equivalently in the quadrature-weighted inner product on fields.
    """

    kind: str
    grid: RadialGrid
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (N, N), columns
    potential: PotentialSpec | None
    potential_values: np.ndarray = field(repr=False, default=None)

    def to_modal(self, values: np.ndarray) -> np.ndarray:
        return _rmatvec(self.eigenvectors, self.grid.metric_sqrt * values)

    def from_modal(self, coeffs: np.ndarray) -> np.ndarray:
        return _matvec(self.eigenvectors, coeffs) / self.grid.metric_sqrt

    def eigenfield(self, k: int) -> RadialField:
        return RadialField(self.grid, self.eigenvectors[:, k] / self.grid.metric_sqrt)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


def build_operator(
    kind: str,
    grid: RadialGrid,
    spec: PotentialSpec | None = None,
    *,
    eig_budget: int = DEFAULT_EIG_BUDGET,
) -> SpectralOperator:
    """Assemble and eigendecompose the banded operator."""
    if kind not in ("free", "full"):
        raise SpectralError(f"kind must be 'free' or 'full', got {kind!r}")
    if kind == "full" and spec is None:
        raise SpectralError("kind='full' requires a potential spec")
    if kind == "free" and spec is not None:
        raise SpectralError("kind='free' does not take a potential spec")
    n = grid.num_points
    if n > eig_budget:
        raise SpectralError(
            f"num_points={n} exceeds the dense eigendecomposition budget {eig_budget}"
        )

    d, e = grid.lap_diag, grid.lap_off
    band = np.zeros((3, n))
    band[0] = d**2
    band[0, :-1] += e**2
    band[0, 1:] += e**2
    band[1, :-1] = e * (d[:-1] + d[1:])
    band[2, :-2] = e[:-1] * e[1:]

    if spec is not None:
        v_values = evaluate_potential(spec, grid).values.real
        band[0] += v_values
    else:
        v_values = np.zeros(n)

    eigenvalues, eigenvectors = eig_banded(band, lower=True)

    if kind == "free" or np.all(v_values >= 0):
        # Delta^2 and H with V >= 0 are nonnegative; clip eigensolver noise
        floor = -1e-9 * max(1.0, float(np.max(np.abs(eigenvalues))))
        if np.min(eigenvalues) < floor:
            raise SpectralError(
                f"nonnegative operator produced eigenvalue {np.min(eigenvalues)}"
            )
        eigenvalues = np.maximum(eigenvalues, 0.0)

    return SpectralOperator(
        kind=kind,
        grid=grid,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        potential=spec,
        potential_values=v_values,
    )


def _check_field(op: SpectralOperator, u: RadialField) -> None:
    if u.grid is not op.grid and not u.grid.same_as(op.grid):
        raise SpectralError("field grid does not match operator grid")


def _scalar_factors(op: SpectralOperator, func: str, parameter) -> np.ndarray:
    mu = op.eigenvalues
    if func == "exp_it":
        return np.exp(1j * float(parameter) * mu)
    if func == "exp_minus_t":
        t = float(parameter)
        if t < 0:
            raise SpectralError(f"exp_minus_t requires t >= 0, got {t}")
        return np.exp(-t * mu)
    if func == "power_s":
        s = float(parameter)
        if not 0.0 <= s <= 4.0:
            raise SpectralError(f"power_s requires s in [0, 4], got {s}")
        return np.maximum(mu, 0.0) ** (s / 4.0)
    if func == "resolvent_z":
        z = complex(parameter)
        gap = np.min(np.abs(mu - z))
        if gap < RESOLVENT_MARGIN * max(op.spectral_radius, 1.0):
            raise SpectralError(
                f"resolvent point z={z} is within {gap} of the discrete spectrum"
            )
        return 1.0 / (mu - z)
    raise SpectralError(f"unknown function tag {func!r}")


def apply_function(op: SpectralOperator, func: str, parameter, u: RadialField) -> RadialField:
    """f(H) u via exact modal calculus; func in {exp_it, exp_minus_t, power_s, resolvent_z}."""
    _check_field(op, u)
    coeffs = op.to_modal(u.values)
    coeffs = coeffs * _scalar_factors(op, func, parameter)
    return RadialField(op.grid, op.from_modal(coeffs))


def propagate(op: SpectralOperator, t: float, u: RadialField) -> RadialField:
    return apply_function(op, "exp_it", t, u)


def free_fractional_gradient(op_free: SpectralOperator, s: float, u: RadialField) -> RadialField:
    """|grad|^s u = (Delta^2)^{s/4} u through the free calculus."""
    if op_free.kind != "free":
        raise SpectralError("free_fractional_gradient needs the free operator")
    return apply_function(op_free, "power_s", s, u)


# ---------------------------------------------------------------------------
# binary cache (shared container layout: header + float64 blocks, little-endian)

_HEADER = struct.Struct("<8sII d I 16s")  # magic, version, payload kind, r_max, N, key digest


def _operator_key(kind: str, grid: RadialGrid, spec: PotentialSpec | None) -> bytes:
    token = f"{kind}|n={grid.dimension}|N={grid.num_points}|rmax={grid.r_max!r}|" + (
        spec.cache_token() if spec is not None else "none"
    )
    return hashlib.sha256(token.encode()).digest()[:16]


def save_operator(path: str | Path, op: SpectralOperator) -> None:
    key = _operator_key(op.kind, op.grid, op.potential)
    payload_kind = 0 if op.kind == "free" else 1
    header = _HEADER.pack(
        _CACHE_MAGIC, _FORMAT_VERSION, payload_kind, op.grid.r_max, op.grid.num_points, key
    )
    tmp = Path(path).with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(op.eigenvectors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(op.eigenvalues, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_operator(
    path: str | Path, kind: str, grid: RadialGrid, spec: PotentialSpec | None
) -> SpectralOperator:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, _, r_max, n, key = _HEADER.unpack(header)
        if magic != _CACHE_MAGIC or version != _FORMAT_VERSION:
            raise SpectralError(f"{path} is not a valid eigendecomposition cache")
        if n != grid.num_points or r_max != grid.r_max:
            raise SpectralError(f"cache {path} was built for a different grid")
        if key != _operator_key(kind, grid, spec):
            raise SpectralError(f"cache {path} key mismatch")
        vecs = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n).copy()
        vals = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
    v_values = (
        evaluate_potential(spec, grid).values.real if spec is not None else np.zeros(n)
    )
    return SpectralOperator(
        kind=kind,
        grid=grid,
        eigenvalues=vals,
        eigenvectors=vecs,
        potential=spec,
        potential_values=v_values,
    )


def load_or_build(
    kind: str,
    grid: RadialGrid,
    spec: PotentialSpec | None = None,
    *,
    cache_dir: str | Path | None = None,
    eig_budget: int = DEFAULT_EIG_BUDGET,
) -> SpectralOperator:
    """Build, consulting the NLS4_CACHE_DIR-style cache directory when given."""
    if cache_dir is None:
        cache_dir = os.environ.get("NLS4_CACHE_DIR")
    if cache_dir is None:
        return build_operator(kind, grid, spec, eig_budget=eig_budget)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = _operator_key(kind, grid, spec).hex()
    path = cache_dir / f"{key}.eig"
    if path.exists():
        return load_operator(path, kind, grid, spec)
    op = build_operator(kind, grid, spec, eig_budget=eig_budget)
    save_operator(path, op)
    return op


def save_field(path: str | Path, u: RadialField) -> None:
    """Snapshot container: header + real block + imaginary block."""
    grid = u.grid
    key = hashlib.sha256(
        f"field|n={grid.dimension}|N={grid.num_points}|rmax={grid.r_max!r}".encode()
    ).digest()[:16]
    header = _HEADER.pack(
        _FIELD_MAGIC, _FORMAT_VERSION, 2, grid.r_max, grid.num_points, key
    )
    tmp = Path(path).with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.values.real, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(u.values.imag, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_field(path: str | Path, grid: RadialGrid) -> RadialField:
    with open(path, "rb") as fh:
        magic, version, _, r_max, n, _ = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _FIELD_MAGIC or version != _FORMAT_VERSION:
            raise SpectralError(f"{path} is not a valid field snapshot")
        if n != grid.num_points or r_max != grid.r_max:
            raise SpectralError(f"snapshot {path} was saved on a different grid")
        re = np.frombuffer(fh.read(8 * n), dtype="<f8")
        im = np.frombuffer(fh.read(8 * n), dtype="<f8")
    return RadialField(grid, re + 1j * im)
