"""The continuous shift operator S f = int w_S(., x) f(x) dP(x).

Functions over the latent space are held as values on the model's latent
grid together with the P-measure weights (``LimitFunction``). For SBMs the
grid is the community set itself and every operation below is exact finite
arithmetic; for continuous models the grid is the Gauss-Legendre quadrature
grid and off-grid evaluation uses the kernel-smoothed (Nystrom-style)
extension, which is available whenever the function was produced by at
least one application of the operator.

Eigenpairs: with pw the grid weights, the operator matrix on the grid is
K_S diag(pw). Conjugating by diag(sqrt(pw)) symmetrizes it,

    B = diag(sqrt(pw)) K_S diag(sqrt(pw)),

whose orthonormal eigenvectors phi map back to L2(P)-orthonormal
eigenfunctions u = phi / sqrt(pw). In the SBM case B is exactly
diag(sqrt(P)) C_S diag(sqrt(P)).

Eigenvalue ordering follows the operator convention: non-zero eigenvalues
first in decreasing order (positive down to negative), all (numerically)
zero eigenvalues last.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import (
    KernelModel,
    SbmModel,
    ShiftKind,
    kernel_cross,
    latent_grid,
    shift_kernel_grid,
)

#: Eigenvalues of magnitude below this count as zero for the ordering rule.
ZERO_EIGENVALUE_TOL = 1e-10

#: Limit eigenvalues closer than this raise the multiplicity flag.
TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LimitFunction:
    """A (vector-valued) square-integrable function over the latent space.

    values holds the function on the grid, shape (m, q). ``eval_fn``, when
    present, evaluates the function at arbitrary latent points; for SBM
    functions grid lookup is always exact and ``eval_fn`` is unnecessary.
    """

    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    discrete: bool
    eval_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.points.shape[0]:
            raise ValueError("values must have one row per grid point")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def grid_size(self) -> int:
        return self.points.shape[0]

    def at(self, x) -> np.ndarray:
        """Sample the function at latent points x, shape (n, q)."""
        x = np.atleast_1d(x)
        if self.discrete:
            idx = x.astype(int) - 1
            if np.any(idx < 0) or np.any(idx >= self.grid_size):
                raise ValueError("community labels out of range")
            return self.values[idx]
        if self.eval_fn is None:
            raise ValueError("function has no off-grid evaluation rule")
        out = np.asarray(self.eval_fn(np.asarray(x, dtype=float)))
        return out if out.ndim == 2 else out[:, None]

    def scalar_at(self, x) -> np.ndarray:
        out = self.at(x)
        if out.shape[1] != 1:
            raise ValueError("not a scalar function")
        return out[:, 0]


def from_grid_values(model: KernelModel, values, eval_fn=None) -> LimitFunction:
    points, weights = latent_grid(model)
    return LimitFunction(
        points=points,
        weights=weights,
        values=np.asarray(values, dtype=float),
        discrete=isinstance(model, SbmModel),
        eval_fn=eval_fn,
    )


def from_callable(model: KernelModel, f: Callable) -> LimitFunction:
    """Wrap a plain function of the latent point (vectorized over 1-d arrays)."""
    points, _ = latent_grid(model)
    vals = np.asarray(f(points), dtype=float)
    return from_grid_values(model, vals, eval_fn=None if isinstance(model, SbmModel) else f)


def constant_function(model: KernelModel, value=1.0) -> LimitFunction:
    value = np.atleast_1d(np.asarray(value, dtype=float))
    points, _ = latent_grid(model)
    vals = np.tile(value, (points.shape[0], 1))
    return from_grid_values(model, vals, eval_fn=lambda x: np.tile(value, (np.size(x), 1)))


def identity_function(model: KernelModel) -> LimitFunction:
    """f(x) = x. On an SBM this is the community label as a real number."""
    return from_callable(model, lambda x: np.asarray(x, dtype=float))


def community_indicator(model: SbmModel, community: int) -> LimitFunction:
    vals = np.zeros(model.n_communities)
    vals[community - 1] = 1.0
    return from_grid_values(model, vals)


def _operator_apply(model, kind, values: np.ndarray):
    """Return (grid values of S f, eval_fn) for grid values of f."""
    points, pw = latent_grid(model)
    K = shift_kernel_grid(model, kind)
    weighted = pw[:, None] * values
    out_vals = K @ weighted

    def eval_fn(x):
        return kernel_cross_shift(model, kind, np.atleast_1d(x), points) @ weighted

    return out_vals, eval_fn


def kernel_cross_shift(model, kind, x, y) -> np.ndarray:
    """Shift-kernel matrix w_S(x_i, y_j) for 1-d point collections."""
    from .kernels import degree_function, require_positive_degrees

    K = kernel_cross(model, x, y)
    if kind == ShiftKind.NORMALIZED_LAPLACIAN:
        require_positive_degrees(model)
        dx = np.asarray(degree_function(model, np.atleast_1d(x)), dtype=float)
        dy = np.asarray(degree_function(model, np.atleast_1d(y)), dtype=float)
        K = K / np.sqrt(np.outer(dx, dy))
    return K


def apply_limit_operator(model: KernelModel, kind: ShiftKind, f: LimitFunction) -> LimitFunction:
    """S f, exact for SBMs (C_S diag(P) f), quadrature otherwise."""
    points, _ = latent_grid(model)
    if f.grid_size != points.shape[0]:
        raise ValueError("function grid does not match the model grid")
    out_vals, eval_fn = _operator_apply(model, kind, f.values)
    return from_grid_values(model, out_vals, eval_fn=eval_fn)


def l2_norm(f: LimitFunction, model: KernelModel | None = None) -> float:
    """L2(P) norm, computed with the function's own grid weights."""
    return float(np.sqrt(np.sum(f.weights[:, None] * f.values**2)))


def l2_inner(f: LimitFunction, g: LimitFunction) -> float:
    return float(np.sum(f.weights[:, None] * f.values * g.values))


def _ordering(eigenvalues: np.ndarray) -> np.ndarray:
    """Indices sorting eigenvalues: non-zeros descending, then zeros."""
    nonzero = np.abs(eigenvalues) > ZERO_EIGENVALUE_TOL
    nz_idx = np.flatnonzero(nonzero)
    z_idx = np.flatnonzero(~nonzero)
    nz_sorted = nz_idx[np.argsort(-eigenvalues[nz_idx], kind="stable")]
    return np.concatenate([nz_sorted, z_idx])


@dataclass(frozen=True, eq=False)
class LimitEigenSystem:
    """Leading eigenpairs of the limit operator, L2(P)-orthonormal."""

    eigenvalues: np.ndarray
    eigenfunctions: list
    tie_flag: bool
    truncation_warning: bool


def limit_eigenpairs(model: KernelModel, kind: ShiftKind, q: int) -> LimitEigenSystem:
    points, pw = latent_grid(model)
    m = points.shape[0]
    if not (1 <= q <= m):
        raise ValueError(f"q must be in 1..{m}")
    K = shift_kernel_grid(model, kind)
    sq = np.sqrt(pw)
    B = sq[:, None] * K * sq[None, :]
    B = 0.5 * (B + B.T)
    lam, phi = np.linalg.eigh(B)
    order = _ordering(lam)
    lam = lam[order]
    phi = phi[:, order]

    guard = min(q + 1, m)
    tie_flag = bool(np.min(np.abs(np.diff(lam[:guard]))) < TIE_TOL) if guard > 1 else False
    truncation_warning = bool(np.any(np.abs(lam[:q]) <= ZERO_EIGENVALUE_TOL))

    funcs = []
    weighted_kernel = None
    for i in range(q):
        u = phi[:, i] / sq
        # Canonical sign: largest-magnitude grid entry positive. Comparisons
        # against sampled eigenvectors still minimize over both signs.
        j = int(np.argmax(np.abs(u)))
        if u[j] < 0:
            u = -u
        eval_fn = None
        if not isinstance(model, SbmModel) and abs(lam[i]) > ZERO_EIGENVALUE_TOL:
            eval_fn = _nystrom_extension(model, kind, points, pw, u, lam[i])
        funcs.append(
            LimitFunction(points=points, weights=pw, values=u, discrete=isinstance(model, SbmModel), eval_fn=eval_fn)
        )

    return LimitEigenSystem(
        eigenvalues=lam[:q].copy(),
        eigenfunctions=funcs,
        tie_flag=tie_flag,
        truncation_warning=truncation_warning,
    )


def _nystrom_extension(model, kind, points, pw, u_grid, lam):
    weighted = pw * u_grid

    def eval_fn(x):
        vals = kernel_cross_shift(model, kind, np.atleast_1d(x), points) @ weighted / lam
        return vals[:, None]

    return eval_fn


def s_delta_powers(model: KernelModel, kind: ShiftKind, x, z, q: int) -> np.ndarray:
    """[S delta_x(z), S^2 delta_x(z), ..., S^q delta_x(z)].

    S delta_x is the kernel section z -> w_S(z, x); higher powers chain
    integrals against P. Exact for SBMs: S^k delta_x = ((C_S diag(P))^(k-1) C_S)[:, x].
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    points, pw = latent_grid(model)
    out = np.empty(q)
    out[0] = float(np.asarray(kernel_cross_shift(model, kind, [z], [x]))[0, 0])
    if q == 1:
        return out
    K = shift_kernel_grid(model, kind)
    row_z = kernel_cross_shift(model, kind, [z], points)[0]
    cur = kernel_cross_shift(model, kind, points, [x])[:, 0]  # S delta_x on the grid
    for k in range(1, q):
        out[k] = float(row_z @ (pw * cur))
        if k < q - 1:
            cur = K @ (pw * cur)
    return out


def s_delta_power_tables(model: KernelModel, kind: ShiftKind, z, q: int) -> np.ndarray:
    """Tensor T[k-1, i, g] = S^k delta_{t_g}(z_i) for grid anchors t_g.

    Used by the distance-encoding limit, which integrates over the anchor.
    """
    points, pw = latent_grid(model)
    m = points.shape[0]
    z = np.atleast_1d(z)
    K = shift_kernel_grid(model, kind)
    Kz = kernel_cross_shift(model, kind, z, points)
    T = np.empty((q, z.shape[0], m))
    T[0] = Kz
    cur = K.copy()  # cur[g, a] = S^k delta_{t_a}(t_g)
    for k in range(1, q):
        T[k] = (Kz * pw[None, :]) @ cur
        if k < q - 1:
            cur = K @ (pw[:, None] * cur)
    return T


def eigen_system_to_csv(es: LimitEigenSystem, path) -> None:
    """One row per eigenpair: index, eigenvalue, grid values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        m = es.eigenfunctions[0].grid_size if es.eigenfunctions else 0
        writer.writerow(["index", "eigenvalue"] + [f"u_{g}" for g in range(m)])
        for i, (lam, f) in enumerate(zip(es.eigenvalues, es.eigenfunctions)):
            writer.writerow([i + 1, repr(float(lam))] + [repr(float(v)) for v in f.values[:, 0]])
