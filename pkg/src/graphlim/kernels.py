"""Latent spaces, sampling distributions and connectivity kernels.

Two model families are supported:

- ``SbmModel``: a finite latent space ``{1, ..., K}`` of community labels,
  a symmetric connection-probability matrix ``C`` with entries in ``[0, 1]``
  and a probability vector ``P`` over communities.
- ``GaussianKernelModel``: a continuous latent interval ``[a, b]`` with the
  uniform distribution and the positive semi-definite kernel
  ``w(x, y) = exp(-(x - y)^2 / (2 sigma^2))``.

Both expose the same operations: kernel evaluation ``w(x, y)``, the degree
function ``d(x) = int w(x, y) dP(y)`` and the shift kernel

    adjacency variant:  w_S(x, y) = w(x, y)
    Laplacian variant:  w_S(x, y) = w(x, y) / sqrt(d(x) d(y))

Integrals against P are exact finite sums for SBMs, and Gauss-Legendre
quadrature on a fixed grid for the continuous model. ``latent_grid`` returns
the (points, P-weights) pair used for both, which makes downstream operator
code a single code path that is exact in the SBM case.

Community labels are 1-based throughout the public interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class DomainError(ValueError):
    """A latent point lies outside the model's latent space."""


class DegenerateModelError(ValueError):
    """The model violates the standing assumption d_min > 0."""


class InvalidProbabilityError(ValueError):
    """An edge probability leaves [0, 1]."""


class ShiftKind(str, Enum):
    NORMALIZED_ADJACENCY = "adjacency"
    NORMALIZED_LAPLACIAN = "laplacian"


#: Minimal degree below which Laplacian-based operators are refused.
DEGREE_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class SbmModel:
    """Stochastic block model: K communities, kernel matrix C, weights P."""

    C: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        P = np.asarray(self.P, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("C must be a square matrix")
        if P.ndim != 1 or P.shape[0] != C.shape[0]:
            raise ValueError("P must be a vector of length K")
        if not np.allclose(C, C.T, atol=1e-12):
            raise ValueError("C must be symmetric")
        if C.min() < 0.0 or C.max() > 1.0:
            raise ValueError("entries of C must lie in [0, 1]")
        if P.min() < 0.0 or abs(P.sum() - 1.0) > 1e-12:
            raise ValueError("P must be a probability vector (sum 1 within 1e-12)")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "P", P)

    @property
    def n_communities(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class GaussianKernelModel:
    """Gaussian kernel exp(-(x-y)^2 / (2 sigma^2)) on uniform [a, b]."""

    sigma: float = 0.5
    interval: tuple[float, float] = (-1.0, 1.0)
    quad_nodes: int = 512
    _grid: tuple = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        a, b = self.interval
        if not (self.sigma > 0.0):
            raise ValueError("sigma must be positive")
        if not (a < b):
            raise ValueError("interval must satisfy a < b")
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be at least 2")
        nodes, gl_weights = np.polynomial.legendre.leggauss(self.quad_nodes)
        points = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        # P is uniform on [a, b]: dP = dx / (b - a), so the Legendre weights
        # (which integrate dx after affine rescaling) are divided by (b - a).
        weights = 0.5 * gl_weights  # (b-a)/2 * gl / (b-a)
        object.__setattr__(self, "_grid", (points, weights))


KernelModel = SbmModel | GaussianKernelModel


def _check_sbm_points(model: SbmModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    xi = x.astype(int)
    if np.any(xi != x) or xi.min(initial=1) < 1 or xi.max(initial=1) > model.n_communities:
        raise DomainError(f"community labels must be integers in 1..{model.n_communities}")
    return xi


def _check_interval_points(model: GaussianKernelModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    a, b = model.interval
    if x.size and (x.min() < a - 1e-12 or x.max() > b + 1e-12):
        raise DomainError(f"latent points must lie in [{a}, {b}]")
    return x


def eval_kernel(model: KernelModel, x, y) -> np.ndarray | float:
    """Connectivity kernel w(x, y), broadcasting over array arguments."""
    if isinstance(model, SbmModel):
        xi = _check_sbm_points(model, x)
        yi = _check_sbm_points(model, y)
        out = model.C[xi - 1, yi - 1]
    else:
        xf = _check_interval_points(model, x)
        yf = _check_interval_points(model, y)
        out = np.exp(-((xf - yf) ** 2) / (2.0 * model.sigma**2))
    return out if np.ndim(out) else float(out)


def kernel_cross(model: KernelModel, x, y) -> np.ndarray:
    """Kernel matrix w(x_i, y_j) for 1-d point collections x, y."""
    if isinstance(model, SbmModel):
        xi = _check_sbm_points(model, np.atleast_1d(x))
        yi = _check_sbm_points(model, np.atleast_1d(y))
        return model.C[np.ix_(xi - 1, yi - 1)]
    xf = _check_interval_points(model, np.atleast_1d(x))
    yf = _check_interval_points(model, np.atleast_1d(y))
    return np.exp(-((xf[:, None] - yf[None, :]) ** 2) / (2.0 * model.sigma**2))


def latent_grid(model: KernelModel) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature representation of P: points and weights summing to 1.

    Exact for SBMs (the communities themselves); Gauss-Legendre nodes for
    the continuous model.
    """
    if isinstance(model, SbmModel):
        return np.arange(1, model.n_communities + 1), model.P.copy()
    points, weights = model._grid
    return points.copy(), weights.copy()


def degree_function(model: KernelModel, x) -> np.ndarray | float:
    """Degree function d(x) = int w(x, y) dP(y). Exact CP for SBMs."""
    if isinstance(model, SbmModel):
        xi = _check_sbm_points(model, x)
        d = model.C @ model.P
        out = d[np.asarray(xi) - 1]
    else:
        points, weights = model._grid
        xf = _check_interval_points(model, np.atleast_1d(x))
        out = kernel_cross(model, xf, points) @ weights
        if np.ndim(x) == 0:
            out = out[0]
    return out if np.ndim(out) else float(out)


def min_degree(model: KernelModel) -> float:
    """Smallest degree over the latent grid. Exact minimum for SBMs."""
    points, _ = latent_grid(model)
    return float(np.min(degree_function(model, points)))


def require_positive_degrees(model: KernelModel) -> None:
    if min_degree(model) < DEGREE_FLOOR:
        raise DegenerateModelError(
            f"degree function falls below {DEGREE_FLOOR}; Laplacian variant refused"
        )


def w_shift(model: KernelModel, kind: ShiftKind, x, y) -> np.ndarray | float:
    """Shift kernel w_S(x, y) for the requested shift variant."""
    w = eval_kernel(model, x, y)
    if kind == ShiftKind.NORMALIZED_ADJACENCY:
        return w
    require_positive_degrees(model)
    dx = degree_function(model, x)
    dy = degree_function(model, y)
    out = w / np.sqrt(np.asarray(dx) * np.asarray(dy))
    return out if np.ndim(out) else float(out)


def shift_kernel_grid(model: KernelModel, kind: ShiftKind) -> np.ndarray:
    """Matrix [w_S(t_i, t_j)] over the latent grid."""
    points, _ = latent_grid(model)
    K = kernel_cross(model, points, points)
    if kind == ShiftKind.NORMALIZED_LAPLACIAN:
        require_positive_degrees(model)
        d = np.asarray(degree_function(model, points), dtype=float)
        K = K / np.sqrt(np.outer(d, d))
    return K


def permute_communities(model: SbmModel, perm) -> SbmModel:
    """Relabel communities: community k of the result is community perm[k-1]
    of the original (perm is a 1-based permutation of 1..K)."""
    perm = np.asarray(perm, dtype=int) - 1
    if sorted(perm.tolist()) != list(range(model.n_communities)):
        raise ValueError("perm must be a permutation of 1..K")
    return SbmModel(C=model.C[np.ix_(perm, perm)], P=model.P[perm])


def model_to_dict(model: KernelModel) -> dict:
    if isinstance(model, SbmModel):
        return {"kind": "sbm", "C": model.C.tolist(), "P": model.P.tolist()}
    return {
        "kind": "gaussian",
        "sigma": model.sigma,
        "interval": list(model.interval),
        "quad_nodes": model.quad_nodes,
    }


def model_from_dict(spec: dict) -> KernelModel:
    kind = spec.get("kind")
    if kind == "sbm":
        return SbmModel(C=np.asarray(spec["C"], dtype=float), P=np.asarray(spec["P"], dtype=float))
    if kind == "gaussian":
        return GaussianKernelModel(
            sigma=float(spec.get("sigma", 0.5)),
            interval=tuple(spec.get("interval", (-1.0, 1.0))),
            quad_nodes=int(spec.get("quad_nodes", 512)),
        )
    raise ValueError(f"unknown model kind: {kind!r}")


def load_model(path: str | Path) -> KernelModel:
    """Load a model definition from a nested key-value (JSON) config file."""
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def two_block_fixture() -> SbmModel:
    """The 2-community reference model used across tests and sweeps:
    C = [[1/2, 1/4], [1/4, 3/8]], P = (1/3, 2/3)."""
    return SbmModel(
        C=np.array([[0.5, 0.25], [0.25, 0.375]]),
        P=np.array([1.0 / 3.0, 2.0 / 3.0]),
    )
