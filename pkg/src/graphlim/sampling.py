"""Sampling of latent-position random graphs and their shift matrices.

A graph is drawn by sampling latents x_i iid from P and then, independently
for i < j, edges a_ij ~ Bernoulli(alpha_n w(x_i, x_j)), mirrored to keep A
symmetric. The diagonal is fixed to zero (no self loops).

Shift matrices:

    adjacency variant:  S = A / (n alpha_n)
    Laplacian variant:  S = D^{-1/2} A D^{-1/2}

Rows and columns of zero-degree nodes are set to zero in the Laplacian
variant instead of erroring, so sparse-regime sweeps do not abort; callers
can report ``zero_degree_count``.

The Gram matrix W = [w_S(x_i, x_j) / n] uses the *population* degree
function in the Laplacian case. It is the noiseless target the filtered
shift matrices concentrate around.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import (
    GaussianKernelModel,
    InvalidProbabilityError,
    KernelModel,
    SbmModel,
    ShiftKind,
    kernel_cross,
)
from .limits import LimitFunction, kernel_cross_shift


@dataclass(frozen=True, eq=False)
class Graph:
    """Sampled graph: latents X, symmetric 0/1 adjacency A, sparsity alpha."""

    X: np.ndarray
    A: np.ndarray
    alpha: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        X = np.asarray(self.X)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != X.shape[0]:
            raise ValueError("A must be n x n with one latent per node")
        if np.any(np.diag(A) != 0.0):
            raise ValueError("A must have a zero diagonal")
        if not np.array_equal(A, A.T):
            raise ValueError("A must be symmetric")
        if not np.all((A == 0.0) | (A == 1.0)):
            raise ValueError("A entries must be 0 or 1")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Noise covariance for node features; symmetric p.s.d."""

    covariance: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if C.shape[0] != C.shape[1] or not np.allclose(C, C.T, atol=1e-12):
            raise ValueError("covariance must be square symmetric")
        if np.linalg.eigvalsh(C).min() < -1e-12:
            raise ValueError("covariance must be positive semi-definite")
        object.__setattr__(self, "covariance", C)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.covariance))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_latents(model: KernelModel, n: int, rng) -> np.ndarray:
    rng = _as_rng(rng)
    if isinstance(model, SbmModel):
        return rng.choice(np.arange(1, model.n_communities + 1), size=n, p=model.P)
    a, b = model.interval
    return rng.uniform(a, b, size=n)


def sample_graph(model: KernelModel, n: int, alpha: float, seed) -> Graph:
    """Draw a latent-position random graph. Deterministic given the seed."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    rng = _as_rng(seed)
    X = sample_latents(model, n, rng)
    probs = alpha * kernel_cross(model, X, X)
    if probs.max(initial=0.0) > 1.0 + 1e-12:
        raise InvalidProbabilityError("alpha * w exceeds 1")
    U = rng.random((n, n))
    upper = np.triu(U < probs, k=1)
    A = (upper | upper.T).astype(float)
    return Graph(X=X, A=A, alpha=alpha)


def zero_degree_count(g: Graph) -> int:
    return int(np.sum(g.A.sum(axis=1) == 0))


def shift_matrix(g: Graph, kind: ShiftKind) -> np.ndarray:
    if kind == ShiftKind.NORMALIZED_ADJACENCY:
        return g.A / (g.n * g.alpha)
    deg = g.A.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    return inv_sqrt[:, None] * g.A * inv_sqrt[None, :]


def gram_matrix(model: KernelModel, X, kind: ShiftKind) -> np.ndarray:
    """W = [w_S(x_i, x_j) / n], diagonal included."""
    X = np.atleast_1d(X)
    return kernel_cross_shift(model, kind, X, X) / X.shape[0]


def noisy_features(f0, X, noise: NoiseSpec, seed) -> np.ndarray:
    """Z = sampling of f0 at X plus iid centered Gaussian noise with
    covariance ``noise.covariance``."""
    rng = _as_rng(seed)
    X = np.atleast_1d(X)
    base = f0.at(X) if isinstance(f0, LimitFunction) else np.atleast_2d(np.asarray(f0(X), dtype=float))
    if base.ndim == 1:
        base = base[:, None]
    if base.shape[1] != noise.dim:
        raise ValueError("noise covariance dimension does not match f0 output")
    C = noise.covariance
    if np.allclose(C, 0.0):
        return base.copy()
    # Symmetric p.s.d. square root; handles rank-deficient covariances.
    lam, V = np.linalg.eigh(C)
    root = V @ np.diag(np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    nu = rng.standard_normal((X.shape[0], noise.dim)) @ root
    return base + nu


def permute_graph(g: Graph, perm) -> Graph:
    """Apply a node permutation: node i of the result is node perm[i]."""
    perm = np.asarray(perm, dtype=int)
    return Graph(X=g.X[perm], A=g.A[np.ix_(perm, perm)], alpha=g.alpha)


def save_graph(g: Graph, edge_path, latent_path) -> None:
    """Plain-text edge list ("i j" per line, 0-based, i < j) plus a latent
    sidecar file with one float or community index per line."""
    edges = np.argwhere(np.triu(g.A, k=1) > 0)
    with open(edge_path, "w") as fh:
        fh.write(f"# alpha={g.alpha!r}\n")
        for i, j in edges:
            fh.write(f"{i} {j}\n")
    with open(latent_path, "w") as fh:
        for x in g.X:
            fh.write(f"{int(x)}\n" if np.issubdtype(g.X.dtype, np.integer) else f"{x!r}\n")


def load_graph(edge_path, latent_path, discrete_latents: bool | None = None) -> Graph:
    lines = Path(latent_path).read_text().split()
    if discrete_latents is None:
        discrete_latents = all("." not in tok and "e" not in tok for tok in lines)
    X = np.array([int(t) for t in lines]) if discrete_latents else np.array([float(t) for t in lines])
    n = X.shape[0]
    A = np.zeros((n, n))
    alpha = 1.0
    with open(edge_path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if "alpha=" in line:
                    alpha = float(line.split("alpha=")[1])
                continue
            if line:
                i, j = map(int, line.split())
                A[i, j] = A[j, i] = 1.0
    return Graph(X=X, A=A, alpha=alpha)


def expected_edge_density(model: KernelModel) -> float:
    """E w(x, y) under P x P; exact sum for SBMs, quadrature otherwise."""
    from .kernels import latent_grid

    points, pw = latent_grid(model)
    K = kernel_cross(model, points, points)
    return float(pw @ K @ pw)
