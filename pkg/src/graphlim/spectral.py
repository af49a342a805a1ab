"""Dense symmetric spectral tools: eigendecomposition, the empirical MSE
norm, sign-aware eigenvector comparison, spectral filters and filter
fitting, and an eigenvector perturbation check.

The MSE norm of an n x d matrix is n^{-1/2} times its Frobenius norm, the
empirical counterpart of the L2(P) norm.

The ideal ReLU filter is the continuous piecewise-linear function equal to
lambda outside +-(level + halfwidth), zero on the dead zone
[-level + halfwidth, level - halfwidth], with linear ramps in between. It
is realized both as a closed form built from six ReLU terms and as explicit
one-hidden-layer MLP weights; the two agree pointwise.

Filter fitting minimizes ||U diag(mu) U^T - W||_F with mu = h(lambda).
Writing D = U^T W U, the objective equals sum_i (mu_i - D_ii)^2 plus the
constant sum of off-diagonal D^2, and d/dmu_i = 2 mu_i - 2 D_ii, which is
chained into the filter parameters for the gradient method.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .limits import LimitFunction
from .nets import MlpParams, init_mlp, mlp_forward, mlp_gradient


@dataclass(frozen=True, eq=False)
class MatrixEigenSystem:
    """Full symmetric eigendecomposition, eigenvalues descending."""

    eigenvalues: np.ndarray
    vectors: np.ndarray  # column i is the i-th eigenvector

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def min_gap(self, count: int) -> float:
        """Smallest gap among the first ``count`` eigenvalues."""
        lam = self.eigenvalues[: min(count, self.eigenvalues.shape[0])]
        return float(np.min(np.abs(np.diff(lam)))) if lam.shape[0] > 1 else np.inf


def sym_eig(S: np.ndarray) -> MatrixEigenSystem:
    S = np.asarray(S, dtype=float)
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(S).max()))
    if np.abs(S - S.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    lam, U = np.linalg.eigh(0.5 * (S + S.T))
    return MatrixEigenSystem(eigenvalues=lam[::-1].copy(), vectors=U[:, ::-1].copy())


def mse_norm(Z: np.ndarray) -> float:
    """n^{-1/2} Frobenius norm; rows index nodes."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    return float(np.linalg.norm(Z) / np.sqrt(n))


def op_norm(M: np.ndarray) -> float:
    """Operator norm; uses the symmetric eigensolver when M is symmetric."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] == M.shape[1] and np.abs(M - M.T).max() <= 1e-12 * max(1.0, np.abs(M).max()):
        return float(np.max(np.abs(np.linalg.eigvalsh(M))))
    return float(np.linalg.norm(M, 2))


def eigvec_alignment_error(u_sampled: np.ndarray, u_limit: LimitFunction, X) -> float:
    """min over s in {1, -1} of ||s sqrt(n) u_sampled - sampling of u_limit||_MSE."""
    u = np.asarray(u_sampled, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-8:
        raise ValueError("u_sampled must have unit Euclidean norm")
    target = u_limit.scalar_at(X)
    if target.shape[0] != u.shape[0]:
        raise ValueError("latent count does not match the eigenvector length")
    scaled = np.sqrt(u.shape[0]) * u
    return min(mse_norm(scaled - target), mse_norm(-scaled - target))


# ---------------------------------------------------------------------------
# Ideal ReLU filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReluFilterParams:
    """Dead-zone center ``level`` and ramp half-width ``halfwidth``."""

    level: float
    halfwidth: float

    def __post_init__(self):
        if not (self.halfwidth > 0.0 and self.level - self.halfwidth > 0.0):
            raise ValueError("need level > halfwidth > 0 for a nontrivial dead zone")


def ideal_relu_filter(params: ReluFilterParams) -> tuple[Callable, MlpParams]:
    """Closed form of the ideal filter plus exact one-hidden-layer weights."""
    lb, tau = params.level, params.halfwidth
    a = (lb + tau) / (2.0 * tau)

    def h(lam):
        lam = np.asarray(lam, dtype=float)
        r = np.maximum
        out = (
            a * (r(lam - lb + tau, 0.0) - r(lam - lb - tau, 0.0))
            + r(lam - lb - tau, 0.0)
            - a * (r(-lam - lb + tau, 0.0) - r(-lam - lb - tau, 0.0))
            - r(-lam - lb - tau, 0.0)
        )
        return out if out.ndim else float(out)

    W1 = np.array([[1.0, 1.0, -1.0, -1.0]])
    b1 = np.array([-(lb - tau), -(lb + tau), -(lb - tau), -(lb + tau)])
    W2 = np.array([[a], [1.0 - a], [-a], [-(1.0 - a)]])
    b2 = np.zeros(1)
    mlp = MlpParams(weights=[W1, W2], biases=[b1, b2])
    return h, mlp


def relu_params_from_gap(eigenvalues, keep: int) -> ReluFilterParams:
    """Filter parameters from the spectral gap after the first ``keep``
    eigenvalues (by magnitude): center midway between |lambda_keep| and the
    next magnitude, half-width a quarter of that gap."""
    mags = np.sort(np.abs(np.asarray(eigenvalues, dtype=float)))[::-1]
    if keep < 1 or keep >= mags.shape[0] + 1:
        raise ValueError("keep must address a gap inside the spectrum")
    hi = mags[keep - 1]
    lo = mags[keep] if keep < mags.shape[0] else 0.0
    if hi - lo <= 0.0:
        raise ValueError("no gap after the requested eigenvalue")
    return ReluFilterParams(level=(hi + lo) / 2.0, halfwidth=(hi - lo) / 4.0)


def apply_spectral_filter(S: np.ndarray, h: Callable) -> np.ndarray:
    """U h(Lambda) U^T with h applied elementwise to the eigenvalues."""
    return filter_from_eigensystem(sym_eig(S), h)


def filter_from_eigensystem(es: MatrixEigenSystem, h: Callable) -> np.ndarray:
    mu = np.asarray(h(es.eigenvalues), dtype=float)
    return (es.vectors * mu[None, :]) @ es.vectors.T


# ---------------------------------------------------------------------------
# Filter fitting
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FilterFit:
    """Result of a filter fit: the filter h, its parameters, the achieved
    Frobenius error and the search/descent trace (iteration, objective,
    parameters)."""

    h: Callable
    error: float
    trace: list
    params: ReluFilterParams | MlpParams | None
    method: str


def _objective_parts(es: MatrixEigenSystem, W: np.ndarray):
    D = es.vectors.T @ W @ es.vectors
    diag = np.diag(D).copy()
    off = float(np.sum(D**2) - np.sum(diag**2))
    return diag, off


def fit_filter(S: np.ndarray, W: np.ndarray, method: str = "grid", budget: int = 32) -> FilterFit:
    """Fit a spectral filter minimizing ||h(S) - W||_F.

    method "grid": exhaustive log-spaced search over ideal-filter
    (level, halfwidth) pairs, budget points per axis, plus the plain
    identity filter as a degenerate candidate (the halfwidth -> 0 limit is
    excluded from the grid itself).

    method "gradient": gradient descent on a scalar MLP filter, ``budget``
    iterations, using d/dmu_i of the objective chained through the MLP.
    """
    S = np.asarray(S, dtype=float)
    W = np.asarray(W, dtype=float)
    if S.shape != W.shape:
        raise ValueError("S and W must have the same shape")
    if budget <= 0:
        raise ValueError("budget must be positive")
    es = sym_eig(S)
    diag, off = _objective_parts(es, W)
    lam = es.eigenvalues

    if method == "grid":
        scale = max(np.abs(lam).max(), 1e-12)
        levels = np.geomspace(1e-3 * scale, 2.0 * scale, budget)
        ratios = np.geomspace(1e-3, 0.75, budget)
        trace = []
        best = (float(np.sqrt(np.sum((lam - diag) ** 2) + off)), None)  # identity filter
        trace.append((0, best[0], "identity"))
        it = 0
        for lb in levels:
            for r in ratios:
                it += 1
                p = ReluFilterParams(level=lb, halfwidth=r * lb)
                h, _ = ideal_relu_filter(p)
                mu = h(lam)
                err = float(np.sqrt(np.sum((mu - diag) ** 2) + off))
                trace.append((it, err, f"{lb!r};{r * lb!r}"))
                if err < best[0]:
                    best = (err, p)
        if best[1] is None:
            return FilterFit(h=lambda t: np.asarray(t, dtype=float), error=best[0], trace=trace, params=None, method="grid")
        h, _ = ideal_relu_filter(best[1])
        return FilterFit(h=h, error=best[0], trace=trace, params=best[1], method="grid")

    if method == "gradient":
        rng = np.random.default_rng(0)
        mlp = init_mlp([1, 16, 1], rng)
        lr = 1e-2
        x = lam[:, None]
        trace = []
        for it in range(budget):
            mu = mlp_forward(mlp, x)[:, 0]
            err2 = float(np.sum((mu - diag) ** 2) + off)
            trace.append((it, np.sqrt(err2), ";".join(repr(v) for v in _flatten_params(mlp))))
            upstream = (2.0 * (mu - diag))[:, None]
            grads, _ = mlp_gradient(mlp, x, upstream)
            for Wl, dW in zip(mlp.weights, grads.weights):
                Wl -= lr * dW
            for bl, db in zip(mlp.biases, grads.biases):
                bl -= lr * db
        mu = mlp_forward(mlp, x)[:, 0]
        err = float(np.sqrt(np.sum((mu - diag) ** 2) + off))

        def h(t):
            t = np.asarray(t, dtype=float)
            return mlp_forward(mlp, t.reshape(-1, 1))[:, 0].reshape(t.shape)

        return FilterFit(h=h, error=err, trace=trace, params=mlp, method="gradient")

    raise ValueError(f"unknown fit method: {method!r}")


def _flatten_params(p: MlpParams) -> np.ndarray:
    return np.concatenate([w.ravel() for w in p.weights] + [b.ravel() for b in p.biases])


def fit_trace_to_csv(fit: FilterFit, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "parameters"])
        for it, obj, params in fit.trace:
            writer.writerow([it, repr(float(obj)), params])


# ---------------------------------------------------------------------------
# Eigenvector perturbation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DavisKahanResult:
    conclusive: bool
    holds: bool
    slack: float
    gap: float


def davis_kahan_check(S: np.ndarray, S_tilde: np.ndarray, p: int) -> DavisKahanResult:
    """Check min_s ||s u_p - u~_p|| <= ||S - S~||_op / delta for the p-th
    (1-based) eigenvector, with delta the eigengap of S around position p.

    Inconclusive (without evaluating the inequality) when the gap is below
    1e-8.
    """
    es = sym_eig(S)
    es_t = sym_eig(S_tilde)
    lam = es.eigenvalues
    if not (1 <= p <= lam.shape[0]):
        raise ValueError("index p out of range")
    left = lam[p - 2] - lam[p - 1] if p >= 2 else np.inf
    right = lam[p - 1] - lam[p] if p < lam.shape[0] else np.inf
    gap = float(min(left, right))
    if gap <= 1e-8:
        return DavisKahanResult(conclusive=False, holds=False, slack=np.nan, gap=gap)
    u = es.vectors[:, p - 1]
    u_t = es_t.vectors[:, p - 1]
    lhs = min(np.linalg.norm(u - u_t), np.linalg.norm(u + u_t))
    rhs = op_norm(S - S_tilde) / gap
    slack = float(rhs - lhs)
    return DavisKahanResult(conclusive=True, holds=slack >= 0.0, slack=slack, gap=gap)
