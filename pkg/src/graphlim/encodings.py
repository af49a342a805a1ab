"""Positional encodings: sign-invariant eigenvector encodings, deep-set
distance encodings over filtered shift-matrix columns, and the smoothing
encoding S Z, together with the continuous limit of the distance encoding.

Sign-invariant eigenvector encoding, for the first q eigenvectors u_i of
the shift matrix (descending eigenvalue order):

    column block i = f_i(c u_i) + f_i(-c u_i),  c = sqrt(n) if normalized

with a scalar-input MLP f_i per eigenvector, applied entry-wise. The
symmetrization kills the eigenvector sign ambiguity; the sqrt(n) factor
keeps the inputs on the scale of the limit eigenfunctions across graph
sizes.

Distance encoding, for a (possibly spectrally filtered) shift matrix S':

    PE = (1/n) sum_j f(n [S' e_j, ..., S'^q e_j])   (f applied row-wise)

Its continuous limit integrates f over kernel sections:

    PE_lim(z) = int f([S delta_x(z), ..., S^q delta_x(z)]) dP(x)

Powers of S' are accumulated against column blocks; S'^k is never stored
for all k at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .kernels import KernelModel, ShiftKind, latent_grid
from .limits import LimitFunction, from_grid_values, s_delta_power_tables
from .nets import MlpParams, mlp_forward, signnet_symmetrize
from .spectral import (
    FilterFit,
    MatrixEigenSystem,
    ReluFilterParams,
    filter_from_eigensystem,
    ideal_relu_filter,
    sym_eig,
)

#: Sampled-eigenvalue gaps below this attach a multiplicity warning.
TIE_WARN_TOL = 1e-9

#: Spectral radius^q beyond this attaches a conditioning warning.
POWER_CONDITION_BOUND = 1e3


class PeFamily(str, Enum):
    SIGNNET = "signnet"
    DISTANCE = "distance"
    SMOOTHING = "smoothing"


@dataclass(eq=False)
class PeConfig:
    family: PeFamily
    q: int = 1
    branches: Optional[list] = None  # per-eigenvector scalar MLPs (SignNet)
    mlp: Optional[MlpParams] = None  # row-wise MLP on power stacks (Distance)
    normalize: bool = True
    filt: ReluFilterParams | FilterFit | Callable | None = None  # Distance only

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be at least 1")
        if self.family == PeFamily.SIGNNET:
            if not self.branches or len(self.branches) != self.q:
                raise ValueError("one branch MLP per eigenvector is required")
            for b in self.branches:
                if b.widths[0] != 1:
                    raise ValueError("branch MLPs take scalar inputs")
        elif self.family == PeFamily.DISTANCE:
            if self.mlp is None or self.mlp.widths[0] != self.q:
                raise ValueError("distance MLP input width must equal q")
        if self.q > 8 and self.family == PeFamily.DISTANCE:
            raise ValueError("distance encodings support q <= 8")


@dataclass(eq=False)
class PeOutput:
    matrix: np.ndarray
    tie_warning: bool = False
    min_gap: float = np.inf
    conditioning_warning: bool = False


def signnet_pe(S: np.ndarray, cfg: PeConfig) -> PeOutput:
    return signnet_pe_from_eigs(sym_eig(S), cfg)


def signnet_pe_from_eigs(es: MatrixEigenSystem, cfg: PeConfig) -> PeOutput:
    """Sign-invariant eigenvector encoding from a precomputed decomposition."""
    if cfg.family != PeFamily.SIGNNET:
        raise ValueError("config is not a SignNet config")
    n = es.n
    if cfg.q > n:
        raise ValueError("q exceeds the matrix dimension")
    scale = np.sqrt(n) if cfg.normalize else 1.0
    blocks = []
    for i, branch in enumerate(cfg.branches):
        u = es.vectors[:, i]
        blocks.append(signnet_symmetrize(branch, scale * u))
    min_gap = es.min_gap(cfg.q + 1)
    return PeOutput(
        matrix=np.hstack(blocks),
        tie_warning=min_gap < TIE_WARN_TOL,
        min_gap=min_gap,
    )


def _resolve_filter(filt) -> Callable | None:
    if filt is None:
        return None
    if isinstance(filt, ReluFilterParams):
        return ideal_relu_filter(filt)[0]
    if isinstance(filt, FilterFit):
        return filt.h
    if callable(filt):
        return filt
    raise ValueError("unsupported filter specification")


def distance_pe(S: np.ndarray, cfg: PeConfig, block_size: int = 256) -> PeOutput:
    """Deep-set distance encoding over columns of the (filtered) shift matrix."""
    if cfg.family != PeFamily.DISTANCE:
        raise ValueError("config is not a distance config")
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    h = _resolve_filter(cfg.filt)
    if h is None:
        S2 = S
        radius = np.max(np.abs(np.linalg.eigvalsh(S))) if cfg.q > 1 else 0.0
    else:
        es = sym_eig(S)
        S2 = filter_from_eigensystem(es, h)
        radius = float(np.max(np.abs(h(es.eigenvalues))))
    conditioning = cfg.q > 1 and radius > 1.0 and radius**cfg.q > POWER_CONDITION_BOUND

    out_dim = cfg.mlp.widths[-1]
    total = np.zeros((n, out_dim))
    scale = float(n) if cfg.normalize else 1.0
    for start in range(0, n, block_size):
        idx = np.arange(start, min(start + block_size, n))
        V = np.zeros((n, idx.size))
        V[idx, np.arange(idx.size)] = 1.0  # basis columns e_j
        powers = []
        for _ in range(cfg.q):
            V = S2 @ V
            powers.append(V)
        R = np.stack(powers, axis=2)  # (n, block, q): entry (i, j, k) = (S'^{k+1})_{ij}
        rows = R.reshape(-1, cfg.q) * scale
        vals = mlp_forward(cfg.mlp, rows).reshape(n, idx.size, out_dim)
        total += vals.sum(axis=1)
    return PeOutput(matrix=total / n, conditioning_warning=conditioning)


def limit_distance_pe(model: KernelModel, kind: ShiftKind, cfg: PeConfig) -> LimitFunction:
    """Continuous limit of the distance encoding; exact finite sum on SBMs,
    quadrature over the anchor point otherwise."""
    if cfg.family != PeFamily.DISTANCE:
        raise ValueError("config is not a distance config")
    points, pw = latent_grid(model)
    mlp = cfg.mlp

    def integrate_at(z):
        z = np.atleast_1d(z)
        T = s_delta_power_tables(model, kind, z, cfg.q)  # (q, nz, m)
        rows = T.transpose(1, 2, 0).reshape(-1, cfg.q)  # (nz * m, q)
        vals = mlp_forward(mlp, rows).reshape(z.shape[0], points.shape[0], -1)
        return np.einsum("zgp,g->zp", vals, pw)

    grid_vals = integrate_at(points)
    return from_grid_values(model, grid_vals, eval_fn=integrate_at)


def smoothing_pe(S: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Smoothing encoding: one application of the shift matrix, S Z."""
    return np.asarray(S, dtype=float) @ np.asarray(Z, dtype=float)


def pe_to_csv(out: PeOutput, cfg: PeConfig, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"family={cfg.family.value}", f"q={cfg.q}", f"normalize={cfg.normalize}"])
        for row in out.matrix:
            writer.writerow([repr(float(v)) for v in row])
