"""Random sampling of the narrowband delay torus and PCA of the resulting patterns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import svds

from .errors import InvalidArgumentError, RankDeficiencyError
from .spectra import NarrowbandMap

_BATCH = 512
#: above this size the top components come from an iterative solver
_DENSE_LIMIT = 2048


@dataclass
class BPEnsemble:
    """Flattened patterns ``bps`` (sample x pixel) and their pair phases in ``[0, 2 pi)``."""

    bps: np.ndarray
    phases: np.ndarray
    f0: float
    shape: tuple[int, int]

    @property
    def delays(self) -> np.ndarray:
        return self.phases / (2 * np.pi * self.f0)


def sample_torus(nb: NarrowbandMap, count: int, seed: int, num_pairs: int | None = None,
                 pin_center: bool = True) -> BPEnsemble:
    """Narrowband patterns for delays drawn uniformly on ``[0, 1/f0)`` per pair.

    With ``pin_center`` the innermost pair (m = 0) is never delayed.
    """
    if count < 1:
        raise InvalidArgumentError("count must be at least 1")
    pairs = nb.num_pairs if num_pairs is None else int(num_pairs)
    if not 1 <= pairs <= nb.num_pairs:
        raise InvalidArgumentError(f"num_pairs must be in 1..{nb.num_pairs}")
    rng = np.random.default_rng(seed)
    delays = rng.uniform(0.0, 1.0 / nb.f0, size=(count, pairs))
    if pin_center:
        delays[:, 0] = 0.0
    phases = np.mod(2 * np.pi * nb.f0 * delays, 2 * np.pi)
    V = nb.values[..., :pairs].reshape(-1, pairs)
    coef = np.exp(-2j * np.pi * nb.f0 * delays)
    bps = np.empty((count, V.shape[0]))
    for s0 in range(0, count, _BATCH):
        s = coef[s0:s0 + _BATCH] @ V.T
        bps[s0:s0 + _BATCH] = s.real ** 2 + s.imag ** 2
    return BPEnsemble(bps, phases, nb.f0, nb.grid.shape)


@dataclass
class PCAProjection:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    coords: np.ndarray

    @property
    def explained(self) -> np.ndarray:
        return np.cumsum(self.eigenvalues)


def _complete_basis(V: np.ndarray, k: int) -> np.ndarray:
    """Extend orthonormal rows ``V`` to ``k`` rows with canonical directions."""
    rows = list(V)
    P = V.shape[1]
    for i in range(P):
        if len(rows) >= k:
            break
        e = np.zeros(P)
        e[i] = 1.0
        for r in rows:
            e -= np.dot(r, e) * r
        n = np.linalg.norm(e)
        if n > 1e-6:
            rows.append(e / n)
    return np.array(rows)


def pca_project(data, k: int = 3) -> PCAProjection:
    """Top-``k`` principal directions of the sample covariance and the projected samples.

    ``data`` is a :class:`BPEnsemble` or a ``(samples, features)`` array.
    Each component's largest-magnitude entry is made positive.
    """
    X = np.asarray(data.bps if isinstance(data, BPEnsemble) else data, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError("data must be a (samples, features) matrix")
    n, P = X.shape
    if k < 1:
        raise InvalidArgumentError("k must be positive")
    if k > P:
        raise RankDeficiencyError(f"k = {k} exceeds the {P} available dimensions")
    mean = X.mean(axis=0)
    Xc = X - mean
    if min(n, P) <= _DENSE_LIMIT or k >= min(n, P) - 1:
        _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
        s, Vt = s[:k], Vt[:k]
    else:
        v0 = np.ones(min(n, P)) / np.sqrt(min(n, P))
        _, s, Vt = svds(Xc, k=k, v0=v0)
        order = np.argsort(s)[::-1]
        s, Vt = s[order], Vt[order]
    if Vt.shape[0] < k:
        Vt = _complete_basis(Vt, k)
        s = np.concatenate([s, np.zeros(k - s.size)])
    idx = np.argmax(np.abs(Vt), axis=1)
    Vt = Vt * np.sign(Vt[np.arange(k), idx])[:, None]
    eig = s ** 2 / max(n - 1, 1)
    return PCAProjection(mean, Vt, eig, Xc @ Vt.T)
