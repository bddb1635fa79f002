"""Clustering of component scores: GMM with BIC, k-means with the gap statistic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K

DEFAULT_K_RANGE = range(2, 21)
GMM_RESTARTS = 5
KMEANS_RESTARTS = 10
GAP_REFERENCES = 25
REG_SCALE = 1e-6


class ClusteringError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GmmModel:
    k: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    loglik: float
    resp: np.ndarray
    trace: np.ndarray
    converged: bool

    @property
    def assignments(self) -> np.ndarray:
        return np.argmax(self.resp, axis=1)

    @property
    def n_params(self) -> int:
        return gmm_free_params(self.k, self.means.shape[1])

    def bic(self) -> float:
        n = self.resp.shape[0]
        return -2.0 * self.loglik + self.n_params * math.log(n)


@dataclass(frozen=True, eq=False)
class KMeansModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    dispersion: float
    trace: np.ndarray


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    """Hard clustering with labels ``0..k-1``, all nonempty.

    ``model_k`` is the component count chosen by the selector; ``k`` can be
    smaller when a fitted component ends up with no hard-assigned point.
    ``trace`` maps each tried k to its score (``bic``, or ``gap`` and ``s``).
    """

    method: str
    k: int
    assignments: np.ndarray
    model_k: int
    trace: dict = field(default_factory=dict)


def gmm_free_params(k: int, d: int = 2) -> int:
    return (k - 1) + k * d + k * d * (d + 1) // 2


def _points(points) -> np.ndarray:
    x = np.ascontiguousarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"points must be an n x d array, got shape {x.shape}")
    return x


def _compact(labels: np.ndarray) -> tuple[np.ndarray, int]:
    used, compact = np.unique(labels, return_inverse=True)
    return compact.astype(np.int64), len(used)


def regularization(x: np.ndarray) -> float:
    """Ridge added to covariance diagonals: a millionth of the mean variance."""
    var = x.var(axis=0).mean()
    return REG_SCALE * (var if var > 0 else 1.0)


def _normalize(logp: np.ndarray) -> tuple[np.ndarray, float]:
    top = logp.max(axis=0)
    resp = np.exp(logp - top)
    total = resp.sum(axis=0)
    resp /= total
    return resp, float(np.sum(top + np.log(total)))


def em(xt: np.ndarray, resp: np.ndarray, reg: float, tol: float = 1e-6, max_iter: int = 500):
    """EM for a full-covariance mixture started from responsibilities (k x n).

    Stops when the relative log-likelihood change falls below ``tol`` or after
    ``max_iter`` M-steps.  Returns ``(weights, means, covs, resp, loglik,
    trace, converged)`` with parameters, responsibilities and log-likelihood
    mutually consistent, or ``None`` if a covariance became singular.
    """
    d = xt.shape[0]
    k = resp.shape[0]
    weights, means, covs = np.empty(k), np.empty((k, d)), np.empty((k, d, d))
    logp = np.empty_like(resp)
    trace = []
    K.mstep(xt, resp, reg, weights, means, covs)
    converged = False
    for it in range(max_iter + 1):
        if not K.log_densities(xt, weights, means, covs, logp):
            return None
        resp, ll = _normalize(logp)
        if not np.isfinite(ll):
            return None
        trace.append(ll)
        if it > 0 and abs(ll - trace[-2]) <= tol * abs(trace[-2]):
            converged = True
            break
        if it == max_iter:
            break
        K.mstep(xt, resp, reg, weights, means, covs)
    return weights, means, covs, resp, trace[-1], np.array(trace), converged


def fit_gmm(
    points,
    k: int,
    rng: np.random.Generator,
    restarts: int = GMM_RESTARTS,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> GmmModel:
    """Best-of-``restarts`` EM fit, each start seeded by k-means++.

    A start whose covariance turns singular despite the ridge is discarded
    and replaced by a fresh one (at most ``2 * restarts`` replacements).
    """
    x = _points(points)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    xt = np.ascontiguousarray(x.T)
    reg = regularization(x)
    best = None
    attempts = 0
    fits = 0
    dist = np.empty(n)
    labels = np.zeros(n, dtype=np.int64)
    while fits < restarts and attempts < 3 * restarts:
        attempts += 1
        K.nearest(xt, K.kmeanspp(xt, k, rng.random(k)), dist, labels)
        resp0 = np.zeros((k, n))
        resp0[labels, np.arange(n)] = 1.0
        fit = em(xt, resp0, reg, tol, max_iter)
        if fit is None:
            continue
        fits += 1
        w, mu, cov, resp, ll, trace, converged = fit
        if best is None or ll > best.loglik:
            best = GmmModel(k, w, mu, cov, ll, resp.T, trace, converged)
    if best is None:
        raise ClusteringError(f"all {attempts} EM starts for k={k} were singular")
    return best


def select_gmm(
    points,
    rng: np.random.Generator,
    k_range=DEFAULT_K_RANGE,
    restarts: int = GMM_RESTARTS,
) -> ClusteringResult:
    """Fit a GMM for every k in ``k_range`` and keep the one with lowest BIC."""
    x = _points(points)
    ks = [k for k in k_range if k <= x.shape[0]]
    if not ks:
        raise ValueError(f"no k in {list(k_range)} fits {x.shape[0]} points")
    trace = {}
    best = None
    for k, sub in zip(ks, rng.spawn(len(ks))):
        try:
            model = fit_gmm(x, k, sub, restarts=restarts)
        except ClusteringError as exc:
            trace[k] = {"bic": None, "error": str(exc)}
            continue
        bic = model.bic()
        trace[k] = {"bic": bic, "loglik": model.loglik}
        if best is None or bic < best[0]:
            best = (bic, model)
    if best is None:
        raise ClusteringError("GMM fit failed for every k")
    labels, k_used = _compact(best[1].assignments)
    return ClusteringResult("GMM", k_used, labels, best[1].k, trace)


def fit_kmeans(
    points,
    k: int,
    rng: np.random.Generator,
    restarts: int = KMEANS_RESTARTS,
    max_iter: int = 300,
) -> KMeansModel:
    """Best-dispersion Lloyd fit over ``restarts`` k-means++ seeds."""
    x = _points(points)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    xt = np.ascontiguousarray(x.T)
    best = None
    for _ in range(restarts):
        labels, centers, wss, trace = K.lloyd(xt, K.kmeanspp(xt, k, rng.random(k)), max_iter)
        if best is None or wss < best.dispersion:
            best = KMeansModel(k, centers, labels, float(wss), trace)
    return best


def _log_dispersion(w: float) -> float:
    return math.log(w) if w > 0 else math.log(np.finfo(np.float64).tiny)


def gap_statistic(
    points,
    rng: np.random.Generator,
    k_range=DEFAULT_K_RANGE,
    n_refs: int = GAP_REFERENCES,
    restarts: int = KMEANS_RESTARTS,
):
    """Gap(k) and s_k for each k, plus the k-means fit on the data.

    Reference sets are uniform over the per-dimension bounding box of the
    data; the same ``n_refs`` sets are reused for every k.
    """
    x = _points(points)
    lo, hi = x.min(axis=0), x.max(axis=0)
    refs = [lo + (hi - lo) * rng.random(x.shape) for _ in range(n_refs)]
    ks = list(k_range)
    gaps, sds, fits = {}, {}, {}
    for k, sub in zip(ks, rng.spawn(len(ks))):
        model = fit_kmeans(x, k, sub, restarts=restarts)
        ref_logs = np.array(
            [_log_dispersion(fit_kmeans(r, k, sub, restarts=restarts).dispersion) for r in refs]
        )
        gaps[k] = float(ref_logs.mean() - _log_dispersion(model.dispersion))
        sds[k] = float(ref_logs.std() * math.sqrt(1.0 + 1.0 / n_refs))
        fits[k] = model
    return gaps, sds, fits


def choose_gap_k(gaps: dict, sds: dict) -> int:
    """Smallest k with Gap(k) >= Gap(k+1) - s_{k+1}, else the Gap maximiser."""
    ks = sorted(gaps)
    for k, k_next in zip(ks, ks[1:]):
        if gaps[k] >= gaps[k_next] - sds[k_next]:
            return k
    return max(ks, key=lambda k: gaps[k])


def select_kmeans_gap(
    points,
    rng: np.random.Generator,
    k_range=DEFAULT_K_RANGE,
    n_refs: int = GAP_REFERENCES,
    restarts: int = KMEANS_RESTARTS,
) -> ClusteringResult:
    if n_refs < 10:
        raise ValueError(f"gap statistic needs at least 10 reference sets, got {n_refs}")
    x = _points(points)
    k_range = [k for k in k_range if k <= x.shape[0]]
    if not k_range:
        raise ValueError(f"no k fits {x.shape[0]} points")
    gaps, sds, fits = gap_statistic(x, rng, k_range, n_refs, restarts)
    k = choose_gap_k(gaps, sds)
    labels, k_used = _compact(fits[k].assignments)
    trace = {kk: {"gap": gaps[kk], "s": sds[kk]} for kk in gaps}
    return ClusteringResult("KM", k_used, labels, k, trace)
