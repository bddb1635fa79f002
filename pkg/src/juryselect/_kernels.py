"""Compiled inner loops for k-means and Gaussian-mixture EM.

Points are passed transposed (``xt`` has shape d x n) so the innermost loops
run over contiguous point coordinates.  All randomness is drawn by the caller
(numpy ``Generator``) and passed in as uniform variates.
"""

from __future__ import annotations

import math

import numba
import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)
_jit = numba.njit(cache=True, fastmath=True)


@_jit
def nearest(xt, centers, best, labels):
    """Squared distance to, and index of, the nearest center for every point."""
    d, n = xt.shape
    k = centers.shape[0]
    best[:] = np.inf
    if d == 2:
        x0 = xt[0]
        x1 = xt[1]
        for j in range(k):
            c0 = centers[j, 0]
            c1 = centers[j, 1]
            for i in range(n):
                s = (x0[i] - c0) ** 2 + (x1[i] - c1) ** 2
                if s < best[i]:
                    best[i] = s
                    labels[i] = j
        return
    for j in range(k):
        for i in range(n):
            s = 0.0
            for m in range(d):
                diff = xt[m, i] - centers[j, m]
                s += diff * diff
            if s < best[i]:
                best[i] = s
                labels[i] = j


@_jit
def kmeanspp(xt, k, u):
    """k-means++ seeding; ``u`` holds ``k`` uniforms on [0, 1)."""
    d, n = xt.shape
    centers = np.empty((k, d))
    first = min(int(u[0] * n), n - 1)
    for m in range(d):
        centers[0, m] = xt[m, first]
    closest = np.empty(n)
    labels = np.zeros(n, dtype=np.int64)
    nearest(xt, centers[:1], closest, labels)
    for j in range(1, k):
        total = closest.sum()
        pick = n - 1
        if total <= 0.0:
            pick = min(int(u[j] * n), n - 1)
        else:
            target = u[j] * total
            acc = 0.0
            for i in range(n):
                acc += closest[i]
                if acc > target:
                    pick = i
                    break
        for m in range(d):
            centers[j, m] = xt[m, pick]
        for i in range(n):
            s = 0.0
            for m in range(d):
                diff = xt[m, i] - centers[j, m]
                s += diff * diff
            if s < closest[i]:
                closest[i] = s
    return centers


@_jit
def lloyd(xt, centers, max_iter):
    """Lloyd iterations from ``centers`` until assignments stop changing.

    Returns ``(labels, centers, wss, trace)`` where ``trace`` holds the
    within-cluster sum of squares after every assignment step.  An empty
    cluster is re-seeded at the point farthest from its centroid.
    """
    d, n = xt.shape
    k = centers.shape[0]
    centers = centers.copy()
    labels = np.zeros(n, dtype=np.int64)
    prev = np.full(n, -1, dtype=np.int64)
    dist = np.empty(n)
    trace = np.empty(max_iter + 1)
    counts = np.zeros(k, dtype=np.int64)
    sums = np.zeros((k, d))
    n_trace = 0
    for it in range(max_iter + 1):
        nearest(xt, centers, dist, labels)
        trace[n_trace] = dist.sum()
        n_trace += 1
        changed = False
        for i in range(n):
            if labels[i] != prev[i]:
                changed = True
                break
        if not changed or it == max_iter:
            break
        prev[:] = labels
        counts[:] = 0
        sums[:, :] = 0.0
        for i in range(n):
            counts[labels[i]] += 1
            for m in range(d):
                sums[labels[i], m] += xt[m, i]
        for j in range(k):
            if counts[j] > 0:
                for m in range(d):
                    centers[j, m] = sums[j, m] / counts[j]
            else:
                far = np.argmax(dist)
                dist[far] = 0.0
                for m in range(d):
                    centers[j, m] = xt[m, far]
    return labels, centers, dist.sum(), trace[:n_trace]


@_jit
def _cholesky(a, out):
    """Lower Cholesky factor of a small SPD matrix; False if not SPD."""
    d = a.shape[0]
    for i in range(d):
        for j in range(i + 1):
            s = a[i, j]
            for m in range(j):
                s -= out[i, m] * out[j, m]
            if i == j:
                if not s > 0.0:
                    return False
                out[i, i] = math.sqrt(s)
            else:
                out[i, j] = s / out[j, j]
        for j in range(i + 1, d):
            out[i, j] = 0.0
    return True


@_jit
def log_densities(xt, weights, means, covs, logp):
    """``logp[j, i] = log w_j + log N(x_i | mean_j, cov_j)``; False if a cov is singular."""
    d, n = xt.shape
    k = means.shape[0]
    chol = np.empty((d, d))
    y = np.empty(d)
    for j in range(k):
        if not _cholesky(covs[j], chol):
            return False
        logdet = 0.0
        for m in range(d):
            logdet += 2.0 * math.log(chol[m, m])
        lw = math.log(weights[j]) if weights[j] > 0.0 else -np.inf
        const = lw - 0.5 * (d * _LOG_2PI + logdet)
        row = logp[j]
        if d == 2:
            l00 = chol[0, 0]
            l10 = chol[1, 0]
            l11 = chol[1, 1]
            m0 = means[j, 0]
            m1 = means[j, 1]
            for i in range(n):
                y0 = (xt[0, i] - m0) / l00
                y1 = (xt[1, i] - m1 - l10 * y0) / l11
                row[i] = const - 0.5 * (y0 * y0 + y1 * y1)
        else:
            for i in range(n):
                maha = 0.0
                for m in range(d):
                    s = xt[m, i] - means[j, m]
                    for q in range(m):
                        s -= chol[m, q] * y[q]
                    y[m] = s / chol[m, m]
                    maha += y[m] * y[m]
                row[i] = const - 0.5 * maha
    return True


@_jit
def mstep(xt, resp, reg, weights, means, covs):
    """Weighted means/covariances from ``resp`` (k x n); ``reg`` is added to diagonals."""
    d, n = xt.shape
    k = resp.shape[0]
    tiny = 10.0 * np.finfo(np.float64).eps
    total = 0.0
    for j in range(k):
        r = resp[j]
        nk = tiny
        for i in range(n):
            nk += r[i]
        for m in range(d):
            s = 0.0
            for i in range(n):
                s += r[i] * xt[m, i]
            means[j, m] = s / nk
        for a in range(d):
            ma = means[j, a]
            for b in range(a + 1):
                mb = means[j, b]
                s = 0.0
                for i in range(n):
                    s += r[i] * (xt[a, i] - ma) * (xt[b, i] - mb)
                covs[j, a, b] = s / nk
                covs[j, b, a] = s / nk
            covs[j, a, a] += reg
        weights[j] = nk
        total += nk
    for j in range(k):
        weights[j] /= total


@_jit
def _nll(y, eta):
    """Negative binomial log-likelihood, stable for large ``|eta|``."""
    s = 0.0
    for i in range(y.shape[0]):
        e = eta[i]
        s += max(e, 0.0) + math.log1p(math.exp(-abs(e))) - y[i] * e
    return s


@_jit
def _linear(xt, b0, beta, eta):
    k, r = xt.shape
    eta[:] = b0
    for j in range(k):
        bj = beta[j]
        if bj != 0.0:
            for i in range(r):
                eta[i] += bj * xt[j, i]


@_jit
def _cd_quadratic(xt, w, resid, active, lam, beta, tol, max_inner):
    """Coordinate descent on the weighted least-squares model; returns (d_b0, ok)."""
    k, r = xt.shape
    wsum = 0.0
    for i in range(r):
        wsum += w[i]
    xv = np.zeros(k)
    for j in range(k):
        if active[j]:
            s = 0.0
            for i in range(r):
                s += w[i] * xt[j, i] * xt[j, i]
            xv[j] = s / r
    db0 = 0.0
    for _ in range(max_inner):
        delta_max = 0.0
        s = 0.0
        for i in range(r):
            s += w[i] * resid[i]
        d0 = s / wsum
        db0 += d0
        for i in range(r):
            resid[i] -= d0
        delta_max = max(delta_max, wsum / r * d0 * d0)
        for j in range(k):
            if xv[j] <= 0.0:
                continue
            g = 0.0
            for i in range(r):
                g += w[i] * xt[j, i] * resid[i]
            g = g / r + xv[j] * beta[j]
            if g > lam:
                new = (g - lam) / xv[j]
            elif g < -lam:
                new = (g + lam) / xv[j]
            else:
                new = 0.0
            diff = new - beta[j]
            if diff != 0.0:
                beta[j] = new
                for i in range(r):
                    resid[i] -= diff * xt[j, i]
                delta_max = max(delta_max, xv[j] * diff * diff)
        if delta_max < tol:
            return db0, True
    return db0, False


@_jit
def logistic_lasso_path(
    xt, y, lambdas, active, tol, max_outer, max_inner, dev_max, dev_step, min_steps
):
    """Penalized logistic regression along a decreasing ``lambdas`` path.

    ``xt`` (k x r) holds standardized predictors, ``y`` is 0/1 and ``active``
    flags the columns allowed to enter.  Minimizes
    ``-loglik / r + lam * |beta|_1`` by proximal Newton steps (IRLS weights
    floored at 1e-5, coordinate descent on each quadratic model, step
    halving if the objective rises), warm-starting along the path.  After
    ``min_steps`` penalties the path stops once the fraction of deviance
    explained exceeds ``dev_max`` or grows by less than ``dev_step``.
    Returns ``(b0[L], beta[L, k], n_fit, ok)``; only the first ``n_fit``
    entries are filled and ``ok`` is False if a fit hit an iteration cap.
    """
    k, r = xt.shape
    n_lam = lambdas.shape[0]
    b0_path = np.zeros(n_lam)
    beta_path = np.zeros((n_lam, k))
    ybar = 0.0
    for i in range(r):
        ybar += y[i]
    ybar /= r
    ybar = min(max(ybar, 1e-5), 1.0 - 1e-5)
    b0 = math.log(ybar / (1.0 - ybar))
    beta = np.zeros(k)
    eta = np.full(r, b0)
    null_nll = _nll(y, eta)
    prev_ratio = 0.0
    w = np.empty(r)
    resid = np.empty(r)
    ok = True
    n_fit = 0
    for li in range(n_lam):
        lam = lambdas[li]
        obj = _nll(y, eta) / r + lam * np.abs(beta).sum()
        converged = False
        for outer in range(max_outer):
            for i in range(r):
                p = 1.0 / (1.0 + math.exp(-eta[i]))
                w[i] = max(p * (1.0 - p), 1e-5)
                resid[i] = (y[i] - p) / w[i]
            b0_old = b0
            beta_old = beta.copy()
            db0, inner_ok = _cd_quadratic(xt, w, resid, active, lam, beta, tol, max_inner)
            if not inner_ok:
                ok = False
            b0 = b0_old + db0
            _linear(xt, b0, beta, eta)
            new_obj = _nll(y, eta) / r + lam * np.abs(beta).sum()
            halvings = 0
            while new_obj > obj + 1e-12 * abs(obj) and halvings < 40:
                b0 = 0.5 * (b0 + b0_old)
                for j in range(k):
                    beta[j] = 0.5 * (beta[j] + beta_old[j])
                _linear(xt, b0, beta, eta)
                new_obj = _nll(y, eta) / r + lam * np.abs(beta).sum()
                halvings += 1
            change = (b0 - b0_old) ** 2 / (1.0 + b0 * b0)
            for j in range(k):
                change = max(change, (beta[j] - beta_old[j]) ** 2 / (1.0 + beta[j] * beta[j]))
            obj = new_obj
            if change < tol:
                converged = True
                break
        if not converged:
            ok = False
        b0_path[li] = b0
        for j in range(k):
            beta_path[li, j] = beta[j]
        n_fit = li + 1
        if null_nll <= 0.0:
            break
        ratio = 1.0 - _nll(y, eta) / null_nll
        if n_fit >= min_steps and (ratio > dev_max or ratio - prev_ratio < dev_step):
            break
        prev_ratio = ratio
    return b0_path, beta_path, n_fit, ok
