"""L1-penalized logistic regression with a cross-validated penalty.

Predictors are standardized (population SD) before penalization and the
coefficients are mapped back to the original scale, so exact zeros from
coordinate descent are preserved.  The penalty path and the one-standard-
error rule follow the usual glmnet conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K

N_LAMBDA = 100
N_FOLDS = 5
TOL = 1e-7
MAX_OUTER = 1000
MAX_INNER = 10_000
DEV_MAX = 0.999
DEV_STEP = 1e-5
MIN_STEPS = 5


class LassoError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LassoFit:
    """Fit at the selected penalty plus the path and CV diagnostics.

    ``beta`` and ``intercept`` are on the original predictor scale.
    ``cv_mean``/``cv_se`` are per-lambda mean held-out binomial deviance and
    its standard error; they are ``None`` when no CV was run.
    """

    intercept: float
    beta: np.ndarray
    lam: float
    lambdas: np.ndarray
    path_intercept: np.ndarray
    path_beta: np.ndarray
    cv_mean: np.ndarray | None = None
    cv_se: np.ndarray | None = None
    lambda_min: float | None = None

    @property
    def nonzero(self) -> np.ndarray:
        return self.beta != 0.0


def _response(y) -> np.ndarray:
    y = np.asarray(y)
    values = set(np.unique(y).tolist())
    if values <= {0, 1}:
        return y.astype(np.float64)
    if values <= {-1, 1}:
        return (y > 0).astype(np.float64)
    raise ValueError(f"response must be coded 0/1 or -1/+1, got values {sorted(values)}")


def _standardize(x: np.ndarray):
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    active = sd > 1e-10 * np.maximum(1.0, np.abs(mean))
    scale = np.where(active, sd, 1.0)
    z = (x - mean) / scale
    z[:, ~active] = 0.0
    return z, mean, scale, active


def lambda_max(x, y) -> float:
    """Smallest penalty at which every coefficient is zero."""
    z, _, _, active = _standardize(np.asarray(x, dtype=np.float64))
    y = _response(y)
    if not active.any():
        return 0.0
    return float(np.max(np.abs(z.T @ (y - y.mean()))) / len(y))


def lambda_path(x, y, n_lambda: int = N_LAMBDA, min_ratio: float | None = None) -> np.ndarray:
    """Log-spaced decreasing penalties from ``lambda_max`` down to ``min_ratio`` of it."""
    x = np.asarray(x, dtype=np.float64)
    top = lambda_max(x, y)
    if min_ratio is None:
        min_ratio = 1e-4 if x.shape[0] > x.shape[1] else 1e-2
    if top <= 0.0:
        return np.zeros(1)
    return top * np.logspace(0.0, np.log10(min_ratio), n_lambda)


def fit_path(x, y, lambdas, early_stop: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Intercepts and original-scale coefficients (L' x k) along ``lambdas``.

    With ``early_stop`` the path ends (L' < L) once the fraction of deviance
    explained exceeds ``DEV_MAX`` or improves by less than ``DEV_STEP``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"design must be 2-D, got shape {x.shape}")
    y = _response(y)
    if len(y) != x.shape[0]:
        raise ValueError(f"{len(y)} responses for {x.shape[0]} rows")
    z, mean, scale, active = _standardize(x)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    # At lambda_max the null model is exact; round-off in the intercept-only
    # gradient must not let the top predictor in with a 1e-17 coefficient.
    top = float(np.max(np.abs(z.T @ (y - y.mean())))) / len(y) if active.any() else 0.0
    lambdas = np.where(np.abs(lambdas - top) <= 1e-9 * top, top * (1.0 + 1e-9), lambdas)
    dev_max, dev_step = (DEV_MAX, DEV_STEP) if early_stop else (np.inf, -np.inf)
    b0, beta, n_fit, ok = K.logistic_lasso_path(
        np.ascontiguousarray(z.T), y, lambdas, active, TOL, MAX_OUTER, MAX_INNER,
        dev_max, dev_step, MIN_STEPS,
    )
    if not ok:
        raise LassoError(
            f"coordinate descent did not converge (rows={x.shape[0]}, predictors={x.shape[1]})"
        )
    beta = beta[:n_fit] / scale
    b0 = b0[:n_fit] - beta @ mean
    return b0, beta


def _deviance(y: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Mean binomial deviance per column of ``eta`` (rows x L)."""
    p = np.clip(1.0 / (1.0 + np.exp(-eta)), 1e-5, 1.0 - 1e-5)
    yy = y[:, None]
    return -2.0 * np.mean(yy * np.log(p) + (1.0 - yy) * np.log(1.0 - p), axis=0)


def fold_ids(n: int, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    """Random fold id per row with fold sizes differing by at most one."""
    return rng.permutation(np.arange(n) % n_folds)


def logistic_lasso_cv(
    x,
    y,
    rng: np.random.Generator,
    n_folds: int = N_FOLDS,
    n_lambda: int = N_LAMBDA,
    rule: str = "1se",
    early_stop: bool = True,
) -> LassoFit:
    """Lasso logistic regression with ``n_folds``-fold CV over the penalty path.

    ``rule="1se"`` picks the largest penalty whose CV deviance is within one
    standard error of the minimum; ``rule="min"`` picks the minimizer.
    """
    x = np.asarray(x, dtype=np.float64)
    y = _response(y)
    n = x.shape[0]
    if n < 2 * n_folds:
        raise ValueError(f"need at least {2 * n_folds} rows for {n_folds}-fold CV, got {n}")
    if rule not in ("1se", "min"):
        raise ValueError(f"unknown selection rule {rule!r}")
    lambdas = lambda_path(x, y, n_lambda)
    b0, beta = fit_path(x, y, lambdas, early_stop)
    lambdas = lambdas[: len(b0)]
    if len(lambdas) == 1:
        return LassoFit(float(b0[0]), beta[0], float(lambdas[0]), lambdas, b0, beta)

    # A fold whose path stopped early contributes only to the penalties it reached.
    folds = fold_ids(n, n_folds, rng)
    dev = np.full((n_folds, len(lambdas)), np.nan)
    sizes = np.empty(n_folds)
    for f in range(n_folds):
        test = folds == f
        fb0, fbeta = fit_path(x[~test], y[~test], lambdas, early_stop)
        dev[f, : len(fb0)] = _deviance(y[test], fb0 + x[test] @ fbeta.T)
        sizes[f] = test.sum()
    seen = ~np.isnan(dev)
    usable = seen.sum(axis=0) >= 2
    w = np.where(seen, sizes[:, None], 0.0)
    filled = np.where(seen, dev, 0.0)
    cv_mean = np.full(len(lambdas), np.nan)
    cv_se = np.full(len(lambdas), np.nan)
    cv_mean[usable] = (w * filled).sum(axis=0)[usable] / w.sum(axis=0)[usable]
    spread = (w * (filled - np.nan_to_num(cv_mean)) ** 2).sum(axis=0)
    cv_se[usable] = np.sqrt(
        spread[usable] / w.sum(axis=0)[usable] / (seen.sum(axis=0)[usable] - 1)
    )
    best = int(np.nanargmin(cv_mean))
    if rule == "min":
        pick = best
    else:
        pick = int(np.flatnonzero(cv_mean <= cv_mean[best] + cv_se[best])[0])
    return LassoFit(
        intercept=float(b0[pick]),
        beta=beta[pick].copy(),
        lam=float(lambdas[pick]),
        lambdas=lambdas,
        path_intercept=b0,
        path_beta=beta,
        cv_mean=cv_mean,
        cv_se=cv_se,
        lambda_min=float(lambdas[best]),
    )
