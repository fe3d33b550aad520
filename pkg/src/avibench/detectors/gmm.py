"""Diagonal-covariance Gaussian mixtures fitted by EM, one per class."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

VAR_FLOOR = 1e-6
LOG_2PI = np.log(2 * np.pi)


class GmmError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiagGmm:
    weights: np.ndarray  # [k]
    means: np.ndarray  # [k, d]
    variances: np.ndarray  # [k, d]
    loglik_trace: tuple = ()  # mean per-frame log-likelihood at each E-step
    converged: bool = True

    @property
    def n_components(self) -> int:
        return self.weights.size

    def component_loglik(self, x: np.ndarray) -> np.ndarray:
        """log w_k + log N(x | mu_k, diag var_k), shape [n, k]."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        inv = 1.0 / self.variances
        quad = (x ** 2) @ inv.T - 2.0 * x @ (self.means * inv).T + np.sum(self.means ** 2 * inv, axis=1)
        norm = x.shape[1] * LOG_2PI + np.sum(np.log(self.variances), axis=1)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logw - 0.5 * (norm + np.maximum(quad, 0.0))

    def frame_loglik(self, x: np.ndarray) -> np.ndarray:
        return logsumexp(self.component_loglik(x), axis=1)


@dataclass(frozen=True, eq=False)
class GmmPair:
    positive: DiagGmm
    negative: DiagGmm
    var_floor: float = VAR_FLOOR
    tau: float = 1.0
    params: dict = field(default_factory=dict)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centres = [x[rng.integers(x.shape[0])]]
    d2 = np.sum((x - centres[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        idx = rng.choice(x.shape[0], p=d2 / total)
        centres.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centres)


def _m_step(x, resp, old: DiagGmm, var_floor):
    nk = resp.sum(axis=0)
    weights = nk / nk.sum()
    means = old.means.copy()
    variances = old.variances.copy()
    for j in np.flatnonzero(nk > 0):
        r = resp[:, j]
        mu = r @ x / nk[j]
        means[j] = mu
        variances[j] = np.maximum(r @ (x - mu) ** 2 / nk[j], var_floor)
    return DiagGmm(weights, means, variances)


def fit_diag_gmm(x, n_components: int = 8, max_iter: int = 100, tol: float = 1e-6,
                 seed=None, var_floor: float = VAR_FLOOR) -> DiagGmm:
    """EM for one class. Each EM step maximizes with variances constrained to >= var_floor,
    so the log-likelihood trace is non-decreasing."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise GmmError("need a non-empty [n, d] frame matrix")
    if n_components < 1:
        raise GmmError("n_components must be positive")
    if x.shape[0] < n_components:
        raise GmmError(f"{x.shape[0]} frames for {n_components} components")
    rng = np.random.default_rng(seed)
    if np.all(x == x[0]):
        # degenerate class: one component at the shared frame
        var = np.full((1, x.shape[1]), var_floor)
        g = DiagGmm(np.ones(1), x[:1].copy(), var)
        ll = float(g.frame_loglik(x).mean())
        return DiagGmm(g.weights, g.means, g.variances, (ll,), True)

    means = _kmeanspp(x, n_components, rng)
    k = means.shape[0]
    gvar = np.maximum(x.var(axis=0), var_floor)
    g = DiagGmm(np.full(k, 1.0 / k), means, np.tile(gvar, (k, 1)))
    trace = []
    converged = False
    for _ in range(max_iter):
        comp = g.component_loglik(x)
        frame_ll = logsumexp(comp, axis=1)
        trace.append(float(frame_ll.mean()))
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        resp = np.exp(comp - frame_ll[:, None])
        g = _m_step(x, resp, g, var_floor)
    else:
        trace.append(float(g.frame_loglik(x).mean()))
    return DiagGmm(g.weights, g.means, g.variances, tuple(trace), converged)


def gmm_fit(frames_by_class, n_components: int = 8, max_iter: int = 100, tol: float = 1e-6,
            seed=0, var_floor: float = VAR_FLOOR, tau: float = 1.0) -> GmmPair:
    """Fit a positive-class and a negative-class mixture.

    `frames_by_class` maps 1 / 0 (or True / False) to a pooled frame matrix.
    """
    pos = np.asarray(frames_by_class[1], dtype=np.float64)
    neg = np.asarray(frames_by_class[0], dtype=np.float64)
    seeds = np.random.SeedSequence(seed).spawn(2)
    params = dict(n_components=n_components, max_iter=max_iter, tol=tol, seed=seed)
    return GmmPair(
        fit_diag_gmm(pos, n_components, max_iter, tol, np.random.default_rng(seeds[0]), var_floor),
        fit_diag_gmm(neg, n_components, max_iter, tol, np.random.default_rng(seeds[1]), var_floor),
        var_floor, tau, params,
    )


def gmm_loglik_ratio(model: GmmPair, frames) -> float:
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if frames.shape[0] == 0 or frames.size == 0:
        raise GmmError("empty frame set")
    diff = model.positive.frame_loglik(frames) - model.negative.frame_loglik(frames)
    return float(diff.mean())


def gmm_score(model: GmmPair, frames) -> float:
    """logistic(mean per-frame log-likelihood ratio / tau), in [0, 1]."""
    return float(expit(gmm_loglik_ratio(model, frames) / model.tau))
