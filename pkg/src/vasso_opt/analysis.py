"""Diagnostics: adversary drift, EMA variance suppression, delta-stability,
SNR adversary spread, Lanczos spectra, and landscape slices.

Everything here is pure given (objective, rng) and built for desk-scale
problems: dense vectors, full reorthogonalization, closed forms where they
exist.  The linearized sharpness surrogate L(v) = f(x) + rho*||v|| (the inner
maximum of a linear form over the rho-sphere) is used exactly rather than by
numerical maximization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.signal import lfilter
from scipy.special import gammaln

from .core import DEGENERATE_NORM_TOL, norm2
from .errors import InvalidParameterError
from .optimizers import vasso_update


@dataclass
class StabilityTrace:
    drifts: np.ndarray   # drifts[t] = ||eps_{t+1} - eps_t||
    rho: float


def track_drift(epsilons, rho: float | None = None) -> StabilityTrace:
    """Chord lengths between consecutive adversaries.

    All adversaries live on a common sphere (or are zero), so every drift is
    at most the diameter 2*rho.  When ``rho`` is not given it is inferred as
    the largest adversary norm in the sequence.
    """
    eps = [np.asarray(e, dtype=np.float64) for e in epsilons]
    if len(eps) < 2:
        return StabilityTrace(np.zeros(0), rho if rho is not None else 0.0)
    if rho is None:
        rho = max(norm2(e) for e in eps)
    drifts = np.array([norm2(b - a) for a, b in zip(eps[:-1], eps[1:])])
    return StabilityTrace(drifts, float(rho))


def mse_suppression(obj, x_fixed, theta: float, n_steps: int, rng
                    ) -> tuple[float, float]:
    """Steady-state E||d - grad f||^2 and E||g - grad f||^2 at a fixed point.

    Runs the EMA recursion against fresh stochastic gradients at ``x_fixed``
    for ceil(10/theta) burn-in steps plus ``n_steps`` measured steps.  At the
    fixpoint the EMA variance settles at theta/(2-theta) times the gradient
    variance, which is what the returned ratio should approach.
    """
    truth = obj.full_grad(x_fixed)
    sampler = obj.make_sampler(1, rng)
    burn = math.ceil(10.0 / theta)
    state = None
    acc_d = 0.0
    acc_g = 0.0
    for i in range(burn + n_steps):
        g = obj.grad(x_fixed, sampler())
        state, _ = vasso_update(state, g, theta, 0.0)
        if i >= burn:
            acc_d += norm2(state.d - truth) ** 2
            acc_g += norm2(g - truth) ** 2
    return acc_d / n_steps, acc_g / n_steps


def ema_steady_state_mse(theta: float, sigma2: float) -> float:
    """Closed-form steady-state EMA error variance theta/(2-theta) * sigma^2."""
    return theta / (2.0 - theta) * sigma2


# -- slope samplers for delta_stability ------------------------------------

def _grad_draws(obj, x, n: int, rng) -> np.ndarray:
    """n stochastic gradients at x, stacked (vectorized where the objective allows)."""
    if hasattr(obj, "grad_draws"):
        return obj.grad_draws(x, n, rng)
    sampler = obj.make_sampler(1, rng)
    return np.stack([obj.grad(x, sampler()) for _ in range(n)])


def noisy_grad_sampler(obj, x):
    """Draws of the raw stochastic gradient at x (the SAM slope distribution)."""

    def draw(n: int, rng) -> np.ndarray:
        return _grad_draws(obj, x, n, rng)

    return draw


def ema_slope_sampler(obj, x, theta: float, burn_in: int | None = None):
    """Draws from the steady-state EMA slope chain at x (the VASSO slope).

    Each call runs a fresh chain: burn-in of ceil(10/theta) EMA steps (unless
    overridden), then ``n`` consecutive chain states.  The recursion
    d_t = (1-theta) d_{t-1} + theta g_t is evaluated as a linear filter over
    the stacked gradient draws; a unit test pins it against the step-by-step
    update.
    """
    if not 0.0 < theta <= 1.0:
        raise InvalidParameterError(f"theta must be in (0,1], got {theta}")
    burn = math.ceil(10.0 / theta) if burn_in is None else burn_in

    def draw(n: int, rng) -> np.ndarray:
        gs = _grad_draws(obj, x, burn + n, rng)
        chain = ema_chain(gs, theta)
        return chain[burn:]

    return draw


def ema_chain(gs: np.ndarray, theta: float, d_init: np.ndarray | None = None
              ) -> np.ndarray:
    """Apply d_t = (1-theta) d_{t-1} + theta g_t along axis 0.

    ``d_init`` defaults to gs[0] (warm start), making chain[0] == gs[0].
    """
    if d_init is None:
        d_init = gs[0]
    zi = ((1.0 - theta) * d_init)[np.newaxis, :]
    chain, _ = lfilter([theta], [1.0, -(1.0 - theta)], gs, axis=0, zi=zi)
    return chain


def delta_stability(obj, x, v, rho: float, n_samples: int, rng) -> float:
    """Empirical E|L(v) - L(grad f(x))| with L(v) = f(x) + rho*||v||.

    ``v`` is either a fixed vector or a sampler ``(n, rng) -> (n, dim)``
    providing draws of the slope estimate.
    """
    if rho < 0:
        raise InvalidParameterError(f"rho must be >= 0, got {rho}")
    g_norm = norm2(obj.full_grad(x))
    if callable(v):
        draws = v(n_samples, rng)
        norms = np.linalg.norm(draws, axis=1)
        return float(np.mean(np.abs(rho * norms - rho * g_norm)))
    return abs(rho * norm2(np.asarray(v, dtype=np.float64)) - rho * g_norm)


# -- SNR adversary spread ---------------------------------------------------

@dataclass
class SpreadStat:
    noise_scale: float
    mean_cos: float
    std_cos: float


def mean_gaussian_norm(dim: int, scale: float = 1.0) -> float:
    """E||zeta|| for zeta ~ N(0, scale^2 I_dim): scale*sqrt(2)*Gamma((d+1)/2)/Gamma(d/2)."""
    return scale * math.sqrt(2.0) * math.exp(gammaln((dim + 1) / 2.0) - gammaln(dim / 2.0))


def noise_scale_for_snr(true_grad: np.ndarray, snr: float) -> float:
    """Per-coordinate noise std giving ||grad f|| / E||zeta|| == snr."""
    if snr <= 0:
        raise InvalidParameterError(f"snr must be positive, got {snr}")
    return norm2(true_grad) / (snr * mean_gaussian_norm(true_grad.shape[0]))


def snr_adversary_spread(true_grad: np.ndarray, noise_scales, n_draws: int,
                         rho: float, rng) -> list[SpreadStat]:
    """Cosine alignment between noisy adversaries and the true gradient.

    For each scale, draws n adversaries eps = rho*(g+zeta)/||g+zeta|| and
    reports mean and std of cos(eps, g).  Alignment decays from ~1 toward 0
    as the noise scale grows past ||g||.
    """
    g = np.asarray(true_grad, dtype=np.float64)
    gn = norm2(g)
    if gn <= DEGENERATE_NORM_TOL:
        raise InvalidParameterError("true_grad must be non-zero")
    ghat = g / gn
    out = []
    for scale in noise_scales:
        v = g[np.newaxis, :] + scale * rng.standard_normal((n_draws, g.shape[0]))
        norms = np.linalg.norm(v, axis=1)
        norms[norms == 0.0] = 1.0  # degenerate draws count as orthogonal
        cos = (v @ ghat) / norms
        out.append(SpreadStat(float(scale), float(np.mean(cos)), float(np.std(cos))))
    return out


# -- Lanczos spectrum -------------------------------------------------------

@dataclass
class SpectrumEstimate:
    top_eigenvalues: list[float]   # descending
    lanczos_iters: int
    residuals: list[float]
    breakdown: bool = False


def lanczos_spectrum(obj, x, k: int, iters: int, rng) -> SpectrumEstimate:
    """Top-k Ritz values of the Hessian at x via Lanczos with full reorthogonalization.

    Residual for Ritz pair (lambda_i, y_i) is |beta_m * y_i[last]|.  Early
    breakdown (the Krylov space closed) returns whatever subspace converged,
    flagged via ``breakdown``.
    """
    dim = obj.dim
    if not 1 <= k <= iters or iters > dim:
        raise InvalidParameterError(f"need 1 <= k <= iters <= dim, got k={k}, "
                                    f"iters={iters}, dim={dim}")
    V = np.zeros((iters, dim))
    alphas = np.zeros(iters)
    betas = np.zeros(iters)
    v = rng.standard_normal(dim)
    V[0] = v / norm2(v)
    m = iters
    broke = False
    last_beta = 0.0
    for j in range(iters):
        w = obj.hvp(x, V[j])
        alphas[j] = float(V[j] @ w)
        w = w - alphas[j] * V[j]
        if j > 0:
            w = w - betas[j - 1] * V[j - 1]
        # full reorthogonalization, twice for good measure
        for _ in range(2):
            w = w - V[:j + 1].T @ (V[:j + 1] @ w)
        beta = norm2(w)
        last_beta = beta
        if beta <= 1e-12 * max(1.0, abs(alphas[j])):
            m = j + 1
            broke = True
            break
        if j + 1 < iters:
            betas[j] = beta
            V[j + 1] = w / beta
    evals, evecs = eigh_tridiagonal(alphas[:m], betas[:m - 1])
    order = np.argsort(evals)[::-1][:min(k, m)]
    top = [float(evals[i]) for i in order]
    residuals = [float(abs(last_beta * evecs[m - 1, i])) for i in order]
    return SpectrumEstimate(top, m, residuals, breakdown=broke)


# -- landscape slices -------------------------------------------------------

def _normalized_direction(obj, d: np.ndarray, x_center: np.ndarray) -> np.ndarray:
    if norm2(d) <= DEGENERATE_NORM_TOL:
        raise InvalidParameterError("slice direction must be non-zero")
    if hasattr(obj, "normalize_direction"):
        return obj.normalize_direction(d, x_center)
    return d / norm2(d)


def landscape_slice(obj, x_center, directions, alphas, betas=None) -> np.ndarray:
    """Loss on a 1-D or 2-D affine slice through x_center.

    ``directions`` holds one or two vectors; they are filter-normalized when
    the objective supports it (per-neuron scaling for the MLP), plain
    unit-normalized otherwise.  Returns loss values of shape (len(alphas),)
    or (len(alphas), len(betas)).
    """
    dirs = [_normalized_direction(obj, np.asarray(d, dtype=np.float64), x_center)
            for d in directions]
    if len(dirs) == 1:
        if betas is not None:
            raise InvalidParameterError("betas given but only one direction")
        return np.array([obj.full_loss(x_center + a * dirs[0]) for a in alphas])
    if len(dirs) == 2:
        if betas is None:
            raise InvalidParameterError("two directions need a beta grid")
        out = np.empty((len(alphas), len(betas)))
        for i, a in enumerate(alphas):
            base = x_center + a * dirs[0]
            for j, b in enumerate(betas):
                out[i, j] = obj.full_loss(base + b * dirs[1])
        return out
    raise InvalidParameterError("directions must hold 1 or 2 vectors")
