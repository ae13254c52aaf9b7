"""The optimizer family: SGD, SAM, VASSO, eVASSO, SAM-db, and stochastic Frank-Wolfe.

All steps are pure functions over the objective interface.  State (the EMA
adversary slope, the momentum buffer) is threaded explicitly: each step
returns its updated state alongside the new iterate, so a training loop is
just a fold.  Iteration index ``t`` drives the learning-rate and radius
schedules and is passed keyword-only.

SAM perturbs along the current stochastic gradient; VASSO perturbs along an
exponential moving average of gradients (variance-suppressed adversary);
eVASSO additionally gates the second gradient evaluation with a Bernoulli
draw, reusing the unperturbed gradient on skipped steps.  SAM-db decouples
the adversary's batch from the update batch.  ``sfw_solve`` runs the
Frank-Wolfe recursion over the sphere that the one-step adversary is a
special case of.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (DEGENERATE_NORM_TOL, Schedule, norm2, normalize_to_sphere,
                   schedule_value)
from .errors import InvalidParameterError, NonFiniteError


@dataclass(frozen=True)
class OptimizerConfig:
    rho: float = 0.05            # perturbation radius
    theta: float = 0.2           # EMA weight; 1 collapses VASSO to SAM
    p: float = 1.0               # gate probability; 1 collapses eVASSO to VASSO
    lr: Schedule = field(default_factory=lambda: Schedule("constant", 0.01))
    rho_schedule: Schedule | None = None
    momentum: float = 0.0
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.rho < 0:
            raise InvalidParameterError(f"rho must be >= 0, got {self.rho}")
        if not 0.0 < self.theta <= 1.0:
            raise InvalidParameterError(f"theta must be in (0,1], got {self.theta}")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameterError(f"p must be in [0,1], got {self.p}")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidParameterError(f"momentum must be in [0,1), got {self.momentum}")
        if self.weight_decay < 0:
            raise InvalidParameterError(f"weight_decay must be >= 0, got {self.weight_decay}")

    def rho_at(self, t: int) -> float:
        if self.rho_schedule is None:
            return self.rho
        return schedule_value(self.rho_schedule, t)


@dataclass
class AdversaryState:
    """EMA slope d_t plus its cached norm (the memory-efficient form)."""

    d: np.ndarray
    d_norm: float

    def epsilon(self, rho: float) -> np.ndarray:
        """Reconstruct the adversary rho * d/||d|| on demand."""
        if rho == 0.0 or self.d_norm <= DEGENERATE_NORM_TOL:
            return np.zeros_like(self.d)
        return (rho / self.d_norm) * self.d


@dataclass
class StepReport:
    loss: float
    grad_evals: int
    epsilon: np.ndarray
    perturbed: bool


def sam_adversary(g: np.ndarray, rho: float) -> np.ndarray:
    """epsilon = rho * g/||g||, or zero when rho == 0 or g is degenerate."""
    if rho < 0:
        raise InvalidParameterError(f"rho must be >= 0, got {rho}")
    if rho == 0.0:
        return np.zeros_like(g)
    return normalize_to_sphere(g, rho)


def vasso_update(state: AdversaryState | None, g: np.ndarray, theta: float,
                 rho: float) -> tuple[AdversaryState, np.ndarray]:
    """One EMA update d <- (1-theta) d + theta g, plus the resulting adversary.

    ``state=None`` means the warm start d_{-1} := g, so the first adversary
    coincides with SAM's regardless of theta.
    """
    if not 0.0 < theta <= 1.0:
        raise InvalidParameterError(f"theta must be in (0,1], got {theta}")
    prev = g if state is None else state.d
    d = (1.0 - theta) * prev + theta * g
    new_state = AdversaryState(d=d, d_norm=norm2(d))
    return new_state, new_state.epsilon(rho)


def base_update(x: np.ndarray, g_update: np.ndarray, cfg: OptimizerConfig,
                momentum_buffer: np.ndarray | None = None, *, t: int = 0
                ) -> tuple[np.ndarray, np.ndarray]:
    """Heavy-ball update with decoupled-at-x weight decay.

    v <- momentum*v + g + wd*x ;  x <- x - eta_t*v.  Weight decay is taken at
    the unperturbed point x_t even when g came from a perturbed point.
    """
    eta = schedule_value(cfg.lr, t)
    step_dir = g_update + cfg.weight_decay * x
    if momentum_buffer is None:
        v = step_dir
    else:
        v = cfg.momentum * momentum_buffer + step_dir
    return x - eta * v, v


def _checked_loss_grad(obj, x, batch, t):
    loss, g = obj.loss_and_grad(x, batch)
    if not np.isfinite(loss) or not np.all(np.isfinite(g)):
        raise NonFiniteError("non-finite loss or gradient", t=t)
    return loss, g


def _checked_grad(obj, x, batch, t):
    g = obj.grad(x, batch)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("non-finite gradient at perturbed point", t=t)
    return g


def sgd_step(obj, x, batch, cfg: OptimizerConfig, rng, *, t: int = 0,
             momentum_buffer=None):
    """Plain base update with g_t(x_t); one gradient evaluation."""
    loss, g = _checked_loss_grad(obj, x, batch, t)
    x_new, buf = base_update(x, g, cfg, momentum_buffer, t=t)
    return x_new, StepReport(loss, 1, np.zeros_like(x), False), buf


def sam_step(obj, x, batch, cfg: OptimizerConfig, rng, *, t: int = 0,
             momentum_buffer=None):
    """Ascend to x + rho*g/||g||, update with the gradient there (same batch)."""
    loss, g = _checked_loss_grad(obj, x, batch, t)
    eps = sam_adversary(g, cfg.rho_at(t))
    g_upd = _checked_grad(obj, x + eps, batch, t)
    x_new, buf = base_update(x, g_upd, cfg, momentum_buffer, t=t)
    return x_new, StepReport(loss, 2, eps, True), buf


def vasso_step(obj, x, state: AdversaryState | None, batch, cfg: OptimizerConfig,
               rng, *, t: int = 0, momentum_buffer=None):
    """SAM with the adversary taken along the EMA slope instead of g_t."""
    loss, g = _checked_loss_grad(obj, x, batch, t)
    state, eps = vasso_update(state, g, cfg.theta, cfg.rho_at(t))
    g_upd = _checked_grad(obj, x + eps, batch, t)
    x_new, buf = base_update(x, g_upd, cfg, momentum_buffer, t=t)
    return x_new, state, StepReport(loss, 2, eps, True), buf


def evasso_step(obj, x, state: AdversaryState | None, batch, cfg: OptimizerConfig,
                rng, *, t: int = 0, momentum_buffer=None):
    """VASSO with a Bernoulli(p) gate on the second gradient evaluation.

    The EMA slope is updated every step, gated or not.  One uniform draw is
    consumed from ``rng`` per call even when p forces the outcome, so the
    p=1 / p=0 trajectories are bit-identical to VASSO / SGD respectively.
    """
    loss, g = _checked_loss_grad(obj, x, batch, t)
    state, eps = vasso_update(state, g, cfg.theta, cfg.rho_at(t))
    gate = rng.random() < cfg.p
    if gate:
        g_upd = _checked_grad(obj, x + eps, batch, t)
        report = StepReport(loss, 2, eps, True)
    else:
        g_upd = g
        report = StepReport(loss, 1, np.zeros_like(x), False)
    x_new, buf = base_update(x, g_upd, cfg, momentum_buffer, t=t)
    return x_new, state, report, buf


def samdb_step(obj, x, batch, adv_batch, cfg: OptimizerConfig, rng, *, t: int = 0,
               momentum_buffer=None):
    """SAM with the adversary computed on an independently sampled batch.

    With adv_batch == batch this is SAM exactly, bit for bit.
    """
    g_adv = _checked_grad(obj, x, adv_batch, t)
    eps = sam_adversary(g_adv, cfg.rho_at(t))
    loss = obj.loss(x, batch)
    if not np.isfinite(loss):
        raise NonFiniteError("non-finite loss", t=t)
    g_upd = _checked_grad(obj, x + eps, batch, t)
    x_new, buf = base_update(x, g_upd, cfg, momentum_buffer, t=t)
    return x_new, StepReport(loss, 2, eps, True), buf


def sfw_solve(linear_obj_grad_sampler, constraint_radius: float, T: int,
              batch_sizes, gammas, rng) -> np.ndarray:
    """Stochastic Frank-Wolfe over the sphere S_rho(0).

    ``linear_obj_grad_sampler(batch_size, rng)`` returns a stochastic
    gradient of the (linear) inner objective.  The linear maximization over
    the sphere has the closed form rho * ghat/||ghat||; the iterate is the
    convex combination x <- (1-gamma) x + gamma v starting from x_0 = 0.
    One step with gamma_0 = 1 therefore reproduces the closed-form adversary.
    """
    if T < 1:
        raise InvalidParameterError(f"T must be >= 1, got {T}")
    if len(batch_sizes) != T or len(gammas) != T:
        raise InvalidParameterError("batch_sizes and gammas must have length T")
    x = None
    for t in range(T):
        ghat = np.asarray(linear_obj_grad_sampler(batch_sizes[t], rng), dtype=np.float64)
        if x is None:
            x = np.zeros_like(ghat)
        if norm2(ghat) <= DEGENERATE_NORM_TOL:
            v = np.zeros_like(ghat)
        else:
            v = normalize_to_sphere(ghat, constraint_radius)
        gamma = gammas[t]
        x = (1.0 - gamma) * x + gamma * v
    return x
