"""Inconsistent SGD: plain/momentum/Nesterov updates plus loss-driven batch acceleration.

Every main-loop iteration measures the loss of the current fixed-cycle
batch, pushes it into an :class:`~isgd.spc.SpcWindow` and applies the
configured update.  When the measured loss sits above the window's upper
control limit, the same batch gets up to ``stop`` extra gradient steps on

    phi(w) = 0.5 * (psi(w) - limit)**2 + eps / (2 * n_w) * ||w - w_entry||**2

where ``w_entry`` is the weight vector when acceleration started.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import nn
from .data import Dataset, FcprSampler, permute_dataset
from .errors import DivergenceError
from .parallel import ParallelEvaluator
from .spc import SpcWindow

log = logging.getLogger(__name__)

VARIANTS = ("plain", "momentum", "nesterov")

# average-loss tiers (threshold, lr), highest threshold first
ALEXNET_SCHEDULE: tuple[tuple[float, float], ...] = ((2.0, 0.015), (1.2, 0.0015), (0.0, 0.00015))


@dataclass(frozen=True)
class OptimizerConfig:
    base_lr: float = 0.01
    subproblem_lr: float | None = None  # None: use the lr in force when acceleration starts
    momentum: float = 0.0
    weight_decay: float | None = None  # None: keep the network's own value
    epsilon: float = 0.1
    stop: int = 5
    sigma_k: float = 3.0
    variant: str = "plain"
    lr_schedule: tuple[tuple[float, float], ...] = ()
    inconsistent: bool = True

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ValueError("base_lr must be positive")
        if self.subproblem_lr is not None and not self.subproblem_lr > 0:
            raise ValueError("subproblem_lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay is not None and not self.weight_decay >= 0:
            raise ValueError("weight_decay must be nonnegative")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.stop < 0:
            raise ValueError("stop must be nonnegative")
        if not self.sigma_k > 0:
            raise ValueError("sigma_k must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        sched = tuple((float(a), float(b)) for a, b in self.lr_schedule)
        object.__setattr__(self, "lr_schedule", sched)
        th = [a for a, _ in sched]
        if any(x <= y for x, y in zip(th, th[1:])):
            raise ValueError("schedule thresholds must be strictly decreasing")
        if any(not lr > 0 for _, lr in sched):
            raise ValueError("schedule learning rates must be positive")


def lr_from_schedule(avg_loss: float, schedule: Sequence[tuple[float, float]]) -> float:
    """Learning rate of the first tier whose threshold ``avg_loss`` reaches.

    The last tier catches everything below it.
    """
    if not schedule:
        raise ValueError("empty schedule")
    for threshold, lr in schedule:
        if avg_loss >= threshold:
            return lr
    return schedule[-1][1]


def _finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite {what}")
    return x


def sgd_step(w: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if w.shape != grad.shape:
        raise ValueError("weight and gradient shapes differ")
    return _finite(w - lr * grad, "weights after SGD step")


def momentum_step(w, v, grad, lr, mu):
    """Heavy-ball update; returns ``(w', v')``."""
    if not (w.shape == v.shape == grad.shape):
        raise ValueError("weight, velocity and gradient shapes differ")
    v = mu * v - lr * grad
    return _finite(w + v, "weights after momentum step"), v


def nesterov_lookahead(w, v, mu):
    """Point where the Nesterov gradient must be evaluated."""
    return w + mu * v


def nesterov_step(w, v, grad_at_lookahead, lr, mu):
    """Nesterov update given the gradient at :func:`nesterov_lookahead`."""
    return momentum_step(w, v, grad_at_lookahead, lr, mu)


def subproblem_objective(loss, w, w_prev, limit, epsilon):
    d = w - w_prev
    return 0.5 * (loss - limit) ** 2 + epsilon / (2 * w.size) * float(np.dot(d, d))


def subproblem_gradient(w, w_prev, loss, grad, limit, epsilon, n_w=None):
    if not (w.shape == w_prev.shape == grad.shape):
        raise ValueError("shapes differ")
    if not math.isfinite(limit):
        raise ValueError("limit must be finite")
    n_w = w.size if n_w is None else n_w
    return _finite((loss - limit) * grad + (epsilon / n_w) * (w - w_prev), "subproblem gradient")


@dataclass
class AccelerationResult:
    w: np.ndarray
    iterations: int
    loss: float  # last loss measured inside the loop (the entry loss if none)


def accelerate_batch(w: np.ndarray, batch, entry_loss: float, limit: float,
                     evaluate: Callable, stop: int, lr: float, epsilon: float) -> AccelerationResult:
    """Early-stopped gradient descent on the conservative subproblem.

    ``evaluate(w, batch)`` returns a :class:`~isgd.nn.LossAndGrad`; each call
    is one forward-backward pass.  The loop runs while fewer than ``stop``
    passes were made and the last measured loss exceeds ``limit``; a pass
    that finds the loss already at or under the limit ends the loop without
    a step, since stepping there would push the loss back up.
    """
    w_prev = w.copy()
    loss = entry_loss
    it = 0
    while it < stop and loss > limit:
        res = evaluate(w, batch)
        it += 1
        loss = res.loss
        if loss <= limit:
            break
        w = w - lr * subproblem_gradient(w, w_prev, loss, res.grad, limit, epsilon)
    return AccelerationResult(w, it, loss)


@dataclass
class IterationRecord:
    iteration: int
    epoch: int
    batch: int
    loss: float
    avg_loss: float
    sigma: float
    limit: float | None  # None until a full epoch of losses is in the window
    undertrained: bool
    sub_iters: int
    passes: int
    lr: float
    train_error: float | None = None
    test_accuracy: float | None = None


@dataclass
class SubproblemLog:
    iteration: int
    batch: int
    entry_loss: float
    limit: float
    iterations: int
    final_loss: float


@dataclass
class TrainingReport:
    records: list[IterationRecord] = field(default_factory=list)
    subproblems: list[SubproblemLog] = field(default_factory=list)
    evaluations: list[tuple[int, float, float]] = field(default_factory=list)
    weights: np.ndarray | None = None
    trajectory: list[np.ndarray] | None = None
    n_batches: int = 0
    total_passes: int = 0
    diverged: str | None = None

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    @property
    def sigma_trace(self) -> np.ndarray:
        return np.array([r.sigma for r in self.records])

    @property
    def avg_loss_trace(self) -> np.ndarray:
        return np.array([r.avg_loss for r in self.records])

    @property
    def passes_trace(self) -> np.ndarray:
        return np.array([r.passes for r in self.records])

    def epoch_losses(self) -> np.ndarray:
        """Main-loop batch losses as an ``(epochs, n_batches)`` array."""
        full = len(self.records) // self.n_batches
        return self.losses[:full * self.n_batches].reshape(full, self.n_batches)

    @property
    def main_iterations(self) -> int:
        return len(self.records)

    @property
    def subproblem_passes(self) -> int:
        return sum(s.iterations for s in self.subproblems)


@dataclass
class TrainerState:
    w: np.ndarray
    v: np.ndarray
    window: SpcWindow
    iteration: int = 0
    passes: int = 0


def train(ds: Dataset, spec: nn.NetworkSpec, cfg: OptimizerConfig, epochs: int,
          batch_size: int, *, workers: int = 1, seed: int = 0, shuffle: bool = True,
          test: Dataset | None = None, eval_every: int = 0,
          keep_trajectory: bool = False) -> TrainingReport:
    """Run ISGD (or plain SGD when ``cfg.inconsistent`` is false).

    ``seed`` fixes both the initial weights and the dataset permutation, so
    two runs that differ only in ``cfg`` see identical batches.  With
    ``eval_every > 0`` the full training set (and ``test``, if given) is
    scored each time the pass count crosses a multiple of ``eval_every``.

    Raises :class:`DivergenceError` with ``.report`` holding the partial run.
    """
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    if cfg.weight_decay is not None:
        spec = replace(spec, weight_decay=cfg.weight_decay)
    if ds.dim != spec.n_inputs:
        raise ValueError(f"dataset dim {ds.dim} does not match network input {spec.n_inputs}")
    if ds.n_classes > spec.n_classes:
        raise ValueError("network has fewer outputs than the dataset has classes")

    data = permute_dataset(ds, seed) if shuffle else ds
    sampler = FcprSampler(data, batch_size)
    n = len(sampler)
    state = TrainerState(w=nn.init_network(spec, seed), v=None, window=SpcWindow(n, cfg.sigma_k))
    state.v = np.zeros_like(state.w)
    report = TrainingReport(n_batches=n, trajectory=[] if keep_trajectory else None)
    mu = cfg.momentum
    next_eval = eval_every if eval_every > 0 else None

    with ParallelEvaluator(spec, workers) as evaluate:
        try:
            for j in range(epochs * n):
                batch = sampler[j]
                point = state.w
                if cfg.variant == "nesterov":
                    point = nesterov_lookahead(state.w, state.v, mu)
                res = evaluate(point, batch)
                state.passes += 1

                wnd = state.window
                # judged against the previous epoch's losses, then enqueued
                flagged = wnd.is_undertrained(res.loss)
                limit = wnd.limit if wnd.warm else None
                wnd.push(res.loss)
                lr = lr_from_schedule(wnd.mean, cfg.lr_schedule) if cfg.lr_schedule else cfg.base_lr

                if cfg.variant == "plain":
                    state.w = sgd_step(state.w, res.grad, lr)
                else:
                    state.w, state.v = momentum_step(state.w, state.v, res.grad, lr, mu)

                sub_iters = 0
                if flagged and cfg.inconsistent:
                    zeta = cfg.subproblem_lr if cfg.subproblem_lr is not None else lr
                    acc = accelerate_batch(state.w, batch, res.loss, limit, evaluate,
                                           cfg.stop, zeta, cfg.epsilon)
                    state.w = acc.w
                    sub_iters = acc.iterations
                    state.passes += sub_iters
                    report.subproblems.append(SubproblemLog(
                        j, batch.index, res.loss, limit, sub_iters, acc.loss))

                rec = IterationRecord(
                    iteration=j, epoch=j // n, batch=batch.index, loss=res.loss,
                    avg_loss=wnd.mean, sigma=wnd.std, limit=limit, undertrained=flagged,
                    sub_iters=sub_iters, passes=state.passes, lr=lr)
                if next_eval is not None and state.passes >= next_eval:
                    _, train_acc = nn.evaluate(state.w, ds.features, ds.labels, spec)
                    rec.train_error = 1.0 - train_acc
                    if test is not None:
                        _, rec.test_accuracy = nn.evaluate(state.w, test.features, test.labels, spec)
                    report.evaluations.append((state.passes, rec.train_error, rec.test_accuracy))
                    while next_eval <= state.passes:
                        next_eval += eval_every
                report.records.append(rec)
                if keep_trajectory:
                    report.trajectory.append(state.w.copy())
                state.iteration = j + 1
                if j % max(n, 1) == n - 1:
                    log.debug("epoch %d: avg loss %.5f sigma %.5f passes %d",
                              j // n, wnd.mean, wnd.std, state.passes)
        except DivergenceError as exc:
            report.diverged = f"iteration {state.iteration}: {exc}"
            report.weights = state.w
            report.total_passes = state.passes
            exc.report = report
            raise

    report.weights = state.w
    report.total_passes = state.passes
    return report


def passes_to_reach(report: TrainingReport, target: float) -> int | None:
    """First cumulative pass count at which the running average loss is at or
    below ``target`` (only counted once the window covers a full epoch)."""
    for r in report.records:
        if r.iteration >= report.n_batches - 1 and r.avg_loss <= target:
            return r.passes
    return None
