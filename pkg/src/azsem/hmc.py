"""Hamiltonian Monte Carlo with dual-averaging step size adaptation.

Plain leapfrog HMC with a jittered number of steps (uniform on 1..L), a
diagonal mass matrix adapted over expanding warm-up windows, and
dual-averaging step-size tuning toward a target acceptance rate. The engine
works on any differentiable log density ``logp_grad(q) -> (float, grad)``;
model binding happens elsewhere.

A transition whose energy error exceeds ``max_energy_error`` (or whose
trajectory hits a non-finite density) counts as divergent and is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    def __init__(self, eps0: float, target: float = 0.8,
                 gamma: float = 0.05, t0: float = 10.0, kappa: float = 0.75):
        self.mu = np.log(10.0 * eps0)
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.log_eps = np.log(eps0)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.count = 0

    def update(self, accept_prob: float) -> float:
        self.count += 1
        m = self.count
        eta = 1.0 / (m + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob)
        self.log_eps = self.mu - np.sqrt(m) / self.gamma * self.h_bar
        w = m ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return float(np.exp(self.log_eps))

    def adapted(self) -> float:
        return float(np.exp(self.log_eps_bar)) if self.count else float(np.exp(self.log_eps))

    def restart(self, eps0: float) -> None:
        self.mu = np.log(10.0 * eps0)
        self.log_eps = np.log(eps0)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.count = 0


class _Welford:
    """Running mean/variance of warm-up draws for mass adaptation."""

    def __init__(self, dim: int):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def push(self, x: np.ndarray) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def variance(self) -> np.ndarray:
        return self.m2 / (self.n - 1)


def regularized_variance(w: _Welford) -> np.ndarray:
    """Shrink the sample variance toward a small constant, Stan style."""
    n = w.n
    return (n / (n + 5.0)) * w.variance() + 1.0e-3 * (5.0 / (n + 5.0))


@dataclass(frozen=True)
class WarmupSchedule:
    """Three phases: step-size settling, expanding mass windows, freeze."""

    init_buffer: int
    term_buffer: int
    window_ends: tuple[int, ...]  # iteration indices where the mass resets

    @classmethod
    def build(cls, warmup: int, init_buffer: int = 75, base_window: int = 25,
              term_buffer: int = 50) -> "WarmupSchedule":
        if warmup <= 0:
            return cls(0, 0, ())
        if init_buffer + base_window + term_buffer > warmup:
            # compress the phases proportionally for short warm-ups
            init_buffer = max(1, int(round(0.15 * warmup)))
            term_buffer = max(1, int(round(0.10 * warmup)))
            base_window = max(1, warmup - init_buffer - term_buffer)
        ends = []
        start = init_buffer
        size = base_window
        while start < warmup - term_buffer:
            end = start + size
            # absorb a final stub window into the last full one
            if end + 2 * size > warmup - term_buffer:
                end = warmup - term_buffer
            ends.append(min(end, warmup - term_buffer))
            start = end
            size *= 2
        return cls(init_buffer, term_buffer, tuple(ends))


@dataclass
class ChainResult:
    samples: np.ndarray       # (n_samples, dim), post warm-up
    logp: np.ndarray          # (n_samples,)
    accept_stat: np.ndarray   # (n_samples,)
    divergences: int          # post warm-up
    warmup_divergences: int
    step_size: float
    inv_mass: np.ndarray


def _kinetic(p: np.ndarray, inv_mass: np.ndarray) -> float:
    return 0.5 * float(np.sum(inv_mass * p * p))


def find_initial_step(logp_grad, q: np.ndarray, inv_mass: np.ndarray,
                      rng: np.random.Generator, eps: float = 1.0) -> float:
    """Double/halve the step size until one leapfrog step has accept prob ~0.5."""
    lp0, g0 = logp_grad(q)
    if not np.isfinite(lp0):
        raise ValueError("initial point has non-finite density")
    p0 = rng.standard_normal(q.size) / np.sqrt(inv_mass)
    h0 = -lp0 + _kinetic(p0, inv_mass)

    def attempt(e: float) -> float:
        p = p0 + 0.5 * e * g0
        q1 = q + e * inv_mass * p
        lp1, g1 = logp_grad(q1)
        if not np.isfinite(lp1):
            return 0.0
        p = p + 0.5 * e * g1
        h1 = -lp1 + _kinetic(p, inv_mass)
        return float(np.exp(min(0.0, h0 - h1)))

    a = attempt(eps)
    direction = 1.0 if a > 0.5 else -1.0
    for _ in range(64):
        if direction > 0 and a <= 0.5:
            break
        if direction < 0 and a >= 0.5:
            break
        eps *= 2.0**direction
        if not 1.0e-10 < eps < 1.0e7:
            break
        a = attempt(eps)
    return eps


def hmc_transition(logp_grad, q: np.ndarray, lp: float, grad: np.ndarray,
                   eps: float, n_steps: int, inv_mass: np.ndarray,
                   rng: np.random.Generator, max_energy_error: float = 1000.0):
    """One accept/reject HMC transition; returns the new state and statistics.

    Returns (q, lp, grad, accept_stat, divergent, accepted).
    """
    p = rng.standard_normal(q.size) / np.sqrt(inv_mass)
    h0 = -lp + _kinetic(p, inv_mass)
    qn, lpn, gn = q, lp, grad
    p = p + 0.5 * eps * gn
    divergent = False
    for step in range(n_steps):
        qn = qn + eps * inv_mass * p
        lpn, gn = logp_grad(qn)
        if not np.isfinite(lpn):
            divergent = True
            break
        if step < n_steps - 1:
            p = p + eps * gn
    if not divergent:
        p = p + 0.5 * eps * gn
        h1 = -lpn + _kinetic(p, inv_mass)
        delta = h0 - h1
        if not np.isfinite(delta) or -delta > max_energy_error:
            divergent = True
    if divergent:
        return q, lp, grad, 0.0, True, False
    accept_stat = float(np.exp(min(0.0, delta)))
    if np.log(rng.random()) < delta:
        return qn, lpn, gn, accept_stat, False, True
    return q, lp, grad, accept_stat, False, False


def run_chain(logp_grad, q0: np.ndarray, n_warmup: int, n_samples: int,
              rng: np.random.Generator, *, leapfrog_steps: int = 32,
              target_accept: float = 0.8, max_energy_error: float = 1000.0,
              step_size: float | None = None, adapt_step: bool = True,
              adapt_mass: bool = True, init_buffer: int = 75,
              base_window: int = 25, term_buffer: int = 50) -> ChainResult:
    """Run one HMC chain: ``n_warmup`` adaptation iterations, then sampling."""
    dim = q0.size
    inv_mass = np.ones(dim)
    lp, grad = logp_grad(q0)
    if not np.isfinite(lp):
        raise ValueError("initial point has non-finite density")

    eps = step_size if step_size is not None else find_initial_step(logp_grad, q0, inv_mass, rng)
    da = DualAveraging(eps, target=target_accept)
    schedule = WarmupSchedule.build(n_warmup, init_buffer, base_window, term_buffer)
    welford = _Welford(dim)
    window_iter = iter(schedule.window_ends)
    next_end = next(window_iter, None)

    q = q0.astype(float).copy()
    warmup_div = 0
    for m in range(n_warmup):
        L = int(rng.integers(1, leapfrog_steps + 1))
        q, lp, grad, astat, div, _ = hmc_transition(
            logp_grad, q, lp, grad, eps, L, inv_mass, rng, max_energy_error
        )
        warmup_div += int(div)
        if adapt_step:
            eps = da.update(astat)
        in_mass_phase = schedule.init_buffer <= m < n_warmup - schedule.term_buffer
        if adapt_mass and in_mass_phase:
            welford.push(q)
            if next_end is not None and m + 1 == next_end:
                if welford.n >= 2:
                    inv_mass = regularized_variance(welford)
                welford = _Welford(dim)
                next_end = next(window_iter, None)
                if adapt_step:
                    # re-settle the step size on the new metric
                    eps = da.adapted()
                    da.restart(eps)
    if adapt_step and n_warmup > 0:
        eps = da.adapted()

    samples = np.empty((n_samples, dim))
    logps = np.empty(n_samples)
    astats = np.empty(n_samples)
    divergences = 0
    for s in range(n_samples):
        L = int(rng.integers(1, leapfrog_steps + 1))
        q, lp, grad, astat, div, _ = hmc_transition(
            logp_grad, q, lp, grad, eps, L, inv_mass, rng, max_energy_error
        )
        divergences += int(div)
        samples[s] = q
        logps[s] = lp
        astats[s] = astat
    return ChainResult(
        samples=samples, logp=logps, accept_stat=astats,
        divergences=divergences, warmup_divergences=warmup_div,
        step_size=float(eps), inv_mass=inv_mass,
    )
