"""Explicit third-order low-storage Runge-Kutta time integration.

Williamson 3-stage 2-register scheme; the acoustic CFL bound is recomputed
from the current state every step and the final step is clamped so the end
time is hit exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .discretization import Discretization, FieldStorage

#: Williamson low-storage coefficients (3 stages, 2 registers)
LSRK3_A = (0.0, -5.0 / 9.0, -153.0 / 128.0)
LSRK3_B = (1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0)
LSRK3_C = (0.0, 1.0 / 3.0, 3.0 / 4.0)


@dataclass
class TimeControls:
    """Step-size and duration controls for a run."""

    t_end: float
    cfl: float = 0.4
    max_steps: int = 10**9
    fixed_dt: Optional[float] = None
    finite_check_every: int = 50

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.t_end < 0.0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.fixed_dt is not None and self.fixed_dt <= 0.0:
            raise ValueError("fixed_dt must be > 0")


@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    max_abs_p: float
    max_abs_u: float


@dataclass
class RunResult:
    t_final: float
    n_steps: int
    step_log: list = field(default_factory=list)


def compute_dt(disc: Discretization, fields: FieldStorage,
               controls: TimeControls) -> float:
    """CFL-scaled acoustic step with the parabolic restriction respected.

    dt = cfl * min over nodes/directions of h_i / (N_i^2 lambda_i) with
    lambda = (|u_i| + sqrt(u_i^2 + 4 c_s^2))/2 and h_i = 2 J / |J a^i|.
    """
    if controls.fixed_dt is not None:
        return controls.fixed_dt
    bound = disc.wave_dt_bound(fields)
    dt = controls.cfl * bound
    if not np.isfinite(dt) or dt <= 0.0:
        raise RuntimeError(f"non-positive or non-finite time step {dt}")
    return dt


def lsrk3_step(disc: Discretization, fields: FieldStorage, t: float,
               dt: float):
    """Advance one step in place (q and the RK register are mutated)."""
    for a, b, c in zip(LSRK3_A, LSRK3_B, LSRK3_C):
        disc.primary_residual(fields, t + c * dt)
        kernels.lsrk_stage(fields.q, fields.rk_reg, fields.resid, a, b, dt)


def run(disc: Discretization, fields: FieldStorage, controls: TimeControls,
        callbacks: Optional[list] = None, step_log_every: int = 0) -> RunResult:
    """March to t_end (or max_steps), invoking observers along the way.

    ``callbacks`` is a list of (cadence, fn) pairs; fn(step, t, fields) runs
    every cadence steps, starting with the initial state, so sampled series
    are strictly uniform in step index.  Identical configurations produce
    identical trajectories.
    """
    callbacks = callbacks or []
    t = 0.0
    step = 0
    log = []

    def observe(step, t):
        for cadence, fn in callbacks:
            if step % cadence == 0:
                fn(step, t, fields)

    observe(0, 0.0)
    while t < controls.t_end and step < controls.max_steps:
        dt = compute_dt(disc, fields, controls)
        last = t + dt >= controls.t_end
        if last:
            dt = controls.t_end - t
        if dt <= 0.0:
            break
        lsrk3_step(disc, fields, t, dt)
        t = controls.t_end if last else t + dt
        step += 1
        if step % controls.finite_check_every == 0 or last:
            disc.check_finite(fields, t)
        if step_log_every and (step % step_log_every == 0 or last):
            log.append(StepRecord(
                step, t, dt, float(np.abs(fields.q[:, 4]).max()),
                _max_velocity(disc, fields)))
        observe(step, t)
    return RunResult(t_final=t, n_steps=step, step_log=log)


def _max_velocity(disc: Discretization, fields: FieldStorage) -> float:
    rho = disc.mixture_density(fields.q[:, 0])
    mom = np.sqrt(fields.q[:, 1]**2 + fields.q[:, 2]**2 + fields.q[:, 3]**2)
    return float((mom / np.sqrt(rho)).max())
