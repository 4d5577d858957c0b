"""Explicit Dormand-Prince 5(4) integration with dense output.

Steps are chosen by the error controller alone and never clipped to the
output grid (only to the final time), so a grid and any refinement of it
sharing the same end point produce bit-identical values at shared points.
Grid values come from the 4th-order continuous extension of Hairer,
Norsett & Wanner's DOPRI5 code, together with its PI step-size controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dsl import RhsDomainError, SystemSpec, compile_rhs

__all__ = ["StepFailure", "SolveRequest", "Trajectory", "solve", "solve_to_matrix"]

DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-8
DEFAULT_MAX_STEPS = 100_000

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# 5th minus 4th order weights
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# continuous extension
D1, D3, D4, D5, D6, D7 = (
    -12715105075 / 11282082432,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

SAFETY = 0.9
FAC_MIN = 0.2  # largest shrink per step is 1/FAC_MIN
FAC_MAX = 10.0
BETA = 0.04  # PI stabilisation
EXPO1 = 0.2 - BETA * 0.75
UROUND = 2.220446049250313e-16


class StepFailure(RuntimeError):
    """The integrator could not advance the solution.

    Attributes:
        time: Integration time at which the failure happened.
        reason: One of ``"step_underflow"``, ``"max_steps"``,
            ``"domain_error"`` or ``"non_finite"``.
    """

    def __init__(self, time: float, reason: str, detail: str = ""):
        self.time = time
        self.reason = reason
        self.detail = detail
        msg = f"integration failed at t={time!r}: {reason}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


@dataclass(frozen=True)
class SolveRequest:
    spec: SystemSpec
    constants: tuple[float, ...]
    initial: tuple[float, ...]
    grid: tuple[float, ...]
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        object.__setattr__(self, "constants", tuple(float(v) for v in self.constants))
        object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if len(self.initial) != self.spec.channels:
            raise ValueError(
                f"initial state has length {len(self.initial)}, expected {self.spec.channels}"
            )
        if len(self.constants) != len(self.spec.constants):
            raise ValueError(
                f"got {len(self.constants)} constants, expected {len(self.spec.constants)}"
            )
        if not self.grid:
            raise ValueError("grid is empty")
        if not all(math.isfinite(t) for t in self.grid) or self.grid[0] < 0:
            raise ValueError("grid times must be finite and non-negative")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Solution values on a grid; ``values[m, c]`` is channel c at ``grid[m]``."""

    grid: np.ndarray
    values: np.ndarray
    n_steps: int = field(default=0, compare=False)
    n_rejected: int = field(default=0, compare=False)

    @property
    def channel_min(self) -> np.ndarray:
        return self.values.min(axis=0)

    @property
    def channel_max(self) -> np.ndarray:
        return self.values.max(axis=0)


def _norm(err: list, y0: list, y1: list, atol: float, rtol: float) -> float:
    total = 0.0
    for e, a, b in zip(err, y0, y1):
        sk = atol + rtol * max(abs(a), abs(b))
        total += (e / sk) ** 2
    return math.sqrt(total / len(err))


def _initial_step(f, t0, y0, f0, a, t_end, rtol, atol) -> float:
    # Hairer's HINIT for a 5th order method
    dnf = dny = 0.0
    for yi, fi in zip(y0, f0):
        sk = atol + rtol * abs(yi)
        dnf += (fi / sk) ** 2
        dny += (yi / sk) ** 2
    n = len(y0)
    dnf, dny = math.sqrt(dnf / n), math.sqrt(dny / n)
    h = 1e-6 if (dnf <= 1e-10 or dny <= 1e-10) else 0.01 * dny / dnf
    h = min(h, t_end - t0)
    y1 = [yi + h * fi for yi, fi in zip(y0, f0)]
    f1 = f(t0 + h, y1, a)
    der2 = 0.0
    for yi, fi, gi in zip(y0, f0, f1):
        sk = atol + rtol * abs(yi)
        der2 += ((gi - fi) / sk) ** 2
    der2 = math.sqrt(der2 / n) / h
    der12 = max(abs(der2), dnf)
    if der12 <= 1e-15:
        h1 = max(1e-6, abs(h) * 1e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    return min(100 * h, h1, t_end - t0)


def solve(req: SolveRequest) -> Trajectory:
    """Integrate ``req.spec`` from t=0 and report values at ``req.grid``.

    Raises:
        StepFailure: on step-size underflow, exhausting ``max_steps``, an
            rhs domain error or a non-finite state.
    """
    f = compile_rhs(req.spec)
    a = list(req.constants)
    y = list(req.initial)
    grid = req.grid
    M, C = len(grid), req.spec.channels
    out = np.empty((M, C))
    rtol, atol = req.rtol, req.atol
    t = 0.0
    t_end = grid[-1]

    if not all(math.isfinite(v) for v in y):
        raise StepFailure(t, "non_finite", "initial state is not finite")

    gi = 0
    while gi < M and grid[gi] <= 0.0:
        out[gi] = y
        gi += 1
    if gi == M:
        return Trajectory(np.asarray(grid), out)

    try:
        k1 = f(t, y, a)
    except RhsDomainError as exc:
        raise StepFailure(t, "domain_error", str(exc)) from None

    try:
        h = _initial_step(f, t, y, k1, a, t_end, rtol, atol)
    except RhsDomainError:
        h = 1e-6 * max(t_end, 1e-6)

    facold = 1e-4
    n_steps = n_rejected = 0
    last_rejected = False

    while gi < M:
        if n_steps + n_rejected >= req.max_steps:
            raise StepFailure(t, "max_steps", f"{req.max_steps} steps exhausted")
        if 0.1 * abs(h) <= abs(t) * UROUND or h <= 0.0:
            raise StepFailure(t, "step_underflow", f"h={h!r}")
        if 1.01 * h >= t_end - t:
            h = t_end - t
            last = True
        else:
            last = False

        try:
            y2 = [yi + h * A21 * p1 for yi, p1 in zip(y, k1)]
            k2 = f(t + C2 * h, y2, a)
            y3 = [yi + h * (A31 * p1 + A32 * p2) for yi, p1, p2 in zip(y, k1, k2)]
            k3 = f(t + C3 * h, y3, a)
            y4 = [
                yi + h * (A41 * p1 + A42 * p2 + A43 * p3)
                for yi, p1, p2, p3 in zip(y, k1, k2, k3)
            ]
            k4 = f(t + C4 * h, y4, a)
            y5 = [
                yi + h * (A51 * p1 + A52 * p2 + A53 * p3 + A54 * p4)
                for yi, p1, p2, p3, p4 in zip(y, k1, k2, k3, k4)
            ]
            k5 = f(t + C5 * h, y5, a)
            y6 = [
                yi + h * (A61 * p1 + A62 * p2 + A63 * p3 + A64 * p4 + A65 * p5)
                for yi, p1, p2, p3, p4, p5 in zip(y, k1, k2, k3, k4, k5)
            ]
            t_new = t_end if last else t + h
            k6 = f(t_new, y6, a)
            y_new = [
                yi + h * (A71 * p1 + A73 * p3 + A74 * p4 + A75 * p5 + A76 * p6)
                for yi, p1, p3, p4, p5, p6 in zip(y, k1, k3, k4, k5, k6)
            ]
            k7 = f(t_new, y_new, a)
        except RhsDomainError as exc:
            reason = "non_finite" if "non-finite" in exc.reason else "domain_error"
            raise StepFailure(t, reason, str(exc)) from None

        err_vec = [
            h * (E1 * p1 + E3 * p3 + E4 * p4 + E5 * p5 + E6 * p6 + E7 * p7)
            for p1, p3, p4, p5, p6, p7 in zip(k1, k3, k4, k5, k6, k7)
        ]
        err = _norm(err_vec, y, y_new, atol, rtol)
        if not math.isfinite(err):
            raise StepFailure(t, "non_finite", "error estimate is not finite")

        fac11 = err**EXPO1
        fac = fac11 / facold**BETA
        fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFETY))
        h_new = h / fac

        if err <= 1.0:
            n_steps += 1
            facold = max(err, 1e-4)
            # emit grid points inside (t, t_new]
            if gi < M and grid[gi] <= t_new:
                ydiff = [b - a_ for a_, b in zip(y, y_new)]
                bspl = [h * p1 - d for p1, d in zip(k1, ydiff)]
                r4 = [d - h * p7 - b for d, p7, b in zip(ydiff, k7, bspl)]
                r5 = [
                    h * (D1 * p1 + D3 * p3 + D4 * p4 + D5 * p5 + D6 * p6 + D7 * p7)
                    for p1, p3, p4, p5, p6, p7 in zip(k1, k3, k4, k5, k6, k7)
                ]
                while gi < M and grid[gi] <= t_new:
                    tg = grid[gi]
                    if tg == t_new:
                        out[gi] = y_new
                    else:
                        th = (tg - t) / h
                        th1 = 1.0 - th
                        out[gi] = [
                            y0_ + th * (d + th1 * (b + th * (c4 + th1 * c5)))
                            for y0_, d, b, c4, c5 in zip(y, ydiff, bspl, r4, r5)
                        ]
                    gi += 1
            t = t_new
            y = y_new
            k1 = k7
            if last_rejected:
                h_new = min(h_new, h)
            last_rejected = False
            h = h_new
        else:
            n_rejected += 1
            h = h / min(1.0 / FAC_MIN, fac11 / SAFETY)
            last_rejected = True

    if not np.isfinite(out).all():
        raise StepFailure(t, "non_finite", "non-finite value on the output grid")
    return Trajectory(np.asarray(grid), out, n_steps, n_rejected)


def solve_to_matrix(
    spec: SystemSpec,
    constants: Sequence[float],
    initial: Sequence[float],
    duration: float,
    steps: int,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Trajectory:
    """Solve on the regular grid ``t_m = m * duration / (steps - 1)``."""
    if steps < 2:
        raise ValueError(f"steps must be at least 2, got {steps}")
    if not (duration > 0 and math.isfinite(duration)):
        raise ValueError(f"duration must be positive and finite, got {duration}")
    grid = tuple(m * duration / (steps - 1) for m in range(steps))
    req = SolveRequest(spec, tuple(constants), tuple(initial), grid, rtol, atol, max_steps)
    return solve(req)
