"""
Implicit time integrators: Crank-Nicolson, coupled implicit Euler, SDIRK2.

Every step solves its sparse system with BiCGSTAB, warm-started from the
previous time level.
"""
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import sparse

from errors import InvalidParameter, SolverError, SolverFailure
from sparse import SolveStats, bicgstab, operator_matrix

logger = structlog.get_logger()

SDIRK_GAMMA = 1.0 - np.sqrt(2.0) / 2.0

Forcing = Callable[[float], np.ndarray]
Monitor = Callable[[np.ndarray], float]


@dataclass
class TimeGrid:
    """
    Uniform steps from t0 to t_end.

    The step count is round((t_end - t0) / dt); dt is then adjusted so the
    last step lands on t_end.
    """
    t0: float
    t_end: float
    dt: float
    policy: str = "fixed"

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameter("dt must be positive", dt=self.dt)
        if not self.t_end >= self.t0:
            raise InvalidParameter("t_end must not precede t0", t0=self.t0, t_end=self.t_end)
        span = self.t_end - self.t0
        self.n_steps = max(1, int(round(span / self.dt))) if span > 0 else 0
        if self.n_steps:
            self.dt = span / self.n_steps

    @classmethod
    def fixed(cls, t_end: float, dt: float, t0: float = 0.0) -> "TimeGrid":
        return cls(t0=t0, t_end=t_end, dt=dt, policy="fixed")

    @classmethod
    def h_scaled(cls, t_end: float, h: float, factor: float = 0.1, power: float = 2.0,
                 t0: float = 0.0) -> "TimeGrid":
        """Δt = factor · h^power (0.1h² for diffusion, 0.1h for advection)."""
        return cls(t0=t0, t_end=t_end, dt=factor * h ** power, policy=f"h_scaled({factor:g}, {power:g})")

    def time(self, step: int) -> float:
        return self.t_end if step == self.n_steps else self.t0 + step * self.dt


@dataclass
class Trajectory:
    """Checkpointed states, per-step solver statistics and scalar monitors."""
    times: List[float] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)
    stats: List[SolveStats] = field(default_factory=list)
    monitors: Dict[str, List[float]] = field(default_factory=dict)
    final: Optional[np.ndarray] = None
    auxiliary: Optional[np.ndarray] = None

    def record(self, t: float, state: np.ndarray) -> None:
        self.times.append(t)
        self.states.append(state.copy())

    def monitor(self, values: Dict[str, float]) -> None:
        for key, value in values.items():
            self.monitors.setdefault(key, []).append(float(value))

    @property
    def max_iterations(self) -> int:
        return max((s.iterations for s in self.stats), default=0)


@dataclass
class LinearRhs:
    """u' = A u + N(u) + f(t); N is evaluated lagged inside implicit stages."""
    matrix: sparse.csr_matrix
    correction: Optional[Callable[[np.ndarray], np.ndarray]] = None
    forcing: Optional[Forcing] = None

    def lagged(self, u: np.ndarray, t: float) -> np.ndarray:
        extra = np.zeros_like(u)
        if self.correction is not None:
            extra = extra + self.correction(u)
        if self.forcing is not None:
            extra = extra + self.forcing(t)
        return extra

    def evaluate(self, u: np.ndarray, t: float) -> np.ndarray:
        return self.matrix @ u + self.lagged(u, t)


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 1000
    checkpoint_stride: int = 0


def _solve(matrix, rhs, guess, options: SolverOptions, step: int) -> Tuple[np.ndarray, SolveStats]:
    try:
        return bicgstab(matrix, rhs, x0=guess, tol=options.tol, max_iter=options.max_iter)
    except SolverError as exc:
        raise SolverFailure(f"step {step}: {exc}", step=step, cause=type(exc).__name__,
                            **exc.context) from exc


def _checkpoint(trajectory: Trajectory, grid: TimeGrid, step: int, state: np.ndarray,
                options: SolverOptions) -> None:
    stride = options.checkpoint_stride
    if step == grid.n_steps or (stride > 0 and step % stride == 0):
        trajectory.record(grid.time(step), state)


def _evaluate_monitors(trajectory: Trajectory, monitors: Optional[Dict[str, Monitor]], state: np.ndarray) -> None:
    if monitors:
        trajectory.monitor({name: fn(state) for name, fn in monitors.items()})


def crank_nicolson(operator, u0: np.ndarray, grid: TimeGrid, forcing: Optional[Forcing] = None,
                   options: SolverOptions = SolverOptions(),
                   monitors: Optional[Dict[str, Monitor]] = None) -> Trajectory:
    """
    (I − Δt/2 L) u^{n+1} = (I + Δt/2 L) u^n + Δt f(t^n + Δt/2).

    Raises:
        SolverFailure: with the failing step index
    """
    matrix = operator_matrix(operator)
    identity = sparse.identity(matrix.shape[0], format="csr")
    implicit = sparse.csr_matrix(identity - 0.5 * grid.dt * matrix)
    explicit = sparse.csr_matrix(identity + 0.5 * grid.dt * matrix)

    u = np.array(u0, dtype=float, copy=True)
    trajectory = Trajectory()
    trajectory.record(grid.t0, u)
    _evaluate_monitors(trajectory, monitors, u)
    start = time.time()
    for step in range(1, grid.n_steps + 1):
        rhs = explicit @ u
        if forcing is not None:
            rhs = rhs + grid.dt * forcing(grid.t0 + (step - 0.5) * grid.dt)
        u, stats = _solve(implicit, rhs, u, options, step)
        trajectory.stats.append(stats)
        _evaluate_monitors(trajectory, monitors, u)
        _checkpoint(trajectory, grid, step, u, options)

    trajectory.final = u
    logger.info("integration_finished", scheme="crank_nicolson", steps=grid.n_steps, dt=grid.dt,
                max_iterations=trajectory.max_iterations, seconds=time.time() - start)
    return trajectory


def implicit_euler_coupled(blocks: Sequence[Sequence[Optional[sparse.spmatrix]]], f0: np.ndarray,
                           mu0: np.ndarray, grid: TimeGrid,
                           explicit_rhs: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]],
                           options: SolverOptions = SolverOptions(),
                           monitors: Optional[Dict[str, Callable[[np.ndarray, np.ndarray], float]]] = None
                           ) -> Trajectory:
    """
    One coupled 2N×2N solve per step:  [[A11, A12], [A21, A22]] [f; μ]^{n+1} = explicit_rhs(f^n, μ^n).

    Checkpoints store f; the final μ is kept as `auxiliary`. The mass Σ f_i
    is always monitored.

    Raises:
        SolverFailure: with the failing step index
    """
    matrix = sparse.bmat(blocks, format="csr")
    matrix.sort_indices()
    n_points = len(f0)
    if matrix.shape != (2 * n_points, 2 * n_points):
        raise InvalidParameter("blocks must form a 2N×2N system", shape=matrix.shape, n_points=n_points)

    f = np.array(f0, dtype=float, copy=True)
    mu = np.array(mu0, dtype=float, copy=True)
    trajectory = Trajectory()
    trajectory.record(grid.t0, f)

    def observe(f_values, mu_values):
        values = {"mass": float(f_values.sum())}
        for name, fn in (monitors or {}).items():
            values[name] = fn(f_values, mu_values)
        trajectory.monitor(values)

    observe(f, mu)
    start = time.time()
    for step in range(1, grid.n_steps + 1):
        top, bottom = explicit_rhs(f, mu)
        state, stats = _solve(matrix, np.concatenate([top, bottom]), np.concatenate([f, mu]), options, step)
        f, mu = state[:n_points], state[n_points:]
        trajectory.stats.append(stats)
        observe(f, mu)
        _checkpoint(trajectory, grid, step, f, options)

    trajectory.final = f
    trajectory.auxiliary = mu
    logger.info("integration_finished", scheme="implicit_euler_coupled", steps=grid.n_steps, dt=grid.dt,
                max_iterations=trajectory.max_iterations, seconds=time.time() - start)
    return trajectory


def sdirk2(system: LinearRhs, u0: np.ndarray, grid: TimeGrid, options: SolverOptions = SolverOptions(),
           monitors: Optional[Dict[str, Monitor]] = None) -> Trajectory:
    """
    Two-stage stiffly accurate SDIRK with γ = 1 − √2/2, a21 = 1 − γ, b = (1 − γ, γ).

    Each stage solves (I − γΔt A) U = rhs; the correction and forcing of
    `system` enter lagged (at u^n in stage one, at U_1 in stage two), which
    is exact for linear problems.

    Raises:
        SolverFailure: with the failing step index
    """
    gamma, dt = SDIRK_GAMMA, grid.dt
    matrix = sparse.csr_matrix(system.matrix)
    identity = sparse.identity(matrix.shape[0], format="csr")
    implicit = sparse.csr_matrix(identity - gamma * dt * matrix)

    u = np.array(u0, dtype=float, copy=True)
    trajectory = Trajectory()
    trajectory.record(grid.t0, u)
    _evaluate_monitors(trajectory, monitors, u)
    start = time.time()
    for step in range(1, grid.n_steps + 1):
        t = grid.t0 + (step - 1) * dt
        stage_one_rhs = u + gamma * dt * system.lagged(u, t + gamma * dt)
        stage_one, stats_one = _solve(implicit, stage_one_rhs, u, options, step)
        slope_one = system.evaluate(stage_one, t + gamma * dt)
        stage_two_rhs = u + (1.0 - gamma) * dt * slope_one + gamma * dt * system.lagged(stage_one, t + dt)
        u, stats_two = _solve(implicit, stage_two_rhs, stage_one, options, step)
        trajectory.stats.append(SolveStats(iterations=stats_one.iterations + stats_two.iterations,
                                           residual=max(stats_one.residual, stats_two.residual),
                                           converged=stats_one.converged and stats_two.converged,
                                           restarts=stats_one.restarts + stats_two.restarts))
        _evaluate_monitors(trajectory, monitors, u)
        _checkpoint(trajectory, grid, step, u, options)

    trajectory.final = u
    logger.info("integration_finished", scheme="sdirk2", steps=grid.n_steps, dt=grid.dt,
                max_iterations=trajectory.max_iterations, seconds=time.time() - start)
    return trajectory


def sdirk2_stability(z: complex) -> complex:
    """R(z) = (1 + (1 − 2γ) z) / (1 − γ z)²."""
    return (1.0 + (1.0 - 2.0 * SDIRK_GAMMA) * z) / (1.0 - SDIRK_GAMMA * z) ** 2
