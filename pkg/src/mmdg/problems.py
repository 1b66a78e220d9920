"""Benchmark problems ``u_t = eps u_xx - f(u, u_x)`` with Dirichlet data.

All callables are vectorised over numpy arrays. Problems with a known
traveling-wave solution take their boundary and initial data from it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ProblemSpec",
    "ProblemError",
    "burgers",
    "burgers_fisher",
    "schlogl",
    "get_problem",
    "PROBLEMS",
    "check_derivatives",
    "check_potential",
    "check_exact",
    "exact_residual",
]


class ProblemError(ValueError):
    pass


def _zero(t):
    return 0.0


@dataclass(frozen=True)
class ProblemSpec:
    """A semi-linear problem on ``[x_left, x_right] x (t0, tf]``.

    ``u_left``/``u_right`` are functions of time. ``exact(x, t)`` and the
    potential ``F(u)`` (with ``F' = f`` for ``u_x``-free ``f``) are optional.
    """

    name: str
    epsilon: float
    f: Callable
    df_du: Callable
    df_dux: Callable
    u0: Callable
    x_left: float = 0.0
    x_right: float = 1.0
    t0: float = 0.0
    tf: float = 1.0
    u_left: Callable = _zero
    u_right: Callable = _zero
    exact: Optional[Callable] = None
    potential: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ProblemError("diffusion coefficient must be positive")
        if not self.x_left < self.x_right:
            raise ProblemError("empty domain")


def check_derivatives(problem: ProblemSpec, n_samples=50, delta=1e-6, seed=0):
    """Largest forward-difference mismatch of ``df_du`` and ``df_dux``.

    Returned relative to ``1 + |f|`` so that stiff problems (1/delta scale)
    are comparable; the mismatch is O(delta) when the derivatives are right.
    """
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 1.5, n_samples)
    p = rng.uniform(-2.0, 2.0, n_samples)
    f0 = problem.f(u, p)
    scale = 1.0 + np.max(np.abs(f0))
    fd_u = (problem.f(u + delta, p) - f0) / delta
    fd_p = (problem.f(u, p + delta) - f0) / delta
    err_u = np.max(np.abs(fd_u - problem.df_du(u, p)))
    err_p = np.max(np.abs(fd_p - problem.df_dux(u, p)))
    return max(err_u, err_p) / scale


def check_potential(problem: ProblemSpec, n_samples=50, delta=1e-6, seed=0):
    """Largest central-difference mismatch of ``F'`` against ``f``, relative."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 1.5, n_samples)
    F = problem.potential
    fd = (F(u + delta) - F(u - delta)) / (2 * delta)
    f = problem.f(u, np.zeros_like(u))
    return np.max(np.abs(fd - f)) / (1.0 + np.max(np.abs(f)))


def exact_residual(problem: ProblemSpec, x, t, step=1e-4):
    """``u_t - eps u_xx + f(u, u_x)`` of the exact solution, by 4th-order
    central differences. Vectorised over x and t."""
    u = problem.exact
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    s = step

    def d1(g, a):
        return (-g(a + 2 * s) + 8 * g(a + s) - 8 * g(a - s) + g(a - 2 * s)) / (12 * s)

    def d2(g, a):
        return (
            -g(a + 2 * s) + 16 * g(a + s) - 30 * g(a) + 16 * g(a - s) - g(a - 2 * s)
        ) / (12 * s * s)

    ut = d1(lambda tt: u(x, tt), t)
    ux = d1(lambda xx: u(xx, t), x)
    uxx = d2(lambda xx: u(xx, t), x)
    return ut - problem.epsilon * uxx + problem.f(u(x, t), ux)


def check_exact(problem: ProblemSpec, n_samples=64, seed=0, step=1e-4):
    """Largest exact-solution PDE residual relative to ``1 + max|u_t|``.

    Half the samples are uniform in space-time, half cluster around the
    traveling front ``x = speed * t`` where the residual is not trivially 0.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(problem.t0, problem.tf, n_samples)
    x = rng.uniform(problem.x_left, problem.x_right, n_samples)
    speed = problem.params.get("speed")
    if speed is not None:
        half = n_samples // 2
        x[:half] = speed * t[:half] + rng.normal(0.0, 0.01, half)
    margin = 4 * step
    x = np.clip(x, problem.x_left + margin, problem.x_right - margin)
    r = exact_residual(problem, x, t, step)
    ut = (problem.exact(x, t + step) - problem.exact(x, t - step)) / (2 * step)
    return float(np.max(np.abs(r)) / (1.0 + np.max(np.abs(ut))))


def burgers(epsilon=1e-4) -> ProblemSpec:
    """Viscous Burgers' equation, ``f = u u_x``, homogeneous Dirichlet."""

    def u0(x):
        return np.sin(2 * np.pi * x) + 0.5 * np.sin(np.pi * x)

    return ProblemSpec(
        name="burgers",
        epsilon=epsilon,
        f=lambda u, ux: u * ux,
        df_du=lambda u, ux: ux,
        df_dux=lambda u, ux: u,
        u0=u0,
        x_left=0.0,
        x_right=1.0,
        t0=0.0,
        tf=1.0,
        params={"epsilon": epsilon},
    )


def burgers_fisher(alpha=24.0, speed=8.0) -> ProblemSpec:
    """Burgers'-Fisher equation on [-1, 0] x (-0.2, 0].

    ``f = alpha u u_x + beta u (u - 1)`` with ``beta = (2 alpha c - alpha^2)/4``;
    this sign is the one the traveling wave actually satisfies.
    """
    beta = (2 * alpha * speed - alpha**2) / 4

    def exact(x, t):
        return 0.5 * (1.0 - np.tanh(alpha / 4 * (x - speed * t)))

    t0 = -0.2
    problem = ProblemSpec(
        name="burgers-fisher",
        epsilon=1.0,
        f=lambda u, ux: alpha * u * ux + beta * u * (u - 1.0),
        df_du=lambda u, ux: alpha * ux + beta * (2.0 * u - 1.0),
        df_dux=lambda u, ux: alpha * u,
        u0=lambda x: exact(x, t0),
        x_left=-1.0,
        x_right=0.0,
        t0=t0,
        tf=0.0,
        u_left=lambda t: exact(-1.0, t),
        u_right=lambda t: exact(0.0, t),
        exact=exact,
        params={"alpha": alpha, "speed": speed, "beta": beta},
    )
    _validate(problem)
    return problem


def schlogl(epsilon=1e-3, delta=1e-3, beta=0.0) -> ProblemSpec:
    """Schlögl (Nagumo) equation with bistable ``f = u (u-1)(u-beta) / delta``.

    The traveling-wave solution below holds for ``beta = 0``; other values
    keep ``f`` and the potential but drop the exact solution.
    """
    speed = np.sqrt(epsilon / (2 * delta))
    width = np.sqrt(8 * epsilon * delta)

    def exact(x, t):
        return 0.5 * (1.0 - np.tanh((x - speed * t) / width))

    def f(u, ux=None):
        return u * (u - 1.0) * (u - beta) / delta

    def df_du(u, ux=None):
        return (3 * u**2 - 2 * (1 + beta) * u + beta) / delta

    def potential(u):
        return u**2 * (3 * u**2 - 4 * (1 + beta) * u + 6 * beta) / (12 * delta)

    has_exact = beta == 0.0
    problem = ProblemSpec(
        name="schlogl",
        epsilon=epsilon,
        f=f,
        df_du=df_du,
        df_dux=lambda u, ux: np.zeros_like(np.asarray(u, dtype=float)),
        u0=lambda x: exact(x, 0.0),
        x_left=0.0,
        x_right=1.0,
        t0=0.0,
        tf=1.0,
        u_left=lambda t: exact(0.0, t),
        u_right=lambda t: exact(1.0, t),
        exact=exact if has_exact else None,
        potential=potential,
        params={"epsilon": epsilon, "delta": delta, "beta": beta, "speed": speed},
    )
    _validate(problem)
    return problem


def _validate(problem: ProblemSpec):
    if check_derivatives(problem) > 1e-3:
        raise ProblemError(f"{problem.name}: f and its derivatives disagree")
    if problem.potential is not None and check_potential(problem) > 1e-6:
        raise ProblemError(f"{problem.name}: potential is not an antiderivative of f")
    if problem.exact is not None and check_exact(problem) > 1e-5:
        raise ProblemError(f"{problem.name}: exact solution does not satisfy the PDE")


PROBLEMS = {
    "burgers": burgers,
    "burgers-fisher": burgers_fisher,
    "schlogl": schlogl,
}


def get_problem(name: str, **kwargs) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ProblemError(
            f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}"
        ) from None
    return factory(**kwargs)
