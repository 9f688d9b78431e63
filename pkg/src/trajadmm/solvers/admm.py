"""ADMM with stiffness decoupling, in the partial and full variants."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dt_subproblem import reduced_lagrangian_terms
from ..problem import Problem
from .engine import SolverOptions, initial_state, run_solver

__all__ = ["AdmmParams", "estimate_lipschitz", "slack_update", "multiplier_update", "run_admm", "VARIANTS"]

VARIANTS = {"decoupled": "admm", "fully_decoupled": "admm-full", "admm": "admm", "admm-full": "admm-full"}


@dataclass(frozen=True)
class AdmmParams:
    """Penalty ``rho``, proximal weight ``beta``, Lyapunov weight ``kappa``."""

    rho: float
    beta: float
    kappa: float
    lipschitz: float = math.nan

    def __post_init__(self):
        if not (self.rho > 0 and self.beta > 0 and self.kappa >= 0):
            raise ValueError("rho and beta must be positive, kappa nonnegative")

    @classmethod
    def from_lipschitz(cls, L: float, factor: float = 3.0) -> "AdmmParams":
        if not L > 0:
            raise ValueError("Lipschitz constant must be positive")
        beta = factor * L
        return cls(beta, beta, beta / 4.0, L)

    @classmethod
    def from_rho(cls, rho: float, L: float = math.nan) -> "AdmmParams":
        return cls(rho, rho, rho / 4.0, L)

    @property
    def satisfies_rule(self) -> bool:
        """``rho = beta``, ``kappa = beta/4`` and ``beta > 2 sqrt(2) L``."""
        return (
            self.rho == self.beta
            and self.kappa == self.beta / 4.0
            and self.beta > 2.0 * math.sqrt(2.0) * self.lipschitz
        )


def estimate_lipschitz(objective, weight: float = 1.0, shape=None, rtol: float = 1e-6, max_iter: int = 100000) -> float:
    """Largest Hessian eigenvalue of ``weight * tr(X^T Q X)`` by power iteration.

    ``objective`` is the symmetric matrix ``Q`` (Hessian ``2 weight Q``) or a
    Hessian-vector product callable, in which case ``shape`` is required.
    """
    if callable(objective):
        if shape is None:
            raise ValueError("a Hessian-vector product needs the variable shape")
        hvp = objective
        size = int(np.prod(shape))
    elif isinstance(objective, np.ndarray) and objective.ndim == 2 and objective.shape[0] == objective.shape[1]:
        Q = np.asarray(objective, float)
        if not np.allclose(Q, Q.T):
            raise ValueError("objective matrix must be symmetric")
        shape = (Q.shape[0],)
        size = Q.shape[0]
        hvp = lambda v: 2.0 * weight * (Q @ v)
    else:
        raise TypeError("non-quadratic objective: supply a Hessian-vector product or L_O directly")
    # deterministic start with components along every eigenvector
    v = 1.0 + np.arange(size, dtype=float) / (size + 1.0)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = np.asarray(hvp(v.reshape(shape)), float).ravel()
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nw
        if abs(new - lam) <= rtol * abs(new) * 1e-2:
            return abs(new)
        lam = new
    return abs(lam)


def slack_update(xbar, x_theta, lam, grad_o, beta: float, rho: float):
    """``Xbar - (grad O(Xbar) + rho (Xbar - X(theta)) - lambda) / beta``."""
    xbar = np.asarray(xbar, float)
    return xbar - (np.asarray(grad_o, float) + rho * (xbar - x_theta) - lam) / beta


def multiplier_update(lam, x_theta, xbar_new, rho: float):
    """``lambda + rho (X(theta) - Xbar)``; applies equally to the time multipliers."""
    return np.asarray(lam, float) + rho * (np.asarray(x_theta, float) - xbar_new)


def reduced_lipschitz(problem: Problem, xbar, h: float = 1e-5, safety: float = 2.0) -> float:
    """Lipschitz estimate for ``sum O + w dt(Xbar)``.

    Power iteration on finite-difference Hessian-vector products at ``xbar``;
    the safety factor covers the drift of the time-step curvature along the
    run, which a local estimate cannot see.
    """
    shapes = [X.shape for X in xbar]
    cuts = np.cumsum([X.size for X in xbar])[:-1]
    x0 = np.concatenate([X.ravel() for X in xbar])

    def grad(v):
        parts = [p.reshape(s) for p, s in zip(np.split(v, cuts), shapes)]
        return np.concatenate([g.ravel() for g in reduced_lagrangian_terms(parts, problem)[1]])

    def hvp(v):
        return (grad(x0 + h * v) - grad(x0 - h * v)) / (2 * h)

    return safety * estimate_lipschitz(hvp, shape=x0.shape, rtol=1e-4, max_iter=500)


def default_params(problem: Problem, mode: str = "admm", rho: float | None = None) -> AdmmParams:
    """Lyapunov-rule parameters; the fully decoupled variant folds ``w dt(Xbar)``
    into the smooth part, so its estimate includes the time term."""
    if mode == "admm-full":
        L = reduced_lipschitz(problem, problem.piece_points(problem.unpack(problem.theta0())))
    else:
        L = problem.lipschitz_objective()
    if rho is not None:
        return AdmmParams.from_rho(rho, L)
    return AdmmParams.from_lipschitz(L if L > 0 else 1.0)


def run_admm(
    problem: Problem,
    variant: str = "decoupled",
    options: SolverOptions | None = None,
    params: AdmmParams | None = None,
    init=None,
):
    """Run one of the ADMM variants; returns ``(Solution, ConvergenceRecord)``.

    ``params`` defaults to ``rho = beta = 3 L_O``, ``kappa = beta / 4``.
    """
    mode = VARIANTS.get(variant)
    if mode is None:
        raise ValueError(f"unknown ADMM variant {variant!r}")
    if params is None:
        params = default_params(problem, mode)
    if init is None:
        init = initial_state(problem, mode, rho=params.rho)
    return run_solver(problem, mode, options, init, params)
