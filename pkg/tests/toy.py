"""Tiny one-constraint problems with closed-form solutions, shared by solver tests."""

from __future__ import annotations

import numpy as np

from fsoalloc.program.base import Action


class ToyPowerProblem:
    """max E log(1 + h p) s.t. E p <= budget, 0 <= p <= p_max, with h ~ U[lo, hi].

    The Lagrangian maximiser is p = clip(1/lam - 1/h, 0, p_max).
    """

    name = "toy"
    n_constraints = 1
    constraint_groups = ["power"]
    constraint_names = ["power"]

    def __init__(self, budget=1.0, lo=0.5, hi=2.0, p_max=3.0, poison_at=None):
        self.budget, self.lo, self.hi, self.p_max = budget, lo, hi, p_max
        self.poison_at = poison_at
        self.calls = 0

    def sample_csi(self, rng, batch):
        return rng.uniform(self.lo, self.hi, size=(batch, 1))

    def primal_argmax(self, h, lam):
        lam = float(np.asarray(lam).reshape(-1)[0])
        self.calls += 1
        p = np.full(h.shape, self.p_max) if lam == 0 else np.clip(1.0 / lam - 1.0 / h, 0.0, self.p_max)
        if self.poison_at is not None and self.calls > self.poison_at:
            p = np.full(h.shape, np.nan)
        return Action(powers=p)

    def objective(self, h, a):
        return np.log1p(h[:, 0] * a.powers[:, 0])

    def constraints(self, h, a):
        return a.powers - self.budget

    def lagrangian(self, h, a, lam):
        return self.objective(h, a) - self.constraints(h, a) @ np.asarray(lam, dtype=float)

    def optimal_lambda(self):
        """Root of E[clip(1/lam - 1/h, 0, p_max)] = budget for h uniform, by bisection on a fine quadrature."""
        h = np.linspace(self.lo, self.hi, 200_001)
        lo, hi = 1e-6, 10.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.clip(1 / mid - 1 / h, 0, self.p_max).mean() > self.budget:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


class ToyPolicyProblem:
    """One truncated-normal power on [0, p_s] with a linear-in-h objective.

    f = -(p - target)^2 * h when ``quadratic`` else f = log(1 + 4 h p); the constraint
    is c = p - budget. The policy network is a single linear layer fed log h.
    """

    name = "toy-policy"
    hidden_sizes: tuple = ()
    n_constraints = 1
    constraint_groups = ["power"]
    constraint_names = ["power"]

    def __init__(self, p_s=0.6, budget=0.2, target=0.2, quadratic=False, lo=0.5, hi=2.0):
        self.p_s, self.budget, self.target, self.quadratic = p_s, budget, target, quadratic
        self.lo, self.hi = lo, hi

    def sample_csi(self, rng, batch):
        return rng.uniform(self.lo, self.hi, size=(batch, 1))

    def features(self, h):
        return np.log(h)[:, None, :]

    def policy_layout(self):
        from fsoalloc.policy import PolicyLayout

        return PolicyLayout.per_coordinate(1, self.p_s)

    def power_active(self, cats):
        return np.ones((len(cats), 1), dtype=bool)

    def assemble_action(self, cats, powers):
        return Action(powers=np.asarray(powers))

    def objective(self, h, a):
        p = a.powers[:, 0]
        return -h[:, 0] * (p - self.target) ** 2 if self.quadratic else np.log1p(4.0 * h[:, 0] * p)

    def constraints(self, h, a):
        return a.powers - self.budget
