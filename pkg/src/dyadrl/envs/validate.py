"""Monte Carlo checks that a tabular environment has dyadic structure.

Rollouts act uniformly at random and record the five-tuple state
(block, period, high state, high action, low state) before every action.
Periods run 0..H: the high action is taken at period 0 and low actions at
periods 1..H, the last of which leads to period 0 of the next block.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2_contingency

from ..errors import InvalidInputError

ALPHA = 0.01


@dataclass
class ValidationReport:
    n_rollouts: int
    n_transitions: int = 0
    violations: dict = field(default_factory=dict)  # constraint number -> count
    exit_pvalues: dict = field(default_factory=dict)  # factor -> chi-square p-value
    exit_pvalue: float | None = None  # Bonferroni-adjusted minimum
    homogeneity_pvalue: float | None = None
    alpha: float = ALPHA

    @property
    def checks(self) -> dict:
        """Pass/fail per check; empty when nothing was simulated."""
        if self.n_rollouts == 0:
            return {}
        out = {f"constraint_{c}": n == 0 for c, n in sorted(self.violations.items())}
        if self.exit_pvalue is not None:
            out["exit_state_independence"] = self.exit_pvalue > self.alpha
        if self.homogeneity_pvalue is not None:
            out["block_homogeneity"] = self.homogeneity_pvalue > self.alpha
        return out

    @property
    def structural_ok(self) -> bool | None:
        if self.n_rollouts == 0:
            return None
        return all(n == 0 for n in self.violations.values())

    def lines(self) -> list:
        rows = [f"rollouts: {self.n_rollouts}", f"transitions: {self.n_transitions}"]
        for c, n in sorted(self.violations.items()):
            rows.append(f"constraint {c}: {n} violations")
        for name, p in self.exit_pvalues.items():
            rows.append(f"exit state vs {name}: p = {p:.4g}")
        if self.exit_pvalue is not None:
            rows.append(f"exit state independence (adjusted): p = {self.exit_pvalue:.4g}")
        if self.homogeneity_pvalue is not None:
            rows.append(f"block homogeneity: p = {self.homogeneity_pvalue:.4g}")
        for name, ok in self.checks.items():
            rows.append(f"{name}: {'pass' if ok else 'FAIL'}")
        return rows


def constraint_violations(s, t, H: int) -> list:
    """Numbers of the transition constraints broken by the pair s -> t."""
    w, h, high, a_high, _ = s
    w2, h2, high2, a_high2, low2 = t
    broken = []
    if h < H and (w2 != w or h2 != h + 1 or high2 != high):
        broken.append(1)
    if 0 < h < H and a_high2 != a_high:
        broken.append(2)
    if h == H and (w2 != w + 1 or h2 != 0 or a_high2 is not None or low2 is not None):
        broken.append(3)
    return broken


def _chi2_pvalue(table: np.ndarray) -> float | None:
    table = np.asarray(table, dtype=float)
    table = table[table.sum(axis=1) > 0]
    # sparse columns make the asymptotic test unreliable
    table = table[:, table.sum(axis=0) >= 5 * table.shape[0]]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return None
    return float(chi2_contingency(table, correction=False)[1])


def _check_env(env, n_blocks, n_periods):
    if not getattr(env, "tabular", False):
        raise InvalidInputError("the validator needs a tabular environment")
    W, H = getattr(env, "n_blocks", None), getattr(env, "n_periods", None)
    if not (isinstance(W, int) and isinstance(H, int) and W >= 1 and H >= 1):
        raise InvalidInputError(f"environment horizon metadata is malformed: W={W!r}, H={H!r}")
    if (n_blocks is not None and n_blocks != W) or (n_periods is not None and n_periods != H):
        raise InvalidInputError(
            f"environment declares W={W}, H={H}; expected W={n_blocks}, H={n_periods}")
    return W, H


def validate_dyadic_transitions(env, n_rollouts: int, rng: np.random.Generator,
                                n_blocks: int | None = None, n_periods: int | None = None,
                                alpha: float = ALPHA) -> ValidationReport:
    """Simulate ``n_rollouts`` episodes under uniform actions and test the dyadic structure.

    Checks: the three transition constraints on every recorded pair; that the
    next block's high state is independent of the ending block's high action,
    last low action and last low state (chi-square, Bonferroni-combined); and
    that the distribution of the final low state reached in a block does not
    depend on the block index (chi-square).
    """
    W, H = _check_env(env, n_blocks, n_periods)
    if n_rollouts < 0:
        raise InvalidInputError("n_rollouts must be nonnegative")
    report = ValidationReport(n_rollouts, alpha=alpha)
    if n_rollouts == 0:
        return report
    report.violations = {1: 0, 2: 0, 3: 0}
    n_high = env.features.spec.cardinalities[0]
    n_ah = env.features.n_high_actions
    n_al = env.features.n_low_actions
    n_low = env.features.spec.cardinalities[2]
    by_action = np.zeros((n_high, n_ah))
    by_low_action = np.zeros((n_high, n_al))
    by_low_state = np.zeros((n_high, n_low))
    final = {}
    for _ in range(n_rollouts):
        env.start_episode()
        prev = None
        for w in range(W):
            env.start_block()
            s = env.five_tuple()
            if prev is not None:
                last, last_ah, last_al = prev
                for c in constraint_violations(last, s, H):
                    report.violations[c] += 1
                report.n_transitions += 1
                by_action[s[2], last_ah] += 1
                by_low_action[s[2], last_al] += 1
                by_low_state[s[2], last[4]] += 1
            ah = int(rng.integers(n_ah))
            env.set_high_action(ah)
            for h in range(1, H + 1):
                t = env.five_tuple()
                for c in constraint_violations(s, t, H):
                    report.violations[c] += 1
                report.n_transitions += 1
                s = t
                al = int(rng.integers(n_al))
                env.step(al)
            row = final.setdefault(w, {})
            outcome = env.low_state()
            row[outcome] = row.get(outcome, 0) + 1
            prev = (s, ah, al)
    tests = {"high action": by_action, "last low action": by_low_action, "last low state": by_low_state}
    for name, table in tests.items():
        p = _chi2_pvalue(table)
        if p is not None:
            report.exit_pvalues[name] = p
    if report.exit_pvalues:
        report.exit_pvalue = min(1.0, len(report.exit_pvalues) * min(report.exit_pvalues.values()))
    outcomes = sorted({o for row in final.values() for o in row})
    table = np.array([[final[w].get(o, 0) for o in outcomes] for w in sorted(final)])
    report.homogeneity_pvalue = _chi2_pvalue(table)
    return report
