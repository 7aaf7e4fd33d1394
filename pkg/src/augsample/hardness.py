"""The block-diagonal instance where pure lp sampling wastes its budget.

The instance stacks two blocks on disjoint column ranges:

    [ A1  0  ]   A1: n x d Gaussian, full rank, small total lp sensitivity
    [ 0   A2 ]   A2: the d x d identity stacked ``copies`` times

A2's rows each have sensitivity exactly 1/copies, so its total is exactly
d, while A1's measured total is far below d.  Preserving the rank of the
whole matrix needs at least d rows from each block, but pure lp sampling
allocates budget proportionally to the block totals and starves A1; adding
l2 leverage to the probabilities restores each block's share to at least d.

``lowerbound_experiment`` runs the comparison: for each pure-lp multiplier
k it matches the augmented and uniform schemes to the same expected sample
size and reports each scheme's rank-success fraction with exact binomial
confidence intervals.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .distortion import rank_preserved
from .matrix import as_matrix, gen_gaussian, gen_stacked_identity
from .rng import Seed, seed_path
from .sampling import SamplingPlan, draw, pure_lp_plan, uniform_plan
from .scores import ScoreVector, exact_lp_sensitivities, l2_leverage, l2_relax_upper_bounds

RESULT_FIELDS = (
    "scheme",
    "k",
    "expected_size",
    "success_fraction",
    "ci_low",
    "ci_high",
    "mean_realized_size",
)


@dataclass(frozen=True)
class HardInstance:
    """Block-diagonal matrix with per-block row ranges and measured score totals."""

    matrix: np.ndarray
    block1_rows: np.ndarray
    block2_rows: np.ndarray
    d: int
    p: float
    lp_scores: ScoreVector
    measured_totals: tuple[float, float]
    score_method: str

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.block1_rows, self.block2_rows]


def hard_instance(
    d: int,
    n: int,
    copies: int,
    p: float,
    seed: Seed = 0,
    oracle_limit: int = 20000,
    tol: float = 1e-8,
) -> HardInstance:
    """Build the two-block instance and measure its lp sensitivities.

    Block 1 sensitivities come from the exact per-row oracle when the block
    has at most ``oracle_limit`` rows, otherwise from the l2-relax upper
    bound (the method is recorded).  Because the blocks live on disjoint
    columns, a block row's sensitivity in the full matrix equals its
    sensitivity within its own block: any mass placed on the other block's
    columns only grows the denominator.  Block 2 scores are 1/copies each,
    exactly, for every p.
    """
    if not (1 <= d <= n):
        raise ValueError(f"need n >= d >= 1, got n={n}, d={d}")
    if copies < 1:
        raise ValueError(f"need copies >= 1, got {copies}")
    block1 = gen_gaussian(n, d, seed_path(seed, 0))
    block2 = gen_stacked_identity(d, copies)
    m2 = block2.shape[0]
    full = np.zeros((n + m2, 2 * d))
    full[:n, :d] = block1
    full[n:, d:] = block2

    if n <= oracle_limit:
        s1 = exact_lp_sensitivities(block1, p, tol=tol)
        method = "oracle"
        kind = "lp_sensitivity_exact"
    else:
        s1 = l2_relax_upper_bounds(block1, p)
        method = "l2_relax_upper"
        kind = "lp_sensitivity_upper"
    s2_vals = np.full(m2, 1.0 / copies)
    scores = ScoreVector(values=np.concatenate([s1.values, s2_vals]), kind=kind, p=float(p))
    return HardInstance(
        matrix=full,
        block1_rows=np.arange(n),
        block2_rows=np.arange(n, n + m2),
        d=d,
        p=float(p),
        lp_scores=scores,
        measured_totals=(s1.total, float(d)),
        score_method=method,
    )


def matched_augmented_plan(
    lp_scores: ScoreVector, l2_scores: ScoreVector, target_size: float, mu: float = 1.0
) -> SamplingPlan:
    """Augmented plan with alpha tuned so the expected size matches ``target_size``.

    The expected size is monotone in alpha, so a bisection lands within 1%
    of the target (capped at n, where every probability is 1).
    """
    n = len(lp_scores)
    target = min(float(target_size), float(n))
    base = mu * lp_scores.values + l2_scores.values + 1.0 / n

    def expected(alpha):
        return float(np.minimum(1.0, alpha * base).sum())

    lo, hi = 0.0, 1.0
    while expected(hi) < target and hi < 1e18:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if expected(mid) < target:
            lo = mid
        else:
            hi = mid
        if abs(expected(hi) - target) <= 0.01 * target:
            break
    alpha = hi
    probs = np.minimum(1.0, alpha * base)
    return SamplingPlan(probs=probs, scheme="augmented", alpha=alpha, mu=mu, p=lp_scores.p)


def lowerbound_experiment(
    inst: HardInstance, budgets, trials: int = 200, seed: Seed = 0
) -> list[dict]:
    """Success fractions of pure-lp vs size-matched augmented and uniform plans.

    For each multiplier k in ``budgets``: pure lp sampling uses
    p_i = min{1, k * s_i}; the augmented and uniform plans are scaled to the
    same expected size within 1%.  A trial succeeds when the sampled rows
    preserve the rank of both blocks.  Fractions come with two-sided exact
    95% binomial intervals.
    """
    arr = as_matrix(inst.matrix)
    n_total = arr.shape[0]
    l2 = l2_leverage(arr)
    results = []
    for ki, k in enumerate(budgets):
        pure = pure_lp_plan(inst.lp_scores, k)
        target = pure.expected_size
        plans = [
            ("pure_lp", pure),
            ("augmented", matched_augmented_plan(inst.lp_scores, l2, target)),
            ("uniform", uniform_plan(n_total, min(target, n_total))),
        ]
        for si, (name, plan) in enumerate(plans):
            successes = 0
            sizes = np.empty(trials)
            for t in range(trials):
                sample = draw(plan, seed_path(seed, ki, si, t))
                sizes[t] = sample.size
                if all(rank_preserved(arr, sample, blocks=inst.blocks)):
                    successes += 1
            ci = binomtest(successes, trials).proportion_ci(confidence_level=0.95)
            results.append(
                {
                    "scheme": name,
                    "k": float(k),
                    "expected_size": plan.expected_size,
                    "success_fraction": successes / trials,
                    "ci_low": float(ci.low),
                    "ci_high": float(ci.high),
                    "mean_realized_size": float(sizes.mean()),
                }
            )
    return results


def imbalance_ratio(inst: HardInstance) -> float:
    """Measured block-1 total over block-2 total; the engine of the lower bound."""
    t1, t2 = inst.measured_totals
    return t1 / t2


def imbalance_envelope(d: int) -> float:
    """sqrt(log d / d), the shape the block-1/block-2 ratio is checked against."""
    return math.sqrt(math.log(d) / d)
