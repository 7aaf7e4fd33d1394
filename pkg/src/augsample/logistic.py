"""Logistic-regression coresets.

The logistic loss ln(1 + e^t) splits exactly into a bounded part and a
ReLU part,

    ln(1 + e^t) = ln(1 + e^(-|t|)) + max{0, t},

which is both the analysis device and the numerically stable evaluation:
the exponent is never positive, so the loss is overflow-free for any
margin a double can hold.  A coreset samples rows with probabilities

    p_i = min{1, alpha * (mu * l1_i + l2_i + mu * d / n)}

where l1 are exact l1 sensitivities (or the l2-relax upper bound above a
size threshold), l2 are leverage scores, and mu is the one-sidedness
parameter of the data: the ReLU part rides on the sensitivity-augmented
terms, the bounded part on the uniform mu*d/n floor.  One sample serves
all parts.  On data where mu is unbounded (perfectly separable) the
guarantee is vacuous and coreset construction refuses to proceed without
an explicit override.

Labeled classification data (features, y in {-1, +1}) is ingested by
multiplying each row by -y, which turns sum ln(1 + exp(-y a x)) into the
unlabeled form used throughout.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .calibrate import _check_eps_delta, logistic_alpha
from .errors import MuUnboundedError, NonFiniteLossError
from .matrix import as_matrix, load_matrix
from .rng import Seed, child_rng, seed_path
from .sampling import SamplingPlan, WeightedSample, draw
from .scores import (
    ScoreVector,
    exact_lp_sensitivities,
    l2_leverage,
    l2_relax_upper_bounds,
    mu_estimate,
)

_MU_STREAM = 0
_DRAW_STREAM = 1
_PROBE_STREAM = 2


def logistic_loss_split(rows, x, weights=None) -> float:
    """Exact logistic loss via the split form; safe for arbitrarily large margins."""
    rows = np.asarray(rows, dtype=float)
    x = np.asarray(x, dtype=float)
    if rows.ndim != 2 or x.ndim != 1 or rows.shape[1] != x.size:
        raise ValueError(f"dimension mismatch: rows {rows.shape} vs x {x.shape}")
    t = rows @ x
    bounded = np.log1p(np.exp(-np.abs(t)))
    relu = np.maximum(t, 0.0)
    if weights is None:
        return float(bounded.sum() + relu.sum())
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (rows.shape[0],):
        raise ValueError(f"weights shape {weights.shape} does not match {rows.shape[0]} rows")
    return float((weights * bounded).sum() + (weights * relu).sum())


def _sigmoid(t):
    out = np.empty_like(t)
    np.exp(-np.abs(t), out=out)
    out /= 1.0 + out
    return np.where(t >= 0.0, 1.0 - out, out)


@dataclass(frozen=True)
class LogisticCoreset:
    """A weighted sample built for the logistic loss, with its provenance."""

    sample: WeightedSample
    mu_used: float
    alpha: float
    epsilon_target: float
    provenance: tuple[str, str] = field(default=("", ""))

    @property
    def size(self) -> int:
        return self.sample.size


def logistic_sampling_plan(
    l1: ScoreVector, l2: ScoreVector, mu: float, alpha: float
) -> SamplingPlan:
    """p_i = min{1, alpha * (mu * l1_i + l2_i + mu * d / n)} with d = sum of l2."""
    if len(l1) != len(l2):
        raise ValueError("score vectors must have the same length")
    if not (math.isfinite(mu) and mu >= 1.0):
        raise ValueError(f"need finite mu >= 1, got {mu}")
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise ValueError(f"need alpha > 0, got {alpha}")
    n = len(l1)
    d = max(1.0, round(l2.total))  # rank of the data
    probs = np.minimum(1.0, alpha * (mu * l1.values + l2.values + mu * d / n))
    return SamplingPlan(probs=probs, scheme="augmented_logistic", alpha=alpha, mu=mu, p=1.0)


def logistic_coreset(
    a,
    epsilon: float,
    delta: float,
    seed: Seed = 0,
    mu_override: float | None = None,
    alpha: float | None = None,
    mu_safety: float = 2.0,
    oracle_limit: int = 20000,
    oracle_tol: float = 1e-8,
    c_alpha: float | None = None,
) -> LogisticCoreset:
    """Draw a logistic coreset of A at target relative error ``epsilon``.

    mu is estimated (a lower bound) and multiplied by ``mu_safety`` unless
    overridden.  ``alpha`` overrides the calibrated formula; otherwise it is
    computed from (epsilon, delta) with the constant ``c_alpha``, which must
    then be supplied (the CLI reads it from the calibration file).
    """
    arr = as_matrix(a)
    _check_eps_delta(epsilon, delta)
    n, d = arr.shape
    if mu_override is not None:
        if not (math.isfinite(mu_override) and mu_override >= 1.0):
            raise ValueError(f"mu override must be finite and >= 1, got {mu_override}")
        mu_used = float(mu_override)
    else:
        est = mu_estimate(arr, p=1.0, seed=seed_path(seed, _MU_STREAM))
        if est.unbounded:
            raise MuUnboundedError(
                "the data is one-sided (mu unbounded): the approximation guarantee is "
                "vacuous; pass an explicit mu override to sample anyway",
                witness=est.witness,
            )
        mu_used = max(1.0, est.mu_hat * mu_safety)
    if alpha is None:
        if c_alpha is None:
            raise ValueError("need either alpha or c_alpha to size the coreset")
        alpha = logistic_alpha(epsilon, delta, d, mu_used, c_alpha)
    if n <= oracle_limit:
        l1 = exact_lp_sensitivities(arr, 1.0, tol=oracle_tol)
    else:
        l1 = l2_relax_upper_bounds(arr, 1.0)
    l2 = l2_leverage(arr)
    plan = logistic_sampling_plan(l1, l2, mu_used, float(alpha))
    sample = draw(plan, seed_path(seed, _DRAW_STREAM))
    return LogisticCoreset(
        sample=sample,
        mu_used=mu_used,
        alpha=float(alpha),
        epsilon_target=float(epsilon),
        provenance=(l1.kind, l2.kind),
    )


def train_weighted_logistic(
    rows,
    weights=None,
    x0=None,
    max_iters: int = 2000,
    tol: float = 1e-6,
    history: list | None = None,
) -> np.ndarray:
    """Minimize the weighted logistic loss by gradient descent with line search.

    The problem is convex, so the returned point is a global minimizer up to
    the stopping rule: gradient norm <= tol or ``max_iters`` accepted steps.
    Armijo backtracking keeps the loss sequence nonincreasing.  If the loss
    turns non-finite (diverging data), the error carries the last iterate.
    """
    rows = as_matrix(rows)
    n, d = rows.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights shape {w.shape} does not match {n} rows")
    x = np.zeros(d) if x0 is None else np.array(x0, dtype=float)

    def loss_grad(xv):
        t = rows @ xv
        loss = float((w * (np.log1p(np.exp(-np.abs(t))) + np.maximum(t, 0.0))).sum())
        grad = rows.T @ (w * _sigmoid(t))
        return loss, grad

    loss, grad = loss_grad(x)
    if not math.isfinite(loss):
        raise NonFiniteLossError("initial loss is not finite", iterate=x)
    if history is not None:
        history.append(loss)
    # 1/L for L = trace bound on the Hessian sum w_i sigma'(t) a_i a_i^T <= (1/4) sum w_i |a_i|^2
    step = 4.0 / max(4.0, float((w[:, None] * rows * rows).sum()))
    for _ in range(max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break
        accepted = False
        for _ in range(60):
            cand = x - step * grad
            cand_loss, cand_grad = loss_grad(cand)
            if not math.isfinite(cand_loss):
                raise NonFiniteLossError("loss became non-finite during search", iterate=x)
            if cand_loss <= loss - 1e-4 * step * gnorm * gnorm:
                x, loss, grad = cand, cand_loss, cand_grad
                accepted = True
                if history is not None:
                    history.append(loss)
                step *= 2.0  # re-expand after a successful step
                break
            step *= 0.5
        if not accepted:
            break  # step underflow: at a numerical stationary point
    return x


@dataclass(frozen=True)
class QualityReport:
    """Relative loss errors of a coreset at probe points and at both optima."""

    probe_errors: np.ndarray
    max_probe_error: float
    error_at_full_opt: float
    error_at_coreset_opt: float
    full_opt_loss: float
    coreset_opt_full_loss: float
    mu_floor_ok: bool
    mu_used: float


def coreset_quality_report(a, coreset: LogisticCoreset, probe_xs, seed: Seed = 0) -> QualityReport:
    """Compare coreset loss against the full loss at probes and trained optima.

    ``probe_xs`` is either an array of probe directions (one per row) or an
    integer count of Gaussian probes to generate from ``seed``.  Also checks
    the lower bound f(Ax) >= n / mu at every probed point; a violation means
    mu was underestimated.
    """
    arr = as_matrix(a)
    n, d = arr.shape
    if isinstance(probe_xs, (int, np.integer)):
        if probe_xs < 1:
            raise ValueError("need at least one probe")
        probes = child_rng(seed, _PROBE_STREAM).standard_normal((int(probe_xs), d))
    else:
        probes = np.atleast_2d(np.asarray(probe_xs, dtype=float))
        if probes.size == 0:
            raise ValueError("need at least one probe")
    rows_s = arr[coreset.sample.indices]
    w_s = coreset.sample.weights

    def rel_err(x):
        full = logistic_loss_split(arr, x)
        approx = logistic_loss_split(rows_s, x, w_s)
        return abs(approx - full) / full, full

    errors = np.empty(probes.shape[0])
    floor_ok = True
    floor = n / coreset.mu_used
    for j, x in enumerate(probes):
        errors[j], full = rel_err(x)
        floor_ok &= full >= floor * (1.0 - 1e-9)

    full_opt = train_weighted_logistic(arr)
    coreset_opt = train_weighted_logistic(rows_s, w_s)
    err_full_opt, loss_at_full_opt = rel_err(full_opt)
    err_core_opt, loss_at_core_opt = rel_err(coreset_opt)
    floor_ok &= loss_at_full_opt >= floor * (1.0 - 1e-9)
    floor_ok &= loss_at_core_opt >= floor * (1.0 - 1e-9)
    return QualityReport(
        probe_errors=errors,
        max_probe_error=float(errors.max()),
        error_at_full_opt=err_full_opt,
        error_at_coreset_opt=err_core_opt,
        full_opt_loss=loss_at_full_opt,
        coreset_opt_full_loss=logistic_loss_split(arr, coreset_opt),
        mu_floor_ok=bool(floor_ok),
        mu_used=coreset.mu_used,
    )


def load_labeled_csv(path) -> np.ndarray:
    """Read a labeled CSV (last column y in {-1, +1}) into unlabeled form.

    Each feature row is multiplied by -y, so the plain logistic loss on the
    result equals the labeled loss sum ln(1 + exp(-y a x)).
    """
    raw = load_matrix(path, fmt="csv")
    if raw.shape[1] < 2:
        raise ValueError("labeled data needs at least one feature column plus the label")
    y = raw[:, -1]
    if not np.all(np.isin(y, (-1.0, 1.0))):
        bad = int(np.flatnonzero(~np.isin(y, (-1.0, 1.0)))[0])
        raise ValueError(f"row {bad + 1}: label must be -1 or +1, got {y[bad]}")
    return raw[:, :-1] * (-y)[:, None]
