"""Sampling plans, Poisson draws, weighted norms, and loss evaluation.

A plan assigns every row an independent inclusion probability; a draw keeps
row i with probability p_i and records the weight w_i = 1/p_i separately,
never folding it into the row.  The augmented scheme uses

    p_i = min{1, alpha * (mu * s_i + l2_i + 1/n)}

with s the lp sensitivities (or a valid upper bound) and l2 the leverage
scores; pure lp and uniform plans are the baselines it is compared against.

Weights are kept separate because a single reweighted matrix cannot
preserve two norms at once (n identical rows already force Omega(n) rows
for a folded representation); the weighted norms implemented here are

    ||v||_{w,p}     = (sum w_i |v_i|^p)^(1/p)
    ||v||_{w,inf}   = max |v_i|            (the p -> inf limit drops weights)
    ||v||_{w,inf,p} = max |w_i^(1/p) v_i|

Plans and samples are immutable; ``draw`` is deterministic given
(plan, seed), so concurrent draws with distinct derived seeds are
independent by construction.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import Seed, child_rng, seed_path
from .scores import ScoreVector

SCHEMES = ("augmented", "pure_lp", "uniform", "lewis", "augmented_logistic")

_LP_KINDS = ("lp_sensitivity_exact", "lp_sensitivity_upper")


@dataclass(frozen=True)
class SamplingPlan:
    """Per-row inclusion probabilities plus the parameters that produced them."""

    probs: np.ndarray
    scheme: str
    alpha: float
    mu: float = 1.0
    p: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty vector")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return self.probs.size

    @property
    def expected_size(self) -> float:
        return float(self.probs.sum())


@dataclass(frozen=True)
class WeightedSample:
    """Sampled row indices with their separate weights w_i = 1/p_i."""

    indices: np.ndarray
    weights: np.ndarray
    plan: SamplingPlan
    seed: Seed

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        w = np.asarray(self.weights, dtype=float)
        if idx.shape != w.shape or idx.ndim != 1:
            raise ValueError("indices and weights must be aligned vectors")
        if idx.size and np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing")
        if np.any(w < 1.0 - 1e-12):
            raise ValueError("weights must be >= 1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.indices.size


def _score_values(sv, n_expected=None, name="scores") -> np.ndarray:
    if not isinstance(sv, ScoreVector):
        raise TypeError(f"{name} must be a ScoreVector")
    if n_expected is not None and len(sv) != n_expected:
        raise ValueError(f"{name} length {len(sv)} does not match {n_expected}")
    return sv.values


def augmented_plan(sp: ScoreVector, s2: ScoreVector, mu: float, alpha: float) -> SamplingPlan:
    """p_i = min{1, alpha * (mu * sp_i + s2_i + 1/n)}.

    ``sp`` holds lp sensitivities (exact or an upper bound), ``s2`` l2
    leverage scores.  When the sp total is at most d the expected size lands
    in [alpha*d, 3*alpha*mu*d] before clamping kicks in.
    """
    if sp.kind not in _LP_KINDS:
        raise ValueError(f"sp must be lp sensitivities, got kind {sp.kind!r}")
    if s2.kind != "l2_leverage":
        raise ValueError(f"s2 must be l2 leverage scores, got kind {s2.kind!r}")
    spv = _score_values(sp, name="sp")
    s2v = _score_values(s2, len(sp), name="s2")
    if not (math.isfinite(mu) and mu >= 1.0):
        raise ValueError(f"need mu >= 1, got {mu}")
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise ValueError(f"need alpha > 0, got {alpha}")
    n = len(sp)
    probs = np.minimum(1.0, alpha * (mu * spv + s2v + 1.0 / n))
    return SamplingPlan(probs=probs, scheme="augmented", alpha=float(alpha), mu=float(mu), p=sp.p)


def pure_lp_plan(sp: ScoreVector, k: float) -> SamplingPlan:
    """p_i = min{1, k * sp_i}; tagged "lewis" when fed Lewis weights.

    Rows with score exactly 0 (necessarily zero rows) get probability 0 and
    are never sampled; they contribute nothing to any lp or p-ReLU loss.
    """
    if not (math.isfinite(k) and k > 0.0):
        raise ValueError(f"need k > 0, got {k}")
    vals = _score_values(sp, name="sp")
    scheme = "lewis" if sp.kind == "lewis_weight" else "pure_lp"
    probs = np.minimum(1.0, k * vals)
    return SamplingPlan(probs=probs, scheme=scheme, alpha=float(k), mu=1.0, p=sp.p)


def uniform_plan(n: int, m_target: float) -> SamplingPlan:
    """Every row with probability m_target / n; expected size is exactly m_target."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not (0.0 < m_target <= n):
        raise ValueError(f"need 0 < m_target <= n, got {m_target}")
    probs = np.full(n, float(m_target) / n)
    return SamplingPlan(probs=probs, scheme="uniform", alpha=float(m_target), mu=1.0, p=None)


def draw(plan: SamplingPlan, seed: Seed) -> WeightedSample:
    """Independent per-row inclusion; deterministic given (plan, seed).

    Rows with p_i = 1 are always included with weight 1.  The same seed
    yields nested samples across plans whose probabilities only grow, which
    couples sweeps over the oversampling parameter.
    """
    u = child_rng(seed).random(plan.n)
    idx = np.flatnonzero(u < plan.probs)
    return WeightedSample(indices=idx, weights=1.0 / plan.probs[idx], plan=plan, seed=seed)


# ------------------------------------------------------------- weighted norms


def _aligned(v, w):
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != w.shape or v.ndim != 1:
        raise ValueError(f"length mismatch: v has shape {v.shape}, w has shape {w.shape}")
    if np.any(w < 1.0 - 1e-12):
        raise ValueError("weights must be >= 1")
    return v, w


def weighted_norm(v, w, p: float) -> float:
    """(sum w_i |v_i|^p)^(1/p) for p in [1, inf)."""
    v, w = _aligned(v, w)
    if not (p >= 1.0 and math.isfinite(p)):
        raise ValueError(f"need p in [1, inf), got {p}")
    return float((w * np.abs(v) ** p).sum() ** (1.0 / p))


def weighted_inf(v) -> float:
    """max |v_i|; the limit of the weighted p-norms drops the weights."""
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(v)))


def weighted_inf_p(v, w, p: float) -> float:
    """max |w_i^(1/p) v_i|."""
    v, w = _aligned(v, w)
    if not (p >= 1.0 and math.isfinite(p)):
        raise ValueError(f"need p in [1, inf), got {p}")
    return float(np.max(w ** (1.0 / p) * np.abs(v)))


# ----------------------------------------------------------------- loss eval


@dataclass(frozen=True)
class Loss:
    """A per-row loss h applied to the margins Ax.

    Kinds: ``abs_p`` is h(r) = |r|^p, ``relu_p`` is h(r) = max{0, r}^p,
    ``logistic`` is h(r) = ln(1 + e^r), always evaluated in the split form
    ln(1 + e^(-|r|)) + max{0, r} so the exponent never exceeds 0.
    """

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind in ("abs_p", "relu_p"):
            if self.p is None or not (1.0 <= self.p < math.inf):
                raise ValueError(f"{self.kind} needs p in [1, inf), got {self.p}")
        elif self.kind == "logistic":
            if self.p is not None:
                raise ValueError("logistic loss takes no norm parameter")
        else:
            raise ValueError(f"unknown loss kind {self.kind!r}")

    @property
    def homogeneous(self) -> bool:
        return self.kind in ("abs_p", "relu_p")


def abs_loss(p: float) -> Loss:
    return Loss(kind="abs_p", p=float(p))


def relu_loss(p: float) -> Loss:
    return Loss(kind="relu_p", p=float(p))


def logistic_loss() -> Loss:
    return Loss(kind="logistic")


def pointwise(loss: Loss, t: np.ndarray) -> np.ndarray:
    """Elementwise h(t); works on any array shape."""
    t = np.asarray(t, dtype=float)
    if loss.kind == "abs_p":
        a = np.abs(t)
        if loss.p == 1.0:
            return a
        if loss.p == 2.0:
            return a * a
        return a**loss.p
    if loss.kind == "relu_p":
        r = np.maximum(t, 0.0)
        if loss.p == 1.0:
            return r
        if loss.p == 2.0:
            return r * r
        return r**loss.p
    # numerically stable split: ln(1+e^t) = ln(1+e^(-|t|)) + max{0, t}
    return np.log1p(np.exp(-np.abs(t))) + np.maximum(t, 0.0)


def pointwise_grad(loss: Loss, t: np.ndarray) -> np.ndarray:
    """Elementwise h'(t), with the convention h'(0) = 0 at kinks."""
    t = np.asarray(t, dtype=float)
    if loss.kind == "abs_p":
        if loss.p == 1.0:
            return np.sign(t)
        return loss.p * np.sign(t) * np.maximum(np.abs(t), 1e-300) ** (loss.p - 1.0)
    if loss.kind == "relu_p":
        if loss.p == 1.0:
            return np.where(t > 0.0, 1.0, 0.0)
        return loss.p * np.where(t > 0.0, np.maximum(t, 1e-300) ** (loss.p - 1.0), 0.0)
    out = np.empty_like(t)
    np.exp(-np.abs(t), out=out)
    out /= 1.0 + out  # sigma(-|t|)
    return np.where(t >= 0.0, 1.0 - out, out)


def loss_eval(rows, x, loss: Loss, weights=None) -> float:
    """sum_i w_i h(a_i x) over the given rows (full matrix or a subsample)."""
    rows = np.asarray(rows, dtype=float)
    x = np.asarray(x, dtype=float)
    if rows.ndim != 2 or x.ndim != 1 or rows.shape[1] != x.size:
        raise ValueError(f"dimension mismatch: rows {rows.shape} vs x {x.shape}")
    vals = pointwise(loss, rows @ x)
    if weights is None:
        return float(vals.sum())
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (rows.shape[0],):
        raise ValueError(f"weights shape {weights.shape} does not match {rows.shape[0]} rows")
    return float((weights * vals).sum())


# -------------------------------------------------------------- serialization


def save_sample(sample: WeightedSample, path) -> None:
    """Write "index,weight" CSV."""
    lines = ["index,weight"]
    lines += [f"{i},{w:.17g}" for i, w in zip(sample.indices, sample.weights)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_sample(path, plan: SamplingPlan | None = None, seed: Seed = 0) -> WeightedSample:
    lines = Path(path).read_text(encoding="ascii").strip().splitlines()
    if not lines or lines[0] != "index,weight":
        raise ValueError(f"{path}: expected 'index,weight' header")
    idx, w = [], []
    for line in lines[1:]:
        i, wi = line.split(",")
        idx.append(int(i))
        w.append(float(wi))
    if plan is None:
        n = (max(idx) + 1) if idx else 1
        plan = SamplingPlan(probs=np.ones(n), scheme="uniform", alpha=float(n))
    return WeightedSample(
        indices=np.array(idx, dtype=np.int64), weights=np.array(w), plan=plan, seed=seed
    )


def save_plan(plan: SamplingPlan, json_path, probs_path=None) -> None:
    """Write plan JSON {scheme, p, mu, alpha, probs_path} plus a probs CSV."""
    json_path = Path(json_path)
    probs_path = Path(probs_path) if probs_path else json_path.with_suffix(".probs.csv")
    lines = ["index,prob"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(plan.probs)]
    probs_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    meta = {
        "scheme": plan.scheme,
        "p": plan.p,
        "mu": plan.mu,
        "alpha": plan.alpha,
        "probs_path": probs_path.name,
    }
    json_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="ascii")


def load_plan(json_path) -> SamplingPlan:
    json_path = Path(json_path)
    meta = json.loads(json_path.read_text(encoding="ascii"))
    probs_path = json_path.parent / meta["probs_path"]
    lines = probs_path.read_text(encoding="ascii").strip().splitlines()
    if not lines or lines[0] != "index,prob":
        raise ValueError(f"{probs_path}: expected 'index,prob' header")
    probs = np.array([float(line.split(",")[1]) for line in lines[1:]])
    return SamplingPlan(
        probs=probs, scheme=meta["scheme"], alpha=meta["alpha"], mu=meta["mu"], p=meta["p"]
    )


def derived_draw_seed(seed: Seed, *path: int) -> tuple[int, ...]:
    """Documented derivation for per-trial draw seeds: (seed, *indices)."""
    return seed_path(seed, *path)
