"""Row-importance scores.

Implements the four score families used to build sampling probabilities:

* exact l2 leverage scores, ``a_i (A^T A)^+ a_i^T``, via an orthonormal basis;
* exact lp sensitivities ``sup_x |a_i x|^p / ||Ax||_p^p`` for p in [1, 2],
  computed per row as ``1 / min{||Ax||_p^p : a_i x = 1}``, a convex program
  solved by smoothed iteratively reweighted least squares on the affine
  slice ``x = x0 + N z`` (N a nullspace basis of a_i), with subgradient
  polishing near p = 1;
* cheap valid upper bounds ``(l2 leverage)^(p/2)``, which dominate the exact
  scores for p <= 2 because ||v||_p >= ||v||_2;
* Lewis weights by the classic fixed-point reweighting, as a baseline.

Also estimates the one-sidedness parameter mu of a matrix, the supremum of
total lp mass over the lp mass of the negative part; mu is infinite for
perfectly one-sided data and exactly 2 for sign-symmetric data.

All functions are pure; per-row solves are independent and may be fanned
out by callers as long as the input matrix is shared read-only.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConvergenceError
from .matrix import as_matrix, orthonormal_basis
from .rng import Seed, child_rng

SCORE_KINDS = ("l2_leverage", "lp_sensitivity_exact", "lp_sensitivity_upper", "lewis_weight")
_RATIO_KINDS = ("l2_leverage", "lp_sensitivity_exact", "lp_sensitivity_upper")

_SMOOTHING_FLOOR = 1e-12
_PLATEAU_WINDOW = 10
_UNBOUNDED_CUTOFF = 1e-12


def _check_p(p: float, lo: float = 1.0, hi: float = 2.0) -> float:
    p = float(p)
    if not (lo <= p <= hi) or not math.isfinite(p):
        raise ValueError(f"norm parameter must lie in [{lo}, {hi}], got {p}")
    return p


@dataclass(frozen=True)
class ScoreVector:
    """Per-row nonnegative scores with provenance.

    ``kind`` is one of ``l2_leverage``, ``lp_sensitivity_exact``,
    ``lp_sensitivity_upper``, ``lewis_weight``.  Ratio-valued kinds are
    bounded by 1 per row; the lp kinds carry the norm parameter ``p``.
    """

    values: np.ndarray
    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("scores must be a non-empty vector")
        if not np.all(np.isfinite(vals)):
            raise ValueError("scores must be finite")
        if np.any(vals < 0):
            raise ValueError("scores must be nonnegative")
        if self.kind in _RATIO_KINDS and np.any(vals > 1.0 + 1e-8):
            raise ValueError(f"{self.kind} scores must lie in [0, 1]")
        object.__setattr__(self, "values", np.minimum(vals, 1.0) if self.kind in _RATIO_KINDS else vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def total(self) -> float:
        return float(self.values.sum())


def save_scores(sv: ScoreVector, csv_path, meta_path=None, tol: float | None = None) -> None:
    """Write "index,score" CSV plus a sidecar JSON {kind, p, total, tol}."""
    csv_path = Path(csv_path)
    lines = ["index,score"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(sv.values)]
    csv_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.json")
    meta = {"kind": sv.kind, "p": sv.p, "total": sv.total, "tol": tol}
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="ascii")


def load_scores(csv_path, meta_path=None) -> ScoreVector:
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text(encoding="ascii"))
    lines = csv_path.read_text(encoding="ascii").strip().splitlines()
    if not lines or lines[0] != "index,score":
        raise ValueError(f"{csv_path}: expected 'index,score' header")
    values = np.array([float(line.split(",")[1]) for line in lines[1:]])
    return ScoreVector(values=values, kind=meta["kind"], p=meta["p"])


# ---------------------------------------------------------------- l2 leverage


def l2_leverage(a) -> ScoreVector:
    """Exact l2 leverage scores; sums to rank(A), zero rows score 0."""
    factor = orthonormal_basis(as_matrix(a))
    vals = np.einsum("ij,ij->i", factor.q, factor.q)
    return ScoreVector(values=vals, kind="l2_leverage")


def l2_relax_upper_bounds(a, p: float) -> ScoreVector:
    """(l2 leverage)^(p/2): pointwise valid upper bound on lp sensitivities for p in [1, 2]."""
    p = _check_p(p)
    lev = l2_leverage(a)
    return ScoreVector(values=lev.values ** (p / 2.0), kind="lp_sensitivity_upper", p=p)


# ------------------------------------------------------- exact lp sensitivity


def _nullspace_basis(a_row: np.ndarray) -> np.ndarray:
    """Orthonormal d x (d-1) basis of the hyperplane orthogonal to a_row."""
    d = a_row.size
    v = a_row / np.linalg.norm(a_row)
    u = v.copy()
    u[0] += math.copysign(1.0, v[0]) if v[0] != 0.0 else 1.0
    u /= np.linalg.norm(u)
    house = np.eye(d) - 2.0 * np.outer(u, u)
    # column 0 of the reflector is parallel to a_row; the rest span its nullspace
    return house[:, 1:]


def _weighted_ls(b: np.ndarray, c: np.ndarray, w: np.ndarray) -> np.ndarray:
    bw = b * w[:, None]
    gram = b.T @ bw
    rhs = -(bw.T @ c)
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        sw = np.sqrt(w)
        return np.linalg.lstsq(sw[:, None] * b, -sw * c, rcond=None)[0]


def _subgrad_polish(b, c, p, z0, obj0, steps=120):
    """Projected subgradient descent on sum |Bz + c|^p from z0; returns best seen."""
    z_best, obj_best = z0, obj0
    z = z0.copy()
    step0 = 0.1 * max(np.linalg.norm(z0), 1.0)
    for k in range(1, steps + 1):
        y = b @ z + c
        mag = np.abs(y)
        if p == 1.0:
            g = b.T @ np.sign(y)
        else:
            g = b.T @ (p * np.sign(y) * np.maximum(mag, 1e-300) ** (p - 1.0))
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        z = z - (step0 / math.sqrt(k)) * g / gn
        obj = float((np.abs(b @ z + c) ** p).sum())
        if obj < obj_best:
            z_best, obj_best = z.copy(), obj
    return z_best, obj_best


def _min_lp_on_slice(b: np.ndarray, c: np.ndarray, p: float, tol: float, max_iters: int) -> float:
    """Minimize sum |Bz + c|^p over z.

    Smoothed IRLS: each step minimizes the weighted least squares
    majorizer of sum (y^2 + eps)^(p/2), which never increases it for
    p <= 2; eps is lowered in stages down to the smoothing floor.
    Convergence is declared when the relative objective change stays below
    ``tol`` for 10 consecutive iterations at the floor.
    """
    if b.shape[1] == 0:
        return float((np.abs(c) ** p).sum())
    z = _weighted_ls(b, c, np.ones(b.shape[0]))
    y = b @ z + c
    obj = float((np.abs(y) ** p).sum())
    best_z, best_obj = z, obj
    m2_floor = float((y * y).sum()) ** (p / 2.0)  # l2 optimum bounds the lp optimum below
    if p == 2.0:
        return obj
    eps = max(float(np.mean(y * y)) * 1e-3, _SMOOTHING_FLOOR)
    plateau = 0
    prev = obj
    for _ in range(max_iters):
        w = (y * y + eps) ** ((p - 2.0) / 2.0)
        z = _weighted_ls(b, c, w)
        y = b @ z + c
        obj = float((np.abs(y) ** p).sum())
        if obj < best_obj:
            best_z, best_obj = z, obj
        rel = abs(prev - obj) / max(best_obj, 1e-300)
        prev = obj
        at_floor = eps <= _SMOOTHING_FLOOR
        if at_floor:
            plateau = plateau + 1 if rel < tol else 0
            if plateau >= _PLATEAU_WINDOW:
                return best_obj
        elif rel < max(tol, 1e-7):
            plateau += 1
            if plateau >= 3:
                eps = max(eps * 1e-2, _SMOOTHING_FLOOR)
                plateau = 0
        else:
            plateau = 0
    if p <= 1.2:
        _, polished = _subgrad_polish(b, c, p, best_z, best_obj)
        if polished >= best_obj * (1.0 - 10.0 * tol):
            return min(best_obj, polished)
        best_obj = min(best_obj, polished)
    raise ConvergenceError(
        f"row program did not converge within {max_iters} iterations",
        lower=m2_floor,
        upper=best_obj,
    )


def exact_lp_sensitivity_row(a, p: float, i: int, tol: float = 1e-9, max_iters: int = 10000) -> float:
    """Exact lp sensitivity of row i: 1 / min{||Ax||_p^p : a_i x = 1}.

    Returns a value in [0, 1]; zero rows score 0.  Raises
    :class:`ConvergenceError` (carrying the best bracketing interval) if the
    row program does not converge.
    """
    arr = as_matrix(a)
    p = _check_p(p)
    row = arr[i]
    if not row.any():
        return 0.0
    x0 = row / (row @ row)
    basis = _nullspace_basis(row)
    opt = _min_lp_on_slice(arr @ basis, arr @ x0, p, tol, max_iters)
    return float(min(1.0, 1.0 / opt))


def exact_lp_sensitivities(a, p: float, tol: float = 1e-9, max_iters: int = 10000) -> ScoreVector:
    """Exact lp sensitivities of every row; rows are solved independently."""
    arr = as_matrix(a)
    p = _check_p(p)
    vals = np.empty(arr.shape[0])
    for i in range(arr.shape[0]):
        try:
            vals[i] = exact_lp_sensitivity_row(arr, p, i, tol=tol, max_iters=max_iters)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"row {i}: {exc}", lower=exc.lower, upper=exc.upper
            ) from exc
    return ScoreVector(values=vals, kind="lp_sensitivity_exact", p=p)


# -------------------------------------------------------------- lewis weights


def lewis_weights(a, p: float, iters: int = 100, tol: float = 1e-8) -> ScoreVector:
    """Lewis weights via the fixed point w_i = (a_i (A^T W^(1-2/p) A)^-1 a_i^T)^(p/2).

    Requires full column rank.  For p = 2 the definition coincides with l2
    leverage, so the iteration is skipped.  Converges geometrically for
    p in [1, 2); convergence is declared when the max relative change per
    round drops below ``tol``.
    """
    arr = as_matrix(a)
    p = _check_p(p)
    lev = l2_leverage(arr)
    if p == 2.0:
        return ScoreVector(values=lev.values, kind="lewis_weight", p=p)
    d = arr.shape[1]
    if lev.total < d - 1e-6:
        raise ValueError("lewis_weights requires full column rank")
    nonzero = np.any(arr != 0.0, axis=1)  # zero rows keep Lewis weight 0
    rows = arr[nonzero]
    w = np.maximum(lev.values[nonzero], 1e-300)
    exponent = 1.0 - 2.0 / p
    for _ in range(iters):
        scaled = rows * (w**exponent)[:, None]
        gram = scaled.T @ rows
        try:
            solved = np.linalg.solve(gram, rows.T)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular reweighted Gram matrix") from None
        quad = np.einsum("ij,ji->i", rows, solved)
        w_new = np.maximum(quad, 0.0) ** (p / 2.0)
        rel = float(np.max(np.abs(w_new - w) / np.maximum(w, 1e-300)))
        w = w_new
        if rel < tol:
            out = np.zeros(arr.shape[0])
            out[nonzero] = w
            return ScoreVector(values=out, kind="lewis_weight", p=p)
    raise ConvergenceError(f"Lewis fixed point did not converge in {iters} rounds")


# ---------------------------------------------------------------- mu estimate


@dataclass(frozen=True)
class MuEstimate:
    """Multi-start lower-bound estimate of the one-sidedness parameter.

    ``mu_hat`` is the best ratio ||Ax||_p^p / ||(Ax)^-||_p^p found by local
    ascent; it is a lower bound on the true parameter.  ``unbounded`` is set
    when some explored direction leaves essentially no negative mass, in
    which case ``mu_hat`` is infinite.  Finite estimates are always >= 2
    because each start is explored with both signs and the two signed ratios
    have harmonic mean 2.
    """

    mu_hat: float
    witness: np.ndarray
    restarts_used: int
    p: float
    unbounded: bool = False


def _mu_ratio(t: np.ndarray, p: float) -> tuple[float, float]:
    mass = float((np.abs(t) ** p).sum())
    neg = float((np.abs(t[t < 0.0]) ** p).sum())
    return mass, neg


def mu_estimate(a, p: float = 1.0, restarts: int = 20, steps: int = 100, seed: Seed = 0) -> MuEstimate:
    """Estimate mu(A) by projected gradient ascent on the mass ratio.

    Starts from ``restarts`` Gaussian directions plus every coordinate
    direction; each start is evaluated with both signs.  The result is a
    lower bound on the true parameter; callers that feed it into sampling
    probabilities should multiply by a safety factor.
    """
    arr = as_matrix(a)
    p = _check_p(p)
    if not arr.any():
        raise ValueError("mu is undefined for the zero matrix")
    if restarts < 1:
        raise ValueError("need restarts >= 1")
    n, d = arr.shape
    rng = child_rng(seed)
    starts = [rng.standard_normal(d) for _ in range(restarts)]
    starts += [e for e in np.eye(d)]

    best_ratio = -np.inf
    best_x = None

    def consider(x):
        nonlocal best_ratio, best_x
        norm = np.linalg.norm(x)
        if norm == 0.0:
            return None
        x = x / norm
        t = arr @ x
        mass, neg = _mu_ratio(t, p)
        if mass <= 0.0:
            return None
        if neg < _UNBOUNDED_CUTOFF * mass:
            return ("unbounded", x)
        ratio = mass / neg
        if ratio > best_ratio:
            best_ratio, best_x = ratio, x.copy()
        return ratio, x

    for x0 in starts:
        for sign in (1.0, -1.0):
            state = consider(sign * x0)
            if state is None:
                continue
            if state[0] == "unbounded":
                return MuEstimate(
                    mu_hat=math.inf, witness=state[1], restarts_used=restarts, p=p, unbounded=True
                )
            ratio, x = state
            for k in range(1, steps + 1):
                t = arr @ x
                mass, neg = _mu_ratio(t, p)
                mag = np.maximum(np.abs(t), 1e-300)
                if p == 1.0:
                    grad_mass = arr.T @ np.sign(t)
                    grad_neg = -(arr.T @ np.where(t < 0.0, 1.0, 0.0))
                else:
                    grad_mass = arr.T @ (p * np.sign(t) * mag ** (p - 1.0))
                    grad_neg = -(arr.T @ (p * np.where(t < 0.0, mag ** (p - 1.0), 0.0)))
                g = grad_mass / mass - grad_neg / neg  # ascent on log ratio
                g -= (g @ x) * x
                gn = np.linalg.norm(g)
                if gn < 1e-14:
                    break
                eta = 0.5 / math.sqrt(k)
                improved = False
                for _ in range(5):  # backtrack on ratio decrease
                    cand = x + eta * g / gn
                    state = consider(cand)
                    if state is None:
                        eta /= 2.0
                        continue
                    if state[0] == "unbounded":
                        return MuEstimate(
                            mu_hat=math.inf,
                            witness=state[1],
                            restarts_used=restarts,
                            p=p,
                            unbounded=True,
                        )
                    if state[0] >= ratio:
                        ratio, x = state
                        improved = True
                        break
                    eta /= 2.0
                if not improved:
                    break
    return MuEstimate(
        mu_hat=best_ratio, witness=best_x, restarts_used=restarts, p=p, unbounded=False
    )
