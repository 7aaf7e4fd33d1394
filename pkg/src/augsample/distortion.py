"""Empirical worst-case relative error of a weighted sample.

The quantity of interest is the supremum over directions x of

    R(x) = |f_w(sampled rows, x) - f(all rows, x)| / f(all rows, x)

for a per-row loss h.  The true supremum is not computable in general, so
this module reports search lower bounds: a random-direction probe, a
multistart projected subgradient ascent that sharpens it, and, for d <= 3
with a homogeneous loss, a dense angular grid whose maximum is reported as
certified at its resolution.  Directions with f below 1e-300 are skipped
and counted; if more than half of the probes are skipped the report flags a
one-sided instance.

Also checks rank preservation of a sample against row blocks, the verdict
used by the lower-bound experiment.
"""

import math
from dataclasses import dataclass

import numpy as np

from .matrix import as_matrix, rank
from .rng import Seed, child_rng
from .sampling import Loss, WeightedSample, pointwise, pointwise_grad

_DEGENERATE = 1e-300
_CHUNK = 256

_GRID_DEFAULTS = {1: 2, 2: 100_000, 3: 1_000_000}


@dataclass(frozen=True)
class DistortionReport:
    """Best distortion found, with the witness direction that attains it.

    ``max_ratio`` is a lower bound on the true supremum; ``certified`` is
    true only for grid search in d <= 3 and then ``resolution`` records the
    grid size used.  Recomputing the ratio at ``witness`` reproduces
    ``max_ratio`` exactly up to floating-point evaluation.
    """

    max_ratio: float
    witness: np.ndarray
    strategy: str
    evaluations: int
    certified: bool = False
    resolution: int | None = None
    skipped: int = 0
    one_sided: bool = False
    seed: Seed | None = None


def distortion_ratio(a, sample: WeightedSample, loss: Loss, x) -> float:
    """R(x) for a single direction; nan if the full loss vanishes."""
    arr = as_matrix(a)
    x = np.asarray(x, dtype=float)
    full = float(pointwise(loss, arr @ x).sum())
    if full < _DEGENERATE:
        return math.nan
    sub = arr[sample.indices] @ x
    weighted = float((sample.weights * pointwise(loss, sub)).sum())
    return abs(weighted - full) / full


def _batched_ratios(arr, sample, loss, dirs):
    """Ratios for a d x k block of directions; nan marks skipped columns."""
    t_full = arr @ dirs
    full = pointwise(loss, t_full).sum(axis=0)
    t_sub = arr[sample.indices] @ dirs
    weighted = (sample.weights[:, None] * pointwise(loss, t_sub)).sum(axis=0)
    ok = full >= _DEGENERATE
    out = np.full(dirs.shape[1], math.nan)
    out[ok] = np.abs(weighted[ok] - full[ok]) / full[ok]
    return out


def _scan_directions(arr, sample, loss, dir_blocks):
    best = -1.0
    witness = None
    skipped = 0
    total = 0
    for dirs in dir_blocks:
        ratios = _batched_ratios(arr, sample, loss, dirs)
        total += dirs.shape[1]
        bad = np.isnan(ratios)
        skipped += int(bad.sum())
        if bad.all():
            continue
        ratios = np.where(bad, -1.0, ratios)
        j = int(np.argmax(ratios))  # argmax takes the lowest index on ties
        if ratios[j] > best:
            best = float(ratios[j])
            witness = dirs[:, j].copy()
    return best, witness, skipped, total


def distortion_random(a, sample: WeightedSample, loss: Loss, num_dirs: int, seed: Seed = 0) -> DistortionReport:
    """Max ratio over ``num_dirs`` Gaussian directions (scale is irrelevant
    for homogeneous losses)."""
    arr = as_matrix(a)
    if num_dirs < 1:
        raise ValueError(f"need num_dirs >= 1, got {num_dirs}")
    rng = child_rng(seed)
    d = arr.shape[1]

    def blocks():
        left = num_dirs
        while left > 0:
            k = min(_CHUNK, left)
            left -= k
            yield rng.standard_normal((d, k))

    best, witness, skipped, total = _scan_directions(arr, sample, loss, blocks())
    if witness is None:
        raise ValueError("all probe directions were degenerate (full loss ~ 0)")
    return DistortionReport(
        max_ratio=best,
        witness=witness,
        strategy="random_directions",
        evaluations=total,
        skipped=skipped,
        one_sided=skipped * 2 > total,
        seed=seed,
    )


def distortion_ascent(
    a,
    sample: WeightedSample,
    loss: Loss,
    restarts: int,
    steps: int,
    seed: Seed = 0,
    init=None,
) -> DistortionReport:
    """Projected subgradient ascent on R(x) from random starts.

    ``init`` adds an extra start (typically the random probe's witness); the
    result then never falls below the ratio at that start.  Subgradients use
    the convention h'(0) = 0 at kinks, steps follow c/sqrt(k) with
    backtracking when a step would decrease the ratio.
    """
    arr = as_matrix(a)
    if restarts < 1:
        raise ValueError(f"need restarts >= 1, got {restarts}")
    n, d = arr.shape
    sub = arr[sample.indices]
    w = sample.weights

    evaluations = 0
    skipped = 0

    def ratio_at(x):
        nonlocal evaluations, skipped
        evaluations += 1
        t = arr @ x
        full = float(pointwise(loss, t).sum())
        if full < _DEGENERATE:
            skipped += 1
            return None
        tw = sub @ x
        weighted = float((w * pointwise(loss, tw)).sum())
        return (abs(weighted - full) / full, t, tw, full, weighted)

    starts = []
    if init is not None:
        x0 = np.asarray(init, dtype=float)
        starts.append(x0 / np.linalg.norm(x0))
    for r in range(restarts):
        g = child_rng(seed, r).standard_normal(d)
        starts.append(g / np.linalg.norm(g))

    best = -1.0
    best_x = None
    for x in starts:
        state = ratio_at(x)
        if state is None:
            continue
        cur = state[0]
        if cur > best:
            best, best_x = cur, x.copy()
        for k in range(1, steps + 1):
            ratio, t, tw, full, weighted = state
            s = 1.0 if weighted >= full else -1.0
            grad_full = arr.T @ pointwise_grad(loss, t)
            grad_w = sub.T @ (w * pointwise_grad(loss, tw))
            g = (s * (grad_w - grad_full) - ratio * grad_full) / full
            g -= (g @ x) * x
            gn = np.linalg.norm(g)
            if gn < 1e-15:
                break
            eta = 0.5 / math.sqrt(k)
            moved = False
            for _ in range(5):
                cand = x + eta * g / gn
                cand /= np.linalg.norm(cand)
                cand_state = ratio_at(cand)
                if cand_state is not None and cand_state[0] >= ratio:
                    x, state = cand, cand_state
                    moved = True
                    break
                eta /= 2.0
            if not moved:
                break
            if state[0] > best:
                best, best_x = state[0], x.copy()
    if best_x is None:
        raise ValueError("all ascent starts were degenerate (full loss ~ 0)")
    return DistortionReport(
        max_ratio=best,
        witness=best_x,
        strategy="multistart_ascent",
        evaluations=evaluations,
        skipped=skipped,
        one_sided=skipped * 2 > evaluations,
        seed=seed,
    )


def _unit_grid(d: int, resolution: int) -> np.ndarray:
    """Deterministic near-uniform directions on the unit sphere, d x resolution."""
    if d == 1:
        return np.array([[1.0, -1.0]])
    if d == 2:
        theta = 2.0 * math.pi * np.arange(resolution) / resolution
        return np.vstack([np.cos(theta), np.sin(theta)])
    # Fibonacci sphere
    k = np.arange(resolution)
    z = 1.0 - 2.0 * (k + 0.5) / resolution
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = k * (math.pi * (3.0 - math.sqrt(5.0)))
    return np.vstack([r * np.cos(phi), r * np.sin(phi), z])


def grid_certify(a, sample: WeightedSample, loss: Loss, resolution: int | None = None) -> DistortionReport:
    """Brute-force maximum over a dense angular grid; d <= 3 only.

    Valid only for homogeneous losses, whose ratio is constant along rays,
    so the unit sphere covers every direction.  Default resolutions are
    1e5 points for d = 2 and 1e6 for d = 3.
    """
    arr = as_matrix(a)
    d = arr.shape[1]
    if d > 3:
        raise ValueError(f"grid certification supports d <= 3, got d={d}")
    if not loss.homogeneous:
        raise ValueError("grid certification requires a homogeneous loss (abs_p or relu_p)")
    resolution = int(resolution) if resolution else _GRID_DEFAULTS[d]
    if resolution < 1:
        raise ValueError("resolution must be positive")
    grid = _unit_grid(d, resolution)

    def blocks():
        for start in range(0, grid.shape[1], 4096):
            yield grid[:, start : start + 4096]

    best, witness, skipped, total = _scan_directions(arr, sample, loss, blocks())
    if witness is None:
        raise ValueError("all grid directions were degenerate (full loss ~ 0)")
    return DistortionReport(
        max_ratio=best,
        witness=witness,
        strategy="grid_certified",
        evaluations=total,
        certified=True,
        resolution=grid.shape[1],
        skipped=skipped,
        one_sided=skipped * 2 > total,
    )


def rank_preserved(a, sample: WeightedSample, blocks=None, tol: float = 1e-10) -> list[bool]:
    """Per block: does the sampled submatrix keep the block's full rank?

    Each block is a set of row indices; its rank is taken on the columns
    where the block has any nonzero entry.  With no blocks given the whole
    matrix is one block.
    """
    arr = as_matrix(a)
    if blocks is None:
        blocks = [np.arange(arr.shape[0])]
    out = []
    sampled = np.asarray(sample.indices, dtype=np.int64)
    for block_rows in blocks:
        block_rows = np.asarray(block_rows, dtype=np.int64)
        if block_rows.size == 0:
            raise ValueError("empty block")
        block = arr[block_rows]
        cols = np.flatnonzero(np.any(block != 0.0, axis=0))
        if cols.size == 0:
            out.append(True)  # zero block has rank 0 in any subsample
            continue
        want = rank(block[:, cols], tol)
        taken = np.intersect1d(sampled, block_rows, assume_unique=True)
        got = rank(arr[taken][:, cols], tol) if taken.size else 0
        out.append(got == want)
    return out
