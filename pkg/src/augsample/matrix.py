"""Dense matrix storage, file I/O, synthetic generators, and factorizations.

A matrix is a plain two-dimensional float64 numpy array in row-major order.
Ingestion enforces the storage contract: at least one row and one column,
and every entry finite (NaN/Inf rejected).  All functions here are pure and
matrices are treated as immutable after construction, so they are safe to
share across threads for read-only row-parallel work.  Generators are
deterministic given their seed; parallel trials must use distinct derived
seeds, see :mod:`augsample.rng`.

File formats:

* CSV: one row per line, comma-separated decimal literals, no header.
  Numbers are printed with 17 significant digits so doubles round-trip.
* LPSM binary: magic bytes ``LPSM``, then unsigned 64-bit little-endian row
  and column counts, then the entries as IEEE-754 binary64 little-endian,
  row-major.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MatrixFormatError
from .rng import Seed, child_rng

_LPSM_MAGIC = b"LPSM"
_LPSM_HEADER = struct.Struct("<4sQQ")

FORMATS = ("csv", "lpsm")


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a contiguous n x d float64 array."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"empty {name}: shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"non-finite value in {name} at row {i + 1}, column {j + 1}")
    return np.ascontiguousarray(arr)


def _infer_format(path) -> str:
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in FORMATS:
        return suffix
    raise ValueError(f"cannot infer format from {path!r}; pass fmt explicitly")


def load_matrix(path, fmt: str | None = None) -> np.ndarray:
    """Load a matrix from ``path`` in the given format (inferred from the suffix if None)."""
    fmt = fmt or _infer_format(path)
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "lpsm":
        return _load_lpsm(path)
    raise ValueError(f"unknown format {fmt!r}")


def save_matrix(a, path, fmt: str | None = None) -> None:
    """Write a matrix so that loading it back reproduces the data."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("empty matrix")
    arr = as_matrix(arr)
    fmt = fmt or _infer_format(path)
    if fmt == "csv":
        lines = [",".join(f"{v:.17g}" for v in row) for row in arr]
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
    elif fmt == "lpsm":
        header = _LPSM_HEADER.pack(_LPSM_MAGIC, arr.shape[0], arr.shape[1])
        Path(path).write_bytes(header + arr.astype("<f8").tobytes(order="C"))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _load_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise MatrixFormatError(
                    f"{path}: row {lineno} has {len(fields)} fields, expected {width}"
                )
            values = []
            for col, field in enumerate(fields, start=1):
                try:
                    v = float(field)
                except ValueError:
                    raise MatrixFormatError(
                        f"{path}: row {lineno}, column {col}: cannot parse {field.strip()!r}"
                    ) from None
                if not np.isfinite(v):
                    raise MatrixFormatError(
                        f"{path}: row {lineno}, column {col}: non-finite value {field.strip()!r}"
                    )
                values.append(v)
            rows.append(values)
    if not rows:
        raise MatrixFormatError(f"{path}: empty matrix file")
    return np.array(rows, dtype=float)


def _load_lpsm(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _LPSM_HEADER.size:
        raise MatrixFormatError(f"{path}: truncated LPSM header")
    magic, n, d = _LPSM_HEADER.unpack_from(blob)
    if magic != _LPSM_MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}, expected {_LPSM_MAGIC!r}")
    if n == 0 or d == 0:
        raise MatrixFormatError(f"{path}: empty matrix ({n} x {d})")
    expected = _LPSM_HEADER.size + 8 * n * d
    if len(blob) != expected:
        raise MatrixFormatError(
            f"{path}: payload is {len(blob)} bytes, expected {expected} for {n} x {d}"
        )
    data = np.frombuffer(blob, dtype="<f8", offset=_LPSM_HEADER.size).reshape(n, d)
    if not np.all(np.isfinite(data)):
        i, j = np.argwhere(~np.isfinite(data))[0]
        raise MatrixFormatError(f"{path}: non-finite value at row {i + 1}, column {j + 1}")
    return data.astype(float)


# ---------------------------------------------------------------- generators


def gen_gaussian(n: int, d: int, seed: Seed) -> np.ndarray:
    """n x d matrix of i.i.d. standard normal entries, reproducible from seed."""
    if not 1 <= d <= n:
        raise ValueError(f"need n >= d >= 1, got n={n}, d={d}")
    return child_rng(seed).standard_normal((n, d))


def gen_stacked_identity(d: int, copies: int) -> np.ndarray:
    """The d x d identity stacked ``copies`` times: row k*d + j equals e_j."""
    if d < 1 or copies < 1:
        raise ValueError(f"need d >= 1 and copies >= 1, got d={d}, copies={copies}")
    return np.tile(np.eye(d), (copies, 1))


def gen_heavy_tail(n: int, d: int, dof: float, seed: Seed) -> np.ndarray:
    """n x d matrix of i.i.d. Student-t entries; dof=1 gives Cauchy rows.

    A stress instance whose row importances are far from uniform: small dof
    concentrates leverage on a few huge rows.
    """
    if not 1 <= d <= n:
        raise ValueError(f"need n >= d >= 1, got n={n}, d={d}")
    if dof < 1:
        raise ValueError(f"need dof >= 1, got {dof}")
    return child_rng(seed).standard_t(dof, size=(n, d))


# ------------------------------------------------------------ factorizations


@dataclass(frozen=True)
class OrthonormalFactor:
    """Orthonormal basis Q of range(A) with the map back to basis coordinates.

    ``coord_map`` is the r x d matrix sending a row vector y to its
    coefficient vector in the Q basis; for in-sample rows these coefficients
    reproduce the corresponding row of Q, and their squared norm is the row's
    l2 leverage.  Out-of-sample rows get the leverage they would have if
    appended, which is how row scores are evaluated off-sample.
    """

    q: np.ndarray
    coord_map: np.ndarray
    rank: int

    def row_coords(self, rows: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(rows, dtype=float)) @ self.coord_map.T


def orthonormal_basis(a, rank_tol: float = 1e-10) -> OrthonormalFactor:
    """SVD-based orthonormal factor; numerical rank at ``rank_tol`` * sigma_max."""
    arr = as_matrix(a)
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        r = int(np.count_nonzero(s > rank_tol * s[0]))
    coord_map = vt[:r] / s[:r, None] if r else np.zeros((0, arr.shape[1]))
    return OrthonormalFactor(q=u[:, :r], coord_map=coord_map, rank=r)


def rank(a, tol: float = 1e-10) -> int:
    """Number of singular values above ``tol`` * sigma_max."""
    if tol <= 0:
        raise ValueError(f"need tol > 0, got {tol}")
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or min(arr.shape) == 0:
        return 0
    s = np.linalg.svd(arr, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))
