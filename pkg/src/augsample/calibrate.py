"""Oversampling parameter from (epsilon, delta) via the calibrated constant.

The theory fixes only the shape of the oversampling parameter, not its
constant, so the repo carries a calibration file with a single constant
``c_alpha`` fixed once by a pilot run (scripts/run_pilot.py) against the
acceptance instances.  Two shapes are exposed:

    subspace:  alpha = c * (log(d mu log(1/delta) / eps) * log^2 d + log(1/delta)) / eps^2
    logistic:  alpha = c * (log^3(d mu log(1/delta) / eps) + log(1/delta)) / eps^2

Both use natural logarithms.  The calibration file also records the date of
the pilot, a fingerprint of the pilot instance, and the pilot's derived
experiment settings.
"""

import hashlib
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

_CAL_RESOURCE = "calibration.json"


def subspace_alpha_shape(epsilon: float, delta: float, d: int, mu: float) -> float:
    _check_eps_delta(epsilon, delta)
    inner = d * mu * math.log(1.0 / delta) / epsilon
    return (math.log(inner) * math.log(d) ** 2 + math.log(1.0 / delta)) / epsilon**2


def logistic_alpha_shape(epsilon: float, delta: float, d: int, mu: float) -> float:
    _check_eps_delta(epsilon, delta)
    inner = d * mu * math.log(1.0 / delta) / epsilon
    return (math.log(inner) ** 3 + math.log(1.0 / delta)) / epsilon**2


def subspace_alpha(epsilon, delta, d, mu, c_alpha) -> float:
    return c_alpha * subspace_alpha_shape(epsilon, delta, d, mu)


def logistic_alpha(epsilon, delta, d, mu, c_alpha) -> float:
    return c_alpha * logistic_alpha_shape(epsilon, delta, d, mu)


def _check_eps_delta(epsilon, delta):
    if not (0.0 < epsilon < 0.3):
        raise ValueError(f"need epsilon in (0, 3/10), got {epsilon}")
    if not (0.0 < delta < 0.3):
        raise ValueError(f"need delta in (0, 3/10), got {delta}")


def instance_fingerprint(a: np.ndarray) -> str:
    """Stable hex digest of a matrix's exact bytes."""
    arr = np.ascontiguousarray(np.asarray(a, dtype=float))
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()[:16]


def load_calibration(path=None) -> dict:
    """Read the calibration file; defaults to the copy shipped with the package."""
    if path is not None:
        return json.loads(Path(path).read_text(encoding="ascii"))
    ref = resources.files(__package__).joinpath(_CAL_RESOURCE)
    return json.loads(ref.read_text(encoding="ascii"))
