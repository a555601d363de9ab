"""Local probabilistic model of one photon-pair detection.

Each emitted pair carries a hidden polarization angle pair (s1, s2) with
s2 = s1 + pi/2.  A station with polarizer orientation ``a`` sees the local
misalignment angle zeta = a - s and produces

* an outcome x in {-1, +1} with the Malus-law probability
  p(x | zeta) = (1 + x cos 2 zeta) / 2, and
* a detection delay drawn uniformly from [0, T(zeta)], where the delay
  timescale is T(zeta) = t0 * |sin 2 zeta|**d.

Everything here is an elementary function of zeta; the station machinery
and the coincidence bookkeeping live in :mod:`eprsim.events` and
:mod:`eprsim.coincidence`.  All angles are radians, all times are in the
same unit as ``t0`` (nanoseconds by convention).

Sampling functions come in two forms: ``sample_*`` draws from a
``numpy.random.Generator``, and ``*_from_uniform`` is the underlying
deterministic map from a uniform variate in [0, 1).  The event generator
uses the ``*_from_uniform`` maps on pre-allocated variate blocks so that
scalar and vectorized paths share one definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "ModelParams",
    "HiddenPair",
    "Setting",
    "normalize_angle",
    "outcome_prob",
    "outcome_from_uniform",
    "sample_outcome",
    "delay_timescale",
    "delay_from_uniform",
    "sample_delay",
    "hidden_from_uniform",
    "sample_hidden_pair",
]

# A polarizer setting is a plain angle in radians.  Every quantity derived
# from it depends on the value mod pi only (polarization is axis-like).
Setting = float


@dataclass(frozen=True)
class ModelParams:
    """The three knobs of the model.

    d       dimensionless exponent of the delay timescale (>= 0)
    t0      maximum delay timescale, time units (> 0)
    window  coincidence window W, same time units (>= 0)
    """

    d: float = 4.0
    t0: float = 1000.0
    window: float = 10.0

    def __post_init__(self):
        if not (self.t0 > 0):
            raise ValidationError(f"t0 must be > 0, got {self.t0}")
        if not (self.window >= 0):
            raise ValidationError(f"window must be >= 0, got {self.window}")
        if not (self.d >= 0):
            raise ValidationError(f"d must be >= 0, got {self.d}")


@dataclass(frozen=True)
class HiddenPair:
    """Hidden polarization angles carried by one emitted pair.

    s2 is orthogonal to s1 by construction: s2 = s1 + pi/2 (mod 2 pi).
    """

    s1: float
    s2: float


def normalize_angle(angle):
    """Reduce an angle to the fundamental polarization domain [0, pi).

    Only needed for reporting; the trigonometric kernels below use 2*zeta
    and are pi-periodic automatically.
    """
    return np.mod(angle, np.pi)


def outcome_prob(x: int, zeta):
    """Malus-law probability of outcome ``x`` at misalignment ``zeta``.

    p(x | zeta) = (1 + x cos 2 zeta) / 2.  The two outcome probabilities
    sum to 1.0 exactly in floating point (see tests).
    """
    if x not in (-1, 1):
        raise ValidationError(f"outcome must be -1 or +1, got {x!r}")
    return (1.0 + x * np.cos(2.0 * np.asarray(zeta, dtype=float))) * 0.5


def outcome_from_uniform(u, zeta):
    """Map a uniform variate to an outcome: +1 iff u < p(+1 | zeta)."""
    return np.where(u < outcome_prob(+1, zeta), 1, -1).astype(np.int8)


def sample_outcome(zeta, rng: np.random.Generator):
    """Draw an outcome in {-1, +1} with the Malus-law probability."""
    u = rng.random(np.shape(zeta)) if np.ndim(zeta) else rng.random()
    out = outcome_from_uniform(u, zeta)
    return out if np.ndim(zeta) else int(out)


def delay_timescale(zeta, params: ModelParams):
    """Delay timescale T(zeta) = t0 * |sin 2 zeta|**d, in [0, t0].

    d = 0 means no delay dependence at all: T == t0 everywhere, including
    the points where sin 2 zeta = 0 (the 0**0 = 1 convention).
    """
    zeta = np.asarray(zeta, dtype=float)
    if params.d == 0:
        return np.broadcast_to(np.float64(params.t0), zeta.shape).copy() if zeta.shape else np.float64(params.t0)
    return params.t0 * np.abs(np.sin(2.0 * zeta)) ** params.d


def delay_from_uniform(u, zeta, params: ModelParams):
    """Map a uniform variate to a delay, uniform on [0, T(zeta)].

    Where T(zeta) = 0 the density degenerates to a point mass and the
    delay is exactly 0 for every u.
    """
    return np.asarray(u, dtype=float) * delay_timescale(zeta, params)


def sample_delay(zeta, params: ModelParams, rng: np.random.Generator):
    """Draw a detection delay, uniform on [0, T(zeta)]."""
    u = rng.random(np.shape(zeta)) if np.ndim(zeta) else rng.random()
    out = delay_from_uniform(u, zeta, params)
    return out if np.ndim(zeta) else float(out)


def hidden_from_uniform(u):
    """Map a uniform variate to the hidden angle s1, uniform on [0, 2 pi)."""
    return np.asarray(u, dtype=float) * (2.0 * np.pi)


def sample_hidden_pair(rng: np.random.Generator) -> HiddenPair:
    """Draw one hidden pair: s1 uniform on [0, 2 pi), s2 = s1 + pi/2."""
    s1 = float(hidden_from_uniform(rng.random()))
    s2 = math.fmod(s1 + 0.5 * math.pi, 2.0 * math.pi)
    return HiddenPair(s1=s1, s2=s2)
