"""Time-tagged two-station event generation.

One simulated run emits ``n_pairs`` photon pairs.  For each pair the two
stations independently choose a polarizer setting from their own lists,
apply the local model of :mod:`eprsim.model`, and record a detection event
``emission_time + delay`` on their own clock.  Every photon is detected
(unit efficiency): the model under study is purely a coincidence-time
mechanism, so detector losses are deliberately absent.

Randomness discipline: each pair consumes a fixed number of uniform
variates taken from a counter-based generator keyed by ``(seed,
chunk_index)``, where pairs are grouped in fixed-size chunks.  The variates
a pair sees therefore depend only on ``(seed, pair_id)``, never on
generation order, so runs are reproducible bit-for-bit for any worker
count and :func:`generate_pair` can rebuild any single pair in isolation.

Time tags are quantized to ``10**-TIME_TAG_DECIMALS`` time units
(micro-nanoseconds by default), the resolution of the on-disk tag format;
this makes in-memory logs and round-tripped files identical.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ValidationError
from .model import ModelParams, Setting, delay_from_uniform, hidden_from_uniform, outcome_from_uniform

__all__ = [
    "DetectionEvent",
    "EmissionSpec",
    "ExperimentConfig",
    "StationStream",
    "EventLog",
    "generate_pair",
    "run_experiment",
    "TIME_TAG_DECIMALS",
    "DRAWS_PER_PAIR",
]

# Resolution of recorded time tags, in decimal digits after the point.
TIME_TAG_DECIMALS = 6

# Fixed per-pair uniform variate layout.  Column roles:
#   0 hidden angle  1 setting choice st.1  2 setting choice st.2
#   3 outcome st.1  4 outcome st.2         5 delay st.1
#   6 delay st.2    7 emission inter-arrival (Poisson only)
DRAWS_PER_PAIR = 8
_COL_HIDDEN, _COL_SET1, _COL_SET2, _COL_OUT1, _COL_OUT2, _COL_DELAY1, _COL_DELAY2, _COL_EMIT = range(8)

# Pairs per generator chunk.  Small enough that rebuilding one pair is
# cheap, large enough that per-chunk generator setup is negligible.
CHUNK_PAIRS = 4096

_MAX_SEED = 2**64


@dataclass(frozen=True)
class DetectionEvent:
    """One recorded detection at one station."""

    station: int
    pair_id: int
    setting_index: int
    outcome: int
    time_tag: float


@dataclass(frozen=True)
class EmissionSpec:
    """Emission-time process: regular spacing or Poisson arrivals."""

    mode: str
    interval: float | None = None
    rate: float | None = None

    def __post_init__(self):
        if self.mode == "regular":
            if self.interval is None or not (self.interval > 0):
                raise ValidationError(f"regular emission needs interval > 0, got {self.interval}")
        elif self.mode == "poisson":
            if self.rate is None or not (self.rate > 0):
                raise ValidationError(f"poisson emission needs rate > 0, got {self.rate}")
        else:
            raise ValidationError(f"unknown emission mode {self.mode!r}")

    @classmethod
    def regular(cls, interval: float) -> "EmissionSpec":
        return cls(mode="regular", interval=float(interval))

    @classmethod
    def poisson(cls, rate: float) -> "EmissionSpec":
        return cls(mode="poisson", rate=float(rate))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run."""

    params: ModelParams = field(default_factory=ModelParams)
    settings1: tuple[Setting, ...] = (0.0, np.pi / 4)
    settings2: tuple[Setting, ...] = (np.pi / 8, 3 * np.pi / 8)
    n_pairs: int = 10**6
    seed: int = 42
    emission: EmissionSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "settings1", tuple(float(a) for a in self.settings1))
        object.__setattr__(self, "settings2", tuple(float(a) for a in self.settings2))
        if self.n_pairs < 1:
            raise ValidationError(f"n_pairs must be >= 1, got {self.n_pairs}")
        if not self.settings1 or not self.settings2:
            raise ValidationError("both setting lists must be non-empty")
        if not isinstance(self.seed, (int, np.integer)) or not (0 <= int(self.seed) < _MAX_SEED):
            raise ValidationError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")

    def resolved_emission(self) -> EmissionSpec:
        """Emission process, defaulting to regular spacing 10 * t0.

        The default keeps consecutive pairs from interleaving within any
        window up to t0, so per-pair and stream-based coincidence
        selection agree.
        """
        if self.emission is not None:
            return self.emission
        return EmissionSpec.regular(10.0 * self.params.t0)


def _chunk_uniforms(seed: int, chunk: int, rows: int) -> np.ndarray:
    """Uniform variate block for pairs [chunk*CHUNK_PAIRS, +rows)."""
    bitgen = np.random.Philox(key=np.array([seed, chunk], dtype=np.uint64))
    return np.random.Generator(bitgen).random((rows, DRAWS_PER_PAIR))


def pair_uniforms(seed: int, pair_id: int) -> np.ndarray:
    """The DRAWS_PER_PAIR variates that pair ``pair_id`` consumes."""
    chunk, row = divmod(int(pair_id), CHUNK_PAIRS)
    return _chunk_uniforms(seed, chunk, row + 1)[row]


def _uniform_block(seed: int, start: int, count: int, out: np.ndarray) -> None:
    """Fill ``out`` with the variates of pairs [start, start + count)."""
    pos = 0
    pid = start
    while pos < count:
        chunk, row = divmod(pid, CHUNK_PAIRS)
        take = min(CHUNK_PAIRS - row, count - pos)
        out[pos : pos + take] = _chunk_uniforms(seed, chunk, row + take)[row:]
        pos += take
        pid += take


@dataclass(eq=False)
class StationStream:
    """All events of one station, sorted by time tag.

    ``pair_id`` may be None for streams read from tag files that omit the
    column; such streams support stream matching but not per-pair
    filtering.
    """

    station: int
    time_tag: np.ndarray
    setting_index: np.ndarray
    outcome: np.ndarray
    pair_id: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.time_tag)

    def event(self, i: int) -> DetectionEvent:
        return DetectionEvent(
            station=self.station,
            pair_id=int(self.pair_id[i]) if self.pair_id is not None else -1,
            setting_index=int(self.setting_index[i]),
            outcome=int(self.outcome[i]),
            time_tag=float(self.time_tag[i]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, StationStream):
            return NotImplemented
        if self.station != other.station:
            return False
        if (self.pair_id is None) != (other.pair_id is None):
            return False
        if self.pair_id is not None and not np.array_equal(self.pair_id, other.pair_id):
            return False
        return (
            np.array_equal(self.time_tag, other.time_tag)
            and np.array_equal(self.setting_index, other.setting_index)
            and np.array_equal(self.outcome, other.outcome)
        )


@dataclass(eq=False)
class EventLog:
    """The two station streams of one run.

    Equality compares the recorded streams only, not the attached config
    (a log re-read from disk carries no config unless a manifest supplied
    one).
    """

    station1: StationStream
    station2: StationStream
    config: ExperimentConfig | None = None

    @property
    def n_pairs(self) -> int:
        return len(self.station1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventLog):
            return NotImplemented
        return self.station1 == other.station1 and self.station2 == other.station2

    @cached_property
    def paired_view(self):
        """Streams re-aligned by pair_id: (pair_id, t1, i1, x1, t2, i2, x2).

        Cached because window sweeps re-filter the same log many times.
        Raises if either stream lacks pair ids or the id sets differ.
        """
        s1, s2 = self.station1, self.station2
        if s1.pair_id is None or s2.pair_id is None:
            raise ValidationError("per-pair filtering needs pair ids in both streams")
        o1 = np.argsort(s1.pair_id, kind="stable")
        o2 = np.argsort(s2.pair_id, kind="stable")
        pid = s1.pair_id[o1]
        if not np.array_equal(pid, s2.pair_id[o2]):
            raise ValidationError("mismatched pair_id sets between stations")
        return (
            pid,
            s1.time_tag[o1],
            s1.setting_index[o1],
            s1.outcome[o1],
            s2.time_tag[o2],
            s2.setting_index[o2],
            s2.outcome[o2],
        )


def _quantize_times(t: np.ndarray) -> np.ndarray:
    return np.round(t, TIME_TAG_DECIMALS)


def generate_pair(
    pair_id: int,
    emission_time: float,
    setting1: Setting,
    setting2: Setting,
    params: ModelParams,
    seed: int,
) -> tuple[DetectionEvent, DetectionEvent]:
    """Generate the two detection events of a single pair.

    Randomness is fully determined by ``(seed, pair_id)``; repeated calls
    return the identical pair, and the result matches what
    :func:`run_experiment` produces for this pair_id when the stations
    have these settings at the drawn indices.
    """
    u = pair_uniforms(seed, pair_id)
    s1 = float(hidden_from_uniform(u[_COL_HIDDEN]))
    zeta1 = setting1 - s1
    zeta2 = setting2 - (s1 + 0.5 * np.pi)
    x1 = int(outcome_from_uniform(u[_COL_OUT1], zeta1))
    x2 = int(outcome_from_uniform(u[_COL_OUT2], zeta2))
    t1 = float(_quantize_times(np.float64(emission_time + delay_from_uniform(u[_COL_DELAY1], zeta1, params))))
    t2 = float(_quantize_times(np.float64(emission_time + delay_from_uniform(u[_COL_DELAY2], zeta2, params))))
    ev1 = DetectionEvent(station=1, pair_id=pair_id, setting_index=0, outcome=x1, time_tag=t1)
    ev2 = DetectionEvent(station=2, pair_id=pair_id, setting_index=0, outcome=x2, time_tag=t2)
    return ev1, ev2


def _generate_columns(config: ExperimentConfig, start: int, count: int, cols: dict) -> None:
    """Compute raw per-pair columns for pairs [start, start + count)."""
    u = np.empty((count, DRAWS_PER_PAIR))
    _uniform_block(config.seed, start, count, u)
    params = config.params
    a1 = np.asarray(config.settings1)
    a2 = np.asarray(config.settings2)
    k1, k2 = len(a1), len(a2)
    sl = slice(start, start + count)

    idx1 = np.minimum((u[:, _COL_SET1] * k1).astype(np.int64), k1 - 1)
    idx2 = np.minimum((u[:, _COL_SET2] * k2).astype(np.int64), k2 - 1)
    s1 = hidden_from_uniform(u[:, _COL_HIDDEN])
    zeta1 = a1[idx1] - s1
    zeta2 = a2[idx2] - (s1 + 0.5 * np.pi)

    cols["idx1"][sl] = idx1
    cols["idx2"][sl] = idx2
    cols["x1"][sl] = outcome_from_uniform(u[:, _COL_OUT1], zeta1)
    cols["x2"][sl] = outcome_from_uniform(u[:, _COL_OUT2], zeta2)
    cols["delay1"][sl] = delay_from_uniform(u[:, _COL_DELAY1], zeta1, params)
    cols["delay2"][sl] = delay_from_uniform(u[:, _COL_DELAY2], zeta2, params)
    cols["gap"][sl] = u[:, _COL_EMIT]


def run_experiment(config: ExperimentConfig, n_workers: int = 1) -> EventLog:
    """Run the full two-station experiment described by ``config``.

    The result is identical for any ``n_workers``: workers only split the
    pair range, and each pair's variates are fixed by ``(seed, pair_id)``.
    """
    if n_workers < 1:
        raise ValidationError(f"n_workers must be >= 1, got {n_workers}")
    n = config.n_pairs
    cols = {
        "idx1": np.empty(n, dtype=np.int16),
        "idx2": np.empty(n, dtype=np.int16),
        "x1": np.empty(n, dtype=np.int8),
        "x2": np.empty(n, dtype=np.int8),
        "delay1": np.empty(n),
        "delay2": np.empty(n),
        "gap": np.empty(n),
    }

    # Split on chunk boundaries so every task regenerates whole chunks.
    n_chunks = -(-n // CHUNK_PAIRS)
    tasks = []
    chunks_per_task = -(-n_chunks // n_workers)
    for c0 in range(0, n_chunks, chunks_per_task):
        start = c0 * CHUNK_PAIRS
        stop = min(n, (c0 + chunks_per_task) * CHUNK_PAIRS)
        tasks.append((start, stop - start))
    if n_workers == 1 or len(tasks) == 1:
        for start, count in tasks:
            _generate_columns(config, start, count, cols)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_generate_columns, config, start, count, cols) for start, count in tasks]
            for f in futures:
                f.result()

    emission_spec = config.resolved_emission()
    pid = np.arange(n, dtype=np.int64)
    if emission_spec.mode == "regular":
        emission = pid * emission_spec.interval
    else:
        # Inverse-CDF exponential inter-arrival times; cumulative sum is a
        # fixed sequential pass, independent of the worker split above.
        emission = np.cumsum(-np.log1p(-cols["gap"]) / emission_spec.rate)

    t1 = _quantize_times(emission + cols["delay1"])
    t2 = _quantize_times(emission + cols["delay2"])

    def build(station, t, idx, x):
        order = np.lexsort((pid, t))
        return StationStream(
            station=station,
            time_tag=t[order],
            setting_index=idx[order].astype(np.int16),
            outcome=x[order],
            pair_id=pid[order],
        )

    return EventLog(
        station1=build(1, t1, cols["idx1"], cols["x1"]),
        station2=build(2, t2, cols["idx2"], cols["x2"]),
        config=config,
    )
