"""Persistence: time-tag files, result tables, run manifests.

Time tags are stored Weihs-style as one CSV per station so that
coincidence analysis can be redone later from raw tags alone.  Format:

    # eprsim-tags v1 station=1
    pair_id,time_ns,setting_index,outcome
    0,37.482910,1,1
    ...

Times are fixed-point with six decimals, matching the generator's tag
resolution, so a write/read cycle reproduces the in-memory log exactly
and re-writing a read file is byte-identical.  The pair_id column is
optional on read; stream matching does not need it.

Result tables (correlations, sweeps, reference curves) are plain CSV with
floats serialized via repr, which round-trips exactly.  A JSON manifest
records the config, seed, artifact version, timestamps, and every output
file of a run.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import TagFormatError, ValidationError
from .events import EmissionSpec, EventLog, ExperimentConfig, StationStream, TIME_TAG_DECIMALS
from .model import ModelParams

__all__ = [
    "write_tags",
    "read_tags",
    "station_path",
    "RunManifest",
    "config_to_dict",
    "config_from_dict",
    "write_csv_columns",
    "read_csv_columns",
    "write_correlation_csv",
    "write_sweep_csv",
    "write_curve_csv",
]

_MAGIC = "eprsim-tags"
FORMAT_VERSION = "v1"
_COLUMNS = ("pair_id", "time_ns", "setting_index", "outcome")


def station_path(prefix: str | Path, station: int) -> Path:
    return Path(f"{prefix}.station{station}.csv")


def _format_station(stream: StationStream) -> str:
    buf = io.StringIO()
    buf.write(f"# {_MAGIC} {FORMAT_VERSION} station={stream.station}\n")
    has_pid = stream.pair_id is not None
    buf.write(",".join(_COLUMNS if has_pid else _COLUMNS[1:]) + "\n")
    t = stream.time_tag
    idx = stream.setting_index
    x = stream.outcome
    if has_pid:
        pid = stream.pair_id
        for k in range(len(stream)):
            buf.write(f"{pid[k]},{t[k]:.{TIME_TAG_DECIMALS}f},{idx[k]},{x[k]}\n")
    else:
        for k in range(len(stream)):
            buf.write(f"{t[k]:.{TIME_TAG_DECIMALS}f},{idx[k]},{x[k]}\n")
    return buf.getvalue()


def write_tags(log: EventLog, prefix: str | Path) -> tuple[Path, Path]:
    """Write one tag file per station; returns the two paths."""
    paths = (station_path(prefix, 1), station_path(prefix, 2))
    for stream, path in zip((log.station1, log.station2), paths):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(_format_station(stream), encoding="utf-8")
    return paths


def _parse_station_file(path: Path, expected_station: int) -> StationStream:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TagFormatError(f"{path}: cannot read tag file: {exc}") from exc
    lines = text.splitlines()
    if len(lines) < 2:
        raise TagFormatError(f"{path}: truncated tag file (need version and header lines)")
    head = lines[0].split()
    if len(head) < 3 or head[0] != "#" or head[1] != _MAGIC:
        raise TagFormatError(f"{path}:1: not a {_MAGIC} file")
    if head[2] != FORMAT_VERSION:
        raise TagFormatError(f"{path}:1: version mismatch: file has {head[2]!r}, reader supports {FORMAT_VERSION!r}")
    station = expected_station
    for tok in head[3:]:
        if tok.startswith("station="):
            station = int(tok.split("=", 1)[1])
    if station != expected_station:
        raise TagFormatError(f"{path}:1: station {station} file given for station {expected_station}")
    header = tuple(lines[1].strip().split(","))
    if header == _COLUMNS:
        has_pid = True
    elif header == _COLUMNS[1:]:
        has_pid = False
    else:
        raise TagFormatError(f"{path}:2: unexpected columns {header!r}")
    ncols = len(header)

    body = lines[2:]
    while body and not body[-1].strip():
        body.pop()
    try:
        data = np.loadtxt(io.StringIO("\n".join(body)), delimiter=",", ndmin=2) if body else np.empty((0, ncols))
    except ValueError:
        data = None
    if data is None or data.shape[1] != ncols:
        # Slow pass purely to produce a line-accurate diagnostic.
        for k, line in enumerate(body, start=3):
            fields = line.split(",")
            if len(fields) != ncols:
                raise TagFormatError(f"{path}:{k}: expected {ncols} columns, found {len(fields)}")
            for name, tok in zip(header, fields):
                try:
                    float(tok)
                except ValueError:
                    raise TagFormatError(f"{path}:{k}: non-numeric {name} value {tok.strip()!r}") from None
        raise TagFormatError(f"{path}: malformed tag data")

    col = {name: data[:, i] for i, name in enumerate(header)}
    outcome = col["outcome"]
    bad = np.nonzero((outcome != 1) & (outcome != -1))[0]
    if bad.size:
        raise TagFormatError(f"{path}:{bad[0] + 3}: outcome must be 1 or -1, found {outcome[bad[0]]!r}")
    idx = col["setting_index"]
    if np.any(idx < 0) or np.any(idx != np.round(idx)):
        k = int(np.nonzero((idx < 0) | (idx != np.round(idx)))[0][0])
        raise TagFormatError(f"{path}:{k + 3}: setting_index must be a non-negative integer")
    t = col["time_ns"]
    if not np.all(np.isfinite(t)):
        k = int(np.nonzero(~np.isfinite(t))[0][0])
        raise TagFormatError(f"{path}:{k + 3}: non-finite time tag")

    pid = col["pair_id"].astype(np.int64) if has_pid else None
    order = np.lexsort((pid, t)) if has_pid else np.argsort(t, kind="stable")
    return StationStream(
        station=expected_station,
        time_tag=t[order],
        setting_index=idx[order].astype(np.int16),
        outcome=outcome[order].astype(np.int8),
        pair_id=pid[order] if has_pid else None,
    )


def read_tags(prefix: str | Path, config: ExperimentConfig | None = None) -> EventLog:
    """Read the two station tag files written under ``prefix``."""
    s1 = _parse_station_file(station_path(prefix, 1), 1)
    s2 = _parse_station_file(station_path(prefix, 2), 2)
    return EventLog(station1=s1, station2=s2, config=config)


# ---------------------------------------------------------------------------
# Run manifest.

def config_to_dict(config: ExperimentConfig) -> dict:
    emission = config.emission
    return {
        "params": {"d": config.params.d, "t0": config.params.t0, "window": config.params.window},
        "settings1": list(config.settings1),
        "settings2": list(config.settings2),
        "n_pairs": config.n_pairs,
        "seed": config.seed,
        "emission": None if emission is None else asdict(emission),
    }


def config_from_dict(d: dict) -> ExperimentConfig:
    emission = d.get("emission")
    return ExperimentConfig(
        params=ModelParams(**d["params"]),
        settings1=tuple(d["settings1"]),
        settings2=tuple(d["settings2"]),
        n_pairs=int(d["n_pairs"]),
        seed=int(d["seed"]),
        emission=None if emission is None else EmissionSpec(**emission),
    )


@dataclass
class RunManifest:
    """What a run was and what it produced."""

    mode: str
    seed: int
    config: dict
    outputs: list[str] = field(default_factory=list)
    results: dict = field(default_factory=dict)
    version: str = __version__
    created_utc: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Result tables: column CSV with exact float round-trip.

def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv_columns(path: str | Path, columns: list[tuple[str, np.ndarray]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [name for name, _ in columns]
    arrays = [np.asarray(arr) for _, arr in columns]
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ValidationError("all result columns must have equal length")
    with path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for k in range(length):
            fh.write(",".join(_cell(a[k]) for a in arrays) + "\n")
    return path


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    names = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line.strip()]
    data = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(names)}
    return data


def write_correlation_csv(path: str | Path, table) -> Path:
    """One row per setting pair with counts, E, and standard error."""
    n1, n2 = table.n_total.shape
    i1, i2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    i1, i2 = i1.ravel(), i2.ravel()
    ang1 = np.array([table.settings1[i] if table.settings1 else np.nan for i in i1])
    ang2 = np.array([table.settings2[j] if table.settings2 else np.nan for j in i2])
    counts = table.counts.reshape(n1 * n2, 4)
    return write_csv_columns(
        path,
        [
            ("setting_index1", i1),
            ("setting_index2", i2),
            ("angle1_rad", ang1),
            ("angle2_rad", ang2),
            ("n_pp", counts[:, 0]),
            ("n_pm", counts[:, 1]),
            ("n_mp", counts[:, 2]),
            ("n_mm", counts[:, 3]),
            ("n_total", table.n_total.ravel()),
            ("correlation", table.correlation.ravel()),
            ("stderr", table.stderr.ravel()),
        ],
    )


def write_sweep_csv(path: str | Path, sweep) -> Path:
    return write_csv_columns(
        path,
        [
            ("window_ns", sweep.windows),
            ("s", sweep.s),
            ("s_stderr", sweep.s_stderr),
            ("coincidence_rate", sweep.rate),
        ],
    )


def write_curve_csv(path: str | Path, deltas, model, singlet, mixed) -> Path:
    return write_csv_columns(
        path,
        [
            ("delta_rad", deltas),
            ("e_model", model),
            ("e_singlet", singlet),
            ("e_mixed", mixed),
        ],
    )
