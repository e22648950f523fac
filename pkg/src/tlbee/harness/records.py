"""Sweep result records and their CSV/JSON serialization."""

import csv
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

MSE_HEADER = ("experiment", "d", "alpha", "n_s", "n_t", "tau", "classifier", "estimator",
              "mse", "mse_se", "n_reps", "seed", "runtime_s", "flags")


@dataclass(frozen=True)
class MseRecord:
    """Mean squared deviation of one estimator at one sweep coordinate."""

    experiment: str
    d: int
    alpha: float
    n_s: int
    n_t: int
    tau: float
    classifier: str
    estimator: str
    mse: float
    mse_se: float
    n_reps: int
    seed: int
    runtime_s: str = ""
    flags: str = ""

    def __post_init__(self):
        if not self.mse >= 0:
            raise ValueError(f"mse must be non-negative, got {self.mse}")


@dataclass(frozen=True)
class CalibrationRecord:
    """Outcome of one Bayes-error calibration."""

    prior_index: int
    d: int
    tau: float
    converged: bool
    theta: float
    measured_error: float
    iterations: int
    seed: int
    flags: str = ""


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _sidecar(path, meta):
    from .. import __version__

    meta = dict(meta or {})
    meta.setdefault("library_version", __version__)
    side = Path(str(path) + ".meta.json")
    try:
        side.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {side}: {exc}") from exc
    return side


def _write(rows, header, path, meta):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(getattr(r, h)) for h in header])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    _sidecar(path, meta)
    return path


def write_records(records, path, meta=None):
    """Write MSE records as CSV plus a ``.meta.json`` sidecar.

    Rows keep the order given; the harness emits them in a fixed sweep order.
    """
    return _write(records, MSE_HEADER, path, meta)


def write_calibration_records(records, path, meta=None):
    header = tuple(f.name for f in fields(CalibrationRecord))
    return _write(records, header, path, meta)


def _parse(cls, row):
    out = {}
    for f in fields(cls):
        raw = row[f.name]
        if f.type in ("int", int):
            out[f.name] = int(raw)
        elif f.type in ("float", float):
            out[f.name] = float(raw)
        elif f.type in ("bool", bool):
            out[f.name] = raw == "true"
        else:
            out[f.name] = raw
    return cls(**out)


def read_records(path):
    """Read MSE records written by :func:`write_records`."""
    with open(path, newline="") as fh:
        return [_parse(MseRecord, row) for row in csv.DictReader(fh)]


def read_calibration_records(path):
    with open(path, newline="") as fh:
        return [_parse(CalibrationRecord, row) for row in csv.DictReader(fh)]


def records_as_dicts(records):
    return [asdict(r) for r in records]
