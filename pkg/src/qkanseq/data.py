"""Series generators, Milan-telecom ingestion, windowing and splitting."""
from __future__ import annotations

import csv
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import EmptyResultError, UnsupportedRegimeError

log = logging.getLogger(__name__)

SLOT_MS = 600_000  # 10-minute telecom sampling interval


@dataclass
class RawSeries:
    t: np.ndarray
    y: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.t.shape != self.y.shape or self.t.ndim != 1:
            raise ValueError(f"t and y must be equal-length 1-D arrays, got {self.t.shape} and {self.y.shape}")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.y))):
            raise ValueError("series contains non-finite values")
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("sample coordinates must be strictly increasing")

    def __len__(self):
        return self.t.size


# ---------------------------------------------------------------------------
# synthetic generators


def damped_shm(t, zeta, omega0):
    """Underdamped oscillator with x(0)=1, x'(0)=0."""
    wd = omega0 * math.sqrt(1.0 - zeta * zeta)
    return np.exp(-zeta * omega0 * t) * (np.cos(wd * t) + (zeta * omega0 / wd) * np.sin(wd * t))


def gen_damped_shm(zeta=0.1, omega0=2 * math.pi, t_max=10.0, n_points=500) -> RawSeries:
    if not 0.0 <= zeta < 1.0:
        raise UnsupportedRegimeError(f"only underdamped motion (0 <= zeta < 1) is supported, got zeta={zeta}")
    if omega0 <= 0:
        raise ValueError(f"omega0 must be positive, got {omega0}")
    if n_points < 2:
        raise ValueError("need at least two points")
    t = np.linspace(0.0, t_max, int(n_points))
    return RawSeries(t, damped_shm(t, zeta, omega0), "shm")


def bessel_j(alpha: int, x: float) -> float:
    """J_alpha(x) by its power series, for integer order and x >= 0."""
    if alpha < 0 or int(alpha) != alpha:
        raise ValueError(f"order must be a non-negative integer, got {alpha}")
    alpha = int(alpha)
    x = float(x)
    if x < 0 or not math.isfinite(x):
        raise ValueError(f"x must be finite and >= 0, got {x}")
    half = 0.5 * x
    term = half ** alpha / math.factorial(alpha)
    total = term
    q = -half * half
    for m in range(1, 200):
        term *= q / (m * (m + alpha))
        if abs(term) < 1e-16 * (1.0 + abs(total)):
            break
        total += term
    return total


def gen_bessel_series(alpha=2, x_max=20.0, n_points=500) -> RawSeries:
    if n_points < 2:
        raise ValueError("need at least two points")
    x = np.linspace(0.0, x_max, int(n_points))
    return RawSeries(x, np.array([bessel_j(alpha, xi) for xi in x]), f"bessel{alpha}")


def gen_telecom_surrogate(n_points=8784, seed=0) -> RawSeries:
    """Seeded stand-in for an SMS-in cell series at 10-minute resolution.

    Daily and weekly cycles, a slow diurnal asymmetry, random bursts with
    exponential decay, and additive noise; clipped at zero like a count rate.
    """
    rng = np.random.default_rng(seed)
    k = np.arange(int(n_points))
    day = 144.0
    week = 7 * day
    base = 20.0
    y = base + 12.0 * np.sin(2 * np.pi * (k / day - 0.3)) + 4.0 * np.sin(4 * np.pi * (k / day - 0.1))
    y += 5.0 * np.sin(2 * np.pi * k / week)
    bursts = np.zeros_like(y)
    starts = np.flatnonzero(rng.random(k.size) < 0.01)
    for s in starts:
        amp = rng.uniform(5.0, 15.0)
        span = np.arange(s, min(k.size, s + 12))
        bursts[span] += amp * np.exp(-(span - s) / 3.0)
    y += bursts + rng.normal(0.0, 1.5, k.size)
    y = np.maximum(y, 0.0)
    return RawSeries(k * (SLOT_MS / 1000.0), y, "telecom-surrogate")


# ---------------------------------------------------------------------------
# Milan telecom ingestion

_FIELDS = ("square_id", "time_interval", "country_code", "sms_in", "sms_out", "call_in", "call_out", "internet")


class TelecomCells(dict):
    """``{cell_id: RawSeries}`` that also reports how many rows were skipped."""

    def __init__(self, *args, skipped=0, **kw):
        super().__init__(*args, **kw)
        self.skipped = skipped


def _num(s):
    s = s.strip()
    return 0.0 if s == "" else float(s)


def ingest_telecom(paths, cell_ids=None, field="sms_in", min_coverage=0.95):
    """Aggregate Milan-layout TSV files into per-cell series.

    Rows are summed over country codes per (cell, 10-minute slot); empty
    numeric fields count as zero.  A cell is kept when at least
    ``min_coverage`` of the slots between the earliest and latest timestamp
    seen in the input carry a row; its absent slots are filled with zero.
    Returns a :class:`TelecomCells` mapping with ``t`` in seconds.
    """
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    col = _FIELDS.index(field)
    wanted = None if cell_ids is None else {int(c) for c in cell_ids}
    sums = defaultdict(float)
    skipped = 0
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                parts = line.rstrip("\r\n").split("\t")
                if len(parts) < col + 1:
                    skipped += 1
                    continue
                try:
                    cell = int(parts[0])
                    ts = int(float(parts[1]))
                    val = _num(parts[col])
                except ValueError:
                    skipped += 1
                    continue
                if wanted is not None and cell not in wanted:
                    continue
                sums[(cell, ts)] += val
    if skipped:
        log.warning("skipped %d malformed telecom rows", skipped)
    if not sums:
        raise EmptyResultError("no telecom rows found for the requested cells")
    tmin = min(ts for _, ts in sums)
    tmax = max(ts for _, ts in sums)
    n_slots = (tmax - tmin) // SLOT_MS + 1
    per_cell = defaultdict(dict)
    for (cell, ts), v in sums.items():
        per_cell[cell][ts] = v
    out = TelecomCells(skipped=skipped)
    for cell in sorted(per_cell):
        slots = per_cell[cell]
        if len(slots) < min_coverage * n_slots:
            log.info("rejecting cell %d: %d of %d slots present", cell, len(slots), n_slots)
            continue
        grid = tmin + SLOT_MS * np.arange(n_slots)
        y = np.array([slots.get(int(ts), 0.0) for ts in grid])
        out[cell] = RawSeries(grid / 1000.0, y, f"telecom:{cell}")
    if not out:
        raise EmptyResultError("no telecom cell passes the temporal-continuity threshold")
    return out


# ---------------------------------------------------------------------------
# windowing


@dataclass
class TimeSeriesDataset:
    """Sliding windows ``X[k] = y[k : k+T]`` with target ``y[k+T]``.

    ``lo``/``hi`` are the min-max bounds fitted on the training partition
    (``lo=0, hi=1`` when unnormalised).  Splits are contiguous and ordered.
    """

    X: np.ndarray
    y: np.ndarray
    T: int
    train: slice
    val: slice
    test: slice
    lo: float = 0.0
    hi: float = 1.0

    def __len__(self):
        return self.y.shape[0]

    def part(self, name):
        s = getattr(self, name)
        return self.X[s], self.y[s]

    def normalize(self, v):
        return (np.asarray(v) - self.lo) / (self.hi - self.lo)

    def denormalize(self, v):
        return np.asarray(v) * (self.hi - self.lo) + self.lo


def split_sizes(N, ratios=(0.7, 0.15, 0.15)):
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    n_train = int(round(ratios[0] * N))
    n_val = int(round(ratios[1] * N))
    return n_train, n_val, N - n_train - n_val


def window_split(series, T, ratios=(0.7, 0.15, 0.15), normalize=True) -> TimeSeriesDataset:
    y = np.asarray(series.y if isinstance(series, RawSeries) else series, dtype=np.float64)
    T = int(T)
    if T < 1:
        raise ValueError(f"sequence length must be >= 1, got {T}")
    if y.size <= T:
        raise ValueError(f"series of length {y.size} is too short for windows of length {T}")
    N = y.size - T
    n_train, n_val, _ = split_sizes(N, ratios)
    lo, hi = 0.0, 1.0
    if normalize:
        # bounds from every value the training windows touch, targets included
        seen = y[: n_train + T]
        lo, hi = float(seen.min()), float(seen.max())
        if hi == lo:
            raise ValueError("training partition is constant; cannot min-max normalise")
        y = (y - lo) / (hi - lo)
    idx = np.arange(N)[:, None] + np.arange(T)[None, :]
    X = y[idx][..., None]
    return TimeSeriesDataset(
        X=X,
        y=y[T:].copy(),
        T=T,
        train=slice(0, n_train),
        val=slice(n_train, n_train + n_val),
        test=slice(n_train + n_val, N),
        lo=lo,
        hi=hi,
    )


# ---------------------------------------------------------------------------
# CSV exchange: header (index, t, y)


def write_series_csv(series: RawSeries, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "t", "y"])
        for k, (t, y) in enumerate(zip(series.t, series.y)):
            w.writerow([k, f"{t:.17g}", f"{y:.17g}"])


def read_series_csv(path, source="") -> RawSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"index", "t", "y"}:
        raise ValueError(f"{path}: expected CSV header index,t,y")
    return RawSeries([float(r["t"]) for r in rows], [float(r["y"]) for r in rows], source or str(path))
