"""Air Quality ingestion and conversion of real measurements into interval data.

The UCI Air Quality file is semicolon separated, uses decimal commas and
marks missing values with -200.  Features are standardized with training
statistics and then widened into intervals according to an
:class:`UncertaintyProfile`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import pandas as pd

from . import _rounding as R
from .exceptions import (
    MissingColumn,
    NegativeUncertainty,
    ParseError,
    UncoveredFeature,
    ZeroVariance,
)
from .tensor import IntervalTensor

FEATURES = ["PT08.S2(NMHC)", "PT08.S3(NOx)", "PT08.S4(NO2)", "PT08.S5(O3)", "T", "RH", "AH"]
TARGET = "CO(GT)"
SENTINEL = -200.0
TIMESTAMP = "timestamp"


def load_csv(path, features=FEATURES, target=TARGET) -> pd.DataFrame:
    """Read a UCI Air Quality CSV into ``timestamp + features + target`` columns.

    Rows with the -200 sentinel in any used column, and blank trailing rows,
    are dropped.
    """
    try:
        raw = pd.read_csv(path, sep=";", decimal=",", dtype=str, skip_blank_lines=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot parse {path}: {exc}") from exc
    raw.columns = [c.strip() for c in raw.columns]
    needed = ["Date", "Time", *features, target]
    missing = [c for c in needed if c not in raw.columns]
    if missing:
        raise MissingColumn(f"missing columns in {path}: {missing}")
    raw = raw[needed].dropna(how="all")
    raw = raw[raw["Date"].notna() & (raw["Date"].str.strip() != "")]

    out = pd.DataFrame(index=raw.index)
    try:
        out[TIMESTAMP] = pd.to_datetime(raw["Date"].str.strip() + " " + raw["Time"].str.strip(),
                                        format="%d/%m/%Y %H.%M.%S")
    except ValueError as exc:
        raise ParseError(f"bad date/time in {path}: {exc}") from exc
    for col in [*features, target]:
        text = raw[col].astype(str).str.strip().str.replace(",", ".", regex=False)
        values = pd.to_numeric(text, errors="coerce")
        bad = values.isna() & raw[col].notna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
            raise ParseError(f"non-numeric value {raw[col][bad].iloc[0]!r} in column {col} "
                             f"(line {row})")
        out[col] = values
    used = out[[*features, target]]
    keep = used.notna().all(axis=1) & (used != SENTINEL).all(axis=1)
    return out[keep].reset_index(drop=True)


@dataclass
class NormStats:
    mean: dict
    std: dict

    def to_dict(self):
        return {"mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d):
        return cls(dict(d["mean"]), dict(d["std"]))


def fit_stats(table: pd.DataFrame, columns) -> NormStats:
    mean, std = {}, {}
    for c in columns:
        v = table[c].to_numpy(dtype=np.float64)
        s = float(v.std())
        if not s > 0:
            raise ZeroVariance(f"column {c} is constant")
        mean[c] = float(v.mean())
        std[c] = s
    return NormStats(mean, std)


def normalize(table: pd.DataFrame, stats: Optional[NormStats] = None, columns=None):
    """Z-score ``columns`` (default: every numeric column except the timestamp).

    Statistics are fitted on ``table`` unless ``stats`` is given, which is how
    test rows reuse training statistics.  Returns ``(normalized, stats)``.
    """
    if columns is None:
        columns = [c for c in table.columns if c != TIMESTAMP]
    if stats is None:
        stats = fit_stats(table, columns)
    out = table.copy()
    for c in columns:
        out[c] = (table[c].to_numpy(dtype=np.float64) - stats.mean[c]) / stats.std[c]
    return out, stats


@dataclass(frozen=True)
class Rule:
    feature: str
    beta: float
    from_month: Optional[int] = None
    to_month: Optional[int] = None

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise NegativeUncertainty(f"rule for {self.feature}: beta must be finite and >= 0")
        if (self.from_month is None) != (self.to_month is None):
            raise ValueError("give both from_month and to_month or neither")

    def active(self, months: np.ndarray) -> np.ndarray:
        if self.from_month is None:
            return np.ones(months.shape, dtype=bool)
        if self.from_month <= self.to_month:
            return (months >= self.from_month) & (months <= self.to_month)
        return (months >= self.from_month) | (months <= self.to_month)


@dataclass
class UncertaintyProfile:
    """Per-feature uncertainty levels (total relative widths).

    Date-windowed rules take precedence inside their window; outside it the
    feature's unwindowed rule, or ``default_beta``, applies.
    """

    rules: List[Rule] = field(default_factory=list)
    default_beta: Optional[float] = 0.0
    target_beta: float = 0.0

    def __post_init__(self):
        if self.default_beta is not None and not self.default_beta >= 0:
            raise NegativeUncertainty("default_beta must be >= 0")
        if not self.target_beta >= 0:
            raise NegativeUncertainty("target_beta must be >= 0")
        seen = set()
        for r in self.rules:
            if r.from_month is None:
                if r.feature in seen:
                    raise ValueError(f"two unwindowed rules for {r.feature}")
                seen.add(r.feature)

    def betas(self, feature: str, months: np.ndarray) -> np.ndarray:
        own = [r for r in self.rules if r.feature == feature]
        base = [r for r in own if r.from_month is None]
        if base:
            out = np.full(months.shape, base[0].beta)
        elif self.default_beta is not None:
            out = np.full(months.shape, float(self.default_beta))
        else:
            raise UncoveredFeature(f"no uncertainty rule covers feature {feature!r}")
        for r in own:
            if r.from_month is not None:
                out = np.where(r.active(months), r.beta, out)
        return out

    def to_dict(self):
        rules = []
        for r in self.rules:
            d = {"feature": r.feature, "beta": r.beta}
            if r.from_month is not None:
                d.update(from_month=r.from_month, to_month=r.to_month)
            rules.append(d)
        return {"rules": rules, "default_beta": self.default_beta,
                "target_beta": self.target_beta}

    @classmethod
    def from_dict(cls, d):
        return cls([Rule(**r) for r in d.get("rules", [])],
                   d.get("default_beta", 0.0), d.get("target_beta", 0.0))


def air_quality_profile() -> UncertaintyProfile:
    """10% on the NOx sensor from March to June, 1% elsewhere, exact targets."""
    return UncertaintyProfile([Rule("PT08.S3(NOx)", 0.10, 3, 6)], default_beta=0.01,
                              target_beta=0.0)


def load_profile(path) -> UncertaintyProfile:
    """Read a profile from JSON or TOML (chosen by file suffix)."""
    path = str(path)
    if path.endswith(".toml"):
        with open(path, "rb") as fh:
            d = tomllib.load(fh)
    else:
        with open(path) as fh:
            d = json.load(fh)
    return UncertaintyProfile.from_dict(d)


@dataclass
class IntervalDataset:
    features: IntervalTensor  # [n, d]
    targets: IntervalTensor  # [n]
    feature_names: list
    stats: Optional[NormStats] = None
    timestamps: Optional[np.ndarray] = None  # datetime64[s]

    def __len__(self):
        return self.features.shape[0]

    def subset(self, idx) -> "IntervalDataset":
        idx = np.asarray(idx)
        ts = None if self.timestamps is None else self.timestamps[idx]
        return IntervalDataset(self.features[idx], self.targets[idx], list(self.feature_names),
                               self.stats, ts)

    def to_dict(self):
        ts = None if self.timestamps is None else [
            str(t) for t in self.timestamps.astype("datetime64[s]")]
        return {"features": self.features.to_dict(), "targets": self.targets.to_dict(),
                "feature_names": list(self.feature_names),
                "stats": None if self.stats is None else self.stats.to_dict(),
                "timestamps": ts}

    @classmethod
    def from_dict(cls, d):
        ts = d.get("timestamps")
        return cls(IntervalTensor.from_dict(d["features"]), IntervalTensor.from_dict(d["targets"]),
                   list(d["feature_names"]),
                   None if d.get("stats") is None else NormStats.from_dict(d["stats"]),
                   None if ts is None else np.array(ts, dtype="datetime64[s]"))


def save_dataset(ds: IntervalDataset, path):
    with open(path, "w") as fh:
        json.dump(ds.to_dict(), fh)


def load_dataset(path) -> IntervalDataset:
    with open(path) as fh:
        return IntervalDataset.from_dict(json.load(fh))


def _embed_column(raw, center, beta, scale):
    """Intervals ``center -/+ |raw| * beta / 2 / scale`` with outward rounding."""
    mag = np.abs(raw)
    half = np.ascontiguousarray(0.5 * beta, dtype=np.float64)
    _, r = R.k_mul(mag, mag, half, half)
    scale_arr = np.full(raw.size, float(scale))
    _, rad = R.k_div(r, r, scale_arr, scale_arr)
    lo, _ = R.k_sub(center, center, rad, rad)
    _, hi = R.k_add(center, center, rad, rad)
    return lo, hi


def embed_intervals(table: pd.DataFrame, profile: UncertaintyProfile,
                    stats: Optional[NormStats] = None, raw_table: Optional[pd.DataFrame] = None,
                    features=FEATURES, target=TARGET) -> IntervalDataset:
    """Turn each cell into an interval according to ``profile``.

    Without ``stats`` the cells are raw values and each becomes
    ``value -/+ |value| * beta / 2``, i.e. an interval of uncertainty
    level ``beta``.  With ``stats`` the ``table`` holds
    normalized values, ``raw_table`` the matching raw readings, and the
    radius is ``|raw| * beta / 2`` divided by the feature std, so a 10%
    sensor band keeps its physical meaning after standardization.
    """
    src = table if raw_table is None else raw_table
    if TIMESTAMP in table.columns:
        months = pd.DatetimeIndex(table[TIMESTAMP]).month.to_numpy()
        ts = table[TIMESTAMP].to_numpy().astype("datetime64[s]")
    else:
        months = np.zeros(len(table), dtype=int)
        ts = None
    cols_lo, cols_hi = [], []
    for name in list(features) + [target]:
        if name == target:
            beta = np.full(len(table), float(profile.target_beta))
        else:
            beta = profile.betas(name, months)
        center = table[name].to_numpy(dtype=np.float64)
        raw = src[name].to_numpy(dtype=np.float64)
        scale = 1.0 if stats is None else stats.std[name]
        lo, hi = _embed_column(raw, center, beta, scale)
        cols_lo.append(lo)
        cols_hi.append(hi)
    x = IntervalTensor(np.stack(cols_lo[:-1], axis=1), np.stack(cols_hi[:-1], axis=1))
    y = IntervalTensor(cols_lo[-1], cols_hi[-1])
    return IntervalDataset(x, y, list(features), stats, ts)


def week_groups(timestamps) -> np.ndarray:
    """ISO (year, week) group id per row."""
    iso = pd.DatetimeIndex(timestamps).isocalendar()
    return (iso["year"].to_numpy().astype(np.int64) * 100
            + iso["week"].to_numpy().astype(np.int64))


def split_indices(timestamps, test_fraction=0.2, seed=0):
    """Row indices ``(train, test)`` with whole ISO weeks on one side only."""
    groups = week_groups(timestamps)
    weeks = np.unique(groups)
    rng = np.random.default_rng(seed)
    order = rng.permutation(weeks)
    n_test = int(round(test_fraction * len(weeks)))
    if test_fraction > 0:
        n_test = min(max(n_test, 1), len(weeks) - 1)
    test_weeks = set(order[:n_test].tolist())
    is_test = np.array([g in test_weeks for g in groups.tolist()], dtype=bool)
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)


def split_grouped(data, test_fraction=0.2, seed=0):
    """Split a table (with a timestamp column) or an IntervalDataset by ISO week."""
    if isinstance(data, IntervalDataset):
        tr, te = split_indices(data.timestamps, test_fraction, seed)
        return data.subset(tr), data.subset(te)
    tr, te = split_indices(data[TIMESTAMP], test_fraction, seed)
    return data.iloc[tr].reset_index(drop=True), data.iloc[te].reset_index(drop=True)


def prepare(table: pd.DataFrame, profile: UncertaintyProfile, test_fraction=0.2, seed=0,
            features=FEATURES, target=TARGET):
    """Split by week, normalize with training statistics, embed both halves.

    Returns ``(train, test)`` interval datasets.
    """
    train_raw, test_raw = split_grouped(table, test_fraction, seed)
    cols = list(features) + [target]
    train_norm, stats = normalize(train_raw, columns=cols)
    test_norm, _ = normalize(test_raw, stats, columns=cols)
    train = embed_intervals(train_norm, profile, stats, train_raw, features, target)
    test = embed_intervals(test_norm, profile, stats, test_raw, features, target)
    return train, test


def make_surrogate_csv(path, seed=0, start="2004-03-10 18:00", hours=9357,
                       missing_rate=0.18, noise=0.2):
    """Write a synthetic file in the UCI Air Quality layout.

    The columns, separators, decimal commas, sentinel values and hourly
    timestamps match the real file; the values come from a smooth latent
    pollution signal plus daily and seasonal cycles.  Useful for exercising
    the pipeline when the real data is not at hand.
    """
    rng = np.random.default_rng(seed)
    ts = pd.date_range(start, periods=hours, freq="h")
    t = np.arange(hours, dtype=np.float64)
    hour = ts.hour.to_numpy()
    doy = ts.dayofyear.to_numpy()
    daily = np.exp(-0.5 * ((hour - 8.5) / 2.5) ** 2) + 0.8 * np.exp(-0.5 * ((hour - 19) / 3) ** 2)
    season = 0.5 + 0.5 * np.cos(2 * np.pi * (doy - 15) / 365.0)
    slow = np.convolve(rng.normal(size=hours + 200), np.ones(200) / 200, mode="same")[:hours]
    latent = np.clip(0.4 + 1.6 * daily + 0.8 * season + 3.0 * slow + 0.3 * rng.normal(size=hours),
                     0.05, None)
    temp = 18 - 10 * np.cos(2 * np.pi * (doy - 20) / 365.0) + 4 * np.sin(2 * np.pi * (hour - 9) / 24)
    temp = temp + rng.normal(0, 1.5, hours)
    rh = np.clip(55 - 1.2 * (temp - 18) + rng.normal(0, 8, hours), 9, 88)
    ah = np.clip(0.01 * rh * np.exp(0.06 * temp) * 0.3 + rng.normal(0, 0.05, hours), 0.18, 2.2)
    drift = 1.0 + 0.15 * np.sin(2 * np.pi * t / hours)

    def sensor(base, gain, power, sd):
        return base + gain * latent ** power * drift + rng.normal(0, 0.5 * sd, hours)

    cols = {
        "CO(GT)": np.round(np.clip(latent + noise * rng.normal(size=hours) * np.sqrt(latent),
                                   0.1, 11.9), 1),
        "PT08.S1(CO)": np.round(sensor(700, 220, 0.8, 60)),
        "NMHC(GT)": np.full(hours, SENTINEL),
        "C6H6(GT)": np.round(np.clip(4.5 * latent + rng.normal(0, 1.5, hours), 0.1, None), 1),
        "PT08.S2(NMHC)": np.round(sensor(600, 250, 0.9, 70)),
        "NOx(GT)": np.round(np.clip(120 * latent + rng.normal(0, 40, hours), 2, None)),
        "PT08.S3(NOx)": np.round(np.clip(1300 - 260 * latent ** 0.7 * drift
                                         + rng.normal(0, 80, hours), 320, None)),
        "NO2(GT)": np.round(np.clip(60 + 25 * latent + rng.normal(0, 15, hours), 2, None)),
        "PT08.S4(NO2)": np.round(sensor(1100, 180, 0.8, 90) + 12 * (temp - 18)),
        "PT08.S5(O3)": np.round(sensor(500, 330, 1.0, 110)),
        "T": np.round(temp, 1),
        "RH": np.round(rh, 1),
        "AH": np.round(ah, 4),
    }
    # missing ground truth is much more common than missing sensor rows
    co_missing = rng.random(hours) < missing_rate
    cols["CO(GT)"] = np.where(co_missing, SENTINEL, cols["CO(GT)"])
    sensor_missing = rng.random(hours) < 0.04
    for c in ["PT08.S1(CO)", "PT08.S2(NMHC)", "PT08.S3(NOx)", "PT08.S4(NO2)", "PT08.S5(O3)",
              "T", "RH", "AH"]:
        cols[c] = np.where(sensor_missing, SENTINEL, cols[c])

    def fmt(v):
        if v == SENTINEL:
            return "-200"
        s = repr(float(v))
        if s.endswith(".0"):
            s = s[:-2]
        return s.replace(".", ",")

    header = ["Date", "Time", *cols.keys(), "", ""]
    lines = [";".join(header)]
    for i in range(hours):
        row = [ts[i].strftime("%d/%m/%Y"), ts[i].strftime("%H.%M.%S")]
        row += [fmt(cols[c][i]) for c in cols]
        lines.append(";".join(row) + ";;")
    lines.append(";" * (len(header) - 1))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
