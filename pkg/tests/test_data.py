import json

import numpy as np
import pandas as pd
import pytest

from dinn import descriptors
from dinn.data import (FEATURES, SENTINEL, TARGET, TIMESTAMP, IntervalDataset, Rule,
                       UncertaintyProfile, air_quality_profile, embed_intervals, fit_stats,
                       load_csv, load_dataset, load_profile, normalize, prepare, save_dataset,
                       split_grouped, split_indices, week_groups)
from dinn.exceptions import (MissingColumn, NegativeUncertainty, ParseError, UncoveredFeature,
                             ZeroVariance)

HEADER = "Date;Time;CO(GT);PT08.S1(CO);" + ";".join(FEATURES) + ";;"


def write_rows(path, rows):
    path.write_text("\n".join([HEADER, *rows, ";;;;;;;;;;;"]) + "\n")
    return path


def row(date, time, co, *vals):
    vals = vals or ("1000", "900", "1500", "1000", "15,2", "48,1", "0,8123")
    return ";".join([date, time, co, "1100", *vals]) + ";;"


# -- loading ----------------------------------------------------------------------------------

def test_load_decimal_comma_and_sentinel(tmp_path):
    p = write_rows(tmp_path / "a.csv", [
        row("10/03/2004", "18.00.00", "2,6"),
        row("10/03/2004", "19.00.00", "-200"),
        row("10/03/2004", "20.00.00", "2,2", "1000", "-200", "1500", "1000", "15", "48", "0,8"),
    ])
    t = load_csv(p)
    assert len(t) == 1
    assert t[TARGET].iloc[0] == 2.6 and t["T"].iloc[0] == 15.2
    assert t[TIMESTAMP].iloc[0] == pd.Timestamp("2004-03-10 18:00")


def test_load_errors(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("Date;Time;CO(GT)\n10/03/2004;18.00.00;2,6\n")
    with pytest.raises(MissingColumn):
        load_csv(p)
    bad = write_rows(tmp_path / "c.csv", [row("10/03/2004", "18.00.00", "abc")])
    with pytest.raises(ParseError):
        load_csv(bad)
    with pytest.raises(OSError):
        load_csv(tmp_path / "nope.csv")


def test_surrogate_loads_without_sentinels(surrogate_csv):
    t = load_csv(surrogate_csv)
    assert len(t) > 1000
    assert not (t[FEATURES + [TARGET]] == SENTINEL).any().any()
    assert t[TIMESTAMP].is_monotonic_increasing


# -- normalization ------------------------------------------------------------------------------

def test_normalize_uses_training_stats(surrogate_csv):
    t = load_csv(surrogate_csv)
    train, test = split_grouped(t, 0.3, seed=1)
    cols = FEATURES + [TARGET]
    ntrain, stats = normalize(train, columns=cols)
    for c in cols:
        assert abs(ntrain[c].mean()) < 1e-12 and abs(ntrain[c].std(ddof=0) - 1) < 1e-12
    ntest, _ = normalize(test, stats, columns=cols)
    c = FEATURES[0]
    assert np.allclose(ntest[c], (test[c] - stats.mean[c]) / stats.std[c])
    assert abs(ntest[c].mean()) > 1e-6


def test_zero_variance():
    with pytest.raises(ZeroVariance):
        fit_stats(pd.DataFrame({"a": [1.0, 1.0, 1.0]}), ["a"])


# -- embedding ---------------------------------------------------------------------------------

def one_row(month, nox=100.0, co=2.0):
    d = {TIMESTAMP: [pd.Timestamp(2004, month, 5, 12)], TARGET: [co]}
    for f in FEATURES:
        d[f] = [nox if f == "PT08.S3(NOx)" else 50.0]
    return pd.DataFrame(d)


def test_embedding_examples():
    prof = air_quality_profile()
    nox = FEATURES.index("PT08.S3(NOx)")
    # outward rounding of the radius may cost one ulp on each side
    april = embed_intervals(one_row(4), prof).features[0, nox]
    assert 95.0 - np.spacing(95.0) <= april.lo <= 95.0 <= 105.0 <= april.hi <= 105.0 + np.spacing(105.0)
    jan = embed_intervals(one_row(1), prof)
    iv = jan.features[0, nox]
    assert 99.5 - np.spacing(99.5) <= iv.lo <= 99.5 and 100.5 <= iv.hi <= 100.5 + np.spacing(100.5)
    assert jan.targets[0].lo == 2.0 and jan.targets[0].hi == 2.0
    june, july = embed_intervals(one_row(6), prof), embed_intervals(one_row(7), prof)
    assert june.features[0, nox].width > 9 and july.features[0, nox].width < 2


def test_beta_round_trip():
    rng = np.random.default_rng(0)
    prof = UncertaintyProfile(default_beta=0.07)
    d = {TIMESTAMP: pd.date_range("2004-01-01", periods=200, freq="h"), TARGET: np.ones(200)}
    for f in FEATURES:
        d[f] = rng.normal(0, 100, 200)
    ds = embed_intervals(pd.DataFrame(d), prof)
    for k in range(200):
        iv = ds.features[k, 0]
        beta = descriptors(iv).beta
        # two one-ulp endpoint steps, measured relative to the midpoint
        assert abs(beta - 0.07) <= 4 * np.finfo(float).eps


def test_zero_betas_give_normalized_midpoints(surrogate_csv):
    t = load_csv(surrogate_csv)
    prof = UncertaintyProfile(default_beta=0.0)
    train, _ = prepare(t, prof, test_fraction=0.25, seed=2)
    assert train.features.is_degenerate() and train.targets.is_degenerate()
    tr_raw, _ = split_grouped(t, 0.25, seed=2)
    norm, _ = normalize(tr_raw, columns=FEATURES + [TARGET])
    assert np.array_equal(train.features.lo, norm[FEATURES].to_numpy())
    assert np.array_equal(train.targets.lo, norm[TARGET].to_numpy())


def test_embedding_radius_is_raw_relative_over_std(surrogate_csv):
    t = load_csv(surrogate_csv)
    train, _ = prepare(t, air_quality_profile(), test_fraction=0.25, seed=2)
    tr_raw, _ = split_grouped(t, 0.25, seed=2)
    j = FEATURES.index("T")
    expect = np.abs(tr_raw["T"].to_numpy()) * 0.01 / 2 / train.stats.std["T"]
    got = train.features.radii()[:, j]
    assert np.allclose(got, expect, rtol=1e-12)


def test_profile_rules():
    with pytest.raises(NegativeUncertainty):
        Rule("T", -0.1)
    with pytest.raises(NegativeUncertainty):
        UncertaintyProfile(target_beta=-1.0)
    strict = UncertaintyProfile([Rule("T", 0.02)], default_beta=None)
    assert strict.betas("T", np.array([1, 2])).tolist() == [0.02, 0.02]
    with pytest.raises(UncoveredFeature):
        strict.betas("RH", np.array([1]))
    wrap = Rule("T", 0.1, 11, 2)
    assert wrap.active(np.array([12, 1, 3])).tolist() == [True, True, False]


def test_profile_files(tmp_path):
    prof = air_quality_profile()
    (tmp_path / "p.json").write_text(json.dumps(prof.to_dict()))
    assert load_profile(tmp_path / "p.json") == prof
    (tmp_path / "p.toml").write_text(
        'default_beta = 0.01\ntarget_beta = 0.0\n'
        '[[rules]]\nfeature = "PT08.S3(NOx)"\nbeta = 0.1\nfrom_month = 3\nto_month = 6\n')
    assert load_profile(tmp_path / "p.toml") == prof


# -- splitting --------------------------------------------------------------------------------

def test_split_groups_weeks_and_is_deterministic(surrogate_csv):
    t = load_csv(surrogate_csv)
    tr, te = split_indices(t[TIMESTAMP], 0.2, seed=4)
    tr2, te2 = split_indices(t[TIMESTAMP], 0.2, seed=4)
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)
    g = week_groups(t[TIMESTAMP])
    assert not set(g[tr]) & set(g[te])
    assert len(tr) + len(te) == len(t)
    assert 0.08 <= len(te) / len(t) <= 0.35
    other = split_indices(t[TIMESTAMP], 0.2, seed=5)[1]
    assert not np.array_equal(te, other)


def test_dataset_round_trip(tmp_path, surrogate_csv):
    train, _ = prepare(load_csv(surrogate_csv), air_quality_profile(), 0.2, seed=0)
    save_dataset(train, tmp_path / "d.json")
    back = load_dataset(tmp_path / "d.json")
    assert back.features == train.features and back.targets == train.targets
    assert back.stats.std == train.stats.std
    assert np.array_equal(back.timestamps, train.timestamps)
    sub = back.subset([0, 2])
    assert isinstance(sub, IntervalDataset) and len(sub) == 2
