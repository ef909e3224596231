import datetime as dt

import numpy as np
import pytest

from exphmm.data import (PriceSeries, align_and_assemble, descriptive_stats, load_dataset, read_wide_csv,
                         to_returns, write_outputs)
from exphmm.errors import DataError


def days(n, start=dt.date(2020, 1, 1)):
    return tuple(start + dt.timedelta(days=i) for i in range(n))


def test_returns_examples():
    assert to_returns(PriceSeries("a", days(2), [100.0, 100.0])).values[0] == 0.0
    assert to_returns(PriceSeries("a", days(2), [100.0, 105.0])).values[0] == pytest.approx(4.879016416943200, abs=1e-12)
    r = to_returns(PriceSeries("a", days(2), [3.0, 6.0]))
    assert r.values[0] == pytest.approx(69.31471805599453, abs=1e-12)
    assert r.dates == days(2)[1:]


def test_price_validation():
    with pytest.raises(DataError):
        PriceSeries("a", days(3), [1.0, 0.0, 2.0])
    with pytest.raises(DataError):
        PriceSeries("a", days(2)[::-1], [1.0, 2.0])
    with pytest.raises(DataError):
        to_returns(PriceSeries("a", days(1), [1.0]))


def test_returns_roundtrip():
    p = np.exp(np.cumsum(np.random.default_rng(0).normal(0, 0.02, 300))) * 50
    r = to_returns(PriceSeries("a", days(300), p)).values
    back = p[0] * np.exp(np.concatenate([[0], np.cumsum(r / 100)]))
    np.testing.assert_allclose(back, p, rtol=1e-10)


def test_align_identical_dates():
    rng = np.random.default_rng(1)
    s = [PriceSeries(n, days(20), np.exp(rng.normal(size=20))) for n in "abc"]
    data, dropped = align_and_assemble(s[0], s[1:])
    assert data.T == 19 and data.P == 3
    assert dropped == {"a": 0, "b": 0, "c": 0}
    assert np.all(data.X[:, 0] == 1)


def test_align_missing_middle_date():
    d = days(10)
    full = PriceSeries("y", d, np.arange(1.0, 11.0))
    gap = PriceSeries("x", d[:5] + d[6:], np.arange(1.0, 10.0) * 2)
    data, dropped = align_and_assemble(full, [gap])
    assert d[5].isoformat() not in data.dates
    assert list(data.dates) == sorted(data.dates)
    assert dropped == {"y": 1, "x": 0}
    # the x return dated d[6] spans the gap (computed within x before intersection)
    i = data.dates.index(d[6].isoformat())
    assert data.X[i, 1] == pytest.approx(100 * np.log(12 / 10))


def test_align_empty_intersection():
    a = PriceSeries("a", days(5), np.ones(5))
    b = PriceSeries("b", days(5, dt.date(2021, 1, 1)), np.ones(5))
    with pytest.raises(DataError):
        align_and_assemble(a, [b])
    with pytest.raises(DataError):
        align_and_assemble(a, [])


def test_descriptive_stats():
    row = descriptive_stats(np.full(10, 2.0))
    assert row["std"] == 0 and row["skewness"] is None and row["kurtosis"] is None
    row = descriptive_stats([-1.0, 1.0, -1.0, 1.0])
    assert row["mean"] == 0 and row["skewness"] == 0
    x = np.random.default_rng(2).standard_normal(400000)
    row = descriptive_stats(x)
    # sd of sample skewness ~ sqrt(6/n), of kurtosis ~ sqrt(24/n)
    assert abs(row["skewness"]) < 4 * np.sqrt(6 / x.size)
    assert abs(row["kurtosis"] - 3) < 4 * np.sqrt(24 / x.size)
    with pytest.raises(DataError):
        descriptive_stats([1.0, 2.0])


def test_read_wide_csv(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("date,a,b\n2020-01-03,3,30\n2020-01-01,1,10\n2020-01-02,2,\n")
    dates, cols = read_wide_csv(f)
    assert dates == list(days(3))
    assert np.isnan(cols["b"][1])
    f.write_text("date,a,b\n2020-01-01,1,10\n2020-01-02,2,\n2020-01-03,3,30\n2020-01-04,4,40\n2020-01-05,5,50\n")
    data, dropped = load_dataset(f, "a", ["b"])
    assert data.T == 3 and dropped == {"a": 1, "b": 0}
    assert data.X[0, 1] == pytest.approx(100 * np.log(3))
    for bad in ("when,a\n2020-01-01,1\n", "date,a\n2020-13-01,1\n", "date,a\n2020-01-01,x\n", "date,a\n2020-01-01\n"):
        f.write_text(bad)
        with pytest.raises(DataError):
            read_wide_csv(f)
    f.write_text("date,a\n2020-01-01,1\n2020-01-02,2\n")
    with pytest.raises(DataError, match="zz"):
        load_dataset(f, "a", ["zz"])


def test_write_outputs_all_or_nothing(tmp_path):
    out = tmp_path / "o"
    write_outputs(out, {"a.txt": "1", "b.txt": "2"})
    assert sorted(p.name for p in out.iterdir()) == ["a.txt", "b.txt"]
    with pytest.raises(TypeError):
        write_outputs(out, {"c.txt": "3", "d.txt": None})
    assert sorted(p.name for p in out.iterdir()) == ["a.txt", "b.txt"]
