import json
import math

import numpy as np
from hypothesis import given, strategies as st

from zetamax import io, rng


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_real_roundtrip(x):
    s = io.fmt_real(x)
    assert float(s) == x
    assert "," not in s


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "a.csv"
    io.write_csv(p, ["a", "b"], [[1, 0.1], [2, math.pi]])
    io.write_csv(p, ["a", "b"], [[3, -1e-300]], append=True)
    header, rows = io.read_csv(p)
    assert header == ["a", "b"]
    assert [float(r[1]) for r in rows] == [0.1, math.pi, -1e-300]


def test_json_is_canonical():
    obj = {"b": np.float64(1.5), "a": [np.int64(2), float("nan")], "c": 1 + 2j}
    s = io.dump_json(obj)
    assert s.endswith("\n")
    assert json.loads(s) == {"a": [2, None], "b": 1.5, "c": {"im": 2.0, "re": 1.0}}
    assert s == io.dump_json(json.loads(s))


def test_streams_are_keyed():
    a = rng.stream(5, 1, 2).random(4)
    b = rng.stream(5, 1, 2).random(4)
    c = rng.stream(5, 2, 1).random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert 0 <= rng.trial_uniform(5, 0) < 1
    assert 0 <= rng.fresh_seed() <= rng.SEED_MAX
