"""Smoke test of the Python bindings.

Build and install first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/gdlab_py-*.whl
Then run with `python python/smoke_test.py` or `pytest python/smoke_test.py`.
"""

import math

import gdlab_py as g


def test_parse_round_trip():
    text = g.parse("catalog(double_cone)")
    assert text == "catalog(double_cone)"
    assert g.parse(text) == text


def test_parse_error_is_value_error():
    try:
        g.parse("implicit(3; x1^2+")
    except ValueError as e:
        assert "syntax" in str(e)
    else:
        raise AssertionError("expected ValueError")


def test_catalog_and_oracle():
    assert "reversal" in g.catalog_names()
    rows = g.oracle_table()
    assert any(r["name"] == "double_cone" and r["predicate"] == "band_z" for r in rows)


def test_sample_counts():
    s = g.sample("catalog(double_cone)", 7, per_band=500)
    assert s["schema"] == g.SCHEMA
    assert s["points"] == sum(b["points"] for b in s["bands"])


def test_gd_of_double_cone_is_unit_and_full_dimensional():
    d = g.gd("catalog(double_cone)", 7)
    assert d["cone_dim"] == 3
    for a in d["directions"][:100]:
        assert abs(math.sqrt(sum(x * x for x in a)) - 1.0) < 1e-9


def test_decompose_reversal():
    d = g.decompose("catalog(reversal)", 7)
    assert d["lambda0"] == [4, 5]
    assert d["m0"] == 4


def test_iterate_double_cone():
    r = g.iterate("catalog(double_cone)", 7, max_degree=4)
    assert r["stabilized_at"] == 2
    assert r["bound_satisfied"]
    assert [c["degree"] for c in r["chain"]][:3] == [0, 1, 2]


def test_point_germ():
    assert g.gd("catalog(point, 3)", 1)["directions"] == []
    assert g.decompose("catalog(point, 3)", 1)["m0"] == 0


def test_determinism_criterion():
    assert g.run_criterion(10, 7)["pass"]


if __name__ == "__main__":
    tests = [(k, v) for k, v in sorted(globals().items()) if k.startswith("test_")]
    for name, fn in tests:
        fn()
        print(f"ok {name}")
    print(f"{len(tests)} passed")
