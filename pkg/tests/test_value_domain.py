import pytest
from hypothesis import given, strategies as st

from hlsx.value_domain import (
    RefineOp,
    StrideInterval as SI,
    add_const,
    clamp,
    contains,
    from_values,
    hull,
    intersect,
    is_subset,
    mod_const,
    mul_const,
    refine,
)


def values(iv):
    return set() if iv is None else set(range(iv.min, iv.max + 1, iv.stride))


@st.composite
def intervals(draw, top=255, max_stride=16):
    lo = draw(st.integers(0, top))
    stride = draw(st.integers(1, max_stride))
    n = draw(st.integers(0, (top - lo) // stride))
    return SI(lo, lo + n * stride, stride)


def test_canonical_point_stride():
    assert SI(4, 4, 7).stride == 1


@pytest.mark.parametrize("bad", [(5, 3, 1), (0, 5, 2), (0, 4, 0), (-1, 2, 1)])
def test_rejects_malformed(bad):
    with pytest.raises(ValueError):
        SI(*bad)


@pytest.mark.parametrize(
    "iv, v, expected",
    [(SI(0, 15), 9, True), (SI(0, 8, 2), 5, False), (SI(2, 10, 2), 10, True)],
)
def test_contains(iv, v, expected):
    assert contains(iv, v) is expected
    assert (v in values(iv)) is expected


@pytest.mark.parametrize(
    "iv, c, expected",
    [(SI(0, 8), 1, SI(1, 9)), (SI(0, 8, 2), 2, SI(2, 10, 2)), (SI(5, 5), 0, SI(5, 5))],
)
def test_add_const(iv, c, expected):
    assert add_const(iv, c, SI(0, 15)) == expected
    assert values(expected) == {v + c for v in values(iv)}


def test_add_const_saturates_at_declared_max():
    # 14 + 3 and 16 + 3 saturate to 15; 15 itself is off the stride-2 grid
    assert add_const(SI(10, 16, 2), 3, SI(0, 15)) == SI(13, 15, 2)
    assert add_const(SI(12, 15, 3), 4, SI(0, 15)) == SI(15, 15)


@pytest.mark.parametrize(
    "iv, c, expected",
    [(SI(0, 15), 4, SI(0, 60, 4)), (SI(0, 5), 2, SI(0, 10, 2)), (SI(3, 3), 1, SI(3, 3))],
)
def test_mul_const(iv, c, expected):
    assert mul_const(iv, c) == expected
    assert values(expected) == {v * c for v in values(iv)}


def test_mod_const_even_values():
    # oracle: every 4-bit x through 4*x mod 10
    image = {4 * x % 10 for x in range(16)}
    assert image == {0, 2, 4, 6, 8}
    assert from_values(image) == SI(0, 8, 2)
    assert mod_const(SI(0, 60, 4), 10) == SI(0, 8, 2)


@pytest.mark.parametrize(
    "iv, c, expected",
    [(SI(0, 5), 10, SI(0, 5)), (SI(0, 15), 4, SI(0, 3))],
)
def test_mod_const(iv, c, expected):
    assert mod_const(iv, c) == expected
    assert from_values(v % c for v in values(iv)) == expected


def test_mod_const_exact_progression_image():
    iv = SI(1, 7, 6)
    assert {v % 4 for v in values(iv)} == {1, 3}
    assert mod_const(iv, 4) == SI(1, 3, 2)


def test_mod_const_residue_fallback_when_image_has_holes():
    iv = SI(3, 9, 3)
    assert {v % 7 for v in values(iv)} == {2, 3, 6}
    # gcd(3, 7) = 1, so the whole residue class below 7
    assert mod_const(iv, 7) == SI(0, 6)


@pytest.mark.parametrize(
    "iv, op, expected",
    [
        (SI(0, 15), RefineOp("lt", 9), SI(0, 8)),
        (SI(0, 15), RefineOp("ge", 9), SI(9, 15)),
        (SI(9, 15), RefineOp("eq", 9), SI(9, 9)),
        (SI(0, 8, 2), RefineOp("eq", 5), None),
        (SI(0, 3), RefineOp("neq", 3), SI(0, 2)),
        (SI(0, 15), RefineOp("neq", 5), SI(0, 15)),
        (SI(0, 15), RefineOp("lt", 0), None),
    ],
)
def test_refine(iv, op, expected):
    assert refine(iv, op) == expected


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (SI(0, 10, 2), SI(0, 15, 3), SI(0, 6, 6)),
        (SI(10, 10), SI(0, 9), None),
        (SI(0, 9), SI(5, 5), SI(5, 5)),
    ],
)
def test_intersect(a, b, expected):
    assert intersect(a, b) == expected
    assert from_values(values(a) & values(b)) == expected


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (SI(0, 0), SI(2, 4, 2), SI(0, 4, 2)),
        (SI(1, 9), SI(1, 9), SI(1, 9)),
        (SI(0, 0), SI(3, 3), SI(0, 3, 3)),
    ],
)
def test_hull(a, b, expected):
    assert hull(a, b) == expected
    assert from_values(values(a) | values(b)) == expected


def test_json_rendering():
    assert SI(2, 10, 2).to_json() == {"min": 2, "max": 10, "stride": 2}
    assert SI.from_json({"min": 2, "max": 10, "stride": 2}) == SI(2, 10, 2)


@given(intervals(), st.integers(0, 40))
def test_add_const_sound(iv, c):
    bounds = SI(0, 255)
    out = add_const(iv, c, bounds)
    assert {min(v + c, 255) for v in values(iv)} <= values(out)
    assert is_subset(out, bounds)


@given(intervals(), st.integers(1, 20))
def test_mul_mod_sound(iv, c):
    assert {v * c for v in values(iv)} == values(mul_const(iv, c))
    assert {v % c for v in values(iv)} <= values(mod_const(iv, c))


@given(intervals(), st.sampled_from(["eq", "neq", "lt", "le", "gt", "ge"]), st.integers(0, 260))
def test_refine_sound_and_subset(iv, kind, bound):
    op = RefineOp(kind, bound)
    out = refine(iv, op)
    kept = {v for v in values(iv) if op.holds(v)}
    assert kept <= values(out)
    assert values(out) <= values(iv)
    if out is not None and kind != "neq":
        assert out == from_values(kept)


@given(intervals(), intervals())
def test_intersect_exact(a, b):
    assert values(intersect(a, b)) == values(a) & values(b)


@given(intervals(), intervals())
def test_hull_is_least(a, b):
    h = hull(a, b)
    assert values(a) | values(b) <= values(h)
    assert h == from_values(values(a) | values(b))


@given(intervals(), intervals())
def test_subset_agrees_with_sets(a, b):
    assert is_subset(a, b) == (values(a) <= values(b))


@given(intervals(top=40))
def test_clamp_sound(iv):
    bounds = SI(5, 20)
    out = clamp(iv, bounds)
    assert {min(max(v, 5), 20) for v in values(iv)} <= values(out)
    assert is_subset(out, bounds)
