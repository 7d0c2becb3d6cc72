import math

import numpy as np
import pytest

from sectkit.ecc import DirectionGrid, ECCurve, direction_grid, shape_eccs
from sectkit.errors import GridMismatchError, ParseError, ValidationError
from sectkit.sect import (ECTField, LevelGrid, SECTField, antiderivative, ect_samples, h_norm_diff,
                          holder_constant, read_field, read_field_dir, rho_discrete, rho_matrix,
                          sect_field, sect_from_ecc, write_field)
from sectkit.shapes import FamilyParams, make_deterministic_shape, sample_group


def random_curve(rng, T=3.0, k_max=12):
    k = int(rng.integers(1, k_max + 1))
    times = np.sort(rng.uniform(0, T, k))
    jumps = rng.integers(-2, 3, k)
    return ECCurve.from_jumps(T, times, jumps)


def riemann_sect(curve, levels, N):
    """Independent left-endpoint Riemann oracle written with plain loops over levels."""
    T = levels.T
    h = T / N
    grid = np.arange(N) * h
    vals = curve(grid).astype(float)
    out = []
    total = vals.sum() * h
    for t in levels.levels:
        m = int(round(t / h))
        out.append(vals[:m].sum() * h - t / T * total)
    return np.array(out)


def test_level_grid():
    g = LevelGrid(3.0, 50)
    assert g.levels[-1] == 3.0
    assert np.allclose(g.levels, 0.06 * np.arange(1, 51))
    with pytest.raises(ValidationError):
        LevelGrid(3.0, 1)
    with pytest.raises(ValidationError):
        LevelGrid(0.0, 5)


def test_constant_curve_gives_zero_sect():
    assert np.allclose(sect_from_ecc(ECCurve.constant(2.0, 1), LevelGrid(2.0, 10)), 0, atol=1e-15)


def test_single_jump_closed_form():
    T, s = 3.0, 1.1
    c = ECCurve(T, np.array([s]), np.array([1]))
    lv = LevelGrid(T, 30)
    t = lv.levels
    expect = np.maximum(0, t - s) - t * (T - s) / T
    assert np.allclose(sect_from_ecc(c, lv), expect, atol=1e-14)
    # the value at the jump itself
    lv2 = LevelGrid(T, 300)
    q = np.argmin(abs(lv2.levels - s))
    assert sect_from_ecc(c, lv2)[q] == pytest.approx(-s * (T - s) / T)


def test_antiderivative_piecewise_linear():
    c = ECCurve(4.0, np.array([1.0, 2.0, 3.0]), np.array([2, -1, 0]))
    assert np.allclose(antiderivative(c, [0, 0.5, 1, 1.5, 2, 2.5, 3, 4]), [0, 0, 0, 1, 2, 1.5, 1, 1])


def test_endpoint_zero(rng):
    for _ in range(50):
        row = sect_from_ecc(random_curve(rng), LevelGrid(3.0, int(rng.integers(2, 120))))
        assert abs(row[-1]) <= 1e-9


def test_linearity(rng):
    lv = LevelGrid(3.0, 40)
    for _ in range(20):
        a, b = random_curve(rng), random_curve(rng)
        assert np.allclose(sect_from_ecc(a + b, lv), sect_from_ecc(a, lv) + sect_from_ecc(b, lv), atol=1e-12)


def test_riemann_consistency(rng):
    lv = LevelGrid(3.0, 50)
    N = 100_000
    for _ in range(20):
        c = random_curve(rng)
        exact = sect_from_ecc(c, lv)
        bound = 2 * lv.T * np.abs(np.diff(c.values, prepend=0)).sum() / N
        assert np.abs(exact - riemann_sect(c, lv, N)).max() <= bound
        assert np.allclose(sect_from_ecc(c, lv, "riemann", N), riemann_sect(c, lv, N), atol=1e-9)


def test_riemann_error_shrinks_with_n(rng):
    lv = LevelGrid(3.0, 50)
    c = random_curve(rng)
    exact = sect_from_ecc(c, lv)
    errs = [np.abs(exact - sect_from_ecc(c, lv, "riemann", N)).max() for N in (1000, 10_000, 100_000)]
    assert errs[0] > errs[1] > errs[2]


def test_k1_sect_against_riemann_oracle():
    K1 = make_deterministic_shape("K1", 100)
    c = shape_eccs(K1, np.array([[1.0, 0.0]]), "arcs")[0]
    lv = LevelGrid(3.0, 100)
    exact = sect_from_ecc(c, lv)
    N = 100_000
    jumps = np.abs(np.diff(c.values, prepend=0)).sum()
    assert np.abs(exact - riemann_sect(c, lv, N)).max() <= 2 * 3.0 * jumps / N
    # profile: starts negative (one component early on), ends at zero
    assert exact[-1] == pytest.approx(0, abs=1e-12)
    assert exact.min() < -0.2


def test_ect_samples_right_continuous():
    lv = LevelGrid(3.0, 10)
    c = ECCurve(3.0, np.array([lv.levels[2]]), np.array([1]))
    assert list(ect_samples(c, lv)) == [0, 0, 1, 1, 1, 1, 1, 1, 1, 1]
    assert not ect_samples(ECCurve.constant(3.0, 0), lv).any()


def test_horizon_mismatch():
    with pytest.raises(GridMismatchError):
        sect_from_ecc(ECCurve.constant(2.0, 1), LevelGrid(3.0, 5))
    with pytest.raises(GridMismatchError):
        ect_samples(ECCurve.constant(2.0, 1), LevelGrid(3.0, 5))


def test_sect_field_trivial_shape():
    from sectkit.shapes import BallUnion, ShapeSpec
    shape = ShapeSpec(BallUnion(np.array([[0.0, 0.0]]), 0.1), 1.0)
    # a single ball entering at t=1 is not constant; use a ball at the far end so chi is 1 from t=0
    shape = ShapeSpec(BallUnion(np.array([[-1.0, 0.0]]), 0.1), 1.0)
    sect, ect = sect_field(shape, direction_grid(2, 1), LevelGrid(2.0, 2))
    assert sect.values.shape == (1, 2) and np.allclose(sect.values, 0)
    assert list(ect.values[0]) == [1, 1]


def test_sect_field_family_configuration():
    s = sample_group(FamilyParams(0.05), 1, 3)[0]
    sect, ect = sect_field(s, direction_grid(2, 4), LevelGrid(3.0, 50))
    assert sect.values.shape == (4, 50) and ect.values.shape == (4, 50)
    assert np.abs(sect.values[:, -1]).max() <= 1e-9


def test_sect_field_rejects_wrong_horizon():
    with pytest.raises(GridMismatchError):
        sect_field(make_deterministic_shape("K1", 10), direction_grid(2, 4), LevelGrid(2.0, 10))


def _ect(values, grid=None, T=3.0):
    values = np.atleast_2d(values)
    grid = grid or direction_grid(2, values.shape[0])
    return ECTField(grid, LevelGrid(T, values.shape[1]), values)


def test_rho_examples():
    a = _ect(np.zeros((2, 4), int))
    assert rho_discrete(a, a) == 0
    b = _ect(np.array([[0, 0, 2, 0], [0, 0, 0, 0]]))
    assert rho_discrete(a, b) == 2
    assert rho_discrete(_ect([[0, 0]]), _ect([[3, 4]])) == 5


def test_rho_metric_properties(rng):
    fields = [_ect(rng.integers(-3, 4, (3, 6))) for _ in range(12)]
    for x in fields:
        for y in fields:
            assert rho_discrete(x, y) == rho_discrete(y, x) >= 0
            assert (rho_discrete(x, y) == 0) == np.array_equal(x.values, y.values)
            for z in fields:
                assert rho_discrete(x, z) <= rho_discrete(x, y) + rho_discrete(y, z) + 1e-12


def test_rho_matrix_matches_pairwise(rng):
    vals = rng.integers(-3, 4, (6, 3, 5))
    D = rho_matrix(vals)
    for i in range(6):
        for j in range(6):
            assert D[i, j] == pytest.approx(rho_discrete(_ect(vals[i]), _ect(vals[j])), abs=1e-12)


def test_rho_grid_mismatch():
    with pytest.raises(GridMismatchError):
        rho_discrete(_ect(np.zeros((1, 4), int)), _ect(np.zeros((1, 5), int)))


def test_h_norm_examples():
    c = ECCurve(2.0, np.array([1.0]), np.array([1]))
    assert h_norm_diff(c, c) == 0
    assert h_norm_diff(ECCurve.constant(2.0, 1), ECCurve.constant(2.0, 0)) == 0
    assert h_norm_diff(c, ECCurve.constant(2.0, 0)) == pytest.approx(math.sqrt(0.5))


def test_h_norm_against_quadrature(rng):
    for _ in range(20):
        a, b = random_curve(rng), random_curve(rng)
        t = (np.arange(200_000) + 0.5) * 3.0 / 200_000
        g = (a(t) - b(t)).astype(float)
        g -= g.mean()
        approx = math.sqrt((g * g).mean() * 3.0)
        assert h_norm_diff(a, b) == pytest.approx(approx, abs=1e-3)


def test_holder_constant_formula():
    assert holder_constant(3, 1.5, 2) == pytest.approx(54.0)


def test_field_round_trip(tmp_path):
    s = sample_group(FamilyParams(0.0), 1, 9)[0]
    sect, ect = sect_field(s, direction_grid(2, 4), LevelGrid(3.0, 50), shape_id="s0")
    write_field(tmp_path / "s0_sect", sect)
    write_field(tmp_path / "s0_ect.csv", ect)
    a, b = read_field(tmp_path / "s0_sect.csv"), read_field(tmp_path / "s0_ect.json")
    assert isinstance(a, SECTField) and isinstance(b, ECTField)
    assert np.array_equal(a.values, sect.values) and np.array_equal(b.values, ect.values)
    assert a.same_grid(sect) and a.shape_id == "s0"
    assert [f.kind for f in read_field_dir(tmp_path)] == ["ect", "sect"]


def test_field_read_errors(tmp_path):
    with pytest.raises(ParseError):
        read_field(tmp_path / "missing.csv")
    f = _ect(np.zeros((2, 3), int))
    write_field(tmp_path / "x", f)
    (tmp_path / "x.csv").write_text("0,0,0\n")
    with pytest.raises(ParseError):
        read_field(tmp_path / "x")
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ParseError):
        read_field(tmp_path / "x")


def test_field_validation():
    with pytest.raises(ValidationError):
        SECTField(direction_grid(2, 2), LevelGrid(3.0, 3), np.zeros((2, 4)))
    with pytest.raises(ValidationError):
        ECTField(direction_grid(2, 1), LevelGrid(3.0, 2), np.array([[0.5, 1.0]]))
    with pytest.raises(ValidationError):
        SECTField(direction_grid(2, 1), LevelGrid(3.0, 2), np.array([[np.nan, 1.0]]))
