import math

import numpy as np
import pytest

from sectkit.errors import ContainmentError, ParseError, ValidationError
from sectkit.shapes import (BallUnion, FamilyParams, ShapeSpec, TriMesh, arc_parameters,
                            first_arc_range, load_mesh, make_deterministic_shape,
                            sample_group, sample_random_shape, shape_stream, write_off)

TETRA = """OFF
# boundary of a tetrahedron
4 4 6
0 0 0.5
0.4 0 -0.2
-0.2 0.35 -0.2
-0.2 -0.35 -0.2
3 0 1 2
3 0 1 3
3 0 2 3
3 1 2 3
"""


def _write(tmp_path, text, name="m.off"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_single_triangle_closure(tmp_path):
    p = _write(tmp_path, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    shape = load_mesh(p)
    assert shape.geometry.counts() == (3, 3, 1)
    assert shape.bounding_radius == pytest.approx(1.0)


def test_tetrahedron_boundary_counts(tmp_path):
    mesh = load_mesh(_write(tmp_path, TETRA)).geometry
    assert mesh.counts() == (4, 6, 4)
    assert mesh.euler_characteristic() == 2


def test_out_of_range_face_rejected(tmp_path):
    bad = TETRA.replace("3 1 2 3", "3 1 2 9")
    with pytest.raises(ValidationError):
        load_mesh(_write(tmp_path, bad))


def test_degenerate_face_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_mesh(_write(tmp_path, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 1\n"))


@pytest.mark.parametrize("text", [
    "",
    "PLY\n3 1 0\n",
    "OFF\n3 1\n0 0 0\n",
    "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n",
    "OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n",
    "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n4 0 1 2 3\n",
])
def test_malformed_off_is_a_parse_error(tmp_path, text):
    with pytest.raises(ParseError):
        load_mesh(_write(tmp_path, text))


def test_missing_file_is_a_parse_error(tmp_path):
    with pytest.raises(ParseError):
        load_mesh(tmp_path / "nope.off")


def test_off_round_trip(tmp_path):
    mesh = load_mesh(_write(tmp_path, TETRA)).geometry
    out = tmp_path / "copy.off"
    write_off(out, mesh)
    again = load_mesh(out).geometry
    assert np.array_equal(mesh.vertices, again.vertices)
    for a, b in zip(mesh.simplices, again.simplices):
        assert np.array_equal(a, b)


def test_trimesh_requires_closure():
    with pytest.raises(ValidationError):
        TriMesh(np.zeros((3, 2)) + np.arange(3)[:, None], (np.arange(3).reshape(-1, 1),
                                                          np.array([[0, 1]]), np.array([[0, 1, 2]])))


def test_mesh_containment_enforced():
    mesh = TriMesh.from_triangles([[0, 0], [2, 0], [0, 1]], [[0, 1, 2]])
    with pytest.raises(ContainmentError):
        ShapeSpec(mesh, 1.5)
    ShapeSpec(mesh, 2.0)


def test_ball_union_validation():
    with pytest.raises(ValidationError):
        BallUnion(np.zeros((0, 2)), 0.2)
    with pytest.raises(ValidationError):
        BallUnion(np.zeros((1, 2)), 0.0)


def test_k1_reference_shape():
    s = make_deterministic_shape("K1", 100)
    assert s.geometry.centers.shape == (200, 2)
    assert s.geometry.radius == 0.2
    assert s.bounding_radius == 1.5


def test_k1_small_j():
    assert len(make_deterministic_shape("K1", 3).geometry.centers) == 6
    with pytest.raises(ValidationError):
        make_deterministic_shape("K1", 2)


def test_k2_first_arc_is_full_circle():
    J = 100
    c = make_deterministic_shape("K2", J).geometry.centers[:J]
    t = 2 * math.pi * np.arange(1, J + 1) / J
    assert np.allclose(c, np.column_stack([0.4 + np.cos(t), np.sin(t)]), atol=1e-15)
    # a full circle: radius 1 around (0.4, 0)
    assert np.allclose(np.linalg.norm(c - [0.4, 0], axis=1), 1.0)


def test_k1_k2_differ_only_in_first_arc():
    J = 50
    a = make_deterministic_shape("K1", J).geometry.centers
    b = make_deterministic_shape("K2", J).geometry.centers
    assert np.array_equal(a[J:], b[J:])
    assert not np.allclose(a[:J], b[:J])


def test_arc_parameters_equal_steps():
    t = arc_parameters(0.0, 1.0, 4)
    assert np.allclose(t, [0.25, 0.5, 0.75, 1.0])


def test_first_arc_range_epsilon():
    lo, hi = first_arc_range(0.1)
    assert lo == pytest.approx(0.18 * math.pi)
    assert hi == pytest.approx(1.82 * math.pi)
    assert first_arc_range(0.0) == pytest.approx((math.pi / 5, 9 * math.pi / 5))


def test_family_centers_inside_bounding_ball():
    for s in [make_deterministic_shape("K1"), make_deterministic_shape("K2")]:
        assert np.linalg.norm(s.geometry.centers, axis=1).max() <= s.bounding_radius
    # the tubes poke out by a few hundredths
    assert make_deterministic_shape("K1").max_extent() == pytest.approx(0.2 + math.sqrt(1.16 + 0.8 * math.cos(math.pi / 5)), abs=1e-3)


def test_zero_noise_limit_recovers_k1():
    s = sample_random_shape(FamilyParams(0.0, noise_sd=1e-14), shape_stream(7))
    k1 = make_deterministic_shape("K1")
    assert np.allclose(s.geometry.centers, k1.geometry.centers, atol=1e-12)


def test_sampling_is_reproducible():
    a = sample_random_shape(FamilyParams(0.05), shape_stream(3, 1, 2))
    b = sample_random_shape(FamilyParams(0.05), shape_stream(3, 1, 2))
    c = sample_random_shape(FamilyParams(0.05), shape_stream(3, 1, 3))
    assert np.array_equal(a.geometry.centers, b.geometry.centers)
    assert not np.array_equal(a.geometry.centers, c.geometry.centers)


def test_group_members_independent_of_order():
    group = sample_group(FamilyParams(0.0), 5, 11, 4)
    single = sample_random_shape(FamilyParams(0.0), shape_stream(11, 4, 3))
    assert np.array_equal(group[3].geometry.centers, single.geometry.centers)


def test_amplitude_distribution():
    # amplitudes recovered from the arc centers follow N(1, 0.05^2)
    a1 = []
    for i in range(400):
        c = sample_random_shape(FamilyParams(0.0), shape_stream(5, i)).geometry.centers
        a1.append(0.4 - c[49, 0])  # t = pi on the first arc
    a1 = np.array(a1)
    assert abs(a1.mean() - 1) < 4 * 0.05 / 20
    assert 0.04 < a1.std() < 0.06


@pytest.mark.parametrize("kw", [dict(epsilon=-0.1), dict(noise_sd=0.0), dict(curve_points=2)])
def test_family_params_validation(kw):
    with pytest.raises(ValidationError):
        FamilyParams(**kw)
