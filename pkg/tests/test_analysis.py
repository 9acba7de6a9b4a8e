import numpy as np
import pytest

from quditdistill.analysis import (
    UNRESOLVED,
    ContinuumProfile,
    Stability,
    asymptotic_weights,
    continuum_evolve,
    fixed_points_isotropic,
    heisenberg_block,
    iterate_simplex,
    parabolic_profile,
    phase_diagram,
    qrg_demo,
    qutrit_fixed_points,
    qutrit_jacobian,
    reference_doublet_up,
)
from quditdistill.errors import DegenerateDistributionError, InvalidStateError, OutOfRangeError
from quditdistill.recursion import closed_form_subset, step_qutrit, step_subset

S, U = Stability.STABLE, Stability.UNSTABLE

QUTRIT_POINTS = {
    (0.0, 0.0): S,
    (1.0, 0.0): S,
    (0.0, 1.0): S,
    (0.5, 0.0): U,
    (0.0, 0.5): U,
    (0.5, 0.5): U,
    (1 / 3, 1 / 3): U,
}


@pytest.fixture(scope="module")
def diagram():
    return phase_diagram(101)


@pytest.mark.parametrize("D", range(2, 11))
def test_isotropic_fixed_points(D):
    pts = fixed_points_isotropic(D)
    assert [p.coordinates[0] for p in pts] == pytest.approx([0.0, 1 / D, 1.0], abs=1e-15)
    assert [p.stability for p in pts] == [S, U, S]
    # derivative of F^2 / (F^2 + (1-F)^2/(D-1)) at 1/D is 2
    assert pts[1].rate == pytest.approx(2.0, abs=1e-6)
    assert pts[0].rate < 1e-5 and pts[2].rate < 1e-5


def test_isotropic_fixed_point_labels():
    assert [p.label for p in fixed_points_isotropic(2)] == ["(0)", "(1/2)", "(1)"]
    assert [p.label for p in fixed_points_isotropic(10)] == ["(0)", "(1/10)", "(1)"]


def test_qutrit_fixed_points():
    pts = qutrit_fixed_points()
    assert len(pts) == 7
    found = {}
    for p in pts:
        match = [c for c in QUTRIT_POINTS if np.max(np.abs(np.subtract(c, p.coordinates))) < 1e-8]
        assert len(match) == 1
        found[match[0]] = p.stability
    assert found == QUTRIT_POINTS


def test_qutrit_fixed_points_are_fixed():
    for p in qutrit_fixed_points():
        assert step_qutrit(*p.coordinates) == pytest.approx(p.coordinates, abs=1e-12)


def test_qutrit_jacobian_at_symmetric_point():
    # at (1/3,1/3) the map q_i^2 / sum q^2 has Jacobian 2 I - 2 * ones/3 restricted to (q0, q1) coordinates
    J = qutrit_jacobian(1 / 3, 1 / 3)
    assert np.max(np.abs(np.abs(np.linalg.eigvals(J)) - 2.0)) < 1e-6


@pytest.mark.parametrize("start, end", [((0.6, 0.2), "(1,0)"), ((0.2, 0.6), "(0,1)"), ((0.2, 0.2), "(0,0)")])
def test_phase_diagram_examples(diagram, start, end):
    i, j = (round(100 * c) for c in start)
    assert diagram.label_at(i, j) == end


def test_phase_diagram_first_step_example():
    a, b = step_qutrit(0.6, 0.2)
    assert a == pytest.approx(0.36 / 0.44, abs=1e-15)
    assert b == pytest.approx(0.04 / 0.44, abs=1e-15)


def test_phase_diagram_mirror_symmetry(diagram):
    swap = {"(1,0)": "(0,1)", "(0,1)": "(1,0)", "(1/2,0)": "(0,1/2)", "(0,1/2)": "(1/2,0)"}
    for c in diagram.cells:
        assert diagram.label_at(c.j, c.i) == swap.get(c.label, c.label)


def test_phase_diagram_grid(diagram):
    assert len(diagram.cells) == 101 * 102 // 2
    assert all(c.label != UNRESOLVED for c in diagram.cells)


def test_phase_diagram_matches_asymptotic_weights(diagram):
    # off the tie lines the terminal point is the unique-maximum vertex
    for c in diagram.cells:
        counts = (c.i, c.j, 100 - c.i - c.j)
        if len(set(counts)) == 3:
            expected = asymptotic_weights(np.array(counts) / 100)
            assert c.label == f"({int(expected[0])},{int(expected[1])})"


def test_phase_diagram_trapezoid(diagram):
    inside = [c for c in diagram.cells if c.i > c.j and 2 * c.i + c.j > 100]
    assert inside
    assert all(c.label == "(1,0)" for c in inside)


def test_iterate_simplex_stops_at_vertices():
    out = iterate_simplex(np.array([[10, 0, 0], [5, 5, 0], [4, 3, 3]]), 10, 200)
    assert np.array_equal(out[0], [1, 0, 0])
    assert np.array_equal(out[1], [0.5, 0.5, 0])
    assert np.allclose(out[2], [1, 0, 0], atol=1e-15)


def test_phase_diagram_rejects_tiny_resolution():
    with pytest.raises(OutOfRangeError):
        phase_diagram(1)


@pytest.mark.parametrize(
    "q0, expected",
    [
        ([0.5, 0.3, 0.2], [1, 0, 0]),
        ([0.4, 0.4, 0.2], [0.5, 0.5, 0]),
        ([0.25] * 4, [0.25] * 4),
    ],
)
def test_asymptotic_weights(q0, expected):
    assert np.array_equal(asymptotic_weights(q0), expected)
    assert np.allclose(closed_form_subset(q0, 60), expected, atol=1e-15)


def test_parabola_k1_peak():
    # int 36 (y - y^2)^2 dy = 1.2, so q1(1/2) = (36/16) / 1.2
    prof = continuum_evolve(parabolic_profile(1001), 1)
    assert prof.values[500] == pytest.approx(1.875, abs=1e-3)


def test_continuum_k0_unchanged():
    p = parabolic_profile()
    assert continuum_evolve(p, 0) is p


def test_continuum_peak_grows_and_concentrates():
    p = parabolic_profile()
    peaks, masses = [], []
    for k in range(0, 7):
        q = continuum_evolve(p, k)
        peaks.append(q.values.max())
        masses.append(q.mass_between(0.4, 0.6))
        assert np.argmax(q.values) == 500
        assert ContinuumProfile.integral(q.values, q.x) == pytest.approx(1.0, abs=1e-6)
        assert np.all(q.values >= 0)
    assert all(b > a for a, b in zip(peaks, peaks[1:]))
    assert all(b > a for a, b in zip(masses, masses[1:]))


def test_continuum_matches_discrete_subset_step():
    p = parabolic_profile(201)
    q = continuum_evolve(p, 1)
    discrete = step_subset(p.values) * (p.values.size - 1)
    # trapezoid and plain-sum normalizations differ only by the endpoint terms, which vanish here
    assert np.max(np.abs(q.values - discrete)) < 1e-6


def test_continuum_large_k_is_finite():
    q = continuum_evolve(parabolic_profile(), 60)
    assert np.all(np.isfinite(q.values))


def test_continuum_errors():
    with pytest.raises(DegenerateDistributionError):
        ContinuumProfile.from_samples(np.zeros(11))
    with pytest.raises(InvalidStateError):
        ContinuumProfile(np.linspace(0, 1, 11), np.full(11, 2.0))
    with pytest.raises(OutOfRangeError):
        continuum_evolve(parabolic_profile(), -1)


def test_heisenberg_spectrum():
    # open three-site chain: S=3/2 at J/2, doublets at 0 and -J
    e = np.linalg.eigvalsh(heisenberg_block(1.0))
    assert np.allclose(e, [-1, -1, 0, 0, 0.5, 0.5, 0.5, 0.5], atol=1e-12)


def test_reference_doublet_edge_factor():
    v = reference_doublet_up()
    # S3z = +1/2 on |udu>, |duu>; -1/2 on |uud>
    weights = np.abs(v) ** 2
    s3z = 0.5 * (weights[0b101] + weights[0b011] - weights[0b110])
    assert s3z / 0.5 == pytest.approx(2 / 3, abs=1e-15)


@pytest.mark.parametrize("J", [1.0, 2.5])
def test_qrg_demo(J):
    r = qrg_demo(J)
    assert r.ground_energy == pytest.approx(-J, abs=1e-12 * J)
    assert r.doublet_overlap == pytest.approx(1.0, abs=1e-10)
    assert r.edge_spin_factor == pytest.approx(2 / 3, abs=1e-10)
    assert r.coupling_factor == pytest.approx(4 / 9, abs=1e-10)
    assert r.ground_degeneracy == 2
    assert np.allclose(r.renormalized_block, -J * np.eye(2), atol=1e-12)


def test_qrg_rejects_nonpositive_coupling():
    with pytest.raises(OutOfRangeError):
        qrg_demo(0.0)
