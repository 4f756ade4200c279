import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.transform import Rotation

from repulsive_nbody import model
from repulsive_nbody.errors import DegenerateConfigurationError, NotApplicableError, UndefinedAtTimeError
from repulsive_nbody.model import ParticleState


def S(x, v=None, t=0.0):
    x = np.asarray(x, dtype=float)
    return ParticleState(t, x, np.zeros_like(x) if v is None else v)


COLLINEAR = S([[-1, 0, 0], [0, 0, 0], [1, 0, 0]])


def test_accelerations_single_particle_is_zero():
    assert np.array_equal(model.accelerations(S([[3.0, -2.0, 1.0]])), np.zeros((1, 3)))


def test_accelerations_two_body():
    a = model.accelerations(S([[0, 0, 0], [1, 0, 0]]))
    assert np.allclose(a, [[-1, 0, 0], [1, 0, 0]], rtol=0, atol=1e-15)


def test_accelerations_collinear_three():
    a = model.accelerations(COLLINEAR)
    assert np.array_equal(a[1], np.zeros(3))
    assert a[0] == pytest.approx([-1.25, 0, 0], abs=1e-15)


def test_coincident_particles_raise():
    s = S([[0, 0, 0], [1, 1, 1], [0, 0, 0]])
    with pytest.raises(DegenerateConfigurationError):
        model.accelerations(s)
    with pytest.raises(DegenerateConfigurationError):
        model.potential_energy(s)


def test_state_rejects_bad_shapes_and_nan():
    with pytest.raises(ValueError):
        ParticleState(0.0, np.zeros((2, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        ParticleState(0.0, [[np.nan, 0, 0]], [[0, 0, 0]])


@pytest.mark.parametrize(
    "state, expected",
    [
        (S([[0, 0, 0], [2, 0, 0]]), 0.5),
        (S([[5, 5, 5]]), 0.0),
        (COLLINEAR, 2.5),
    ],
)
def test_potential_energy(state, expected):
    assert model.potential_energy(state) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "v, expected",
    [
        ([[0, 0, 0], [0, 0, 0]], 0.0),
        ([[1, 0, 0], [-1, 0, 0]], 1.0),
    ],
)
def test_kinetic_energy(v, expected):
    assert model.kinetic_energy(S([[0, 0, 0], [1, 0, 0]], np.array(v, float))) == expected


def test_kinetic_energy_single():
    assert model.kinetic_energy(S([[0, 0, 0]], np.array([[0, 3.0, 4.0]]))) == 12.5


def test_relative_kinetic_energy():
    x = np.array([[1.0, 2, 3], [-4, 0, 1]])
    assert model.relative_kinetic_energy(ParticleState(2.0, x, x / 2.0)) == 0.0
    assert model.relative_kinetic_energy(ParticleState(2.0, [[2, 0, 0]], [[0, 0, 0]])) == 0.5
    for t in (0.0, -1.0):
        with pytest.raises(UndefinedAtTimeError):
            model.relative_kinetic_energy(ParticleState(t, [[2, 0, 0]], [[0, 0, 0]]))


def test_moment_of_inertia():
    assert model.moment_of_inertia(S(np.zeros((3, 3)))) == (0.0, 0.0)
    assert model.moment_of_inertia(S([[1, 1, 0]], np.array([[2.0, 0, 0]]))) == (1.0, 2.0)
    x1, v1 = np.array([0.3, -1.2, 2.0]), np.array([1.5, 0.25, -0.5])
    _, rate = model.moment_of_inertia(S([x1, -x1], np.array([v1, -v1])))
    assert rate == pytest.approx(2 * x1 @ v1)


def test_energy_report():
    r = model.energy_report(S([[-0.5, 0, 0], [0.5, 0, 0]]))
    assert (r.e_kin, r.e_pot, r.e_total) == (0.0, 1.0, 1.0)
    assert r.e_kin_rel is None
    free = model.energy_report(ParticleState(1.5, [[1, 2, 3]], [[0.5, 0, 0]]))
    assert free.e_pot == 0.0 and free.e_total == free.e_kin
    assert free.e_kin_rel == pytest.approx(model.relative_kinetic_energy(ParticleState(1.5, [[1, 2, 3]], [[0.5, 0, 0]])))


def test_pairwise_distances():
    assert model.min_pairwise_distance(S([[0, 0, 0], [0, 3, 0]])) == 3.0
    assert model.min_pairwise_distance(COLLINEAR) == 1.0
    d = model.pairwise_distances(COLLINEAR)
    assert np.array_equal(np.diag(d), np.zeros(3))
    assert np.array_equal(d, d.T)
    with pytest.raises(NotApplicableError):
        model.min_pairwise_distance(S([[0, 0, 0]]))


# --- property tests -------------------------------------------------------

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def configurations(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    x = draw(arrays(np.float64, (n, 3), elements=coords))
    v = draw(arrays(np.float64, (n, 3), elements=coords))
    d = model.pairwise_distances(S(x))
    if n > 1:
        from hypothesis import assume

        assume(d[np.triu_indices(n, 1)].min() > 1e-2)
    return ParticleState(draw(st.floats(0.1, 100)), x, v)


@settings(max_examples=200, deadline=None)
@given(configurations())
def test_accelerations_sum_to_zero(state):
    a = model.accelerations(state)
    scale = np.max(np.abs(a)) if state.n > 1 else 1.0
    assert np.linalg.norm(a.sum(axis=0)) <= state.n**2 * np.finfo(float).eps * max(scale, 1e-300) * 4


@settings(max_examples=100, deadline=None)
@given(configurations(), arrays(np.float64, 3, elements=st.floats(-5, 5)))
def test_translation_equivariance(state, shift):
    a0 = model.accelerations(state)
    a1 = model.accelerations(state.replace(positions=state.positions + shift))
    assert np.allclose(a1, a0, rtol=1e-8, atol=1e-10 * max(1.0, np.max(np.abs(a0))))


@settings(max_examples=100, deadline=None)
@given(configurations(), st.integers(0, 2**32 - 1))
def test_rotation_equivariance(state, seed):
    R = Rotation.random(random_state=seed).as_matrix()
    a0 = model.accelerations(state)
    a1 = model.accelerations(state.replace(positions=state.positions @ R.T))
    scale = max(np.max(np.abs(a0)), 1e-300)
    assert np.max(np.abs(a1 - a0 @ R.T)) <= 1e-12 * scale * max(1, 10 * state.n)


@settings(max_examples=100, deadline=None)
@given(configurations(), st.floats(0.25, 8.0))
def test_scaling_law(state, lam):
    a0 = model.accelerations(state)
    a1 = model.accelerations(state.replace(positions=lam * state.positions))
    scale = max(np.max(np.abs(a0)), 1e-300)
    assert np.max(np.abs(a1 - a0 / lam**2)) <= 1e-12 * scale / lam**2


def _brute_potential(x):
    total = 0.0
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            total += 1.0 / np.sqrt(sum((x[i][k] - x[j][k]) ** 2 for k in range(3)))
    return total


@settings(max_examples=200, deadline=None)
@given(configurations())
def test_potential_matches_double_loop(state):
    assert model.potential_energy(state) == pytest.approx(_brute_potential(state.positions.tolist()), rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(configurations(), arrays(np.float64, (8, 3), elements=st.floats(-1, 1).filter(lambda z: z == 0 or abs(z) > 1e-6)))
def test_relative_kinetic_energy_zero_iff_self_similar(state, dv):
    x = state.positions
    assert model.relative_kinetic_energy(state.replace(velocities=x / state.t)) <= 1e-28 * max(1, np.sum(x**2))
    kick = dv[: state.n]
    if np.any(kick != 0):
        assert model.relative_kinetic_energy(state.replace(velocities=x / state.t + kick)) > 0
