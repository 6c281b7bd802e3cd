"""Dense linear algebra kernel tests: eigensolvers, expm, solve."""

import math
import warnings

import numpy as np
import pytest

from etaqfi import linalg
from etaqfi.errors import NotHermitian, OverflowRiskWarning, Singular

RT5 = math.sqrt(5.0)


# --- validation helpers ------------------------------------------------------


def test_as_operator_rejects_nonsquare():
    with pytest.raises(ValueError, match="square"):
        linalg.as_operator(np.ones((2, 3)))


def test_as_operator_rejects_nonfinite():
    with pytest.raises(ValueError, match="non-finite"):
        linalg.as_operator(np.array([[1.0, np.inf], [0.0, 1.0]]))


def test_as_vector_flattens_column():
    v = linalg.as_vector(np.array([[1.0], [2.0]]))
    assert v.shape == (2,)
    assert v.dtype == np.complex128


def test_hermitize_symmetrizes():
    m = np.array([[1.0, 2.0], [0.0, 3.0]])
    h = linalg.hermitize(m)
    np.testing.assert_allclose(h, linalg.dagger(h))
    np.testing.assert_allclose(h, np.array([[1.0, 1.0], [1.0, 3.0]]))


def test_phase_fix_pins_largest_entry_real_positive():
    u = np.array([[-2.0 / RT5], [1.0 / RT5]], dtype=np.complex128)
    fixed = linalg.phase_fix_columns(u)
    assert fixed[0, 0].real > 0
    assert abs(fixed[0, 0].imag) < 1e-15


def test_phase_fix_tie_uses_first_index():
    # exactly tied magnitudes: the pivot must not chatter between rows
    col = np.array([-1j, 1.0], dtype=np.complex128) / math.sqrt(2.0)
    fixed = linalg.phase_fix_columns(col[:, None])[:, 0]
    np.testing.assert_allclose(fixed, np.array([1.0, 1j]) / math.sqrt(2.0), atol=1e-15)


# --- general eigendecomposition ----------------------------------------------


def test_eig_general_frozen_example():
    """Off-diagonal couplings 4 and 1: spectrum {2, -2}, vectors (2, +-1)/sqrt(5)."""
    sys = linalg.eig_general(np.array([[0.0, 4.0], [1.0, 0.0]]))
    np.testing.assert_allclose(sys.values, [2.0, -2.0], atol=1e-12)
    np.testing.assert_allclose(
        sys.right_vectors[:, 0], np.array([2.0, 1.0]) / RT5, atol=1e-12
    )
    np.testing.assert_allclose(
        sys.right_vectors[:, 1], np.array([2.0, -1.0]) / RT5, atol=1e-12
    )
    assert not sys.near_defective


def test_eig_general_descending_order():
    sys = linalg.eig_general(np.diag([1.0, 3.0, 2.0]))
    np.testing.assert_allclose(sys.values.real, [3.0, 2.0, 1.0])


def test_eig_general_reconstruction_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        sys = linalg.eig_general(m)
        if sys.vector_condition > 1e6:
            continue
        lhs = m @ sys.right_vectors
        rhs = sys.right_vectors * sys.values[None, :]
        assert linalg.fro(lhs - rhs) <= 1e-9 * linalg.fro(m)


def test_eig_general_flags_defective():
    sys = linalg.eig_general(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert sys.near_defective
    assert sys.vector_condition > 1e12


# --- Hermitian eigendecomposition --------------------------------------------


def test_eig_hermitian_rejects_nonhermitian():
    with pytest.raises(NotHermitian):
        linalg.eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_eig_hermitian_descending_and_orthonormal():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h = linalg.hermitize(a)
        he = linalg.eig_hermitian(h)
        assert np.all(np.diff(he.values) <= 1e-12)
        gram = linalg.dagger(he.basis) @ he.basis
        assert linalg.fro(gram - np.eye(n)) <= 1e-12
        rec = he.basis @ np.diag(he.values) @ linalg.dagger(he.basis)
        assert linalg.fro(rec - h) <= 1e-12 * max(1.0, linalg.fro(h))


# --- expm, solve, inverse ----------------------------------------------------


def test_expm_sigma_x_rotation():
    """exp(-i sx t)|0> = cos(t)|0> - i sin(t)|1>."""
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    t = 0.7
    state = linalg.expm(-1j * sx * t) @ np.array([1.0, 0.0])
    np.testing.assert_allclose(
        state, [math.cos(t), -1j * math.sin(t)], atol=1e-14
    )


def test_expm_group_property():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    a *= 0.8 / linalg.fro(a)
    whole = linalg.expm(a * 0.9)
    split = linalg.expm(a * 0.5) @ linalg.expm(a * 0.4)
    assert linalg.fro(whole - split) <= 1e-12


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_expm_warns_at_large_norm():
    with pytest.warns(OverflowRiskWarning):
        linalg.expm(np.eye(2) * 2.0e3)


def test_expm_quiet_at_moderate_norm():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        linalg.expm(np.eye(2) * 0.5)


def test_solve_matches_numpy():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    x = linalg.solve(a, b)
    np.testing.assert_allclose(a @ x, b, atol=1e-10)


def test_solve_raises_on_singular():
    with pytest.raises(Singular):
        linalg.solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 0.0]))


def test_inverse_round_trip():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((5, 5))
    inv = linalg.inverse(a)
    np.testing.assert_allclose(a @ inv, np.eye(5), atol=1e-10)
