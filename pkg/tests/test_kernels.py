import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpopinf.kernels import (KernelHyperparams, assemble_blocks, kernel_d1,
                             kernel_d1d2, kernel_eval)

times = st.floats(-5, 5, allow_nan=False)
positive = st.floats(0.05, 5.0)


def hp_(s2=1.0, ell=1.0, chi=0.0):
    return KernelHyperparams(s2, ell, chi)


def test_zero_distance_returns_signal_variance():
    assert kernel_eval(0.5, 0.5, hp_(2.0, 0.1)) == 2.0


def test_unit_distance_value():
    assert kernel_eval(0.0, 1.0, hp_()) == pytest.approx(0.6065307, abs=1e-7)


def test_d1_vanishes_at_zero_distance():
    assert kernel_d1(0.3, 0.3, hp_(3.0, 0.7)) == 0.0


def test_d1_value_matches_central_difference():
    h = 1e-6
    fd = (kernel_eval(1 + h, 0.0, hp_()) - kernel_eval(1 - h, 0.0, hp_())) / (2 * h)
    assert kernel_d1(1.0, 0.0, hp_()) == pytest.approx(-np.exp(-0.5), abs=1e-7)
    assert abs(kernel_d1(1.0, 0.0, hp_()) - fd) < 1e-7


def test_d1d2_at_zero_distance_is_signal_over_lengthscale_squared():
    hp = hp_(4.0, 2.0)
    assert kernel_d1d2(1.0, 1.0, hp) == pytest.approx(1.0, abs=1e-14)
    h = 1e-4
    fd = (kernel_eval(1 + h, 1 + h, hp) - kernel_eval(1 + h, 1 - h, hp)
          - kernel_eval(1 - h, 1 + h, hp) + kernel_eval(1 - h, 1 - h, hp)) / (4 * h * h)
    assert abs(fd - 1.0) < 1e-5


def test_d1d2_vanishes_at_unit_distance_for_unit_lengthscale():
    assert kernel_d1d2(0.0, 1.0, hp_()) == pytest.approx(0.0, abs=1e-15)
    assert kernel_d1d2(2.0, 1.0, hp_()) == pytest.approx(0.0, abs=1e-15)


@given(times, times, positive, positive)
def test_symmetries(a, b, s2, ell):
    hp = hp_(s2, ell)
    assert kernel_eval(a, b, hp) == kernel_eval(b, a, hp)
    assert kernel_d1(a, b, hp) == -kernel_d1(b, a, hp)
    assert kernel_d1d2(a, b, hp) == kernel_d1d2(b, a, hp)


@settings(max_examples=50)
@given(times, times, positive, positive)
def test_derivatives_against_finite_differences(a, b, s2, ell):
    hp = hp_(s2, ell)
    h = 1e-5 * ell
    fd1 = (kernel_eval(a + h, b, hp) - kernel_eval(a - h, b, hp)) / (2 * h)
    assert abs(kernel_d1(a, b, hp) - fd1) <= 1e-6 * s2 / ell
    h = 1e-4 * ell
    fd2 = (kernel_d1(a, b + h, hp) - kernel_d1(a, b - h, hp)) / (2 * h)
    assert abs(kernel_d1d2(a, b, hp) - fd2) <= 1e-4 * s2 / ell**2


def test_array_evaluation_is_outer_product():
    t1, t2 = np.array([0.0, 0.5, 2.0]), np.array([1.0, 3.0])
    K = kernel_eval(t1, t2, hp_(2.0, 0.7))
    assert K.shape == (3, 2)
    assert K[2, 1] == kernel_eval(2.0, 3.0, hp_(2.0, 0.7))


def test_assemble_blocks_single_point():
    blocks = assemble_blocks([0.0], [0.0], hp_(1.0, 1.0, 0.5))
    np.testing.assert_array_equal(blocks.Kyy, [[1.5]])
    np.testing.assert_array_equal(blocks.Kzy, [[0.0]])
    np.testing.assert_array_equal(blocks.Kzz, [[1.0]])


def test_assemble_blocks_noise_free_is_gram_matrix():
    t = np.linspace(0, 1, 7)
    hp = hp_(1.3, 0.4)
    np.testing.assert_array_equal(assemble_blocks(t, t, hp).Kyy,
                                  kernel_eval(t, t, hp))


@given(st.lists(st.floats(0, 10), min_size=2, max_size=12), positive, positive,
       st.floats(1e-3, 1.0))
def test_block_invariants(ts, s2, ell, chi):
    t = np.array(ts)
    t_est = np.linspace(0, 10, 9)
    b = assemble_blocks(t, t_est, hp_(s2, ell, chi))
    assert b.Kyy.shape == (t.size, t.size)
    assert b.Kzy.shape == (9, t.size)
    np.testing.assert_allclose(np.diag(b.Kyy), s2 + chi)
    np.testing.assert_array_equal(b.Kyy, b.Kyy.T)
    np.testing.assert_array_equal(b.Kzz, b.Kzz.T)
    assert np.linalg.eigvalsh(b.Kyy).min() > 0


@pytest.mark.parametrize("args", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0),
                                  (1.0, 1.0, -1e-3), (np.nan, 1.0)])
def test_invalid_hyperparameters_rejected(args):
    with pytest.raises(ValueError):
        KernelHyperparams(*args)
