import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from logerfdeconv.spectral import (
    Kernel,
    circular_convolve,
    delta_kernel,
    f_epsilon_kernel,
    fft2_normalized,
    gaussian_psf,
    ifft2_normalized,
    laplacian_kernel,
)


def brute_force_convolve(k, x):
    P = x.shape[0]
    out = np.zeros_like(x)
    for i in range(P):
        for j in range(P):
            s = 0.0
            for a in range(P):
                for b in range(P):
                    s += k[a, b] * x[(i - a) % P, (j - b) % P]
            out[i, j] = s
    return out


def test_constant_image_spectrum():
    P, c = 8, 1.7
    spec = fft2_normalized(np.full((P, P), c))
    assert spec[0, 0] == pytest.approx(P * c)
    spec[0, 0] = 0
    assert np.max(np.abs(spec)) < 1e-12


def test_pixel_sum_is_P_times_dc():
    x = np.random.default_rng(0).normal(size=(16, 16))
    assert x.sum() == pytest.approx(16 * fft2_normalized(x)[0, 0].real, rel=1e-12)


images = st.sampled_from([4, 8, 16, 128]).flatmap(
    lambda P: hnp.arrays(np.float64, (P, P), elements=st.floats(-1e3, 1e3, allow_nan=False))
)


@given(images)
@settings(max_examples=40, deadline=None)
def test_parseval_roundtrip_hermitian(x):
    spec = fft2_normalized(x)
    n2 = np.sum(x**2)
    assert np.sum(np.abs(spec) ** 2) == pytest.approx(n2, rel=1e-10, abs=1e-20)
    back = ifft2_normalized(spec)
    assert np.max(np.abs(back - x)) <= 1e-12 * max(1.0, np.max(np.abs(x)))
    flipped = np.roll(np.flip(spec, (0, 1)), 1, (0, 1))
    np.testing.assert_allclose(flipped, np.conj(spec), atol=1e-9 * max(1.0, np.max(np.abs(spec))))


def test_roundtrip_random_16():
    x = np.random.default_rng(1).normal(size=(16, 16))
    assert np.max(np.abs(ifft2_normalized(fft2_normalized(x)) - x)) <= 1e-12


def test_inverse_rejects_non_hermitian_spectrum():
    spec = np.zeros((8, 8), dtype=complex)
    spec[1, 2] = 1.0
    with pytest.raises(ArithmeticError):
        ifft2_normalized(spec)
    assert np.iscomplexobj(ifft2_normalized(spec, real=False))


@pytest.mark.parametrize("P", [3, 4, 5, 8])
def test_convolution_theorem_against_brute_force(P):
    rng = np.random.default_rng(P)
    k, x = rng.normal(size=(P, P)), rng.normal(size=(P, P))
    np.testing.assert_allclose(circular_convolve(Kernel(k), x), brute_force_convolve(k, x), atol=1e-10)


def test_delta_is_identity():
    x = np.random.default_rng(2).normal(size=(8, 8))
    np.testing.assert_allclose(circular_convolve(delta_kernel(8), x), x, atol=1e-14)


def test_size_mismatch():
    with pytest.raises(ValueError):
        circular_convolve(delta_kernel(8), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        Kernel(np.zeros((3, 4)))


def test_laplacian():
    D = laplacian_kernel(8)
    assert D.transfer[0, 0] == 0.0
    assert D.transfer[4, 0].real == pytest.approx(-4.0, abs=1e-14)
    p, q = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
    closed = 2 * np.cos(2 * np.pi * p / 8) + 2 * np.cos(2 * np.pi * q / 8) - 4
    np.testing.assert_allclose(D.transfer, closed, atol=1e-13)
    assert np.count_nonzero(np.abs(D.transfer) < 1e-12) == 1
    assert D.taps.sum() == 0.0
    np.testing.assert_allclose(circular_convolve(D, np.full((8, 8), 3.0)), 0.0, atol=1e-13)
    with pytest.raises(ValueError):
        laplacian_kernel(2)


def test_laplacian_stencil_rows():
    t = laplacian_kernel(5).taps
    stencil = np.roll(t, (1, 1), (0, 1))[:3, :3]
    np.testing.assert_array_equal(stencil, [[0, 1, 0], [1, -4, 1], [0, 1, 0]])


def test_f_epsilon():
    P, eps = 8, 0.05
    np.testing.assert_array_equal(f_epsilon_kernel(P, 0.0).taps, laplacian_kernel(P).taps)
    F = f_epsilon_kernel(P, eps)
    assert F.is_invertible()
    assert not laplacian_kernel(P).is_invertible()
    # only the DC coefficient moves, to eps * N
    diff = F.transfer - laplacian_kernel(P).transfer
    assert diff[0, 0] == pytest.approx(eps * P * P)
    diff[0, 0] = 0
    assert np.max(np.abs(diff)) < 1e-12
    # on a constant image every output pixel is eps * c * N
    out = circular_convolve(F, np.full((P, P), 2.0))
    np.testing.assert_allclose(out, eps * 2.0 * P * P, rtol=1e-12)


def test_gaussian_psf():
    P, fwhm = 64, 6.0
    H = gaussian_psf(P, fwhm)
    assert H.taps.sum() == pytest.approx(1.0, abs=1e-12)
    assert H.transfer[0, 0].real == pytest.approx(1.0, abs=1e-12)
    peak = H.taps[0, 0]
    assert H.taps[3, 0] == pytest.approx(peak / 2, rel=0.01)
    assert H.taps[0, 3] == H.taps[3, 0] == H.taps[-3, 0]
    # circular symmetry: value depends on toroidal radius only
    assert H.taps[3, 4] == pytest.approx(H.taps[5, 0], rel=1e-12)
    with pytest.raises(ValueError):
        gaussian_psf(8, 0.0)


def test_kernel_is_read_only():
    H = gaussian_psf(8, 2.0)
    with pytest.raises(ValueError):
        H.taps[0, 0] = 0.0
    with pytest.raises(ValueError):
        H.transfer[0, 0] = 0.0
