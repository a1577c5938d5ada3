"""Toroidal image model: normalized FFT, circular convolution, kernels.

Images are plain ``P x P`` float arrays. Their spectra use the unitary
("ortho") FFT, so Parseval holds without factors and the pixel sum equals
``P`` times the DC coefficient.

A :class:`Kernel` stores its taps together with its *transfer function*,
the unnormalized DFT of the taps. Those are the eigenvalues of the circulant
operator, so ``spectrum(k * x) == kernel.transfer * spectrum(x)`` and
determinants are products of transfer coefficients.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Kernel",
    "fft2_normalized",
    "ifft2_normalized",
    "circular_convolve",
    "laplacian_kernel",
    "f_epsilon_kernel",
    "gaussian_psf",
    "delta_kernel",
    "IMAG_TOL",
]

IMAG_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Kernel:
    taps: np.ndarray
    transfer: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1]:
            raise ValueError(f"kernel must be square, got shape {taps.shape}")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        tr = np.fft.fft2(taps)
        tr.setflags(write=False)
        object.__setattr__(self, "transfer", tr)

    @property
    def size(self) -> int:
        return self.taps.shape[0]

    def is_invertible(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.transfer) > tol))


def _check_image(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"image must be square, got shape {img.shape}")
    return img


def fft2_normalized(img):
    return np.fft.fft2(_check_image(img), norm="ortho")


def ifft2_normalized(spec, real=True):
    """Inverse of :func:`fft2_normalized`.

    With ``real=True`` the imaginary residue is checked against ``IMAG_TOL``
    and discarded.
    """
    out = np.fft.ifft2(spec, norm="ortho")
    if not real:
        return out
    resid = np.max(np.abs(out.imag)) if out.size else 0.0
    if resid > IMAG_TOL * max(1.0, np.max(np.abs(out.real))):
        raise ArithmeticError(f"inverse transform not real (max imaginary part {resid:.3g})")
    return out.real.copy()


def circular_convolve(f: Kernel, x):
    x = _check_image(x)
    if x.shape != f.taps.shape:
        raise ValueError(f"size mismatch: kernel {f.taps.shape}, image {x.shape}")
    return ifft2_normalized(f.transfer * fft2_normalized(x))


def delta_kernel(P: int) -> Kernel:
    taps = np.zeros((P, P))
    taps[0, 0] = 1.0
    return Kernel(taps)


def laplacian_kernel(P: int) -> Kernel:
    """3x3 Laplacian stencil embedded toroidally, centre at the origin."""
    if P < 3:
        raise ValueError("laplacian_kernel needs P >= 3")
    taps = np.zeros((P, P))
    taps[0, 0] = -4.0
    taps[1, 0] = taps[-1, 0] = taps[0, 1] = taps[0, -1] = 1.0
    return Kernel(taps)


def f_epsilon_kernel(P: int, eps: float) -> Kernel:
    """Laplacian plus ``eps`` on every tap of the ``P x P`` kernel.

    Only the DC transfer coefficient moves: it becomes ``eps * P**2``.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return Kernel(laplacian_kernel(P).taps + eps)


def gaussian_psf(P: int, fwhm_pixels: float) -> Kernel:
    """Unit-sum circular Gaussian centred at the origin of the torus."""
    if not fwhm_pixels > 0:
        raise ValueError("fwhm must be positive")
    sigma = fwhm_pixels / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    idx = np.arange(P)
    d = np.minimum(idx, P - idx).astype(float)
    r2 = d[:, None] ** 2 + d[None, :] ** 2
    taps = np.exp(-r2 / (2.0 * sigma**2))
    return Kernel(taps / taps.sum())
