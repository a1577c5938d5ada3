"""Compound Gauss/Laplace prior field with explicit partition function.

The field is defined through an auxiliary image ``B``:

* ``B`` has i.i.d. Laplace pixels, density proportional to
  ``exp(-gamma_b |b| / 2)``;
* given ``B``, ``F * X - B`` is white Gaussian with inverse variance
  ``gamma_d``, where ``F`` is an invertible circular filter.

Because ``X -> F * X`` is a bijection, the conditional normalizer does not
depend on ``B`` and the joint normalizer factorizes. Marginalizing ``B``
gives a field on ``X`` with the Log-Erf potential applied to ``F * X``.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .potential import PotentialParams, phi, phi_offset
from .rng import open_uniform
from .spectral import Kernel, circular_convolve, f_epsilon_kernel, fft2_normalized, ifft2_normalized

__all__ = [
    "FieldParams",
    "NonNormalizableError",
    "log_partition_gaussian",
    "log_partition_conditional",
    "log_partition_laplace",
    "log_partition_joint",
    "log_delta",
    "log_partition_joint_delta_form",
    "sample_laplace",
    "sample_x_given_b",
    "sample_prior",
    "histograms",
    "marginal_log_density",
]


class NonNormalizableError(ValueError):
    """The field has a zero transfer coefficient and cannot be normalized."""


@dataclass(frozen=True, eq=False)
class FieldParams:
    """Prior-field parameters.

    ``structure`` overrides the default filter ``F_eps`` (Laplacian plus
    ``eps`` on every tap) with an arbitrary square kernel of size ``P``.
    """

    potential: PotentialParams
    eps: float
    P: int
    structure: Optional[Kernel] = None

    @property
    def N(self) -> int:
        return self.P * self.P

    def kernel(self) -> Kernel:
        if self.structure is not None:
            if self.structure.size != self.P:
                raise ValueError("structure kernel size does not match P")
            return self.structure
        return f_epsilon_kernel(self.P, self.eps)


def _log_abs_transfer(F: Kernel) -> np.ndarray:
    mag = np.abs(F.transfer)
    scale = max(1.0, float(mag.max()))
    zero = mag <= 1e-12 * scale
    if np.any(zero):
        p, q = np.argwhere(zero)[0]
        raise NonNormalizableError(f"transfer coefficient at bin ({p}, {q}) is zero")
    return np.log(mag)


def log_partition_gaussian(F: Kernel, gamma_d: float) -> float:
    """``log int exp(-gamma_d ||F * X - B||^2 / 2) dX`` (independent of B)."""
    n = F.taps.size
    return 0.5 * n * (math.log(2.0 * math.pi) - math.log(gamma_d)) - float(_log_abs_transfer(F).sum())


def log_partition_conditional(fp: FieldParams) -> float:
    return log_partition_gaussian(fp.kernel(), fp.potential.gamma_d)


def log_partition_laplace(fp: FieldParams) -> float:
    return -fp.N * math.log(fp.potential.gamma_b / 4.0)


def log_partition_joint(fp: FieldParams) -> float:
    if fp.structure is None and not fp.eps > 0:
        raise NonNormalizableError("eps must be positive for the field to be normalizable")
    return log_partition_conditional(fp) + log_partition_laplace(fp)


def log_delta(P: int) -> float:
    """``log delta``: ``-(N/2) log(32 pi)`` plus the non-DC Laplacian log-magnitudes."""
    d = np.abs(np.fft.fft2(f_epsilon_kernel(P, 0.0).taps))
    n = P * P
    return -0.5 * n * math.log(32.0 * math.pi) + float(np.log(d.ravel()[1:]).sum())


def log_partition_joint_delta_form(fp: FieldParams, dc: Optional[float] = None) -> float:
    """Joint log-normalizer written as ``-log(delta * dc * gamma_d^(N/2) * gamma_b^N)``.

    ``dc`` is the DC transfer coefficient of the structure filter. It
    defaults to the value produced by :func:`f_epsilon_kernel`, ``eps * N``;
    passing ``dc=eps`` gives the bare-``eps`` form, which differs from the
    exact normalizer by the constant ``log N``.
    """
    if not fp.eps > 0:
        raise NonNormalizableError("eps must be positive for the field to be normalizable")
    if dc is None:
        dc = fp.eps * fp.N
    p = fp.potential
    return -(
        log_delta(fp.P)
        + math.log(dc)
        + 0.5 * fp.N * math.log(p.gamma_d)
        + fp.N * math.log(p.gamma_b)
    )


def sample_laplace(gamma_b: float, rng: np.random.Generator, shape) -> np.ndarray:
    """Exact inverse-CDF draws from the density ``(gamma_b/4) exp(-gamma_b |b| / 2)``."""
    u = open_uniform(rng, shape)
    scale = 2.0 / gamma_b
    return np.where(u < 0.5, scale * np.log(2.0 * u), -scale * np.log(2.0 * (1.0 - u)))


def sample_x_given_b(B, fp: FieldParams, rng: np.random.Generator):
    """Draw ``X`` given ``B``.

    ``F * X = B + W`` with ``W`` white Gaussian of variance ``1/gamma_d``, so
    ``X`` is obtained by spectral division of a real image: its spectrum is
    Hermitian by construction, with mean ``B/F`` and inverse variance
    ``gamma_d |F|^2`` per bin.
    """
    F = fp.kernel()
    _log_abs_transfer(F)
    xbar = B + rng.standard_normal(B.shape) / math.sqrt(fp.potential.gamma_d)
    return ifft2_normalized(fft2_normalized(xbar) / F.transfer)


def sample_prior(fp: FieldParams, rng: np.random.Generator):
    """Draw ``(X, B)`` from the joint prior: Laplace ``B``, then ``X`` given ``B``."""
    _log_abs_transfer(fp.kernel())
    B = sample_laplace(fp.potential.gamma_b, rng, (fp.P, fp.P))
    return sample_x_given_b(B, fp, rng), B


def histograms(X, B, fp: FieldParams, bins: int = 101) -> dict:
    """Histograms (counts and bin edges) of ``X``, ``B`` and ``F * X``."""
    out = {}
    for name, v in (("X", X), ("B", B), ("Xbar", circular_convolve(fp.kernel(), X))):
        out[name] = np.histogram(np.ravel(v), bins=bins)
    return out


def marginal_log_density(X, fp: FieldParams) -> float:
    """Exact log-density of the marginal field at ``X`` (``B`` integrated out)."""
    xbar = circular_convolve(fp.kernel(), X)
    pot = np.asarray(phi(xbar, fp.potential)) + phi_offset(fp.potential)
    return -log_partition_joint(fp) - 0.5 * float(pot.sum())
