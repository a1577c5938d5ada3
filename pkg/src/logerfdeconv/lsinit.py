"""Hyperparameter container and the empirical least-squares initializer."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .potential import critical_gamma_b
from .spectral import Kernel, fft2_normalized

__all__ = ["HyperParams", "LsMoments", "DegenerateDesignError", "ls_moments", "ls_solve", "ls_init"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HyperParams:
    gamma_n: float
    gamma_d: float
    gamma_b: float

    def __post_init__(self):
        for name in ("gamma_n", "gamma_d", "gamma_b"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    def as_tuple(self):
        return (self.gamma_n, self.gamma_d, self.gamma_b)


class DegenerateDesignError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LsMoments:
    """Bin averages of ``r``, ``r^2``, ``r z`` and ``z`` over the fitted bins."""

    a: float
    b: float
    c: float
    d: float
    count: int


def ls_moments(Y, H: Kernel, F: Kernel) -> LsMoments:
    """Moments of ``z = |Y_pq|^2`` against ``r = |h_pq|^2 / |f_pq|^2``.

    Under the prior, ``E z = r_d r + r_n`` in every bin where ``f`` is
    nonzero. Bins where ``f`` vanishes (the DC bin of the Laplacian) are
    skipped.
    """
    z = np.abs(fft2_normalized(Y)) ** 2
    f2 = np.abs(F.transfer) ** 2
    keep = f2 > 1e-24 * f2.max()
    r = np.abs(H.transfer[keep]) ** 2 / f2[keep]
    z = z[keep]
    return LsMoments(
        a=float(r.mean()), b=float((r * r).mean()), c=float((r * z).mean()), d=float(z.mean()),
        count=int(keep.sum()),
    )


def ls_solve(m: LsMoments):
    """Least-squares ``(r_d, r_n)`` for ``z ~ r_d r + r_n``; nonpositive values are clamped."""
    den = m.b - m.a * m.a
    if m.count < 2 or not den > 1e-14 * max(m.b, 1e-300):
        raise DegenerateDesignError("least-squares design is degenerate (all r values equal)")
    r_d = (m.c - m.a * m.d) / den
    r_n = (m.b * m.d - m.a * m.c) / den
    if r_d <= 0 and r_n <= 0:
        raise DegenerateDesignError("both least-squares variances are nonpositive")
    if r_d <= 0:
        log.warning("least-squares r_d=%g clamped", r_d)
        r_d = 1e-6 * r_n
    elif r_n <= 0:
        log.warning("least-squares r_n=%g clamped", r_n)
        r_n = 1e-6 * r_d
    return r_d, r_n


def ls_init(Y, H: Kernel, F: Kernel) -> HyperParams:
    """Initial ``gamma`` from second-order statistics of the data.

    ``gamma_d = 1/r_d``, ``gamma_n = 1/r_n`` and ``gamma_b`` is set at the
    critical value ``sqrt(2 pi gamma_d)``.
    """
    r_d, r_n = ls_solve(ls_moments(Y, H, F))
    gamma_d = 1.0 / r_d
    return HyperParams(gamma_n=1.0 / r_n, gamma_d=gamma_d, gamma_b=critical_gamma_b(gamma_d))
