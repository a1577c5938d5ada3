"""Gauss-Laplace convolution integrals and the Log-Erf potential.

The Log-Erf potential is minus twice the log of the convolution of a
Gaussian (inverse variance ``gamma_d``) with a Laplace density (scale
``gamma_b``). It is quadratic near the origin and linear with slope
``gamma_b`` far from it, and is matched to a Huber potential by equating
the curvature at zero and the slope at infinity.

Two derived quantities recur throughout:

* ``rho = gamma_b / (2 gamma_d)``, the soft-threshold of the joint criterion;
* ``eta = gamma_b / sqrt(8 gamma_d)``, which separates the quadratic-dominant
  (``eta << 1``) and linear-dominant (``eta >> 1``) regimes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .specfun import DomainError, erf, erfc, erfcx, log_erfc

__all__ = [
    "PotentialParams",
    "HuberEquiv",
    "integral_J",
    "integral_I",
    "log_chi",
    "phi",
    "phi_offset",
    "phi_prime",
    "phi_second_at_zero",
    "huber_equiv",
    "critical_gamma_b",
    "huber_potential",
    "huber_prime",
]


@dataclass(frozen=True)
class PotentialParams:
    gamma_d: float
    gamma_b: float

    def __post_init__(self):
        if not (self.gamma_d > 0 and self.gamma_b > 0):
            raise DomainError(
                f"gamma_d and gamma_b must be positive, got {self.gamma_d}, {self.gamma_b}"
            )

    @property
    def rho(self) -> float:
        return self.gamma_b / (2.0 * self.gamma_d)

    @property
    def eta(self) -> float:
        return self.gamma_b / math.sqrt(8.0 * self.gamma_d)


@dataclass(frozen=True)
class HuberEquiv:
    lam: float
    s: float

    def __post_init__(self):
        if not (self.lam > 0 and self.s > 0):
            raise DomainError(f"lambda and s must be positive, got {self.lam}, {self.s}")


def _erf_diff(a, b):
    """erf(a) - erf(b) without cancellation when a and b share a sign."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_pos = (a > 0) & (b > 0)
    both_neg = (a < 0) & (b < 0)
    return np.where(
        both_pos,
        np.asarray(erfc(b)) - np.asarray(erfc(a)),
        np.where(
            both_neg,
            np.asarray(erfc(-a)) - np.asarray(erfc(-b)),
            np.asarray(erf(a)) - np.asarray(erf(b)),
        ),
    )


def integral_J(x0, x, d, b):
    """``int_0^x0 exp(-(d (y - x)^2 + b y) / 2) dy`` in closed form.

    ``x0`` may be ``math.inf``.
    """
    if d <= 0:
        raise DomainError("integral_J: d must be positive")
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 < 0) or np.any(np.isnan(x0)):
        raise DomainError("integral_J: x0 must be nonnegative")
    x = np.asarray(x, dtype=float)
    c = math.sqrt(d / 2.0)
    xt = x - b / (2.0 * d)
    # log of the prefactor sqrt(pi/2d) exp(b^2/8d) exp(-b x/2)
    log_pre = 0.5 * math.log(math.pi / (2.0 * d)) + b * b / (8.0 * d) - b * x / 2.0
    inf = np.isinf(x0)
    upper = np.where(inf, 0.0, x0)
    finite_part = np.exp(log_pre) * _erf_diff(xt * c, (xt - upper) * c)
    tail = np.exp(log_pre + np.asarray(log_erfc(-xt * c)))
    out = np.where(inf, tail, finite_part)
    out = np.where(x0 == 0, 0.0, out)
    return out.item() if out.ndim == 0 else out


def integral_I(x0, x, d, b):
    """``int_-inf^x0 exp(-(d (y - x)^2 + b |y|) / 2) dy``.

    Assembled from two :func:`integral_J` pieces; ``x0 = math.inf`` gives
    the full Gauss-Laplace convolution.
    """
    if d <= 0 or b <= 0:
        raise DomainError("integral_I: d and b must be positive")
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    neg = x0 < 0
    right = np.asarray(integral_J(np.inf, -x, d, b))
    out = np.where(
        neg,
        right - np.asarray(integral_J(np.where(neg, -x0, 0.0), -x, d, b)),
        right + np.asarray(integral_J(np.where(neg, 0.0, x0), x, d, b)),
    )
    return out.item() if out.ndim == 0 else out


def log_chi(x, p: PotentialParams):
    """``log(exp(gamma_b x / 2) erfc((rho + x) sqrt(gamma_d / 2)))``.

    The exponent and the erfc are fused through erfcx so no intermediate
    over- or underflows.
    """
    x = np.asarray(x, dtype=float)
    return p.gamma_b * x / 2.0 + np.asarray(log_erfc((p.rho + x) * math.sqrt(p.gamma_d / 2.0)))


def phi_offset(p: PotentialParams) -> float:
    """Additive constant dropped by :func:`phi`.

    ``phi(x) + phi_offset(p) == -2 log I(+inf, x, gamma_d, gamma_b)``.
    """
    log_c = 0.5 * math.log(math.pi / (2.0 * p.gamma_d)) + p.gamma_b**2 / (8.0 * p.gamma_d)
    return -2.0 * (log_c + math.log(2.0) + float(log_erfc(p.eta)))


def phi(x, p: PotentialParams):
    """Log-Erf potential, shifted so that ``phi(0) == 0``.

    Even and convex; see :func:`phi_offset` for the dropped constant.
    """
    lp = log_chi(x, p)
    lm = log_chi(-np.asarray(x, dtype=float), p)
    zero = math.log(2.0) + float(log_erfc(p.eta))
    out = -2.0 * (np.logaddexp(lp, lm) - zero)
    return out.item() if np.ndim(out) == 0 else out


def phi_prime(x, p: PotentialParams):
    """``-gamma_b (chi(x) - chi(-x)) / (chi(x) + chi(-x))``, bounded by gamma_b."""
    x = np.asarray(x, dtype=float)
    out = -p.gamma_b * np.tanh((log_chi(x, p) - log_chi(-x, p)) / 2.0)
    return out.item() if out.ndim == 0 else out


def phi_second_at_zero(p: PotentialParams) -> float:
    eta = p.eta
    return p.gamma_b**2 / 2.0 * (1.0 / (eta * math.sqrt(math.pi) * float(erfcx(eta))) - 1.0)


def huber_equiv(p: PotentialParams) -> HuberEquiv:
    """Huber parameters with the same curvature at 0 and slope at infinity."""
    c = phi_second_at_zero(p)
    return HuberEquiv(lam=c / 2.0, s=p.gamma_b / c)


def critical_gamma_b(gamma_d: float) -> float:
    """Crossover of the two log-log regimes of (lambda, s) versus gamma_b."""
    if not gamma_d > 0:
        raise DomainError("critical_gamma_b: gamma_d must be positive")
    return math.sqrt(2.0 * math.pi * gamma_d)


def huber_potential(x, h: HuberEquiv):
    x = np.abs(np.asarray(x, dtype=float))
    out = h.lam * np.where(x <= h.s, x * x, 2.0 * h.s * x - h.s * h.s)
    return out.item() if out.ndim == 0 else out


def huber_prime(x, h: HuberEquiv):
    x = np.asarray(x, dtype=float)
    out = 2.0 * h.lam * np.clip(x, -h.s, h.s)
    return out.item() if out.ndim == 0 else out
