"""Error-function family on real arguments.

erf, erfc and erfcx are backed by the Cephes routines shipped with
``scipy.special``. On top of them this module adds the pieces the sampler
needs: a polished inverse ``ierf``, a log-domain ``log_erfc`` that never
underflows, and its inverse ``erfc_inv_log``.

All functions accept scalars or arrays and raise :class:`DomainError` on
non-finite input.
"""

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "erf",
    "erfc",
    "erfcx",
    "erfcx_prime",
    "ierf",
    "log_erfc",
    "erfc_inv_log",
]

TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)
_LOG_TINY = -700.0  # exp(-700) is still a normal double


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _finite(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name}: argument must be finite")
    return x


def _out(y):
    return y.item() if np.ndim(y) == 0 else y


def erf(x):
    x = _finite(x, "erf")
    return _out(special.erf(x))


def erfc(x):
    x = _finite(x, "erfc")
    return _out(special.erfc(x))


def erfcx(x):
    """Scaled complementary error function ``exp(x**2) * erfc(x)``.

    Evaluated directly (never as the product), so ``erfcx(700)`` is finite.
    Overflows to ``inf`` only for ``x < -26.6``.
    """
    x = _finite(x, "erfcx")
    return _out(special.erfcx(x))


def erfcx_prime(x):
    """Derivative of erfcx: ``2 x erfcx(x) - 2/sqrt(pi)``."""
    x = _finite(x, "erfcx_prime")
    return _out(2.0 * x * special.erfcx(x) - TWO_OVER_SQRT_PI)


def ierf(u):
    """Inverse of erf on the open interval (-1, 1).

    A rational initial guess (Cephes ``erfinv``) is refined by one Newton
    step on ``erf(x) - u``. Falls back to bisection where Newton does not
    improve the residual.
    """
    u = _finite(u, "ierf")
    if np.any(np.abs(u) >= 1.0):
        raise DomainError("ierf: argument must satisfy |u| < 1")
    x = special.erfinv(u)
    r0 = special.erf(x) - u
    step = r0 / (TWO_OVER_SQRT_PI * np.exp(-x * x))
    x1 = x - step
    r1 = special.erf(x1) - u
    better = np.abs(r1) < np.abs(r0)
    x = np.where(better, x1, x)
    bad = np.abs(np.where(better, r1, r0)) > 1e-13
    if np.any(bad):
        x = np.where(bad, _ierf_bisect(np.atleast_1d(u)).reshape(np.shape(u)), x)
    return _out(x)


def _ierf_bisect(u, iters=200):
    lo = np.full_like(u, -6.0)
    hi = np.full_like(u, 6.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        left = special.erf(mid) < u
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def log_erfc(x):
    """``log(erfc(x))`` without underflow for large positive ``x``."""
    x = _finite(x, "log_erfc")
    pos = x > 0
    xp = np.where(pos, x, 0.0)
    with np.errstate(divide="ignore"):
        big = np.log(special.erfcx(xp)) - xp * xp
        small = np.log(special.erfc(np.where(pos, 0.0, x)))
    return _out(np.where(pos, big, small))


def erfc_inv_log(logw):
    """Solve ``log(erfc(t)) = logw`` for ``t``.

    ``logw`` must lie in ``(-inf, log 2)``. For ``logw`` above ``-700`` the
    answer is ``erfcinv(exp(logw))``, polished by Newton in the log domain
    when ``t > 0``; below that, Newton alone runs from the leading-order
    asymptotic guess. The log-domain derivative is
    ``d log erfc(t)/dt = -2 / (sqrt(pi) erfcx(t))``.
    """
    logw = _finite(logw, "erfc_inv_log")
    if np.any(logw >= np.log(2.0)):
        raise DomainError("erfc_inv_log: argument must be below log(2)")
    shallow = logw > _LOG_TINY
    with np.errstate(under="ignore"):
        t = special.erfcinv(np.exp(np.where(shallow, logw, 0.0)))
    # leading-order guess for the deep tail: t^2 + log(t sqrt(pi)) = -logw
    a = -np.where(shallow, -1.0, logw)
    guess = np.sqrt(np.maximum(a - np.log(np.sqrt(np.pi * a)), 1.0))
    t = np.where(shallow, t, guess)
    newton = t > 0.5
    if np.any(newton):
        tn = np.where(newton, t, 1.0)
        for _ in range(4 if np.all(shallow | ~newton) else 8):
            g = np.log(special.erfcx(tn)) - tn * tn - np.where(newton, logw, 0.0)
            tn = tn + g * 0.5 * np.sqrt(np.pi) * special.erfcx(tn)
        t = np.where(newton, tn, t)
    return _out(t)
