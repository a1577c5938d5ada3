"""Gibbs sampler for the unsupervised posterior.

One sweep draws, in order, the auxiliary image ``B`` given ``X``, the
object ``X`` given ``(B, gamma, Y)`` and the hyperparameters
``gamma = (gamma_n, gamma_d, gamma_b)`` given ``(X, B, Y)``. The posterior
uses the bare Laplacian ``D`` as structure filter; the mean-level
parameter ``eps`` of the prior has been integrated out and never appears
here.

The posterior-mean estimate is the running average of the ``X`` draws,
seeded with the initial state (the data) as its first term.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .lsinit import HyperParams, ls_init
from .rng import open_uniform
from .specfun import erfc_inv_log, log_erfc
from .spectral import Kernel, circular_convolve, fft2_normalized, ifft2_normalized, laplacian_kernel

__all__ = [
    "HyperParams",
    "GammaPrior",
    "StoppingConfig",
    "ChainState",
    "ChainResult",
    "ImproperConditionalError",
    "UnobservedModeError",
    "sample_b_given_x",
    "object_conditional",
    "sample_x_given_rest",
    "draw_gamma",
    "gamma_conditionals",
    "sample_gamma",
    "run_chain",
]

log = logging.getLogger(__name__)

_LOG2 = math.log(2.0)
_LOGW_MAX = math.nextafter(_LOG2, -math.inf)


class ImproperConditionalError(ArithmeticError):
    """A hyperparameter conditional is not a proper gamma law."""


class UnobservedModeError(ArithmeticError):
    """A frequency bin has zero posterior precision."""


@dataclass(frozen=True)
class GammaPrior:
    """Conjugate gamma priors (shape ``alpha``, scale ``beta``) on each precision.

    ``(0, inf)`` is Jeffreys' prior, ``(1, inf)`` the uniform prior.
    """

    alpha_n: float = 0.0
    beta_n: float = math.inf
    alpha_d: float = 0.0
    beta_d: float = math.inf
    alpha_b: float = 0.0
    beta_b: float = math.inf

    def __post_init__(self):
        for name in ("alpha_n", "alpha_d", "alpha_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("beta_n", "beta_d", "beta_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive (inf allowed)")


@dataclass
class StoppingConfig:
    T: float = 5e-4
    min_iter: int = 50
    max_iter: int = 100_000
    burn_in: int = 0
    fixed_gamma: Optional[HyperParams] = None
    keep_samples: bool = False
    log_every: int = 100


@dataclass
class ChainState:
    X: np.ndarray
    B: Optional[np.ndarray]
    gamma: HyperParams
    iter: int = 0
    mean: Optional[np.ndarray] = None
    count: int = 0
    delta_norm: float = math.inf
    trace: List[tuple] = field(default_factory=list)
    saturations: int = 0
    samples: Optional[list] = None


@dataclass
class ChainResult:
    estimate: np.ndarray
    state: ChainState
    converged: bool

    @property
    def trace(self) -> np.ndarray:
        """Array with columns ``iter, gamma_n, gamma_d, gamma_b, delta_norm``."""
        return np.array(self.state.trace, dtype=float).reshape(-1, 5)

    def gamma_mean(self, burn_in: int = 0) -> HyperParams:
        tr = self.trace
        tr = tr[tr[:, 0] > burn_in]
        return HyperParams(*(float(v) for v in tr[:, 1:4].mean(axis=0)))


# -- move 1: auxiliary variables ------------------------------------------


def _sample_b(xbar, gamma_d, gamma_b, u):
    rho = gamma_b / (2.0 * gamma_d)
    c = math.sqrt(gamma_d / 2.0)
    xbar = np.asarray(xbar, dtype=float)
    u = np.asarray(u, dtype=float)
    lerf_m = np.asarray(log_erfc((rho + xbar) * c))
    lerf_p = np.asarray(log_erfc((rho - xbar) * c))
    log_theta_m = gamma_b * xbar / 2.0 + lerf_m
    log_theta_p = -gamma_b * xbar / 2.0 + lerf_p
    log_theta = np.logaddexp(log_theta_m, log_theta_p)
    log_s = log_theta_m - log_theta  # CDF at b = 0
    log_sc = log_theta_p - log_theta  # 1 - CDF at b = 0
    neg = u <= np.exp(log_s)
    with np.errstate(divide="ignore"):
        # conditional tail mass inside the chosen truncated Gaussian
        logw = np.where(
            neg,
            np.log(u) - log_s + lerf_m,
            np.log1p(-u) - log_sc + lerf_p,
        )
    sat = logw > _LOGW_MAX
    logw = np.minimum(logw, _LOGW_MAX)
    t = np.asarray(erfc_inv_log(logw))
    b = np.where(neg, xbar + rho - t / c, xbar - rho + t / c)
    return b, int(np.count_nonzero(sat))


def sample_b_given_x(xbar, gamma: HyperParams, u):
    """Inverse-CDF draw of ``b`` from ``exp(-(gamma_d (xbar - b)^2 + gamma_b |b|) / 2)``.

    The law is a two-piece mixture of truncated Gaussians, centred at
    ``xbar + rho`` on ``b <= 0`` and ``xbar - rho`` on ``b >= 0``. ``u`` below
    the CDF at zero selects the left piece. Each piece is inverted through
    its erfc tail in the log domain, so neither the weights nor the inverse
    saturate. Vectorized over ``xbar`` and ``u``.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr <= 0) | (u_arr >= 1)):
        raise ValueError("u must lie in the open interval (0, 1)")
    b, _ = _sample_b(xbar, gamma.gamma_d, gamma.gamma_b, u_arr)
    return b.item() if b.ndim == 0 else b


# -- move 2: object -------------------------------------------------------


def object_conditional(Y_spec, B_spec, H: Kernel, D: Kernel, gamma_n: float, gamma_d: float):
    """Per-bin mean and precision of the Gaussian conditional of ``X``."""
    h = H.transfer
    d = D.transfer
    nu = gamma_n * np.abs(h) ** 2 + gamma_d * np.abs(d) ** 2
    bad = nu <= 0
    if np.any(bad):
        p, q = np.argwhere(bad)[0]
        raise UnobservedModeError(
            f"zero posterior precision at frequency bin ({p}, {q}); the PSF must pass the mean level"
        )
    mu = (gamma_n * np.conj(h) * Y_spec + gamma_d * np.conj(d) * B_spec) / nu
    return mu, nu


def sample_x_given_rest(Y_spec, B_spec, H: Kernel, D: Kernel, gamma: HyperParams, rng):
    """Draw ``X`` given ``(B, gamma, Y)``.

    The spectrum of real white noise is Hermitian with unit power in every
    bin, so scaling it by ``nu**-0.5`` and adding ``mu`` gives an exact draw
    whose inverse transform is real.
    """
    mu, nu = object_conditional(Y_spec, B_spec, H, D, gamma.gamma_n, gamma.gamma_d)
    w = fft2_normalized(rng.standard_normal(mu.shape))
    return ifft2_normalized(mu + w / np.sqrt(nu))


# -- move 3: hyperparameters ----------------------------------------------


def draw_gamma(alpha, beta, rng, size=None):
    """Gamma variate with shape ``alpha`` and scale ``beta`` (mean ``alpha beta``)."""
    return rng.gamma(alpha, beta, size=size)


def _posterior_gamma(alpha0, beta0, shape_add, energy, name):
    alpha = alpha0 + shape_add
    inv_beta = (0.0 if math.isinf(beta0) else 1.0 / beta0) + energy
    if not inv_beta > 0:
        raise ImproperConditionalError(f"{name}: zero residual energy under a flat-scale prior")
    return alpha, 1.0 / inv_beta


def gamma_conditionals(Y, X, B, D: Kernel, H: Kernel, prior: GammaPrior):
    """``(alpha, beta)`` of the three gamma conditionals, in ``(n, d, b)`` order."""
    N = Y.size
    e_n = float(np.sum((Y - circular_convolve(H, X)) ** 2)) / 2.0
    e_d = float(np.sum((circular_convolve(D, X) - B) ** 2)) / 2.0
    e_b = float(np.sum(np.abs(B))) / 2.0
    return (
        _posterior_gamma(prior.alpha_n, prior.beta_n, N / 2.0, e_n, "gamma_n"),
        _posterior_gamma(prior.alpha_d, prior.beta_d, N / 2.0, e_d, "gamma_d"),
        _posterior_gamma(prior.alpha_b, prior.beta_b, float(N), e_b, "gamma_b"),
    )


def sample_gamma(Y, X, B, D: Kernel, H: Kernel, prior: GammaPrior, rng) -> HyperParams:
    (an, bn), (ad, bd), (ab, bb) = gamma_conditionals(Y, X, B, D, H, prior)
    return HyperParams(
        float(draw_gamma(an, bn, rng)),
        float(draw_gamma(ad, bd, rng)),
        float(draw_gamma(ab, bb, rng)),
    )


# -- chain ----------------------------------------------------------------


def run_chain(
    Y,
    H: Kernel,
    prior: GammaPrior = GammaPrior(),
    config: Optional[StoppingConfig] = None,
    rng: Optional[np.random.Generator] = None,
    init_gamma: Optional[HyperParams] = None,
) -> ChainResult:
    """Run the sampler from ``X = Y`` until the running mean settles.

    The chain stops once at least ``min_iter`` sweeps are done and the
    squared norm of the last increment of the running mean drops below
    ``T``; it gives up after ``max_iter`` sweeps with ``converged=False``.
    With ``config.fixed_gamma`` set, the hyperparameter move is skipped and
    the result is the conditional posterior mean.
    """
    config = config or StoppingConfig()
    if rng is None:
        raise ValueError("run_chain needs an explicit random generator")
    if not config.T > 0:
        raise ValueError("T must be positive")
    Y = np.asarray(Y, dtype=float)
    P = Y.shape[0]
    D = laplacian_kernel(P)
    if abs(H.transfer[0, 0]) == 0:
        raise UnobservedModeError("the PSF has zero gain at the null frequency")

    if config.fixed_gamma is not None:
        gamma = config.fixed_gamma
    elif init_gamma is not None:
        gamma = init_gamma
    else:
        gamma = ls_init(Y, H, D)

    Y_spec = fft2_normalized(Y)
    state = ChainState(X=Y.copy(), B=None, gamma=gamma)
    if config.burn_in == 0:
        state.mean = Y.copy()
        state.count = 1
    if config.keep_samples:
        state.samples = [Y.copy()] if config.burn_in == 0 else []

    converged = False
    while state.iter < config.max_iter:
        state.iter += 1
        g = state.gamma
        xbar = circular_convolve(D, state.X)
        u = open_uniform(rng, xbar.shape)
        state.B, nsat = _sample_b(xbar, g.gamma_d, g.gamma_b, u)
        state.saturations += nsat
        state.X = sample_x_given_rest(Y_spec, fft2_normalized(state.B), H, D, g, rng)
        if config.fixed_gamma is None:
            state.gamma = sample_gamma(Y, state.X, state.B, D, H, prior, rng)

        if state.iter > config.burn_in:
            if config.keep_samples:
                state.samples.append(state.X.copy())
            if state.mean is None:
                state.mean = state.X.copy()
                state.count = 1
                state.delta_norm = math.inf
            else:
                state.count += 1
                delta = (state.X - state.mean) / state.count
                state.mean = state.mean + delta
                state.delta_norm = float(np.sum(delta * delta))

        g = state.gamma
        state.trace.append((state.iter, g.gamma_n, g.gamma_d, g.gamma_b, state.delta_norm))
        if config.log_every and state.iter % config.log_every == 0:
            log.info(
                "iter %d gamma_n=%.4g gamma_d=%.4g gamma_b=%.4g delta=%.3g",
                state.iter, g.gamma_n, g.gamma_d, g.gamma_b, state.delta_norm,
            )
        if state.iter >= config.min_iter and state.delta_norm < config.T:
            converged = True
            break

    if state.saturations > 0.001 * state.iter * Y.size:
        log.warning("inverse-CDF tail clamped in %d draws", state.saturations)
    if not converged:
        log.warning("chain stopped at max_iter=%d without meeting T=%g", config.max_iter, config.T)
    return ChainResult(estimate=state.mean, state=state, converged=converged)
