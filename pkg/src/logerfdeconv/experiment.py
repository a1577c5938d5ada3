"""Synthetic deconvolution benchmark around the Gibbs sampler.

Covers the test phantom, data synthesis, the distance metrics, the
conditional posterior mean at fixed hyperparameters, MAP estimation for the
Log-Erf and Huber potentials, and hyperparameter sweeps.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy import optimize

from .gibbs import GammaPrior, StoppingConfig, run_chain
from .lsinit import HyperParams, ls_init
from .potential import HuberEquiv, PotentialParams, huber_equiv, huber_potential, huber_prime, phi, phi_prime
from .rng import derive_rng
from .spectral import Kernel, circular_convolve, fft2_normalized, gaussian_psf, ifft2_normalized, laplacian_kernel

__all__ = [
    "Phantom",
    "Metrics",
    "MapConfig",
    "MapDivergenceError",
    "make_phantom",
    "synthesize_data",
    "ls_init",
    "distances",
    "l2_norm_ratio",
    "laplacian_band",
    "cpm",
    "soft_threshold",
    "map_criterion",
    "map_estimate",
    "sweep",
    "joint_equivalent",
    "Report",
    "run_paper_experiment",
]

log = logging.getLogger(__name__)


@dataclass
class Phantom:
    truth: np.ndarray
    description: list


@dataclass(frozen=True)
class Metrics:
    l2_percent: float
    l1_percent: float


def _ramp(cols, c0, c1, lo, hi):
    return lo + (hi - lo) * (cols - c0) / max(c1 - c0, 1)


def make_phantom(P: int = 128) -> Phantom:
    """Black background with a rectangle, a rhombus and a disk.

    Each object carries a left-to-right linear gray ramp inside ``[0.7, 2.1]``,
    so its Laplacian vanishes inside and is large on the edges. The rectangle
    and the rhombus both cross row ``floor(0.78 P)``.
    """
    if P < 64:
        raise ValueError("phantom needs P >= 64 to fit three objects")
    k = P / 128.0
    rows, cols = np.mgrid[0:P, 0:P].astype(float)
    img = np.zeros((P, P))
    row = int(math.floor(0.78 * P))
    objects = []

    r0 = row - round(13 * k)
    r1, c0 = r0 + round(26 * k) - 1, round(14 * k)
    c1 = c0 + round(34 * k) - 1
    m = (rows >= r0) & (rows <= r1) & (cols >= c0) & (cols <= c1)
    img[m] = _ramp(cols, c0, c1, 0.7, 1.4)[m]
    objects.append(dict(shape="rectangle", rows=(r0, r1), cols=(c0, c1), levels=(0.7, 1.4)))

    cr, cc, h = row, round(90 * k), round(17 * k)
    m = np.abs(rows - cr) + np.abs(cols - cc) <= h
    img[m] = _ramp(cols, cc - h, cc + h, 1.2, 1.9)[m]
    objects.append(dict(shape="rhombus", center=(cr, cc), half_diagonal=h, levels=(1.2, 1.9)))

    cr, cc, rad = round(40 * k), round(64 * k), 13 * k
    m = (rows - cr) ** 2 + (cols - cc) ** 2 <= rad**2
    img[m] = _ramp(cols, cc - rad, cc + rad, 1.4, 2.1)[m]
    objects.append(dict(shape="disk", center=(cr, cc), radius=rad, levels=(1.4, 2.1)))
    return Phantom(truth=img, description=objects)


def synthesize_data(truth, H: Kernel, noise_variance: float, rng) -> np.ndarray:
    """``Y = H * X + noise`` with white Gaussian noise of the given variance."""
    clean = circular_convolve(H, truth)
    if noise_variance == 0:
        return clean
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    return clean + math.sqrt(noise_variance) * rng.standard_normal(clean.shape)


def distances(estimate, truth) -> Metrics:
    """Normalized distances to the truth, in percent.

    ``l2 = 100 ||e||^2 / ||x*||^2`` (ratio of squared norms) and
    ``l1 = 100 sum|e| / sum|x*|``. Use :func:`l2_norm_ratio` for the
    unsquared ratio.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError("estimate and truth differ in shape")
    n2 = float(np.sum(truth**2))
    n1 = float(np.sum(np.abs(truth)))
    if n2 == 0:
        raise ValueError("truth has zero norm")
    diff = estimate - truth
    return Metrics(
        l2_percent=100.0 * float(np.sum(diff**2)) / n2,
        l1_percent=100.0 * float(np.sum(np.abs(diff))) / n1,
    )


def l2_norm_ratio(estimate, truth) -> float:
    """``100 ||e|| / ||x*||``, the square root of the squared-norm distance."""
    return 10.0 * math.sqrt(distances(estimate, truth).l2_percent)


def laplacian_band(truth, split: float = 1e-3):
    """Empty band of ``|D * X|``: (largest value below ``split``, smallest above).

    Also returns the fraction of pixels below ``split``.
    """
    xbar = np.abs(circular_convolve(laplacian_kernel(truth.shape[0]), truth)).ravel()
    small = xbar < split
    return float(xbar[small].max()), float(xbar[~small].min()), float(small.mean())


def cpm(Y, H: Kernel, gamma: HyperParams, config: Optional[StoppingConfig] = None, rng=None):
    """Conditional posterior mean at fixed ``gamma`` (hyperparameter move disabled)."""
    base = config or StoppingConfig()
    cfg = StoppingConfig(
        T=base.T, min_iter=base.min_iter, max_iter=base.max_iter, burn_in=base.burn_in,
        fixed_gamma=gamma, keep_samples=base.keep_samples, log_every=base.log_every,
    )
    return run_chain(Y, H, GammaPrior(), cfg, rng).estimate


# -- MAP --------------------------------------------------------------------


class MapDivergenceError(ArithmeticError):
    pass


@dataclass
class MapConfig:
    rtol: float = 1e-8
    max_iter: int = 50_000


Potential = Union[PotentialParams, HuberEquiv]


def soft_threshold(x, tau):
    """``argmin_b (x - b)^2 + 2 tau |b|``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def _pot(potential: Potential):
    if isinstance(potential, PotentialParams):
        return (lambda x: phi(x, potential)), (lambda x: phi_prime(x, potential)), potential.gamma_d
    if isinstance(potential, HuberEquiv):
        return (
            (lambda x: huber_potential(x, potential)),
            (lambda x: huber_prime(x, potential)),
            potential.lam,
        )
    raise TypeError(f"unsupported potential {potential!r}")


def map_criterion(X, Y, H: Kernel, potential: Potential, gamma_n: float) -> float:
    """``gamma_n ||Y - H * X||^2 + sum pot(D * X)``."""
    pot, _, _ = _pot(potential)
    D = laplacian_kernel(X.shape[0])
    r = Y - circular_convolve(H, X)
    return gamma_n * float(np.sum(r * r)) + float(np.sum(pot(circular_convolve(D, X))))


def map_estimate(
    Y,
    H: Kernel,
    potential: Potential,
    gamma_n: float,
    config: Optional[MapConfig] = None,
    method: str = "half-quadratic",
    X0=None,
):
    """Minimize the MAP criterion for a Log-Erf or Huber potential.

    ``method="half-quadratic"`` alternates ``b = xbar - pot'(xbar) / (2a)``
    with an exact quadratic solve in the Fourier domain, where ``a`` is
    ``gamma_d`` (Log-Erf) or ``lambda`` (Huber). Both potentials have
    curvature at most ``2a``, so every step lowers the criterion; an increase
    raises :class:`MapDivergenceError`. For Huber the auxiliary update is the
    soft threshold at ``s``. ``method="lbfgs"`` minimizes the same criterion
    directly with gradients from ``pot'``.
    """
    config = config or MapConfig()
    Y = np.asarray(Y, dtype=float)
    P = Y.shape[0]
    D = laplacian_kernel(P)
    pot, pot_prime, a = _pot(potential)
    X = Y.copy() if X0 is None else np.asarray(X0, dtype=float).copy()

    def crit(X):
        r = Y - circular_convolve(H, X)
        return gamma_n * float(np.sum(r * r)) + float(np.sum(pot(circular_convolve(D, X))))

    if method == "lbfgs":
        h = H.transfer
        d = D.transfer

        def fg(v):
            Xv = v.reshape(P, P)
            Xs = fft2_normalized(Xv)
            r = Y - ifft2_normalized(h * Xs)
            xbar = ifft2_normalized(d * Xs)
            f = gamma_n * float(np.sum(r * r)) + float(np.sum(pot(xbar)))
            g = -2.0 * gamma_n * ifft2_normalized(np.conj(h) * fft2_normalized(r))
            g += ifft2_normalized(np.conj(d) * fft2_normalized(pot_prime(xbar)))
            return f, g.ravel()

        res = optimize.minimize(
            fg, X.ravel(), jac=True, method="L-BFGS-B",
            options=dict(maxiter=config.max_iter, maxcor=20, ftol=1e-15, gtol=1e-10),
        )
        return res.x.reshape(P, P)
    if method != "half-quadratic":
        raise ValueError(f"unknown MAP method {method!r}")

    h = H.transfer
    d = D.transfer
    Y_spec = fft2_normalized(Y)
    den = gamma_n * np.abs(h) ** 2 + a * np.abs(d) ** 2
    if np.any(den <= 0):
        raise ArithmeticError("MAP quadratic step is singular; the PSF must pass the mean level")
    num_y = gamma_n * np.conj(h) * Y_spec
    J = crit(X)
    for it in range(1, config.max_iter + 1):
        xbar = circular_convolve(D, X)
        b = xbar - pot_prime(xbar) / (2.0 * a)
        X = ifft2_normalized((num_y + a * np.conj(d) * fft2_normalized(b)) / den)
        J_new = crit(X)
        if J_new > J * (1.0 + 1e-12) + 1e-12:
            raise MapDivergenceError(f"criterion increased at iteration {it}: {J} -> {J_new}")
        if J - J_new <= config.rtol * abs(J):
            log.info("MAP converged after %d iterations, criterion %.6g", it, J_new)
            return X
        J = J_new
    log.warning("MAP stopped at max_iter=%d", config.max_iter)
    return X


# -- sweeps -----------------------------------------------------------------


def _cpm_point(args):
    Y, fwhm_or_kernel, gamma, cfg, seed, label = args
    return cpm(Y, fwhm_or_kernel, gamma, cfg, derive_rng(seed, label))


def sweep(
    Y,
    H: Kernel,
    truth,
    gamma_hat: HyperParams,
    component: str,
    factors: Sequence[float],
    config: StoppingConfig,
    seed: int,
    workers: int = 1,
):
    """CPM distances as one hyperparameter is scaled around ``gamma_hat``.

    Every point uses the same ``"cpm"`` stream so neighbouring points differ
    only through ``gamma``. Returns rows ``(factor, gamma_n, gamma_d,
    gamma_b, l2, l1)``.
    """
    idx = {"gn": 0, "gd": 1, "gb": 2}[component]
    gammas = []
    for f in factors:
        g = list(gamma_hat.as_tuple())
        g[idx] *= f
        gammas.append(HyperParams(*g))
    jobs = [(Y, H, g, config, seed, "cpm") for g in gammas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            estimates = list(ex.map(_cpm_point, jobs))
    else:
        estimates = [_cpm_point(j) for j in jobs]
    rows = []
    for f, g, est in zip(factors, gammas, estimates):
        m = distances(est, truth)
        rows.append((f, *g.as_tuple(), m.l2_percent, m.l1_percent))
    return rows


# -- full benchmark ---------------------------------------------------------


def joint_equivalent(p: PotentialParams) -> HuberEquiv:
    """Huber potential obtained by minimizing the joint criterion over ``B``.

    ``min_b gamma_d (x - b)^2 + gamma_b |b|`` is Huber with ``lambda = gamma_d``
    and threshold ``rho``; half-quadratic MAP with it is the alternation
    between soft-thresholding ``B`` at ``rho`` and the quadratic ``X`` step.
    """
    return HuberEquiv(lam=p.gamma_d, s=p.rho)


@dataclass
class Report:
    seed: int
    truth: np.ndarray
    data: np.ndarray
    gamma_init: HyperParams
    gamma_hat: HyperParams
    huber: HuberEquiv
    band: tuple
    iterations: int
    converged: bool
    burn_in: int
    trace: np.ndarray
    rel_std: tuple
    table: Dict[str, Metrics]
    estimates: Dict[str, np.ndarray]
    sweeps: Dict[str, list]
    seconds: Dict[str, float] = field(default_factory=dict)

    @property
    def threshold_splits(self) -> bool:
        lo, hi, _ = self.band
        return lo < self.huber.s < hi

    def improvement(self, name: str = "PM") -> tuple:
        d, e = self.table["Data"], self.table[name]
        return d.l2_percent / e.l2_percent, d.l1_percent / e.l1_percent


def run_paper_experiment(config, seed: Optional[int] = None) -> Report:
    """Phantom, data, sampler, CPM, sweeps and MAP for one configuration.

    ``config`` is a :class:`~logerfdeconv.config.RunConfig`. ``seed``
    overrides ``config.seed``; one of them must be set. Random streams are
    derived by label from the seed: ``"noise"`` for the data, ``"chain"`` for
    the sampler and ``"cpm"`` shared by every conditional run.
    """
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ValueError("run_paper_experiment needs a seed")
    t0 = time.perf_counter()
    seconds = {}
    P = config.size
    truth = make_phantom(P).truth
    H = gaussian_psf(P, config.fwhm)
    Y = synthesize_data(truth, H, config.noise_variance, derive_rng(seed, "noise"))
    gamma_init = ls_init(Y, H, laplacian_kernel(P))
    log.info("least-squares init %s", gamma_init)

    stop = StoppingConfig(T=config.T, min_iter=config.min_iter, max_iter=config.max_iter)
    res = run_chain(Y, H, config.gamma_prior(), stop, derive_rng(seed, "chain"), init_gamma=gamma_init)
    seconds["chain"] = time.perf_counter() - t0
    n = res.state.iter
    burn = min(config.burn_in, n // 2)
    gamma_hat = res.gamma_mean(burn)
    post = res.trace[burn:, 1:4]
    rel_std = tuple(float(v) for v in post.std(axis=0) / post.mean(axis=0))
    pot = PotentialParams(gamma_hat.gamma_d, gamma_hat.gamma_b)
    huber = huber_equiv(pot)
    band = laplacian_band(truth)
    log.info("gamma_hat %s, lambda=%.4g s=%.4g, band %s", gamma_hat, huber.lam, huber.s, band)

    estimates = {"data": Y, "truth": truth, "pm": res.estimate}
    table = {"Data": distances(Y, truth), "PM": distances(res.estimate, truth)}

    t = time.perf_counter()
    estimates["cpm"] = cpm(Y, H, gamma_hat, stop, derive_rng(seed, "cpm"))
    table["CPM"] = distances(estimates["cpm"], truth)
    sweeps = {}
    for comp, label, factors in (
        ("gb", "CPM (best gamma_b)", config.sweep_gb),
        ("gd", "CPM (best gamma_d)", config.sweep_gd),
        ("gn", "CPM (best gamma_n)", config.sweep_gn),
    ):
        rows = sweep(Y, H, truth, gamma_hat, comp, factors, stop, seed, config.workers)
        sweeps[comp] = rows
        best = min(rows, key=lambda r: r[4])
        table[label] = Metrics(best[4], best[5])
    seconds["cpm"] = time.perf_counter() - t

    t = time.perf_counter()
    mcfg = MapConfig(rtol=config.map_rtol, max_iter=config.map_max_iter)
    estimates["map_logerf"] = map_estimate(Y, H, joint_equivalent(pot), gamma_hat.gamma_n, mcfg)
    table["MAP-LogErf"] = distances(estimates["map_logerf"], truth)
    estimates["map_huber"] = map_estimate(Y, H, huber, gamma_hat.gamma_n, mcfg)
    table["MAP-Huber"] = distances(estimates["map_huber"], truth)
    if config.map_marginal:
        estimates["map_logerf_marginal"] = map_estimate(Y, H, pot, gamma_hat.gamma_n, mcfg)
        table["MAP-LogErf (marginal)"] = distances(estimates["map_logerf_marginal"], truth)
    seconds["map"] = time.perf_counter() - t
    seconds["total"] = time.perf_counter() - t0

    return Report(
        seed=seed, truth=truth, data=Y, gamma_init=gamma_init, gamma_hat=gamma_hat, huber=huber,
        band=band, iterations=n, converged=res.converged, burn_in=burn, trace=res.trace,
        rel_std=rel_std, table=table, estimates=estimates, sweeps=sweeps, seconds=seconds,
    )
