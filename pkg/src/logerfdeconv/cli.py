"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 file or format error.
"""

import argparse
import logging
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, format_config, parse_config
from .experiment import (
    distances,
    joint_equivalent,
    l2_norm_ratio,
    MapConfig,
    make_phantom,
    map_estimate,
    run_paper_experiment,
    synthesize_data,
)
from .gibbs import GammaPrior, StoppingConfig, run_chain
from .imageio import read_image, write_image, write_pgm
from .lsinit import HyperParams
from .potential import (
    PotentialParams,
    critical_gamma_b,
    huber_equiv,
    huber_potential,
    huber_prime,
    phi,
    phi_prime,
)
from .prior import FieldParams, histograms, sample_prior
from .rng import derive_rng
from .rundir import PGM_RANGE, prepare_run_dir, write_manifest, write_report, write_trace
from .spectral import gaussian_psf

log = logging.getLogger("logerfdeconv")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve_seed(seed):
    if seed is None:
        seed = secrets.randbits(32)
        log.warning("no seed given, using generated seed %d", seed)
    return seed


def _save(path, img, pgm: bool):
    write_image(path, img)
    if pgm:
        write_pgm(Path(path).with_suffix(".pgm"), img, *PGM_RANGE)


def cmd_sample_prior(a):
    seed = _resolve_seed(a.seed)
    fp = FieldParams(PotentialParams(a.gamma_d, a.gamma_b), a.eps, a.size)
    X, B = sample_prior(fp, derive_rng(seed, "prior"))
    _save(a.out, X, a.pgm)
    if a.aux:
        _save(a.aux, B, a.pgm)
    if a.hist:
        with open(a.hist, "w") as f:
            f.write("variable,bin_left,bin_right,count\n")
            for name, (counts, edges) in histograms(X, B, fp, a.bins).items():
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    f.write(f"{name},{lo:.17g},{hi:.17g},{c}\n")
    print(f"seed {seed}")


def cmd_potential(a):
    p = PotentialParams(a.gamma_d, a.gamma_b)
    xs = np.asarray(a.x, dtype=float)
    h = huber_equiv(p)
    cols = [phi(xs, p), phi_prime(xs, p), huber_potential(xs, h), huber_prime(xs, h)]
    print("x,phi,phi_prime,huber,huber_prime")
    for row in zip(xs, *(np.atleast_1d(c) for c in cols)):
        print(",".join(format(float(t) + 0.0, ".17g") for t in row))


def cmd_equiv(a):
    p = PotentialParams(a.gamma_d, a.gamma_b)
    h = huber_equiv(p)
    print(f"lambda {h.lam:.17g}\ns {h.s:.17g}\neta {p.eta:.17g}\nrho {p.rho:.17g}")
    print(f"critical_gamma_b {critical_gamma_b(p.gamma_d):.17g}")


def cmd_make_phantom(a):
    truth = make_phantom(a.size).truth
    _save(a.out, truth, a.pgm)
    if a.data:
        seed = _resolve_seed(a.seed)
        Y = synthesize_data(truth, gaussian_psf(a.size, a.fwhm), a.noise_variance, derive_rng(seed, "noise"))
        _save(a.data, Y, a.pgm)
        print(f"seed {seed}")


def cmd_deconvolve(a):
    seed = _resolve_seed(a.seed)
    Y = read_image(a.data)
    if Y.shape[0] != Y.shape[1]:
        raise UsageError("data image must be square")
    H = gaussian_psf(Y.shape[0], a.fwhm)
    prior = GammaPrior(a.alpha_n, a.beta_n, a.alpha_d, a.beta_d, a.alpha_b, a.beta_b)
    fixed = None
    if a.fixed_gamma:
        try:
            fixed = HyperParams(*(float(v) for v in a.fixed_gamma.split(",")))
        except TypeError:
            raise UsageError("--fixed-gamma takes three comma-separated values") from None
    cfg = StoppingConfig(
        T=a.T, min_iter=a.min_iter, max_iter=a.max_iter, burn_in=a.burn_in, fixed_gamma=fixed,
    )
    res = run_chain(Y, H, prior, cfg, derive_rng(seed, "chain"))
    out = prepare_run_dir(a.out_dir)
    burn = min(a.gamma_burn_in, res.state.iter // 2)
    g = res.gamma_mean(burn)
    write_manifest(out, "deconvolve", vars_for_manifest(a), seed, extra={
        "gamma_hat": list(g.as_tuple()), "iterations": res.state.iter, "converged": res.converged,
    })
    write_trace(out / "trace.csv", res.trace)
    _save(out / "pm.img", res.estimate, True)
    print(f"iterations {res.state.iter} converged {res.converged}")
    print("gamma_hat " + " ".join(f"{v:.6g}" for v in g.as_tuple()))


def cmd_map(a):
    Y = read_image(a.data)
    H = gaussian_psf(Y.shape[0], a.fwhm)
    p = PotentialParams(a.gamma_d, a.gamma_b)
    pot = {"joint": joint_equivalent(p), "logerf": p, "huber": huber_equiv(p)}[a.potential]
    X = map_estimate(Y, H, pot, a.gamma_n, MapConfig(rtol=a.rtol), method=a.method)
    _save(a.out, X, a.pgm)


def cmd_experiment(a):
    cfg = parse_config(Path(a.config).read_text()) if a.config else RunConfig()
    if a.seed is not None:
        cfg.seed = a.seed
    cfg.seed = _resolve_seed(cfg.seed)
    if a.workers:
        cfg.workers = a.workers
    report = run_paper_experiment(cfg)
    write_report(a.out_dir, report, cfg)
    (Path(a.out_dir) / "config.txt").write_text(format_config(cfg))
    print((Path(a.out_dir) / "report.txt").read_text(), end="")


def cmd_metrics(a):
    est, truth = read_image(a.estimate), read_image(a.truth)
    m = distances(est, truth)
    print(f"l2_percent {m.l2_percent:.6g}\nl1_percent {m.l1_percent:.6g}")
    print(f"l2_norm_ratio_percent {l2_norm_ratio(est, truth):.6g}")


def vars_for_manifest(a) -> dict:
    d = {}
    for k, v in vars(a).items():
        if k == "func":
            continue
        if isinstance(v, float) and math.isinf(v):
            v = "inf"
        d[k] = v
    return d


def _prior_args(p):
    for c in "ndb":
        p.add_argument(f"--alpha-{c}", type=float, default=0.0)
        p.add_argument(f"--beta-{c}", type=float, default=math.inf)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="logerfdeconv", description="Unsupervised L2-L1 deconvolution with a Gibbs sampler.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample-prior", help="draw an image from the compound prior field")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--gamma-d", type=float, default=1.0)
    p.add_argument("--gamma-b", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--aux", help="also write the auxiliary image here")
    p.add_argument("--hist", help="CSV histograms of X, B and the filtered image")
    p.add_argument("--bins", type=int, default=101)
    p.add_argument("--pgm", action="store_true")
    p.set_defaults(func=cmd_sample_prior)

    p = sub.add_parser("potential", help="tabulate the Log-Erf potential and its derivative")
    p.add_argument("--gamma-d", type=float, default=1.0)
    p.add_argument("--gamma-b", type=float, default=1.0)
    p.add_argument("x", type=float, nargs="+")
    p.set_defaults(func=cmd_potential)

    p = sub.add_parser("equiv", help="equivalent Huber parameters")
    p.add_argument("--gamma-d", type=float, required=True)
    p.add_argument("--gamma-b", type=float, required=True)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("make-phantom", help="write the test phantom and optionally blurred noisy data")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--data")
    p.add_argument("--fwhm", type=float, default=6.0)
    p.add_argument("--noise-variance", type=float, default=RunConfig.noise_variance)
    p.add_argument("--pgm", action="store_true")
    p.set_defaults(func=cmd_make_phantom)

    p = sub.add_parser("deconvolve", help="unsupervised posterior mean of a data image")
    p.add_argument("--data", required=True)
    p.add_argument("--fwhm", "--psf-fwhm", type=float, default=6.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--T", type=float, default=5e-4)
    p.add_argument("--min-iter", type=int, default=50)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=0, help="samples left out of the posterior mean")
    p.add_argument("--gamma-burn-in", type=int, default=200, help="trace entries left out of gamma_hat")
    p.add_argument("--fixed-gamma", help="gamma_n,gamma_d,gamma_b; skips the hyperparameter move")
    _prior_args(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_deconvolve)

    p = sub.add_parser("map", help="MAP estimate at given hyperparameters")
    p.add_argument("--data", required=True)
    p.add_argument("--fwhm", type=float, default=6.0)
    p.add_argument("--gamma-n", type=float, required=True)
    p.add_argument("--gamma-d", type=float, required=True)
    p.add_argument("--gamma-b", type=float, required=True)
    p.add_argument("--potential", choices=("joint", "logerf", "huber"), default="joint")
    p.add_argument("--method", choices=("half-quadratic", "lbfgs"), default="half-quadratic")
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm", action="store_true")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("experiment", help="full synthetic benchmark into a run directory")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("metrics", help="distances of an estimate to a reference image")
    p.add_argument("--estimate", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if a.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        a.func(a)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, ValueError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
