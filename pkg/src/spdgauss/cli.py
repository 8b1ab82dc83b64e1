"""Command-line interface.

Every command writes its artifact to ``--out`` (stdout when omitted) and, for
file outputs, a ``<out>.manifest.json`` recording the command line, seed,
library version, wall time and SHA-256 checksums of the artifacts. Exit
status is 0 on success, 2 on usage errors and 3 on numerical or domain
errors (including a fit that does not converge).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from . import __version__, partition, spectral
from .errors import ConvergenceError, DomainError, NumericalError
from .experiments import DEFAULT_SIGMAS, TABLES, logz_sweep, run_table, summarize
from .inference import fit_gaussian
from .matrix_io import matrix_record, read_matrices
from .partition import EnsembleSpec
from .sampler import ChainConfig, GaussianModel, sample_gaussian_spd
from .siegel import (SiegelGaussianModel, log_z_acosh_mc, log_z_acosh_n1,
                     sample_siegel_gaussian, siegel_distance)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def fmt(x):
    """Floats with 17 significant digits; everything else via ``str``."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def parse_grid(text):
    """``a:b:step`` (inclusive) or a comma list of floats."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid must be start:stop:step, got {text!r}")
        a, b, h = (float(p) for p in parts)
        if h <= 0 or b < a:
            raise UsageError(f"bad grid {text!r}")
        k = int(math.floor((b - a) / h + 1e-9))
        return [round(a + i * h, 12) for i in range(k + 1)]
    try:
        return [float(p) for p in text.split(",") if p]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


_METHOD_ALIASES = {
    "exact": None, "exact_beta2": "exact_beta2", "pfaffian": "pfaffian_beta1",
    "pfaffian_beta1": "pfaffian_beta1", "trilog": "trilog",
    "trilog_corrected": "trilog_corrected", "corrected": "trilog_corrected",
    "mc": "monte_carlo", "monte_carlo": "monte_carlo",
}


def parse_methods(text, beta):
    out = []
    for m in text.split(","):
        if m not in _METHOD_ALIASES:
            raise UsageError(f"unknown method {m!r}; choose from {sorted(_METHOD_ALIASES)}")
        name = _METHOD_ALIASES[m]
        if name is None:
            name = "exact_beta2" if beta == 2 else "pfaffian_beta1"
        out.append(name)
    return out


FIT_KEYS = ("beta", "n", "m", "sigma_hat", "mean_sq_dist", "iterations_mean",
            "iterations_sigma", "method", "converged")


def _jsonl(mats, beta, beta_field=None):
    buf = io.StringIO()
    for Y in mats:
        rec = matrix_record(Y, beta)
        if beta_field is not None:
            rec["beta"] = beta_field
        buf.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return buf.getvalue()


# ----------------------------------------------------------------- output

class Output:
    """Collects artifacts in memory and writes them (plus manifest) at the end."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = argv
        self.files = {}
        self.t0 = time.perf_counter()

    def add(self, path, text):
        self.files[path] = text

    def csv_text(self, kind, header, rows):
        buf = io.StringIO()
        buf.write(f"# spdgauss {kind} schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
        return buf.getvalue()

    def primary(self, text, suffix=""):
        out = self.args.out
        path = out if out else None
        if path is None:
            sys.stdout.write(text)
        else:
            self.add(path + suffix if suffix else path, text)

    def flush(self, extra=None):
        if not self.files:
            return
        checks = {}
        for path, text in self.files.items():
            data = text.encode("utf-8")
            d = os.path.dirname(path)
            if d:
                os.makedirs(d, exist_ok=True)
            with open(path, "wb") as fh:
                fh.write(data)
            checks[os.path.basename(path)] = hashlib.sha256(data).hexdigest()
        manifest = {
            "command": ["spdgauss"] + list(self.argv),
            "seed": getattr(self.args, "seed", None),
            "version": __version__,
            "wall_time_s": round(time.perf_counter() - self.t0, 3),
            "checksums": checks,
        }
        if extra:
            manifest.update(extra)
        with open(self.args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _need_seed(args):
    if args.seed is None:
        raise UsageError(f"--seed is required for '{args.command}'")
    return args.seed


def _chain(args):
    return ChainConfig(burn_in=args.burn_in, thinning=args.thinning, step=args.step,
                       seed=args.seed, chains=args.chains, threads=args.threads)


# ----------------------------------------------------------------- commands

def cmd_logz(args, out):
    methods = parse_methods(args.methods, args.beta)
    if "monte_carlo" in methods:
        _need_seed(args)
    rows = logz_sweep(args.beta, args.n, parse_grid(args.sigma), methods,
                      mc_samples=args.mc_samples, seed=args.seed)
    out.primary(out.csv_text("logz", ["beta", "n", "sigma", "method", "log_z",
                                      "log_z_over_n2", "stderr"], rows))


def cmd_phi(args, out):
    methods = parse_methods(args.methods, args.beta)
    if "monte_carlo" in methods:
        _need_seed(args)
    rows = []
    for s in parse_grid(args.sigma):
        spec = EnsembleSpec(args.n, args.beta, s)
        for m in methods:
            if m == "monte_carlo":
                v, se = partition.phi_monte_carlo(spec, args.mc_samples, args.seed)
            else:
                v, se = partition.phi_sigma(spec, m), 0.0
            rows.append((args.beta, args.n, s, m, v, se))
    out.primary(out.csv_text("phi", ["beta", "n", "sigma", "method", "phi", "stderr"], rows))


def _load_mean(path, beta, n):
    if path is None:
        return np.eye(n) if beta == 1 else np.eye(n, dtype=complex)
    b, mats = read_matrices(path)
    if b != beta or mats.shape[-1] != n:
        raise UsageError(f"--mean file holds beta={b}, n={mats.shape[-1]}; expected {beta}, {n}")
    return mats[0]


def cmd_sample(args, out):
    _need_seed(args)
    model = GaussianModel(_load_mean(args.mean, args.beta, args.n), args.sigma)
    data, chain = sample_gaussian_spd(model, args.count, _chain(args))
    out.primary(_jsonl(data.dense(), args.beta))
    if args.radial and args.out:
        rows = [tuple(float(x) for x in r) for r in chain.samples]
        out.add(args.out + ".radial.csv",
                out.csv_text("radial", [f"r{i + 1}" for i in range(args.n)], rows))
    if chain.warnings:
        for w in chain.warnings:
            print(f"warning: {w}", file=sys.stderr)


def cmd_fit(args, out):
    beta, data = read_matrices(args.inp)
    penalty = None
    if args.penalty:
        try:
            lam, s0 = (float(x) for x in args.penalty.split(","))
        except ValueError:
            raise UsageError("--penalty expects LAMBDA,SIGMA0") from None
        penalty = (lam, s0)
    kw = {}
    method = _METHOD_ALIASES.get(args.method, args.method)
    if method is None:
        method = "exact_beta2" if beta == 2 else "pfaffian_beta1"
    if method == "monte_carlo":
        kw = dict(samples=args.mc_samples, seed=_need_seed(args))
    rep = fit_gaussian(data, method, penalty=penalty, **kw)
    d = rep.to_dict()
    rec = {k: d[k] for k in FIT_KEYS}
    for k, v in rec.items():
        if isinstance(v, float) and not math.isfinite(v):
            rec[k] = None
    out.primary(json.dumps(rec, indent=2) + "\n")
    if not rep.converged:
        print(f"error: fit did not converge: {rep.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_experiment(args, out):
    _need_seed(args)
    sigmas = parse_grid(args.sigmas) if args.sigmas else list(DEFAULT_SIGMAS)
    chain = ChainConfig(burn_in=args.burn_in, thinning=args.thinning, step=args.step)
    res = run_table(args.table, args.seed, sigmas, trials=args.trials, m=args.m,
                    threads=args.threads, chain=chain, phi_samples=args.mc_samples)
    rows = [(args.table, r.true_sigma, r.trial, r.sigma_hat, r.mean_sq_dist,
             int(r.converged), r.acceptance) for r in res]
    out.primary(out.csv_text("experiment", ["table", "true_sigma", "trial", "sigma_hat",
                                            "mean_sq_dist", "converged", "acceptance"], rows))
    summ = summarize(res)
    srows = [(args.table, s, v[0], v[1], v[2]) for s, v in summ.items()]
    text = out.csv_text("experiment_summary", ["table", "true_sigma", "mean", "sd",
                                               "n_converged"], srows)
    if args.out:
        out.add(args.out + ".summary.csv", text)
    else:
        sys.stdout.write(text)


def cmd_spectrum(args, out):
    _need_seed(args)
    if (args.t is None) == (args.sigma is None):
        raise UsageError("give exactly one of --t or --sigma")
    sigma = args.sigma if args.sigma is not None else math.sqrt(args.t / args.n)
    spec = EnsembleSpec(args.n, args.beta, sigma)
    sd = spectral.density_params(spectral.xi_for(spec))
    grid = np.linspace(sd.a, sd.b, args.points)
    rows = list(zip(grid.tolist(), spectral.density_eval(grid, sd).tolist()))
    out.primary(out.csv_text("spectrum", ["y", "density_asymptotic"], rows))
    from .sampler import sample_radial
    chain = sample_radial(spec, args.count, _chain(args))
    ks = spectral.compare_empirical(chain.samples, spec)
    lo = min(sd.a, float(np.exp(chain.samples.min())))
    hi = max(sd.b, float(np.exp(chain.samples.max())))
    tab = spectral.empirical_cdf_table(chain.samples, spec, np.linspace(lo, hi, args.points))
    text = out.csv_text("spectrum_cdf", ["y", "empirical_cdf", "asymptotic_cdf"],
                        [tuple(r) for r in tab.tolist()])
    if args.out:
        out.add(args.out + ".cdf.csv", text)
    print(f"sup |F_emp - F_asym| = {ks:.6f} (xi = {sd.xi:.6g}, {chain.samples.size} eigenvalues)",
          file=sys.stderr)


def cmd_siegel_dist(args, out):
    _, A = read_matrices(args.a, spd=False)
    _, B = read_matrices(args.b, spd=False)
    if len(B) == 1 and len(A) > 1:
        B = np.repeat(B, len(A), axis=0)
    if A.shape != B.shape:
        raise UsageError(f"--a and --b hold {A.shape} and {B.shape}")
    rows = [(i, siegel_distance(A[i], B[i])) for i in range(len(A))]
    out.primary(out.csv_text("siegel_dist", ["index", "distance"], rows))


def cmd_siegel_logz(args, out):
    _need_seed(args)
    rows = []
    for s in parse_grid(args.sigma):
        spec = EnsembleSpec(args.n, args.beta, s)
        r = log_z_acosh_mc(spec, args.samples, args.seed)
        rows.append((args.beta, args.n, s, "monte_carlo", r.log_z, r.log_z / args.n ** 2, r.stderr))
        if args.n == 1:
            v = log_z_acosh_n1(s)
            rows.append((args.beta, 1, s, "closed_form_n1", v, v, 0.0))
    out.primary(out.csv_text("logz", ["beta", "n", "sigma", "method", "log_z",
                                      "log_z_over_n2", "stderr"], rows))


def cmd_siegel_sample(args, out):
    _need_seed(args)
    if args.center:
        _, C = read_matrices(args.center, spd=False)
        center = C[0]
    else:
        center = np.zeros((args.n, args.n), dtype=complex)
    model = SiegelGaussianModel(center, args.sigma, args.beta)
    Om, chain = sample_siegel_gaussian(model, args.count, _chain(args))
    # Siegel points are complex even for beta = 1, so both parts are always written
    out.primary(_jsonl(Om, 2, beta_field=args.beta))


# ----------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (required for stochastic commands)")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--out", default=None, help="output path (default: stdout)")

    chain = argparse.ArgumentParser(add_help=False)
    chain.add_argument("--burn-in", type=int, default=10_000)
    chain.add_argument("--thinning", type=int, default=None, help="default 10*n sweeps")
    chain.add_argument("--step", type=float, default=None, help="default sigma/sqrt(n)")
    chain.add_argument("--chains", type=int, default=1)

    p = argparse.ArgumentParser(prog="spdgauss", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    subparsers = {}

    def add(name, func, help_, parents=(common,)):
        sp = sub.add_parser(name, help=help_, parents=list(parents))
        sp.set_defaults(func=func)
        subparsers[name] = sp
        return sp

    def ens(sp, sigma_grid=True):
        sp.add_argument("--beta", type=int, choices=(1, 2, 4) if sigma_grid else (1, 2),
                        required=True)
        sp.add_argument("--n", type=int, required=True)

    sp = add("logz", cmd_logz, "tabulate log z over a sigma grid")
    ens(sp)
    sp.add_argument("--sigma", required=True, help="start:stop:step or comma list")
    sp.add_argument("--methods", default="exact,trilog",
                    help="comma list: exact, pfaffian, trilog, trilog_corrected, mc")
    sp.add_argument("--mc-samples", type=int, default=1_000_000)

    sp = add("phi", cmd_phi, "tabulate phi(sigma) = sigma^3 d log z / d sigma")
    ens(sp)
    sp.add_argument("--sigma", required=True)
    sp.add_argument("--methods", default="exact,trilog")
    sp.add_argument("--mc-samples", type=int, default=200_000)

    sp = add("sample", cmd_sample, "draw Gaussian SPD matrices (JSON lines)", (common, chain))
    ens(sp, False)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--mean", default=None, help="JSON-lines file; first record is the centre")
    sp.add_argument("--radial", action="store_true", help="also write <out>.radial.csv")

    sp = add("fit", cmd_fit, "fit mean and dispersion to a JSON-lines sample")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--method", default="trilog")
    sp.add_argument("--penalty", default=None, help="LAMBDA,SIGMA0 quadratic penalty")
    sp.add_argument("--mc-samples", type=int, default=200_000)

    sp = add("experiment", cmd_experiment, "dispersion-estimation tables", (common, chain))
    sp.add_argument("--table", type=int, choices=sorted(TABLES), required=True)
    sp.add_argument("--sigmas", default=None, help="true sigmas (default 1..7)")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--m", type=int, default=None, help="matrices per trial")
    sp.add_argument("--mc-samples", type=int, default=200_000)

    sp = add("spectrum", cmd_spectrum, "limiting eigenvalue density vs sampled spectra",
             (common, chain))
    ens(sp, False)
    sp.add_argument("--t", type=float, default=None, help="n sigma^2")
    sp.add_argument("--sigma", type=float, default=None)
    sp.add_argument("--count", type=int, default=200)
    sp.add_argument("--points", type=int, default=401)

    sp = add("siegel-dist", cmd_siegel_dist, "Siegel distances between paired records")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)

    sp = add("siegel-logz", cmd_siegel_logz, "acosh-normal log z by Monte Carlo")
    ens(sp, False)
    sp.add_argument("--sigma", required=True)
    sp.add_argument("--samples", type=int, default=1_000_000)

    sp = add("siegel-sample", cmd_siegel_sample, "Gaussian samples on the Siegel domain",
             (common, chain))
    ens(sp, False)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--center", default=None)
    p.subparsers = subparsers
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if extra:
            sp = parser.subparsers[args.command]
            sp.print_help(sys.stderr)
            sp.error(f"unrecognized arguments: {' '.join(extra)}")
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    out = Output(args, argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            code = args.func(args, out)
        out.flush()
        return EXIT_OK if code is None else code
    except UsageError as e:
        print(f"spdgauss {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, NumericalError, ConvergenceError, FloatingPointError) as e:
        print(f"spdgauss {args.command}: numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
