"""
Command-line interface and file formats.

Subcommands: ``simulate``, ``fit``, ``update``, ``predict``, ``diagnose``
and ``baseline``.  Run ``laf <command> -h`` for flags.

File formats
------------
data CSV
    Header row, first column time (reals or ISO dates, mapped to day
    offsets from the first date), remaining columns one series each.
    Empty cells are missing.
truth_mu.csv / truth_sigma.csv
    Long form ``t,j,value`` and ``t,j,k,value`` (j >= k, 1-based).
summary_mu.csv / summary_sigma.csv
    Long form ``t,j,mean,hpd_lo,hpd_hi`` and ``t,j,k,mean,hpd_lo,hpd_hi``.
config file
    ``key = value`` lines using :class:`~laf.model.LafConfig` field names;
    ``#`` starts a comment.  Unknown keys are errors.
chain_<c>.npz
    Retained draws of chain c, one stacked array per quantity.

Exit codes are 0 on success, 1 for usage and configuration errors, 2 for
data errors and 3 for numerical failures.  ``LAF_THREADS`` sets the number
of worker processes used for independent chains.
"""
import argparse
import csv
import datetime as dt
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import ewma_cov, moving_average_mean, select_lambda
from .diagnostics import (
    QUANTILE_COLUMNS,
    PathSummary,
    hpd_bands,
    psrf_split,
    standardized_errors,
    summarize_chain,
)
from .model import (
    ConfigError,
    Dataset,
    FactorState,
    LafConfig,
    Loadings,
    PosteriorDraw,
    check_config,
    compose_gamma,
    scenario_a_config,
    scenario_b_config,
)
from .ngp import DictionaryPaths, NgpVariances, TimeGrid
from .online import WARM_START, extract_fixed_params, one_step_errors, online_update, predict
from .sampler import Chain, GammaAccumulator, SamplerError, run_chains
from .statespace import NumericalError
from .synth import ScenarioSpec, continue_generate, generate

__all__ = [
    "DataError",
    "UsageError",
    "ingest_csv",
    "write_data_csv",
    "read_config",
    "write_config",
    "save_chain",
    "load_chain",
    "read_long_csv",
    "main",
]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

_INT_FIELDS = {"L_star", "K_star", "p", "n_iter", "burn_in", "thin", "seed"}


class DataError(ValueError):
    pass


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- data files

def _parse_time(cell, row):
    try:
        return float(cell), False
    except ValueError:
        pass
    try:
        return dt.date.fromisoformat(cell.strip()), True
    except ValueError:
        raise DataError(f"row {row}: cannot parse time {cell!r}") from None


def ingest_csv(path):
    """Read a data CSV into a :class:`~laf.model.Dataset`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2:
        raise DataError(f"{path}: need a time column and at least one series")
    times, values, is_date = [], [], None
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise DataError(f"{path}: row {n} has {len(r)} fields, header has {len(header)}")
        t, date = _parse_time(r[0], n)
        if is_date is None:
            is_date = date
        elif date != is_date:
            raise DataError(f"{path}: row {n} mixes dates and numbers in the time column")
        vals = []
        for c in r[1:]:
            c = c.strip()
            try:
                vals.append(float(c) if c else np.nan)
            except ValueError:
                raise DataError(f"{path}: row {n}: bad value {c!r}") from None
        times.append(t)
        values.append(vals)
    if not times:
        raise DataError(f"{path}: no data rows")
    if is_date:
        times = [(d - times[0]).days for d in times]
    times = np.asarray(times, dtype=float)
    for i in range(1, times.size):
        if times[i] == times[i - 1]:
            raise DataError(f"{path}: row {i + 2} duplicates the time of the previous row")
        if times[i] < times[i - 1]:
            raise DataError(f"{path}: row {i + 2} is earlier than the previous row")
    return Dataset.from_array(times, np.array(values), [h.strip() for h in header[1:]])


def _fmt(x):
    return "" if not np.isfinite(x) else repr(float(x))


def write_data_csv(path, data):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *data.names])
        for t, row in zip(data.times, data.y):
            w.writerow([_fmt(t), *(_fmt(v) for v in row)])


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([str(int(c)) if isinstance(c, (int, np.integer)) else c if isinstance(c, str) else _fmt(c) for c in r])


def write_mu_csv(path, times, cols, names=("value",)):
    """Long-form (t, j, *cols) with ``cols`` a list of (T, p) arrays."""
    T, p = cols[0].shape
    rows = ([times[i], j + 1, *(c[i, j] for c in cols)] for i in range(T) for j in range(p))
    _write_rows(path, ["t", "j", *names], rows)


def write_sigma_csv(path, times, cols, names=("value",)):
    """Long-form (t, j, k, *cols), j >= k, with ``cols`` (T, p, p) arrays."""
    T, p, _ = cols[0].shape
    jj, kk = np.tril_indices(p)
    rows = ([times[i], j + 1, k + 1, *(c[i, j, k] for c in cols)]
            for i in range(T) for j, k in zip(jj, kk))
    _write_rows(path, ["t", "j", "k", *names], rows)


def read_long_csv(path):
    """Read a long-form mu or Sigma file back into arrays.

    Returns ``(times, {column: array})`` where arrays are (T, p) for mu
    files and symmetric (T, p, p) for Sigma files.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    is_sigma = header[:3] == ["t", "j", "k"]
    n_key = 3 if is_sigma else 2
    if header[:2] != ["t", "j"] or not body:
        raise DataError(f"{path}: not a long-form summary file")
    try:
        t = np.array([float(r[0]) for r in body])
        idx = np.array([[int(c) for c in r[1:n_key]] for r in body]) - 1
        vals = np.array([[float(c) if c else np.nan for c in r[n_key:]] for r in body])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: {exc}") from None
    times, ti = np.unique(t, return_inverse=True)
    p = idx.max() + 1
    out = {}
    for c, name in enumerate(header[n_key:]):
        if is_sigma:
            a = np.full((times.size, p, p), np.nan)
            a[ti, idx[:, 0], idx[:, 1]] = vals[:, c]
            a[ti, idx[:, 1], idx[:, 0]] = vals[:, c]
        else:
            a = np.full((times.size, p), np.nan)
            a[ti, idx[:, 0]] = vals[:, c]
        out[name] = a
    return times, out


# ---------------------------------------------------------------- config

def read_config(path, base=None):
    """Parse a ``key = value`` config file over ``base`` (default LafConfig())."""
    base = LafConfig() if base is None else base
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    known = set(LafConfig.field_names())
    changes, errors = {}, []
    for n, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {n}: expected key = value")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            errors.append(f"line {n}: unknown key {key!r}")
            continue
        try:
            if key == "p" and val.lower() in ("", "none"):
                changes[key] = None
            elif key in _INT_FIELDS:
                changes[key] = int(val)
            else:
                changes[key] = float(val)
        except ValueError:
            errors.append(f"line {n}: bad value {val!r} for {key}")
    if errors:
        raise ConfigError(errors)
    return check_config(base.replace(**changes))


def write_config(path, cfg):
    lines = [f"{name} = {getattr(cfg, name)!r}" for name in LafConfig.field_names()]
    Path(path).write_text("\n".join(lines) + "\n")


def _config_dict(cfg):
    return {name: getattr(cfg, name) for name in LafConfig.field_names()}


# ---------------------------------------------------------------- chains

_DRAW_FIELDS = ("theta", "phi", "vartheta", "sigma2", "nu", "eta", "xi", "xi_deriv", "A",
                "psi", "psi_deriv", "B", "sigma2_xi", "sigma2_A", "sigma2_psi", "sigma2_B")


def save_chain(path, chain):
    arrays = {name: chain.stack(name) for name in _DRAW_FIELDS}
    meta = {k: v for k, v in chain.meta.items() if k != "wall_time"}
    np.savez_compressed(path, grid_raw=chain.grid.raw, grid_origin=chain.grid.origin,
                        grid_scale=chain.grid.scale, meta=json.dumps(meta), **arrays)


def load_chain(path):
    """Load a chain saved by :func:`save_chain`; the summary accumulator is rebuilt."""
    try:
        with np.load(path) as z:
            a = {k: z[k] for k in z.files}
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None
    grid = TimeGrid(a["grid_raw"], float(a["grid_origin"]), float(a["grid_scale"]))
    draws = []
    for i in range(a["theta"].shape[0]):
        draws.append(PosteriorDraw(
            Loadings(a["theta"][i], a["phi"][i], a["vartheta"][i]),
            a["sigma2"][i],
            DictionaryPaths(a["xi"][i], a["xi_deriv"][i], a["A"][i],
                            a["psi"][i], a["psi_deriv"][i], a["B"][i]),
            FactorState(a["nu"][i], a["eta"][i]),
            NgpVariances(a["sigma2_xi"][i], a["sigma2_A"][i],
                         a["sigma2_psi"][i], a["sigma2_B"][i]),
        ))
    acc = GammaAccumulator(max(len(draws), 1))
    for d in draws:
        acc.add(compose_gamma(d))
    return Chain(draws, grid, acc, None, json.loads(str(a["meta"])))


def _load_fitted(fitted):
    fitted = Path(fitted)
    paths = sorted(fitted.glob("chain_*.npz"))
    if not paths:
        raise DataError(f"{fitted}: no chain files")
    chains = [load_chain(p) for p in paths]
    cfg = read_config(fitted / "config.txt")
    data = ingest_csv(fitted / "data.csv")
    return chains, cfg, data


# ---------------------------------------------------------------- outputs

def _write_summary(out, times, summary, prefix="summary"):
    write_mu_csv(out / f"{prefix}_mu.csv", times,
                 [summary.mu_mean, summary.mu_lo, summary.mu_hi], ("mean", "hpd_lo", "hpd_hi"))
    write_sigma_csv(out / f"{prefix}_sigma.csv", times,
                    [summary.sigma_mean, summary.sigma_lo, summary.sigma_hi],
                    ("mean", "hpd_lo", "hpd_hi"))
    return [f"{prefix}_mu.csv", f"{prefix}_sigma.csv"]


def _write_manifest(out, command, argv, cfg, seed, inputs, outputs, started):
    manifest = dict(
        command=command,
        argv=list(argv),
        config=_config_dict(cfg) if cfg is not None else None,
        seed=seed,
        inputs=[str(p) for p in inputs],
        outputs=list(outputs),
        started=started,
        finished=dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        version=f"laf {__version__}",
    )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _error_table_rows(label, table):
    return [[label, "Sigma", *table.sigma], [label, "mu", *table.mu]]


# ---------------------------------------------------------------- commands

def _base_config(args):
    base = scenario_b_config() if args.preset == "B" else scenario_a_config()
    cfg = read_config(args.config, base) if args.config else base
    over = {}
    for name in ("seed", "n_iter", "burn_in", "thin"):
        val = getattr(args, name, None)
        if val is not None:
            over[name] = val
    return check_config(cfg.replace(**over))


def cmd_simulate(args, out):
    make = ScenarioSpec.A if args.scenario == "A" else ScenarioSpec.B
    spec = make(seed=args.seed, **({"T": args.T} if args.T else {}))
    rng = np.random.default_rng(args.seed)
    data, truth = generate(spec, rng)
    write_data_csv(out / "data.csv", data)
    outputs = ["data.csv", "truth_mu.csv", "truth_sigma.csv"]
    if args.extra:
        new, truth = continue_generate(truth, args.extra, rng)
        write_data_csv(out / "new_data.csv", new)
        outputs.append("new_data.csv")
    write_mu_csv(out / "truth_mu.csv", truth.times, [truth.gamma.mu])
    write_sigma_csv(out / "truth_sigma.csv", truth.times, [truth.gamma.sigma])
    return None, args.seed, [], outputs


def _workers():
    raw = os.environ.get("LAF_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"LAF_THREADS must be an integer, got {raw!r}") from None
    return max(n, 1)


def cmd_fit(args, out):
    data = ingest_csv(args.data)
    cfg = _base_config(args)
    chains = run_chains(cfg, data, args.chains, workers=_workers())
    outputs = []
    for c, ch in enumerate(chains):
        save_chain(out / f"chain_{c}.npz", ch)
        outputs.append(f"chain_{c}.npz")
    write_data_csv(out / "data.csv", data)
    write_config(out / "config.txt", cfg)
    outputs += ["data.csv", "config.txt"]
    outputs += _write_summary(out, data.times, summarize_chain(chains, args.prob))
    print(f"fit: {len(chains)} chain(s), {sum(len(c) for c in chains)} retained draws")
    return cfg, cfg.seed, [args.data], outputs


def _mcmc_lengths(args, cfg):
    n_iter = args.n_iter if args.n_iter is not None else cfg.n_iter
    burn = args.burn_in if args.burn_in is not None else min(cfg.burn_in, n_iter - 1)
    if burn >= n_iter:
        raise UsageError("burn-in must be smaller than the number of iterations")
    return n_iter, burn


def cmd_update(args, out):
    chains, cfg, history = _load_fitted(args.fitted)
    new = ingest_csv(args.new_data)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    n_iter, burn = _mcmc_lengths(args, cfg)
    fixed = extract_fixed_params(chains)
    res = online_update(fixed, new, history, args.warmstart, cfg,
                        np.random.default_rng(cfg.seed), n_iter=n_iter, burn_in=burn)
    s = summarize_chain(res.chain, args.prob)
    sl = res.new_slice
    s_new = PathSummary(s.mu_mean[sl], s.mu_lo[sl], s.mu_hi[sl],
                        s.sigma_mean[sl], s.sigma_lo[sl], s.sigma_hi[sl], s.n_draws)
    outputs = _write_summary(out, res.window.times[sl], s_new)
    print(f"update: {res.window.T - res.n_warm} new step(s), warm start {res.n_warm}")
    return cfg, cfg.seed, [args.fitted, args.new_data], outputs


def cmd_predict(args, out):
    chains, cfg, history = _load_fitted(args.fitted)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    n_iter, burn = _mcmc_lengths(args, cfg)
    rng = np.random.default_rng(cfg.seed)
    fixed = extract_fixed_params(chains)
    pred = predict(fixed, history, args.horizon, args.warmstart, cfg, rng,
                   n_iter=n_iter, burn_in=burn)
    mu_lo, mu_hi = hpd_bands(pred.mu_draws, args.prob)
    s_lo, s_hi = hpd_bands(pred.sigma_draws, args.prob)
    write_mu_csv(out / "predict_mu.csv", pred.times, [pred.mu_mean, mu_lo, mu_hi],
                 ("mean", "hpd_lo", "hpd_hi"))
    write_sigma_csv(out / "predict_sigma.csv", pred.times, [pred.sigma_mean, s_lo, s_hi],
                    ("mean", "hpd_lo", "hpd_hi"))
    y_lo, y_hi = pred.intervals(args.prob)
    write_mu_csv(out / "intervals.csv", pred.times, [y_lo, y_hi], ("lo", "hi"))
    outputs = ["predict_mu.csv", "predict_sigma.csv", "intervals.csv"]
    inputs = [args.fitted]
    if args.realized:
        realized = ingest_csv(args.realized)
        errs = one_step_errors(fixed, history, realized, max(args.warmstart, 1), cfg, rng,
                               n_iter=n_iter, burn_in=burn)
        rows = []
        print(f"{'method':8s}" + "".join(f"{n:>12s}" for n in realized.names) + f"{'all':>12s}")
        for m in "abc":
            mse = np.nanmean(errs[m] ** 2, axis=0)
            rows.append([m, *mse, float(np.nanmean(errs[m] ** 2))])
            print(f"{m:8s}" + "".join(f"{v:12.5f}" for v in rows[-1][1:]))
        _write_rows(out / "errors.csv", ["method", *realized.names, "all"], rows)
        outputs.append("errors.csv")
        inputs.append(args.realized)
    return cfg, cfg.seed, inputs, outputs


def _lag1(x):
    x = x - x.mean()
    d = x @ x
    return float(x[1:] @ x[:-1] / d) if d > 0 else 0.0


def cmd_diagnose(args, out):
    chains, cfg, _ = _load_fitted(args.fitted)
    rows, values, lags = [], [], []
    for c, ch in enumerate(chains):
        if len(ch) < 2 * args.segments:
            raise DataError(f"chain {c} has {len(ch)} draws, need {2 * args.segments}")
        mu = np.array([compose_gamma(d).mu for d in ch.draws])
        sig = np.array([compose_gamma(d).sigma for d in ch.draws])
        p = mu.shape[2]
        jj, kk = np.tril_indices(p)
        blocks = [("mu", mu.reshape(len(ch), -1)),
                  ("Sigma", sig[:, :, jj, kk].reshape(len(ch), -1)),
                  ("sigma2", ch.stack("sigma2"))]
        for name, block in blocks:
            for idx in range(block.shape[1]):
                r = psrf_split(block[:, idx], args.segments)
                rows.append([c, name, idx, r])
                values.append(r)
                lags.append(_lag1(block[:, idx]))
    _write_rows(out / "psrf.csv", ["chain", "quantity", "index", "psrf"], rows)
    values = np.array(values)
    print(f"psrf over {values.size} quantities ({args.segments} segments): "
          f"median {np.median(values):.4f}, 95th {np.quantile(values, 0.95):.4f}, "
          f"max {values.max():.4f}, share > 1.2 {np.mean(values > 1.2):.4f}")
    meta = chains[0].meta
    print(f"trace: n_iter {meta.get('n_iter')}, burn-in {meta.get('burn_in')}, "
          f"thin {meta.get('thin')}, retained {len(chains[0])} per chain, "
          f"median lag-1 autocorrelation {np.median(lags):.4f}")
    return cfg, cfg.seed, [args.fitted], ["psrf.csv"]


def cmd_baseline(args, out):
    data = ingest_csv(args.data)
    mu = moving_average_mean(data, args.window)
    if np.isnan(mu).any():
        raise DataError("moving average undefined for some cells; widen --window")
    outputs = []
    truth_mu = truth_sigma = None
    if args.truth:
        tdir = Path(args.truth)
        _, m = read_long_csv(tdir / "truth_mu.csv")
        _, s = read_long_csv(tdir / "truth_sigma.csv")
        truth_mu, truth_sigma = m["value"][:data.T], s["value"][:data.T]
    if args.lam is not None:
        lam = args.lam
    elif truth_sigma is not None:
        lam, table = select_lambda(data, truth_sigma, np.round(np.arange(1, 100) / 100, 2), mu)
        _write_rows(out / "lambda_table.csv", ["lambda", "mse"], table)
        outputs.append("lambda_table.csv")
    else:
        raise UsageError("baseline without --truth needs --lam")
    est = ewma_cov(data, mu, lam)
    write_sigma_csv(out / "ewma_sigma.csv", data.times, [est])
    write_mu_csv(out / "ma_mu.csv", data.times, [mu])
    outputs += ["ewma_sigma.csv", "ma_mu.csv"]
    print(f"EWMA lambda = {lam:g}, moving-average window = {args.window}")
    if truth_sigma is not None:
        tab = standardized_errors(mu, est, truth_mu, truth_sigma)
        print(tab.format("EWMA"))
        _write_rows(out / "error_table.csv", ["estimate", "quantity", *QUANTILE_COLUMNS],
                    _error_table_rows("EWMA", tab))
        outputs.append("error_table.csv")
    return None, None, [args.data] + ([args.truth] if args.truth else []), outputs


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_mcmc(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--n-iter", dest="n_iter", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--prob", type=float, default=0.95, help="hpd probability")


def build_parser():
    parser = _Parser(prog="laf", description="Locally adaptive factor processes")
    parser.add_argument("--version", action="version", version=f"laf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a synthetic scenario")
    p.add_argument("--scenario", choices=("A", "B"), default="A")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=int, help="number of time points")
    p.add_argument("--extra", type=int, default=0,
                   help="also simulate this many continued steps into new_data.csv")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="run the Gibbs sampler")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--preset", choices=("A", "B"), default="A",
                   help="base settings the config file overrides")
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--thin", type=int)
    _add_mcmc(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("update", help="online update with parameters fixed")
    p.add_argument("--fitted", required=True)
    p.add_argument("--new-data", dest="new_data", required=True)
    p.add_argument("--warmstart", type=int, default=WARM_START)
    _add_mcmc(p)
    p.add_argument("--out")

    p = sub.add_parser("predict", help="h-step-ahead prediction")
    p.add_argument("--fitted", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--warmstart", type=int, default=WARM_START)
    p.add_argument("--realized", help="realized data for one-step error tables")
    _add_mcmc(p)
    p.add_argument("--out")

    p = sub.add_parser("diagnose", help="convergence diagnostics")
    p.add_argument("--fitted", required=True)
    p.add_argument("--segments", type=int, default=6)
    p.add_argument("--out")

    p = sub.add_parser("baseline", help="EWMA benchmark")
    p.add_argument("--data", required=True)
    p.add_argument("--truth", help="directory with truth_mu.csv and truth_sigma.csv")
    p.add_argument("--window", type=int, default=5, help="moving-average window")
    p.add_argument("--lam", type=float, help="fixed smoothing parameter")
    p.add_argument("--out", required=True)
    return parser


_COMMANDS = dict(simulate=cmd_simulate, fit=cmd_fit, update=cmd_update, predict=cmd_predict,
                 diagnose=cmd_diagnose, baseline=cmd_baseline)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    started = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    try:
        args = build_parser().parse_args(argv)
        out = Path(getattr(args, "out", None) or Path(args.fitted) / args.command)
        out.mkdir(parents=True, exist_ok=True)
        cfg, seed, inputs, outputs = _COMMANDS[args.command](args, out)
        _write_manifest(out, args.command, argv, cfg, seed, inputs, outputs, started)
    except (UsageError, ConfigError) as exc:
        print(f"laf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"laf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"laf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, SamplerError, np.linalg.LinAlgError) as exc:
        print(f"laf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
