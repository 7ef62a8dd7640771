"""Command line entry point: ``zetamax <subcommand> [--key value ...]``.

Parameters come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags. Everything is validated before
any computation starts. Exit status: 0 success, 1 numerical abort, 2 usage
error, 3 acceptance ceiling breached under ``--assert``.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import experiments as ex
from . import kernels as kmod
from . import sampling
from . import surrogate as sur
from . import zeta as zmod
from .errors import DomainError, ZetamaxError
from .io import dump_json, read_csv, write_csv
from .primes import (CACHE_ENV, cached_sieve, chebyshev_theta, mertens_sum)
from .rng import SEED_MAX, fresh_seed

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE, EXIT_CEILING = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---- parameter schema --------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    kind: Callable
    default: Any
    lo: float | None = None
    hi: float | None = None
    open_lo: bool = False
    open_hi: bool = False
    choices: tuple | None = None
    help: str = ""

    def describe(self) -> str:
        if self.choices:
            return "one of " + ", ".join(map(str, self.choices))
        lo = "-inf" if self.lo is None else f"{self.lo:g}"
        hi = "inf" if self.hi is None else f"{self.hi:g}"
        return f"{'(' if self.open_lo else '['}{lo}, {hi}{')' if self.open_hi else ']'}"

    def check(self, name: str, value):
        if self.choices is not None:
            if value not in self.choices:
                raise UsageError(f"{name} = {value!r} must be {self.describe()}")
            return
        if isinstance(value, (list, tuple)):
            return
        bad = ((self.lo is not None and (value < self.lo or (self.open_lo and value == self.lo)))
               or (self.hi is not None and (value > self.hi or (self.open_hi and value == self.hi))))
        if bad or (isinstance(value, float) and math.isnan(value)):
            raise UsageError(f"{name} = {value} outside its allowed range {self.describe()}")


def _int(text) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _complex_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [complex(v) for v in text]
    return [complex(v.strip().replace(" ", "")) for v in str(text).split(",") if v.strip()]


def _kappa(text) -> str:
    return str(text).strip().replace(" ", "")


def _optional_int(text):
    return None if str(text).strip().lower() in ("", "none", "auto") else _int(text)


T_ = Param(float, 1e6, 10, 1e10, open_lo=True, help="height T")
TRIALS = Param(_int, 200, 1, 100_000, help="number of trials")
RS = Param(_int, 1, 0, 4, help="Riemann-Siegel correction terms")
FIELD_CFG = {
    "T": Param(float, 1e8, 10, 1e10, open_lo=True, help="height T"),
    "h": Param(float, 1.0, 0, 10, open_lo=True, help="half-width h of the window"),
    "delta": Param(float, 0.1, 0, 0.5, True, True, help="delta in H = floor((log T)^(1-delta))"),
    "K": Param(_int, 3, 2, 64, help="number of prime bands"),
    "kappa": Param(_kappa, "1", choices=("1", "i", "-i"), help="direction kappa"),
    "H": Param(_optional_int, None, 2, sur.MAX_GAUSS_H, help="override for H (none = derived)"),
}

SCHEMAS: dict[str, dict[str, Param]] = {
    "sieve": {"limit": Param(_int, 1_000_000, 1, 2**31, help="sieve limit")},
    "zeta-eval": {"t": Param(float, 100.0, 10, 1e10, help="height t"), "rs_terms": RS,
                  "em_terms": Param(_int, 30, 2, 30, help="Euler-Maclaurin terms")},
    "zero-count": {"t": Param(float, 100.0, 10, 1e6, help="height t")},
    "sup-bound": {"t0": Param(float, 1e4, 50, 1e10, help="window centre t0"),
                  "h": Param(float, 1.0, 0, 10, open_lo=True, help="half-width h"),
                  "T": Param(float, 1e6, 50, 1e10, help="height scale T"),
                  "n": Param(_int, 10_000, 10, 10**7, help="dense-sup grid points"), "rs_terms": RS},
    "sup-experiment": {"T": T_, "h": Param(float, 1.0, 0, 10, open_lo=True, help="half-width h"),
                       "eps": Param(float, 0.5, 0, None, open_lo=True, help="band width epsilon"),
                       "trials": TRIALS, "rs_terms": RS,
                       "certify": Param(_bool, True, choices=(True, False), help="run the certified bound")},
    "selberg": {"T": T_, "trials": Param(_int, 2000, 1, 100_000, help="number of trials"), "rs_terms": RS},
    "tails": {"T": Param(float, 1e8, 100, 1e10, help="height T"),
              "h": Param(float, 1.0, 0, 10, open_lo=True, help="half-width h"),
              "d": Param(float, 0.0, -20, 20, help="shift d in [-2h, 2h]"),
              "B1": Param(float, 2.0, 0, None, open_lo=True, help="threshold B1"),
              "B2": Param(float, 2.0, 0, None, open_lo=True, help="threshold B2"),
              "B3": Param(float, 2.0, 0, None, open_lo=True, help="threshold B3"),
              "a": Param(float, 0.5, 0.5, 10, help="smoothing kernel half-support"),
              "trials": Param(_int, 10_000, 1, 100_000, help="number of trials")},
    "moment-check": {"T": Param(float, 1e4, 10, 1e7, help="interval [T, 2T]"),
                     "x": Param(float, 50.0, 2, None, help="prime cutoff x"),
                     "k": Param(_int, 2, 0, 4, help="moment order k")},
    "laplace-compare": {**FIELD_CFG, "k": Param(_int, 0, 0, None, help="row k"),
                        "l": Param(_int, 1, 0, None, help="row l"),
                        "lam": Param(_complex_list, "0.5", help="lambda_1..lambda_{K-1}, comma separated"),
                        "mu": Param(_complex_list, "0", help="mu_1..mu_{K-1}, comma separated"),
                        "trials": Param(_int, 2000, 1, 100_000, help="number of trials"),
                        "g_mc": Param(_bool, False, choices=(True, False), help="also sample G by Monte Carlo"),
                        "check_regime": Param(_bool, True, choices=(True, False),
                                              help="reject lambda, mu outside the comparison regime")},
    "second-moment": {**FIELD_CFG, "K": Param(_int, 5, 2, 64, help="number of prime bands"),
                      "field": Param(str, "G", choices=("S0", "G"), help="field kind"),
                      "nu": Param(float, 0.3, 0, 0.5, True, True, help="nu in x = log H sqrt(1-nu)/K"),
                      "width": Param(float, 1.0, 0, None, open_lo=True, help="test function width"),
                      "offset": Param(float, 0.0, 0, None, help="test function offset"),
                      "trials": Param(_int, 500, 1, 100_000, help="number of trials")},
    "lower-bound": {**FIELD_CFG, "T": Param(float, 1e6, 10, 1e10, open_lo=True, help="height T"),
                    "eps": Param(float, 0.5, 0, 1, True, True, help="epsilon"),
                    "trials": TRIALS, "rs_terms": RS},
    "cov-check": {**FIELD_CFG, "T": Param(float, 1e6, 10, 1e10, open_lo=True, help="height T"),
                  "K": Param(_int, 4, 2, 64, help="number of prime bands"),
                  "n_v": Param(_int, 100_000, 2, 10**7, help="V draws"),
                  "n_g": Param(_int, 10_000, 2, 10**6, help="G draws")},
}

SUMMARIES = {
    "sieve": "count primes up to a limit and report reciprocal sums",
    "zeta-eval": "evaluate Z(t) and zeta(1/2+it) by two routes",
    "zero-count": "count zeros of zeta up to height t",
    "sup-bound": "certified upper bound for sup |zeta|^2 on a window",
    "sup-experiment": "sup of log|zeta| and Im log zeta on random short windows",
    "selberg": "normalized log|zeta| at random heights against the normal law",
    "tails": "threshold frequencies of smoothed prime sums",
    "moment-check": "mean value of a Dirichlet polynomial power against k!",
    "laplace-compare": "Laplace transforms of the prime-sum field and its models",
    "second-moment": "first and second moments of the high-point count J",
    "lower-bound": "band decomposition of the prime sum against the observed sup",
    "cov-check": "empirical covariances of the random-phase and Gaussian fields",
}

TRIAL_COMMANDS = {"sup-experiment", "selberg", "tails", "laplace-compare", "second-moment", "lower-bound"}
RUN_KEYS = {"seed", "out", "workers", "cache_dir"}


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int
    out: Path
    workers: int = 1
    cache_dir: Path | None = None
    assert_ceilings: bool = False
    resume: bool = False
    record_runtime: bool = False
    sources: dict = field(default_factory=dict)


# ---- parsing --------------------------------------------------------------------------

def read_config_file(path: Path | str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; blank lines are ignored."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zetamax", description="Desk-scale experiments on extreme values of zeta "
                                "on short intervals of the critical line.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="subcommand")
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=SUMMARIES[name], description=SUMMARIES[name], argument_default=argparse.SUPPRESS)
        for key, prm in schema.items():
            sp.add_argument(f"--{key}", dest=key, metavar="V",
                            help=f"{prm.help}; {prm.describe()} (default {prm.default})")
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--seed", help="64-bit unsigned master seed (fresh if omitted)")
        sp.add_argument("--out", help="output directory (default out/<subcommand>)")
        sp.add_argument("--workers", help="worker processes, 0 = one per CPU (default 1)")
        sp.add_argument("--cache-dir", dest="cache_dir", help=f"sieve cache directory (default ${CACHE_ENV})")
        sp.add_argument("--assert", dest="assert_ceilings", action="store_true",
                        help="exit 3 if an acceptance ceiling is breached")
        sp.add_argument("--resume", action="store_true", help="compute only trials missing from the trials CSV")
        sp.add_argument("--record-runtime", dest="record_runtime", action="store_true",
                        help="store wall time in the summary (breaks byte-identical replays)")
    return p


def _convert(name: str, prm: Param, raw):
    try:
        value = prm.kind(raw) if raw is not None else None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{name}: cannot parse {raw!r} ({exc}); allowed {prm.describe()}") from None
    if value is not None:
        prm.check(name, value)
    return value


def parse_config(argv: list[str]) -> RunConfig:
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        raise UsageError("a subcommand is required: " + ", ".join(SCHEMAS))
    ns = vars(parser.parse_args(argv))
    command = ns.pop("command")
    if command is None:
        raise UsageError("a subcommand is required: " + ", ".join(SCHEMAS))
    schema = SCHEMAS[command]
    file_vals = read_config_file(ns.pop("config")) if ns.get("config") else {}
    ns.pop("config", None)
    unknown = sorted(set(file_vals) - set(schema) - RUN_KEYS)
    if unknown:
        raise UsageError(f"unknown key(s) for {command}: {', '.join(unknown)}; "
                         f"allowed: {', '.join(sorted(set(schema) | RUN_KEYS))}")
    merged = {**file_vals, **{k: v for k, v in ns.items() if k in schema or k in RUN_KEYS}}
    params, sources = {}, {}
    for key, prm in schema.items():
        if key in merged:
            params[key] = _convert(key, prm, merged[key])
            sources[key] = "flag" if key in ns else "file"
        else:
            params[key] = prm.kind(prm.default) if prm.default is not None else None
            sources[key] = "default"
    try:
        seed = _int(merged["seed"]) if "seed" in merged else fresh_seed()
    except ValueError:
        raise UsageError(f"seed: cannot parse {merged['seed']!r}; allowed [0, 2^64 - 1]") from None
    if not 0 <= seed <= SEED_MAX:
        raise UsageError(f"seed = {seed} outside [0, 2^64 - 1]")
    try:
        workers = _int(merged.get("workers", 1))
    except ValueError:
        raise UsageError("workers must be an integer >= 0") from None
    if workers < 0:
        raise UsageError(f"workers = {workers} outside [0, inf)")
    cfg = RunConfig(command=command, params=params, seed=seed,
                    out=Path(merged.get("out", Path("out") / command)), workers=workers,
                    cache_dir=Path(merged["cache_dir"]) if merged.get("cache_dir") else None,
                    assert_ceilings=bool(ns.get("assert_ceilings")), resume=bool(ns.get("resume")),
                    record_runtime=bool(ns.get("record_runtime")), sources=sources)
    validate(cfg)
    return cfg


def _surrogate(p: dict) -> sur.SurrogateConfig:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sur.derive_config(p["T"], p["h"], p["delta"], p["K"], p["kappa"], p["H"])


def validate(cfg: RunConfig) -> None:
    """Cross-parameter checks that a per-key range cannot express."""
    p = cfg.params
    c = cfg.command
    try:
        if "delta" in p:
            s = _surrogate(p)
            if c in ("laplace-compare", "lower-bound", "cov-check") or (c == "second-moment" and p["field"] == "S0"):
                if s.H > 20:
                    raise UsageError(f"H = {s.H} needs primes up to e^H; allowed H <= 20 for prime-sum fields")
            if c == "laplace-compare":
                for key in ("lam", "mu"):
                    if len(p[key]) > s.K - 1:
                        raise UsageError(f"{key} has {len(p[key])} entries; allowed at most K-1 = {s.K - 1}")
                    p[key] = p[key] + [0j] * (s.K - 1 - len(p[key]))
                for key in ("k", "l"):
                    if p[key] >= s.H:
                        raise UsageError(f"{key} = {p[key]} outside [0, H-1] = [0, {s.H - 1}]")
        if c == "tails" and abs(p["d"]) > 2 * p["h"]:
            raise UsageError(f"d = {p['d']} outside [-2h, 2h] = [{-2 * p['h']:g}, {2 * p['h']:g}]")
        if c == "sup-bound":
            if p["t0"] < 50 * (1 + p["h"] ** 4):
                raise UsageError(f"t0 = {p['t0']:g} outside [50(1 + h^4), T] = [{50 * (1 + p['h'] ** 4):g}, {p['T']:g}]")
            if p["t0"] > p["T"]:
                raise UsageError(f"T = {p['T']:g} must be >= t0 = {p['t0']:g}")
        if c == "moment-check" and p["k"] > 0:
            if p["x"] > p["T"] or p["x"] ** p["k"] > p["T"]:
                raise UsageError(f"x^k = {p['x'] ** p['k']:g} outside (0, T] with T = {p['T']:g}")
    except DomainError as exc:
        raise UsageError(str(exc)) from None


# ---- trials CSV ------------------------------------------------------------------------

def _stat_keys(records) -> list[str]:
    return sorted({k for r in records for k in r.stats})


def write_trials(path: Path, records, append: bool, header: list[str] | None = None) -> None:
    keys = header[2:] if header else _stat_keys(records)
    rows = [[r.trial_id, r.u] + [r.stats.get(k, "") for k in keys] for r in records]
    write_csv(path, ["trial_id", "u"] + keys, rows, append=append)


def read_trials(path: Path) -> tuple[list[str], list]:
    header, rows = read_csv(path)
    if header[:2] != ["trial_id", "u"]:
        raise UsageError(f"{path} is not a trials CSV (header {header[:2]})")
    recs = []
    for row in rows:
        stats = {k: float(v) for k, v in zip(header[2:], row[2:]) if v != ""}
        recs.append(ex.TrialRecord(int(row[0]), float(row[1]), stats))
    return header, recs


# ---- dispatch -------------------------------------------------------------------------------

def _table(limit: float, cfg: RunConfig):
    return cached_sieve(int(math.ceil(limit)) + 2, cfg.cache_dir)


def _zcfg(p: dict) -> zmod.ZetaEvalConfig:
    return zmod.ZetaEvalConfig(rs_correction_terms=p.get("rs_terms", 1), em_terms=p.get("em_terms", 30))


def _experiment(cfg: RunConfig, trial_ids, prior) -> ex.ExperimentResult:
    p, c, seed, w = cfg.params, cfg.command, cfg.seed, cfg.workers
    kw = dict(seed=seed, workers=w, trial_ids=trial_ids, prior=prior)
    if c == "sup-experiment":
        return ex.sup_experiment(p["T"], p["h"], p["eps"], p["trials"], _zcfg(p), certify=p["certify"], **kw)
    if c == "selberg":
        return ex.selberg_clt_check(p["T"], p["trials"], _zcfg(p), **kw)
    if c == "tails":
        kernel = kmod.default_smoothing_kernel(p["a"])
        table = _table(math.exp(kernel.support_A * ex.tail_H(p["T"])), cfg)
        return ex.tail_probabilities(p["T"], p["h"], p["d"], p["B1"], p["B2"], p["B3"], kernel, table,
                                     p["trials"], **kw)
    s = _surrogate(p)
    if c == "laplace-compare":
        return ex.laplace_compare(s, p["k"], p["l"], p["lam"], p["mu"], p["trials"], _table(math.exp(s.H), cfg),
                                  g_mc=p["g_mc"], check_regime=p["check_regime"], **kw)
    if c == "second-moment":
        table = _table(math.exp(s.H), cfg) if p["field"] == "S0" else None
        return ex.second_moment_J(p["field"], s, p["nu"], ex.TestFunction(p["width"], p["offset"]),
                                  p["trials"], table, **kw)
    if c == "lower-bound":
        return ex.lower_bound_pipeline(s, p["eps"], p["trials"], _table(math.exp(s.H), cfg), _zcfg(p), **kw)
    raise UsageError(f"{c} is not a trial experiment")


def _single(cfg: RunConfig) -> tuple[dict, dict, str]:
    """Run a non-trial subcommand; returns (results, checks, line to print)."""
    p, c = cfg.params, cfg.command
    if c == "sieve":
        table = cached_sieve(p["limit"], cfg.cache_dir)
        n = len(table)
        res = {"count": n, "largest": int(table.primes[-1]) if n else None,
               "mertens_sum": mertens_sum(table, p["limit"]),
               "chebyshev_theta_ratio": chebyshev_theta(table, p["limit"]) / p["limit"]}
        return res, {}, str(n)
    if c == "zeta-eval":
        z = _zcfg(p)
        t = p["t"]
        Z = float(zmod.riemann_siegel_Z(np.array([t]), z)[0])
        res = {"t": t, "theta": float(zmod.theta_rs(t)), "Z": Z, "abs_zeta": abs(Z),
               "rs_error_budget": float(zmod.rs_error_budget(t, z.rs_correction_terms))}
        if t <= zmod.EM_MAX_HEIGHT:
            zeta = complex(zmod.zeta_euler_maclaurin(0.5 + 1j * t, z))
            res["zeta_euler_maclaurin"] = zeta
            res["count_zeros"] = zmod.count_zeros(t, z)
        return res, {}, f"Z({t:g}) = {Z:.15g}"
    if c == "zero-count":
        n = zmod.count_zeros(p["t"])
        return {"t": p["t"], "count": n, "S": zmod.delta_fluctuation(p["t"])}, {}, str(n)
    if c == "sup-bound":
        z = _zcfg(p)
        b = sampling.certified_sup_bound_zeta_sq(p["t0"], p["h"], p["T"], zeta_cfg=z)
        a, e = p["t0"] - p["h"], p["t0"] + p["h"]
        dense = sampling.dense_sup(lambda x: np.abs(zmod.riemann_siegel_Z(x, z)) ** 2, a, e, p["n"])
        res = {"bound": b.value, "advisory": b.advisory, "terms": b.terms, "n_samples": b.n_samples,
               "dense_sup": dense, "ratio": b.value / dense}
        return res, {"bound_above_dense_sup": b.value >= dense}, f"{b.value:.10g} >= {dense:.10g}"
    if c == "moment-check":
        m = ex.moment_bound_check(p["T"], p["x"], p["k"])
        return asdict(m), {"ratio_at_most_10": m.ratio <= 10}, f"{m.ratio:.10g}"
    if c == "cov-check":
        s = _surrogate(p)
        r = ex.covariance_check(s, _table(math.exp(s.H), cfg), p["n_v"], p["n_g"], cfg.seed)
        return r.results, r.checks, ", ".join(f"{k}={'PASS' if v else 'FAIL'}" for k, v in r.checks.items())
    raise UsageError(f"unknown subcommand {c}")


def _quantile_files(out: Path, results: dict, prefix: str = "") -> None:
    for key, val in results.items():
        if isinstance(val, dict) and "quantiles" in val and "n_trials" in val:
            qs = sorted(val["quantiles"].items())
            write_csv(out / "quantiles" / f"{prefix}{key}.csv", ["x", "y"],
                      [[int(k[1:]) / 100, v] for k, v in qs])


def run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    cfg.out.mkdir(parents=True, exist_ok=True)
    trials_path = cfg.out / "trials.csv"
    if cfg.command in TRIAL_COMMANDS:
        header, prior = (None, [])
        if cfg.resume and trials_path.exists():
            header, prior = read_trials(trials_path)
        done = {r.trial_id for r in prior}
        missing = [t for t in range(cfg.params["trials"]) if t not in done]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", category=UserWarning)
            result = _experiment(cfg, missing, prior)
        new = [r for r in result.records if r.trial_id not in done]
        if header is not None and set(_stat_keys(new)) <= set(header[2:]):
            write_trials(trials_path, new, append=True, header=header)
        else:
            write_trials(trials_path, result.records, append=False)
        # the summary is computed from the CSV as written, so it is reproducible from disk
        _, records = read_trials(trials_path)
        records = [r for r in records if r.trial_id < cfg.params["trials"]]
        results, checks = ex.AGGREGATORS[cfg.command][1](result.params, records)
        params = result.params
        line = ", ".join(f"{k}={'PASS' if v else 'FAIL'}" for k, v in checks.items())
        _quantile_files(cfg.out, results)
    else:
        results, checks, line = _single(cfg)
        params = dict(cfg.params)
    summary = {"params": {**params, "command": cfg.command}, "seed": cfg.seed,
               "results": {**results, "checks": checks},
               "runtime_seconds": time.perf_counter() - start if cfg.record_runtime else None,
               "version": __version__}
    (cfg.out / "summary.json").write_text(dump_json(summary))
    print(line)
    if cfg.assert_ceilings and not all(checks.values()):
        failed = [k for k, v in checks.items() if not v]
        print("ceiling breached: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CEILING
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"zetamax: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:       # argparse usage errors and --help
        return int(exc.code or 0)
    try:
        return run(cfg)
    except (DomainError, UsageError) as exc:
        print(f"zetamax: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ZetamaxError as exc:
        print(f"zetamax: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
