"""Command-line entry point.

Commands: ``analyze``, ``cover``, ``sweep`` and ``wiretap``. Reports are a
single JSON object carrying ``schema_version``; tables are CSV with a header
row and ``\\n`` line endings. Floats are written with 17 significant digits.

Exit codes: 0 success, 2 configuration error, 3 infeasible parameters,
4 resource guard.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field

from .covering import (
    analyze_codebook,
    codebook_size,
    complete_codebook,
    induced_distribution,
    sample_codebook,
)
from .experiments import (
    decay_sweep,
    sweep_parameters,
    wiretap_experiment,
)
from .exponents import (
    InfeasibleParametersError,
    atypical_probability_exact,
    beta_exponent,
    check_parameters,
    chernoff_rhs_mass,
    chernoff_rhs_ratio,
    composition_count,
    default_parameters,
    log2_kl_ceiling,
    rate_certificate,
    union_bound_failure,
    MAX_COMPOSITIONS,
    PairTypeTable,
)
from .measures import (
    DistributionError,
    SizeGuardError,
    check_tensor_size,
    load_pair,
    mutual_information,
    pair_to_dict,
)

log = logging.getLogger("softcover")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_GUARD = 0, 2, 3, 4
TRIAL_COLUMNS = ["n", "R", "seed", "kl_bits", "tv", "mass_p2", "in_s", "term_h", "term_1", "term_2"]
SUMMARY_COLUMNS = ["n", "R", "trials", "median_kl", "q90_kl", "mean_mass_p2", "frac_in_s"]
WIRETAP_COLUMNS = [
    "n", "rate_message", "rate_random", "seed", "m_message", "m_random",
    "max_kl", "max_pairwise_tv", "pairs_checked",
]
DEFAULT_TABLE_NS = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000]


class ConfigError(ValueError):
    pass


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _scalar(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return fmt_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dump_report(obj, indent: int = 0) -> str:
    """JSON text with every float in 17-significant-digit form."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{_scalar(str(k))}: {dump_report(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        items = [inner + dump_report(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if hasattr(obj, "item"):
        obj = obj.item()
    return _scalar(obj)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt_float(value)
    return str(value)


def dump_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


@dataclass
class RunConfig:
    command: str
    channel: str
    out: str | None = None
    format: str | None = None
    workers: int = 1
    seed: int = 0
    n: int | None = None
    ns: list = field(default_factory=list)
    rate: float | None = None
    rates: list = field(default_factory=list)
    epsilon: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    trials: int = 0
    n_min: int = 1
    n_max: int = 10000
    table_ns: list = field(default_factory=list)
    atypical_max_n: int = 40
    rate_message: float = 0.0
    rate_random: float | None = None
    complete: bool = False
    dump_mass: bool = False
    summary_out: str | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        known = {k: v for k, v in vars(args).items() if k in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in known.items() if v is not None})

    def validate(self):
        """Reject malformed settings before any computation starts."""
        if self.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        for name in ("epsilon", "beta1", "beta2"):
            value = getattr(self, name)
            if value is not None and not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"--{name} must be a positive finite number")
        chosen = [self.epsilon, self.beta1, self.beta2]
        if any(v is not None for v in chosen) and self.command == "analyze":
            if not all(v is not None for v in chosen):
                raise ConfigError("--epsilon, --beta1 and --beta2 must be given together")
        if self.command in ("analyze", "cover") and self.rate is None and not self.complete:
            raise ConfigError("--rate is required")
        if self.rate is not None and not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ConfigError("--rate must be a non-negative finite number")
        if self.command == "analyze":
            if not 1 <= self.n_min <= self.n_max:
                raise ConfigError("need 1 <= --n-min <= --n-max")
        if self.command == "cover" and (self.n is None or self.n < 1):
            raise ConfigError("--n must be a positive integer")
        if self.command == "sweep":
            if self.trials < 1:
                raise ConfigError("--trials must be at least 1")
            if not self.ns or min(self.ns) < 1:
                raise ConfigError("--ns must list positive block lengths")
            if not self.rates or min(self.rates) < 0:
                raise ConfigError("--rates must list non-negative rates")
        if self.command == "wiretap":
            if not self.ns or min(self.ns) < 1:
                raise ConfigError("--ns must list positive block lengths")
            if self.rate_random is None or self.rate_random < 0 or self.rate_message < 0:
                raise ConfigError("--rate-random is required; rates must be non-negative")
        fmts = {"analyze": ("report", "csv"), "cover": ("report", "csv"),
                "sweep": ("csv",), "wiretap": ("report", "csv")}[self.command]
        if self.format is None:
            self.format = fmts[0]
        elif self.format not in fmts:
            raise ConfigError(f"--format {self.format} not available for {self.command}")


def _load(cfg: RunConfig):
    try:
        return load_pair(cfg.channel)
    except OSError as exc:
        raise ConfigError(f"cannot read channel file: {exc}") from None
    except DistributionError as exc:
        raise ConfigError(f"bad channel file: {exc}") from None


def _parameters(pair, cfg: RunConfig, R: float):
    if cfg.epsilon is not None and cfg.beta1 is not None and cfg.beta2 is not None:
        return cfg.epsilon, cfg.beta1, cfg.beta2, "given"
    if cfg.epsilon is None and cfg.beta1 is None and cfg.beta2 is None:
        eps, b1, b2 = sweep_parameters(pair, R)
        return eps, b1, b2, "defaults"
    eps, b1, b2 = sweep_parameters(pair, R, cfg.epsilon)
    return eps, cfg.beta1 if cfg.beta1 is not None else b1, cfg.beta2 if cfg.beta2 is not None else b2, "mixed"


def cmd_analyze(cfg: RunConfig) -> str:
    pair = _load(cfg)
    I = mutual_information(pair)
    R = cfg.rate
    if not R > I:
        raise InfeasibleParametersError(f"rate {R!r} does not exceed I(U;V) = {I:.6f}")
    if cfg.epsilon is None:
        eps, b1, b2 = default_parameters(pair, R)
        source = "defaults"
    else:
        eps, b1, b2, source = cfg.epsilon, cfg.beta1, cfg.beta2, "given"
    report = rate_certificate(pair, R, eps, b1, b2, (cfg.n_min, cfg.n_max))
    table_ns = cfg.table_ns or [n for n in DEFAULT_TABLE_NS if cfg.n_min <= n <= cfg.n_max]
    groups = PairTypeTable.from_pair(pair).grouped()[0].size
    rows = []
    for n in table_ns:
        union = union_bound_failure(n, R, I, eps, b1, b2, pair.k_v)
        row = {
            "n": n,
            "kl_ceiling_log2": log2_kl_ceiling(n, b1, b2, report.q_min),
            "chernoff_mass_log": chernoff_rhs_mass(n, R, b1).log_prob,
            "chernoff_ratio_log": chernoff_rhs_ratio(n, R, I, eps, b2).log_prob,
            "union_log": union.log_prob,
            "union_log_neg_log": union.log_neg_log,
            "union_vacuous": union.vacuous,
            "atypical_chernoff_log2": -report.beta * n,
            "atypical_exact": None,
        }
        if n <= cfg.atypical_max_n and composition_count(n, groups) <= MAX_COMPOSITIONS:
            row["atypical_exact"] = atypical_probability_exact(pair, eps, n)
        rows.append(row)
    if cfg.format == "csv":
        cols = list(rows[0]) if rows else ["n"]
        return dump_csv(cols, [[r[c] for c in cols] for r in rows])
    return dump_report(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "analyze",
            "channel": pair_to_dict(pair),
            "mutual_info": I,
            "rate": R,
            "parameters_source": source,
            "epsilon": eps,
            "alpha_star": report.alpha_star,
            "beta": report.beta,
            "beta1": b1,
            "beta2": b2,
            "q_min": report.q_min,
            "certificate": {
                "gamma1_bits": report.gamma1_bits,
                "gamma2_bits": report.gamma2_bits,
                "gamma2_nat": report.gamma2_nat,
                "n0": report.n0,
                "n_min": cfg.n_min,
                "n_max": report.n_max,
            },
            "bounds": rows,
        }
    ) + "\n"


def cmd_cover(cfg: RunConfig) -> str:
    pair = _load(cfg)
    n = cfg.n
    check_tensor_size(pair.k_v, n)
    if cfg.complete:
        codebook = complete_codebook(pair, n)
    else:
        codebook_size(n, cfg.rate)
        codebook = sample_codebook(pair, n, cfg.rate, cfg.seed)
    R = codebook.rate_R
    eps, b1, b2, source = _parameters(pair, cfg, R)
    dec, mem = analyze_codebook(pair, codebook, eps, b1, b2)
    if cfg.format == "csv":
        row = [n, R, codebook.seed, dec.kl_exact, dec.tv_exact, dec.mass_p2, mem.in_s,
               dec.term_h, dec.term_1, dec.term_2]
        return dump_csv(TRIAL_COLUMNS, [row])
    I = mutual_information(pair)
    ceiling = None
    try:
        _, beta = beta_exponent(pair, eps)
        check_parameters(I, R, eps, beta, b1, b2)
        ceiling = 2.0 ** log2_kl_ceiling(n, b1, b2, pair.q_v.min_positive)
    except InfeasibleParametersError as exc:
        log.info("kl ceiling not reported: %s", exc)
    out = {
        "schema_version": SCHEMA_VERSION,
        "command": "cover",
        "n": n,
        "rate": R,
        "seed": codebook.seed,
        "m_size": codebook.m_size,
        "complete": cfg.complete,
        "mutual_info": I,
        "parameters_source": source,
        "epsilon": eps,
        "beta1": b1,
        "beta2": b2,
        "kl_bits": dec.kl_exact,
        "tv": dec.tv_exact,
        "decomposition": {
            "mass_p2": dec.mass_p2,
            "term_h": dec.term_h,
            "term_1": dec.term_1,
            "term_2": dec.term_2,
            "bound": dec.bound,
            "holds": dec.holds,
        },
        "membership": {
            "mass_p2": mem.mass_p2,
            "mass_threshold": mem.mass_threshold,
            "mass_ok": mem.mass_ok,
            "max_ratio1": mem.max_ratio1,
            "ratio1_threshold": mem.ratio1_threshold,
            "ratio1_ok": mem.ratio1_ok,
            "max_ratio2": mem.max_ratio2,
            "ratio2_threshold": mem.ratio2_threshold,
            "ratio2_ok": mem.ratio2_ok,
            "in_s": mem.in_s,
        },
        "kl_ceiling": ceiling,
    }
    if cfg.dump_mass:
        out["mass"] = induced_distribution(pair, codebook).mass.tolist()
    return dump_report(out) + "\n"


def cmd_sweep(cfg: RunConfig):
    """Trial CSV, plus the per-cell summary CSV text."""
    pair = _load(cfg)
    for n in cfg.ns:
        check_tensor_size(pair.k_v, n)
        for R in cfg.rates:
            codebook_size(n, R)
    cells = decay_sweep(pair, cfg.rates, cfg.ns, cfg.trials, cfg.seed, cfg.epsilon, cfg.workers)
    rows = [
        [r.n, r.rate_R, r.seed, r.kl_bits, r.tv, r.mass_p2, r.in_s, r.term_h, r.term_1, r.term_2]
        for cell in cells
        for r in cell.records
    ]
    summary = [
        [c.n, c.rate_R, len(c.records), c.median_kl, c.q90_kl, c.mean_mass_p2, c.frac_in_s]
        for c in cells
    ]
    return dump_csv(TRIAL_COLUMNS, rows), dump_csv(SUMMARY_COLUMNS, summary)


def cmd_wiretap(cfg: RunConfig) -> str:
    pair = _load(cfg)
    I = mutual_information(pair)
    for n in cfg.ns:
        check_tensor_size(pair.k_v, n)
        codebook_size(n, cfg.rate_message)
        codebook_size(n, cfg.rate_random)
    if not cfg.rate_random > I:
        log.warning("rate_random %.6g does not exceed I(U;V) = %.6g", cfg.rate_random, I)
    reports = [
        wiretap_experiment(pair, n, cfg.rate_message, cfg.rate_random, cfg.seed) for n in cfg.ns
    ]
    if cfg.format == "csv":
        rows = [
            [r.n, r.rate_message, r.rate_random, r.seed, r.m_message, r.m_random,
             r.max_kl, r.max_pairwise_tv, r.pairs_checked]
            for r in reports
        ]
        return dump_csv(WIRETAP_COLUMNS, rows)
    return dump_report(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "wiretap",
            "mutual_info": I,
            "rate_message": cfg.rate_message,
            "rate_random": cfg.rate_random,
            "seed": cfg.seed,
            "runs": [
                {
                    "n": r.n,
                    "m_message": r.m_message,
                    "m_random": r.m_random,
                    "max_kl": r.max_kl,
                    "max_pairwise_tv": r.max_pairwise_tv,
                    "pairs_checked": r.pairs_checked,
                    "per_message_kl": list(r.per_message_kl),
                    "per_message_tv": list(r.per_message_tv),
                }
                for r in reports
            ],
        }
    ) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--channel", required=True, help="JSON channel/source file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "report"])
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="softcover", description="Soft-covering experiments on discrete channels"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="exponents, bounds and rate certificates")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=10000)
    p.add_argument("--table-ns", type=int, nargs="+")
    p.add_argument("--atypical-max-n", type=int, default=40)

    p = sub.add_parser("cover", parents=[common], help="analyze one codebook")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rate", type=float)
    p.add_argument("--complete", action="store_true", help="use every input sequence once")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--dump-mass", action="store_true")

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep over n and R")
    p.add_argument("--ns", type=int, nargs="+", required=True)
    p.add_argument("--rates", type=float, nargs="+", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--summary-out", help="per-cell summary CSV path")

    p = sub.add_parser("wiretap", parents=[common], help="per-message eavesdropper statistics")
    p.add_argument("--ns", type=int, nargs="+", required=True)
    p.add_argument("--rate-message", type=float, default=0.0)
    p.add_argument("--rate-random", type=float, required=True)
    return parser


def _write(path, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    cfg = RunConfig.from_args(args)
    try:
        cfg.validate()
        if cfg.command == "analyze":
            _write(cfg.out, cmd_analyze(cfg))
        elif cfg.command == "cover":
            _write(cfg.out, cmd_cover(cfg))
        elif cfg.command == "sweep":
            trials_csv, summary_csv = cmd_sweep(cfg)
            _write(cfg.out, trials_csv)
            if cfg.summary_out:
                _write(cfg.summary_out, summary_csv)
        else:
            _write(cfg.out, cmd_wiretap(cfg))
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except InfeasibleParametersError as exc:
        print(f"error: infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
