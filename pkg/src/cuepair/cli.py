"""Command-line front end: ``cuepair <subcommand> [flags]``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 when
an experiment finishes with a failing check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import shlex
import sys

from . import __version__
from ._env import OUTPUT_DIR_VAR, default_output_dir
from .ensembles import (EnsembleParams, McmcParams, make_stream, resolve_mcmc_params,
                        sample_cbe_mcmc, sample_cue, write_samples_csv)
from .limits import limit_law_cumulant, sample_limit_law
from .montecarlo import ConfigError, ExperimentConfig, KINDS, SampleFailure, empirical_cumulant, run_experiment
from .pairstats import expected_pair_statistic
from .spectral import FamilySpecError, karamata_ratio, make_family, mn_schedule, v_n
from .theory import (IdentityNotGuaranteed, a_matrix_norm, joint_cumulant_exact, lemma21_sums,
                     moment_identity_rhs, r_operator_norm, variance_exact, variance_tail_exact)

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
SWEEP_COLUMNS = ("n", "value", "stderr", "reference", "ratio")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _ks_groups(text):
    """'1,2;1,1' -> [[1, 2], [1, 1]]"""
    return [_int_list(g) for g in text.split(";") if g.strip()]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and not math.isfinite(x):
        return ""
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _echo_lines(argv, extra=None):
    lines = [f"command: cuepair {shlex.join(argv)}"]
    if extra:
        lines.append("config: " + json.dumps(extra, sort_keys=True))
    return lines


def _write_csv(path, header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    d = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(d, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc
    return path


def _print_table(columns, rows, out=None):
    out = out or sys.stdout
    cells = [[str(c) for c in columns]] + [[_fmt(v) if not isinstance(v, str) else v for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    for r in cells:
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)), file=out)


def _out_path(args, default_name):
    if getattr(args, "output", None):
        return args.output
    return os.path.join(args.output_dir or default_output_dir(), default_name)


# -- subcommands ---------------------------------------------------------------

def cmd_sample(args, argv):
    params = EnsembleParams(args.n, args.beta)
    sampler = args.sampler or ("dpp" if params.is_cue else "mcmc")
    if sampler == "dpp" and not params.is_cue:
        raise UsageError("the dpp sampler draws the CUE only; use --sampler mcmc for beta != 2")
    mcmc = McmcParams(args.proposal_width, args.burn_in, args.thinning)
    if sampler == "mcmc":
        mcmc = resolve_mcmc_params(params, mcmc)
    samples = []
    for i in range(args.count):
        stream = make_stream(args.seed, i, args.n)
        tag = f"seed={args.seed};N={args.n};index={i}"
        if sampler == "dpp":
            samples.append(sample_cue(args.n, stream, provenance=tag))
        else:
            samples.append(sample_cbe_mcmc(params, mcmc, stream, provenance=tag))
    cfg = {"n": args.n, "beta": args.beta, "sampler": sampler, "count": args.count, "seed": args.seed}
    if sampler == "mcmc":
        cfg["mcmc"] = mcmc.as_dict()
    path = _out_path(args, f"samples_N{args.n}_seed{args.seed}.csv")
    try:
        write_samples_csv(samples, path, "\n".join(_echo_lines(argv, cfg)))
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc
    print(f"wrote {args.count} configurations to {path}")
    return EXIT_OK


def cmd_exact(args, argv):
    f = make_family(args.fhat)
    rows = []
    for N in args.n:
        K = args.truncation if args.truncation is not None else N
        if args.what == "variance":
            g = f.truncate(args.truncation) if args.truncation is not None else f
            vb = variance_exact(g, N, args.k_tail)
            for name in ("term1", "term2", "term3", "term4", "total", "remainder_bound"):
                rows.append((N, name, getattr(vb, name)))
        elif args.what == "vn":
            rows.append((N, "v_n", v_n(f, N)))
        elif args.what == "expectation":
            rows.append((N, "expectation", expected_pair_statistic(f, N, K)))
        elif args.what == "tail-variance":
            M = args.M if args.M is not None else mn_schedule(f, N, args.delta)
            rows.append((N, "M", M))
            rows.append((N, "tail_variance", variance_tail_exact(f, N, M, args.k_tail)))
        elif args.what == "cumulant":
            for g in args.ks or []:
                val = joint_cumulant_exact(g, N)
                rows.append((N, f"kappa({','.join(map(str, g))})",
                             "undetermined" if val is None else val))
        elif args.what == "moment":
            for g in args.ks or []:
                try:
                    val = moment_identity_rhs(g, N)
                except IdentityNotGuaranteed:
                    val = "not guaranteed (2*sum(ks) > N)"
                rows.append((N, f"E prod|t_k|^2 ({','.join(map(str, g))})", val))
        elif args.what == "mn":
            rows.append((N, "M", mn_schedule(f, N, args.delta)))
    if args.what in ("cumulant", "moment") and not args.ks:
        raise UsageError(f"--what {args.what} needs --ks")
    for N, name, val in rows:
        shown = val if isinstance(val, str) else repr(val)
        print(f"N={N}  {name} = {shown}")
    return EXIT_OK


def _experiment_config(args):
    d = {}
    if args.config:
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(d, dict):
            raise UsageError("config file must hold a JSON object")
    flag_map = {
        "kind": args.kind, "n_values": args.n, "seed": args.seed, "samples": args.samples,
        "fhat": args.fhat, "beta": args.beta, "truncation": args.truncation,
        "sampler": args.sampler, "workers": args.workers, "ks": args.ks,
        "trace_orders": args.trace_orders, "limit_samples": args.limit_samples, "m": args.m,
        "M": args.M, "delta": args.delta, "tolerance_se": args.tolerance_se,
        "ks_threshold": args.ks_threshold, "k_tail": args.k_tail, "output_dir": args.output_dir,
    }
    for k, v in flag_map.items():
        if v is not None:
            d[k] = v
    if args.ks_gate:
        d["ks_gate"] = True
    if args.write_values:
        d["write_values"] = True
    mc = dict(d.get("mcmc", {}))
    for k, v in (("proposal_width", args.proposal_width), ("burn_in", args.burn_in),
                 ("thinning", args.thinning)):
        if v is not None:
            mc[k] = v
    if mc:
        d["mcmc"] = mc
    if "seed" not in d:
        raise UsageError("experiments need a seed (--seed or 'seed' in the config)")
    if "kind" not in d:
        raise UsageError("experiments need a kind (--kind or 'kind' in the config)")
    d.setdefault("output_dir", os.environ.get(OUTPUT_DIR_VAR, "."))
    return ExperimentConfig.from_dict(d)


def _experiment_rows(summary):
    for c in summary.checks:
        if "estimate" not in c:
            continue
        ref = c["reference"]
        ratio = c["estimate"] / ref if ref not in (None, 0) and isinstance(c["estimate"], float) else None
        est = c["estimate"]
        if isinstance(est, complex):
            est = abs(est)
        yield (c["name"], c["n"], est, c["stderr"], ref, ratio)


def cmd_experiment(args, argv):
    cfg = _experiment_config(args)
    summary = run_experiment(cfg)
    stem = f"{cfg.kind}_seed{cfg.seed}"
    csv_path = os.path.join(cfg.output_dir, f"sweep_{stem}.csv")
    _write_csv(csv_path, _echo_lines(argv, cfg.to_dict()), ("quantity",) + SWEEP_COLUMNS,
               list(_experiment_rows(summary)))
    for c in summary.checks:
        mark = "ok  " if c["passed"] else "FAIL"
        detail = ""
        if "estimate" in c:
            est = c["estimate"]
            est = f"{est:.6g}" if isinstance(est, float) else str(est)
            detail = f"estimate={est} reference={c['reference']} se={c['stderr']:.3g}"
        print(f"[{mark}] N={c['n']} {c['name']} {detail}".rstrip())
    print(f"{summary.status}: summary in {os.path.join(cfg.output_dir, f'summary_{stem}.json')}")
    print(f"runtime {summary.runtime_seconds:.1f} s", file=sys.stderr)
    return EXIT_OK if summary.passed else EXIT_FAIL


def cmd_lemma(args, argv):
    f = make_family(args.fhat)
    rows = []
    for N in args.n:
        if args.what in ("sum-i", "sum-ii", "sum-iii"):
            s = lemma21_sums(f, N, args.k_tail)
            val = {"sum-i": s.i, "sum-ii": s.ii, "sum-iii": s.iii}[args.what]
            ref = v_n(f, N)
            rows.append((N, val, s.remainder_iii if args.what == "sum-iii" else None, ref,
                         val / ref if ref else None))
        elif args.what == "tail-variance":
            M = args.M if args.M is not None else mn_schedule(f, N, args.delta)
            val = variance_tail_exact(f, N, M, args.k_tail)
            ref = v_n(f, N)
            rows.append((N, val, None, ref, val / ref if ref else None))
        elif args.what == "a-norm":
            val = a_matrix_norm(N)
            rows.append((N, val, None, 3.0, val / 3.0))
        elif args.what == "r-norm":
            op, hs = r_operator_norm(N, args.j)
            rows.append((N, op, None, hs, op / hs))
    cfg = {"fhat": args.fhat, "what": args.what, "n": args.n, "j": args.j, "k_tail": args.k_tail,
           "M": args.M, "delta": args.delta}
    path = _out_path(args, f"lemma_{args.what}.csv")
    _write_csv(path, _echo_lines(argv, cfg), SWEEP_COLUMNS, rows)
    _print_table(SWEEP_COLUMNS, rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_limit(args, argv):
    f = make_family(args.fhat)
    draws = sample_limit_law(f, args.truncation, make_stream(args.seed, 0, args.truncation),
                             size=args.draws, beta=args.beta)
    rows = []
    for m in range(1, args.max_order + 1):
        est, se = empirical_cumulant(draws, m)
        rows.append((m, est, se, limit_law_cumulant(f, args.truncation, m, args.beta)))
    _print_table(("m", "empirical", "stderr", "exact"), rows)
    if args.output:
        cfg = {"fhat": args.fhat, "K": args.truncation, "draws": args.draws, "seed": args.seed,
               "beta": args.beta}
        _write_csv(args.output, _echo_lines(argv, cfg), ("index", "value"), enumerate(draws.tolist()))
        print(f"wrote {args.output}")
    return EXIT_OK


def cmd_karamata(args, argv):
    f = make_family(args.fhat)
    rows, extra = [], []
    for N in args.n:
        vN = v_n(f, N)
        ref = v_n(f, int(math.floor(args.lam * N)))
        rows.append((N, vN, None, ref, karamata_ratio(f, N, args.lam) if vN > 0 else None))
        extra.append(mn_schedule(f, N, args.delta) if N >= 4 else None)
    cfg = {"fhat": args.fhat, "n": args.n, "lam": args.lam, "delta": args.delta}
    path = _out_path(args, "karamata.csv")
    _write_csv(path, _echo_lines(argv, cfg), SWEEP_COLUMNS, rows)
    _print_table(SWEEP_COLUMNS + ("M",), [r + (m,) for r, m in zip(rows, extra)])
    print(f"wrote {path}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cuepair", description="Pair statistics of circular random-matrix ensembles.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}",
                   help="print the version and exit")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def out_flags(sp, output_help):
        sp.add_argument("--output", help=output_help)
        sp.add_argument("--output-dir", help=f"directory for output files (default ${OUTPUT_DIR_VAR} or .)")

    def mcmc_flags(sp):
        sp.add_argument("--proposal-width", type=float, help="Metropolis proposal width in radians (default 2*pi/N)")
        sp.add_argument("--burn-in", type=int, help="Metropolis burn-in sweeps (default 100*N)")
        sp.add_argument("--thinning", type=int, help="sweeps between retained states (default from a pilot chain)")

    s = sub.add_parser("sample", help="dump eigenangle configurations as CSV")
    s.add_argument("--n", type=int, required=True, help="matrix size N")
    s.add_argument("--beta", type=float, default=2.0, help="ensemble parameter beta (default 2, the CUE)")
    s.add_argument("--sampler", choices=("dpp", "mcmc"), help="sampler (default dpp for beta=2, else mcmc)")
    s.add_argument("--count", type=int, default=1, help="number of configurations")
    s.add_argument("--seed", type=int, required=True, help="root seed")
    mcmc_flags(s)
    out_flags(s, "CSV path (default <output-dir>/samples_N<n>_seed<seed>.csv)")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("exact", help="print exact CUE quantities")
    e.add_argument("--fhat", required=True, help="test function family, e.g. power:1.5 or coslist:1")
    e.add_argument("--n", type=_int_list, required=True, help="matrix size(s) N, comma separated")
    e.add_argument("--what", required=True,
                   choices=("variance", "vn", "expectation", "tail-variance", "cumulant", "moment", "mn"),
                   help="quantity to compute")
    e.add_argument("--truncation", type=int, help="truncation K of f (default: none for variance, N otherwise)")
    e.add_argument("--k-tail", type=int, help="cut for infinite tail sums (default 32*N)")
    e.add_argument("--ks", type=_ks_groups, help="index sets for cumulant/moment, e.g. '1,2,-3;3,-3'")
    e.add_argument("--M", type=int, help="cutoff parameter M for tail-variance (default from the M_N schedule)")
    e.add_argument("--delta", type=float, default=0.05, help="tolerance delta of the M_N schedule")
    e.set_defaults(func=cmd_exact)

    x = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    x.add_argument("--config", help="JSON config file; flags override its entries")
    x.add_argument("--kind", choices=KINDS, help="experiment kind")
    x.add_argument("--n", type=_int_list, help="matrix size(s) N, comma separated")
    x.add_argument("--seed", type=int, help="root seed (required unless in the config)")
    x.add_argument("--samples", type=int, help="samples per N")
    x.add_argument("--fhat", help="test function family")
    x.add_argument("--beta", type=float, help="ensemble parameter beta")
    x.add_argument("--truncation", type=int, help="truncation K of f (default N)")
    x.add_argument("--sampler", choices=("dpp", "mcmc"), help="eigenvalue sampler")
    x.add_argument("--workers", type=int, help="worker threads for sample generation")
    x.add_argument("--ks", type=_ks_groups, help="index sets, e.g. '1,2' or '1,2,-3;1,1'")
    x.add_argument("--trace-orders", type=_int_list, help="k values for the E|t_k|^2 = min(k,N) checks")
    x.add_argument("--limit-samples", type=int, help="draws from the exponential-sum law")
    x.add_argument("--m", type=int, help="moment order for truncated-moments")
    x.add_argument("--M", type=int, help="override the M_N schedule")
    x.add_argument("--delta", type=float, help="tolerance delta of the M_N schedule")
    x.add_argument("--tolerance-se", type=float, help="acceptance band in standard errors (default 4)")
    x.add_argument("--ks-threshold", type=float, help="KS distance threshold (default 0.05)")
    x.add_argument("--ks-gate", action="store_true", help="let KS thresholds decide PASS/FAIL")
    x.add_argument("--k-tail", type=int, help="cut for infinite tail sums (lemma-sums)")
    x.add_argument("--output-dir", help=f"directory for summary and CSV (default ${OUTPUT_DIR_VAR} or .)")
    x.add_argument("--write-values", action="store_true", help="also write per-sample values as CSV")
    mcmc_flags(x)
    x.set_defaults(func=cmd_experiment)

    lm = sub.add_parser("lemma", help="lemma-level sweeps over N, written as CSV")
    lm.add_argument("--fhat", default="power:1.5", help="test function family (default power:1.5)")
    lm.add_argument("--n", type=_int_list, default=[2**6, 2**8, 2**10, 2**12, 2**14],
                    help="matrix sizes N, comma separated")
    lm.add_argument("--what", required=True,
                    choices=("sum-i", "sum-ii", "sum-iii", "tail-variance", "a-norm", "r-norm"),
                    help="quantity to sweep")
    lm.add_argument("--j", type=int, default=1, help="block index j for r-norm")
    lm.add_argument("--k-tail", type=int, help="cut for infinite tail sums (default 32*N)")
    lm.add_argument("--M", type=int, help="cutoff parameter M for tail-variance")
    lm.add_argument("--delta", type=float, default=0.05, help="tolerance delta of the M_N schedule")
    out_flags(lm, "CSV path (default <output-dir>/lemma_<what>.csv)")
    lm.set_defaults(func=cmd_lemma)

    li = sub.add_parser("limit", help="sample the exponential-sum law and tabulate cumulants")
    li.add_argument("--fhat", required=True, help="test function family")
    li.add_argument("--truncation", type=int, required=True, help="number of terms K")
    li.add_argument("--draws", type=int, default=100_000, help="number of draws")
    li.add_argument("--seed", type=int, required=True, help="root seed")
    li.add_argument("--beta", type=float, default=2.0, help="beta in the 4/beta prefactor")
    li.add_argument("--max-order", type=int, default=4, choices=(1, 2, 3, 4), help="highest cumulant order")
    li.add_argument("--output", help="optional CSV path for the draws")
    li.set_defaults(func=cmd_limit)

    ka = sub.add_parser("karamata", help="V_N and V_{floor(lam N)}/V_N sweeps")
    ka.add_argument("--fhat", required=True, help="test function family")
    ka.add_argument("--n", type=_int_list, required=True, help="matrix sizes N, comma separated")
    ka.add_argument("--lam", type=float, default=2.0, help="scale factor lambda > 0")
    ka.add_argument("--delta", type=float, default=0.05, help="tolerance delta of the M_N schedule")
    out_flags(ka, "CSV path (default <output-dir>/karamata.csv)")
    ka.set_defaults(func=cmd_karamata)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except (UsageError, ValueError, ZeroDivisionError, OSError) as exc:
        print(f"cuepair: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SampleFailure as exc:
        print(f"cuepair: sampler failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
