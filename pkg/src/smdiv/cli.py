"""Command-line interface: SER sweeps, gain analysis, phase search, checks."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, simkit
from .codebooks import Scheme, make_config, rate_bpcu, stbc_sm_rate
from .constellation import Normalization


def _norm_from_name(name: str) -> Normalization:
    for n in Normalization:
        if n.value == name:
            return n
    raise ValueError(f"unknown normalization {name!r}")


def _add_sim_flags(p: argparse.ArgumentParser):
    # Every config-file key is mirrored here; command-line values win.
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--preset", choices=sorted(simkit.PRESETS))
    p.add_argument("--schemes", help="comma list like sm:bpsk,low-dosm:qam4")
    p.add_argument("--nt", type=int)
    p.add_argument("--nr", type=int)
    p.add_argument("--decoder", choices=["mrc", "exhaustive", "qr"])
    p.add_argument("--snr-db", dest="snr_db", help="comma list of SNR points in dB")
    p.add_argument("--min-errors", dest="min_errors", type=int)
    p.add_argument("--max-trials", dest="max_trials", type=int)
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--chunk-size", dest="chunk_size", type=int)


_SIM_KEYS = ("preset", "schemes", "nt", "nr", "decoder", "snr_db",
             "min_errors", "max_trials", "master_seed", "workers", "chunk_size")


def _cmd_simulate(args) -> int:
    opts: dict[str, str] = {}
    if args.config:
        opts.update(simkit.read_config_file(args.config))
    for key in _SIM_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = str(value)
    sim = simkit.sim_config_from_options(opts)
    log = None if args.quiet else print
    result = simkit.run_ser_sweep(sim, log=log)
    simkit.write_csv(result, args.out)
    print(f"wrote {args.out}")
    if not args.no_plot:
        from . import plotting

        fig_path = Path(args.out).with_suffix(".png")
        plotting.plot_ser_curves(result, fig_path)
        print(f"wrote {fig_path}")
    return 0


def _cmd_coding_gain(args) -> int:
    scheme = Scheme(args.scheme)
    m_list = [int(v) for v in args.m.split(",")]
    norms = list(Normalization) if args.normalization == "both" \
        else [_norm_from_name(args.normalization)]
    rows = []
    reports = []
    for m in m_list:
        for norm in norms:
            mod = _mod_token(scheme, m)
            cfg = make_config(scheme, args.nt, mod, norm,
                              base_rotation=not args.no_rotation)
            report = analysis.coding_gain(cfg, normalization=norm.value)
            reports.append(report)
            rows.extend(analysis.gain_report_rows(report))
            print(f"{scheme.value} M={m} {norm.value}: gain={report.gain:.8g} "
                  f"({report.case}, {report.method})")
            for case, gain in sorted(report.per_case.items()):
                print(f"    {case}: {gain:.8g}")
            if scheme is Scheme.LOW_DOSM and m in analysis.REFERENCE_LOW_DOSM_GAINS:
                ref = analysis.REFERENCE_LOW_DOSM_GAINS[m]
                tag = "matches" if abs(report.gain - ref) < 5e-5 else "differs from"
                print(f"    {tag} reference value {ref}")
    if args.out:
        analysis.write_gain_csv(rows, args.out)
        print(f"wrote {args.out}")
        from . import plotting

        fig_path = Path(args.out).with_suffix(".png")
        plotting.plot_gain_histogram(reports, fig_path,
                                     title=f"{scheme.value} determinant spectrum")
        print(f"wrote {fig_path}")
    return 0


def _mod_token(scheme: Scheme, m: int) -> str:
    if m == 2:
        return "bpsk"
    if m & (m - 1) == 0 and (m.bit_length() - 1) % 2 == 0:
        return f"qam{m}"
    return f"rect{m}"


def _cmd_optimize_phases(args) -> int:
    cfg = make_config(Scheme.HIGH_DOSM, args.nt, args.mod,
                      _norm_from_name(args.normalization),
                      cbs_phases=(1.0 + 0j,) * args.nt)
    result = analysis.optimize_phases(cfg, grid_n=args.grid_n)
    print(f"grid indices (of {args.grid_n}): {result.grid_indices}")
    for k, phase in enumerate(result.phases, 1):
        print(f"  set {k}: {phase.real:+.4f} {phase.imag:+.4f}j")
    print(f"achieved gain: {result.achieved_gain:.8g}")
    if result.reference_gain is not None:
        print(f"reference-assignment gain: {result.reference_gain:.8g}")
    return 0


def _cmd_verify_decoders(args) -> int:
    cfg = make_config(Scheme(args.scheme), args.nt, args.mod)
    report = simkit.verify_decoders(cfg, n_r=args.nr, snr_db=args.snr_db,
                                    trials=args.trials, seed=args.seed)
    print(f"trials: {report.trials}")
    print(f"ties excluded: {report.ties_excluded}")
    print(f"disagreements: {len(report.disagreements)}")
    if report.disagreements:
        print(f"  at trials {report.disagreements[:20]}")
        return 1
    print("all decoders agree")
    return 0


def _cmd_rate(args) -> int:
    if args.scheme == "stbc-sm":
        r = stbc_sm_rate(args.nt, args.m)
    else:
        scheme = Scheme(args.scheme)
        mod = _mod_token(scheme, args.m)
        r = rate_bpcu(make_config(scheme, args.nt, mod))
    print(f"{args.scheme} nt={args.nt} m={args.m}: {r:g} bpcu")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smdiv",
        description="Transmit-diversity spatial-modulation simulator and analyzer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an SER sweep, write CSV and figure")
    _add_sim_flags(p)
    p.add_argument("--out", type=Path, required=True, help="output CSV path")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("coding-gain", help="pairwise determinant minima per case")
    p.add_argument("--scheme", required=True,
                   choices=[Scheme.LOW_DOSM.value, Scheme.HIGH_DOSM.value])
    p.add_argument("--m", required=True, help="constellation size, or comma list")
    p.add_argument("--nt", type=int, default=4)
    p.add_argument("--normalization", default="both",
                   choices=["both"] + [n.value for n in Normalization])
    p.add_argument("--no-rotation", action="store_true",
                   help="skip the arctan(2)/2 rotation (degenerate baseline)")
    p.add_argument("--out", type=Path, help="CSV path; figure written alongside")
    p.set_defaults(func=_cmd_coding_gain)

    p = sub.add_parser("optimize-phases", help="unit-circle grid search for set phases")
    p.add_argument("--nt", type=int, default=4)
    p.add_argument("--mod", required=True, choices=["bpsk", "qam4"])
    p.add_argument("--grid-n", dest="grid_n", type=int, default=16)
    p.add_argument("--normalization", default=Normalization.UNIT_AVERAGE_ENERGY.value,
                   choices=[n.value for n in Normalization])
    p.set_defaults(func=_cmd_optimize_phases)

    p = sub.add_parser("verify-decoders", help="three-way decoder agreement check")
    p.add_argument("--scheme", default=Scheme.LOW_DOSM.value,
                   choices=[Scheme.LOW_DOSM.value, Scheme.HIGH_DOSM.value])
    p.add_argument("--mod", default="qam4")
    p.add_argument("--nt", type=int, default=4)
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--snr-db", dest="snr_db", type=float, default=10.0)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_verify_decoders)

    p = sub.add_parser("rate", help="bits per channel use of a scheme")
    p.add_argument("--scheme", required=True,
                   choices=[s.value for s in Scheme] + ["stbc-sm"])
    p.add_argument("--nt", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=_cmd_rate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
