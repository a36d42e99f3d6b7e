"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 job did not complete
within the trace, 3 no feasible instance type for ``select``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from decimal import Decimal
from pathlib import Path

from spotsim.config import BidConfig, JobSpec, SchemeId
from spotsim.engine import simulate
from spotsim.errors import DoesNotTerminate, NoFeasibleOfferError, SpotSimError
from spotsim.framework import ServiceOffer, SlaPolicy, load_application, select_bid_and_type
from spotsim.money import format_usd, to_micros
from spotsim.report import (
    ReportRow,
    SweepSpec,
    format_report,
    run_sweep,
    summarize,
)
from spotsim.trace import (
    RandomWalk,
    ReplayJitter,
    SquareWave,
    gen_trace,
    load_trace,
    serialize_trace,
)

EXIT_OK, EXIT_ERROR, EXIT_INCOMPLETE, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("spotsim")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _usd(text):
    try:
        value = Decimal(text)
    except Exception:
        raise argparse.ArgumentTypeError(f"not a USD amount: {text!r}") from None
    if not value.is_finite():
        raise argparse.ArgumentTypeError(f"not a USD amount: {text!r}")
    return value


def _add_job_flags(p):
    p.add_argument("--job-minutes", type=int, required=True, help="total work in minutes")
    p.add_argument("--checkpoint-secs", type=int, default=60)
    p.add_argument("--restart-secs", type=int, default=300)
    p.add_argument("--query-secs", type=int, default=5)
    p.add_argument("--adapt-delta", type=int, default=600)
    p.add_argument("--poll", type=int, default=60, help="ACC relaunch polling period")


def _job(args) -> JobSpec:
    return JobSpec(
        w=args.job_minutes * 60,
        t_c=args.checkpoint_secs,
        r=args.restart_secs,
        t_w=args.query_secs,
        adapt_delta=args.adapt_delta,
        relaunch_poll=args.poll,
    )


def _write(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    zone, itype, bid, sbid = args.zone, args.type, args.bid, args.sbid
    if args.app:
        app = load_application(args.app)
        spot = app.spot_resource
        itype = itype or spot.size
        zone = zone or spot.zone
        bid = bid if bid is not None else Decimal(format_usd(app.a_bid))
        if sbid is None and app.s_bid is not None:
            sbid = Decimal(format_usd(app.s_bid))
    if bid is None:
        raise SpotSimError("--bid is required (or give --app)")
    trace = load_trace(args.trace, zone=zone, instance_type=itype)
    cfg = BidConfig.make(bid, args.scheme, sbid)
    result = simulate(trace, _job(args), cfg)
    row = ReportRow.from_result(Path(args.trace).stem, cfg, result)
    _write(format_report([row]), args.out)
    return EXIT_OK if result.completed else EXIT_INCOMPLETE


def cmd_sweep(args) -> int:
    traces = tuple(
        (Path(p).stem, load_trace(p, zone=args.zone, instance_type=args.type)) for p in args.trace
    )
    schemes = [s for s in args.schemes.split(",") if s.strip()]
    spec = SweepSpec.make(args.bid_min, args.bid_max, args.bid_step, schemes, traces)
    sbid = None if args.sbid is None else to_micros(args.sbid)
    rows = run_sweep(spec, _job(args), parallel=args.parallel, s_bid=sbid)
    _write(format_report(rows, summarize(rows)), args.out)
    return EXIT_OK


def _load_offers(path):
    base = Path(path).parent
    offers = []
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, rec in enumerate(csv.DictReader(f), start=2):
            try:
                caps = {k: float(rec[k]) for k in ("vcpu", "ram_gb", "io_class") if rec.get(k)}
                trace_path = base / rec["trace_file"]
                offers.append(
                    ServiceOffer(
                        provider=rec.get("provider") or "ec2",
                        instance_type=rec["instance_type"],
                        zone=rec["zone"],
                        on_demand_rate=to_micros(rec["on_demand_rate"]),
                        capabilities=caps,
                        history=load_trace(trace_path, zone=rec["zone"], instance_type=rec["instance_type"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise SpotSimError(f"{path}:{lineno}: bad offer row ({exc})") from None
    return offers


def cmd_select(args) -> int:
    offers = _load_offers(args.offers)
    sla = SlaPolicy.parse(args.sla)
    try:
        sel = select_bid_and_type(
            offers, sla, args.job_minutes * 60, args.restart_secs, args.bucket_secs
        )
    except NoFeasibleOfferError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DoesNotTerminate as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    lines = [
        f"a_bid,{format_usd(sel.a_bid)}",
        f"instance_type,{sel.instance_type}",
        "",
        "instance_type,eet_s",
    ]
    for itype in sorted(sel.eet_table):
        v = sel.eet_table[itype]
        lines.append(f"{itype},{'inf' if math.isinf(v) else f'{v:.3f}'}")
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    duration = args.duration_secs if args.duration_secs is not None else args.days * 86400
    if args.model == "square":
        model = SquareWave(args.low, args.high, args.low_secs, args.high_secs, args.phase, duration, args.start)
    elif args.model == "walk":
        model = RandomWalk(args.start_price, args.step, args.period, args.floor, duration, args.start)
    else:
        if not args.base:
            raise SpotSimError("--base is required for the jitter model")
        model = ReplayJitter(load_trace(args.base, zone=args.zone, instance_type=args.type), args.jitter)
    trace = gen_trace(model, args.seed, zone=args.zone or "sim-zone", instance_type=args.type or "sim.type")
    _write(serialize_trace(trace), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spotsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one job under one scheme")
    p.add_argument("--trace", required=True)
    p.add_argument("--zone")
    p.add_argument("--type")
    p.add_argument("--scheme", required=True, choices=[s.value for s in SchemeId])
    p.add_argument("--bid", type=_usd)
    p.add_argument("--sbid", type=_usd)
    p.add_argument("--app", help="application definition file (YAML/JSON)")
    _add_job_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sweep schemes over a bid range")
    p.add_argument("--trace", required=True, action="append")
    p.add_argument("--zone")
    p.add_argument("--type")
    p.add_argument("--schemes", default=",".join(s.value for s in SchemeId))
    p.add_argument("--bid-min", type=_usd, required=True)
    p.add_argument("--bid-max", type=_usd, required=True)
    p.add_argument("--bid-step", type=_usd, default=Decimal("0.001"))
    p.add_argument("--sbid", type=_usd)
    p.add_argument("--parallel", type=int)
    _add_job_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("select", help="choose a bid and instance type")
    p.add_argument("--offers", required=True)
    p.add_argument("--sla", required=True, help='e.g. "vcpu=4,ram_gb=15"')
    p.add_argument("--job-minutes", type=int, required=True)
    p.add_argument("--restart-secs", type=int, default=300)
    p.add_argument("--bucket-secs", type=int, default=60)
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("gen-trace", help="write a synthetic price trace")
    p.add_argument("--model", choices=["square", "walk", "jitter"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zone")
    p.add_argument("--type")
    p.add_argument("--start", type=int, default=0, help="first timestamp, epoch seconds")
    p.add_argument("--duration-secs", type=int)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--low", type=_usd, default=Decimal("0.30"))
    p.add_argument("--high", type=_usd, default=Decimal("0.50"))
    p.add_argument("--low-secs", type=int, default=3000)
    p.add_argument("--high-secs", type=int, default=1200)
    p.add_argument("--phase", type=int, default=0)
    p.add_argument("--start-price", type=_usd, default=Decimal("0.40"))
    p.add_argument("--step", type=_usd, default=Decimal("0.005"))
    p.add_argument("--period", type=int, default=300)
    p.add_argument("--floor", type=_usd, default=Decimal("0"))
    p.add_argument("--base")
    p.add_argument("--jitter", type=_usd, default=Decimal("0.005"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (SpotSimError, OSError, ValueError) as exc:
        print(f"spotsim: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
