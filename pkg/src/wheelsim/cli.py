"""Command-line entry points.

    wheelsim run --scenario F --out DIR [--realtime]
    wheelsim trials --modality M --command C --n N --noise P [--out DIR]
    wheelsim trials --table [--out DIR]
    wheelsim analyze --pairs F --kind hr|spo2|temp --out DIR
    wheelsim serve --port P --key K [...]
    wheelsim clear-safehalt [--url U]
    wheelsim replay --trace F [--out F] [--realtime]
    wheelsim corpus --out DIR [--seed N]
    wheelsim overheads
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path


def _cmd_run(args) -> int:
    from .harness import load_scenario, bundled_scenario, run_scenario

    path = Path(args.scenario)
    scenario = load_scenario(path) if path.exists() else bundled_scenario(args.scenario)
    result = run_scenario(scenario, args.out, realtime=args.realtime)
    print(f"scenario {scenario.name}: {result.ticks} ticks -> {result.out_dir}")
    print(json.dumps(result.metrics["monitor"], indent=2, sort_keys=True))
    return 0


def _cmd_trials(args) -> int:
    from .analytics import accuracy_table
    from .harness import run_trials, run_trial_table, trial_report

    if args.table:
        log = run_trial_table(n=args.n, seed=args.seed)
    else:
        if not args.modality or not args.command:
            print("need --modality and --command (or --table)", file=sys.stderr)
            return 2
        log = run_trials(args.modality, args.command, n=args.n, recognition_noise=args.noise, seed=args.seed)
    table = accuracy_table(log)
    for (modality, command), pct in sorted(table.cell_pct.items()):
        cell = log.cells[(modality, command)]
        print(f"{modality:>8} {command:>8}: {cell.successes}/{cell.trials} = {pct:.1f}%")
    for modality, pct in sorted(table.modality_mean_pct.items()):
        print(f"{modality} mean: {pct:.1f}%")
    if args.out:
        report = trial_report(log, args.out)
        print(f"report written to {args.out}")
        if not report["headline_consistency"]["consistent"]:
            print("note:", report["headline_consistency"]["note"])
    return 0


def _cmd_analyze(args) -> int:
    from .analytics import PairedReadings, bland_altman, emit_report

    units = {"hr": "bpm", "spo2": "%", "temp": "C"}[args.kind]
    pairs = PairedReadings.from_csv(args.pairs, kind=args.kind, units=units)
    report = bland_altman(pairs)
    emit_report(report, args.out, formats=("csv", "json", "plotdata"), pairs=pairs)
    print(
        f"{args.kind}: n={report.n} bias={report.bias:.4f} sd={report.sd:.4f} "
        f"loa=[{report.loa_low:.4f}, {report.loa_high:.4f}] rmse={report.rmse:.4f} {units}"
    )
    return 0


def _cmd_serve(args) -> int:
    from .detectors import DetectorConfig
    from .harness import SimConfig
    from .protocol import load_key
    from .server import ServerConfig, serve

    key = load_key(args.key) if args.key else bytes.fromhex(
        os.environ.get("WHEELSIM_KEY", "000102030405060708090a0b0c0d0e0f")
    )
    detector = DetectorConfig()
    if args.detector_config:
        with open(args.detector_config, encoding="utf-8") as fh:
            detector = DetectorConfig.from_dict(json.load(fh))
    cfg = ServerConfig(
        key=key,
        data_dir=Path(args.data) if args.data else None,
        outbox_dir=Path(args.outbox) if args.outbox else None,
        webhook_url=args.webhook or os.environ.get("WHEELSIM_WEBHOOK"),
        detector=detector,
        live=not args.no_live,
        sim=SimConfig(key_hex=key.hex(), detector=detector),
    )
    static = Path(args.static) if args.static else None
    print(f"monitor service on http://{args.host}:{args.port} (live sim: {cfg.live})")
    serve(cfg, host=args.host, port=args.port, static_dir=static)
    return 0


def _cmd_clear_safehalt(args) -> int:
    import httpx

    response = httpx.post(f"{args.url.rstrip('/')}/safehalt/clear", timeout=5.0)
    if response.status_code == 200:
        print("safe halt cleared")
        return 0
    print(f"refused ({response.status_code}): {response.json().get('detail')}", file=sys.stderr)
    return 1


def _cmd_replay(args) -> int:
    from .arbitration import read_input_trace, run_loop, snapshots_per_tick, tick_to_json

    source = snapshots_per_tick(read_input_trace(args.trace))
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for tick in run_loop(source, realtime=args.realtime):
            out.write(tick_to_json(tick) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_corpus(args) -> int:
    from .corpus import generate_corpus

    entries = generate_corpus(args.out, seed=args.seed)
    labels = {}
    for e in entries:
        labels[e.label] = labels.get(e.label, 0) + 1
    print(f"{len(entries)} traces -> {args.out} ({labels})")
    return 0


def _cmd_overheads(args) -> int:
    from .arbitration import ControlInputs, ModeId, run_loop
    from .harness import SimConfig
    from .protocol import FeedRecord, http_transport, measure_overheads

    record = FeedRecord(t=1000, hr=72.0, spo2=97.5, temp=36.9, fall=0, convulsion=0,
                        mode=ModeId.STOP, pose=(0.0, 0.0, 0.0))
    key = bytes.fromhex(SimConfig().key_hex)

    periods = []
    if args.loop_seconds > 0:
        n = int(args.loop_seconds * 50)
        source = (ControlInputs(timestamp=i * 20) for i in range(n))
        last = None
        for _ in run_loop(source, realtime=True):
            now = time.perf_counter()
            if last is not None:
                periods.append((now - last) * 1000.0)
            last = now
    rtt_probe = http_transport(args.url) if args.url else None
    out = measure_overheads(key, record, rtt_probe=rtt_probe,
                            loop_periods_ms=periods if periods else None)
    print(json.dumps(out, indent=2, sort_keys=True))
    print(
        "note: encrypt_us is per-frame cipher cost (microseconds); it sits orders of"
        " magnitude below any network round-trip and must not be read as one."
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wheelsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario file or bundled scenario name")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--realtime", action="store_true")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("trials", help="command-accuracy trials")
    p.add_argument("--modality", choices=["joystick", "voice", "gesture", "eog"])
    p.add_argument("--command", choices=["Right", "Left", "Forward", "Backward", "Stop"])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", action="store_true", help="all cells with the bundled noise fixture")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_trials)

    p = sub.add_parser("analyze", help="Bland-Altman agreement analysis on paired readings")
    p.add_argument("--pairs", required=True, help="CSV with module,reference columns")
    p.add_argument("--kind", choices=["hr", "spo2", "temp"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("serve", help="run the monitor service (with live drive sim)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("WHEELSIM_PORT", "8077")))
    p.add_argument("--key", help="key file (32 hex chars)")
    p.add_argument("--data", help="persistence directory")
    p.add_argument("--outbox", help="email outbox directory")
    p.add_argument("--webhook", help="alert webhook URL")
    p.add_argument("--detector-config", help="detector threshold overrides (JSON)")
    p.add_argument("--static", help="serve a built dashboard from this directory")
    p.add_argument("--no-live", action="store_true")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("clear-safehalt", help="operator reset of the safe-halt latch")
    p.add_argument("--url", default=os.environ.get("WHEELSIM_URL", "http://127.0.0.1:8077"))
    p.set_defaults(fn=_cmd_clear_safehalt)

    p = sub.add_parser("replay", help="replay a ControlInputs JSONL trace through the ladder")
    p.add_argument("--trace", required=True)
    p.add_argument("--out")
    p.add_argument("--realtime", action="store_true")
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("corpus", help="generate the labeled detector corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(fn=_cmd_corpus)

    p = sub.add_parser("overheads", help="encryption / loop period instrumentation")
    p.add_argument("--loop-seconds", type=float, default=2.0)
    p.add_argument("--url", help="measure ingest round-trip against this service")
    p.set_defaults(fn=_cmd_overheads)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
