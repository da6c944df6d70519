"""Command-line entry point."""

import argparse
import logging
import sys

from .config import PRESETS, SCHEDULERS, ConfigError, ScenarioConfig, load_config, preset
from .beamforming import BEAMFORMERS
from .engine import DropSimulator, aggregate, run_drop
from .output import format_summary, write_channel_trace, write_outputs


def build_parser():
    p = argparse.ArgumentParser(
        prog="mmwave-hbf",
        description="Single-cell mmWave hybrid-beamforming MU-MIMO system simulation.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="JSON scenario file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="named scenario")
    p.add_argument("--layers", type=int, metavar="N", help="SDMA layers at the BS")
    p.add_argument("--bf", choices=sorted(BEAMFORMERS), help="beamforming scheme")
    p.add_argument("--scheduler", choices=SCHEDULERS, help="MAC scheduler")
    p.add_argument("--drops", type=int, metavar="N", help="number of random deployments")
    p.add_argument("--seed", type=int, metavar="N", help="base seed")
    p.add_argument("--duration-ms", type=int, metavar="N", help="simulated time per drop")
    p.add_argument("--out-dir", metavar="PATH", default="results", help="output directory")
    p.add_argument("--channel-trace", action="store_true",
                   help="also write channel_trace.csv with the initial channel of every drop")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = ScenarioConfig()
    overrides = {
        "n_layers": args.layers,
        "bf_scheme": args.bf,
        "scheduler": args.scheduler,
        "n_drops": args.drops,
        "base_seed": args.seed,
        "duration_ms": args.duration_ms,
    }
    return cfg.replace(**{k: v for k, v in overrides.items() if v is not None})


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"mmwave-hbf: invalid configuration: {exc}", file=sys.stderr)
        return 2

    results = [run_drop(cfg, i) for i in range(cfg.n_drops)]
    summary = aggregate(results)
    paths = write_outputs(results, summary, args.out_dir, config=cfg)
    if args.channel_trace:
        trace = paths["summary"].with_name("channel_trace.csv")
        for i in range(cfg.n_drops):
            write_channel_trace(DropSimulator(cfg, i), trace, append=i > 0)
    print(format_summary(summary))
    print(f"results written to {paths['summary'].parent}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
