"""``hesearch`` command: run the schemes on a fixture and print a cost report.

Exit status is 0 on success, 2 on a configuration error, 1 on any other
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .encoding import DEFAULT_SCALE
from .errors import ConfigurationError
from .harness import ExperimentConfig, emit_report, run_experiment

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hesearch",
        description="Compare client cost of the Paillier image-search schemes and the symmetric revision.",
    )
    p.add_argument("--scheme", choices=["1", "2", "revised", "all"], default="all")
    p.add_argument("--num-images", type=int, default=100, metavar="N")
    p.add_argument("--dim", type=int, default=128, metavar="T", help="feature dimension")
    p.add_argument("--key-bits", type=int, default=2048)
    p.add_argument("--scale", type=int, default=DEFAULT_SCALE, help="fixed-point multiplier")
    p.add_argument("--threshold", type=float, default=None, help="match radius (default: fixture jitter radius)")
    p.add_argument("--pad-count", type=int, default=None, help="decoy indices for scheme 2 (default ceil(N/10))")
    p.add_argument("--image-bytes", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1, help="timed query repetitions; the median is reported")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.add_argument("--features", metavar="CSV", help="feature rows to use instead of a generated fixture")
    p.add_argument("--test-key", action="store_true", help="use the pinned key pair for this bit length")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg = ExperimentConfig(
        scheme=args.scheme,
        num_images=args.num_images,
        dim=args.dim,
        key_bits=args.key_bits,
        scale=args.scale,
        threshold=args.threshold,
        pad_count=args.pad_count,
        image_bytes=args.image_bytes,
        seed=args.seed,
        repeats=args.repeats,
        features_path=args.features,
        test_key=args.test_key,
    )
    try:
        rows = run_experiment(cfg)
    except ConfigurationError as exc:
        print(f"hesearch: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - mapped to exit status 1
        print(f"hesearch: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(emit_report(rows, args.format))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
