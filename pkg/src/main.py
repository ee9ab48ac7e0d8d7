import argparse
import sys

from src.config import settings
from src.exceptions import DetailedError
from src.harness.cli import register
from src.logger import get_logger

logger = get_logger()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Time-domain electromagnetic scattering with generalized impedance boundary conditions",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    register(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except DetailedError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return exc.EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
