import argparse
from typing import Callable

from src.harness import service
from src.harness.schemas import ScenarioConfig
from src.logger import get_logger

logger = get_logger()

Runner = Callable[[ScenarioConfig], object]

COMMANDS: dict[str, tuple[str, Runner]] = {
    "time-convergence": ("Temporal convergence against a fine-step reference", service.run_time_convergence),
    "space-convergence": ("Spatial convergence against a refined-mesh reference", service.run_space_convergence),
    "condition-sweep": ("Condition numbers and GMRES iterations over contour frequencies", service.run_condition_sweep),
    "torus-demo": ("Total electric field on a planar grid around a torus", service.run_torus_demo),
    "single-run": ("One solve with fields at the configured points", service.run_single_study),
}


def _shortcuts(args: argparse.Namespace) -> list[str]:
    """Dedicated flags become ``section.key=value`` overrides applied after ``--set``."""
    overrides = list(args.overrides)
    if args.steps is not None:
        overrides.append(f"time.steps={args.steps}")
    if args.level is not None:
        overrides.append(f"mesh.level={args.level}")
    if args.delta is not None:
        overrides.append(f"impedance.delta={args.delta}")
    if args.kind is not None:
        overrides.append(f'impedance.kind="{args.kind}"')
    if args.output is not None:
        overrides.append(f'output.directory="{args.output}"')
    return overrides


def run(args: argparse.Namespace) -> int:
    config = service.load_config(args.config, _shortcuts(args))
    _, runner = COMMANDS[args.command]
    logger.info(f"Running {args.command} (output: {config.output.directory})")
    runner(config)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    for name, (description, _) in COMMANDS.items():
        parser = subparsers.add_parser(name, help=description, description=description)
        parser.add_argument("--config", help="TOML scenario file")
        parser.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="Override one config value (TOML literal syntax); repeatable",
        )
        parser.add_argument("--steps", type=int)
        parser.add_argument("--level", type=int)
        parser.add_argument("--delta", type=float)
        parser.add_argument("--kind", choices=["thin_layer", "absorbing"])
        parser.add_argument("--output", help="Output directory")
        parser.set_defaults(handler=run)
