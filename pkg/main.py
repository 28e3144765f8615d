#!/usr/bin/env python3
"""
AdaEM Toolkit - Adaptive energy management for energy-harvesting wearables

Plans when to recharge and how much energy to spend per interval, and
compares the planner against reactive, energy-neutral and optimal policies
on simulated traces.
"""
import argparse
import asyncio
import sys
from pathlib import Path
from typing import List, Optional

# Add the current directory to the path for imports
sys.path.insert(0, str(Path(__file__).parent))

from src.cli.commands import CLIHandler, parse_float_list, parse_name_list
from src.core.config_manager import POLICY_NAMES, ConfigManager
from src.core.errors import ConfigError, TraceFormatError
from src.utils.logging_setup import setup_logging

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command"""
    parser = argparse.ArgumentParser(
        description="AdaEM Toolkit - charging and consumption planning for energy-harvesting wearables",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s gen-data --seed 7 --users 1 --days 3 --out data/
  %(prog)s train --data data/ --out models/harvest.model --trees 20 --depth 6
  %(prog)s simulate --data data/ --model models/harvest.model --policy adaem --out runs/adaem
  %(prog)s compare --policies adaem,oracle --ideal-predictions --out runs/ideal
  %(prog)s sweep-amin --values 0.80,0.85,0.90,0.95 --out runs/sweep
        """
    )
    parser.add_argument(
        '--config', '--config-file',
        dest='config_file',
        default='config/config.yaml',
        help='Configuration file: YAML, or flat "section.key = value" lines'
    )
    parser.add_argument(
        '--verbose', '-v',
        action='store_true',
        help='Enable verbose logging'
    )

    # Shared by every experiment command
    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument('--data', metavar='DIR', help='gen-data output (synthesized when omitted)')
    experiment.add_argument('--model', metavar='MODEL', help='Serialized predictor (trained per user when omitted)')
    experiment.add_argument('--out', metavar='DIR', required=True, help='Output directory')
    experiment.add_argument('--config', dest='config_file', default=argparse.SUPPRESS,
                            help='Configuration file')
    experiment.add_argument('--seed', type=int, help='Random seed for synthesized traces')
    experiment.add_argument('--users', type=int, help='Synthesized users')
    experiment.add_argument('--days', type=int, help='Evaluation days per synthesized user')
    experiment.add_argument('--jobs', type=int, help='Parallel (user, policy) simulations')
    experiment.add_argument('--ideal-predictions', action='store_true', default=None,
                            help='Plan with the actual harvest instead of forecasts')
    experiment.add_argument('--robustness-k', type=float, help='Forecast mean minus k standard deviations')
    experiment.add_argument('--a-min', type=float, help='Minimum accuracy')

    subparsers = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    gen = subparsers.add_parser('gen-data', help='Write synthetic traces per user')
    gen.add_argument('--seed', type=int, help='Random seed')
    gen.add_argument('--users', type=int, help='Number of users')
    gen.add_argument('--days', type=int, help='Days per user, training days included')
    gen.add_argument('--out', metavar='DIR', required=True, help='Output directory')

    train = subparsers.add_parser('train', help='Fit and serialize the harvest predictor')
    train.add_argument('--data', metavar='DIR', required=True, help='gen-data output')
    train.add_argument('--out', metavar='MODEL', required=True, help='Model file to write')
    train.add_argument('--trees', type=int, help='Number of trees')
    train.add_argument('--depth', type=int, help='Maximum tree depth')

    simulate = subparsers.add_parser('simulate', parents=[experiment], help='Run one policy')
    simulate.add_argument('--policy', choices=POLICY_NAMES, required=True)

    compare = subparsers.add_parser('compare', parents=[experiment], help='Run policies on identical traces')
    compare.add_argument('--policies', type=parse_name_list, default=list(POLICY_NAMES),
                         help='Comma-separated policies (default: all)')

    sweep = subparsers.add_parser('sweep-amin', parents=[experiment],
                                  help='Charging energy as a function of the minimum accuracy')
    sweep.add_argument('--values', type=parse_float_list, default=[0.80, 0.85, 0.90, 0.95],
                       help='Comma-separated accuracy targets')
    sweep.add_argument('--policies', type=parse_name_list, default=['adaem', 'oracle'],
                       help='Comma-separated policies (default: adaem,oracle)')

    return parser


def experiment_overrides(args: argparse.Namespace) -> dict:
    """Command-line flags as per-section configuration overrides"""
    return {
        'simulation': {
            'seed': args.seed,
            'users': args.users,
            'days': args.days,
            'jobs': args.jobs,
            'ideal_predictions': args.ideal_predictions,
        },
        'predictor': {'robustness_k': args.robustness_k},
        'planner': {'a_min': args.a_min},
    }


async def run_command(args: argparse.Namespace, handler: CLIHandler) -> int:
    if args.command == 'gen-data':
        return await handler.gen_data(args.out, seed=args.seed, users=args.users, days=args.days)
    if args.command == 'train':
        return await handler.train(args.data, args.out, trees=args.trees, depth=args.depth)

    overrides = experiment_overrides(args)
    if args.command == 'simulate':
        return await handler.simulate(args.out, args.policy, args.data, args.model, overrides)
    if args.command == 'compare':
        unknown = [p for p in args.policies if p not in POLICY_NAMES]
        if unknown:
            raise ConfigError(f"unknown policy {unknown[0]!r}", key="--policies")
        return await handler.compare(args.out, args.policies, args.data, args.model, overrides)
    return await handler.sweep_amin(args.out, args.values, args.policies, args.data, args.model, overrides)


async def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point; returns the process exit status"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    try:
        config_manager = ConfigManager(args.config_file)
        config = config_manager.load_config()
        setup_logging(verbose=args.verbose, log_file=config.debug.log_file, level=config.debug.log_level)
        return await run_command(args, CLIHandler(config_manager))
    except (ConfigError, TraceFormatError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        print(f"❌ Unexpected error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
