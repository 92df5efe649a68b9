#!/usr/bin/env python3
"""
corrugate command-line entry point
Subcommands: feasible, run, verify, dump, info
"""

import sys
import argparse
from dotenv import load_dotenv
from core.logging_config import get_logger

# Load environment variables from .env file
load_dotenv()


def build_parser():
    parser = argparse.ArgumentParser(description='Convex-integration engine for the 2-Hessian Dirichlet problem')
    sub = parser.add_subparsers(dest='command', required=True)

    def with_config(p):
        p.add_argument('--config', '-c', help='key=value or JSON run configuration (default: $CORRUGATE_CONFIG)')
        p.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                       help='Override one configuration key; may be repeated')
        return p

    p = with_config(sub.add_parser('feasible', help='Resolve the schedule and print the parameter ledger'))
    p.add_argument('--json', action='store_true', help='Print the full ledger as JSON')

    p = with_config(sub.add_parser('run', help='Run the construction'))
    p.add_argument('--dump-stages', action='store_true', help='Write V_q and W_q after every stage')
    p.add_argument('--emit-plot-data', action='store_true', help='Write CSV transects and tables')

    p = with_config(sub.add_parser('verify', help='Weak residual of a field file'))
    p.add_argument('v_file', help='CIGRID file with v')
    p.add_argument('f_file', help='CIGRID file with f')
    p.add_argument('--output', '-o', help='Write the residual report as JSON')

    p = sub.add_parser('dump', help='Header, statistics and component table of a field file')
    p.add_argument('file')
    p.add_argument('--csv', help='Also export node coordinates and values')

    p = sub.add_parser('info', help='Header of a field file')
    p.add_argument('file')
    return parser


def main(argv=None):
    """
    Parse arguments and dispatch to the subcommand

    Returns:
        int: Exit code
    """
    args = build_parser().parse_args(argv)
    # Children of 'corrugate' (core, services, db) propagate to these handlers
    logger = get_logger('corrugate', 'run' if args.command == 'run' else 'cli')
    logger.debug(f"Command: {args.command}")

    from cli import commands
    if args.command == 'feasible':
        return commands.cmd_feasible(args.config, args.overrides, args.json)
    if args.command == 'run':
        return commands.cmd_run(args.config, args.overrides, args.dump_stages, args.emit_plot_data)
    if args.command == 'verify':
        return commands.cmd_verify(args.v_file, args.f_file, args.config, args.overrides, args.output)
    if args.command == 'dump':
        return commands.cmd_dump(args.file, args.csv)
    return commands.cmd_info(args.file)


if __name__ == '__main__':
    sys.exit(main())
