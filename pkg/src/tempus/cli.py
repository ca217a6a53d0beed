"""Command-line front end: ``tempus run | list | validate | selftest``.

Exit codes: 0 success, 1 a check failed, 2 configuration error,
3 grid-coverage or window-mass error.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, GridCoverageError, InvalidArgument, WindowMassError
from .scenarios import EXIT_CHECK, EXIT_CONFIG, EXIT_COVERAGE, EXIT_OK, run_scenario


def output_dir(cfg, override=None):
    """Command-line flag, then TEMPUS_OUT, then the config's [output] dir."""
    if override:
        return Path(override)
    env = os.environ.get("TEMPUS_OUT")
    if env:
        return Path(env)
    return Path(cfg["output"]["dir"]) / cfg.name


def write_atomic(directory, files):
    """Write every file to a temporary sibling first, then rename into place."""
    directory.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name in sorted(files):
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=directory)
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(files[name])
            os.chmod(tmp, 0o644)
            staged.append((tmp, directory / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]


def cmd_list(args):
    for name, (desc, _) in cfgmod.BUILTINS.items():
        print(f"{name:<10s} {desc}")
    return EXIT_OK


def cmd_validate(args):
    try:
        cfg = cfgmod.load(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("ok")
    print(cfg.to_ini(), end="")
    return EXIT_OK


def cmd_run(args):
    try:
        cfg = cfgmod.load(args.config)
        report = run_scenario(cfg)
    except (ConfigError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridCoverageError, WindowMassError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    written = write_atomic(output_dir(cfg, args.out), report.files)
    if not args.quiet:
        print(report.table())
        for path in written:
            print(f"wrote {path}")
    return report.exit_code


def cmd_selftest(args):
    from .checks import run_all

    numbers = None
    if args.only:
        try:
            numbers = {int(n) for n in args.only.split(",")}
        except ValueError:
            print("error: --only takes comma-separated criterion numbers", file=sys.stderr)
            return EXIT_CONFIG
    results = run_all(numbers)
    for res in results:
        print(res.line(), flush=True)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria pass"
          + (f"; failing: {', '.join(map(str, failed))}" if failed else ""))
    return EXIT_CHECK if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tempus", description="Covariant time observables on discretized energy grids.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario from a config file or builtin name")
    p.add_argument("config", help="INI/JSON file or builtin name (see 'list')")
    p.add_argument("--out", help="output directory (overrides TEMPUS_OUT and the config)")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress the report table")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list", help="list builtin scenarios")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("validate", help="check a config and echo it with defaults resolved")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("selftest", help="run the numbered acceptance checks")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
