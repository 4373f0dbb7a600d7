"""``ontosim`` command line.

Exit codes: 0 ok, 1 verification failure, 2 usage or config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .dump import read_csv, read_dump, write_csv, write_dump
from .errors import ConfigError, DumpFormatError, OntosimError
from .scenarios import ScenarioSpec, bundled_config_text, bundled_configs

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


def _err(msg: str):
    print(f"ontosim: {msg}", file=sys.stderr)


def _load_spec(source: str, seed, mode) -> ScenarioSpec:
    overrides = {}
    if seed is not None:
        overrides["scenario.seed"] = seed
    if mode is not None:
        overrides["scenario.mode"] = mode
    path = Path(source)
    if path.suffix == ".json":
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read manifest {source}: {exc}") from None
        if "scenario" not in d:
            raise ConfigError("scenario", f"{source} holds no scenario block")
        d = dict(d["scenario"])
        if seed is not None:
            d["seed"] = seed
        if mode is not None:
            d["mode"] = mode
        try:
            return ScenarioSpec.from_dict(d)
        except TypeError as exc:
            raise ConfigError("scenario", str(exc)) from None
    if path.exists():
        return ScenarioSpec.from_config(path, overrides)
    if source in bundled_configs() or source + ".cfg" in bundled_configs():
        return ScenarioSpec.from_config(bundled_config_text(source), overrides)
    raise ConfigError("config", f"no such file or bundled scenario: {source}")


def cmd_run(args) -> int:
    from .runner import ScenarioRunError, clean_output_dir, run_scenario
    from .scenarios import build

    try:
        spec = _load_spec(args.config, args.seed, args.mode)
        build(spec)  # geometry checks before anything is written
    except ConfigError as exc:
        _err(f"invalid config: {exc}")
        return EXIT_USAGE
    except (OntosimError, ValueError) as exc:
        _err(f"invalid config: {type(exc).__name__}: {exc}")
        return EXIT_USAGE
    out = Path(args.out) if args.out else Path("out") / spec.name
    clean_output_dir(out)
    try:
        manifest = run_scenario(spec, out)
    except ScenarioRunError as exc:
        _err(str(exc))
        _err(f"failure recorded in {out / 'manifest.json'}")
        return EXIT_RUNTIME
    print(f"{spec.name}: {len(manifest['outputs'])} files written to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_suite

    results = run_suite(args.suite, only=args.only, stream=sys.stdout)
    failed = [r.name for r in results if not r.passed]
    if failed:
        _err("failed: " + ", ".join(failed))
        return EXIT_VERIFY
    return EXIT_OK


def cmd_convert(args) -> int:
    src = Path(args.input)
    try:
        if args.format == "csv":
            psi = read_dump(src)
            dst = Path(args.out) if args.out else src.with_suffix(".csv")
            write_csv(dst, psi)
        else:
            psi = read_csv(src)
            dst = Path(args.out) if args.out else src.with_suffix(".onto")
            write_dump(dst, psi)
    except FileNotFoundError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (DumpFormatError, OntosimError, ValueError) as exc:
        _err(f"{src}: {exc}")
        return EXIT_USAGE
    print(dst)
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled_configs():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ontosim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config", help="scenario .cfg, a bundled scenario name, or a manifest.json to re-run")
    r.add_argument("--out", help="output directory (default: out/<scenario name>)")
    r.add_argument("--seed", type=int, help="override scenario.seed")
    r.add_argument("--mode", choices=("schrodinger", "bohm", "grwm", "grwf"), help="override scenario.mode")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--suite", choices=("fast", "full"), default="fast")
    v.add_argument("--only", type=int, action="append", help="run only this criterion number (repeatable)")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("convert", help="convert between binary dumps and CSV")
    c.add_argument("--in", dest="input", required=True, help="input file")
    c.add_argument("--format", choices=("csv", "dump"), default="csv", help="output format")
    c.add_argument("--out", help="output file (default: input with the new suffix)")
    c.set_defaults(func=cmd_convert)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
