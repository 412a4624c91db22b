"""Command-line runner: ``netdiffusion run|validate|describe``."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config, parse_config, schema

log = logging.getLogger("netdiffusion")


def _with_overrides(cfg, seed=None, out=None):
    data = cfg.model_dump(mode="json")
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["output_dir"] = str(out)
    return parse_config(data)


def write_outputs(cfg, output, outdir: Path) -> list[Path]:
    """Write artifacts plus manifest.json; on any failure remove what was written."""
    created_dir = not outdir.exists()
    written: list[Path] = []
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        entries = []
        for art in output.artifacts:
            path = outdir / art.name
            data = art.text.encode()
            path.write_bytes(data)
            written.append(path)
            entries.append({"file": art.name, "bytes": len(data),
                            "sha256": hashlib.sha256(data).hexdigest()})
        manifest = {"config_hash": cfg.config_hash(), "kind": cfg.kind, "seed": cfg.seed,
                    "version": __version__, "config": cfg.semantic_dict(),
                    "artifacts": entries}
        path = outdir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        written.append(path)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created_dir and outdir.exists() and not any(outdir.iterdir()):
            outdir.rmdir()
        raise
    return written


def cmd_run(args) -> int:
    from .experiments import run_experiment

    cfg = _with_overrides(load_config(args.config), args.seed, args.out)
    outdir = Path(cfg.output_dir)
    log.info("running %s (seed %d, hash %s)", cfg.kind, cfg.seed, cfg.config_hash()[:12])
    output = run_experiment(cfg, threads=args.threads)
    files = write_outputs(cfg, output, outdir)
    for f in files:
        print(f)
    return 0


def cmd_validate(args) -> int:
    cfg = _with_overrides(load_config(args.config), args.seed, args.out)
    print(f"ok: {cfg.kind}, config hash {cfg.config_hash()}")
    return 0


def cmd_describe(args) -> int:
    print(json.dumps(schema(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netdiffusion",
                                description="Run SIS diffusion, polling and tracking experiments.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("run", cmd_run, "run an experiment config"),
                               ("validate", cmd_validate, "check a config without running it")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", type=Path)
        s.add_argument("--seed", type=int, default=None, help="override the base seed")
        s.add_argument("--out", type=Path, default=None, help="override the output directory")
        s.add_argument("--threads", type=int, default=1, help="worker processes for panels")
        s.set_defaults(func=fn)
    d = sub.add_parser("describe", help="print the config JSON schema")
    d.set_defaults(func=cmd_describe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - report and exit nonzero
        log.debug("failure", exc_info=True)
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
