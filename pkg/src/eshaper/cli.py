"""Command-line entry point: ``eshaper modes|shape|forward|report --config <path> [--out <dir>]``.

Exit codes: 0 success, 2 invalid configuration or input data, 3 numerical
failure, 4 I/O failure.  Outputs are staged in a temporary sibling
directory and moved into place only when the command succeeds, so a failed
run never leaves a partial output directory behind.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
from contextlib import nullcontext
from pathlib import Path

from . import __version__
from .bem import NumericError
from .config import ConfigError, load_config
from .grid import ResolutionError
from .mesh import MeshFormatError
from .report import SUMMARY, ManifestError, read_field, read_manifest, render_summary, write_run
from .shaper import DegenerateSystemError, DimensionError
from .special import DomainError
from .units import ParameterError
from .vibrational import IngestionError

__all__ = ["main", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERIC", "EXIT_IO"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("eshaper")

_CONFIG_ERRORS = (ConfigError, ParameterError, IngestionError, MeshFormatError, DimensionError,
                  ManifestError)
_NUMERIC_ERRORS = (NumericError, DegenerateSystemError, ResolutionError, DomainError,
                   ArithmeticError)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eshaper", description=(
        "Design and analyse shaped electron beams for mode-selective EELS."))
    p.add_argument("--version", action="version", version=f"eshaper {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    help_ = {
        "modes": "compute the sample's mode basis (energies, profiles, spectral functions)",
        "shape": "solve for the incident beam that realises the configured target",
        "forward": "scatter an incident beam and analyse the final state",
        "report": "print a summary of a finished run directory",
    }
    for name, h in help_.items():
        s = sub.add_parser(name, help=h)
        if name == "report":
            s.add_argument("--config", required=True,
                           help="run directory or its manifest.json (a config is also accepted)")
        else:
            s.add_argument("--config", required=True, help="YAML/JSON run config or a run manifest")
        s.add_argument("--out", help="output directory (default: output.dir of the config)")
        s.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        if name == "forward":
            s.add_argument("--alpha", help="incident field file (alpha_incident.txt); "
                                           "shapes in-process when omitted")
    return p


def _threads():
    n = os.environ.get("ESHAPER_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    try:
        return threadpool_limits(int(n))
    except ValueError as exc:
        raise ConfigError(f"ESHAPER_THREADS must be an integer, got {n!r}") from exc


def _stage(run, out: Path) -> None:
    """Write into a temporary sibling directory, then swap it into place."""
    out = out.resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        write_run(run, tmp)
        if out.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{out.name}.old.", dir=out.parent))
            os.replace(out, old / out.name)
            os.replace(tmp, out)
            shutil.rmtree(old, ignore_errors=True)
        else:
            os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _run(args) -> int:
    from . import pipeline

    if args.command == "report":
        target = Path(args.config)
        if target.is_file() and target.name != "manifest.json":
            cfg = load_config(target)
            target = Path(args.out) if args.out else cfg.resolve(cfg.output["dir"])
        read_manifest(target)
        text = render_summary(target)
        run_dir = target if target.is_dir() else target.parent
        (run_dir / SUMMARY).write_text(text)
        sys.stdout.write(text)
        return EXIT_OK

    cfg = load_config(args.config)
    out = Path(args.out) if args.out else cfg.resolve(cfg.output["dir"])
    with _threads():
        if args.command == "modes":
            run = pipeline.run_modes(cfg)
        elif args.command == "shape":
            run = pipeline.run_shape(cfg)
        else:
            alpha = None
            if args.alpha:
                try:
                    alpha = read_field(args.alpha)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
            run = pipeline.run_forward(cfg, alpha)
    _stage(run, out)
    log.info("wrote %s", out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="eshaper: %(levelname)s: %(message)s")
    try:
        return _run(args)
    except _CONFIG_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
