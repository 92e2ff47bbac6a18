"""Command-line entry point: superosc {prepare,run,analyze,sweep,report}."""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
import tempfile
import time
from pathlib import Path

from .box import ExtentError, RepresentationError, ResolutionError
from .config import ConfigError, load_config
from .core import DomainError, ParameterRangeError
from .pipeline import MissingArtifactError, analyze, prepare, run, sweep

EXIT_OK, EXIT_PHYSICS, EXIT_CONFIG = 0, 2, 3
MANIFEST = "manifest.txt"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_manifest(out: Path) -> dict:
    """Stage timings and check flags from an existing manifest."""
    state = {"stages": {}, "checks": {}}
    path = out / MANIFEST
    if not path.exists():
        return state
    for line in path.read_text().splitlines():
        if ": " not in line:
            continue
        key, value = line.split(": ", 1)
        if key.startswith("stage.") and key.endswith(".seconds"):
            state["stages"][key[6:-8]] = value
        elif key.startswith("check."):
            state["checks"][key[6:]] = value
    return state


def write_manifest(out: Path, config_hash: str, stage=None) -> None:
    """Rewrite the manifest atomically, listing every file under ``out``."""
    state = read_manifest(out)
    if stage is not None:
        state["stages"][stage.name] = f"{stage.seconds:.3f}"
        for key in [k for k in state["checks"] if k.startswith(stage.name + ".")]:
            del state["checks"][key]
        for key, _, passed in stage.checks:
            state["checks"][f"{stage.name}.{key}"] = "pass" if passed else "fail"
    lines = [f"config_hash: {config_hash}"]
    for name, secs in sorted(state["stages"].items()):
        lines.append(f"stage.{name}.seconds: {secs}")
    for key, flag in sorted(state["checks"].items()):
        lines.append(f"check.{key}: {flag}")
    n_fail = sum(1 for f in state["checks"].values() if f == "fail")
    lines.append(f"checks.failed: {n_fail}")
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != MANIFEST
                   and not p.name.startswith(".manifest"))
    for p in files:
        lines.append(f"file: {p.relative_to(out).as_posix()} {p.stat().st_size} {_sha256(p)}")
    lines.append(f"file: {MANIFEST} - -")
    fd, tmp = tempfile.mkstemp(prefix=".manifest", dir=out)
    with os.fdopen(fd, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, out / MANIFEST)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat YAML scenario file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides out_dir)")
    common.add_argument("--preset", choices=["default", "weak"], help="base preset")
    common.add_argument("--threads", type=int, help="BLAS thread limit")
    p = argparse.ArgumentParser(prog="superosc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="build the box state, control state and opener")
    sub.add_parser("run", parents=[common], help="exact joint evolution and analytic approximation")
    sub.add_parser("analyze", parents=[common], help="distributions, characteristic functions, report")
    sw = sub.add_parser("sweep", parents=[common], help="convergence table over one parameter")
    sw.add_argument("--axis", choices=["N", "L", "T", "alpha"], default="N")
    sw.add_argument("--values", default="100,200,400", help="comma-separated values")
    sub.add_parser("report", parents=[common], help="print the verification report and manifest")
    return p


def _parse_values(text: str, axis: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values: {exc}") from exc
    return [int(v) for v in vals] if axis == "N" else vals


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, preset=args.preset, out_dir=args.out, threads=args.threads)
        values = _parse_values(args.values, args.axis) if args.command == "sweep" else None
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out_dir)

    if args.command == "report":
        report = out / "report.txt"
        if not report.exists():
            print(f"no report in {out}; run analyze first", file=sys.stderr)
            return EXIT_CONFIG
        sys.stdout.write(report.read_text())
        state = read_manifest(out)
        for key, flag in sorted(state["checks"].items()):
            print(f"check.{key}: {flag}")
        failed = [k for k, f in state["checks"].items() if f == "fail"]
        return EXIT_PHYSICS if failed else EXIT_OK

    from threadpoolctl import threadpool_limits

    stages = {"prepare": prepare, "run": run, "analyze": analyze}
    t0 = time.perf_counter()
    try:
        with threadpool_limits(limits=cfg.threads):
            out.mkdir(parents=True, exist_ok=True)
            if args.command == "prepare":
                (out / "config.yaml").write_text(cfg.to_yaml())
            if args.command == "sweep":
                result = sweep(cfg, out, args.axis, values)
            else:
                result = stages[args.command](cfg, out)
    except (ConfigError, ParameterRangeError, DomainError, RepresentationError,
            ResolutionError, ExtentError, MissingArtifactError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_manifest(out, cfg.hash(), result)
    for key, value, passed in result.checks:
        print(f"{'PASS' if passed else 'FAIL'} {key} = {value}")
    print(f"{result.name}: {len(result.files)} files, {time.perf_counter() - t0:.1f} s -> {out}")
    return EXIT_OK if result.passed else EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
