"""Command-line front end.

Subcommands: demosaic, dehaze, synth, metrics, histmatch, pipeline.
Exit status is 0 on success, 1 if any file failed (the rest are still
processed), and 2 for configuration or usage errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .diffusion import DehazeParams, dehaze
from .histmatch import match_histogram
from .imageio import ImageFormatError, atomic_write_text, load_image, save_image, save_stack
from .metrics import DEFAULT_THRESHOLD, MetricsReport, evaluate
from .mosaic import DEFAULT_LAYOUT, MosaicLayout, polar_products
from .scatter import ScatterParams, depth_ramp, synth_haze

log = logging.getLogger("polarfog")

SUBCOMMANDS = ("demosaic", "dehaze", "synth", "metrics", "histmatch", "pipeline")
PLANE_NAMES = ("i0", "i45", "i90", "i135", "s0", "s1", "s2", "dolp", "aolp")
PRODUCT_PLANES = ("s0", "s1", "dolp", "aolp")
CSV_HEADER = "file,e,rbar,sigma,sd,ag,n_o,n_r,n_s,threshold"
IMAGE_SUFFIXES = (".png", ".pgm")

# value range of each product plane, mapped onto the full 16-bit scale on output
PLANE_RANGES = {
    "i0": (0.0, 1.0),
    "i45": (0.0, 1.0),
    "i90": (0.0, 1.0),
    "i135": (0.0, 1.0),
    "s0": (0.0, 2.0),
    "s1": (-1.0, 1.0),
    "s2": (-1.0, 1.0),
    "dolp": (0.0, 1.0),
    "aolp": (-math.pi / 2, math.pi / 2),
}


class ConfigError(ValueError):
    """Invalid configuration; maps to exit status 2."""


# -- configuration ------------------------------------------------------------


def _parse_planes(text: str) -> tuple[str, ...]:
    planes = tuple(p.strip() for p in text.split(",") if p.strip())
    bad = [p for p in planes if p not in PLANE_NAMES]
    if bad or not planes:
        raise ValueError(f"unknown plane(s) {bad or text!r}; choose from {','.join(PLANE_NAMES)}")
    return planes


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_DEHAZE_TYPES: dict[str, Callable[[str], Any]] = {
    f.name: {"int": int, "float": float, "str": str}[f.type] for f in fields(DehazeParams)
}

CONFIG_KEYS: dict[str, Callable[[str], Any]] = {
    **_DEHAZE_TYPES,
    "layout": MosaicLayout.parse,
    "threshold": float,
    "bins": int,
    "planes": _parse_planes,
    "save_stack": str,
    "seed": int,
    "beta": float,
    "a_inf": float,
    "depth_scale": float,
    "histmatch": _parse_bool,
}


@dataclass
class RunConfig:
    subcommand: Optional[str] = None
    inputs: list = field(default_factory=list)
    output: Optional[str] = None
    params: DehazeParams = field(default_factory=DehazeParams)
    layout: MosaicLayout = DEFAULT_LAYOUT
    threshold: float = DEFAULT_THRESHOLD
    bins: int = 256
    planes: tuple = ("s0", "dolp")
    save_stack: Optional[str] = None
    seed: Optional[int] = None  # reserved: every stage is deterministic
    beta: float = 1.0
    a_inf: float = 1.0
    depth_scale: float = 1.0
    histmatch: bool = True

    def updated(self, values: dict) -> "RunConfig":
        """Return a copy with ``values`` applied; dehaze keys go into ``params``."""
        dehaze_vals = {k: v for k, v in values.items() if k in _DEHAZE_TYPES}
        other = {k: v for k, v in values.items() if k not in _DEHAZE_TYPES}
        params = self.params
        if dehaze_vals:
            try:
                params = replace(params, **dehaze_vals)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return replace(self, params=params, **other)

    def validate(self) -> None:
        problems = []
        if self.threshold < 0:
            problems.append(f"threshold must be >= 0 (got {self.threshold})")
        if self.bins < 2:
            problems.append(f"bins must be >= 2 (got {self.bins})")
        if not self.beta > 0:
            problems.append(f"beta must be > 0 (got {self.beta})")
        if not 0 < self.a_inf <= 1:
            problems.append(f"a_inf must lie in (0, 1] (got {self.a_inf})")
        if not self.depth_scale >= 0:
            problems.append(f"depth_scale must be >= 0 (got {self.depth_scale})")
        try:
            self.params.validate()
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigError("; ".join(problems))


def load_config(path) -> RunConfig:
    """Read ``key = value`` lines (``#`` starts a comment) over the defaults."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    try:
        return RunConfig().updated(values)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# -- argument parsing ---------------------------------------------------------


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_dehaze_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("dehaze parameters")
    for f in fields(DehazeParams):
        g.add_argument(_flag(f.name), dest=f.name, type=CONFIG_KEYS[f.name],
                       default=argparse.SUPPRESS, help=f"(default {f.default})")
    g.add_argument("--save-stack", dest="save_stack", default=argparse.SUPPRESS,
                   help="directory for the per-frame sequence (PGM layers + meta.txt)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key = value configuration file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="reserved; processing is deterministic")
    p.add_argument("-v", "--verbose", action="store_true")


def _layout_arg(p):
    p.add_argument("--layout", type=MosaicLayout.parse, default=argparse.SUPPRESS,
                   help="superpixel angles TL,TR,BL,BR (default 90,45,135,0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarfog", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("demosaic", help="split raw mosaics into angle, Stokes, DOLP and AOLP planes")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True, help="output directory")
    _layout_arg(p)
    _add_common(p)

    p = sub.add_parser("dehaze", help="dehaze gray images")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True,
                   help="output file (single input) or directory")
    _add_dehaze_flags(p)
    _add_common(p)

    p = sub.add_parser("synth", help="add synthetic haze to a clear scene")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True, help="output file (single input) or directory")
    p.add_argument("--beta", type=float, default=argparse.SUPPRESS)
    p.add_argument("--ainf", dest="a_inf", type=float, default=argparse.SUPPRESS)
    p.add_argument("--depth", default=None, help="depth image; [0,1] samples scaled by --depth-scale")
    p.add_argument("--depth-scale", dest="depth_scale", type=float, default=argparse.SUPPRESS)
    p.add_argument("--airlight", default=None, help="also write the airlight map here (single input)")
    _add_common(p)

    p = sub.add_parser("metrics", help="blind quality metrics as CSV")
    p.add_argument("--original", action="append", required=True)
    p.add_argument("--restored", action="append", required=True)
    p.add_argument("--threshold", type=float, default=argparse.SUPPRESS)
    p.add_argument("-o", "--output", default=None, help="append rows to this CSV file")
    _add_common(p)

    p = sub.add_parser("histmatch", help="match an image's histogram to a reference")
    p.add_argument("inputs", nargs=1)
    p.add_argument("--ref", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--bins", type=int, default=argparse.SUPPRESS)
    _add_common(p)

    p = sub.add_parser("pipeline", help="demosaic, dehaze, match and score a directory of mosaics")
    p.add_argument("inputs", nargs="+", help="directories or mosaic files")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--planes", type=_parse_planes, default=argparse.SUPPRESS,
                   help="planes to dehaze (default s0,dolp)")
    p.add_argument("--threshold", type=float, default=argparse.SUPPRESS)
    p.add_argument("--bins", type=int, default=argparse.SUPPRESS)
    p.add_argument("--no-histmatch", dest="histmatch", action="store_false", default=argparse.SUPPRESS)
    _layout_arg(p)
    _add_dehaze_flags(p)
    _add_common(p)
    return parser


_NON_CONFIG = {"subcommand", "inputs", "output", "config", "verbose", "original", "restored",
               "depth", "airlight", "ref"}


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    cfg = load_config(ns.config) if ns.config else RunConfig()
    flags = {k: v for k, v in vars(ns).items() if k not in _NON_CONFIG}
    cfg = cfg.updated(flags)
    cfg = replace(cfg, subcommand=ns.subcommand, inputs=list(getattr(ns, "inputs", []) or []),
                  output=getattr(ns, "output", None))
    cfg.validate()
    return cfg


def worker_count() -> int:
    raw = os.environ.get("POLARFOG_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"POLARFOG_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("POLARFOG_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _map_ordered(fn, items, workers: int) -> list:
    """Apply ``fn`` to every item; results (or exceptions) in input order."""

    def guarded(item):
        try:
            return fn(item)
        except Exception as exc:  # reported per file by the caller
            return exc

    if workers <= 1 or len(items) <= 1:
        return [guarded(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(guarded, items))


def _collect_images(paths, allow_dirs=False) -> list[Path]:
    found: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            if not allow_dirs:
                raise ConfigError(f"{p} is a directory")
            found.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES))
        else:
            found.append(p)
    if not found:
        raise ConfigError("no input images")
    return sorted(set(found))


def _output_path(cfg: RunConfig, src: Path, n_inputs: int, tag: str) -> Path:
    out = Path(cfg.output)
    if n_inputs == 1 and out.suffix.lower() in IMAGE_SUFFIXES:
        return out
    return out / f"{src.stem}_{tag}.png"


def _report_failures(results, names) -> int:
    failed = 0
    for name, res in zip(names, results):
        if isinstance(res, Exception):
            failed += 1
            print(f"polarfog: {name}: {res}", file=sys.stderr)
    return 1 if failed else 0


def _fmt(x) -> str:
    if isinstance(x, float):
        return "undefined" if math.isnan(x) else f"{x:.10g}"
    return str(x)


def csv_row(name: str, rep: MetricsReport) -> str:
    vals = (rep.e, rep.r_bar, rep.sigma, rep.sd, rep.ag, rep.n_o, rep.n_r, rep.n_s, rep.threshold)
    return ",".join([name] + [_fmt(v) for v in vals])


class _Timer:
    def __init__(self, label):
        self.label = label

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        log.info("%s: %.2fs", self.label, time.perf_counter() - self.t0)


# -- subcommands --------------------------------------------------------------


def write_products(frame, out_dir: Path, stem: str, planes=PLANE_NAMES) -> None:
    lines = ["# plane min max (16-bit full scale maps onto [min, max])"]
    for name in planes:
        lo, hi = PLANE_RANGES[name]
        save_image(out_dir / f"{stem}_{name}.png", getattr(frame, name), bits=16, vmin=lo, vmax=hi)
        lines.append(f"{name} {lo!r} {hi!r}")
    atomic_write_text(out_dir / f"{stem}_ranges.txt", "\n".join(lines) + "\n")


def cmd_demosaic(cfg: RunConfig) -> int:
    files = _collect_images(cfg.inputs)
    out_dir = Path(cfg.output)

    def one(path: Path):
        with _Timer(f"demosaic {path.name}"):
            frame, report = polar_products(load_image(path), cfg.layout)
            if report.degenerate or report.clamped:
                log.info("%s: dolp degenerate=%d clamped=%d", path.name, report.degenerate, report.clamped)
            write_products(frame, out_dir, path.stem)

    return _report_failures(_map_ordered(one, files, worker_count()), files)


def cmd_dehaze(cfg: RunConfig) -> int:
    files = _collect_images(cfg.inputs)

    def one(path: Path):
        with _Timer(f"dehaze {path.name}"):
            result = dehaze(load_image(path), cfg.params)
            save_image(_output_path(cfg, path, len(files), "dehazed"), result.final)
            if cfg.save_stack:
                target = Path(cfg.save_stack)
                save_stack(target if len(files) == 1 else target / path.stem, result.sequence)

    return _report_failures(_map_ordered(one, files, worker_count()), files)


def cmd_synth(cfg: RunConfig, depth_path: Optional[str], airlight_path: Optional[str]) -> int:
    files = _collect_images(cfg.inputs)
    depth_img = load_image(depth_path) if depth_path else None

    def one(path: Path):
        scene = load_image(path)
        unit = depth_img if depth_img is not None else depth_ramp(*scene.shape)
        params = ScatterParams(cfg.beta, cfg.a_inf, unit * cfg.depth_scale)
        res = synth_haze(scene, params)
        save_image(_output_path(cfg, path, len(files), "hazy"), res.hazy)
        if airlight_path and len(files) == 1:
            save_image(airlight_path, res.airlight)

    return _report_failures(_map_ordered(one, files, worker_count()), files)


def _append_csv(path, rows) -> None:
    path = Path(path)
    existing = path.read_text() if path.exists() else CSV_HEADER + "\n"
    atomic_write_text(path, existing + "".join(r + "\n" for r in rows))


def cmd_metrics(cfg: RunConfig, originals, restored) -> int:
    if len(originals) != len(restored):
        raise ConfigError("--original and --restored must be given the same number of times")
    pairs = list(zip(originals, restored))

    def one(pair):
        a, b = pair
        return csv_row(Path(b).name, evaluate(load_image(a), load_image(b), cfg.threshold))

    results = _map_ordered(one, pairs, worker_count())
    rows = [r for r in results if not isinstance(r, Exception)]
    print(CSV_HEADER)
    for row in rows:
        print(row)
    if cfg.output and rows:
        _append_csv(cfg.output, rows)
    return _report_failures(results, [b for _, b in pairs])


def cmd_histmatch(cfg: RunConfig, ref_path: str) -> int:
    src = load_image(cfg.inputs[0])
    ref = load_image(ref_path)
    save_image(cfg.output, match_histogram(src, ref, cfg.bins))
    return 0


def plane_to_unit(name: str, plane: np.ndarray) -> np.ndarray:
    """Bring a product plane onto [0, 1] before dehazing; S0 is divided by its max."""
    if name == "s0":
        peak = float(plane.max())
        return plane / peak if peak > 0 else np.zeros_like(plane)
    lo, hi = PLANE_RANGES[name]
    return (plane - lo) / (hi - lo)


def cmd_pipeline(cfg: RunConfig) -> int:
    files = _collect_images(cfg.inputs, allow_dirs=True)
    out_dir = Path(cfg.output)

    def one(path: Path) -> list[str]:
        rows = []
        with _Timer(f"pipeline {path.name}"):
            frame, _ = polar_products(load_image(path), cfg.layout)
            write_products(frame, out_dir, path.stem, PRODUCT_PLANES)
            for name in cfg.planes:
                original = plane_to_unit(name, getattr(frame, name))
                result = dehaze(original, cfg.params)
                tag = f"{path.stem}_{name}"
                save_image(out_dir / f"{tag}_dehazed.png", result.final)
                rows.append(csv_row(tag, evaluate(original, result.final, cfg.threshold)))
                if cfg.histmatch:
                    matched = match_histogram(result.final, original, cfg.bins)
                    save_image(out_dir / f"{tag}_matched.png", matched)
                    rows.append(csv_row(tag + "*", evaluate(original, matched, cfg.threshold)))
                if cfg.save_stack:
                    save_stack(Path(cfg.save_stack) / tag, result.sequence)
        return rows

    results = _map_ordered(one, files, worker_count())
    rows = [row for res in results if not isinstance(res, Exception) for row in res]
    print(CSV_HEADER)
    for row in rows:
        print(row)
    atomic_write_text(out_dir / "metrics.csv", CSV_HEADER + "\n" + "".join(r + "\n" for r in rows))
    return _report_failures(results, files)


# -- entry points -------------------------------------------------------------


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(ns)
        worker_count()
        if cfg.subcommand == "demosaic":
            return cmd_demosaic(cfg)
        if cfg.subcommand == "dehaze":
            return cmd_dehaze(cfg)
        if cfg.subcommand == "synth":
            return cmd_synth(cfg, ns.depth, ns.airlight)
        if cfg.subcommand == "metrics":
            return cmd_metrics(cfg, ns.original, ns.restored)
        if cfg.subcommand == "histmatch":
            return cmd_histmatch(cfg, ns.ref)
        if cfg.subcommand == "pipeline":
            return cmd_pipeline(cfg)
    except ConfigError as exc:
        print(f"polarfog: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ImageFormatError, OSError, ValueError) as exc:
        print(f"polarfog: {exc}", file=sys.stderr)
        return 1
    return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
