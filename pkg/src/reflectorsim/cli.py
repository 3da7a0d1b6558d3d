"""Command-line front end: ``reflectorsim sweep | compare | scenarios | init-config``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import (SimConfig, build_config, config_digest, default_config, parse_variant,
                     read_config, with_reflector)
from .link import SENTINEL_DBM
from .scene import ConfigError
from .sweep import (HEATMAP_RANGE_DBM, GridMismatchError, atomic_write, cdf, cdf_csv_bytes,
                    coverage_csv_bytes, decile_gains, heatmap_pgm_bytes, median_gain,
                    metadata_bytes, read_coverage_csv, run_grid, uniformity)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_GRID_MISMATCH = 3

MEASURED_VARIANTS = ("none", "plate12", "plate24", "plate33", "sphere", "cylinder")
_SAFE_LABEL = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")


def safe_label(text: str) -> str:
    """Filesystem-safe version of an arbitrary label."""
    out = re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-.")
    return out or "run"


@dataclass(frozen=True)
class RunManifest:
    config_path: Path
    out_dir: Path
    seed: int = 0
    label: str = "run"

    def __post_init__(self):
        if not _SAFE_LABEL.fullmatch(self.label):
            raise ValueError(f"label {self.label!r} is not filesystem-safe")
        object.__setattr__(self, "config_path", Path(self.config_path))
        object.__setattr__(self, "out_dir", Path(self.out_dir))

    def prepare_output(self):
        """Create the output directory; raises OSError if it is not writable."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        probe = self.out_dir / f".{self.label}.probe"
        probe.write_bytes(b"")
        probe.unlink()

    def output_paths(self) -> dict[str, Path]:
        return {
            "coverage": self.out_dir / f"{self.label}_coverage.csv",
            "cdf": self.out_dir / f"{self.label}_cdf.csv",
            "heatmap": self.out_dir / f"{self.label}_heatmap.pgm",
            "metadata": self.out_dir / f"{self.label}_metadata.json",
        }


def _apply_overrides(raw: dict, args) -> dict:
    raw = dict(raw)
    trace = dict(raw.get("trace", {}))
    for flag, key in (("seed", "seed"), ("max_order", "max_order"), ("tile_size", "tile_size")):
        value = getattr(args, flag, None)
        if value is not None:
            trace[key] = value
    raw["trace"] = trace
    return raw


def run_sweep(cfg: SimConfig, manifest: RunManifest, workers: Optional[int] = None) -> dict:
    """Simulate one configuration and write its four output files."""
    start = time.perf_counter()
    cmap = run_grid(cfg.scene, cfg.grid, cfg.options, workers)
    elapsed = time.perf_counter() - start
    pgm, clipped = heatmap_pgm_bytes(cmap)
    meta = dict(cmap.metadata)
    meta.update({
        "label": manifest.label,
        "config": str(manifest.config_path),
        "config_sha256": cfg.digest,
        "tilt_deg": cfg.raw.get("reflector", {}).get("tilt_deg"),
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "runtime_s": round(elapsed, 3),
        "heatmap_range_dbm": list(HEATMAP_RANGE_DBM),
        "heatmap_clipped_cells": clipped,
        "median_dbm": cmap.median(),
    })
    files = {
        "coverage": coverage_csv_bytes(cmap),
        "cdf": cdf_csv_bytes(cdf(cmap)),
        "heatmap": pgm,
        "metadata": metadata_bytes(meta),
    }
    # Everything is rendered before the first write, so a failure leaves no
    # partial set behind.
    paths = manifest.output_paths()
    for name, data in files.items():
        atomic_write(paths[name], data)
    meta["map"] = cmap
    return meta


def cmd_sweep(args) -> int:
    try:
        raw = _apply_overrides(read_config(args.config), args)
        cfg = build_config(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    label = args.label or safe_label(Path(args.config).stem)
    try:
        manifest = RunManifest(args.config, args.out, cfg.options.seed, label)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest.prepare_output()
        meta = run_sweep(cfg, manifest, args.workers)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{label}: median {meta['median_dbm']:.2f} dBm, {meta['sentinel_count']} cells "
          f"without signal, {meta['runtime_s']:.1f} s -> {manifest.out_dir}")
    return EXIT_OK


def combined_cdf_bytes(labelled_maps) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "power_dbm", "prob"])
    for label, cmap in labelled_maps:
        c = cdf(cmap)
        for v, p in zip(c.values, c.probs):
            w.writerow([label, repr(float(v)), repr(float(p))])
    return buf.getvalue().encode()


def cmd_compare(args) -> int:
    try:
        map_a = read_coverage_csv(args.map_a)
        map_b = read_coverage_csv(args.map_b)
    except (OSError, ValueError) as exc:
        print(f"cannot read coverage map: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        gain = median_gain(map_a, map_b)
        deciles = decile_gains(map_a, map_b)
    except GridMismatchError as exc:
        print(f"grid mismatch: {exc}", file=sys.stderr)
        return EXIT_GRID_MISMATCH
    label_a = args.label_a or safe_label(Path(args.map_a).stem)
    label_b = args.label_b or safe_label(Path(args.map_b).stem)
    u_a, u_b = uniformity(map_a), uniformity(map_b)
    print(f"median gain ({label_a} vs {label_b}): {gain:.2f} dB")
    print("decile gains (dB): " + " ".join(f"{g:.2f}" for g in deciles))
    print(f"uniformity: {label_a} {u_a:.2f} dB, {label_b} {u_b:.2f} dB, delta {u_a - u_b:.2f} dB")
    if args.out:
        try:
            atomic_write(Path(args.out), combined_cdf_bytes([(label_a, map_a), (label_b, map_b)]))
        except OSError as exc:
            print(f"io error: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def parse_variant_list(text: Optional[str]) -> list[str]:
    if text is None:
        return list(MEASURED_VARIANTS)
    return [v.strip() for v in text.split(",") if v.strip()]


def summary_csv_bytes(rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "status", "median_dbm", "std_db"])
    for row in rows:
        w.writerow(row)
    return buf.getvalue().encode()


def cmd_scenarios(args) -> int:
    try:
        base_raw = _apply_overrides(read_config(args.config), args)
        build_config(base_raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO

    variants = ["none"] + [v for v in parse_variant_list(args.variants) if v != "none"]
    rows = []
    failures = 0
    for variant in variants:
        label = safe_label(variant if variant != "none" else "no-reflector")
        try:
            raw = with_reflector(base_raw, parse_variant(variant))
            cfg = build_config(raw)
            manifest = RunManifest(args.config, out, cfg.options.seed, label)
            meta = run_sweep(cfg, manifest, args.workers)
        except (ConfigError, ValueError, OSError) as exc:
            failures += 1
            print(f"{label}: FAILED ({exc})", file=sys.stderr)
            rows.append([label, "failed", "", ""])
            continue
        cmap = meta["map"]
        std = uniformity(cmap) if np.any(cmap.values > SENTINEL_DBM) else float("nan")
        rows.append([label, "ok", repr(meta["median_dbm"]), repr(std)])
        print(f"{label}: median {meta['median_dbm']:.2f} dBm, std {std:.2f} dB")
    try:
        atomic_write(out / "summary.csv", summary_csv_bytes(rows))
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    if failures:
        print(f"{failures} variant(s) failed", file=sys.stderr)
    return EXIT_OK


def cmd_init_config(args) -> int:
    path = Path(args.path)
    if path.exists() and not args.force:
        print(f"{path} exists (use --force to overwrite)", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = default_config(args.reflector)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        atomic_write(path, (json.dumps(cfg, indent=2) + "\n").encode())
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {path} (sha256 {config_digest(cfg)[:12]})")
    return EXIT_OK


def _add_trace_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="scene configuration (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="diffuse-scattering phase seed")
    p.add_argument("--max-order", type=int, help="maximum specular reflection order")
    p.add_argument("--tile-size", type=float, help="diffuse tile edge length in meters")
    p.add_argument("--workers", type=int,
                   help="worker processes (default: $REFLECTORSIM_WORKERS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reflectorsim",
                                     description="28 GHz indoor coverage with passive reflectors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="simulate one configuration over its receiver grid")
    _add_trace_flags(p)
    p.add_argument("--label", help="output file prefix (default: config file name)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="median/decile gains and uniformity of two coverage maps")
    p.add_argument("map_a")
    p.add_argument("map_b")
    p.add_argument("--label-a")
    p.add_argument("--label-b")
    p.add_argument("--out", help="write the combined CDF CSV here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("scenarios", help="sweep the baseline and a list of reflector variants")
    _add_trace_flags(p)
    p.add_argument("--variants",
                   help="comma-separated variants, e.g. plate24,sphere,plate:0.5x0.5,"
                        "cylinder:0.1x0.4 (default: the measured set); the no-reflector "
                        "baseline is always included")
    p.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("init-config", help="write the default corridor configuration")
    p.add_argument("path")
    p.add_argument("--reflector", default="plate24", help="variant name, or 'none'")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
