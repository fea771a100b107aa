"""Command-line entry point.

    wifiradar simulate --config scene.json --out DIR [--seed N]
    wifiradar pipeline --config cfg.json --input DIR/cfr.csir --out DIR [--tau NS]
    wifiradar baseline --config cfg.json --input DIR/cfr.csir --out DIR [--mode pc --index 3]

Exit codes: 0 ok, 2 configuration error, 3 data or I/O error, 4 numerical
degeneracy.  ``WIFIRADAR_THREADS`` caps FFT worker threads.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import from_dict
from .doppler import baseline_magnitude_stft
from .errors import ConfigError, DataError, WifiRadarError
from .formats import CsirReader, atomic_open, write_csir_blocks, write_matrix, write_table
from .pipeline import PipelineConfig, file_sha256, load_config, manifest, run_pipeline, stage
from .preprocess import preprocess_series
from .scene_sim import simulate_chunks
from .series import CfrSeries

log = logging.getLogger("wifiradar")


def _write_manifest(out: Path, name: str, data: dict) -> None:
    with atomic_open(out / name, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve(cfg: PipelineConfig, args) -> PipelineConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out:
        cfg = replace(cfg, io=replace(cfg.io, output_dir=args.out))
    if getattr(args, "input", None):
        cfg = replace(cfg, io=replace(cfg.io, input_path=args.input))
    return cfg


def cmd_simulate(cfg: PipelineConfig) -> Path:
    """Simulate ``cfg.scene`` (seeded by ``cfg.seed``) into ``<out>/cfr.csir``."""
    if cfg.scene is None:
        raise ConfigError("config has no scene to simulate")
    scene = replace(cfg.scene, seed=cfg.seed)
    out = Path(cfg.io.output_dir)
    path = out / "cfr.csir"
    with stage("scene_sim"):
        blocks = ((t, h, rssi) for t, h, rssi, *_ in simulate_chunks(scene, cfg.radio))
        count = write_csir_blocks(path, cfg.radio, blocks)
    _write_manifest(out, "manifest_simulate.json",
                    manifest(cfg, "simulate", [path.name], [],
                             {"snapshot_count": count, "output_sha256": file_sha256(path)}))
    log.info("wrote %d snapshots to %s", count, path)
    return path


def _input(cfg: PipelineConfig) -> CsirReader:
    if not cfg.io.input_path:
        raise ConfigError("no input file given")
    with stage("input"):
        return CsirReader(cfg.io.input_path)


def cmd_pipeline(cfg: PipelineConfig, tau_s: float | None = None) -> dict:
    """Run every stage and write products (a)-(f) plus a manifest."""
    src = _input(cfg)
    res = run_pipeline(src, cfg)
    out = Path(cfg.io.output_dir)
    csv = cfg.io.csv_mirror
    tau_s = cfg.phase_tau_s if tau_s is None else tau_s
    cal, resid = res.calibrated, res.residual
    write_matrix(out / "calibrated_range_time.mat1", cal.values,
                 {"time_s": cal.times_s, "delay_s": cal.delay_grid_s},
                 {"quantity": "calibrated CIR", "units": "complex amplitude"}, csv)
    write_matrix(out / "residual_range_time.mat1", resid.values,
                 {"time_s": resid.times_s, "delay_s": resid.delay_grid_s},
                 {"quantity": "residual CIR", "units": "complex amplitude"}, csv)
    t, phase, mag = res.phase_trace(tau_s)
    i_tau = resid.delay_index(tau_s)
    write_table(out / "phase_trace.csv",
                {"time_s": t, "residual_phase_rad": phase, "residual_magnitude": mag,
                 "calibrated_phase_rad": np.unwrap(np.angle(cal.values[:, i_tau]))},
                {"tau_requested_s": tau_s, "tau_bin_s": float(resid.delay_grid_s[i_tau]),
                 "phase": "unwrapped along time"})
    if res.exported_frames:
        f0 = res.exported_frames[0]
        write_matrix(out / "delay_doppler_frames.mat1",
                     np.stack([f.values for f in res.exported_frames]),
                     {"frame_time_s": [f.center_time_s for f in res.exported_frames],
                      "delay_s": f0.delay_grid_s, "doppler_hz": f0.doppler_grid_hz},
                     {"quantity": "s(tau, nu; t)", "units": "complex"})
    dt = res.doppler_time
    write_matrix(out / "doppler_time.mat1", dt.power_db(),
                 {"doppler_hz": dt.doppler_grid_hz, "time_s": dt.times_s},
                 {"quantity": "incoherent power over delay", "units": "dB, 10log10(power/max)"},
                 csv)
    peaks = res.peaks
    empty = len(peaks) == 0
    write_table(out / "peak_track.csv",
                {"time_s": [p.center_time_s for p in peaks],
                 "delay_s": [p.bistatic_delay_s for p in peaks],
                 "doppler_hz": [p.doppler_hz for p in peaks],
                 "range_rate_m_s": [p.bistatic_range_rate_m_s for p in peaks],
                 "v_eff_m_s": [p.effective_radial_velocity_m_s for p in peaks]},
                {"empty": empty, "frames": int(res.detected.size),
                 "detected_frames": int(res.detected.sum())})
    if empty:
        log.warning("no frame rises above the detection floor; peak track is empty")
    for w in res.warnings:
        log.warning("%s", w)
    products = ["calibrated_range_time.mat1", "residual_range_time.mat1", "phase_trace.csv",
                "doppler_time.mat1", "peak_track.csv"]
    if res.exported_frames:
        products.append("delay_doppler_frames.mat1")
    info = {"input_sha256": file_sha256(src.path), "kept_snapshots": res.kept_snapshots,
            "dropped_snapshots": res.dropped_snapshots,
            "los_dominance_warnings": res.dominance_warning_count,
            "peak_track_empty": empty}
    data = manifest(cfg, "pipeline", products, res.warnings, info)
    _write_manifest(out, "manifest_pipeline.json", data)
    return data


def cmd_baseline(cfg: PipelineConfig, mode: str | None = None, index: int | None = None) -> dict:
    """Magnitude (single subcarrier) or PCA-score STFT baseline."""
    mode = mode or cfg.baseline_mode
    index = cfg.baseline_index if index is None else index
    src = _input(cfg)
    series = CfrSeries(src.radio, src.times_s, src.values(slice(None)), src.rssi_db)
    with stage("preprocess"):
        series = preprocess_series(series, cfg.preprocess)
    with stage("baseline"):
        try:
            tf = baseline_magnitude_stft(series, cfg.stft, mode, index, cfg.resample_step_s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    out = Path(cfg.io.output_dir)
    name = "baseline_time_frequency.mat1"
    write_matrix(out / name, tf.power_db(), {"doppler_hz": tf.doppler_grid_hz,
                                             "time_s": tf.times_s},
                 {"quantity": f"baseline {mode} {index}", "units": "dB, 10log10(power/max)"},
                 cfg.io.csv_mirror)
    data = manifest(cfg, "baseline", [name], [],
                    {"input_sha256": file_sha256(src.path), "mode": mode, "index": index})
    _write_manifest(out, "manifest_baseline.json", data)
    return data


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wifiradar", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "pipeline", "baseline"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON PipelineConfig (defaults if omitted)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="overrides the config seed")
        s.add_argument("--verbose", action="store_true")
        if name != "simulate":
            s.add_argument("--input", help="CSIR-v1 file")
        if name == "pipeline":
            s.add_argument("--tau", type=float, help="phase-trace delay in ns")
        if name == "baseline":
            s.add_argument("--mode", choices=("subcarrier", "pc"))
            s.add_argument("--index", type=int, help="subcarrier k or 1-based component")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return ConfigError.exit_code
    try:
        cfg = load_config(args.config) if args.config else from_dict(PipelineConfig, {})
        cfg = _resolve(cfg, args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # surfaced through the log and manifest
            if args.command == "simulate":
                cmd_simulate(cfg)
            elif args.command == "pipeline":
                cmd_pipeline(cfg, None if args.tau is None else args.tau * 1e-9)
            else:
                cmd_baseline(cfg, args.mode, args.index)
    except WifiRadarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
