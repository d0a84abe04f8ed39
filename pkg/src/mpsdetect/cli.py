"""Command-line surface: detect, eval, calibrate, synth."""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from mpsdetect import decide, dsp, evaluate, ingest, mps, roi, verify
from mpsdetect.config import Config, dump_config, load_config

_WORKER_CONFIG: Config | None = None


def _load_config_arg(path: str | None) -> Config:
    return load_config(path) if path else Config()


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


# ---------------------------------------------------------------- detect

def _init_worker(cfg: Config) -> None:
    global _WORKER_CONFIG
    _WORKER_CONFIG = cfg


def _detect_one(args):
    path, buffer = args
    report = decide.detect_buffer(buffer, _WORKER_CONFIG)
    return report.to_json_dict() | {"path": path}


def cmd_detect(args) -> int:
    cfg = _load_config_arg(args.config)
    out = Path(args.out) if args.out else None
    tasks = []
    for path in args.audio:
        try:
            clip = ingest.load_audio(path)
        except (OSError, ValueError) as exc:
            return _fail(str(exc))
        buffers = ingest.segment_buffers(clip, cfg.ingest.buffer_len_s, cfg.ingest.hop_s)
        tasks.extend((str(path), b) for b in buffers)

    started = time.perf_counter()
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
            records = list(pool.map(_detect_one, tasks, chunksize=1))
    else:
        _init_worker(cfg)
        records = [_detect_one(t) for t in tasks]
    elapsed = time.perf_counter() - started

    # Buffer order is already deterministic (tasks were submitted in order
    # and pool.map preserves it); renumber across files for a global index.
    for i, record in enumerate(records):
        record["buffer_index"] = i
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    if out is None:
        sys.stdout.write(lines)
    else:
        out.write_text(lines)
    n_hits = sum(1 for r in records if r["decision"] == decide.H1_SIGNAL)
    per_buffer = elapsed / len(records) if records else 0.0
    print(
        f"{len(records)} buffers, {n_hits} detections, {per_buffer:.3f} s/buffer",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------- eval

def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, num = text.split(":")
        return np.linspace(float(lo), float(hi), int(num))
    except ValueError as exc:
        raise ValueError(f"grid must be 'lo:hi:n', got {text!r}") from exc


def cmd_eval(args) -> int:
    try:
        report_lines = Path(args.reports).read_text().splitlines()
    except OSError as exc:
        return _fail(str(exc))
    reports = [json.loads(line) for line in report_lines if line.strip()]
    if not reports:
        return _fail(f"{args.reports}: no reports")

    labels_by_index = {}
    try:
        with open(args.labels, newline="") as fh:
            import csv as _csv

            reader = _csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["buffer_index", "label"]:
                return _fail(f"{args.labels}: expected header buffer_index,label")
            for row in reader:
                if not row or not row[0].strip():
                    continue
                labels_by_index[int(row[0])] = row[1].strip() == "click"
    except OSError as exc:
        return _fail(str(exc))

    utilities = []
    labels = []
    noise_hours = 0.0
    noise_utilities = []
    for r in reports:
        idx = r["buffer_index"]
        if idx not in labels_by_index:
            return _fail(f"buffer {idx} has no label in {args.labels}")
        utilities.append(r["utility"])
        labels.append(labels_by_index[idx])
        if not labels_by_index[idx]:
            noise_hours += r.get("duration_s", 0.0) / 3600.0
            noise_utilities.append(r["utility"])

    grid = _parse_grid(args.ut_grid)
    curve = evaluate.pr_sweep(utilities, labels, grid)
    if args.out:
        curve.to_csv(args.out)

    best = max(
        zip(curve.points, curve.counts),
        key=lambda pc: (_f1(pc[0][1], pc[0][2]), -pc[0][0]),
    )
    (u_t, precision, recall), (tp, fp, fn) = best
    summary = {
        "n_buffers": len(reports),
        "n_positive": int(sum(labels)),
        "best_point": {
            "u_t": u_t,
            "precision": precision,
            "recall": recall,
            "tp": tp,
            "fp": fp,
            "fn": fn,
        },
    }
    if noise_hours > 0:
        n_fa = sum(1 for u in noise_utilities if u is not None and u < u_t)
        summary["false_alarms_per_hour_at_best"] = n_fa / noise_hours
        summary["noise_hours"] = noise_hours
    print(json.dumps(summary, sort_keys=True))
    return 0


def _f1(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------- calibrate

def cmd_calibrate(args) -> int:
    cfg = _load_config_arg(args.config)
    try:
        clip = ingest.load_audio(args.audio)
        annotations = ingest.load_annotations(args.annotations)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))

    click_times = sorted(
        t for ann in annotations if ann.label == "click" for t in ann.click_times
    )
    if not click_times:
        return _fail(f"{args.annotations}: no annotated clicks")

    features = _collect_click_features(clip, click_times, cfg)
    if len(features) < 2:
        return _fail("too few usable annotated clicks to calibrate")
    try:
        result = verify.calibrate_thresholds(features, args.target_p)
    except ValueError as exc:
        return _fail(str(exc))

    payload = {
        "d_max_s": result.duration_max_s,
        "f_max_hz": result.freq_max_hz,
        "target_p": args.target_p,
        "achieved_p": result.achieved_p,
        "quantile": result.quantile,
        "sample_count": result.n_samples,
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _collect_click_features(clip, click_times, cfg: Config):
    """Pulse features of every annotated click reachable by the pipeline."""
    features = []
    grid = None
    for buffer in ingest.segment_buffers(clip, cfg.ingest.buffer_len_s, cfg.ingest.hop_s):
        t0 = buffer.t_start
        t1 = t0 + buffer.duration
        local = [t for t in click_times if t0 <= t < t1]
        if not local:
            continue
        band_hi = min(cfg.dsp.band_hi_hz, 0.98 * clip.sample_rate / 2.0)
        filtered = dsp.bandpass(buffer.clip, cfg.dsp.band_lo_hz, band_hi, cfg.dsp.filter_order)
        enhanced = dsp.tkeo(filtered)
        if grid is None:
            grid = decide._superlet_grid(cfg, clip.sample_rate)
        filtered_buffer = ingest.TimeBuffer(filtered, buffer.index, buffer.duration)
        for t in local:
            segment = _roi_at(filtered_buffer, enhanced, t, cfg)
            if segment is None:
                continue
            measurement = mps.measure_mps(segment, cfg.mps.intra_min_sep_s)
            if measurement is None:
                continue
            for pulse_t in (measurement.t_primary_s, measurement.t_secondary_s):
                try:
                    features.append(
                        verify.extract_pulse_features(
                            segment,
                            pulse_t,
                            grid,
                            base_cycles=cfg.dsp.superlet_base_cycles,
                            order_range=(cfg.dsp.superlet_order_min, cfg.dsp.superlet_order_max),
                            half_window_s=cfg.verify.feature_half_window_s,
                            single_precision=cfg.verify.single_precision,
                        )
                    )
                except verify.DegeneratePulseError:
                    continue
    return features


def _roi_at(buffer, enhanced, t_click, cfg: Config):
    """Build the ROI around an annotated click time (peak = strongest nearby sample)."""
    rate = enhanced.sample_rate
    i_nominal = int(round((t_click - enhanced.origin_time) * rate))
    half = int(0.005 * rate)
    lo = max(1, i_nominal - half)
    hi = min(len(enhanced.values) - 1, i_nominal + half)
    if hi <= lo:
        return None
    i_peak = lo + int(np.argmax(enhanced.values[lo:hi]))
    t_peak = enhanced.origin_time + i_peak / rate
    intensity = float(enhanced.values[i_peak])
    if intensity <= 0:
        return None
    event = roi.TransientEvent(
        peak_time=t_peak,
        peak_intensity=intensity,
        snr_db=0.0,
        window=(t_peak - cfg.roi.pre_s, t_peak + cfg.roi.post_s),
    )
    try:
        return roi.extract_roi(buffer, enhanced, event)
    except ValueError:
        return None


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    try:
        spec = _load_synth_spec(args.spec)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    if args.seed is not None:
        import dataclasses

        spec = dataclasses.replace(spec, seed=args.seed)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        clip, annotations = evaluate.synth_click_train(spec)
    except evaluate.OvercrowdedSpecError as exc:
        return _fail(str(exc))
    evaluate.write_audio(clip, out_dir / "audio.wav")
    ingest.write_annotations(annotations, out_dir / "annotations.csv")
    print(f"wrote {out_dir / 'audio.wav'} and {out_dir / 'annotations.csv'}", file=sys.stderr)
    return 0


def _load_synth_spec(path) -> evaluate.SynthSpec:
    import dataclasses

    valid = {f.name: f.type for f in dataclasses.fields(evaluate.SynthSpec)}
    defaults = evaluate.SynthSpec()
    updates = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in stripped.split("=", 1))
            if key.startswith("synth."):
                key = key[len("synth.") :]
            if key not in valid:
                raise ValueError(f"{path}:{lineno}: unknown synth key {key!r}")
            current = getattr(defaults, key)
            updates[key] = type(current)(value) if not isinstance(current, str) else value
    return dataclasses.replace(defaults, **updates)


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpsdetect",
        description="Detect sperm-whale echolocation clicks via multi-pulse-structure stability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="run the detector over WAV files")
    p_detect.add_argument("audio", nargs="+", help="input WAV paths")
    p_detect.add_argument("--config", help="flat key-value config file")
    p_detect.add_argument("--jobs", type=int, default=1, help="parallel buffer workers")
    p_detect.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p_detect.add_argument("--out", help="JSON-lines report path (default: stdout)")
    p_detect.set_defaults(func=cmd_detect)

    p_eval = sub.add_parser("eval", help="precision-recall sweep over stored reports")
    p_eval.add_argument("reports", help="JSON-lines report file from detect")
    p_eval.add_argument("labels", help="CSV with header buffer_index,label (click|noise)")
    p_eval.add_argument("--config", help=argparse.SUPPRESS)
    p_eval.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)
    p_eval.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p_eval.add_argument("--ut-grid", default="0:2.5:201", help="threshold grid lo:hi:n")
    p_eval.add_argument("--out", help="PR curve CSV path")
    p_eval.set_defaults(func=cmd_eval)

    p_cal = sub.add_parser("calibrate", help="fit duration/frequency limits from annotations")
    p_cal.add_argument("audio", help="WAV with annotated clicks")
    p_cal.add_argument("annotations", help="CSV time_s,label,source_id")
    p_cal.add_argument("--target-p", type=float, default=0.05)
    p_cal.add_argument("--config", help="flat key-value config file")
    p_cal.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)
    p_cal.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p_cal.add_argument("--out", help="thresholds JSON path (default: stdout)")
    p_cal.set_defaults(func=cmd_calibrate)

    p_synth = sub.add_parser("synth", help="generate a labelled synthetic clip")
    p_synth.add_argument("spec", help="flat key-value synthesis spec")
    p_synth.add_argument("--config", help=argparse.SUPPRESS)
    p_synth.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)
    p_synth.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_synth.add_argument("--out", help="output directory (default: cwd)")
    p_synth.set_defaults(func=cmd_synth)

    sub.add_parser("print-config", help="print the default config").set_defaults(func=_cmd_print_config)
    return parser


def _cmd_print_config(args) -> int:
    sys.stdout.write(dump_config(Config()))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
