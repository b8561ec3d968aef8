"""Command-line entry points: run, eval, train, synth, serve.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
arguments. Log level comes from the ARTPS_LOG environment variable
(DEBUG/INFO/WARNING/ERROR, default WARNING).
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import socket
import sys

import numpy as np

log = logging.getLogger("artps")


def _setup_logging() -> None:
    level_name = os.environ.get("ARTPS_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _frame_stem(image_path: str) -> str:
    stem = os.path.splitext(os.path.basename(image_path))[0]
    if stem.endswith("_image"):
        stem = stem[: -len("_image")]
    return stem


# ---------------------------------------------------------------------------
# run


def cmd_run(args) -> int:
    from artps.config import ConfigError, default_config, load_config
    from artps.curiosity import load_model
    from artps.pipeline import load_inputs, run_pipeline, write_artifacts
    from artps.raster import read_png

    try:
        cfg = load_config(args.config) if args.config else default_config()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        image, depth = load_inputs(args.image, args.depth, cfg)
        model = load_model(args.model) if args.model else None
        sidecar = None
        if cfg.known_value.mode == "sidecar":
            if cfg.known_value.path is None:
                print("error: sidecar known-value mode needs a path", file=sys.stderr)
                return 2
            sidecar = read_png(cfg.known_value.path).data
        frame_id = args.frame_id or _frame_stem(args.image)
        result = run_pipeline(
            image,
            depth,
            cfg,
            model=model,
            known_sidecar=sidecar,
            frame_id=frame_id,
            include_timings=not args.no_timings,
        )
        write_components = bool(cfg.io.get("write_components", False))
        paths = write_artifacts(result, args.out, write_components=write_components)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    log.info("run complete: %d regions", len(result.scored))
    print(paths["report"])
    return 0


# ---------------------------------------------------------------------------
# eval


def _match_gains(report: dict, truth: dict) -> list[int]:
    """True relevance per predicted region, in predicted rank order."""
    from artps.localize import RotatedBox, iou

    truth_boxes = [
        (RotatedBox(**t["box"]), int(t["relevance"])) for t in truth["regions"]
    ]
    gains = []
    for region in report["regions"]:
        b = region["box"]
        pred = RotatedBox(b["cx"], b["cy"], b["w"], b["h"], b["angle_deg"])
        best = 0
        for tb, rel in truth_boxes:
            if iou(pred, tb) > 0.1:
                best = max(best, rel)
        gains.append(best)
    return gains


def _truth_paths(truth: str, frame: str) -> tuple[str, str, str]:
    """Locate the truth JSON, anomaly mask, and depth raster for a frame.

    ``truth`` is either a directory of per-frame artifacts or the path to a
    single ``*_truth.json`` file; in the file form the mask and depth are
    looked up as siblings named after the frame.
    """
    truth_dir = truth
    truth_path = None
    if os.path.isfile(truth):
        truth_dir = os.path.dirname(truth) or "."
        truth_path = truth
    expected = os.path.join(truth_dir, f"{frame}_truth.json")
    if truth_path is None or os.path.exists(expected):
        truth_path = expected
    mask_path = os.path.join(truth_dir, f"{frame}_anomaly_mask.png")
    depth_path = os.path.join(truth_dir, f"{frame}_depth.ard1")
    return truth_path, mask_path, depth_path


def _eval_frame(report_path: str, truth: str) -> tuple[dict, list[str]]:
    from artps import metrics
    from artps.depth import read_ard1
    from artps.raster import read_png

    warnings: list[str] = []
    with open(report_path) as fh:
        report = json.load(fh)
    frame = report["frame"]
    run_dir = os.path.dirname(report_path)
    out: dict = {"frame": frame}

    truth_path, mask_path, depth_path = _truth_paths(truth, frame)

    fused_path = os.path.join(run_dir, "fused.png")
    if os.path.exists(mask_path) and os.path.exists(fused_path):
        fused = read_png(fused_path).data.astype(np.float64).ravel()
        mask = (read_png(mask_path).data.astype(np.float64).ravel() > 0.5).astype(int)
        if mask.min() == mask.max():
            warnings.append(f"{frame}: single-class mask, detection metrics skipped")
        else:
            det = metrics.f1_fpr(fused, mask, 0.5)
            det["auroc"] = metrics.roc_auc(fused, mask)
            det["auprc"] = metrics.pr_auc(fused, mask)
            out["detection"] = det

    if os.path.exists(truth_path):
        with open(truth_path) as fh:
            truth = json.load(fh)
        gains = _match_gains(report, truth)
        if not gains:
            warnings.append(f"{frame}: no predicted regions, ranking metrics zeroed")
            out["ranking"] = {"ndcg_at_10": 0.0}
        else:
            rank_out = {"ndcg_at_10": metrics.ndcg_at_k(gains, 10)}
            scores = [r["curiosity"] for r in report["regions"]]
            if len(gains) >= 2 and len(set(gains)) > 1 and len(set(scores)) > 1:
                rank_out["spearman"] = metrics.spearman(scores, gains)
                rank_out["kendall"] = metrics.kendall(scores, gains)
            out["ranking"] = rank_out

    refined_path = os.path.join(run_dir, "depth_refined.ard1")
    if os.path.exists(depth_path) and os.path.exists(refined_path):
        d_true = read_ard1(depth_path).astype(np.float64).ravel()
        d_hat = read_ard1(refined_path).astype(np.float64).ravel()
        if d_true.shape == d_hat.shape and np.all(d_true > 0) and np.all(d_hat > 0):
            dep = metrics.depth_errors(d_true, d_hat)
            for i, delta in enumerate(metrics.DELTA_THRESHOLDS, start=1):
                dep[f"delta{i}"] = metrics.delta_accuracy(d_true, d_hat, delta)
            out["depth"] = dep
    return out, warnings


def cmd_eval(args) -> int:
    reports = sorted(glob.glob(os.path.join(args.reports, "**", "report.json"), recursive=True))
    if os.path.isfile(args.reports):
        reports = [args.reports]
    if not reports:
        print(f"error: no report.json found under {args.reports}", file=sys.stderr)
        return 1
    frames = []
    warnings: list[str] = []
    for rp in reports:
        try:
            frame_metrics, w = _eval_frame(rp, args.truth)
        except (ValueError, OSError) as exc:
            print(f"error: {rp}: {exc}", file=sys.stderr)
            return 1
        frames.append(frame_metrics)
        warnings.extend(w)

    aggregate: dict = {}
    for section in ("detection", "ranking", "depth"):
        keys: set[str] = set()
        for f in frames:
            keys.update(f.get(section, {}).keys())
        agg = {}
        for key in sorted(keys):
            vals = [f[section][key] for f in frames if key in f.get(section, {})]
            if vals:
                agg[key] = float(np.mean(vals))
        if agg:
            aggregate[section] = agg
    doc = {"frames": frames, "aggregate": aggregate, "warnings": warnings}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out)
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# train


def _parse_sweep(spec: str) -> list[float]:
    try:
        lo_s, hi_s, n_s = spec.split(":")
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
    except ValueError as exc:
        raise ValueError(f"sweep must be lo:hi:n, got {spec!r}") from exc
    if lo <= 0 or hi < lo or n < 1:
        raise ValueError("sweep needs 0 < lo <= hi and n >= 1")
    if n == 1:
        return [lo]
    return list(np.geomspace(lo, hi, n))


def cmd_train(args) -> int:
    from artps import metrics
    from artps.curiosity import (
        CuriosityModel,
        fit_normalization,
        save_model,
        train_weights,
    )
    from artps.synth import SplitMix64

    try:
        with open(args.features) as fh:
            feats_doc = json.load(fh)
        with open(args.labels) as fh:
            labels_doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    label_by_key = {(l["frame"], l["region_id"]): float(l["relevance"]) for l in labels_doc}
    rows = []
    targets = []
    for entry in feats_doc:
        key = (entry["frame"], entry["region_id"])
        if key in label_by_key:
            rows.append([float(v) for v in entry["features"]])
            targets.append(label_by_key[key])
    if not rows:
        print("error: no (frame, region_id) overlap between features and labels", file=sys.stderr)
        return 2
    if len(rows) < 5:
        print(f"error: need at least 5 labeled examples, got {len(rows)}", file=sys.stderr)
        return 2

    raw = np.array(rows, dtype=np.float64)
    y = np.array(targets, dtype=np.float64)
    ranges = fit_normalization(raw)
    x_all = np.stack(
        [
            np.clip(
                (raw[:, k] - ranges[k][0]) / max(ranges[k][1] - ranges[k][0], 1e-12),
                0.0,
                1.0,
            )
            if ranges[k][1] > ranges[k][0]
            else np.full(len(raw), 0.5)
            for k in range(raw.shape[1])
        ],
        axis=1,
    )

    sweep_rows = []
    if args.sweep:
        try:
            lams = _parse_sweep(args.sweep)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        # deterministic shuffled split, 80/20
        rng = SplitMix64(args.seed)
        idx = list(range(len(x_all)))
        for i in range(len(idx) - 1, 0, -1):
            j = rng.next_u64() % (i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        n_val = max(len(idx) // 5, 1)
        val_idx = np.array(idx[:n_val])
        trn_idx = np.array(idx[n_val:])
        if len(trn_idx) < 5:
            trn_idx = np.array(idx)  # tiny datasets train on everything
        best: tuple[float, float, CuriosityModel] | None = None
        for lam in lams:
            m = train_weights(x_all[trn_idx], y[trn_idx], lam, ranges)
            val_scores = x_all[val_idx] @ np.asarray(m.alpha)
            order = np.argsort(-val_scores, kind="stable")
            ndcg = metrics.ndcg_at_k(y[val_idx][order], 10)
            sweep_rows.append(
                {
                    "lambda": lam,
                    "val_ndcg_at_10": ndcg,
                    "alpha_norm": float(np.linalg.norm(m.alpha)),
                }
            )
            if best is None or ndcg > best[0] + 1e-12:
                best = (ndcg, lam, m)
        assert best is not None
        model = train_weights(x_all, y, best[1], ranges)
        chosen = best[1]
    else:
        lam = args.lam if args.lam is not None else 1e-3
        model = train_weights(x_all, y, lam, ranges)
        chosen = lam

    save_model(model, args.out)
    summary = {
        "out": args.out,
        "lambda": chosen,
        "alpha": list(model.alpha),
        "converged": model.converged,
        "n_examples": len(x_all),
    }
    if sweep_rows:
        summary["sweep"] = sweep_rows
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    from artps.synth import SceneSpec, generate_scene, write_bundle

    try:
        if args.spec:
            with open(args.spec) as fh:
                doc = json.load(fh)
            base = SceneSpec.from_dict(doc)
        else:
            base = SceneSpec(seed=args.seed)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: invalid scene spec: {exc}", file=sys.stderr)
        return 2
    import dataclasses as _dc

    for i in range(args.count):
        spec = _dc.replace(base, seed=(base.seed + i) & ((1 << 64) - 1))
        bundle = generate_scene(spec)
        stem = "scene" if args.count == 1 else f"scene_{i:03d}"
        paths = write_bundle(bundle, args.out, stem=stem)
        for warning in bundle.warnings:
            log.warning("%s: %s", stem, warning)
        print(paths["image"])
    return 0


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    from artps.config import ConfigError, default_config, load_config

    try:
        cfg = load_config(args.config) if args.config else default_config()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        host, port_s = args.addr.rsplit(":", 1)
        port = int(port_s)
    except ValueError:
        print(f"error: --addr must be host:port, got {args.addr!r}", file=sys.stderr)
        return 2
    host = host or "127.0.0.1"

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        print(f"error: cannot bind {host}:{port}: {exc}", file=sys.stderr)
        return 1
    finally:
        probe.close()

    import uvicorn

    from artps.service import create_app

    app = create_app(cfg, frame_dir=args.frame_dir)
    print(f"artps service listening on http://{host}:{port}", flush=True)
    level = os.environ.get("ARTPS_LOG", "warning").lower()
    if level not in ("critical", "error", "warning", "info", "debug", "trace"):
        level = "warning"
    uvicorn.run(app, host=host, port=port, log_level=level)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="artps",
        description="Explainable target prioritization: anomaly components, "
        "fused maps, rotated-box candidates, curiosity ranking.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the pipeline on one frame")
    p_run.add_argument("--config", default=None, help="pipeline config JSON")
    p_run.add_argument("--image", required=True, help="input image PNG")
    p_run.add_argument("--depth", default=None, help="optional depth (ARD1 or 16-bit PNG)")
    p_run.add_argument("--model", default=None, help="curiosity model JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--frame-id", default=None, help="frame id for the report")
    p_run.add_argument(
        "--no-timings",
        action="store_true",
        help="omit timings from the report for byte-identical determinism checks",
    )
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="score run reports against ground truth")
    p_eval.add_argument("--reports", required=True, help="report.json file or directory of runs")
    p_eval.add_argument(
        "--truth",
        required=True,
        help="truth JSON file or directory with *_truth.json / masks / depth",
    )
    p_eval.add_argument("--out", default=None, help="write metrics JSON here instead of stdout")
    p_eval.set_defaults(func=cmd_eval)

    p_train = sub.add_parser("train", help="fit nonnegative curiosity weights")
    p_train.add_argument("--features", required=True, help="JSON array of {frame, region_id, features}")
    p_train.add_argument("--labels", required=True, help="JSON array of {frame, region_id, relevance}")
    p_train.add_argument("--lambda", dest="lam", type=float, default=None, help="ridge strength")
    p_train.add_argument("--sweep", default=None, help="lambda sweep lo:hi:n (geometric)")
    p_train.add_argument("--seed", type=int, default=0, help="split seed for sweep validation")
    p_train.add_argument("--out", required=True, help="output model JSON")
    p_train.set_defaults(func=cmd_train)

    p_synth = sub.add_parser("synth", help="generate synthetic scenes with ground truth")
    p_synth.add_argument("--spec", default=None, help="scene spec JSON")
    p_synth.add_argument("--seed", type=int, default=0, help="seed when no spec file is given")
    p_synth.add_argument("--count", type=int, default=1, help="number of scenes (seeds seed..seed+n-1)")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.set_defaults(func=cmd_synth)

    p_serve = sub.add_parser("serve", help="start the local HTTP service")
    p_serve.add_argument("--addr", default="127.0.0.1:8765", help="bind address host:port")
    p_serve.add_argument("--config", default=None, help="default pipeline config JSON")
    p_serve.add_argument("--frame-dir", default=None, help="frame store directory (default: temp)")
    p_serve.set_defaults(func=cmd_serve)
    return ap


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
