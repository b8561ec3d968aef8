"""Release gate: one test per shipping criterion, each printing a verdict line.

Fast oracle-agreement checks come first; the end-to-end synthetic detection
and ablation studies (the slow part) run last. Every verdict line reports the
measured quantity next to its threshold so a log excerpt is self-contained.
"""

import json
import time

import numpy as np
import pytest

import oracles
from artps.config import config_from_dict, default_config
from artps.curiosity import train_weights
from artps.depth import DepthMap, DepthPostParams, PoissonParams, divergence, edge_guided_attenuation, fast_global_smooth, weighted_median_filter
from artps.enhance import BilateralParams, EnhanceParams, bilateral_filter
from artps.fuse import hysteresis_threshold, label_regions
from artps.localize import RotatedBox, iou, min_area_rect
from artps.metrics import dcg_at_k, kendall, ndcg_at_k, roc_auc, spearman
from artps.pipeline import run_pipeline
from artps.raster import Raster
from artps.synth import AnomalySpec, SceneSpec, generate_scene

VERDICTS: list[str] = []


def announce(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    VERDICTS.append(line)
    print(line)


SHADOW_DENSE = (
    AnomalySpec("rock", 6, (16.0, 48.0), (0.25, 0.6)),
    AnomalySpec("bright_rock", 2, (12.0, 32.0), (0.3, 0.7)),
    AnomalySpec("shadow_patch", 7, (40.0, 120.0), (0.6, 0.9)),
    AnomalySpec("specular_spot", 2, (8.0, 20.0), (0.5, 0.9)),
)


# ---------------------------------------------------------------------------
# 1. ranking/detection metrics agree with pair-count and rank oracles

def test_metric_implementations_match_oracles():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()

    worst_auroc = 0.0
    for _ in range(1000):
        n = int(rng.integers(5, 301))
        if rng.uniform() < 0.5:
            scores = rng.integers(0, 12, n).astype(np.float64)  # heavy ties
        else:
            scores = rng.standard_normal(n)
        labels = np.zeros(n, dtype=bool)
        labels[rng.permutation(n)[: max(1, int(n * rng.uniform(0.1, 0.9)))]] = True
        if labels.all() or not labels.any():
            continue
        got = roc_auc(scores, labels.astype(int))
        want = oracles.auroc_pairs_reference(scores, labels)
        worst_auroc = max(worst_auroc, abs(got - want))

    worst_corr = 0.0
    for _ in range(200):
        n = int(rng.integers(4, 121))
        a = rng.integers(0, 9, n).astype(np.float64)
        b = rng.integers(0, 9, n).astype(np.float64)
        if np.ptp(a) == 0 or np.ptp(b) == 0:
            continue
        worst_corr = max(worst_corr, abs(kendall(a, b) - oracles.kendall_reference(a, b)))
        worst_corr = max(worst_corr, abs(spearman(a, b) - oracles.spearman_reference(a, b)))

    ideal = np.sort(rng.uniform(0.1, 4.0, 15))[::-1]
    ndcg_ideal = ndcg_at_k(ideal, 15)
    dcg_err = abs(dcg_at_k(np.array([3.0, 2.0]), 2) - 8.8928)
    elapsed = time.perf_counter() - t0

    ok = (
        worst_auroc <= 1e-12
        and worst_corr <= 1e-9
        and abs(ndcg_ideal - 1.0) <= 1e-12
        and dcg_err <= 1e-4
        and elapsed < 10.0
    )
    announce(
        "metric-oracles",
        ok,
        f"AUROC max |err| {worst_auroc:.2e} (<=1e-12), "
        f"rank-corr max |err| {worst_corr:.2e}, nDCG(ideal) {ndcg_ideal:.12f}, "
        f"DCG pin |err| {dcg_err:.2e} (<=1e-4), elapsed {elapsed:.1f}s (<10s)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 2. screened gradient-domain smoother vs dense direct solve

def test_depth_smoother_matches_dense_solve():
    rng = np.random.default_rng(11)
    params = DepthPostParams(poisson=PoissonParams(max_iters=200_000, tolerance=1e-11))
    worst = 0.0
    monotone = True
    for _ in range(20):
        d = DepthMap(rng.uniform(0.5, 3.0, (6, 6)).astype(np.float32))
        edges = Raster(rng.uniform(0, 1, (6, 6)).astype(np.float32))
        g = edge_guided_attenuation(d, edges, float(rng.uniform(1.0, 8.0)))
        out, res = fast_global_smooth(d, g, params, residual_every=1)
        dense = oracles.poisson_dense_reference(d.data, divergence(g))
        worst = max(worst, float(np.max(np.abs(out.data.astype(np.float64) - dense))))
        hist = np.array(res.residual_history)
        monotone = monotone and bool(np.all(np.diff(hist) <= 1e-12))
    ok = worst <= 1e-4 and monotone
    announce(
        "depth-smoother",
        ok,
        f"20 random 6x6 problems, max |iterative - dense| {worst:.2e} (<=1e-4), "
        f"residual monotone non-increasing: {monotone}",
    )
    assert ok


# ---------------------------------------------------------------------------
# 3. local image/geometry operators vs brute-force oracles

def test_local_operators_match_brute_force():
    rng = np.random.default_rng(13)

    bil_worst = 0.0
    for window in (3, 5, 7):
        a = rng.uniform(0, 1, (7, 7)).astype(np.float32)
        params = EnhanceParams(
            bilateral=BilateralParams(window=window, sigma_s=2.0, sigma_r=0.15)
        )
        got = bilateral_filter(Raster(a), params)
        want = oracles.bilateral_reference(a, window, 2.0, 0.15)
        bil_worst = max(bil_worst, float(np.max(np.abs(got.data.astype(np.float64) - want))))

    wm_exact = True
    for _ in range(10):
        dep = rng.uniform(0.5, 3.0, (6, 6)).astype(np.float32)
        guide = rng.uniform(0, 1, (6, 6)).astype(np.float32)
        got = weighted_median_filter(DepthMap(dep), Raster(guide), 3, 0.2)
        want = oracles.wmf_reference(dep, guide, np.ones((6, 6), bool), 3, 0.2)
        wm_exact = wm_exact and bool(np.max(np.abs(got.data.astype(np.float64) - want)) <= 1e-6)

    hyst_exact = True
    cc_exact = True
    for _ in range(10):
        a = rng.uniform(0, 1, (12, 12)).astype(np.float32)
        got_mask = hysteresis_threshold(Raster(a), 0.35, 0.7)
        hyst_exact = hyst_exact and bool(
            np.array_equal(got_mask, oracles.hysteresis_reference(a, 0.35, 0.7))
        )
        mask = rng.uniform(0, 1, (12, 12)) < 0.4
        regions = label_regions(mask, 1)
        got_parts = {frozenset(map(tuple, p.tolist())) for p in regions.pixels}
        want_parts = set(oracles.components_reference(mask))
        cc_exact = cc_exact and got_parts == want_parts

    rect_worst = 0.0
    rect_contains = True
    for _ in range(20):
        pts = rng.uniform(0, 40, (int(rng.integers(3, 12)), 2))
        box = min_area_rect(pts)
        rect_worst = max(rect_worst, abs(box.area - oracles.min_rect_area_reference(pts)))
        rect_contains = rect_contains and oracles.box_contains(box, pts)

    iou_worst = 0.0
    for _ in range(20):
        b1 = RotatedBox(
            float(rng.uniform(5, 15)), float(rng.uniform(5, 15)),
            float(rng.uniform(4, 12)), float(rng.uniform(2, 4)), float(rng.uniform(-90, 89)),
        )
        b2 = RotatedBox(
            float(rng.uniform(5, 15)), float(rng.uniform(5, 15)),
            float(rng.uniform(4, 12)), float(rng.uniform(2, 4)), float(rng.uniform(-90, 89)),
        )
        iou_worst = max(iou_worst, abs(iou(b1, b2) - oracles.rect_iou_rasterized(b1, b2)))

    ok = (
        bil_worst <= 1e-6
        and wm_exact
        and hyst_exact
        and cc_exact
        and rect_worst <= 1e-6
        and rect_contains
        and iou_worst < 0.02
    )
    announce(
        "local-operators",
        ok,
        f"bilateral max |err| {bil_worst:.2e} (<=1e-6), weighted-median exact: {wm_exact}, "
        f"hysteresis exact: {hyst_exact}, components exact: {cc_exact}, "
        f"min-rect area |err| {rect_worst:.2e} (<=1e-6, all points enclosed: {rect_contains}), "
        f"rotated IoU max |err| {iou_worst:.3f} (<0.02)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 4. nonnegative ridge training

def test_weight_training_recovery_and_shrinkage():
    rng = np.random.default_rng(17)
    alpha_true = np.array([0.5, 0.1, 0.3, 0.0, 0.2])
    x = rng.uniform(0.1, 1.0, (200, 5))
    y = x @ alpha_true
    model = train_weights(x, y, lam=1e-6)
    rel_err = float(
        np.linalg.norm(np.array(model.alpha) - alpha_true) / np.linalg.norm(alpha_true)
    )
    nonneg = all(a >= 0.0 for a in model.alpha)

    norms = []
    for lam in (1e-6, 1e-2, 1.0, 100.0, 1e5):
        norms.append(float(np.linalg.norm(train_weights(x, y, lam=lam).alpha)))
    shrink_monotone = all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))
    shrinks_to_zero = norms[-1] < 0.1 * norms[0]

    ok = rel_err <= 0.01 and nonneg and shrink_monotone and shrinks_to_zero
    announce(
        "weight-training",
        ok,
        f"planted-weight relative error {rel_err:.4f} (<=0.01), all weights >= 0: {nonneg}, "
        f"norms over 5-point ridge sweep {['%.3f' % n for n in norms]} "
        f"monotone: {shrink_monotone}",
    )
    assert ok


# ---------------------------------------------------------------------------
# 5. end-to-end detection quality and speed on synthetic scenes

def test_end_to_end_detection_quality():
    cfg = default_config()
    aurocs = []
    times = []
    for seed in range(20):
        bundle = generate_scene(SceneSpec(seed=seed))
        t0 = time.perf_counter()
        result = run_pipeline(bundle.image, bundle.depth, cfg, include_timings=False)
        times.append(time.perf_counter() - t0)
        fused = result.fused.data.astype(np.float64).ravel()
        mask = bundle.anomaly_mask.ravel().astype(int)
        aurocs.append(roc_auc(fused, mask))
    mean_auroc = float(np.mean(aurocs))
    max_time = float(np.max(times))
    ok = mean_auroc >= 0.90 and max_time < 2.0
    announce(
        "end-to-end-detection",
        ok,
        f"20 scenes at 512x512: fused-map AUROC mean {mean_auroc:.4f} (>=0.90, "
        f"min {min(aurocs):.4f}), slowest run {max_time:.2f}s (<2s)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 6. photometric suppression lowers false alarms on shadow-heavy scenes

def test_suppression_lowers_false_alarm_rate():
    cfg_on = default_config()
    cfg_off = config_from_dict({"fusion": {"suppression": {"strength": 0.0}}})
    wins = 0
    pairs = []
    for seed in range(10):
        bundle = generate_scene(SceneSpec(seed=seed, anomalies=SHADOW_DENSE))
        mask = bundle.anomaly_mask.ravel()
        fprs = []
        for cfg in (cfg_on, cfg_off):
            result = run_pipeline(bundle.image, bundle.depth, cfg, include_timings=False)
            fused = result.fused.data.astype(np.float64).ravel()
            fprs.append(oracles.fpr_at_recall(fused, mask, 0.8))
        pairs.append(tuple(fprs))
        if fprs[0] < fprs[1]:
            wins += 1
    ok = wins >= 9
    announce(
        "shadow-suppression",
        ok,
        f"10 shadow-dense scenes: FPR@recall-0.8 strictly lower with suppression in "
        f"{wins}/10 (need >=9); mean FPR on/off "
        f"{np.mean([p[0] for p in pairs]):.3f}/{np.mean([p[1] for p in pairs]):.3f}",
    )
    assert ok


# ---------------------------------------------------------------------------
# 7. determinism of CLI outputs

def test_cli_outputs_deterministic(tmp_path):
    from artps.cli import main

    spec_doc = {
        "seed": 3,
        "dims": [96, 96],
        "anomalies": [
            {"kind": "rock", "count": 3, "size_range": [14.0, 30.0], "contrast_range": [0.35, 0.7]},
        ],
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec_doc))

    bundle_dirs = []
    for sub in ("s1", "s2"):
        out = tmp_path / sub
        assert main(["synth", "--spec", str(spec_path), "--out", str(out)]) == 0
        bundle_dirs.append(out)
    synth_identical = all(
        (bundle_dirs[0] / p.name).read_bytes() == (bundle_dirs[1] / p.name).read_bytes()
        for p in bundle_dirs[0].iterdir()
    )

    run_dirs = []
    for sub in ("r1", "r2"):
        out = tmp_path / sub
        code = main(
            [
                "run",
                "--image", str(bundle_dirs[0] / "scene_image.png"),
                "--depth", str(bundle_dirs[0] / "scene_depth.ard1"),
                "--out", str(out),
                "--no-timings",
            ]
        )
        assert code == 0
        run_dirs.append(out)
    report_identical = (
        (run_dirs[0] / "report.json").read_bytes() == (run_dirs[1] / "report.json").read_bytes()
    )

    ok = synth_identical and report_identical
    announce(
        "determinism",
        ok,
        f"synthetic bundles byte-identical per seed: {synth_identical}, "
        f"repeat runs byte-identical without timings: {report_identical}",
    )
    assert ok


# ---------------------------------------------------------------------------
# 8. HTTP service report equals the CLI report

def test_service_report_equals_cli(tmp_path):
    fastapi = pytest.importorskip("fastapi")
    from fastapi.testclient import TestClient

    from artps.cli import main
    from artps.service import create_app
    from artps.synth import write_bundle

    spec = SceneSpec(
        seed=6,
        dims=(96, 96),
        anomalies=(AnomalySpec("rock", 3, (14.0, 30.0), (0.35, 0.7)),),
    )
    paths = write_bundle(generate_scene(spec), str(tmp_path / "scene"))
    app = create_app(frame_dir=str(tmp_path / "frames"))
    with TestClient(app) as client:
        resp = client.post(
            "/api/frames",
            files={
                "image": ("scene.png", open(paths["image"], "rb").read(), "image/png"),
                "depth": (
                    "scene.ard1",
                    open(paths["depth"], "rb").read(),
                    "application/octet-stream",
                ),
            },
        )
        assert resp.status_code == 201
        frame_id = resp.json()["frame_id"]
        service_report = client.post("/api/run", json={"frame_id": frame_id}).json()["report"]

    out = tmp_path / "cli_run"
    code = main(
        [
            "run",
            "--image", paths["image"],
            "--depth", paths["depth"],
            "--out", str(out),
            "--frame-id", frame_id,
            "--no-timings",
        ]
    )
    assert code == 0
    cli_report = json.loads((out / "report.json").read_text())
    ok = cli_report == service_report
    announce(
        "service-parity",
        ok,
        f"report via HTTP equals report via CLI field-for-field: {ok} "
        f"({len(service_report['regions'])} regions)",
    )
    assert ok
