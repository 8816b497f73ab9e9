"""Acceptance suite: one test per top-level guarantee of the package.

Each test prints a single PASS/FAIL line (visible under pytest -s) and
asserts the same condition, so the suite is readable as a checklist:

  01 pinhole reduction      zero-offset mapping == ideal pinhole, <=1e-6 px
  02 full coverage          600x9600 remap on the surround rig, no holes
  03 stitch fidelity        MAE < 2/255 vs the analytic panorama off-seam
  04 determinism            byte-identical outputs for --jobs 1 vs --jobs 8
  05 scan equivalence       scans match a sequential oracle at 1e-12 rel
  06 gradient suite         finite differences within 1e-4 for every op
  07 shape contracts        [200,200,K] logits and all ablation configs
  08 toy overfit            mIoU >= 0.9 in 500 steps, bit-deterministic
  09 metrics arithmetic     six-class mean IoU reproduces 51.1 +- 0.05
  10 stats exactness        pixel/presence ratios equal hand fractions
"""

from __future__ import annotations

import math
import time

import numpy as np

from panobev.camera import Intrinsics, project_to_image
from panobev.cli import main
from panobev.imageio import write_rgb
from panobev.metrics import ConfusionAccumulator, miou
from panobev.model import ModelConfig, PAPER_CONFIG, init_params, model_forward
from panobev.nn import Tensor, grad_check_suite
from panobev.nn.scan import ScanParams, scan_2d, selective_scan
from panobev.sphere import image_plane_distance, panorama_to_camera_pixel, view_direction
from panobev.stats import ClassEntry, ClassTable, stats_report
from panobev.stitcher import (
    CameraSpec,
    build_remap_table,
    build_sphere_cameras,
    save_rig,
    seam_mask,
    stitch,
)
from panobev.synthetic import render_panorama_reference, toy_dataset
from panobev.train import train_toy


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"{name}: {detail}"


def test_01_pinhole_reduction():
    # with the optical center on the rig origin the sphere radius cancels
    # and the panorama-to-pixel map must equal a plain pinhole projection
    rng = np.random.default_rng(42)
    start = time.perf_counter()
    worst = 0.0
    rays = 0
    for k in range(15):
        width = int(rng.integers(400, 1600))
        height = int(rng.integers(300, 1200))
        fov = rng.uniform(math.radians(50.0), math.radians(110.0))
        yaw = rng.uniform(-math.pi, math.pi)
        pitch = rng.uniform(-math.radians(10.0), math.radians(10.0))
        focal = image_plane_distance(width, fov)
        spec = CameraSpec(
            name=f"c{k}",
            order_index=1,
            yaw=yaw,
            pitch=pitch,
            roll=0.0,
            translation_mm=rng.uniform(-2000.0, 2000.0, size=3),
            intr=Intrinsics(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0,
                            skew=0.0, f_mm=5.5),
            width=width,
            height=height,
            fov=fov,
        )
        cam = build_sphere_cameras([spec])[0]  # single camera: zero offset
        assert cam.radius == cam.r_plane
        rot = np.stack([cam.basis_u, cam.basis_v, cam.tangent / cam.radius])
        v_half = math.atan2(height / 2.0, focal)
        hits = 0
        attempts = 0
        while hits < 700:
            attempts += 1
            assert attempts < 20000, "in-FOV sampling failed to converge"
            u = yaw + rng.uniform(-0.45 * fov, 0.45 * fov)
            v = pitch + rng.uniform(-0.8 * v_half, 0.8 * v_half)
            ray = view_direction(u, v)
            got = panorama_to_camera_pixel(cam, ray)
            if got is None:  # corner of the angular box, outside the image
                continue
            want = project_to_image(rot @ ray.as_array(), spec.intr)
            worst = max(worst, abs(got[0] - want[0]), abs(got[1] - want[1]))
            hits += 1
            rays += 1
    elapsed = time.perf_counter() - start
    _report(
        "01 pinhole reduction",
        worst <= 1e-6 and elapsed < 1.0 and rays >= 10000,
        f"max err {worst:.3e} px over {rays} rays in {elapsed:.2f}s",
    )


def test_02_full_coverage(rig):
    start = time.perf_counter()
    table = build_remap_table(rig, height=600, width=9600, jobs=1)
    elapsed = time.perf_counter() - start
    invalid = int(np.count_nonzero(table.camera_id == -1))
    _report(
        "02 full coverage",
        invalid == 0 and elapsed < 30.0,
        f"{invalid} unresolved pixels of {600 * 9600} in {elapsed:.1f}s single-threaded",
    )


def test_03_stitch_fidelity(rig_views, full_remap):
    start = time.perf_counter()
    pano = stitch(rig_views, full_remap, jobs=4)
    reference = render_panorama_reference(600, 9600)
    elapsed = time.perf_counter() - start
    keep = ~seam_mask(full_remap, band=3)
    mae = float(np.mean(np.abs(pano[keep] / 255.0 - reference[keep])))
    _report(
        "03 stitch fidelity",
        mae < 2.0 / 255.0 and elapsed < 60.0,
        f"off-seam MAE {mae * 255.0:.3f}/255 over {int(keep.sum())} px in {elapsed:.1f}s",
    )


def test_04_determinism(rig, rig_views, tmp_path):
    rig_path = tmp_path / "rig.json"
    save_rig(rig_path, rig)
    images = tmp_path / "images"
    images.mkdir()
    names = {c.order_index: c.name for c in rig}
    for cam_id, img in rig_views.items():
        write_rgb(images / f"{names[cam_id]}.png", img)

    outputs = {}
    for jobs in ("1", "8"):
        remap = tmp_path / f"j{jobs}.remap"
        pano = tmp_path / f"j{jobs}.png"
        assert main(["remap-build", "--rig", str(rig_path),
                     "--out", str(remap), "--jobs", jobs]) == 0
        assert main(["stitch", "--rig", str(rig_path), "--remap", str(remap),
                     "--images", str(images), "--out", str(pano),
                     "--jobs", jobs]) == 0
        outputs[jobs] = (remap.read_bytes(), pano.read_bytes())
    same_remap = outputs["1"][0] == outputs["8"][0]
    same_pano = outputs["1"][1] == outputs["8"][1]
    _report(
        "04 determinism",
        same_remap and same_pano,
        f"remap identical: {same_remap} ({len(outputs['1'][0])} bytes), "
        f"panorama identical: {same_pano} ({len(outputs['1'][1])} bytes)",
    )


def _phi1(z: np.ndarray) -> np.ndarray:
    out = np.ones_like(z)
    nz = z != 0.0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def _oracle_scan(x, a, b, c, delta):
    """Sequential zero-order-hold recurrence, plain numpy."""
    z = delta[:, None] * a
    a_bar = np.exp(z)
    b_bar = delta[:, None] * _phi1(z) * b
    h = np.zeros_like(a)
    out = np.empty_like(x)
    for t in range(x.shape[0]):
        h = a_bar * h + b_bar * x[t][:, None]
        out[t] = (c * h).sum(axis=1)
    return out


def _oracle_scan_2d(x, plist):
    h, w, _ = x.shape
    flat = x.reshape(h * w, -1)
    col = x.transpose(1, 0, 2).reshape(w * h, -1)
    args = [(p.a.data, p.b.data, p.c.data, p.delta.data) for p in plist]
    y0 = _oracle_scan(flat, *args[0]).reshape(h, w, -1)
    y1 = _oracle_scan(flat[::-1], *args[1])[::-1].reshape(h, w, -1)
    y2 = _oracle_scan(col, *args[2]).reshape(w, h, -1).transpose(1, 0, 2)
    y3 = _oracle_scan(col[::-1], *args[3])[::-1].reshape(w, h, -1).transpose(1, 0, 2)
    return y0 + y1 + y2 + y3


def _random_scan_params(rng, channels, state):
    return ScanParams(
        state_dim=state,
        a=Tensor(-rng.uniform(0.1, 2.0, size=(channels, state))),
        b=Tensor(rng.standard_normal((channels, state))),
        c=Tensor(rng.standard_normal((channels, state))),
        delta=Tensor(rng.uniform(0.05, 1.5, size=channels)),
    )


def test_05_scan_equivalence():
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    worst = 0.0

    def residual(got, want):
        # scaled allclose residual: <= 1.0 means within rtol 1e-12 / atol 1e-14
        return float(np.max(np.abs(got - want) / (1e-12 * np.abs(want) + 1e-14)))

    cases_1d = [(64, 8, 8)] + [
        (int(rng.integers(1, 65)), int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        for _ in range(99)
    ]
    for t_len, c_dim, s_dim in cases_1d:
        p = _random_scan_params(rng, c_dim, s_dim)
        x = rng.standard_normal((t_len, c_dim))
        got = selective_scan(Tensor(x), p).data
        want = _oracle_scan(x, p.a.data, p.b.data, p.c.data, p.delta.data)
        worst = max(worst, residual(got, want))

    cases_2d = [(16, 16, 8, 4)] + [
        (int(rng.integers(1, 17)), int(rng.integers(1, 17)),
         int(rng.integers(1, 9)), int(rng.integers(1, 5)))
        for _ in range(99)
    ]
    for h, w, c_dim, s_dim in cases_2d:
        plist = [_random_scan_params(rng, c_dim, s_dim) for _ in range(4)]
        x = rng.standard_normal((h, w, c_dim))
        got = scan_2d(Tensor(x), plist).data
        want = _oracle_scan_2d(x, plist)
        worst = max(worst, residual(got, want))

    elapsed = time.perf_counter() - start
    _report(
        "05 scan equivalence",
        worst <= 1.0 and elapsed < 10.0,
        f"worst residual {worst:.3f} of the 1e-12 budget over "
        f"{len(cases_1d) + len(cases_2d)} instances in {elapsed:.1f}s",
    )


def test_06_gradient_suite():
    start = time.perf_counter()
    results = grad_check_suite(seed=0, eps=1e-5)
    elapsed = time.perf_counter() - start
    worst_name = max(results, key=results.get)
    worst = results[worst_name]
    assert "view_transform_layer" in results  # the composite layer is covered
    _report(
        "06 gradient suite",
        worst <= 1e-4 and elapsed < 60.0,
        f"worst {worst:.3e} ({worst_name}) across {len(results)} checks in {elapsed:.1f}s",
    )


def test_07_shape_contracts():
    rng = np.random.default_rng(5)
    params = init_params(PAPER_CONFIG)
    image = rng.uniform(0.0, 1.0, size=(32, 128, 3))
    logits = model_forward(params, image, PAPER_CONFIG)
    paper_ok = logits.shape == (200, 200, PAPER_CONFIG.num_classes)

    ablations_ok = True
    tried = []
    for layers in (1, 2, 4, 6):
        for depth in (1, 2):
            cfg = ModelConfig(
                emb_dims=32, layers=layers, locs=5, points=25, scan_depth=depth,
                query_h=10, query_w=10, out_h=40, out_w=40,
                num_classes=6, state_dim=4, seed=0,
            )
            out = model_forward(init_params(cfg), rng.uniform(size=(32, 64, 3)), cfg)
            ablations_ok &= out.shape == (40, 40, 6)
            tried.append(f"{layers}x{depth}")
    _report(
        "07 shape contracts",
        paper_ok and ablations_ok,
        f"paper config -> {logits.shape}, ablations layers x depth: {', '.join(tried)}",
    )


def test_08_toy_overfit():
    cfg = ModelConfig(
        emb_dims=16, layers=1, locs=4, points=16, scan_depth=1,
        query_h=8, query_w=8, out_h=16, out_w=16,
        num_classes=4, state_dim=4, seed=0,
    )
    data = toy_dataset(8, cfg.num_classes, cfg.out_h, cfg.out_w, seed=0)
    start = time.perf_counter()
    first = train_toy(init_params(cfg), data, cfg, steps=500)
    elapsed = time.perf_counter() - start
    second = train_toy(init_params(cfg), data, cfg, steps=500)
    identical = first.losses == second.losses and all(
        np.array_equal(first.params[k].data, second.params[k].data)
        for k in first.params
    )
    _report(
        "08 toy overfit",
        first.final_miou >= 0.9 and identical and elapsed < 300.0,
        f"train mIoU {first.final_miou:.3f} after 500 steps in {elapsed:.0f}s, "
        f"rerun identical: {identical}",
    )


def test_09_metrics_arithmetic():
    # target per-class IoUs in thousandths; mean 511.1666.../1000
    thousandths = [792, 476, 532, 434, 443, 390]
    # realize them exactly through a confusion matrix: per class take
    # TP = 2i and FN = FP = 1000 - i, so IoU = 2i / (2i + 2(1000 - i))
    # = i/1000.  Off-diagonal mass lives on the +1 and +2 cyclic bands;
    # band values solve x_c + y_c = FN_c (rows) and x_{c-1} + y_{c-2}
    # = FP_c (columns).
    x_band = [100, 360, 402, 491, 535, 186]
    y_band = [108, 164, 66, 75, 22, 424]
    n = 6
    matrix = np.zeros((n, n), dtype=int)
    for c in range(n):
        matrix[c, c] = 2 * thousandths[c]
        matrix[c, (c + 1) % n] = x_band[c]
        matrix[c, (c + 2) % n] = y_band[c]
    for c in range(n):  # self-check the construction
        assert matrix[c].sum() - matrix[c, c] == 1000 - thousandths[c]
        assert matrix[:, c].sum() - matrix[c, c] == 1000 - thousandths[c]

    gt = np.repeat(np.arange(n), matrix.sum(axis=1)).astype(np.uint8)
    pred = np.concatenate(
        [np.repeat(np.arange(n), matrix[g]) for g in range(n)]
    ).astype(np.uint8)
    acc = ConfusionAccumulator(class_ids=tuple(range(n)))
    for chunk in range(3):  # streaming must not change the tallies
        acc.add(pred[chunk::3], gt[chunk::3])

    per_class = acc.iou_per_class()
    exact = all(
        per_class[c] == thousandths[c] / 1000.0 for c in range(n)
    )
    mean_pct = 100.0 * miou(acc)
    _report(
        "09 metrics arithmetic",
        exact and abs(mean_pct - 51.1) <= 0.05,
        f"per-class IoUs exact: {exact}, mean {mean_pct:.4f}% vs 51.1 reported",
    )
    np.testing.assert_allclose(mean_pct, 51.11666666666667, atol=1e-10)


def test_10_stats_exactness():
    table = ClassTable((
        ClassEntry(0, "road"),
        ClassEntry(1, "car"),
        ClassEntry(2, "sky"),
    ))
    frame_a = np.full((4, 4), 0, dtype=np.uint8)  # 10 road, 1 car, 5 sky
    frame_a.flat[10] = 1
    frame_a.flat[11:16] = 2
    frame_b = np.full((4, 4), 0, dtype=np.uint8)  # 8 road, 4 car, 4 ignored
    frame_b.flat[8:12] = 1
    frame_b.flat[12:16] = 255
    frame_c = np.full((4, 4), 2, dtype=np.uint8)  # 16 sky
    rows = stats_report([frame_a, frame_b, frame_c], table, min_pixels=2)

    # valid pixels: 16 + 12 + 16 = 44
    #   road 18/44, car 5/44, sky 21/44
    # presence at the >= 2 px threshold:
    #   road in a, b -> 2/3; car only in b (1 px in a) -> 1/3; sky -> 2/3
    expected = [
        ("road", 18 / 44, 2 / 3),
        ("car", 5 / 44, 1 / 3),
        ("sky", 21 / 44, 2 / 3),
    ]
    exact = rows == expected
    _report(
        "10 stats exactness",
        exact,
        "pixel 18/44, 5/44, 21/44 and presence 2/3, 1/3, 2/3 matched exactly"
        if exact else f"got {rows}",
    )
