# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the python bindings: shapes, determinism, a few exact values."""

import math

import numpy as np

import cdi3d


def test_seed_stream():
    a = cdi3d.seed_stream(7, "recon/rays")
    b = cdi3d.seed_stream(7, "recon/rays")
    c = cdi3d.seed_stream(7, "recon/probes")
    assert a == b
    assert a != c


def test_trajectory():
    cfg = cdi3d.TrajectoryConfig()
    cfg.num_main_views = 4
    cfg.num_interp = 2
    views = cdi3d.tilt_trajectory(cfg)
    assert len(views) == 4 + 4 * 2
    mains = [(r, p) for r, p in views if r.startswith("main")]
    assert len(mains) == 4
    azimuths = sorted(p.azimuth_deg % 360.0 for _, p in mains)
    assert np.allclose(azimuths, [0.0, 90.0, 180.0, 270.0])
    for _, p in views:
        assert abs(np.linalg.norm(p.center()) - cfg.radius) < 1e-9


def test_assign_ref_cond():
    assert cdi3d.assign_ref_cond(1, 2) == (1, 2)
    assert cdi3d.assign_ref_cond(2, 2) == (2, 1)


def test_schedule_and_q_sample():
    sched = cdi3d.make_schedule(200, 1e-4, 0.02)
    assert sched.steps == 200
    assert math.isclose(sched.beta[0], 1e-4)
    assert math.isclose(sched.beta[-1], 0.02)
    bar = np.cumprod(1.0 - np.asarray(sched.beta))
    assert np.allclose(bar, sched.alpha_bar)

    x0 = np.full((4, 4, 3), 0.5)
    eps = np.zeros((4, 4, 3))
    z = cdi3d.q_sample(x0, 10, eps, sched)
    assert np.allclose(z, math.sqrt(sched.alpha_bar[10]) * 0.5)


def test_fusion():
    rng = np.random.default_rng(0)
    p = rng.normal(size=(5, 8))
    f = rng.normal(size=(7, 8))
    wq = rng.normal(size=(8, 8))
    wk = rng.normal(size=(8, 8))
    wv = np.zeros((8, 8))
    fused = cdi3d.fuse(p, f, wq, wk, wv, heads=2)
    assert np.allclose(fused, p)  # zero values -> attention adds nothing
    att = cdi3d.cross_modal_attention(p, f, wq, wk, rng.normal(size=(8, 8)), 2)
    assert att.shape == (5, 8)


def test_triplane_sampling():
    tp = cdi3d.TriPlane.zeros(8, 2)
    plane = np.zeros((64, 2))
    plane[:, 0] = 1.5
    tp.set_plane(0, plane)
    feat = tp.sample(np.array([0.1, -0.2, 0.3]))
    assert feat.shape == (6,)
    assert math.isclose(feat[0], 1.5)  # constant plane -> exact interpolation
    assert abs(feat[1]) == 0.0 and np.allclose(feat[2:], 0.0)


def test_render_and_metrics():
    view = cdi3d.render_shape_view("sphere", 30.0, 20.0, radius=2.0, size=32, n_samples=48)
    rgb, mask = view["rgb"], view["mask"]
    assert rgb.shape == (32, 32, 3) and mask.shape == (32, 32, 1)
    assert 0.05 < mask.mean() < 0.9        # sphere covers part of the frame
    assert cdi3d.psnr(rgb, rgb) >= 99.0  # identical images hit the cap
    assert math.isclose(cdi3d.ssim(rgb, rgb), 1.0, abs_tol=1e-12)

    half = np.full_like(rgb, 0.5)
    zero = np.zeros_like(rgb)
    assert math.isclose(cdi3d.psnr(half, zero), 6.0206, abs_tol=1e-3)


def test_mesh_and_iou():
    v, f = cdi3d.extract_shape_mesh("sphere", 48)
    assert len(v) > 100 and len(f) > 100
    iou = cdi3d.volume_iou(v, f, v, f, resolution=32)
    assert iou == 1.0
    d = cdi3d.chamfer_distance(v, v)
    assert d == 0.0


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok {t.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()
