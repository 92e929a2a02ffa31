"""End-to-end acceptance gate; each test prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import blur_reference, hsv_reference, mec_bruteforce
from swarmfollow import imaging
from swarmfollow.config import ChannelConfig, Scenario
from swarmfollow.control import HOVER
from swarmfollow.coordination import Failure
from swarmfollow.geometry import CameraIntrinsics, Pose
from swarmfollow.harness import compare_architectures, run_scenario
from swarmfollow.perception import estimate_pose
from swarmfollow.simulation import (NOMINAL_HOVER_DRAW_A, BatteryState, DroneState, DynamicsParams,
                                    FrameQueue, Scene, battery_step, step_drone, visible_markers)


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def default_run():
    t0 = time.perf_counter()
    res = run_scenario(Scenario())
    return res, time.perf_counter() - t0


def test_criterion_1_backlog():
    t0 = time.perf_counter()
    q = FrameQueue(0.231)
    dt = 1 / 30
    n_ticks = 300
    processed = 0
    for i in range(n_ticks):
        done, _ = q.step([i], i * dt, dt)
        processed += len(done)
    elapsed = time.perf_counter() - t0
    horizon = n_ticks * dt
    fps = processed / horizon
    growth = q.backlog / horizon
    ok = abs(fps - 4.33) <= 0.1 and abs(growth - 25.7) <= 0.5 and elapsed < 1.0
    report(1, ok, f"throughput {fps:.3f} fps, backlog growth {growth:.3f} frames/s, {elapsed:.3f} s")


def test_criterion_2_default_scenario(default_run):
    res, elapsed = default_run
    sm = res.summary
    ok = (sm["lock_ratio"] is not None and sm["lock_ratio"] >= 0.95
          and sm["final_tracking_error"] < 0.3 and sm["min_z"] >= 0.10 and elapsed < 30)
    report(2, ok, f"lock ratio {sm['lock_ratio']:.3f}, final distance {sm['final_tracking_error']:.3f} m, "
                  f"min z {sm['min_z']:.3f} m, {elapsed:.1f} s")


def test_criterion_3_endurance():
    s = DroneState(Pose((0, 0, 1.0)), battery=BatteryState(3.8, 1.1))
    p = DynamicsParams()
    dt = 1 / 30
    t = 0.0
    depleted = False
    while not depleted:
        s = step_drone(s, HOVER, dt, p)
        b, depleted = battery_step(s.battery, NOMINAL_HOVER_DRAW_A, dt)
        s = DroneState(s.pose, s.velocity, s.yaw_rate, b)
        t += dt
    report(3, abs(t - 600) <= 1, f"hover endurance {t:.3f} s")


def test_criterion_4_imaging_oracles():
    rng = np.random.default_rng(4)
    worst_mec = 0.0
    for _ in range(200):
        pts = rng.uniform(-50, 50, (int(rng.integers(1, 13)), 2))
        c = imaging.min_enclosing_circle(pts)
        ox, oy, r = mec_bruteforce(pts)
        worst_mec = max(worst_mec, abs(c.radius - r), math.hypot(c.center[0] - ox, c.center[1] - oy))
    vals = np.arange(0, 256, 8)
    grid = np.stack(np.meshgrid(vals, vals, vals, indexing="ij"), -1).reshape(1, -1, 3).astype(np.uint8)
    ref = np.array([hsv_reference(*map(int, p)) for p in grid[0]], np.uint8)
    hsv_mismatch = int(np.any(imaging.rgb_to_hsv(grid)[0] != ref, axis=-1).sum())
    img = rng.integers(0, 256, (48, 64, 3), dtype=np.uint8)
    blur_dev = int(np.abs(imaging.gaussian_blur_5x5(img).astype(int) - blur_reference(img).astype(int)).max())
    ok = worst_mec <= 1e-9 and hsv_mismatch == 0 and blur_dev <= 1
    report(4, ok, f"MEC max deviation {worst_mec:.2e}, HSV mismatches {hsv_mismatch}, blur max deviation {blur_dev}")


def test_criterion_5_architecture_sweep():
    t0 = time.perf_counter()
    losses, latencies, seeds = [0.0, 0.25, 0.5], [0.0, 0.1, 0.2], range(5)
    rows = compare_architectures(Scenario(), losses, latencies, seeds)
    elapsed = time.perf_counter() - t0
    identical = monotone = True
    worse = 0
    for seed in seeds:
        dec = {r["metrics_sha256"] for r in rows if r["seed"] == seed and r["mode"] == "decentralized"}
        identical &= len(dec) == 1
        cen = {(r["loss"], r["latency_s"]): r["rms_tracking_error"]
               for r in rows if r["seed"] == seed and r["mode"] == "centralized"}
        for i, lo in enumerate(losses):
            for j, la in enumerate(latencies):
                if i + 1 < len(losses):
                    monotone &= cen[(losses[i + 1], la)] >= cen[(lo, la)]
                if j + 1 < len(latencies):
                    monotone &= cen[(lo, latencies[j + 1])] >= cen[(lo, la)]
        dec_rms = next(r["rms_tracking_error"] for r in rows
                       if r["seed"] == seed and r["mode"] == "decentralized")
        worse += cen[(0.5, 0.2)] > dec_rms
    ok = identical and monotone and worse >= 4 and elapsed < 300
    report(5, ok, f"decentralized bit-identical {identical}, centralized monotone {monotone}, "
                  f"centralized worse at (0.5, 0.2 s) for {worse}/5 seeds, {elapsed:.0f} s")


def test_criterion_6_localization():
    rng = np.random.default_rng(6)
    scene = Scene()
    cam = Pose((0.5, 0.1, 1.0), 0.05)
    k = CameraIntrinsics()
    truth = np.array(cam.position)
    err1, err8 = [], []
    for _ in range(1000):
        obs = visible_markers(scene, cam, k, 0.05, 0.0, rng)
        assert len(obs) == 8
        err8.append(np.linalg.norm(np.array(estimate_pose(obs).pose.position) - truth))
        err1.append(np.linalg.norm(np.array(estimate_pose(obs[:1]).pose.position) - truth))
    m1, m8 = float(np.mean(err1)), float(np.mean(err8))
    expected = m1 / math.sqrt(8)
    ok = abs(m8 - expected) <= 0.25 * expected
    report(6, ok, f"N=8 mean error {m8:.4f} m vs N=1 / sqrt(8) = {expected:.4f} m")


def test_criterion_7_failover(default_run):
    cen = run_scenario(Scenario(mode="centralized", failures=(Failure("central", 5.0),)))
    late = [c["command"] for c in cen.commands if c["time_s"] > 5.5]
    all_hover = bool(late) and all(c.is_hover for c in late)
    dec = run_scenario(Scenario(failures=(Failure("central", 5.0),)))
    same = dec.csv_text() == default_run[0].csv_text()
    report(7, all_hover and same, f"centralized hover after 5.5 s {all_hover} ({len(late)} commands), "
                                  f"decentralized trace unchanged {same}")


def test_criterion_8_determinism(default_run):
    again = run_scenario(Scenario())
    same = again.csv_text().encode() == default_run[0].csv_text().encode()
    report(8, same, f"repeat run byte-identical {same}")
