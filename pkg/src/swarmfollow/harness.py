"""Deterministic run loop, metrics/summary output and the architecture sweep."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .config import Scenario
from .control import HOVER
from .coordination import (CENTRAL_ID, CentralController, Channel, Message, SwarmMode,
                           Telemetry, decentralized_step)
from .geometry import Pose, transform_point
from .perception import (FRESH_STATES, HudRecord, estimate_pose, hud_metadata,
                         render_hud, write_hud_metadata)
from .simulation import (BatteryState, DroneState, FrameQueue, LegProgress, battery_step,
                         integrate_drone, leader_step, render_camera, render_depth,
                         visible_markers)

log = logging.getLogger(__name__)

METRICS_HEADER = ("tick,time_s,agent,x,y,z,yaw,tracking_error_m,dx,dy,radius,locked,"
                  "staleness_s,backlog,dropped,battery_ah,event")
METRICS_FIELDS = tuple(METRICS_HEADER.split(","))
LEADER_ID = 0


def substream(seed: int, label: str) -> np.random.Generator:
    """Independent generator per named consumer; labels hash to fixed keys."""
    return np.random.default_rng([seed, zlib.crc32(label.encode("utf-8"))])


class DeferredDepth:
    """Depth frame captured at arrival time and rendered only when needed."""

    def __init__(self, scene, pose, k, near, far, agents):
        self._args = (scene, pose, k, near, far, agents)
        self._img = None

    def image(self) -> np.ndarray:
        if self._img is None:
            scene, pose, k, near, far, agents = self._args
            self._img = render_depth(scene, pose, k, near, far, agents)
        return self._img


@dataclass
class RunResult:
    metrics: list[dict]
    summary: dict
    commands: list[dict] = field(default_factory=list)   # per follower per tick

    def csv_text(self) -> str:
        return metrics_csv(self.metrics)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(METRICS_HEADER + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r.get(k)) for k in METRICS_FIELDS) + "\n")
    return buf.getvalue()


def _dist(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def run_scenario(s: Scenario, dump_dir=None) -> RunResult:
    """Simulate one scenario tick by tick.

    Per tick: leader waypoint command, follower perception or central
    pursuit, channel deliveries, drone integration, battery/queue
    bookkeeping, then one metrics row per agent (state at tick start).
    """
    dt = s.tick_dt_s
    n_ticks = s.n_ticks
    decentral = s.mode == "decentralized"
    mode = SwarmMode(s.mode, s.failures)
    rng_channel = substream(s.seed, "channel")
    rng_markers = substream(s.seed, "marker-noise")
    depth_k = s.camera.scaled(s.avoidance.depth_scale)
    follower_ids = list(range(1, len(s.followers) + 1))
    offsets = {fid: s.follow_offset(fid - 1) for fid in follower_ids}

    battery0 = BatteryState(s.battery.voltage, s.battery.capacity_ah)
    states = {LEADER_ID: DroneState(Pose(s.leader.start, s.leader.yaw), battery=battery0)}
    for fid, spec in zip(follower_ids, s.followers):
        states[fid] = DroneState(Pose(spec.start, spec.yaw), battery=battery0)
    progress = LegProgress()
    completion = None

    pid_states = {fid: FRESH_STATES for fid in follower_ids}
    queues = {fid: FrameQueue(s.queue.service_time_s, s.queue.capacity) for fid in follower_ids}
    latest_depth: dict = {}
    locked_prev = {fid: False for fid in follower_ids}

    channel = Channel(s.channel.latency_s, s.channel.jitter_s, s.channel.loss_prob)
    central = CentralController(LEADER_ID, offsets, s.central.staleness_timeout_s,
                                s.central.pursuit_kp, s.central.yaw_kp, s.tracker.output_limit)
    last_cmd: dict = {}          # follower -> (data_time, command)

    metrics, commands = [], []
    hud_rows = []
    loc_errors = []
    leader_was_alive = True
    central_was_alive = True
    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)

    for tick in range(n_ticks):
        t = tick * dt
        events = {aid: [] for aid in states}
        leader_alive = mode.leader_alive(t)
        central_alive = mode.central_alive(t)
        if leader_was_alive and not leader_alive:
            events[LEADER_ID].append("leader_failed")
        if central_was_alive and not central_alive and not decentral:
            for fid in follower_ids:
                events[fid].append("central_failed")
        leader_was_alive, central_was_alive = leader_alive, central_alive
        visible = {LEADER_ID: states[LEADER_ID]} if leader_alive else {}

        cmds = {}
        obs = {aid: {} for aid in states}
        if leader_alive and not states[LEADER_ID].grounded:
            cmds[LEADER_ID], progress = leader_step(states[LEADER_ID], plan=s.plan, progress=progress,
                                                    dt=dt, params=s.dynamics)
            if completion is None and progress.done(s.plan):
                completion = t
        else:
            cmds[LEADER_ID] = HOVER

        for fid in follower_ids:
            st = states[fid]
            need_frame = decentral or dump_dir is not None
            frame = render_camera(s.scene, st.pose, s.camera, visible) if need_frame else None
            if decentral:
                job = DeferredDepth(s.scene, st.pose, depth_k, s.avoidance.near, s.avoidance.far,
                                    dict(visible))
                done, _ = queues[fid].step([job], t, dt)
                if done:
                    latest_depth[fid] = done[-1].frame
                depth = latest_depth[fid].image() if fid in latest_depth else None
                cmd, hud, pid_states[fid], avoiding = decentralized_step(
                    frame, depth, s.tracker, pid_states[fid], dt, st.pose.position[2], s.avoidance)
                if hud.target_locked and not locked_prev[fid]:
                    events[fid].append("acquired")
                if locked_prev[fid] and not hud.target_locked:
                    events[fid].append("lost")
                if avoiding:
                    events[fid].append("avoid")
                locked_prev[fid] = hud.target_locked
                cmds[fid] = cmd
                obs[fid] = {"hud": hud, "staleness": 0.0, "backlog": queues[fid].backlog}
            else:
                obs[fid] = {"hud": None, "staleness": None, "backlog": 0}
                channel.send(Message("telemetry", fid, CENTRAL_ID,
                                     Telemetry(fid, st.pose, st.velocity, st.battery.charge_ah), t),
                             t, rng_channel)
            if dump_dir is not None and fid == follower_ids[0]:
                hud = obs[fid].get("hud") or HudRecord(altitude=st.pose.position[2])
                imaging.write_netpbm(dump_dir / f"tick_{tick:06d}.ppm", render_hud(frame, hud))
                imaging.write_netpbm(dump_dir / f"tick_{tick:06d}.pgm",
                                     render_depth(s.scene, st.pose, depth_k, s.avoidance.near,
                                                  s.avoidance.far, visible))
                hud_rows.append(hud_metadata(tick, hud))

        if not decentral:
            ls = states[LEADER_ID]
            if leader_alive:
                channel.send(Message("telemetry", LEADER_ID, CENTRAL_ID,
                                     Telemetry(LEADER_ID, ls.pose, ls.velocity, ls.battery.charge_ah), t),
                             t, rng_channel)
            for _pass in range(2):
                arrived = channel.deliver(t)
                to_central = [m for m in arrived if m.receiver == CENTRAL_ID]
                for m in arrived:
                    if m.kind == "command":
                        prev = last_cmd.get(m.receiver)
                        if prev is None or m.payload.data_time >= prev[0]:
                            last_cmd[m.receiver] = (m.payload.data_time, m.payload.command)
                if _pass == 0 and central_alive:
                    for m in central.step(to_central, t):
                        channel.send(m, t, rng_channel)
            timeout = s.central.staleness_timeout_s
            for fid in follower_ids:
                got = last_cmd.get(fid)
                if got is None:
                    cmds[fid] = HOVER
                    continue
                age = t - got[0]
                obs[fid]["staleness"] = age
                if timeout is not None and age > timeout:
                    cmds[fid] = HOVER
                    events[fid].append("stale_hover")
                else:
                    cmds[fid] = got[1]

        if s.localization.enabled:
            for fid in follower_ids:
                pose = states[fid].pose
                sightings = visible_markers(s.scene, pose, s.camera, s.localization.sigma_pos,
                                            s.localization.sigma_yaw, rng_markers,
                                            s.avoidance.near, s.avoidance.far)
                if sightings:
                    loc_errors.append(_dist(estimate_pose(sightings).pose.position, pose.position))

        # metrics rows describe the state each agent acted on this tick
        lstate = states[LEADER_ID]
        goal = {fid: transform_point(lstate.pose, offsets[fid]) for fid in follower_ids} if leader_alive else {}
        for aid in sorted(states):
            st = states[aid]
            o = obs.get(aid) or {}
            hud = o.get("hud")
            locked = None if aid == LEADER_ID or not decentral else hud.target_locked
            x, y, z = st.pose.position
            metrics.append({
                "tick": tick, "time_s": t, "agent": aid, "x": x, "y": y, "z": z, "yaw": st.pose.yaw,
                "tracking_error_m": _dist(st.pose.position, goal[aid]) if aid in goal else None,
                "dx": hud.offset_vector[0] if hud is not None and hud.target_locked else None,
                "dy": hud.offset_vector[1] if hud is not None and hud.target_locked else None,
                "radius": hud.circle.radius if hud is not None and hud.target_locked else None,
                "locked": locked,
                "staleness_s": o.get("staleness"),
                "backlog": o.get("backlog", 0) if aid != LEADER_ID else None,
                "dropped": channel.dropped,
                "battery_ah": st.battery.charge_ah,
                "event": None,
            })
        row_of = {aid: metrics[-len(states) + i] for i, aid in enumerate(sorted(states))}
        for fid in follower_ids:
            commands.append({"tick": tick, "time_s": t, "agent": fid, "command": cmds[fid]})

        for aid in sorted(states):
            if aid == LEADER_ID and not leader_alive:
                continue
            st, floored = integrate_drone(states[aid], cmds[aid], dt, s.dynamics)
            if floored:
                events[aid].append("ir_floor")
            bat, depleted = battery_step(st.battery, s.battery.draw_amps, dt)
            if depleted and not st.grounded:
                events[aid].append("battery_depleted")
                st = DroneState(st.pose, (0.0, 0.0, 0.0), 0.0, bat, True)
            else:
                st = DroneState(st.pose, st.velocity, st.yaw_rate, bat, st.grounded)
            states[aid] = st
        for aid, evs in events.items():
            row_of[aid]["event"] = ";".join(evs) if evs else None

    if dump_dir is not None:
        write_hud_metadata(dump_dir / "hud.csv", hud_rows)
    summary = summarize(s, metrics, channel, completion, loc_errors, queues)
    return RunResult(metrics, summary, commands)


def summarize(s: Scenario, metrics, channel, completion, loc_errors, queues) -> dict:
    follower_rows = [r for r in metrics if r["agent"] != LEADER_ID]
    errs = [r["tracking_error_m"] for r in follower_rows if r["tracking_error_m"] is not None]
    lock_ratio = None
    first_lock = None
    if s.mode == "decentralized":
        ratios = []
        for fid in range(1, len(s.followers) + 1):
            flags = [r for r in follower_rows if r["agent"] == fid]
            start = next((i for i, r in enumerate(flags) if r["locked"]), None)
            if start is not None:
                tail = flags[start:]
                ratios.append(sum(1 for r in tail if r["locked"]) / len(tail))
                first_lock = flags[start]["time_s"] if first_lock is None else min(first_lock, flags[start]["time_s"])
        lock_ratio = sum(ratios) / len(ratios) if ratios else None
    stale = [r["staleness_s"] for r in follower_rows if r["staleness_s"] is not None]
    airborne_z = [r["z"] for r in metrics]
    last = {}
    for r in follower_rows:
        last[r["agent"]] = r
    return {
        "mode": s.mode,
        "seed": s.seed,
        "ticks": s.n_ticks,
        "agents": len(s.followers) + 1,
        "rms_tracking_error": math.sqrt(sum(e * e for e in errs) / len(errs)) if errs else None,
        "final_tracking_error": max((r["tracking_error_m"] for r in last.values()
                                     if r["tracking_error_m"] is not None), default=None),
        "lock_ratio": lock_ratio,
        "first_acquisition_s": first_lock,
        "mean_staleness": sum(stale) / len(stale) if stale else None,
        "max_staleness": max(stale) if stale else None,
        "messages_sent": channel.sent,
        "messages_delivered": channel.delivered,
        "drops": channel.dropped,
        "completion_time_s": completion,
        "min_z": min(airborne_z) if airborne_z else None,
        "final_backlog": max((q.backlog for q in queues.values()), default=0),
        "depth_frames_processed": sum(q.processed for q in queues.values()),
        "mean_localization_error_m": sum(loc_errors) / len(loc_errors) if loc_errors else None,
        "localization_fixes": len(loc_errors),
        "events": _event_counts(metrics),
    }


def _event_counts(metrics) -> dict:
    out: dict = {}
    for r in metrics:
        if r["event"]:
            for e in r["event"].split(";"):
                out[e] = out.get(e, 0) + 1
    return dict(sorted(out.items()))


def write_outputs(result: RunResult, out_dir) -> dict:
    """Write metrics.csv and summary.json; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        metrics_path = out / "metrics.csv"
        metrics_path.write_text(result.csv_text(), encoding="utf-8", newline="")
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write outputs under {out}: {exc}") from exc
    return {"metrics": metrics_path, "summary": summary_path}


# -- architecture comparison -------------------------------------------------

REPORT_FIELDS = ("loss", "latency_s", "mode", "seed", "rms_tracking_error", "lock_ratio",
                 "mean_staleness", "drops", "metrics_sha256")


def compare_architectures(s: Scenario, losses, latencies, seeds=None, progress=None) -> list[dict]:
    """Run both modes at every (loss, latency) grid point with matched seeds."""
    seeds = [s.seed] if seeds is None else list(seeds)
    rows = []
    for seed in seeds:
        for loss in losses:
            for lat in latencies:
                ch = s.channel.__class__(latency_s=lat, jitter_s=s.channel.jitter_s, loss_prob=loss)
                for mode in ("centralized", "decentralized"):
                    res = run_scenario(s.with_(seed=seed, channel=ch, mode=mode))
                    sm = res.summary
                    rows.append({
                        "loss": loss, "latency_s": lat, "mode": mode, "seed": seed,
                        "rms_tracking_error": sm["rms_tracking_error"],
                        "lock_ratio": sm["lock_ratio"],
                        "mean_staleness": sm["mean_staleness"],
                        "drops": sm["drops"],
                        "metrics_sha256": hashlib.sha256(res.csv_text().encode()).hexdigest(),
                    })
                    if progress is not None:
                        progress(rows[-1])
    return rows


def write_report(rows, path) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(REPORT_FIELDS)
        for r in rows:
            wr.writerow([_fmt(r[k]) for k in REPORT_FIELDS])
