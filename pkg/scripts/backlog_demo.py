"""Depth-frame backlog: 30 fps arrivals against a 0.231 s per-frame service time."""
from swarmfollow.simulation import FrameQueue

q = FrameQueue(0.231)
dt = 1 / 30
done = []
for i in range(300):
    out, stats = q.step([i], i * dt, dt)
    done += out
    if (i + 1) % 30 == 0:
        lat = done[-1].latency if done else float("nan")
        print(f"t={(i + 1) * dt:5.1f}s processed={len(done):3d} backlog={stats['backlog']:4d} "
              f"latest latency={lat:6.2f}s")
print(f"throughput {len(done) / 10:.2f} fps, backlog growth {q.backlog / 10:.2f} frames/s")
