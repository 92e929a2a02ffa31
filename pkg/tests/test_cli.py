import json

import numpy as np
import pytest

from swarmfollow import imaging
from swarmfollow.cli import main


def test_run_command(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text('{"duration_s": 0.5}')
    assert main(["run", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "metrics.csv").exists()
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["seed"] == 3 and summary["ticks"] == 15


def test_run_dump_frames(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text('{"duration_s": 0.1}')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "--dump-frames"]) == 0
    assert (tmp_path / "frames" / "tick_000002.ppm").exists()
    assert (tmp_path / "frames" / "hud.csv").exists()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"plan": {"speeed": 1}}')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "speeed" in capsys.readouterr().err


def test_compare_command(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text('{"duration_s": 0.3}')
    rc = main(["compare", "--config", str(cfg), "--loss-grid", "0,0.5", "--latency-grid", "0.1",
               "--seed", "1", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert len(lines) == 1 + 4


@pytest.mark.parametrize("op", ["blur", "hsv", "mask", "track"])
def test_imgproc(tmp_path, op, capsys):
    img = np.full((60, 80, 3), 110, np.uint8)
    yy, xx = np.mgrid[0:60, 0:80]
    img[(xx - 50) ** 2 + (yy - 30) ** 2 <= 100] = (0, 200, 0)
    src = tmp_path / "in.ppm"
    imaging.write_netpbm(src, img)
    out = tmp_path / ("out.pgm" if op == "mask" else "out.ppm")
    assert main(["imgproc", "--in", str(src), "--op", op, "--bounds", "40,75,20,80,255,255",
                 "--out", str(out)]) == 0
    res = imaging.read_netpbm(out)
    assert res.shape[:2] == (60, 80)
    if op == "mask":
        assert res[30, 50] == 255 and res[0, 0] == 0
    if op == "track":
        info = json.loads(capsys.readouterr().out)
        assert info["locked"] and info["command"]["yaw_rate"] > 0


def test_imgproc_bad_bounds(tmp_path):
    with pytest.raises(SystemExit):
        main(["imgproc", "--in", "x", "--op", "blur", "--bounds", "1,2", "--out", "y"])


def test_missing_input_is_error(tmp_path, capsys):
    assert main(["imgproc", "--in", str(tmp_path / "none.ppm"), "--op", "blur",
                 "--out", str(tmp_path / "o.ppm")]) == 1
