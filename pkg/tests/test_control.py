import pytest
from hypothesis import given, strategies as st

from swarmfollow.control import (HOVER, X_GAINS, Y_GAINS, Z_GAINS, PidGains, PidState,
                                 VelocityCommand, assemble_command, clamp, pid_step)

errors = st.floats(-1e4, 1e4, allow_nan=False)
dts = st.floats(1e-3, 1.0)


def test_table_gains():
    assert (X_GAINS.kp, X_GAINS.ki, X_GAINS.kd) == (0.3, 0.0, 0.0)
    assert (Y_GAINS.kp, Y_GAINS.ki, Y_GAINS.kd) == (0.3, 0.08, 1.0)
    assert (Z_GAINS.kp, Z_GAINS.ki, Z_GAINS.kd) == (0.9, 0.06, 0.2)


@pytest.mark.parametrize("dt", [0.01, 1 / 30, 1.0])
def test_x_plane_proportional(dt):
    out, _ = pid_step(X_GAINS, PidState(), 100.0, dt)
    assert out == pytest.approx(30.0)


def test_z_plane_two_steps():
    out1, s = pid_step(Z_GAINS, PidState(), 10.0, 0.1)
    out2, s = pid_step(Z_GAINS, s, 10.0, 0.1)
    assert out1 == pytest.approx(9.06)
    assert out2 == pytest.approx(9.12)
    assert s.integral == pytest.approx(2.0)


def test_zero_error_forever():
    s = PidState()
    for _ in range(50):
        out, s = pid_step(Y_GAINS, s, 0.0, 1 / 30)
        assert out == 0.0


def test_derivative_term():
    _, s = pid_step(PidGains(0, 0, 2.0), PidState(), 1.0, 0.5)
    out, _ = pid_step(PidGains(0, 0, 2.0), s, 2.0, 0.5)
    assert out == pytest.approx(4.0)


def test_bad_dt_and_gains():
    with pytest.raises(ValueError):
        pid_step(X_GAINS, PidState(), 1.0, 0.0)
    with pytest.raises(ValueError):
        PidGains(-1.0)


@given(errors, dts)
def test_pure_proportional(e, dt):
    g = PidGains(0.7)
    assert pid_step(g, PidState(), e, dt)[0] == 0.7 * e


normal_errors = errors.filter(lambda e: e == 0 or abs(e) > 1e-300)


@given(normal_errors, dts)
def test_p_term_linear(e, dt):
    g = PidGains(0.3)
    a, _ = pid_step(g, PidState(), e, dt)
    b, _ = pid_step(g, PidState(), 2 * e, dt)
    assert b == 2 * a


@given(errors, errors, dts)
def test_reset_kills_derivative(e1, e2, dt):
    g = PidGains(0.0, 0.0, 1.0)
    _, s = pid_step(g, PidState(), e1, dt)
    out, _ = pid_step(g, s.reset(), e2, dt)
    assert out == 0.0


@given(st.floats(0.1, 50), st.floats(0.01, 0.5))
def test_integral_grows_linearly_until_clamped(e, ki):
    g = PidGains(0.0, ki, 0.0)
    s = PidState()
    dt = 0.1
    outs = []
    for _ in range(200):
        out, s = pid_step(g, s, e, dt)
        outs.append(clamp(out))
    raw = [ki * e * dt * (i + 1) for i in range(200)]
    for got, want in zip(outs, raw):
        assert got == pytest.approx(min(want, 100.0), rel=1e-9)
    assert max(abs(o) for o in outs) <= 100


@pytest.mark.parametrize("v,want", [(150, 100), (-150, -100), (30, 30)])
def test_clamp_examples(v, want):
    assert clamp(v, 100) == want


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0.1, 1e3))
def test_clamp_idempotent_and_monotone(a, b, lim):
    assert clamp(clamp(a, lim), lim) == clamp(a, lim)
    if a <= b:
        assert clamp(a, lim) <= clamp(b, lim)


def test_clamp_rejects_bad_limit():
    with pytest.raises(ValueError):
        clamp(1.0, 0.0)


def test_assemble_mapping():
    assert assemble_command(0, 0, 0, 100) == HOVER
    assert HOVER.is_hover
    c = assemble_command(30, -10, 20, 100)
    assert c == VelocityCommand(forward=20, lateral=0, vertical=10, yaw_rate=30)
    assert assemble_command(200, 0, 0, 100).yaw_rate == 100
    assert assemble_command(30, 0, 0, 100, lateral_from_x=True).lateral == 30


@given(errors, errors, errors, st.floats(1, 200))
def test_assembled_command_within_limit(x, y, z, lim):
    c = assemble_command(x, y, z, lim)
    assert all(abs(v) <= lim for v in c.as_dict().values())
