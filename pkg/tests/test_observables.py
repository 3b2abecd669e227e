"""Direction-binned flow statistics and the observables estimator."""

import math

import numpy as np
import pytest

from evflow.camera import CameraIntrinsics
from evflow.observables import (
    DirectionBank,
    EstimatorConfig,
    FlowFieldStats,
    ObservablesEstimator,
    assign_direction,
    confidence,
    derotate,
    direction_weights,
    filter_update,
    project_flow,
    read_observables_csv,
    read_rates_csv,
    solve_observables,
    write_observables_csv,
    write_rates_csv,
)
from evflow.geometry import flow_rotational
from evflow.planefit import FLOW_DTYPE

CFG = EstimatorConfig()
BANK = DirectionBank.make(6)
F_PX = 100.0


def _flow_chunk(x_u, y_u, u, v, t=0):
    out = np.zeros(np.shape(x_u)[0], dtype=FLOW_DTYPE)
    out["t"] = t
    out["x_u"] = x_u
    out["y_u"] = y_u
    out["u"] = u
    out["v"] = v
    out["p"] = 1
    return out


# ---------------------------------------------------------------------------
# Direction bank and projections
# ---------------------------------------------------------------------------

def test_direction_bank_angles():
    assert BANK.m == 6
    np.testing.assert_allclose(BANK.alphas, np.arange(6) * math.pi / 6)


def test_assign_direction_folds_and_picks_nearest():
    assert assign_direction(1.0, 0.0, BANK) == 0
    assert assign_direction(-1.0, 0.0, BANK) == 0          # fold at pi
    assert assign_direction(0.0, 1.0, BANK) == 3           # 90 degrees
    assert assign_direction(0.0, -1.0, BANK) == 3
    a = math.radians(104.0)
    assert assign_direction(math.cos(a), math.sin(a), BANK) == 3
    a = math.radians(112.0)
    assert assign_direction(math.cos(a), math.sin(a), BANK) == 4


def test_assign_direction_is_nearest_property():
    rng = np.random.default_rng(8)
    ang = rng.uniform(-math.pi, math.pi, 500)
    idx = assign_direction(np.cos(ang), np.sin(ang), BANK)
    af = np.where(ang < 0, ang + math.pi, ang)
    d = np.abs((af[:, None] - BANK.alphas + math.pi / 2) % math.pi - math.pi / 2)
    chosen = d[np.arange(500), idx]
    assert (chosen <= d.min(axis=1) + 1e-12).all()


def test_project_flow_example():
    s, v = project_flow(0.2, -0.1, 3.0, 4.0, math.pi / 2)
    assert s == pytest.approx(-0.1, abs=1e-15)
    assert v == pytest.approx(4.0, abs=1e-15)


def test_derotate_cancels_pure_rotation_exactly():
    rng = np.random.default_rng(9)
    for _ in range(30):
        p, q, r = rng.uniform(-1.5, 1.5, 3)
        xm, ym = rng.uniform(-0.5, 0.5, 2)
        alpha = rng.uniform(0, math.pi)
        u_rot, v_rot = flow_rotational(p, q, r, xm, ym)
        v_proj = u_rot * math.cos(alpha) + v_rot * math.sin(alpha)
        assert derotate(v_proj, alpha, xm, ym, p, q, r) == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------------------
# Running statistics: decay and accumulation
# ---------------------------------------------------------------------------

def test_decay_factor_shape():
    st = FlowFieldStats.zeros(6)
    st.n[0] = 4.0
    assert st.decay(0.01, 0.02) == pytest.approx(0.5)
    assert st.n[0] == pytest.approx(2.0)
    assert st.decay(1.0, 0.02) == 0.0     # beyond the window: full forget
    assert st.n[0] == 0.0


def test_decay_equals_bruteforce_exponential_window():
    """Recursive decay+accumulate matches direct weighted recomputation."""
    rng = np.random.default_rng(10)
    k_f = 0.02
    batches = []
    st = FlowFieldStats.zeros(6)
    for _ in range(12):
        dt = rng.uniform(0.002, 0.012)
        n = rng.integers(3, 40)
        idx = rng.integers(0, 6, n)
        s = rng.normal(0, 0.3, n)
        v = rng.normal(0, 2.0, n)
        st.decay(dt, k_f)
        st.accumulate(idx, s, v)
        batches.append((dt, idx, s, v))
    # brute force: every batch weighted by the product of later decay factors
    weights = []
    for i in range(len(batches)):
        wgt = 1.0
        for dt, _, _, _ in batches[i + 1:]:
            wgt *= max(0.0, 1.0 - dt / k_f)
        weights.append(wgt)
    ref = {k: np.zeros(6) for k in ("n", "s_s", "s_s2", "s_v", "s_sv", "s_v2")}
    for wgt, (_, idx, s, v) in zip(weights, batches):
        for k, col in (("n", np.ones_like(s)), ("s_s", s), ("s_s2", s * s),
                       ("s_v", v), ("s_sv", s * v), ("s_v2", v * v)):
            ref[k] += wgt * np.bincount(idx, weights=col, minlength=6)
    for k in ref:
        np.testing.assert_allclose(getattr(st, k), ref[k], atol=1e-6)


def test_direction_weights_thresholds():
    st = FlowFieldStats.zeros(6)
    # bin 0: spread exactly at the threshold expressed in metric units
    var_m = CFG.var_s_min / (F_PX * F_PX)
    s_vals = np.array([-1.0, 1.0]) * math.sqrt(var_m)
    st.accumulate([0, 0], s_vals, [0.0, 0.0])
    # bin 1: half the threshold variance -> proportional weight
    st.accumulate([1, 1], s_vals * math.sqrt(0.5), [0.0, 0.0])
    # bin 2: a single sample has zero spread -> zero weight
    st.accumulate([2], [0.4], [0.0])
    w = direction_weights(st, CFG, F_PX)
    assert w[0] == pytest.approx(1.0)
    assert w[1] == pytest.approx(0.5)
    assert w[2] == 0.0
    assert (w[3:] == 0.0).all()


# ---------------------------------------------------------------------------
# Weighted solve
# ---------------------------------------------------------------------------

def _directional_field(rng, theta, n=240):
    """Stats fed by projections of the level-plane flow field for theta."""
    vx, vy, vz = theta
    st = FlowFieldStats.zeros(6)
    idx = rng.integers(0, 6, n)
    xm = rng.uniform(-0.45, 0.45, n)
    ym = rng.uniform(-0.45, 0.45, n)
    u = -vx + xm * vz
    v = -vy + ym * vz
    s_proj, v_proj = project_flow(xm, ym, u, v, BANK.alphas[idx])
    st.accumulate(idx, s_proj, v_proj)
    return st


@pytest.mark.parametrize("theta", [(0.0, 0.0, 0.2), (0.0, 0.0, 0.5),
                                   (0.0, 0.0, 1.0), (1.0, 0.0, 0.0),
                                   (0.3, -0.4, 0.7)])
def test_solve_recovers_constructed_field_exactly(theta):
    rng = np.random.default_rng(42)
    st = _directional_field(rng, theta)
    sol = solve_observables(st, BANK, CFG, F_PX)
    assert sol is not None
    got, r2, w = sol
    np.testing.assert_allclose(got, theta, atol=1e-9)
    assert r2 == pytest.approx(1.0, abs=1e-9)
    assert w.max() == pytest.approx(1.0)


def test_solve_singular_when_one_direction_only():
    st = FlowFieldStats.zeros(6)
    rng = np.random.default_rng(1)
    s = rng.uniform(-0.4, 0.4, 50)
    st.accumulate(np.zeros(50, dtype=int), s, 0.5 * s)
    assert solve_observables(st, BANK, CFG, F_PX) is None


def test_solve_none_on_empty_stats():
    assert solve_observables(FlowFieldStats.zeros(6), BANK, CFG, F_PX) is None


# ---------------------------------------------------------------------------
# Confidence and filter
# ---------------------------------------------------------------------------

def test_confidence_product_and_clamps():
    assert confidence(500.0, 1.0, 1.0, CFG) == 1.0
    assert confidence(250.0, 1.0, 1.0, CFG) == pytest.approx(0.5)
    assert confidence(1000.0, 0.5, 0.8, CFG) == pytest.approx(0.4)
    assert confidence(0.0, 1.0, 1.0, CFG) == 0.0
    assert confidence(10_000.0, 2.0, 5.0, CFG) == 1.0   # all factors clamp to 1


def test_filter_update_step_and_clamp():
    th = np.zeros(3)
    # raw step 1.0 * 0.01/0.02 = 0.5, clamped to 0.3 per component
    out = filter_update(th, np.array([1.0, -1.0, 0.1]), 1.0, 0.01, CFG)
    np.testing.assert_allclose(out, [0.3, -0.3, 0.05])
    # zero confidence: no movement
    out = filter_update(th, np.array([1.0, 2.0, 3.0]), 0.0, 0.01, CFG)
    np.testing.assert_allclose(out, 0.0)
    # half confidence, unclamped region
    out = filter_update(th, np.array([0.4, 0.0, 0.0]), 0.5, 0.01, CFG)
    np.testing.assert_allclose(out, [0.1, 0.0, 0.0])


# ---------------------------------------------------------------------------
# Stateful estimator
# ---------------------------------------------------------------------------

def _field_chunk(rng, theta, intr, n=300):
    vx, vy, vz = theta
    x_u = rng.uniform(10, 118, n)
    y_u = rng.uniform(10, 118, n)
    xm = (x_u - intr.xp) / intr.focal_px
    ym = (y_u - intr.yp) / intr.focal_px
    u = (-vx + xm * vz) * intr.focal_px
    v = (-vy + ym * vz) * intr.focal_px
    return _flow_chunk(x_u, y_u, u, v)


def test_estimator_converges_to_field(warm_pipeline):
    intr = CameraIntrinsics()
    est = ObservablesEstimator(intr, EstimatorConfig(derotate=False))
    rng = np.random.default_rng(3)
    theta = (0.25, -0.1, 0.6)
    sample = None
    for k in range(1, 60):
        sample = est.update(k * 0.01, _field_chunk(rng, theta, intr))
    assert sample.k > 0.9
    assert sample.vx == pytest.approx(theta[0], abs=0.01)
    assert sample.vy == pytest.approx(theta[1], abs=0.01)
    assert sample.vz == pytest.approx(theta[2], abs=0.01)


def test_estimator_holds_value_and_zeroes_confidence_when_starved():
    intr = CameraIntrinsics()
    est = ObservablesEstimator(intr, EstimatorConfig(derotate=False))
    rng = np.random.default_rng(4)
    for k in range(1, 40):
        est.update(k * 0.01, _field_chunk(rng, (0.0, 0.0, 0.8), intr))
    held = est.theta_hat.copy()
    empty = np.empty(0, dtype=FLOW_DTYPE)
    # statistics decay fully after k_f with no new data: solve fails, K = 0
    s1 = est.update(0.40 + CFG.k_f, empty)
    s2 = est.update(0.45 + CFG.k_f, empty)
    assert s1.k == 0.0 and s2.k == 0.0
    assert s2.rho_f == 0.0
    np.testing.assert_array_equal(est.theta_hat, held)
    assert (s2.vx, s2.vy, s2.vz) == (held[0], held[1], held[2])


def test_estimator_rejects_backwards_time():
    est = ObservablesEstimator(CameraIntrinsics(), EstimatorConfig())
    est.update(0.01, np.empty(0, dtype=FLOW_DTYPE))
    with pytest.raises(ValueError, match="backwards"):
        est.update(0.005, np.empty(0, dtype=FLOW_DTYPE))


def test_estimator_derotation_removes_rotational_bias():
    intr = CameraIntrinsics()
    rng = np.random.default_rng(6)
    theta = (0.0, 0.0, 0.5)
    rates = (0.8, -0.6, 0.0)

    def chunk():
        base = _field_chunk(rng, theta, intr)
        xm = (base["x_u"] - intr.xp) / intr.focal_px
        ym = (base["y_u"] - intr.yp) / intr.focal_px
        ur, vr = flow_rotational(*rates, xm, ym)
        base["u"] += ur * intr.focal_px
        base["v"] += vr * intr.focal_px
        return base

    on = ObservablesEstimator(intr, EstimatorConfig(derotate=True))
    off = ObservablesEstimator(intr, EstimatorConfig(derotate=False))
    for k in range(1, 80):
        s_on = on.update(k * 0.01, chunk(), rates=rates)
        s_off = off.update(k * 0.01, chunk(), rates=rates)
    err_on = math.hypot(s_on.vx - theta[0], s_on.vy - theta[1])
    err_off = math.hypot(s_off.vx - theta[0], s_off.vy - theta[1])
    assert err_on < 0.05
    assert err_off > 3 * err_on


def test_estimator_reset():
    est = ObservablesEstimator(CameraIntrinsics(), EstimatorConfig(derotate=False))
    rng = np.random.default_rng(5)
    for k in range(1, 20):
        est.update(k * 0.01, _field_chunk(rng, (0.2, 0.0, 0.4), CameraIntrinsics()))
    assert np.abs(est.theta_hat).sum() > 0
    est.reset()
    assert np.array_equal(est.theta_hat, np.zeros(3))
    assert est.stats.n.sum() == 0


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------

def test_observables_csv_roundtrip(tmp_path):
    est = ObservablesEstimator(CameraIntrinsics(), EstimatorConfig(derotate=False))
    rng = np.random.default_rng(2)
    samples = [est.update(k * 0.01, _field_chunk(rng, (0.1, 0.2, 0.3),
                                                 CameraIntrinsics()))
               for k in range(1, 11)]
    path = tmp_path / "obs.csv"
    write_observables_csv(path, samples)
    back = read_observables_csv(path)
    assert back.shape[0] == 10
    np.testing.assert_allclose(back["vz"], [s.vz for s in samples], rtol=1e-9)
    np.testing.assert_allclose(back["k"], [s.k for s in samples], rtol=1e-9)


def test_rates_csv_roundtrip(tmp_path):
    t = np.linspace(0, 1, 11)
    p = np.sin(t)
    path = tmp_path / "rates.csv"
    write_rates_csv(path, t, 0 * t, 0 * t, 0 * t, p, -p, 0.5 * p)
    back = read_rates_csv(path)
    np.testing.assert_allclose(back["t_s"], t, atol=1e-9)
    np.testing.assert_allclose(back["p"], p, atol=1e-9)
    np.testing.assert_allclose(back["q"], -p, atol=1e-9)
