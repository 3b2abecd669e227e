"""Evaluation metrics, scenario builders, and throughput benchmarks.

Accuracy of normal flow against a known full-flow field is scored with
the projection endpoint error: PEE = | ||V|| - (V/||V||) . V_GT |, the
gap between the estimated normal-flow magnitude and the ground-truth
flow projected onto the estimate's direction.  Angular/endpoint errors
for full flow do not apply to normal flow and are not provided.

Flow density eta is the percentage of processed events that produced a
flow vector; the denominator excludes refractory-suppressed events by
default (switchable).

Divergence tracking error across descents is summarized by a quadratic
model eps(theta_z) = p0 + p1*theta_z + p2*theta_z^2 fitted by ordinary
least squares, plus 25/50/75% error percentiles per |theta_z| bin.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .camera import CameraIntrinsics, to_metric
from .geometry import EgoMotion, flow_full
from .observables import EstimatorConfig, ObservablesEstimator, ObservablesSample
from .planefit import FLOW_DTYPE, FlowConfig, FlowPipeline, PipelineStats
from .render import RenderConfig, make_texture, run_scripted

# ---------------------------------------------------------------------------
# projection endpoint error


def pee(u: np.ndarray, v: np.ndarray, u_gt: np.ndarray,
        v_gt: np.ndarray) -> np.ndarray:
    """Per-vector projection endpoint error (same units as the inputs)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    mag = np.hypot(u, v)
    safe = np.where(mag > 0.0, mag, 1.0)
    proj = (u * np.asarray(u_gt) + v * np.asarray(v_gt)) / safe
    return np.abs(np.where(mag > 0.0, mag - proj, np.hypot(u_gt, v_gt)))


def pee_stats(u, v, u_gt, v_gt) -> tuple[float, float]:
    """Mean absolute PEE and its standard deviation."""
    e = pee(u, v, u_gt, v_gt)
    if e.size == 0:
        return math.nan, math.nan
    return float(e.mean()), float(e.std())


# ---------------------------------------------------------------------------
# flow density


def density(n_flow: int, n_events: int) -> float:
    """Percentage of events that yielded a flow vector."""
    if n_events <= 0:
        return 0.0
    return 100.0 * n_flow / n_events


def stream_density(stats: PipelineStats,
                   denominator: str = "post_refractory") -> float:
    """Density of a processed stream.

    denominator: "post_refractory" counts only events that survived the
    refractory filter; "raw" counts every input event.
    """
    if denominator == "post_refractory":
        n = stats.n_accepted
    elif denominator == "raw":
        n = stats.n_events
    else:
        raise ValueError("denominator must be 'post_refractory' or 'raw'")
    return density(stats.n_emitted, n)


# ---------------------------------------------------------------------------
# quadratic error-vs-divergence model


@dataclass(frozen=True)
class QuadraticErrorModel:
    p0: float
    p1: float
    p2: float
    percentiles: np.ndarray  # rows: |theta_z| bin center, q25, q50, q75

    def predict(self, theta_z: float) -> float:
        a = abs(theta_z)
        return self.p0 + self.p1 * a + self.p2 * a * a


def fit_quadratic(theta_abs: Sequence[float],
                  eps: Sequence[float],
                  n_bins: int = 8) -> QuadraticErrorModel:
    """OLS fit of eps = p0 + p1*|theta_z| + p2*theta_z^2.

    Raises ValueError when fewer than three distinct |theta_z| values
    are present (the quadratic would be underdetermined).
    """
    th = np.abs(np.asarray(theta_abs, dtype=np.float64))
    ep = np.asarray(eps, dtype=np.float64)
    if th.shape != ep.shape or th.ndim != 1:
        raise ValueError("theta_abs and eps must be 1-d arrays of equal length")
    if np.unique(np.round(th, 12)).size < 3:
        raise ValueError("quadratic fit needs >= 3 distinct |theta_z| values")
    a = np.stack([np.ones_like(th), th, th * th], axis=1)
    coef, *_ = np.linalg.lstsq(a, ep, rcond=None)

    edges = np.linspace(th.min(), th.max(), n_bins + 1)
    rows = []
    for i in range(n_bins):
        hi_ok = th <= edges[i + 1] if i == n_bins - 1 else th < edges[i + 1]
        m = (th >= edges[i]) & hi_ok
        if m.sum() < 3:
            continue
        q25, q50, q75 = np.percentile(ep[m], [25.0, 50.0, 75.0])
        rows.append((0.5 * (edges[i] + edges[i + 1]), q25, q50, q75))
    pct = np.array(rows, dtype=np.float64) if rows else np.empty((0, 4))
    return QuadraticErrorModel(float(coef[0]), float(coef[1]), float(coef[2]),
                               pct)


# ---------------------------------------------------------------------------
# ground truth helpers (zero-attitude downward camera over flat ground)


def theta_from_truth(row) -> tuple[float, float, float]:
    """Scaled-velocity triple (theta_x, theta_y, theta_z) of a truth row."""
    z = float(row["z"])
    return (float(row["vx_w"]) / z, -float(row["vy_w"]) / z,
            -float(row["vz_w"]) / z)


def gt_flow_pps(intr: CameraIntrinsics, row, x_u: np.ndarray,
                y_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth full flow (pixels/s) at undistorted pixel positions."""
    xm, ym = to_metric(intr, np.asarray(x_u, float), np.asarray(y_u, float))
    motion = EgoMotion(u_c=float(row["vx_w"]), v_c=-float(row["vy_w"]),
                       w_c=-float(row["vz_w"]), p=float(row["p"]),
                       q=float(row["q"]), r=float(row["r"]))
    um, vm = flow_full(motion, xm, ym, float(row["z"]))
    return um * intr.focal_px, vm * intr.focal_px


# ---------------------------------------------------------------------------
# scenario builders (synthetic streams with exact truth)


def make_translation_scenario(flow_pps: float, duration_s: float,
                              texture_name: str = "checkerboard",
                              z_m: float = 1.0, seed: int = 0,
                              intr: CameraIntrinsics = CameraIntrinsics(),
                              rcfg: RenderConfig = RenderConfig()):
    """Constant-height horizontal motion giving uniform image flow.

    The camera translates along world +X at the speed that makes the
    ground-truth image flow magnitude equal flow_pps everywhere.
    """
    vx = -flow_pps * z_m / intr.focal_px
    texture = make_texture(texture_name, seed=seed)

    def pos(t):
        return (vx * t, 0.0, z_m)

    def vel(t):
        return (vx, 0.0, 0.0)

    return run_scripted(texture, intr, rcfg, duration_s, pos, vel, seed=seed)


def make_descent_scenario(w_mps: float, z0_m: float, z1_m: float,
                          texture_name: str = "roadmap", seed: int = 0,
                          intr: CameraIntrinsics = CameraIntrinsics(),
                          rcfg: RenderConfig = RenderConfig()):
    """Constant-speed vertical descent from z0 to z1 (w_mps down)."""
    if not z0_m > z1_m > 0.0:
        raise ValueError("need z0_m > z1_m > 0")
    duration = (z0_m - z1_m) / w_mps
    texture = make_texture(texture_name, seed=seed)

    def pos(t):
        return (0.0, 0.0, z0_m - w_mps * t)

    def vel(t):
        return (0.0, 0.0, -w_mps)

    return run_scripted(texture, intr, rcfg, duration, pos, vel, seed=seed)


def make_rotation_scenario(amp_p: float, amp_q: float, amp_r: float,
                           duration_s: float = 1.0, period_s: float = 1.0,
                           z_m: float = 1.0, texture_name: str = "roadmap",
                           seed: int = 0,
                           intr: CameraIntrinsics = CameraIntrinsics(),
                           rcfg: RenderConfig = RenderConfig()):
    """Stationary hover with sinusoidal body rates (peak amp, rad/s).

    Sinusoidal rates keep the accumulated attitude small so every pixel
    ray keeps intersecting the ground.  Returns (events, truth, rates_fn).
    """
    texture = make_texture(texture_name, seed=seed)
    om = 2.0 * math.pi / period_s

    def rates(t):
        return (amp_p * math.sin(om * t), amp_q * math.sin(om * t),
                amp_r * math.sin(om * t))

    def pos(t):
        return (0.0, 0.0, z_m)

    def vel(t):
        return (0.0, 0.0, 0.0)

    events, truth = run_scripted(texture, intr, rcfg, duration_s, pos, vel,
                                 rates_fn=rates, seed=seed)
    return events, truth, rates


# ---------------------------------------------------------------------------
# pipeline composition


def run_flow(events: np.ndarray, intr: CameraIntrinsics = CameraIntrinsics(),
             cfg: FlowConfig = FlowConfig()):
    """Run the flow pipeline over a whole stream; (flow, stats)."""
    pipe = FlowPipeline(intr, cfg)
    flow = pipe.process(events)
    return flow, pipe.stats


def run_estimator_over_flow(flow: np.ndarray,
                            intr: CameraIntrinsics = CameraIntrinsics(),
                            cfg: EstimatorConfig = EstimatorConfig(),
                            rates_fn: Optional[Callable] = None,
                            t_start_s: float = 0.0,
                            t_end_s: Optional[float] = None
                            ) -> list[ObservablesSample]:
    """Tick the observables estimator over an emitted flow array.

    Updates run at the estimator rate from t_start_s to t_end_s
    (defaults to the last flow timestamp); each tick consumes the flow
    emitted since the previous one.  rates_fn(t) -> (p, q, r) supplies
    the derotation channel.
    """
    est = ObservablesEstimator(intr, cfg)
    period = 1.0 / cfg.rate_hz
    if t_end_s is None:
        t_end_s = float(flow["t"][-1]) * 1e-6 if flow.shape[0] else t_start_s
    t_us = flow["t"] if flow.shape[0] else np.empty(0, dtype=np.int64)
    samples = []
    k = 1
    prev_idx = np.searchsorted(t_us, int(round(t_start_s * 1e6)), side="right")
    while True:
        t = t_start_s + k * period
        if t > t_end_s + 0.5 * period:
            break
        idx = np.searchsorted(t_us, int(round(t * 1e6)), side="right")
        batch = flow[prev_idx:idx] if idx > prev_idx else np.empty(
            0, dtype=FLOW_DTYPE)
        rates = rates_fn(t) if rates_fn is not None else None
        samples.append(est.update(t, batch, rates=rates))
        prev_idx = idx
        k += 1
    return samples


def divergence_errors(samples: Sequence[ObservablesSample], truth,
                      warmup_s: float = 0.5,
                      min_k: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """(|theta_z| truth, |error|) pairs for the quadratic error model.

    Truth is interpolated at each sample time; samples inside the
    warm-up window or below the confidence floor are skipped.
    """
    tt = np.asarray(truth["t_s"], dtype=np.float64)
    tz = -np.asarray(truth["vz_w"], dtype=np.float64) / np.asarray(
        truth["z"], dtype=np.float64)
    th, er = [], []
    for s in samples:
        if s.t_s < warmup_s or s.k < min_k:
            continue
        tz_true = float(np.interp(s.t_s, tt, tz))
        th.append(abs(tz_true))
        er.append(abs(s.vz - tz_true))
    return np.asarray(th), np.asarray(er)


# ---------------------------------------------------------------------------
# throughput benchmark

SWEEP_HEADER = "rho_f_max,us_per_event_mean,us_per_event_sd"
SWEEP_DTYPE = np.dtype([("rho_f_max", "<f8"), ("us_per_event_mean", "<f8"),
                        ("us_per_event_sd", "<f8")])

DEFAULT_CAPS = (1000.0, 3000.0, 10000.0, 30000.0, math.inf)


def bench_throughput(events: np.ndarray,
                     intr: CameraIntrinsics = CameraIntrinsics(),
                     cfg: FlowConfig = FlowConfig(),
                     caps: Sequence[float] = DEFAULT_CAPS,
                     repetitions: int = 10) -> np.ndarray:
    """Wall-clock per-event cost for each output-rate cap.

    Each cap setting processes the stream `repetitions` times on a
    freshly reset pipeline; a warm-up pass runs first so compilation is
    excluded from the timings.
    """
    if events.shape[0] == 0:
        raise ValueError("benchmark stream is empty")
    n = events.shape[0]
    warm = FlowPipeline(intr, cfg)
    warm.process(events[: min(n, 2000)])

    rows = np.empty(len(caps), dtype=SWEEP_DTYPE)
    for i, cap in enumerate(caps):
        pipe = FlowPipeline(intr, replace(cfg, rho_f_max=float(cap)))
        per_event = np.empty(repetitions)
        for rep in range(repetitions):
            pipe.reset()
            tic = time.perf_counter()
            pipe.process(events)
            per_event[rep] = (time.perf_counter() - tic) / n * 1e6
        rows[i] = (cap, per_event.mean(), per_event.std())
    return rows


def write_sweep_csv(path, rows: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for r in rows:
            fh.write("%g,%.6g,%.6g\n" % tuple(r))


def read_sweep_csv(path) -> np.ndarray:
    data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True))
    out = np.empty(data.shape[0], dtype=SWEEP_DTYPE)
    for name in SWEEP_DTYPE.names:
        out[name] = data[name]
    return out
