"""Constant-divergence vertical landing in closed loop.

A point-mass vehicle (thrust up, gravity down) descends while a
downward event camera feeds the flow pipeline and observables
estimator; a proportional law regulates estimated divergence
(vz = w/z, positive while descending) to a setpoint.  Commanding a
constant divergence makes both height and vertical speed decay
exponentially, touching down with zero speed in theory.

The control law takes the divergence error in physical units (1/s) and
maps it through a fixed control authority (N per 1/s); thrust saturates
at [0, t_max].  Before the landing phase the vehicle hovers under an
altitude PI loop while the estimator warms up and the thrust trim T0 is
measured.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .camera import CameraIntrinsics
from .observables import EstimatorConfig, ObservablesEstimator
from .planefit import FlowConfig, FlowPipeline
from .render import EventRenderer, RenderConfig, make_texture

G_MPS2 = 9.81

RUN_LOG_HEADER = "t_s,z_m,w_mps,vz_true,vz_hat,K,thrust"
RUN_LOG_DTYPE = np.dtype([("t_s", "<f8"), ("z_m", "<f8"), ("w_mps", "<f8"),
                          ("vz_true", "<f8"), ("vz_hat", "<f8"),
                          ("k", "<f8"), ("thrust", "<f8")])


@dataclass
class VehicleState:
    z_m: float          # height above ground (up positive)
    w_mps: float = 0.0  # descent speed (down positive)


def step_dynamics(state: VehicleState, thrust_n: float, mass_kg: float,
                  dt_s: float) -> VehicleState:
    """Semi-implicit Euler step: thrust up, gravity down."""
    w = state.w_mps + (G_MPS2 - thrust_n / mass_kg) * dt_s
    return VehicleState(z_m=state.z_m - w * dt_s, w_mps=w)


def divergence_controller(vz_hat: float, setpoint: float, t0_n: float,
                          k_p: float, authority_n: float,
                          t_max_n: float) -> float:
    """Thrust command regulating divergence to the setpoint.

    Divergence above the setpoint means descending too fast for the
    current height, so thrust increases to brake.
    """
    t = t0_n + k_p * authority_n * (vz_hat - setpoint)
    return min(max(t, 0.0), t_max_n)


@dataclass(frozen=True)
class LandingConfig:
    z0_m: float = 3.5
    vz_setpoint: float = 0.5      # commanded divergence (1/s)
    k_p: float = 0.2
    authority_n: float = 125.0    # thrust per unit divergence error
    mass_kg: float = 1.0
    t_max_n: float = 2.0 * 9.81
    z_touchdown_m: float = 0.05
    dt_sim_s: float = 1e-3
    hover_s: float = 3.0          # hover phase before descent
    trim_s: float = 2.0           # tail of hover used to measure T0
    timeout_s: float = 30.0
    starvation_s: float = 1.0     # abort if no confident estimate this long
    ideal_observables: bool = False
    texture: str = "roadmap"
    seed: int = 0
    flow: FlowConfig = field(default_factory=lambda: FlowConfig(rho_f_max=3000.0))
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    render: RenderConfig = field(default_factory=RenderConfig)


@dataclass
class LandingResult:
    log: np.ndarray               # RUN_LOG_DTYPE rows at every sim step
    touchdown: bool
    aborted: bool
    t_end_s: float
    t0_n: float
    t_descent_start_s: float
    oscillation_z_m: Optional[float] = None

    def summary(self) -> dict:
        return {
            "touchdown": self.touchdown,
            "aborted": self.aborted,
            "t_end_s": round(self.t_end_s, 4),
            "t_descent_start_s": round(self.t_descent_start_s, 4),
            "t0_n": round(self.t0_n, 4),
            "z_end_m": round(float(self.log["z_m"][-1]), 4),
            "w_end_mps": round(float(self.log["w_mps"][-1]), 4),
            "oscillation_z_m": (None if self.oscillation_z_m is None
                                else round(self.oscillation_z_m, 3)),
        }


class _HoverPI:
    """Altitude hold: outer P on height error, inner PI on speed."""

    def __init__(self, z_ref: float, mass_kg: float,
                 k_z: float = 1.0, k_w: float = 5.0, k_i: float = 20.0):
        self.z_ref = z_ref
        self.k_z = k_z
        self.k_w = k_w
        self.k_i = k_i
        self.t_base = mass_kg * G_MPS2
        self.mass_kg = mass_kg

    def thrust(self, state: VehicleState, dt_s: float, t_max_n: float) -> float:
        w_cmd = self.k_z * (state.z_m - self.z_ref)   # descend if too high
        err = state.w_mps - w_cmd
        self.t_base += self.k_i * err * dt_s * self.mass_kg
        t = self.t_base + self.k_w * err * self.mass_kg
        return min(max(t, 0.0), t_max_n)


def detect_oscillation_onset(log: np.ndarray, t_start_s: float,
                             window_s: float = 0.5, amp_mps: float = 0.25,
                             transient_s: float = 0.5) -> Optional[float]:
    """Height at which the speed trace first shows sustained swings.

    Scans the descent (after the commanded transient) in sliding
    windows; a window oscillates when its peak-to-peak speed spread
    exceeds amp_mps AND the speed reverses direction several times
    (a monotone ramp does not count).  Returns the height at the first
    such window, or None.
    """
    sel = log["t_s"] >= t_start_s + transient_s
    t = log["t_s"][sel]
    w = log["w_mps"][sel]
    z = log["z_m"][sel]
    if t.size < 3:
        return None
    dt = t[1] - t[0]
    win = max(int(round(window_s / dt)), 4)
    for i in range(0, t.size - win):
        seg = w[i:i + win]
        if seg.max() - seg.min() <= amp_mps:
            continue
        d = np.diff(seg)
        d = d[d != 0.0]
        if d.size >= 2 and np.count_nonzero(np.diff(np.sign(d)) != 0) >= 3:
            return float(z[i])
    return None


def run_closed_loop(cfg: LandingConfig = LandingConfig(),
                    intr: CameraIntrinsics = CameraIntrinsics()) -> LandingResult:
    """Hover, trim, then land at constant commanded divergence."""
    from .planefit import FLOW_DTYPE

    dt = cfg.dt_sim_s
    est_period_s = 1.0 / cfg.estimator.rate_hz
    use_vision = not cfg.ideal_observables
    if use_vision:
        rng = np.random.default_rng(cfg.seed)
        texture = make_texture(cfg.texture, seed=cfg.seed)
        renderer = EventRenderer(texture, intr, cfg.render, rng)
        pipeline = FlowPipeline(intr, cfg.flow)
        estimator = ObservablesEstimator(intr, cfg.estimator)
        flow_buf: list[np.ndarray] = []

    state = VehicleState(z_m=cfg.z0_m, w_mps=0.0)
    hover = _HoverPI(cfg.z0_m, cfg.mass_kg)
    thrust = cfg.mass_kg * G_MPS2
    vz_hat = 0.0
    k_conf = 0.0
    n_steps = int(round(cfg.timeout_s / dt))
    rows = np.zeros(n_steps + 1, dtype=RUN_LOG_DTYPE)
    trim_acc: list[float] = []
    hover_end = cfg.hover_s
    t0_n = cfg.mass_kg * G_MPS2
    touchdown = False
    aborted = False
    last_conf_t = hover_end
    next_est_t = est_period_s
    n_logged = 0
    t_end = 0.0

    for k in range(n_steps + 1):
        t = k * dt
        vz_true = state.w_mps / state.z_m

        if use_vision:
            chunk = renderer.step(t, 0.0, 0.0, state.z_m)
            if chunk.shape[0]:
                flow = pipeline.process(chunk)
                if flow.shape[0]:
                    flow_buf.append(flow)
            if t + 1e-9 >= next_est_t:
                batch = (np.concatenate(flow_buf) if flow_buf
                         else np.empty(0, dtype=FLOW_DTYPE))
                flow_buf.clear()
                sample = estimator.update(t, batch)
                vz_hat = sample.vz
                k_conf = sample.k
                if k_conf > 0.0:
                    last_conf_t = t
                next_est_t += est_period_s
        else:
            vz_hat = vz_true
            k_conf = 1.0

        rows[n_logged] = (t, state.z_m, state.w_mps, vz_true, vz_hat,
                          k_conf, thrust)
        n_logged += 1
        t_end = t
        landing = t >= hover_end
        if landing and state.z_m <= cfg.z_touchdown_m:
            touchdown = True
            break
        if landing and use_vision and (t - max(last_conf_t, hover_end)
                                       ) > cfg.starvation_s:
            aborted = True
            break

        if landing:
            thrust = divergence_controller(vz_hat, cfg.vz_setpoint, t0_n,
                                           cfg.k_p, cfg.authority_n,
                                           cfg.t_max_n)
        else:
            thrust = hover.thrust(state, dt, cfg.t_max_n)
            if t >= hover_end - cfg.trim_s:
                trim_acc.append(thrust)
            if trim_acc and t + dt >= hover_end:
                t0_n = float(np.mean(trim_acc))
        state = step_dynamics(state, thrust, cfg.mass_kg, dt)

    log = rows[:n_logged]
    osc = detect_oscillation_onset(log, hover_end) if n_logged else None
    return LandingResult(log=log, touchdown=touchdown, aborted=aborted,
                         t_end_s=t_end, t0_n=t0_n,
                         t_descent_start_s=hover_end, oscillation_z_m=osc)


def write_run_log_csv(path, log: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(RUN_LOG_HEADER + "\n")
        for row in log:
            fh.write("%.6f,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n" % tuple(row))


def read_run_log_csv(path) -> np.ndarray:
    data = np.genfromtxt(path, delimiter=",", names=True)
    out = np.zeros(data.shape[0] if data.ndim else 1, dtype=RUN_LOG_DTYPE)
    src = np.atleast_1d(data)
    for name_src, name_dst in zip(src.dtype.names, RUN_LOG_DTYPE.names):
        out[name_dst] = src[name_src]
    return out
