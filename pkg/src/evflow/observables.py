"""Periodic ventral-flow / divergence estimation from normal-flow vectors.

Normal flow only constrains the flow component along the local edge
normal, so vectors are binned into m directions alpha_k = k*pi/m
(flow angles folded onto [0, pi)).  For each vector, position and flow
are projected onto its direction:

    S = xm cos a + ym sin a        (position projection, metric)
    V = um cos a + vm sin a        (flow projection, 1/s)

and rotational flow predicted from gyro rates is subtracted (derotation).
Over a planar scene each direction obeys the linear model

    V = -vx cos a - vy sin a + vz S

so the scaled velocities Theta = (vx, vy, vz) follow from a weighted
least-squares solve over per-direction accumulated statistics
(n, sum S, sum S^2, sum V, sum SV, sum V^2).  Statistics decay by
F = max(0, 1 - dt/k_f) each tick, giving a sliding exponential-ish window
that tolerates tick jitter.  Direction weights derive from the spatial
spread Var{S} (in px^2); a confidence value

    K = k_rho * k_var * k_r2

(rate, spread, and fit-quality factors, each in [0, 1]) scales a clamped
low-pass filter on the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .camera import CameraIntrinsics
from .events import EventFormatError
from .geometry import flow_rotational

OBSERVABLES_CSV_HEADER = "t_s,vx,vy,vz,K,rho_f,r2"
RATES_CSV_HEADER = "t_s,phi,theta,psi,p,q,r"


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator parameters.

    rate_hz    : nominal tick rate
    var_s_min  : full-weight spatial spread threshold, px^2
    k_f        : statistics decay window, s
    r2_min     : full-confidence coefficient of determination
    rho_f_min  : full-confidence flow-vector rate, 1/s
    k_t        : filter time constant, s
    dtheta_max : per-component filter step clamp, 1/s
    n_dirs     : number of flow-field directions
    derotate   : subtract rate-predicted rotational flow
    """

    rate_hz: float = 100.0
    var_s_min: float = 600.0
    k_f: float = 0.02
    r2_min: float = 1.0
    rho_f_min: float = 500.0
    k_t: float = 0.02
    dtheta_max: float = 0.3
    n_dirs: int = 6
    derotate: bool = True


@dataclass(frozen=True)
class DirectionBank:
    """Direction angles alpha_k = k*pi/m and their cos/sin tables."""

    alphas: np.ndarray
    cos: np.ndarray
    sin: np.ndarray

    @classmethod
    def make(cls, m: int = 6) -> "DirectionBank":
        a = np.arange(m, dtype=np.float64) * math.pi / m
        return cls(alphas=a, cos=np.cos(a), sin=np.sin(a))

    @property
    def m(self) -> int:
        return self.alphas.shape[0]


class ObservablesSample(NamedTuple):
    t_s: float
    vx: float
    vy: float
    vz: float
    k: float
    rho_f: float
    r2: float


def assign_direction(u, v, bank: DirectionBank):
    """Nearest direction index for flow angle folded onto [0, pi).

    Angular distance wraps at pi; exact ties resolve to the lower index.
    """
    af = np.arctan2(v, u)
    af = np.where(af < 0.0, af + math.pi, af)
    d = np.abs((af[..., None] - bank.alphas + math.pi / 2.0) % math.pi
               - math.pi / 2.0)
    return np.argmin(d, axis=-1)


def project_flow(xm, ym, um, vm, alpha):
    """Position and flow projections (S, V) onto direction alpha."""
    c = np.cos(alpha)
    s = np.sin(alpha)
    return xm * c + ym * s, um * c + vm * s


def derotate(v_proj, alpha, xm, ym, p: float, q: float, r: float):
    """Remove the projected rotational flow from a flow projection.

    V_T = V - (u_rot cos a + v_rot sin a), with (u_rot, v_rot) the
    rotation-only flow at (xm, ym); a rotation-only field derotates to
    exactly zero.
    """
    u_rot, v_rot = flow_rotational(p, q, r, xm, ym)
    return v_proj - (u_rot * np.cos(alpha) + v_rot * np.sin(alpha))


@dataclass
class FlowFieldStats:
    """Per-direction running sums (decayed each tick)."""

    n: np.ndarray
    s_s: np.ndarray
    s_s2: np.ndarray
    s_v: np.ndarray
    s_sv: np.ndarray
    s_v2: np.ndarray

    @classmethod
    def zeros(cls, m: int) -> "FlowFieldStats":
        return cls(*(np.zeros(m, dtype=np.float64) for _ in range(6)))

    def decay(self, dt_s: float, k_f: float) -> float:
        """Scale all sums by F = max(0, 1 - dt/k_f); returns F."""
        f = max(0.0, 1.0 - dt_s / k_f)
        for a in (self.n, self.s_s, self.s_s2, self.s_v, self.s_sv, self.s_v2):
            a *= f
        return f

    def accumulate(self, idx, s, v) -> None:
        m = self.n.shape[0]
        idx = np.asarray(idx)
        s = np.asarray(s, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        self.n += np.bincount(idx, minlength=m)
        self.s_s += np.bincount(idx, weights=s, minlength=m)
        self.s_s2 += np.bincount(idx, weights=s * s, minlength=m)
        self.s_v += np.bincount(idx, weights=v, minlength=m)
        self.s_sv += np.bincount(idx, weights=s * v, minlength=m)
        self.s_v2 += np.bincount(idx, weights=v * v, minlength=m)


def direction_weights(stats: FlowFieldStats, cfg: EstimatorConfig,
                      focal_px: float) -> np.ndarray:
    """Spread-based weights: 0 for empty/degenerate, Var/var_s_min below
    threshold, 1 above.  Var{S} is evaluated in px^2 (metric spread * f^2)."""
    m = stats.n.shape[0]
    w = np.zeros(m, dtype=np.float64)
    nz = stats.n > 1e-12
    if not nz.any():
        return w
    mean_s = np.where(nz, stats.s_s / np.where(nz, stats.n, 1.0), 0.0)
    var = np.where(nz, stats.s_s2 / np.where(nz, stats.n, 1.0) - mean_s ** 2, 0.0)
    var_px = np.clip(var, 0.0, None) * focal_px * focal_px
    w = np.where(var_px > 0.0, np.minimum(var_px / cfg.var_s_min, 1.0), 0.0)
    return w


def solve_observables(stats: FlowFieldStats, bank: DirectionBank,
                      cfg: EstimatorConfig, focal_px: float):
    """Weighted LSQ for Theta = (vx, vy, vz) over the direction statistics.

    Returns (theta, r2, weights) or None when the system is singular or
    all weights vanish.  The design matrix rows are (-cos a, -sin a, S),
    so the cross terms carry the corresponding minus signs.
    """
    w = direction_weights(stats, cfg, focal_px)
    if not (w > 0.0).any():
        return None
    c = bank.cos
    s = bank.sin
    wn = w * stats.n
    b = np.empty((3, 3), dtype=np.float64)
    b[0, 0] = np.sum(wn * c * c)
    b[0, 1] = b[1, 0] = np.sum(wn * c * s)
    b[1, 1] = np.sum(wn * s * s)
    b[2, 0] = b[0, 2] = -np.sum(w * c * stats.s_s)
    b[2, 1] = b[1, 2] = -np.sum(w * s * stats.s_s)
    b[2, 2] = np.sum(w * stats.s_s2)
    rhs = np.array([-np.sum(w * c * stats.s_v),
                    -np.sum(w * s * stats.s_v),
                    np.sum(w * stats.s_sv)])
    sv = np.linalg.svd(b, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        return None
    theta = np.linalg.solve(b, rhs)
    swv2 = np.sum(w * stats.s_v2)
    rss = max(0.0, swv2 - float(theta @ rhs))
    n_tot = np.sum(wn)
    tss = swv2 - np.sum(w * stats.s_v) ** 2 / n_tot if n_tot > 0 else 0.0
    r2 = 1.0 - rss / tss if tss > 1e-300 else 0.0
    return theta, float(r2), w


def confidence(rho_f: float, w_max: float, r2: float,
               cfg: EstimatorConfig) -> float:
    """K = k_rho * k_var * k_r2, all factors clamped to [0, 1]."""
    k_rho = min(max(rho_f / cfg.rho_f_min, 0.0), 1.0)
    k_var = min(max(w_max, 0.0), 1.0)
    k_r2 = min(max(r2 / cfg.r2_min, 0.0), 1.0)
    return k_rho * k_var * k_r2


def filter_update(theta_hat: np.ndarray, theta: np.ndarray, k: float,
                  dt_s: float, cfg: EstimatorConfig) -> np.ndarray:
    """Confidence-scaled low-pass step with per-component clamp."""
    step = (np.asarray(theta) - theta_hat) * (k * dt_s / cfg.k_t)
    step = np.clip(step, -cfg.dtheta_max, cfg.dtheta_max)
    return theta_hat + step


class ObservablesEstimator:
    """Stateful periodic estimator.

    Feed each tick's new flow vectors (with per-vector gyro rates when
    derotation is on); the estimator decays its statistics by the actual
    elapsed time, accumulates, solves, and advances the confidence filter.
    When the solve fails the previous filtered estimate is held (K = 0).
    """

    def __init__(self, intr: CameraIntrinsics = CameraIntrinsics(),
                 cfg: EstimatorConfig = EstimatorConfig()):
        self.intr = intr
        self.cfg = cfg
        self.bank = DirectionBank.make(cfg.n_dirs)
        self.stats = FlowFieldStats.zeros(cfg.n_dirs)
        self.theta_hat = np.zeros(3, dtype=np.float64)
        self._t_prev: Optional[float] = None

    def reset(self) -> None:
        self.stats = FlowFieldStats.zeros(self.cfg.n_dirs)
        self.theta_hat = np.zeros(3, dtype=np.float64)
        self._t_prev = None

    def update(self, t_s: float, flow: np.ndarray,
               rates=None) -> ObservablesSample:
        """Advance one tick ending at t_s.

        ``flow`` is a FLOW_DTYPE chunk (vectors since the previous tick);
        ``rates`` is (p, q, r) as scalars or per-vector arrays.  Returns
        the filtered observables sample for this tick.
        """
        cfg = self.cfg
        dt = (t_s - self._t_prev) if self._t_prev is not None else 1.0 / cfg.rate_hz
        self._t_prev = t_s
        if dt < 0:
            raise ValueError(f"estimator tick moved backwards (dt={dt:.6g} s)")
        self.stats.decay(dt, cfg.k_f)
        n_new = int(flow.shape[0]) if flow is not None else 0
        if n_new:
            f = self.intr.focal_px
            xm = (flow["x_u"] - self.intr.xp) / f
            ym = (flow["y_u"] - self.intr.yp) / f
            um = flow["u"] / f
            vm = flow["v"] / f
            idx = assign_direction(um, vm, self.bank)
            alpha = self.bank.alphas[idx]
            s_proj, v_proj = project_flow(xm, ym, um, vm, alpha)
            if cfg.derotate and rates is not None:
                p, q, r = rates
                u_rot, v_rot = flow_rotational(p, q, r, xm, ym)
                v_proj = v_proj - (u_rot * self.bank.cos[idx]
                                   + v_rot * self.bank.sin[idx])
            self.stats.accumulate(idx, s_proj, v_proj)
        rho_f = n_new * cfg.rate_hz
        sol = solve_observables(self.stats, self.bank, cfg, self.intr.focal_px)
        if sol is None:
            return ObservablesSample(t_s, self.theta_hat[0], self.theta_hat[1],
                                     self.theta_hat[2], 0.0, rho_f, 0.0)
        theta, r2, w = sol
        k = confidence(rho_f, float(w.max()), r2, cfg)
        self.theta_hat = filter_update(self.theta_hat, theta, k, dt, cfg)
        return ObservablesSample(t_s, self.theta_hat[0], self.theta_hat[1],
                                 self.theta_hat[2], k, rho_f, r2)


# ---------------------------------------------------------------------------
# Observables / rates file IO.
# ---------------------------------------------------------------------------

def write_observables_csv(path, samples) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(OBSERVABLES_CSV_HEADER + "\n")
        for s in samples:
            fh.write(f"{s.t_s:.6f},{s.vx:.10g},{s.vy:.10g},{s.vz:.10g},"
                     f"{s.k:.10g},{s.rho_f:.10g},{s.r2:.10g}\n")


def read_observables_csv(path) -> np.ndarray:
    dt = np.dtype([("t_s", "<f8"), ("vx", "<f8"), ("vy", "<f8"), ("vz", "<f8"),
                   ("k", "<f8"), ("rho_f", "<f8"), ("r2", "<f8")])
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header and header != OBSERVABLES_CSV_HEADER:
            raise EventFormatError(
                f"{path}: expected header '{OBSERVABLES_CSV_HEADER}'")
        rows = [tuple(float(v) for v in line.strip().split(","))
                for line in fh if line.strip()]
    return np.array(rows, dtype=dt) if rows else np.empty(0, dtype=dt)


def read_rates_csv(path) -> np.ndarray:
    """Attitude/rate channel: t_s, phi, theta, psi, p, q, r."""
    dt = np.dtype([("t_s", "<f8"), ("phi", "<f8"), ("theta", "<f8"),
                   ("psi", "<f8"), ("p", "<f8"), ("q", "<f8"), ("r", "<f8")])
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header and header != RATES_CSV_HEADER:
            raise EventFormatError(f"{path}: expected header '{RATES_CSV_HEADER}'")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise EventFormatError(f"{path}: line {lineno}: expected 7 fields")
            rows.append(tuple(float(v) for v in parts))
    arr = np.array(rows, dtype=dt) if rows else np.empty(0, dtype=dt)
    if arr.size > 1 and np.any(np.diff(arr["t_s"]) < 0):
        raise EventFormatError(f"{path}: rate timestamps must be non-decreasing")
    return arr


def write_rates_csv(path, t_s, phi, theta, psi, p, q, r) -> None:
    cols = [np.asarray(c, dtype=np.float64) for c in (t_s, phi, theta, psi, p, q, r)]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(RATES_CSV_HEADER + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")
