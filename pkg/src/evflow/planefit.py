"""Per-event normal optical flow via reduced local plane fitting.

Each accepted event fits a local plane to the most recent timestamps of its
spatial neighbors.  The full homogeneous model  p_x x + p_y y + p_t t + p0 = 0
reduces, in event-relative coordinates, to the two-parameter system

    px * dx_i + py * dy_i = -dt_i

whose least-squares solution gives the local time-surface slopes in us/px.
Normal flow follows from the orthogonality constraint

    (u, v) = grad / |grad|^2,     grad = (-px, -py)  in s/px.

Support selection is the timestamp-clustering rule: find the most recent
pair of linearly independent pixel offsets, let dt_S = -dt_older * k_s, and
walking the samples from most recent to oldest cut at the first consecutive
gap exceeding dt_S.  Fits are then cleaned by NRMSE-driven outlier removal
(at most n_r samples) and gated on support size and flow speed.

The classic four-parameter homogeneous fit (iterated SVD with
distance-based outlier rejection) is kept in plain numpy as
fit_homogeneous_baseline / BaselineFlowPipeline; it serves as the
reference oracle and the comparison baseline.

The hot path is compiled with numba; state lives in flat int64 grids:
most recent accepted timestamp per pixel per polarity, per-pixel
refractory clocks, and a single global rate-cap timer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .camera import CameraIntrinsics, undistort_lut
from .events import EVENT_DTYPE, EventFormatError, TimestampOrderError

FLOW_DTYPE = np.dtype([("t", "<i8"), ("x_u", "<f8"), ("y_u", "<f8"),
                       ("u", "<f8"), ("v", "<f8"), ("p", "<i1")])

FLOW_CSV_HEADER = "t_us,x_u,y_u,u_pps,v_pps,p"

_T_SENTINEL = np.iinfo(np.int64).min // 4


@dataclass(frozen=True)
class FlowConfig:
    """Flow-pipeline parameters.

    refractory_us : per-pixel dead time (us)
    win_xy        : spatial window span per axis, odd (5 -> offsets -2..2)
    dt_max_us     : oldest usable neighbor age (us)
    k_s           : clustering scale on the independent-pair age
    nrmse_max     : normalized RMSE acceptance threshold
    n_r           : max outlier removals before rejecting the fit
    v_max_pps     : flow speed gate (px/s)
    n_min         : min supporting samples after clustering
    rho_f_max     : global flow-vector rate cap (vectors/s, inf = off)
    d_max, k_d    : baseline fit outlier distance / convergence tolerance
    """

    refractory_us: int = 100_000
    win_xy: int = 5
    dt_max_us: int = 2_000_000
    k_s: float = 3.0
    nrmse_max: float = 0.3
    n_r: int = 2
    v_max_pps: float = 1000.0
    n_min: int = 8
    rho_f_max: float = math.inf
    d_max: float = 0.01
    k_d: float = 1e-5

    def __post_init__(self):
        if self.win_xy < 3 or self.win_xy % 2 == 0:
            raise ValueError(f"win_xy must be odd and >= 3, got {self.win_xy}")
        if self.rho_f_max <= 0:
            raise ValueError("rho_f_max must be positive (use inf to disable)")


class PlaneSlopes(NamedTuple):
    """Reduced-fit slopes, us/px."""

    px_us: float
    py_us: float


class NormalFlowVector(NamedTuple):
    t: int        # us
    x_u: float    # undistorted position, px
    y_u: float
    u: float      # px/s
    v: float
    p: int


# ---------------------------------------------------------------------------
# Compiled kernels.  All operate on event-relative integer samples
# (dx, dy in px, dt in us <= 0) stored in preallocated scratch arrays.
# ---------------------------------------------------------------------------

@njit(cache=True)
def _sort_by_dt_desc(dx, dy, dt, n):
    # Stable insertion sort, most recent (largest dt) first; ties keep
    # the row-major collection order.
    for i in range(1, n):
        kx = dx[i]
        ky = dy[i]
        kt = dt[i]
        j = i - 1
        while j >= 0 and dt[j] < kt:
            dx[j + 1] = dx[j]
            dy[j + 1] = dy[j]
            dt[j + 1] = dt[j]
            j -= 1
        dx[j + 1] = kx
        dy[j + 1] = ky
        dt[j + 1] = kt


@njit(cache=True)
def _cluster_sorted(dx, dy, dt, n, k_s):
    """Retained-prefix length after timestamp clustering (0 = failure)."""
    if n < 2:
        return 0
    j_ind = -1
    for j in range(1, n):
        if dx[0] * dy[j] - dx[j] * dy[0] != 0:
            j_ind = j
            break
    if j_ind < 0:
        return 0            # all offsets collinear: no plane
    dt_s = -float(dt[j_ind]) * k_s
    m = n
    for i in range(1, n):
        if float(dt[i - 1] - dt[i]) > dt_s:
            m = i
            break
    return m


@njit(cache=True)
def _fit_reduced_masked(dx, dy, dt, act, n):
    sxx = 0.0
    sxy = 0.0
    syy = 0.0
    bx = 0.0
    by = 0.0
    for i in range(n):
        if not act[i]:
            continue
        fx = float(dx[i])
        fy = float(dy[i])
        ft = float(dt[i])
        sxx += fx * fx
        sxy += fx * fy
        syy += fy * fy
        bx -= fx * ft
        by -= fy * ft
    det = sxx * syy - sxy * sxy
    if det <= 1e-12 * sxx * syy:
        return 0.0, 0.0, False
    px = (syy * bx - sxy * by) / det
    py = (sxx * by - sxy * bx) / det
    return px, py, True


@njit(cache=True)
def _nrmse_masked(dx, dy, dt, act, n, px, py):
    """(nrmse, worst_index).  nrmse < 0 flags sum(dt) == 0 (reject)."""
    s_dt = 0.0
    s_r2 = 0.0
    cnt = 0
    worst = -1
    worst_r = -1.0
    for i in range(n):
        if not act[i]:
            continue
        r = float(dt[i]) + px * float(dx[i]) + py * float(dy[i])
        s_r2 += r * r
        ar = abs(r)
        if ar > worst_r:
            worst_r = ar
            worst = i
        s_dt += float(dt[i])
        cnt += 1
    if cnt == 0 or s_dt == 0.0:
        return -1.0, worst
    return math.sqrt(s_r2 / cnt) * cnt / abs(s_dt), worst


@njit(cache=True)
def _reject_outliers_masked(dx, dy, dt, act, n, px, py, nrmse_max, n_r):
    removals = 0
    while True:
        nrmse, worst = _nrmse_masked(dx, dy, dt, act, n, px, py)
        if nrmse < 0.0:
            return px, py, False
        if nrmse <= nrmse_max:
            return px, py, True
        if removals == n_r:
            return px, py, False
        act[worst] = False
        removals += 1
        px, py, ok = _fit_reduced_masked(dx, dy, dt, act, n)
        if not ok:
            return px, py, False


@njit(cache=True)
def _slopes_to_flow_scalar(px_us, py_us):
    gx = -px_us * 1e-6
    gy = -py_us * 1e-6
    n2 = gx * gx + gy * gy
    if n2 <= 0.0:
        return 0.0, 0.0, False
    return gx / n2, gy / n2, True


# Counter layout for the stream kernel.
N_EMITTED = 0
N_REFRACTORY = 1
N_RATE_SKIPPED = 2
N_NO_CLUSTER = 3
N_BELOW_MIN = 4
N_SINGULAR = 5
N_NRMSE = 6
N_DEGENERATE = 7
N_SPEED = 8
_N_COUNTERS = 9


@njit(cache=True)
def _process_stream(ts, xs, ys, ps, buf, last_emit, tf_box,
                    lut_x, lut_y,
                    dt_r, dt_max, radius, k_s, nrmse_max, n_r,
                    v_max, n_min, cap_us,
                    out_t, out_x, out_y, out_u, out_v, out_p, counters):
    height = buf.shape[1]
    width = buf.shape[2]
    scratch = (2 * radius + 1) * (2 * radius + 1) - 1
    dx = np.empty(scratch, np.int64)
    dy = np.empty(scratch, np.int64)
    dt = np.empty(scratch, np.int64)
    act = np.empty(scratch, np.bool_)
    n_out = 0
    for k in range(ts.shape[0]):
        t = ts[k]
        x = int(xs[k])
        y = int(ys[k])
        p = int(ps[k])
        if t - last_emit[y, x] <= dt_r:
            counters[N_REFRACTORY] += 1
            continue
        last_emit[y, x] = t
        pol = 1 if p > 0 else 0
        bufp = buf[pol]
        bufp[y, x] = t
        if cap_us > 0.0 and float(t - tf_box[0]) <= cap_us:
            counters[N_RATE_SKIPPED] += 1
            continue
        # neighbor collection (row-major, center excluded)
        n = 0
        tmin = t - dt_max
        y0 = y - radius if y - radius > 0 else 0
        y1 = y + radius + 1 if y + radius + 1 < height else height
        x0 = x - radius if x - radius > 0 else 0
        x1 = x + radius + 1 if x + radius + 1 < width else width
        for yy in range(y0, y1):
            for xx in range(x0, x1):
                if xx == x and yy == y:
                    continue
                ti = bufp[yy, xx]
                if ti >= tmin:
                    dx[n] = xx - x
                    dy[n] = yy - y
                    dt[n] = ti - t
                    n += 1
        if n < 2:
            counters[N_NO_CLUSTER] += 1
            continue
        _sort_by_dt_desc(dx, dy, dt, n)
        m = _cluster_sorted(dx, dy, dt, n, k_s)
        if m == 0:
            counters[N_NO_CLUSTER] += 1
            continue
        if m < n_min:
            counters[N_BELOW_MIN] += 1
            continue
        for i in range(m):
            act[i] = True
        px, py, ok = _fit_reduced_masked(dx, dy, dt, act, m)
        if not ok:
            counters[N_SINGULAR] += 1
            continue
        px, py, ok = _reject_outliers_masked(dx, dy, dt, act, m, px, py,
                                             nrmse_max, n_r)
        if not ok:
            counters[N_NRMSE] += 1
            continue
        u, v, ok = _slopes_to_flow_scalar(px, py)
        if not ok:
            counters[N_DEGENERATE] += 1
            continue
        if math.sqrt(u * u + v * v) > v_max:
            counters[N_SPEED] += 1
            continue
        out_t[n_out] = t
        out_x[n_out] = lut_x[y, x]
        out_y[n_out] = lut_y[y, x]
        out_u[n_out] = u
        out_v[n_out] = v
        out_p[n_out] = p
        tf_box[0] = t
        counters[N_EMITTED] += 1
        n_out += 1
    return n_out


# ---------------------------------------------------------------------------
# Python-facing operations (thin wrappers over the same kernels).
# ---------------------------------------------------------------------------

def collect_neighbors(t: int, x: int, y: int, grid: np.ndarray,
                      cfg: FlowConfig) -> np.ndarray:
    """Samples (dx, dy, dt) from a single-polarity timestamp grid.

    Scans the centered win_xy window in row-major order, excluding the
    event's own pixel; keeps entries aged at most dt_max_us.  Returns an
    (n, 3) int64 array in scan order.
    """
    radius = cfg.win_xy // 2
    height, width = grid.shape
    rows = []
    tmin = t - cfg.dt_max_us
    for yy in range(max(0, y - radius), min(height, y + radius + 1)):
        for xx in range(max(0, x - radius), min(width, x + radius + 1)):
            if xx == x and yy == y:
                continue
            ti = int(grid[yy, xx])
            if ti >= tmin:
                rows.append((xx - x, yy - y, ti - t))
    if not rows:
        return np.empty((0, 3), dtype=np.int64)
    return np.array(rows, dtype=np.int64)


def cluster_by_timestamp(samples: np.ndarray, cfg: FlowConfig) -> Optional[np.ndarray]:
    """Sort by decreasing dt (stable) and truncate by the clustering rule.

    Returns the retained samples, or None when no linearly independent
    pair exists.
    """
    s = np.asarray(samples, dtype=np.int64).reshape(-1, 3)
    n = s.shape[0]
    if n < 2:
        return None
    dx = np.ascontiguousarray(s[:, 0])
    dy = np.ascontiguousarray(s[:, 1])
    dt = np.ascontiguousarray(s[:, 2])
    _sort_by_dt_desc(dx, dy, dt, n)
    m = _cluster_sorted(dx, dy, dt, n, float(cfg.k_s))
    if m == 0:
        return None
    return np.stack([dx[:m], dy[:m], dt[:m]], axis=1)


def fit_reduced(samples: np.ndarray) -> Optional[PlaneSlopes]:
    """Least-squares slopes for px*dx + py*dy = -dt (us/px); None if singular."""
    s = np.asarray(samples, dtype=np.int64).reshape(-1, 3)
    n = s.shape[0]
    act = np.ones(n, dtype=np.bool_)
    px, py, ok = _fit_reduced_masked(
        np.ascontiguousarray(s[:, 0]), np.ascontiguousarray(s[:, 1]),
        np.ascontiguousarray(s[:, 2]), act, n)
    if not ok:
        return None
    return PlaneSlopes(px, py)


def nrmse(samples: np.ndarray, slopes: PlaneSlopes) -> float:
    """Normalized RMSE of a fit: RMS(residual) / |mean(dt)|."""
    s = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    r = s[:, 2] + slopes.px_us * s[:, 0] + slopes.py_us * s[:, 1]
    mean_dt = np.mean(s[:, 2])
    if mean_dt == 0.0:
        return math.inf
    return float(np.sqrt(np.mean(r * r)) / abs(mean_dt))


def reject_outliers_nrmse(samples: np.ndarray, slopes: PlaneSlopes,
                          cfg: FlowConfig):
    """Iterative worst-residual removal until NRMSE <= nrmse_max.

    Returns (slopes, kept_mask) or None when more than n_r removals would
    be needed (or the cluster is degenerate).
    """
    s = np.asarray(samples, dtype=np.int64).reshape(-1, 3)
    n = s.shape[0]
    act = np.ones(n, dtype=np.bool_)
    dx = np.ascontiguousarray(s[:, 0])
    dy = np.ascontiguousarray(s[:, 1])
    dt = np.ascontiguousarray(s[:, 2])
    px, py, ok = _reject_outliers_masked(dx, dy, dt, act, n,
                                         slopes.px_us, slopes.py_us,
                                         float(cfg.nrmse_max), int(cfg.n_r))
    if not ok:
        return None
    return PlaneSlopes(px, py), act


def slopes_to_flow(slopes: PlaneSlopes) -> Optional[tuple[float, float]]:
    """Slopes (us/px) -> normal flow (px/s); None for a stationary surface."""
    u, v, ok = _slopes_to_flow_scalar(slopes.px_us, slopes.py_us)
    if not ok:
        return None
    return u, v


@dataclass
class PipelineStats:
    """Outcome counters; every non-emitting path is a silent drop."""

    n_events: int = 0
    n_refractory: int = 0
    n_rate_skipped: int = 0
    n_no_cluster: int = 0
    n_below_min: int = 0
    n_singular: int = 0
    n_nrmse_rejected: int = 0
    n_degenerate: int = 0
    n_speed_gated: int = 0
    n_emitted: int = 0

    @property
    def n_accepted(self) -> int:
        """Events surviving the refractory filter."""
        return self.n_events - self.n_refractory


class FlowPipeline:
    """Stateful per-event flow estimator.

    Per event, in order: refractory pass (accepted events always update the
    per-polarity timestamp grid), global rate cap (skipped events are still
    stored), neighbor collection, timestamp clustering, support gate,
    reduced plane fit, NRMSE outlier rejection, flow conversion, speed gate.
    Emitted vectors carry the undistorted event position from a lookup
    table built at construction.
    """

    def __init__(self, intr: CameraIntrinsics = CameraIntrinsics(),
                 cfg: FlowConfig = FlowConfig()):
        self.intr = intr
        self.cfg = cfg
        self.lut_x, self.lut_y = undistort_lut(intr)
        self.buffer = np.full((2, intr.height, intr.width), _T_SENTINEL,
                              dtype=np.int64)
        self.last_emit = np.full((intr.height, intr.width), _T_SENTINEL,
                                 dtype=np.int64)
        self._tf = np.full(1, _T_SENTINEL, dtype=np.int64)
        self._counters = np.zeros(_N_COUNTERS, dtype=np.int64)
        self._last_t = _T_SENTINEL
        if math.isinf(cfg.rho_f_max):
            self._cap_us = 0.0
        else:
            self._cap_us = 1e6 / cfg.rho_f_max

    def reset(self) -> None:
        self.buffer.fill(_T_SENTINEL)
        self.last_emit.fill(_T_SENTINEL)
        self._tf[0] = _T_SENTINEL
        self._counters[:] = 0
        self._last_t = _T_SENTINEL

    @property
    def stats(self) -> PipelineStats:
        c = self._counters
        return PipelineStats(
            n_events=int(c.sum()),
            n_refractory=int(c[N_REFRACTORY]),
            n_rate_skipped=int(c[N_RATE_SKIPPED]),
            n_no_cluster=int(c[N_NO_CLUSTER]),
            n_below_min=int(c[N_BELOW_MIN]),
            n_singular=int(c[N_SINGULAR]),
            n_nrmse_rejected=int(c[N_NRMSE]),
            n_degenerate=int(c[N_DEGENERATE]),
            n_speed_gated=int(c[N_SPEED]),
            n_emitted=int(c[N_EMITTED]),
        )

    def process(self, events: np.ndarray) -> np.ndarray:
        """Run a (time-sorted) stream chunk; returns FLOW_DTYPE vectors."""
        ev = np.asarray(events, dtype=EVENT_DTYPE)
        n = ev.shape[0]
        if n == 0:
            return np.empty(0, dtype=FLOW_DTYPE)
        ts = np.ascontiguousarray(ev["t"])
        if ts[0] < self._last_t or (n > 1 and np.any(np.diff(ts) < 0)):
            raise TimestampOrderError("stream chunk is not time-sorted")
        xs = np.ascontiguousarray(ev["x"])
        ys = np.ascontiguousarray(ev["y"])
        if int(xs.max()) >= self.intr.width or int(ys.max()) >= self.intr.height:
            raise EventFormatError("event coordinates outside sensor geometry")
        ps = np.ascontiguousarray(ev["p"])
        out_t = np.empty(n, dtype=np.int64)
        out_x = np.empty(n, dtype=np.float64)
        out_y = np.empty(n, dtype=np.float64)
        out_u = np.empty(n, dtype=np.float64)
        out_v = np.empty(n, dtype=np.float64)
        out_p = np.empty(n, dtype=np.int8)
        cfg = self.cfg
        m = _process_stream(
            ts, xs, ys, ps, self.buffer, self.last_emit, self._tf,
            self.lut_x, self.lut_y,
            int(cfg.refractory_us), int(cfg.dt_max_us), cfg.win_xy // 2,
            float(cfg.k_s), float(cfg.nrmse_max), int(cfg.n_r),
            float(cfg.v_max_pps), int(cfg.n_min), self._cap_us,
            out_t, out_x, out_y, out_u, out_v, out_p, self._counters)
        self._last_t = int(ts[-1])
        out = np.empty(m, dtype=FLOW_DTYPE)
        out["t"] = out_t[:m]
        out["x_u"] = out_x[:m]
        out["y_u"] = out_y[:m]
        out["u"] = out_u[:m]
        out["v"] = out_v[:m]
        out["p"] = out_p[:m]
        return out

    def process_event(self, t: int, x: int, y: int, p: int) -> Optional[NormalFlowVector]:
        """Single-event form of process(); same code path."""
        ev = np.array([(t, x, y, p)], dtype=EVENT_DTYPE)
        out = self.process(ev)
        if out.shape[0] == 0:
            return None
        row = out[0]
        return NormalFlowVector(int(row["t"]), float(row["x_u"]), float(row["y_u"]),
                                float(row["u"]), float(row["v"]), int(row["p"]))


# ---------------------------------------------------------------------------
# Homogeneous-fit baseline (plain numpy; reference oracle and comparison).
# ---------------------------------------------------------------------------

def fit_homogeneous_baseline(samples: np.ndarray, d_max: float = 0.01,
                             k_d: float = 1e-5, max_iter: int = 20):
    """Four-parameter plane fit Pi = (p_x, p_y, p_t, p_0), |Pi| = 1.

    ``samples`` is (n, 3) float (x px, y px, t s) in consistent units; the
    smallest-singular-vector solution is refined by dropping samples whose
    point-plane distance exceeds d_max and refitting until the plane moves
    by less than k_d.  Returns (pi, inlier_mask) or None on failure.
    """
    s = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    mask = np.ones(s.shape[0], dtype=bool)
    prev = None
    for _ in range(max_iter):
        pts = s[mask]
        if pts.shape[0] < 4:
            return None
        a = np.column_stack([pts, np.ones(pts.shape[0])])
        _, _, vt = np.linalg.svd(a, full_matrices=True)
        pi = vt[-1]
        if prev is not None and np.dot(pi, prev) < 0:
            pi = -pi
        nrm = np.linalg.norm(pi[:3])
        if nrm == 0.0:
            return None
        if prev is not None and np.linalg.norm(pi - prev) < k_d:
            return pi, mask
        prev = pi
        dist = np.abs(s @ pi[:3] + pi[3]) / nrm
        new_mask = dist <= d_max
        if new_mask.sum() == mask.sum() and np.array_equal(new_mask, mask):
            return pi, mask
        mask = new_mask
    return pi, mask


def baseline_slopes(pi: np.ndarray) -> Optional[PlaneSlopes]:
    """Slopes (us/px) from a homogeneous plane fitted in (px, px, s)."""
    if abs(pi[2]) <= 1e-15 * np.linalg.norm(pi[:3]):
        return None
    return PlaneSlopes(pi[0] / pi[2] * 1e6, pi[1] / pi[2] * 1e6)


class BaselineFlowPipeline:
    """Fixed-window homogeneous-fit pipeline (comparison reference).

    Same refractory filter, per-polarity most-recent-timestamp buffers,
    speed gate, and support gate as FlowPipeline, but support is every
    buffered neighbor (including the event itself) within a fixed time
    window, and the fit is the iterated four-parameter SVD with
    distance-based outlier rejection.
    """

    def __init__(self, intr: CameraIntrinsics = CameraIntrinsics(),
                 cfg: FlowConfig = FlowConfig(dt_max_us=100_000, d_max=0.001)):
        self.intr = intr
        self.cfg = cfg
        self.lut_x, self.lut_y = undistort_lut(intr)
        self.buffer = np.full((2, intr.height, intr.width), _T_SENTINEL,
                              dtype=np.int64)
        self.last_emit = np.full((intr.height, intr.width), _T_SENTINEL,
                                 dtype=np.int64)
        self.stats = PipelineStats()

    def process(self, events: np.ndarray) -> np.ndarray:
        ev = np.asarray(events, dtype=EVENT_DTYPE)
        cfg = self.cfg
        radius = cfg.win_xy // 2
        out = []
        st = self.stats
        for t, x, y, p in zip(ev["t"], ev["x"], ev["y"], ev["p"]):
            t = int(t)
            x = int(x)
            y = int(y)
            st.n_events += 1
            if t - self.last_emit[y, x] <= cfg.refractory_us:
                st.n_refractory += 1
                continue
            self.last_emit[y, x] = t
            pol = 1 if p > 0 else 0
            self.buffer[pol, y, x] = t
            grid = self.buffer[pol,
                               max(0, y - radius):y + radius + 1,
                               max(0, x - radius):x + radius + 1]
            ti = grid.ravel()
            fresh = ti >= t - cfg.dt_max_us
            if fresh.sum() < max(4, cfg.n_min):
                st.n_below_min += 1
                continue
            yy, xx = np.nonzero(fresh.reshape(grid.shape))
            dx = xx + max(0, x - radius) - x
            dyv = yy + max(0, y - radius) - y
            dts = (ti[fresh] - t) * 1e-6
            fit = fit_homogeneous_baseline(
                np.column_stack([dx, dyv, dts]), cfg.d_max, cfg.k_d)
            if fit is None:
                st.n_singular += 1
                continue
            slopes = baseline_slopes(fit[0])
            if slopes is None:
                st.n_degenerate += 1
                continue
            uv = slopes_to_flow(slopes)
            if uv is None:
                st.n_degenerate += 1
                continue
            u, v = uv
            if math.hypot(u, v) > cfg.v_max_pps:
                st.n_speed_gated += 1
                continue
            st.n_emitted += 1
            out.append((t, self.lut_x[y, x], self.lut_y[y, x], u, v, p))
        return np.array(out, dtype=FLOW_DTYPE) if out else np.empty(0, dtype=FLOW_DTYPE)


# ---------------------------------------------------------------------------
# Flow-vector file IO.
# ---------------------------------------------------------------------------

def write_flow_csv(path, flow: np.ndarray) -> None:
    fl = np.asarray(flow, dtype=FLOW_DTYPE)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(FLOW_CSV_HEADER + "\n")
        for row in fl:
            fh.write(f"{int(row['t'])},{row['x_u']:.10g},{row['y_u']:.10g},"
                     f"{row['u']:.10g},{row['v']:.10g},{int(row['p'])}\n")


def read_flow_csv(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header and header != FLOW_CSV_HEADER:
            raise EventFormatError(f"{path}: expected header '{FLOW_CSV_HEADER}'")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise EventFormatError(f"{path}: line {lineno}: expected 6 fields")
            try:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2]),
                             float(parts[3]), float(parts[4]), int(parts[5])))
            except ValueError as exc:
                raise EventFormatError(f"{path}: line {lineno}: {exc}") from None
    return np.array(rows, dtype=FLOW_DTYPE) if rows else np.empty(0, dtype=FLOW_DTYPE)
