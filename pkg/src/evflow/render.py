"""Synthetic event camera over a planar textured ground.

World frame: X/Y horizontal, Z up, ground plane at Z = 0.  The camera
looks down: at zero attitude its axes map to world as X_C = +X_W,
Y_C = -Y_W, Z_C = -Z_W.  Each pixel's ray (from the undistortion table)
is intersected with the ground; the texture's log reflectance at the hit
point is the pixel's log intensity.

Per pixel the renderer keeps a reference log level; when the intensity
moves more than the contrast threshold C away from it, one event per
crossed multiple of C is emitted, with sub-step timestamps linearly
interpolated along the intensity ramp.  The reference then resets to the
crossed threshold level (not the instantaneous intensity), so residual
sub-threshold change carries over.  Optional imperfections: per-pixel
threshold mismatch, Gaussian timestamp jitter, uniform spurious events.

Textures are smooth by construction (finite-width edges): sub-step
interpolation of a hard step would be meaningless, and real optics blur
edges over ~a pixel anyway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .camera import CameraIntrinsics, undistort_lut
from .events import EVENT_DTYPE

# Camera-to-world axis map at zero attitude (columns = camera axes in world).
R_WC0 = np.diag([1.0, -1.0, -1.0])


def rodrigues(omega: np.ndarray, dt: float) -> np.ndarray:
    """Rotation matrix for spin omega (rad/s, 3-vector) over dt seconds."""
    th = float(np.linalg.norm(omega)) * dt
    if th < 1e-15:
        return np.eye(3)
    k = np.asarray(omega, dtype=np.float64) / np.linalg.norm(omega)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(th) * kx + (1.0 - math.cos(th)) * (kx @ kx)


@dataclass(frozen=True)
class RenderConfig:
    contrast_c: float = 0.15        # log-intensity threshold
    dt_sim_s: float = 1e-3          # render/dynamics step
    jitter_us: float = 0.0          # timestamp noise (1 sigma)
    spurious_hz: float = 0.0        # spurious events per pixel per second
    threshold_mismatch: float = 0.0  # per-pixel C spread (fraction of C)


def _edge_profile(coord, cell_m: float, edge_m: float):
    """Signed clipped-linear square-wave profile along one axis.

    +1/-1 plateaus per cell with linear ramps of half-width edge_m at
    the cell boundaries.  Plateau levels are exact constants, so pixels
    that start on a plateau share one absolute threshold lattice and
    later fire at identical edge phases.
    """
    p = np.asarray(coord, dtype=np.float64) / cell_m
    d = np.abs(p - np.round(p))              # cell-units to nearest boundary
    sq = np.where(np.floor(p).astype(np.int64) % 2 == 0, 1.0, -1.0)
    return sq * np.clip(d * (cell_m / edge_m), 0.0, 1.0)


class CheckerTexture:
    """Checkerboard with linear edge ramps: cells of side cell_m, log
    contrast 2*amplitude between plateaus, ramps edge_m wide."""

    def __init__(self, cell_m: float = 0.4, amplitude: float = 0.75,
                 edge_m: float = 0.02):
        self.cell_m = cell_m
        self.amplitude = amplitude
        self.edge_m = edge_m

    def sample_log(self, x, y):
        sx = _edge_profile(x, self.cell_m, self.edge_m)
        sy = _edge_profile(y, self.cell_m, self.edge_m)
        return self.amplitude * sx * sy


def _terrace(n, half_width: float):
    """Quantize to unit levels with linear transitions of the given
    half-width (in level units) centred on the half-integer boundaries."""
    m = np.floor(n)
    r = n - m
    return m + np.clip((r - 0.5 + half_width) / (2.0 * half_width), 0.0, 1.0)


class NoiseTexture:
    """Tiling two-octave value noise posterized onto discrete levels.

    The terrace quantum is a multiple of the default contrast threshold
    so plateau reflectances share the event threshold lattice; levels
    are joined by linear ramps (like a printed poster with a handful of
    ink tones).
    """

    def __init__(self, seed: int = 0, size: int = 256, scale_m: float = 0.02,
                 amplitude: float = 0.9, quantum: float = 0.45,
                 ramp_frac: float = 0.15):
        rng = np.random.default_rng(seed)
        grid = np.zeros((size, size))
        amp = amplitude
        cells = 16
        # coarsest octave ~0.3 m features, finest ~0.08 m: resolvable from
        # touchdown height up to a few metres without sub-pixel aliasing
        while cells < size:
            coarse = rng.uniform(-amp, amp, size=(cells, cells))
            grid += _upsample_wrap(coarse, size)
            amp *= 0.55
            cells *= 4
        self.grid = grid
        self.scale_m = scale_m
        self.quantum = quantum
        self.ramp_frac = ramp_frac

    def sample_log(self, x, y):
        u = np.asarray(x, dtype=np.float64) / self.scale_m
        v = np.asarray(y, dtype=np.float64) / self.scale_m
        raw = _bilinear_wrap(self.grid, u, v)
        return self.quantum * _terrace(raw / self.quantum, self.ramp_frac)


def _upsample_wrap(coarse: np.ndarray, size: int) -> np.ndarray:
    n = coarse.shape[0]
    u = np.arange(size) * (n / size)
    uu, vv = np.meshgrid(u, u)
    return _bilinear_wrap(coarse, uu, vv)


def _bilinear_wrap(grid: np.ndarray, u, v):
    n = grid.shape[0]
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    fu = u - u0
    fv = v - v0
    u0 %= n
    v0 %= n
    u1 = (u0 + 1) % n
    v1 = (v0 + 1) % n
    return (grid[v0, u0] * (1 - fu) * (1 - fv) + grid[v0, u1] * fu * (1 - fv)
            + grid[v1, u0] * (1 - fu) * fv + grid[v1, u1] * fu * fv)


class BlankTexture:
    """Featureless ground (produces no events; starves the pipeline)."""

    def sample_log(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)


def make_texture(name: str, seed: int = 0):
    if name == "checkerboard":
        return CheckerTexture()
    if name == "roadmap":
        return NoiseTexture(seed=seed)
    if name == "blank":
        return BlankTexture()
    raise ValueError(f"unknown texture '{name}' (checkerboard, roadmap, blank)")


class DomainError(ValueError):
    """Camera pose outside the renderable domain (at or below ground)."""


class EventRenderer:
    """Stateful per-pixel threshold-crossing event generator."""

    def __init__(self, texture, intr: CameraIntrinsics = CameraIntrinsics(),
                 cfg: RenderConfig = RenderConfig(),
                 rng: Optional[np.random.Generator] = None):
        self.texture = texture
        self.intr = intr
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(0)
        lut_x, lut_y = undistort_lut(intr)
        self.ray_x = (lut_x - intr.xp) / intr.focal_px
        self.ray_y = (lut_y - intr.yp) / intr.focal_px
        npx = intr.height * intr.width
        if cfg.threshold_mismatch > 0.0:
            mis = self.rng.uniform(-cfg.threshold_mismatch, cfg.threshold_mismatch,
                                   size=(intr.height, intr.width))
            self.c_pix = cfg.contrast_c * (1.0 + mis)
        else:
            self.c_pix = np.full((intr.height, intr.width), cfg.contrast_c)
        self.ref: Optional[np.ndarray] = None
        self.prev_log: Optional[np.ndarray] = None
        self.prev_t_us: int = 0
        self.last_event_us = np.full(npx, -1, dtype=np.int64)
        self._flat_idx = np.arange(npx, dtype=np.int64)

    def _log_image(self, x: float, y: float, z: float,
                   r_wc: Optional[np.ndarray] = None) -> np.ndarray:
        if z <= 0.0:
            raise DomainError(f"camera height must be positive, got z={z:.6g}")
        if r_wc is None:
            gx = x + self.ray_x * z
            gy = y - self.ray_y * z
        else:
            rays = np.stack([self.ray_x.ravel(), self.ray_y.ravel(),
                             np.ones(self.ray_x.size)])
            rw = r_wc @ rays
            down = rw[2]
            if np.any(down >= -1e-9):
                raise DomainError("a pixel ray does not intersect the ground "
                                  "(attitude too large for the field of view)")
            s = -z / down
            gx = (x + s * rw[0]).reshape(self.ray_x.shape)
            gy = (y + s * rw[1]).reshape(self.ray_y.shape)
        return self.texture.sample_log(gx, gy)

    def step(self, t_s: float, x: float, y: float, z: float,
             r_wc: Optional[np.ndarray] = None) -> np.ndarray:
        """Advance to time t_s at the given pose; returns the event chunk."""
        log_img = self._log_image(x, y, z, r_wc)
        t_us = int(round(t_s * 1e6))
        if self.ref is None:
            self.ref = log_img.copy()
            self.prev_log = log_img
            self.prev_t_us = t_us
            return np.empty(0, dtype=EVENT_DTYPE)

        delta = log_img - self.ref
        n_cross = np.floor(np.abs(delta) / self.c_pix).astype(np.int64)
        total = int(n_cross.sum())
        ev = self._extract(n_cross, log_img, t_us) if total else \
            np.empty(0, dtype=EVENT_DTYPE)
        if self.cfg.spurious_hz > 0.0:
            ev = self._merge_spurious(ev, t_us)
        self.prev_log = log_img
        self.prev_t_us = t_us
        return ev

    def _extract(self, n_cross: np.ndarray, log_img: np.ndarray,
                 t_us: int) -> np.ndarray:
        yy, xx = np.nonzero(n_cross)
        counts = n_cross[yy, xx]
        sign = np.sign(log_img[yy, xx] - self.ref[yy, xx])
        l_prev = self.prev_log[yy, xx]
        ramp = log_img[yy, xx] - l_prev
        c_here = self.c_pix[yy, xx]
        span = t_us - self.prev_t_us
        flat = yy.astype(np.int64) * self.intr.width + xx

        parts = []
        max_n = int(counts.max())
        for i in range(1, max_n + 1):
            m = counts >= i
            level = self.ref[yy[m], xx[m]] + i * sign[m] * c_here[m]
            frac = np.clip((level - l_prev[m]) / ramp[m], 0.0, 1.0)
            te = self.prev_t_us + np.rint(frac * span).astype(np.int64)
            if self.cfg.jitter_us > 0.0:
                te = te + np.rint(self.rng.normal(0.0, self.cfg.jitter_us,
                                                  size=te.shape)).astype(np.int64)
                te = np.clip(te, self.prev_t_us, t_us)
            # per-pixel increasing timestamps, capped at the step boundary
            te = np.minimum(np.maximum(te, self.last_event_us[flat[m]] + 1), t_us)
            self.last_event_us[flat[m]] = te
            parts.append((te, xx[m], yy[m],
                          np.where(sign[m] > 0, 1, -1).astype(np.int8),
                          flat[m]))
        # reference resets to the crossed threshold level
        self.ref[yy, xx] += counts * sign * c_here

        te = np.concatenate([p[0] for p in parts])
        ex = np.concatenate([p[1] for p in parts])
        ey = np.concatenate([p[2] for p in parts])
        ep = np.concatenate([p[3] for p in parts])
        ef = np.concatenate([p[4] for p in parts])
        order = np.lexsort((ef, te))
        out = np.empty(te.shape[0], dtype=EVENT_DTYPE)
        out["t"] = te[order]
        out["x"] = ex[order]
        out["y"] = ey[order]
        out["p"] = ep[order]
        return out

    def _merge_spurious(self, ev: np.ndarray, t_us: int) -> np.ndarray:
        span = t_us - self.prev_t_us
        npx = self.intr.height * self.intr.width
        lam = self.cfg.spurious_hz * npx * span * 1e-6
        n = int(self.rng.poisson(lam))
        if n == 0:
            return ev
        sp = np.empty(n, dtype=EVENT_DTYPE)
        sp["t"] = self.prev_t_us + self.rng.integers(1, max(span, 2), size=n)
        sp["x"] = self.rng.integers(0, self.intr.width, size=n)
        sp["y"] = self.rng.integers(0, self.intr.height, size=n)
        sp["p"] = np.where(self.rng.random(n) < 0.5, -1, 1).astype(np.int8)
        merged = np.concatenate([ev, sp])
        merged = merged[np.argsort(merged["t"], kind="stable")]
        return merged


TRUTH_DTYPE = np.dtype([("t_s", "<f8"), ("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                        ("vx_w", "<f8"), ("vy_w", "<f8"), ("vz_w", "<f8"),
                        ("p", "<f8"), ("q", "<f8"), ("r", "<f8")])


def run_scripted(texture, intr: CameraIntrinsics, rcfg: RenderConfig,
                 duration_s: float, pos_fn, vel_fn, rates_fn=None,
                 seed: int = 0):
    """Render a scripted camera trajectory.

    pos_fn(t) -> (x, y, z) world position; vel_fn(t) -> its derivative;
    rates_fn(t) -> (p, q, r) spin (attitude integrated from R_WC0).
    Returns (events, truth) with truth sampled at every render step.
    """
    rng = np.random.default_rng(seed)
    ren = EventRenderer(texture, intr, rcfg, rng)
    n_steps = int(round(duration_s / rcfg.dt_sim_s))
    rotating = rates_fn is not None
    r_wc = R_WC0.copy()
    chunks = []
    truth = np.empty(n_steps + 1, dtype=TRUTH_DTYPE)
    for k in range(n_steps + 1):
        t = k * rcfg.dt_sim_s
        x, y, z = pos_fn(t)
        vx, vy, vz = vel_fn(t)
        p, q, r = rates_fn(t) if rotating else (0.0, 0.0, 0.0)
        truth[k] = (t, x, y, z, vx, vy, vz, p, q, r)
        chunk = ren.step(t, x, y, z, r_wc if rotating else None)
        if chunk.shape[0]:
            chunks.append(chunk)
        if rotating:
            omega_c = np.array([q, p, r])
            r_wc = r_wc @ rodrigues(omega_c, rcfg.dt_sim_s)
    events = np.concatenate(chunks) if chunks else np.empty(0, dtype=EVENT_DTYPE)
    return events, truth
