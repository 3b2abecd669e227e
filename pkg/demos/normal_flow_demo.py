"""
Per-event normal flow from a synthetic event stream
===================================================

Renders a checkerboard sliding at a constant 100 px/s under a 128x128
event camera, runs the plane-fitting flow pipeline over the stream, and
compares the recovered normal flow against the exact ground truth.
"""

import numpy as np

from evflow import CameraIntrinsics, FlowConfig, FlowPipeline, stream_density
from evflow.metrics import gt_flow_pps, make_translation_scenario, pee_stats

intr = CameraIntrinsics()

# ---------------------------------------------------------------------------
# A horizontal translation at constant height gives a uniform image flow
# field: every pixel sees the same 100 px/s motion, which makes the
# accuracy numbers easy to read.

events, truth = make_translation_scenario(100.0, duration_s=1.0, seed=0)
print(f"rendered {events.shape[0]} events over 1.0 s "
      f"({events.shape[0] / 1e3:.0f}k events/s)")

# ---------------------------------------------------------------------------
# The pipeline filters each pixel with a refractory period, collects the
# freshest neighbor timestamps, clusters them by age, and fits a local
# plane whose gradient is the inverse of the normal flow.

pipe = FlowPipeline(intr, FlowConfig())
flow = pipe.process(events)
print(f"emitted {flow.shape[0]} flow vectors "
      f"(density {stream_density(pipe.stats):.1f}% of filtered events)")

# ---------------------------------------------------------------------------
# Compare against ground truth with the projection endpoint error: the
# distance from the estimated vector to the line of full flows that
# share its normal component.  The first moments of the stream are
# discarded while the neighborhood buffers fill in.

steady = flow[flow["t"] >= 250_000]
u_gt, v_gt = gt_flow_pps(intr, truth[0], steady["x_u"], steady["y_u"])
mean, sd = pee_stats(steady["u"], steady["v"], u_gt, v_gt)
print(f"projection endpoint error: {mean:.2f} +/- {sd:.2f} px/s "
      f"({100 * mean / 100.0:.1f}% of the true 100 px/s)")

# a quick look at the recovered vectors themselves
print("mean flow over the steady stretch: "
      f"u = {steady['u'].mean():+.1f} px/s, v = {steady['v'].mean():+.1f} px/s "
      "(truth: u = +100, v = 0)")
