"""Shared fixtures.

The compiled flow kernels JIT on first use; ``warm_pipeline`` triggers that
once per session so timed tests measure steady-state cost only.
"""

import numpy as np
import pytest

from evflow.camera import CameraIntrinsics
from evflow.events import make_stream
from evflow.planefit import FlowConfig, FlowPipeline


@pytest.fixture(scope="session")
def intr():
    return CameraIntrinsics()


@pytest.fixture(scope="session")
def warm_pipeline(intr):
    """Compile the stream kernel before anything time-sensitive runs."""
    rng = np.random.default_rng(0)
    n = 2000
    t = np.sort(rng.integers(0, 1_000_000, n))
    ev = make_stream(t, rng.integers(0, 128, n), rng.integers(0, 128, n),
                     rng.choice([-1, 1], n))
    pipe = FlowPipeline(intr, FlowConfig())
    pipe.process(ev)
    return True
