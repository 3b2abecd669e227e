"""Event-camera normal optical flow, visual observables, and
constant-divergence landing simulation."""

from .camera import CameraIntrinsics, distort, undistort, undistort_lut
from .events import (EVENT_DTYPE, Event, EventFormatError, RefractoryFilter,
                     TimestampOrderError, make_stream, read_events,
                     read_events_csv, read_events_evb, write_events_csv,
                     write_events_evb)
from .geometry import (EgoMotion, GroundPlane, VisualObservables, flow_full,
                       flow_rotational, planar_flow)
from .landing import (LandingConfig, LandingResult, VehicleState,
                      divergence_controller, run_closed_loop, step_dynamics)
from .metrics import (QuadraticErrorModel, bench_throughput, density,
                      fit_quadratic, pee, pee_stats, stream_density)
from .observables import (DirectionBank, EstimatorConfig, FlowFieldStats,
                          ObservablesEstimator, ObservablesSample,
                          solve_observables)
from .planefit import (FLOW_DTYPE, BaselineFlowPipeline, FlowConfig,
                       FlowPipeline, NormalFlowVector, PlaneSlopes,
                       cluster_by_timestamp, fit_homogeneous_baseline,
                       fit_reduced, nrmse, slopes_to_flow)
from .render import (BlankTexture, CheckerTexture, EventRenderer,
                     NoiseTexture, RenderConfig, make_texture, run_scripted)

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "distort", "undistort", "undistort_lut",
    "EVENT_DTYPE", "Event", "EventFormatError", "RefractoryFilter",
    "TimestampOrderError", "make_stream", "read_events", "read_events_csv",
    "read_events_evb", "write_events_csv", "write_events_evb",
    "EgoMotion", "GroundPlane", "VisualObservables", "flow_full",
    "flow_rotational", "planar_flow",
    "LandingConfig", "LandingResult", "VehicleState",
    "divergence_controller", "run_closed_loop", "step_dynamics",
    "QuadraticErrorModel", "bench_throughput", "density", "fit_quadratic",
    "pee", "pee_stats", "stream_density",
    "DirectionBank", "EstimatorConfig", "FlowFieldStats",
    "ObservablesEstimator", "ObservablesSample", "solve_observables",
    "FLOW_DTYPE", "BaselineFlowPipeline", "FlowConfig", "FlowPipeline",
    "NormalFlowVector", "PlaneSlopes", "cluster_by_timestamp",
    "fit_homogeneous_baseline", "fit_reduced", "nrmse", "slopes_to_flow",
    "BlankTexture", "CheckerTexture", "EventRenderer", "NoiseTexture",
    "RenderConfig", "make_texture", "run_scripted",
    "__version__",
]
