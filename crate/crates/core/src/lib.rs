//! Simulation and self-calibration of the internal time synchronization of a
//! MEMS raster-scanning LiDAR.
//!
//! A MEMS LiDAR pairs a periodic sequence of measured distances (one per laser
//! pulse) with a predesigned sequence of mirror azimuths. In practice the two
//! subsystems are not perfectly synchronized: the laser may start firing `m`
//! pulses before the mirror begins its raster (start offset `T_s`), the two
//! frame periods may differ (per-frame drift `T_e`), and the actual number of
//! pulses per mirror row `k` may differ from the design value. Each of these
//! scrambles the range/azimuth pairing and distorts the reconstructed point
//! cloud.
//!
//! This crate provides:
//!
//! - [`geometry`]: the ranging and projection equations and the design raster
//!   azimuth sequence,
//! - [`simulator`]: a ray-casting scan simulator that injects known
//!   misalignments into synthetic range streams,
//! - [`calibration`]: the minimum-vertical-gradient (MVG) calibration that
//!   recovers `(m, k)` by exhaustive grid search, converts them to `T_s`, and
//!   estimates `T_e` from the per-frame offset track,
//! - [`config`] and [`io`]: run/scene config parsing and the CSV / XYZ / PLY
//!   file formats.

pub mod calibration;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod simulator;

pub use calibration::{
    calibrate_frame, mvg_cost, mvg_cost_raw, reconstruct_point_cloud, reshape_frame,
    track_offsets, tv_cost, CalibrationResult, CostCell, CostSurface, DriftEstimate, FrameGrid,
    SearchSpec,
};
pub use error::{Error, Result};
pub use geometry::{
    cartesian_to_polar, design_azimuth_sequence, polar_to_cartesian, range_from_tof,
    AzimuthSequence, CartesianPoint, PolarPoint, ScanPattern, SPEED_OF_LIGHT,
};
pub use simulator::{
    mirror_pointing, ray_range, simulate_frames, MisalignmentSpec, NoiseSpec, Pointing, Primitive,
    RangeStream, Scene,
};
