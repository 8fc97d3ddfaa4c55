//! Ray-casting scan simulator with misalignment injection.
//!
//! The simulator casts rays along the mirror's *actual* time-dependent
//! pointing. Pairing the resulting range stream naively with the design
//! azimuth sequence reproduces the start-offset, drift and pulses-per-row
//! distortions with known ground truth.
//!
//! The laser is assumed to keep firing while the mirror is in its flyback
//! (reset) phase; those pulses carry the invalid-echo sentinel since no
//! optical model of the moving reset exists.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ScanPattern;

/// Scene primitive: axis-aligned box or infinite plane.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Axis-aligned box given by min/max corners, meters.
    AxisAlignedBox { min: [f64; 3], max: [f64; 3] },
    /// Infinite plane `normal · p = offset` with unit normal.
    Plane { normal: [f64; 3], offset: f64 },
}

/// A synthetic scene: primitives plus an optional background range returned
/// when no primitive is hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    primitives: Vec<Primitive>,
    background_range: Option<f64>,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>, background_range: Option<f64>) -> Result<Self> {
        for primitive in &primitives {
            match primitive {
                Primitive::AxisAlignedBox { min, max } => {
                    if !(min[0] < max[0] && min[1] < max[1] && min[2] < max[2]) {
                        return Err(Error::invalid_field(
                            "box",
                            "min corner must be strictly below max corner per axis",
                        ));
                    }
                }
                Primitive::Plane { normal, .. } => {
                    let norm =
                        (normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2])
                            .sqrt();
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(Error::invalid_field(
                            "plane.normal",
                            format!("must be unit length, got |n| = {norm}"),
                        ));
                    }
                }
            }
        }
        if let Some(bg) = background_range {
            if !(bg > 0.0) {
                return Err(Error::invalid_field(
                    "background_range",
                    "must be positive",
                ));
            }
        }
        Ok(Scene {
            primitives,
            background_range,
        })
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn background_range(&self) -> Option<f64> {
        self.background_range
    }
}

/// Injected ground-truth misalignment.
#[derive(Debug, Clone, PartialEq)]
pub struct MisalignmentSpec {
    /// Start-offset pulses at frame 0: the laser fires this many pulses before
    /// the mirror begins its raster.
    pub m_start: usize,
    /// Per-frame offset accumulation, T_e expressed in pulse units (T_e/ΔT).
    pub drift_pulses_per_frame: f64,
    /// Actual pulses per mirror row.
    pub k_true: usize,
}

impl MisalignmentSpec {
    pub fn new(m_start: usize, drift_pulses_per_frame: f64, k_true: usize) -> Result<Self> {
        if k_true < 2 {
            return Err(Error::invalid_field("k_true", "must be at least 2"));
        }
        Ok(MisalignmentSpec {
            m_start,
            drift_pulses_per_frame,
            k_true,
        })
    }

    /// Aligned: no offset, no drift, actual row length equals the design.
    pub fn aligned(pattern: &ScanPattern) -> Self {
        MisalignmentSpec {
            m_start: 0,
            drift_pulses_per_frame: 0.0,
            k_true: pattern.k_design,
        }
    }

    /// Effective integer start offset of `frame_index`:
    /// round(m_start + drift·frame).
    pub fn effective_offset(&self, frame_index: usize) -> i64 {
        (self.m_start as f64 + self.drift_pulses_per_frame * frame_index as f64).round() as i64
    }
}

/// Per-sample noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Zero-mean Gaussian range noise, meters.
    pub range_sigma: f64,
    /// Probability a pulse returns invalid-echo.
    pub dropout_prob: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    pub fn new(range_sigma: f64, dropout_prob: f64, rng_seed: u64) -> Result<Self> {
        if !(range_sigma >= 0.0) {
            return Err(Error::invalid_field("range_sigma", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&dropout_prob) {
            return Err(Error::invalid_field("dropout_prob", "must be in [0, 1)"));
        }
        Ok(NoiseSpec {
            range_sigma,
            dropout_prob,
            rng_seed,
        })
    }

    pub fn none() -> Self {
        NoiseSpec {
            range_sigma: 0.0,
            dropout_prob: 0.0,
            rng_seed: 0,
        }
    }
}

/// A periodic measured-distance sequence: frames of raw pulses. `None` is the
/// invalid-echo sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeStream {
    pub frames: Vec<Vec<Option<f64>>>,
    pub pulses_per_frame: usize,
    pub delta_t: f64,
}

impl RangeStream {
    pub fn new(frames: Vec<Vec<Option<f64>>>, pulses_per_frame: usize, delta_t: f64) -> Result<Self> {
        for (j, frame) in frames.iter().enumerate() {
            if frame.len() != pulses_per_frame {
                return Err(Error::invalid_field(
                    "frames",
                    format!(
                        "frame {j} has {} pulses, expected {pulses_per_frame}",
                        frame.len()
                    ),
                ));
            }
            if frame.iter().flatten().any(|r| !(*r >= 0.0)) {
                return Err(Error::invalid_field(
                    "frames",
                    format!("frame {j} contains a negative or non-finite range"),
                ));
            }
        }
        if !(delta_t > 0.0) {
            return Err(Error::invalid_field("delta_t", "must be positive"));
        }
        Ok(RangeStream {
            frames,
            pulses_per_frame,
            delta_t,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }
}

/// The mirror's state for one laser pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pointing {
    /// Mirror at (theta, phi), radians.
    Angles(f64, f64),
    /// Mirror in its flyback/reset phase.
    Resetting,
}

/// Casts a ray from the origin in direction (tanθ, tanφ, 1) and returns the
/// Euclidean distance to the nearest hit, falling back to the scene's
/// background range, else invalid-echo. The direction convention is the exact
/// inverse of the tangent-plane projection, so reconstructing a scanned plane
/// reproduces the plane.
pub fn ray_range(scene: &Scene, theta: f64, phi: f64) -> Option<f64> {
    let dir = [theta.tan(), phi.tan(), 1.0];
    let dir_norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();

    let mut nearest_t: Option<f64> = None;
    for primitive in &scene.primitives {
        if let Some(t) = intersect(primitive, &dir) {
            if nearest_t.map_or(true, |best| t < best) {
                nearest_t = Some(t);
            }
        }
    }
    nearest_t
        .map(|t| t * dir_norm)
        .or(scene.background_range)
}

const RAY_EPSILON: f64 = 1e-12;

/// Parametric distance to the primitive along ray `t · dir` from the origin,
/// smallest t above RAY_EPSILON.
fn intersect(primitive: &Primitive, dir: &[f64; 3]) -> Option<f64> {
    match primitive {
        Primitive::Plane { normal, offset } => {
            let denom = normal[0] * dir[0] + normal[1] * dir[1] + normal[2] * dir[2];
            if denom.abs() < RAY_EPSILON {
                return None;
            }
            let t = offset / denom;
            (t > RAY_EPSILON).then_some(t)
        }
        Primitive::AxisAlignedBox { min, max } => {
            // Slab method; origin at 0.
            let mut t_enter = f64::NEG_INFINITY;
            let mut t_exit = f64::INFINITY;
            for axis in 0..3 {
                if dir[axis].abs() < RAY_EPSILON {
                    if min[axis] > 0.0 || max[axis] < 0.0 {
                        return None;
                    }
                    continue;
                }
                let t1 = min[axis] / dir[axis];
                let t2 = max[axis] / dir[axis];
                t_enter = t_enter.max(t1.min(t2));
                t_exit = t_exit.min(t1.max(t2));
            }
            if t_enter > t_exit {
                return None;
            }
            let t = if t_enter > RAY_EPSILON { t_enter } else { t_exit };
            (t > RAY_EPSILON).then_some(t)
        }
    }
}

/// The mirror's actual raster cell for the laser's pulse clock.
///
/// The mirror starts its raster `round(m_start + drift·frame)` pulses into the
/// laser frame; pulses before that point or after the raster's
/// `rows · k_true` cells fall in the reset phase.
pub fn mirror_pointing(
    pattern: &ScanPattern,
    spec: &MisalignmentSpec,
    frame_index: usize,
    pulse_index: usize,
) -> Pointing {
    let offset = spec.effective_offset(frame_index);
    let q = pulse_index as i64 - offset;
    let raster_len = (pattern.rows * spec.k_true) as i64;
    if q < 0 || q >= raster_len {
        return Pointing::Resetting;
    }
    let row = (q / spec.k_true as i64) as usize;
    let col = (q % spec.k_true as i64) as usize;
    Pointing::Angles(
        pattern.scan_theta(spec.k_true, row, col),
        pattern.row_phi(row),
    )
}

/// Simulates `n_frames` laser frames against the scene.
///
/// Deterministic for a fixed seed: each frame draws from its own
/// `ChaCha8Rng` seeded with `rng_seed XOR frame_index`, so frames can be
/// generated in parallel without changing the output.
pub fn simulate_frames(
    scene: &Scene,
    pattern: &ScanPattern,
    spec: &MisalignmentSpec,
    noise: &NoiseSpec,
    n_frames: usize,
) -> Result<RangeStream> {
    pattern.validate()?;
    if n_frames == 0 {
        return Err(Error::invalid_field("n_frames", "must be at least 1"));
    }
    let pulses_per_frame = pattern.pulses_per_frame();
    let normal = if noise.range_sigma > 0.0 {
        Some(Normal::new(0.0, noise.range_sigma).expect("sigma validated nonnegative"))
    } else {
        None
    };

    let frames: Vec<Vec<Option<f64>>> = (0..n_frames)
        .into_par_iter()
        .map(|frame_index| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed ^ frame_index as u64);
            (0..pulses_per_frame)
                .map(|pulse_index| {
                    let range = match mirror_pointing(pattern, spec, frame_index, pulse_index) {
                        Pointing::Resetting => None,
                        Pointing::Angles(theta, phi) => ray_range(scene, theta, phi),
                    }?;
                    if noise.dropout_prob > 0.0 && rng.random::<f64>() < noise.dropout_prob {
                        return None;
                    }
                    let noisy = match &normal {
                        Some(dist) => (range + dist.sample(&mut rng)).max(0.0),
                        None => range,
                    };
                    Some(noisy)
                })
                .collect()
        })
        .collect();

    RangeStream::new(frames, pulses_per_frame, pattern.delta_t)
}
