//! Measurement and projection equations, and the design raster azimuth
//! sequence.
//!
//! The sensor model is a tangent-plane projection, not spherical coordinates:
//! a point at horizontal azimuth θ, vertical azimuth φ and range R maps to
//!
//! ```text
//! z = R / sqrt(1 + tan²θ + tan²φ),   y = z·tanφ,   x = z·tanθ
//! ```
//!
//! so the ray direction is proportional to (tanθ, tanφ, 1). All vertical
//! gradients and reconstructed clouds in this crate live in this model.

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s. Overridable per call in [`range_from_tof`].
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Design-time description of the raster scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPattern {
    /// Number of raster rows.
    pub rows: usize,
    /// Design pulses per row.
    pub k_design: usize,
    /// Horizontal azimuth extent (min, max), radians.
    pub theta_range: (f64, f64),
    /// Vertical azimuth extent (min, max), radians. φ increases with row index.
    pub phi_range: (f64, f64),
    /// Laser pulse repetition interval ΔT, seconds.
    pub delta_t: f64,
    /// Alternate rows scan in opposite horizontal directions.
    pub serpentine: bool,
    /// Laser frame period, seconds. Must cover the full design raster.
    pub frame_period_laser: f64,
}

impl ScanPattern {
    pub fn new(
        rows: usize,
        k_design: usize,
        theta_range: (f64, f64),
        phi_range: (f64, f64),
        delta_t: f64,
        serpentine: bool,
        frame_period_laser: f64,
    ) -> Result<Self> {
        let pattern = ScanPattern {
            rows,
            k_design,
            theta_range,
            phi_range,
            delta_t,
            serpentine,
            frame_period_laser,
        };
        pattern.validate()?;
        Ok(pattern)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 {
            return Err(Error::invalid_field("rows", "must be at least 2"));
        }
        if self.k_design < 2 {
            return Err(Error::invalid_field("k_design", "must be at least 2"));
        }
        for (name, (lo, hi)) in [("theta_range", self.theta_range), ("phi_range", self.phi_range)]
        {
            if !(lo < hi) {
                return Err(Error::invalid_field(name, "min must be below max"));
            }
            if lo.abs() >= HALF_PI || hi.abs() >= HALF_PI {
                return Err(Error::invalid_field(name, "magnitudes must be below π/2"));
            }
        }
        if !(self.delta_t > 0.0) {
            return Err(Error::invalid_field("delta_t", "must be positive"));
        }
        let min_period = self.rows as f64 * self.k_design as f64 * self.delta_t;
        if self.frame_period_laser < min_period {
            return Err(Error::invalid_field(
                "frame_period_laser",
                format!("must be at least rows·k_design·delta_t = {min_period} s"),
            ));
        }
        Ok(())
    }

    /// Laser pulses fired per frame.
    pub fn pulses_per_frame(&self) -> usize {
        (self.frame_period_laser / self.delta_t).round() as usize
    }

    /// Vertical azimuth of raster row `row`, linearly spaced across
    /// `phi_range` for the design row count. Rows past the design count
    /// extrapolate with the same step.
    pub fn row_phi(&self, row: usize) -> f64 {
        let (lo, hi) = self.phi_range;
        let step = (hi - lo) / (self.rows - 1) as f64;
        lo + row as f64 * step
    }

    /// Horizontal azimuth of column `col` when a row holds `k` pulses, in
    /// left-to-right order (ignores serpentine direction).
    pub fn col_theta(&self, k: usize, col: usize) -> f64 {
        let (lo, hi) = self.theta_range;
        let step = (hi - lo) / (k - 1) as f64;
        lo + col as f64 * step
    }

    /// Horizontal azimuth of pulse `col` within raster row `row` when a row
    /// holds `k` pulses, respecting the serpentine direction.
    pub fn scan_theta(&self, k: usize, row: usize, col: usize) -> f64 {
        if self.serpentine && row % 2 == 1 {
            self.col_theta(k, k - 1 - col)
        } else {
            self.col_theta(k, col)
        }
    }
}

/// A measurement in the sensor's polar model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    /// Horizontal azimuth, radians.
    pub theta: f64,
    /// Vertical azimuth, radians.
    pub phi: f64,
    /// Range, meters.
    pub range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Design azimuths for one frame, one `(theta, phi)` pair per pulse index.
#[derive(Debug, Clone, PartialEq)]
pub struct AzimuthSequence {
    pub angles: Vec<(f64, f64)>,
}

impl AzimuthSequence {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Time-of-flight ranging: distance = c·(t_echo − t_transmit)/2.
pub fn range_from_tof(t_transmit: f64, t_echo: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::invalid_field("c", "must be positive"));
    }
    if t_echo < t_transmit {
        return Err(Error::InvalidInterval { t_transmit, t_echo });
    }
    Ok(c * (t_echo - t_transmit) / 2.0)
}

/// Projects a polar measurement into Cartesian coordinates.
pub fn polar_to_cartesian(p: &PolarPoint) -> Result<CartesianPoint> {
    if p.theta.abs() >= HALF_PI {
        return Err(Error::Singularity {
            name: "theta",
            value: p.theta,
        });
    }
    if p.phi.abs() >= HALF_PI {
        return Err(Error::Singularity {
            name: "phi",
            value: p.phi,
        });
    }
    let tan_theta = p.theta.tan();
    let tan_phi = p.phi.tan();
    let z = p.range / (1.0 + tan_theta * tan_theta + tan_phi * tan_phi).sqrt();
    Ok(CartesianPoint {
        x: z * tan_theta,
        y: z * tan_phi,
        z,
    })
}

/// Inverse projection; requires the point to lie in front of the sensor.
pub fn cartesian_to_polar(p: &CartesianPoint) -> Result<PolarPoint> {
    if !(p.z > 0.0) {
        return Err(Error::BehindSensor { z: p.z });
    }
    Ok(PolarPoint {
        theta: (p.x / p.z).atan(),
        phi: (p.y / p.z).atan(),
        range: (p.x * p.x + p.y * p.y + p.z * p.z).sqrt(),
    })
}

/// Generates the design azimuth sequence for one frame: φ linearly spaced
/// across rows, θ linearly spaced within each row, odd rows reversed when the
/// pattern is serpentine.
pub fn design_azimuth_sequence(pattern: &ScanPattern) -> Result<AzimuthSequence> {
    pattern.validate()?;
    let mut angles = Vec::with_capacity(pattern.rows * pattern.k_design);
    for row in 0..pattern.rows {
        let phi = pattern.row_phi(row);
        for col in 0..pattern.k_design {
            angles.push((pattern.scan_theta(pattern.k_design, row, col), phi));
        }
    }
    Ok(AzimuthSequence { angles })
}
