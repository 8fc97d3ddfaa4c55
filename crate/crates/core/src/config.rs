//! Run and scene configuration files (TOML).
//!
//! Unknown keys are rejected. Every parsed document is validated against the
//! domain-type invariants before use; violations name the offending field.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::ScanPattern;
use crate::simulator::{MisalignmentSpec, NoiseSpec, Primitive, Scene};
use crate::SearchSpec;

/// Top-level run configuration.
///
/// ```toml
/// scene = "scene.toml"
/// n_frames = 1
/// output = "out"
///
/// [pattern]
/// rows = 64
/// k_design = 450
/// theta_range = [-0.35, 0.35]
/// phi_range = [-0.25, 0.25]
/// delta_t = 1e-6
/// serpentine = true
/// frame_period_laser = 0.0288
///
/// [misalignment]
/// m_start = 37
/// drift_pulses_per_frame = 0.0
/// k_true = 452
///
/// [noise]
/// range_sigma = 0.0
/// dropout_prob = 0.0
/// rng_seed = 0
///
/// [search]
/// m_max = 49
/// k_range = [445, 455]
/// min_valid_pairs = 32
/// degeneracy_ratio = 0.05
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Path to the scene description file, relative to the config file.
    pub scene: PathBuf,
    #[serde(default = "default_n_frames")]
    pub n_frames: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub pattern: PatternConfig,
    #[serde(default)]
    pub misalignment: MisalignmentConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub search: SearchConfig,
}

fn default_n_frames() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub rows: usize,
    pub k_design: usize,
    pub theta_range: (f64, f64),
    pub phi_range: (f64, f64),
    pub delta_t: f64,
    #[serde(default)]
    pub serpentine: bool,
    /// Defaults to rows · k_design · delta_t (no idle pulses).
    pub frame_period_laser: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisalignmentConfig {
    #[serde(default)]
    pub m_start: usize,
    #[serde(default)]
    pub drift_pulses_per_frame: f64,
    /// Defaults to the pattern's k_design.
    pub k_true: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub range_sigma: f64,
    #[serde(default)]
    pub dropout_prob: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default)]
    pub m_min: usize,
    pub m_max: usize,
    /// Defaults to k_design ± 5.
    pub k_range: Option<(usize, usize)>,
    #[serde(default = "default_min_valid_pairs")]
    pub min_valid_pairs: usize,
    #[serde(default = "default_degeneracy_ratio")]
    pub degeneracy_ratio: f64,
}

fn default_min_valid_pairs() -> usize {
    16
}

fn default_degeneracy_ratio() -> f64 {
    0.05
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            m_min: 0,
            m_max: 50,
            k_range: None,
            min_valid_pairs: default_min_valid_pairs(),
            degeneracy_ratio: default_degeneracy_ratio(),
        }
    }
}

impl RunConfig {
    pub fn scan_pattern(&self) -> Result<ScanPattern> {
        let p = &self.pattern;
        let frame_period = p
            .frame_period_laser
            .unwrap_or(p.rows as f64 * p.k_design as f64 * p.delta_t);
        ScanPattern::new(
            p.rows,
            p.k_design,
            p.theta_range,
            p.phi_range,
            p.delta_t,
            p.serpentine,
            frame_period,
        )
    }

    pub fn misalignment_spec(&self) -> Result<MisalignmentSpec> {
        let m = &self.misalignment;
        MisalignmentSpec::new(
            m.m_start,
            m.drift_pulses_per_frame,
            m.k_true.unwrap_or(self.pattern.k_design),
        )
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.noise.range_sigma, self.noise.dropout_prob, self.noise.rng_seed)
    }

    pub fn search_spec(&self) -> Result<SearchSpec> {
        let s = &self.search;
        let k_design = self.pattern.k_design;
        let k_range = s
            .k_range
            .unwrap_or((k_design.saturating_sub(5).max(2), k_design + 5));
        SearchSpec::new(
            (s.m_min, s.m_max),
            k_range,
            s.min_valid_pairs,
            s.degeneracy_ratio,
        )
    }

    /// Full validation: every derived domain type must construct.
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::invalid_field("n_frames", "must be at least 1"));
        }
        self.scan_pattern()?;
        self.misalignment_spec()?;
        self.noise_spec()?;
        self.search_spec()?;
        Ok(())
    }

    /// Scene path resolved against the config file's directory.
    pub fn scene_path(&self, config_path: &Path) -> PathBuf {
        if self.scene.is_absolute() {
            self.scene.clone()
        } else {
            config_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(&self.scene)
        }
    }
}

/// Parses and validates a run config document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Scene description document.
///
/// ```toml
/// background_range = 30.0   # optional; omit for invalid-echo on miss
///
/// [[plane]]
/// normal = [0.0, 0.0, 1.0]
/// offset = 12.0
///
/// [[box]]
/// min = [-1.5, -1.0, 5.0]
/// max = [-0.3, 0.5, 7.0]
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub background_range: Option<f64>,
    #[serde(default, rename = "plane")]
    pub planes: Vec<PlaneConfig>,
    #[serde(default, rename = "box")]
    pub boxes: Vec<BoxConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneConfig {
    pub normal: [f64; 3],
    pub offset: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let config: SceneConfig =
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let mut primitives = Vec::new();
    for plane in &config.planes {
        primitives.push(Primitive::Plane {
            normal: plane.normal,
            offset: plane.offset,
        });
    }
    for b in &config.boxes {
        primitives.push(Primitive::AxisAlignedBox {
            min: b.min,
            max: b.max,
        });
    }
    Scene::new(primitives, config.background_range)
}
