//! Python bindings: exposes the scan simulator and MVG calibrator as the
//! `memscal_py` extension module.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use memscal::{
    CalibrationResult as CoreCalibrationResult, DriftEstimate as CoreDriftEstimate,
    MisalignmentSpec as CoreMisalignmentSpec, NoiseSpec as CoreNoiseSpec, PolarPoint,
    RangeStream as CoreRangeStream, ScanPattern as CoreScanPattern, Scene as CoreScene,
    SearchSpec as CoreSearchSpec,
};

fn to_py_err(err: memscal::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

#[pyclass(name = "ScanPattern", skip_from_py_object)]
#[derive(Clone)]
struct PyScanPattern {
    inner: CoreScanPattern,
}

#[pymethods]
impl PyScanPattern {
    #[new]
    #[pyo3(signature = (rows, k_design, theta_range, phi_range, delta_t, serpentine=false, frame_period_laser=None))]
    fn new(
        rows: usize,
        k_design: usize,
        theta_range: (f64, f64),
        phi_range: (f64, f64),
        delta_t: f64,
        serpentine: bool,
        frame_period_laser: Option<f64>,
    ) -> PyResult<Self> {
        let period = frame_period_laser
            .unwrap_or(rows as f64 * k_design as f64 * delta_t);
        let inner = CoreScanPattern::new(
            rows,
            k_design,
            theta_range,
            phi_range,
            delta_t,
            serpentine,
            period,
        )
        .map_err(to_py_err)?;
        Ok(PyScanPattern { inner })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows
    }

    #[getter]
    fn k_design(&self) -> usize {
        self.inner.k_design
    }

    #[getter]
    fn delta_t(&self) -> f64 {
        self.inner.delta_t
    }

    #[getter]
    fn pulses_per_frame(&self) -> usize {
        self.inner.pulses_per_frame()
    }

    /// Design (theta, phi) pairs, one per pulse index.
    fn design_azimuth_sequence(&self) -> PyResult<Vec<(f64, f64)>> {
        Ok(memscal::design_azimuth_sequence(&self.inner)
            .map_err(to_py_err)?
            .angles)
    }
}

#[pyclass(name = "MisalignmentSpec", skip_from_py_object)]
#[derive(Clone)]
struct PyMisalignmentSpec {
    inner: CoreMisalignmentSpec,
}

#[pymethods]
impl PyMisalignmentSpec {
    #[new]
    #[pyo3(signature = (m_start=0, drift_pulses_per_frame=0.0, k_true=2))]
    fn new(m_start: usize, drift_pulses_per_frame: f64, k_true: usize) -> PyResult<Self> {
        Ok(PyMisalignmentSpec {
            inner: CoreMisalignmentSpec::new(m_start, drift_pulses_per_frame, k_true)
                .map_err(to_py_err)?,
        })
    }

    fn effective_offset(&self, frame_index: usize) -> i64 {
        self.inner.effective_offset(frame_index)
    }
}

#[pyclass(name = "NoiseSpec", skip_from_py_object)]
#[derive(Clone)]
struct PyNoiseSpec {
    inner: CoreNoiseSpec,
}

#[pymethods]
impl PyNoiseSpec {
    #[new]
    #[pyo3(signature = (range_sigma=0.0, dropout_prob=0.0, rng_seed=0))]
    fn new(range_sigma: f64, dropout_prob: f64, rng_seed: u64) -> PyResult<Self> {
        Ok(PyNoiseSpec {
            inner: CoreNoiseSpec::new(range_sigma, dropout_prob, rng_seed).map_err(to_py_err)?,
        })
    }
}

#[pyclass(name = "Scene", skip_from_py_object)]
#[derive(Clone)]
struct PyScene {
    planes: Vec<([f64; 3], f64)>,
    boxes: Vec<([f64; 3], [f64; 3])>,
    background_range: Option<f64>,
}

impl PyScene {
    fn build(&self) -> PyResult<CoreScene> {
        let mut primitives = Vec::new();
        for (normal, offset) in &self.planes {
            primitives.push(memscal::Primitive::Plane {
                normal: *normal,
                offset: *offset,
            });
        }
        for (min, max) in &self.boxes {
            primitives.push(memscal::Primitive::AxisAlignedBox {
                min: *min,
                max: *max,
            });
        }
        CoreScene::new(primitives, self.background_range).map_err(to_py_err)
    }
}

#[pymethods]
impl PyScene {
    #[new]
    #[pyo3(signature = (background_range=None))]
    fn new(background_range: Option<f64>) -> Self {
        PyScene {
            planes: Vec::new(),
            boxes: Vec::new(),
            background_range,
        }
    }

    fn add_plane(&mut self, normal: [f64; 3], offset: f64) -> PyResult<()> {
        self.planes.push((normal, offset));
        self.build()?;
        Ok(())
    }

    fn add_box(&mut self, min: [f64; 3], max: [f64; 3]) -> PyResult<()> {
        self.boxes.push((min, max));
        self.build()?;
        Ok(())
    }

    /// Range seen from the origin along (theta, phi); None on miss.
    fn ray_range(&self, theta: f64, phi: f64) -> PyResult<Option<f64>> {
        Ok(memscal::ray_range(&self.build()?, theta, phi))
    }
}

#[pyclass(name = "SearchSpec", skip_from_py_object)]
#[derive(Clone)]
struct PySearchSpec {
    inner: CoreSearchSpec,
}

#[pymethods]
impl PySearchSpec {
    #[new]
    #[pyo3(signature = (m_range, k_range, min_valid_pairs=16, degeneracy_ratio=0.05))]
    fn new(
        m_range: (usize, usize),
        k_range: (usize, usize),
        min_valid_pairs: usize,
        degeneracy_ratio: f64,
    ) -> PyResult<Self> {
        Ok(PySearchSpec {
            inner: CoreSearchSpec::new(m_range, k_range, min_valid_pairs, degeneracy_ratio)
                .map_err(to_py_err)?,
        })
    }
}

#[pyclass(name = "RangeStream", skip_from_py_object)]
#[derive(Clone)]
struct PyRangeStream {
    inner: CoreRangeStream,
}

#[pymethods]
impl PyRangeStream {
    #[new]
    fn new(frames: Vec<Vec<Option<f64>>>, pulses_per_frame: usize, delta_t: f64) -> PyResult<Self> {
        Ok(PyRangeStream {
            inner: CoreRangeStream::new(frames, pulses_per_frame, delta_t).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn n_frames(&self) -> usize {
        self.inner.n_frames()
    }

    #[getter]
    fn pulses_per_frame(&self) -> usize {
        self.inner.pulses_per_frame
    }

    #[getter]
    fn delta_t(&self) -> f64 {
        self.inner.delta_t
    }

    fn frame(&self, index: usize) -> PyResult<Vec<Option<f64>>> {
        self.inner
            .frames
            .get(index)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("frame {index} out of range")))
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        memscal::io::write_range_stream(&self.inner, std::path::Path::new(path))
            .map_err(to_py_err)
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        Ok(PyRangeStream {
            inner: memscal::io::read_range_stream(std::path::Path::new(path))
                .map_err(to_py_err)?,
        })
    }
}

#[pyclass(name = "CalibrationResult")]
struct PyCalibrationResult {
    inner: CoreCalibrationResult,
}

#[pymethods]
impl PyCalibrationResult {
    #[getter]
    fn m_star(&self) -> usize {
        self.inner.m_star
    }

    #[getter]
    fn k_star(&self) -> usize {
        self.inner.k_star
    }

    #[getter]
    fn t_s(&self) -> f64 {
        self.inner.t_s
    }

    #[getter]
    fn degenerate(&self) -> bool {
        self.inner.degenerate
    }

    /// (m, k, cost-or-None, valid_pairs) for every search cell.
    fn cost_surface(&self) -> Vec<(usize, usize, Option<f64>, usize)> {
        self.inner
            .cost_surface
            .iter()
            .map(|(m, k, cell)| (m, k, cell.cost, cell.valid_pairs))
            .collect()
    }
}

#[pyclass(name = "DriftEstimate")]
struct PyDriftEstimate {
    inner: CoreDriftEstimate,
}

#[pymethods]
impl PyDriftEstimate {
    #[getter]
    fn t_e(&self) -> f64 {
        self.inner.t_e
    }

    #[getter]
    fn signed_slope(&self) -> f64 {
        self.inner.signed_slope
    }

    #[getter]
    fn k_star(&self) -> usize {
        self.inner.k_star
    }

    #[getter]
    fn m_track(&self) -> Vec<Option<usize>> {
        self.inner.m_track.clone()
    }
}

/// Time-of-flight range: c·(t_echo − t_transmit)/2.
#[pyfunction]
#[pyo3(signature = (t_transmit, t_echo, c=memscal::SPEED_OF_LIGHT))]
fn range_from_tof(t_transmit: f64, t_echo: f64, c: f64) -> PyResult<f64> {
    memscal::range_from_tof(t_transmit, t_echo, c).map_err(to_py_err)
}

#[pyfunction]
fn polar_to_cartesian(theta: f64, phi: f64, range: f64) -> PyResult<(f64, f64, f64)> {
    let c = memscal::polar_to_cartesian(&PolarPoint { theta, phi, range }).map_err(to_py_err)?;
    Ok((c.x, c.y, c.z))
}

#[pyfunction]
fn cartesian_to_polar(x: f64, y: f64, z: f64) -> PyResult<(f64, f64, f64)> {
    let p = memscal::cartesian_to_polar(&memscal::CartesianPoint { x, y, z })
        .map_err(to_py_err)?;
    Ok((p.theta, p.phi, p.range))
}

#[pyfunction]
fn simulate_frames(
    scene: &PyScene,
    pattern: &PyScanPattern,
    spec: &PyMisalignmentSpec,
    noise: &PyNoiseSpec,
    n_frames: usize,
) -> PyResult<PyRangeStream> {
    Ok(PyRangeStream {
        inner: memscal::simulate_frames(
            &scene.build()?,
            &pattern.inner,
            &spec.inner,
            &noise.inner,
            n_frames,
        )
        .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn calibrate_frame(
    frame: Vec<Option<f64>>,
    search: &PySearchSpec,
    pattern: &PyScanPattern,
) -> PyResult<PyCalibrationResult> {
    Ok(PyCalibrationResult {
        inner: memscal::calibrate_frame(&frame, &search.inner, &pattern.inner)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn track_offsets(
    stream: &PyRangeStream,
    search: &PySearchSpec,
    pattern: &PyScanPattern,
) -> PyResult<PyDriftEstimate> {
    Ok(PyDriftEstimate {
        inner: memscal::track_offsets(&stream.inner, &search.inner, &pattern.inner)
            .map_err(to_py_err)?,
    })
}

/// Mean absolute vertical gradient of one frame under hypothesis (m, k);
/// returns (cost, valid_pairs).
#[pyfunction]
fn mvg_cost(
    frame: Vec<Option<f64>>,
    m: usize,
    k: usize,
    serpentine: bool,
) -> PyResult<(f64, usize)> {
    let grid = memscal::reshape_frame(&frame, m, k, serpentine).map_err(to_py_err)?;
    memscal::mvg_cost(&grid).map_err(to_py_err)
}

#[pyfunction]
fn reconstruct_point_cloud(
    frame: Vec<Option<f64>>,
    m: usize,
    k: usize,
    pattern: &PyScanPattern,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let cloud = memscal::reconstruct_point_cloud(&frame, m, k, &pattern.inner)
        .map_err(to_py_err)?;
    Ok(cloud.iter().map(|p| (p.x, p.y, p.z)).collect())
}

#[pymodule]
fn memscal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScanPattern>()?;
    m.add_class::<PyMisalignmentSpec>()?;
    m.add_class::<PyNoiseSpec>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PySearchSpec>()?;
    m.add_class::<PyRangeStream>()?;
    m.add_class::<PyCalibrationResult>()?;
    m.add_class::<PyDriftEstimate>()?;
    m.add_function(wrap_pyfunction!(range_from_tof, m)?)?;
    m.add_function(wrap_pyfunction!(polar_to_cartesian, m)?)?;
    m.add_function(wrap_pyfunction!(cartesian_to_polar, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_frames, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_frame, m)?)?;
    m.add_function(wrap_pyfunction!(track_offsets, m)?)?;
    m.add_function(wrap_pyfunction!(mvg_cost, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_point_cloud, m)?)?;
    m.add("SPEED_OF_LIGHT", memscal::SPEED_OF_LIGHT)?;
    Ok(())
}
