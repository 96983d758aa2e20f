//! Python bindings: trajectories, dataset windows, baseline segmentation,
//! tracking, scoring and the full pipeline.
//!
//! Images cross the boundary as [`PyImage`], whose `to_bytes()` is a
//! little-endian `float32` buffer in `(height, width, channels)` order.
//! Configurations cross as JSON strings.

use fmo_core::bbox::BBox;
use fmo_core::config::RunConfig;
use fmo_core::dataset::{generate_dataset as core_generate, DatasetConfig, SequenceSample};
use fmo_core::metrics::{counts_from_iou, f1_from_pr, Counts};
use fmo_core::pipeline;
use fmo_core::renderer::Image;
use fmo_core::segment::{baseline_segment as core_baseline, BaselineParams, MaskPrediction};
use fmo_core::synthgen::{self, ArenaConfig, Trajectory, TrajectoryConfig, Vec2};
use fmo_core::tracker::{track_sequence, KalmanState, TrackerParams};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_json<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    json.map_or_else(|| Ok(T::default()), |s| serde_json::from_str(s).map_err(value_err))
}

#[pyclass(name = "Image", module = "fmo", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyImage {
    inner: Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: u32, height: u32, channels: u32, data: Vec<f32>) -> PyResult<Self> {
        Image::from_vec(width, height, channels, data).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn zeros(width: u32, height: u32, channels: u32) -> Self {
        Self { inner: Image::zeros(width, height, channels) }
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    #[getter]
    fn channels(&self) -> u32 {
        self.inner.channels()
    }

    /// `(height, width, channels)`, numpy order.
    #[getter]
    fn shape(&self) -> (u32, u32, u32) {
        (self.inner.height(), self.inner.width(), self.inner.channels())
    }

    fn get(&self, x: u32, y: u32, c: u32) -> PyResult<f32> {
        if x >= self.inner.width() || y >= self.inner.height() || c >= self.inner.channels() {
            return Err(PyIndexError::new_err(format!("({x}, {y}, {c}) outside {:?}", self.shape())));
        }
        Ok(self.inner.get(x, y, c))
    }

    fn tolist(&self) -> Vec<f32> {
        self.inner.data().to_vec()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        let bytes: Vec<u8> = self.inner.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        PyBytes::new(py, &bytes)
    }

    fn sum(&self) -> f64 {
        self.inner.sum()
    }

    fn count_nonzero(&self) -> usize {
        self.inner.count_nonzero()
    }

    fn __repr__(&self) -> String {
        let (h, w, c) = self.shape();
        format!("Image(height={h}, width={w}, channels={c})")
    }
}

impl From<Image> for PyImage {
    fn from(inner: Image) -> Self {
        Self { inner }
    }
}

#[pyclass(name = "Trajectory", module = "fmo", frozen)]
pub struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn n_frames(&self) -> usize {
        self.inner.n_frames()
    }

    #[getter]
    fn sample_dt(&self) -> f64 {
        self.inner.sample_dt
    }

    #[getter]
    fn displacement(&self) -> Vec<f64> {
        self.inner.displacement.clone()
    }

    /// Per-frame FMO flags for a ball of `diameter` px.
    fn is_fmo(&self, diameter: f64) -> PyResult<Vec<bool>> {
        synthgen::label_fmo(&self.inner, diameter).map_err(value_err)
    }

    /// `(x, y, visible)` of every exposure sample of frame `t`.
    fn samples(&self, t: usize) -> PyResult<Vec<(f64, f64, bool)>> {
        let frame = self.inner.frames.get(t).ok_or_else(|| PyIndexError::new_err(format!("frame {t}")))?;
        Ok(frame.iter().map(|s| (s.position.x, s.position.y, s.visible)).collect())
    }

    /// Sparse footprint of frame `t` as `(x, y, weight)` triples.
    fn psf(&self, t: usize, width: u32, height: u32) -> PyResult<Vec<(u32, u32, f64)>> {
        let psf = synthgen::rasterize_psf(&self.inner, t, (height, width)).map_err(value_err)?;
        Ok(psf.entries.iter().map(|e| (e.x, e.y, e.weight)).collect())
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("trajectory serializes")
    }
}

/// Simulates a trajectory inside a `width`×`height` arena with border surfaces.
#[pyfunction]
#[pyo3(signature = (seed, width, height, config=None))]
fn generate_trajectory(seed: u64, width: u32, height: u32, config: Option<&str>) -> PyResult<PyTrajectory> {
    let cfg: TrajectoryConfig = from_json(config)?;
    synthgen::generate_trajectory(seed, &cfg, &ArenaConfig::new(width, height)).map(|inner| PyTrajectory { inner }).map_err(value_err)
}

#[pyclass(name = "Sample", module = "fmo", frozen)]
pub struct PySample {
    inner: SequenceSample,
}

#[pymethods]
impl PySample {
    #[getter]
    fn frames(&self) -> Vec<PyImage> {
        self.inner.frames.iter().cloned().map(PyImage::from).collect()
    }

    #[getter]
    fn gt(&self) -> PyImage {
        self.inner.gt.mask.clone().into()
    }

    #[getter]
    fn is_fmo(&self) -> bool {
        self.inner.meta.is_fmo
    }

    #[getter]
    fn bbox(&self) -> Option<[u32; 4]> {
        self.inner.meta.bbox.map(|b| [b.x, b.y, b.w, b.h])
    }

    #[getter]
    fn sequence_index(&self) -> usize {
        self.inner.meta.sequence_index
    }

    #[getter]
    fn middle_frame(&self) -> usize {
        self.inner.meta.middle_frame()
    }

    fn meta_json(&self) -> String {
        serde_json::to_string(&self.inner.meta).expect("meta serializes")
    }
}

/// Renders every window of every sequence, in sequence then window order.
#[pyfunction]
#[pyo3(signature = (config=None, master_seed=42, jobs=1))]
fn generate_dataset(py: Python<'_>, config: Option<&str>, master_seed: u64, jobs: usize) -> PyResult<Vec<PySample>> {
    let cfg: DatasetConfig = from_json(config)?;
    cfg.validate().map_err(value_err)?;
    let samples = py.detach(|| core_generate(&cfg, master_seed, jobs)).map_err(value_err)?;
    Ok(samples.into_iter().map(|inner| PySample { inner }).collect())
}

/// Median-background difference mask of the middle frame of a 5-frame window.
#[pyfunction]
#[pyo3(signature = (frames, frame_index=0, tau=0.05, morph_radius=1, min_area=4))]
fn baseline_segment(frames: Vec<PyRef<'_, PyImage>>, frame_index: usize, tau: f64, morph_radius: u32, min_area: usize) -> PyResult<PyImage> {
    let frames: Vec<Image> = frames.iter().map(|f| f.inner.clone()).collect();
    let params = BaselineParams { tau, morph_radius, min_area };
    core_baseline(&frames, frame_index, &params).map(|p| p.prob.into()).map_err(value_err)
}

/// Tracks one mask per frame; returns `{frame, status, bbox, score}` dicts.
#[pyfunction]
#[pyo3(signature = (masks, params=None))]
fn track<'py>(py: Python<'py>, masks: Vec<PyRef<'py, PyImage>>, params: Option<&str>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let params: TrackerParams = from_json(params)?;
    let masks: Vec<MaskPrediction> =
        masks.iter().enumerate().map(|(i, m)| MaskPrediction { prob: m.inner.clone(), frame_index: i }).collect();
    let track = track_sequence(&masks, &params).map_err(value_err)?;
    track
        .entries
        .iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("frame", e.frame)?;
            d.set_item("status", serde_json::to_value(e.status).expect("status serializes").as_str())?;
            d.set_item("bbox", e.bbox.map(|b| [b.x, b.y, b.w, b.h]))?;
            d.set_item("score", e.score)?;
            Ok(d)
        })
        .collect()
}

#[pyclass(name = "Kalman", module = "fmo", frozen)]
pub struct PyKalman {
    inner: KalmanState,
}

#[pymethods]
impl PyKalman {
    #[new]
    #[pyo3(signature = (x, y, vx=0.0, vy=0.0, q=1.0, r=1.0))]
    fn new(x: f64, y: f64, vx: f64, vy: f64, q: f64, r: f64) -> PyResult<Self> {
        KalmanState::new(Vec2::new(x, y), Vec2::new(vx, vy), q, r).map(|inner| Self { inner }).map_err(value_err)
    }

    fn predict(&self) -> Self {
        Self { inner: self.inner.predict() }
    }

    fn update(&self, x: f64, y: f64) -> PyResult<Self> {
        self.inner.update(Vec2::new(x, y)).map(|inner| Self { inner }).map_err(value_err)
    }

    #[getter]
    fn position(&self) -> (f64, f64) {
        let p = self.inner.position();
        (p.x, p.y)
    }

    #[getter]
    fn velocity(&self) -> (f64, f64) {
        let v = self.inner.velocity();
        (v.x, v.y)
    }
}

/// `(tp, fp, fn)` of one frame from its ground-truth × detection IoU matrix.
#[pyfunction]
#[pyo3(signature = (iou, n_detections, threshold=0.5))]
fn match_counts(iou: Vec<Vec<f64>>, n_detections: usize, threshold: f64) -> PyResult<(u64, u64, u64)> {
    if iou.iter().any(|row| row.len() != n_detections) {
        return Err(PyValueError::new_err("every IoU row needs n_detections entries"));
    }
    let c = counts_from_iou(&iou, n_detections, threshold);
    Ok((c.tp, c.fp, c.fn_))
}

/// `(precision, recall, f1)` in [0, 1].
#[pyfunction]
fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let m = Counts::new(tp, fp, fn_).metrics();
    (m.precision, m.recall, m.f1)
}

#[pyfunction]
fn f1(precision: f64, recall: f64) -> f64 {
    f1_from_pr(precision, recall)
}

/// IoU of two `[x, y, w, h]` boxes.
#[pyfunction]
fn bbox_iou(a: [u32; 4], b: [u32; 4]) -> f64 {
    BBox::from(a).iou(&BBox::from(b))
}

#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_json()
}

/// Parses, validates and re-serializes a run configuration.
#[pyfunction]
fn validate_config(config: &str) -> PyResult<String> {
    RunConfig::from_json(config).map(|c| c.to_json()).map_err(value_err)
}

/// generate → segment → track → eval; returns the report text.
#[pyfunction]
fn run_pipeline(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config).map_err(value_err)?;
    py.detach(|| pipeline::run_all(&cfg)).map(|r| r.to_text()).map_err(value_err)
}

#[pymodule]
fn fmo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyKalman>()?;
    m.add_function(wrap_pyfunction!(generate_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_segment, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(match_counts, m)?)?;
    m.add_function(wrap_pyfunction!(prf, m)?)?;
    m.add_function(wrap_pyfunction!(f1, m)?)?;
    m.add_function(wrap_pyfunction!(bbox_iou, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::PyModule;

    #[test]
    fn module_round_trip() {
        Python::initialize();
        Python::attach(|py| {
            let m = PyModule::new(py, "fmo").unwrap();
            fmo(&m).unwrap();
            let globals = PyDict::new(py);
            globals.set_item("fmo", m).unwrap();
            let code = c"
t = fmo.generate_trajectory(3, 64, 48)
psf = t.psf(4, 64, 48)
assert abs(sum(w for _, _, w in psf) - 1.0) < 1e-9
assert fmo.match_counts([[0.7, 0.6]], 2) == (1, 1, 0)
assert abs(fmo.f1(0.454, 0.791) - 0.5769) < 1e-3
img = fmo.Image(2, 1, 1, [0.0, 1.0])
assert img.shape == (1, 2, 1) and len(img.to_bytes()) == 8
";
            py.run(code, Some(&globals), None).unwrap();
        });
    }
}
