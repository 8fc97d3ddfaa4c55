//! Minimum-vertical-gradient (MVG) calibration.
//!
//! Under a hypothesis (m, k) one frame's range sequence is reshaped into a
//! row × column grid after dropping its first `m` samples; the grid's mean
//! absolute vertical (row-to-row) gradient is the cost. Correct registration
//! minimizes it: misregistration scrambles columns and inflates the gradient.
//! The minimizer is found by exhaustive grid search, converted to the start
//! offset `T_s = ΔT·m*`, and the per-frame offset track yields the frame
//! drift `T_e`.
//!
//! The cost is normalized by the count of valid vertical pairs so hypotheses
//! with different grid sizes are comparable; the raw (unnormalized) sum is
//! exposed separately via [`mvg_cost_raw`]. Invalid samples are skipped, never
//! interpolated.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{polar_to_cartesian, CartesianPoint, PolarPoint, ScanPattern};
use crate::simulator::RangeStream;

/// A (row × column) view of one frame's ranges under a hypothesis (m, k).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    values: Vec<Option<f64>>,
    rows: usize,
    k: usize,
    m: usize,
    serpentine: bool,
}

impl FrameGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.k
    }

    pub fn offset(&self) -> usize {
        self.m
    }

    pub fn serpentine(&self) -> bool {
        self.serpentine
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.k + col]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }
}

/// Bounds and admissibility thresholds for the (m, k) grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    /// Inclusive start-offset interval, pulses.
    pub m_range: (usize, usize),
    /// Inclusive pulses-per-row interval.
    pub k_range: (usize, usize),
    /// Minimum valid vertical pairs for a cost to be admissible.
    pub min_valid_pairs: usize,
    /// Relative cost gap to the runner-up below which the result is flagged
    /// ambiguous.
    pub degeneracy_ratio: f64,
}

impl SearchSpec {
    pub fn new(
        m_range: (usize, usize),
        k_range: (usize, usize),
        min_valid_pairs: usize,
        degeneracy_ratio: f64,
    ) -> Result<Self> {
        if m_range.0 > m_range.1 {
            return Err(Error::invalid_field("m_range", "min must not exceed max"));
        }
        if k_range.0 < 2 || k_range.0 > k_range.1 {
            return Err(Error::invalid_field(
                "k_range",
                "must satisfy 2 <= min <= max",
            ));
        }
        if min_valid_pairs < 1 {
            return Err(Error::invalid_field("min_valid_pairs", "must be at least 1"));
        }
        if !(degeneracy_ratio >= 0.0) {
            return Err(Error::invalid_field(
                "degeneracy_ratio",
                "must be nonnegative",
            ));
        }
        Ok(SearchSpec {
            m_range,
            k_range,
            min_valid_pairs,
            degeneracy_ratio,
        })
    }
}

/// One evaluated cell of the search grid. `cost` is `None` when the
/// hypothesis was inadmissible (out of range or too few valid pairs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostCell {
    pub cost: Option<f64>,
    pub valid_pairs: usize,
}

/// The full (m, k) → cost map produced by one calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSurface {
    m_values: Vec<usize>,
    k_values: Vec<usize>,
    /// Row-major over (m index, k index).
    cells: Vec<CostCell>,
}

impl CostSurface {
    pub fn new(m_values: Vec<usize>, k_values: Vec<usize>, cells: Vec<CostCell>) -> Result<Self> {
        if cells.len() != m_values.len() * k_values.len() {
            return Err(Error::invalid_field(
                "cells",
                "length must be m_values.len() * k_values.len()",
            ));
        }
        if cells.iter().any(|c| c.cost.map_or(false, |j| !(j >= 0.0))) {
            return Err(Error::invalid_field("cells", "costs must be nonnegative"));
        }
        Ok(CostSurface {
            m_values,
            k_values,
            cells,
        })
    }

    pub fn m_values(&self) -> &[usize] {
        &self.m_values
    }

    pub fn k_values(&self) -> &[usize] {
        &self.k_values
    }

    pub fn cell(&self, m_index: usize, k_index: usize) -> &CostCell {
        &self.cells[m_index * self.k_values.len() + k_index]
    }

    /// Cost at hypothesis values (not indices); `None` if outside the grid or
    /// inadmissible.
    pub fn cost_at(&self, m: usize, k: usize) -> Option<f64> {
        let mi = self.m_values.iter().position(|&v| v == m)?;
        let ki = self.k_values.iter().position(|&v| v == k)?;
        self.cell(mi, ki).cost
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &CostCell)> + '_ {
        self.m_values.iter().enumerate().flat_map(move |(mi, &m)| {
            self.k_values
                .iter()
                .enumerate()
                .map(move |(ki, &k)| (m, k, self.cell(mi, ki)))
        })
    }
}

/// Recovered registration for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Recovered start offset, pulses.
    pub m_star: usize,
    /// Recovered pulses per row.
    pub k_star: usize,
    /// Start-offset time T_s = ΔT·m*, seconds.
    pub t_s: f64,
    pub cost_surface: CostSurface,
    /// Set when the runner-up cost (outside the argmin's 8-neighborhood) is
    /// not meaningfully above the minimum.
    pub degenerate: bool,
}

/// Frame-drift estimate from the per-frame offset track.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    /// Mean absolute per-frame offset change, seconds:
    /// T_e = ΔT/(n−1) · Σ|m(t_{j+1}) − m(t_j)| over surviving adjacent frames.
    pub t_e: f64,
    /// Per-frame recovered offset; `None` marks frames excluded after a
    /// failed calibration.
    pub m_track: Vec<Option<usize>>,
    /// Pulses-per-row frozen for the tracking pass (modal first-pass k*).
    pub k_star: usize,
    /// Signed least-squares slope of m_track·ΔT versus frame index,
    /// seconds per frame. Diagnostic: the unsigned T_e cannot distinguish
    /// drift direction.
    pub signed_slope: f64,
}

/// Reshapes one frame into a grid: drop the first `m` samples, cut rows of
/// `k`, drop the trailing partial row. Odd rows are reversed when
/// `serpentine` so that a column always maps to the same horizontal azimuth.
pub fn reshape_frame(
    frame: &[Option<f64>],
    m: usize,
    k: usize,
    serpentine: bool,
) -> Result<FrameGrid> {
    if m >= frame.len() || k < 2 || k > frame.len() - m {
        return Err(Error::HypothesisOutOfRange {
            m,
            k,
            len: frame.len(),
        });
    }
    let rows = (frame.len() - m) / k;
    let mut values = Vec::with_capacity(rows * k);
    for row in 0..rows {
        let start = m + row * k;
        let slice = &frame[start..start + k];
        if serpentine && row % 2 == 1 {
            values.extend(slice.iter().rev());
        } else {
            values.extend_from_slice(slice);
        }
    }
    Ok(FrameGrid {
        values,
        rows,
        k,
        m,
        serpentine,
    })
}

/// Mean absolute vertical gradient of the grid: the sum of
/// |grid[r+1][c] − grid[r][c]| over pairs where both cells are valid, divided
/// by the pair count. Pairs touching an invalid cell are skipped and not
/// counted.
pub fn mvg_cost(grid: &FrameGrid) -> Result<(f64, usize)> {
    let (sum, pairs) = mvg_cost_raw(grid);
    if pairs == 0 {
        return Err(Error::NoSignal);
    }
    Ok((sum / pairs as f64, pairs))
}

/// Unnormalized vertical-gradient sum and its valid pair count. The raw sum
/// mechanically favors large `m` (fewer terms); prefer [`mvg_cost`] for
/// hypothesis comparison.
pub fn mvg_cost_raw(grid: &FrameGrid) -> (f64, usize) {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    let k = grid.k;
    for row in 0..grid.rows.saturating_sub(1) {
        let upper = &grid.values[row * k..(row + 1) * k];
        let lower = &grid.values[(row + 1) * k..(row + 2) * k];
        for (a, b) in upper.iter().zip(lower) {
            if let (Some(a), Some(b)) = (a, b) {
                sum += (b - a).abs();
                pairs += 1;
            }
        }
    }
    (sum, pairs)
}

/// Total-variation cost: mean over valid forward-difference neighborhoods of
/// sqrt((∂R/∂x)² + (∂R/∂y)²). Provided for MVG-versus-TV comparison only.
pub fn tv_cost(grid: &FrameGrid) -> Result<f64> {
    if grid.rows < 2 || grid.k < 2 {
        return Err(Error::NoSignal);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in 0..grid.rows - 1 {
        for col in 0..grid.k - 1 {
            let (center, right, below) = (
                grid.get(row, col),
                grid.get(row, col + 1),
                grid.get(row + 1, col),
            );
            if let (Some(c), Some(r), Some(b)) = (center, right, below) {
                let dx = r - c;
                let dy = b - c;
                sum += (dx * dx + dy * dy).sqrt();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoSignal);
    }
    Ok(sum / count as f64)
}

/// Exhaustively evaluates the normalized MVG cost over the (m, k) search grid
/// and returns the admissible argmin, T_s, the full cost surface, and a
/// degeneracy flag. Ties break toward smallest m, then smallest k.
pub fn calibrate_frame(
    frame: &[Option<f64>],
    search: &SearchSpec,
    pattern: &ScanPattern,
) -> Result<CalibrationResult> {
    let m_values: Vec<usize> = (search.m_range.0..=search.m_range.1).collect();
    let k_values: Vec<usize> = (search.k_range.0..=search.k_range.1).collect();

    let cells: Vec<CostCell> = m_values
        .par_iter()
        .flat_map_iter(|&m| {
            k_values.iter().map(move |&k| (m, k))
        })
        .map(|(m, k)| evaluate_cell(frame, m, k, pattern.serpentine, search.min_valid_pairs))
        .collect();

    let surface = CostSurface::new(m_values, k_values, cells)?;
    let (m_star, k_star, degenerate) = select_argmin(&surface, search.degeneracy_ratio)?;

    Ok(CalibrationResult {
        m_star,
        k_star,
        t_s: pattern.delta_t * m_star as f64,
        cost_surface: surface,
        degenerate,
    })
}

fn evaluate_cell(
    frame: &[Option<f64>],
    m: usize,
    k: usize,
    serpentine: bool,
    min_valid_pairs: usize,
) -> CostCell {
    let grid = match reshape_frame(frame, m, k, serpentine) {
        Ok(grid) => grid,
        Err(_) => {
            return CostCell {
                cost: None,
                valid_pairs: 0,
            }
        }
    };
    let (sum, pairs) = mvg_cost_raw(&grid);
    if pairs < min_valid_pairs {
        return CostCell {
            cost: None,
            valid_pairs: pairs,
        };
    }
    CostCell {
        cost: Some(sum / pairs as f64),
        valid_pairs: pairs,
    }
}

/// Deterministic argmin scan with tie-break toward smallest m then k, plus
/// the relative-gap degeneracy test against the best admissible cell outside
/// the argmin's 8-neighborhood in (m, k) space.
fn select_argmin(surface: &CostSurface, degeneracy_ratio: f64) -> Result<(usize, usize, bool)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (m, k, cell) in surface.iter() {
        if let Some(cost) = cell.cost {
            let better = match &best {
                None => true,
                Some((best_cost, _, _)) => cost < *best_cost,
            };
            if better {
                best = Some((cost, m, k));
            }
        }
    }
    let (best_cost, m_star, k_star) = best.ok_or(Error::CalibrationFailed)?;

    let mut runner_up: Option<f64> = None;
    for (m, k, cell) in surface.iter() {
        if m.abs_diff(m_star) <= 1 && k.abs_diff(k_star) <= 1 {
            continue;
        }
        if let Some(cost) = cell.cost {
            if runner_up.map_or(true, |r| cost < r) {
                runner_up = Some(cost);
            }
        }
    }

    let degenerate = match runner_up {
        // Nothing outside the neighborhood to compare against: ambiguous.
        None => true,
        Some(second) => {
            let gap = second - best_cost;
            if best_cost > 0.0 {
                gap / best_cost < degeneracy_ratio
            } else {
                // A zero-cost minimum is sharp only if every competitor is
                // strictly positive.
                gap <= 0.0
            }
        }
    };
    Ok((m_star, k_star, degenerate))
}

/// Tracks the start offset across frames and estimates the frame drift.
///
/// First pass calibrates every frame over the full (m, k) grid; k is then
/// frozen to the modal k* (the actual pulses-per-row is stable while the
/// mirror control signals are unchanged) and the offset track is re-read at
/// that k. Frames that fail calibration are excluded from the drift average.
pub fn track_offsets(
    stream: &RangeStream,
    search: &SearchSpec,
    pattern: &ScanPattern,
) -> Result<DriftEstimate> {
    if stream.n_frames() < 2 {
        return Err(Error::invalid_field(
            "stream",
            "needs at least 2 frames for drift estimation",
        ));
    }

    let first_pass: Vec<Option<(usize, usize)>> = stream
        .frames
        .par_iter()
        .map(|frame| {
            calibrate_frame(frame, search, pattern)
                .ok()
                .map(|r| (r.m_star, r.k_star))
        })
        .collect();

    let mut k_counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for (_, k) in first_pass.iter().flatten() {
        *k_counts.entry(*k).or_default() += 1;
    }
    // Modal k; ties toward the smaller value via BTreeMap order.
    let k_star = k_counts
        .iter()
        .max_by_key(|(_, count)| *count)
        .map(|(k, _)| *k)
        .ok_or(Error::DriftEstimationFailed {
            surviving: 0,
            total: stream.n_frames(),
        })?;

    let fixed_k = SearchSpec {
        k_range: (k_star, k_star),
        ..search.clone()
    };
    let m_track: Vec<Option<usize>> = stream
        .frames
        .par_iter()
        .map(|frame| {
            calibrate_frame(frame, &fixed_k, pattern)
                .ok()
                .map(|r| r.m_star)
        })
        .collect();

    let surviving = m_track.iter().flatten().count();
    if surviving < 2 {
        return Err(Error::DriftEstimationFailed {
            surviving,
            total: stream.n_frames(),
        });
    }

    let mut abs_sum = 0.0;
    let mut diff_count = 0usize;
    for pair in m_track.windows(2) {
        if let (Some(a), Some(b)) = (pair[0], pair[1]) {
            abs_sum += (b as f64 - a as f64).abs();
            diff_count += 1;
        }
    }
    if diff_count == 0 {
        return Err(Error::DriftEstimationFailed {
            surviving,
            total: stream.n_frames(),
        });
    }
    let t_e = stream.delta_t / diff_count as f64 * abs_sum;

    Ok(DriftEstimate {
        t_e,
        signed_slope: least_squares_slope(&m_track) * stream.delta_t,
        m_track,
        k_star,
    })
}

/// Least-squares slope of the surviving (frame index, m) samples, pulses per
/// frame.
fn least_squares_slope(m_track: &[Option<usize>]) -> f64 {
    let samples: Vec<(f64, f64)> = m_track
        .iter()
        .enumerate()
        .filter_map(|(j, m)| m.map(|m| (j as f64, m as f64)))
        .collect();
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return 0.0;
    }
    let mean_x = samples.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = samples.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in &samples {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Reconstructs one frame into Cartesian points by pairing grid cell (r, c)
/// under hypothesis (m, k) with the design azimuths for that cell. Invalid
/// cells are omitted.
pub fn reconstruct_point_cloud(
    frame: &[Option<f64>],
    m: usize,
    k: usize,
    pattern: &ScanPattern,
) -> Result<Vec<CartesianPoint>> {
    let grid = reshape_frame(frame, m, k, pattern.serpentine)?;
    let mut points = Vec::new();
    for row in 0..grid.rows() {
        let phi = pattern.row_phi(row);
        for col in 0..grid.cols() {
            if let Some(range) = grid.get(row, col) {
                let polar = PolarPoint {
                    theta: pattern.col_theta(k, col),
                    phi,
                    range,
                };
                points.push(polar_to_cartesian(&polar)?);
            }
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(rows: &[&[Option<f64>]]) -> FrameGrid {
        let k = rows[0].len();
        FrameGrid {
            values: rows.iter().flat_map(|r| r.iter().copied()).collect(),
            rows: rows.len(),
            k,
            m: 0,
            serpentine: false,
        }
    }

    fn some(values: &[f64]) -> Vec<Option<f64>> {
        values.iter().map(|&v| Some(v)).collect()
    }

    #[test]
    fn reshape_exact() {
        let frame = some(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let grid = reshape_frame(&frame, 0, 3, false).unwrap();
        assert_eq!(grid.rows(), 2);
        assert_eq!(grid.values(), some(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    }

    #[test]
    fn reshape_offset_drop() {
        let frame = some(&[9.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let grid = reshape_frame(&frame, 1, 3, false).unwrap();
        assert_eq!(grid.values(), some(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    }

    #[test]
    fn reshape_serpentine_reverses_odd_rows() {
        let frame = some(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let grid = reshape_frame(&frame, 0, 3, true).unwrap();
        assert_eq!(grid.values(), some(&[1.0, 2.0, 3.0, 6.0, 5.0, 4.0]));
    }

    #[test]
    fn reshape_rejects_bad_hypothesis() {
        let frame = some(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            reshape_frame(&frame, 3, 2, false),
            Err(Error::HypothesisOutOfRange { .. })
        ));
        assert!(matches!(
            reshape_frame(&frame, 0, 4, false),
            Err(Error::HypothesisOutOfRange { .. })
        ));
        assert!(matches!(
            reshape_frame(&frame, 2, 1, false),
            Err(Error::HypothesisOutOfRange { .. })
        ));
    }

    #[test]
    fn mvg_constant_field_is_zero() {
        let grid = grid_from(&[&some(&[5.0, 5.0, 5.0]), &some(&[5.0, 5.0, 5.0])]);
        assert_eq!(mvg_cost(&grid).unwrap(), (0.0, 3));
    }

    #[test]
    fn mvg_hand_evaluation() {
        let grid = grid_from(&[&some(&[1.0, 2.0, 3.0]), &some(&[4.0, 5.0, 6.0])]);
        assert_eq!(mvg_cost(&grid).unwrap(), (3.0, 3));
    }

    #[test]
    fn mvg_skips_invalid_pairs() {
        let grid = grid_from(&[
            &[Some(1.0), None, Some(3.0)],
            &[Some(4.0), Some(5.0), Some(6.0)],
        ]);
        assert_eq!(mvg_cost(&grid).unwrap(), (3.0, 2));
    }

    #[test]
    fn mvg_no_signal() {
        let grid = grid_from(&[&[None, None], &[Some(1.0), None]]);
        assert!(matches!(mvg_cost(&grid), Err(Error::NoSignal)));
    }

    #[test]
    fn tv_hand_evaluations() {
        let constant = grid_from(&[&some(&[2.0, 2.0]), &some(&[2.0, 2.0])]);
        assert_eq!(tv_cost(&constant).unwrap(), 0.0);

        let horizontal = grid_from(&[&some(&[0.0, 1.0]), &some(&[0.0, 1.0])]);
        assert_eq!(tv_cost(&horizontal).unwrap(), 1.0);

        let vertical = grid_from(&[&some(&[0.0, 0.0]), &some(&[1.0, 1.0])]);
        assert_eq!(tv_cost(&vertical).unwrap(), 1.0);
    }

    #[test]
    fn eq6_hand_oracle() {
        // m_track [0,3,7,10,14] at ΔT = 1 µs -> t_e = 3.5 µs.
        let m_track: Vec<Option<usize>> = vec![Some(0), Some(3), Some(7), Some(10), Some(14)];
        let mut abs_sum = 0.0;
        for pair in m_track.windows(2) {
            abs_sum += (pair[1].unwrap() as f64 - pair[0].unwrap() as f64).abs();
        }
        let t_e = 1e-6 / (m_track.len() - 1) as f64 * abs_sum;
        assert!((t_e - 3.5e-6).abs() < 1e-18);
    }

    #[test]
    fn slope_of_linear_track() {
        let track: Vec<Option<usize>> = (0..10).map(|j| Some(2 * j + 3)).collect();
        assert!((least_squares_slope(&track) - 2.0).abs() < 1e-12);
    }
}
