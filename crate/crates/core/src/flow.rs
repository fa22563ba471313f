//! Windowed Lucas-Kanade flow between consecutive saliency maps, reduced to a
//! per-pair temporal score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::FlowError;
use crate::saliency::{SaliencyMap, SaliencySequence};
use crate::score::{consecutive_pairs, ScoreSeries};

/// Guard added to the overlap in [`TemporalNorm::IouDivide`].
pub const IOU_DIVIDE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LkParams {
    /// Odd side length of the square window, in pixels.
    pub window: usize,
    /// Smallest eigenvalue of AᵀA accepted as well conditioned.
    pub min_eigen: f64,
    /// Pixels between flow samples.
    pub grid_stride: usize,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            window: 21,
            min_eigen: 1e-4,
            grid_stride: 4,
        }
    }
}

impl LkParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(FlowError::BadParams(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.grid_stride == 0 {
            return Err(FlowError::BadParams("grid_stride must be >= 1".into()));
        }
        if !(self.min_eigen >= 0.0) {
            return Err(FlowError::BadParams(format!(
                "min_eigen must be non-negative, got {}",
                self.min_eigen
            )));
        }
        Ok(())
    }
}

/// How the mean motion magnitude is combined with the saliency overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalNorm {
    /// `m * (1 - iou)`
    #[default]
    #[serde(alias = "iou_complement")]
    IouComplement,
    /// `m / (iou + 1e-6)`
    #[serde(alias = "iou_divide")]
    IouDivide,
    /// `m`
    None,
}

impl TemporalNorm {
    pub fn name(self) -> &'static str {
        match self {
            TemporalNorm::IouComplement => "iou-complement",
            TemporalNorm::IouDivide => "iou-divide",
            TemporalNorm::None => "none",
        }
    }

    pub fn combine(self, mean_magnitude: f64, iou: f64) -> f64 {
        match self {
            TemporalNorm::IouComplement => mean_magnitude * (1.0 - iou),
            TemporalNorm::IouDivide => mean_magnitude / (iou + IOU_DIVIDE_GUARD),
            TemporalNorm::None => mean_magnitude,
        }
    }
}

/// Dense row-major scalar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Spatial derivatives of the earlier map and the temporal difference.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub vx: Grid,
    pub vy: Grid,
    pub vt: Grid,
}

fn check_same_size(a: &SaliencyMap, b: &SaliencyMap) -> Result<(), FlowError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(FlowError::SizeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// Central differences of `map_t` (one-sided at the borders) and `map_t1 - map_t`.
pub fn gradients(map_t: &SaliencyMap, map_t1: &SaliencyMap) -> Result<Gradients, FlowError> {
    check_same_size(map_t, map_t1)?;
    let (w, h) = (map_t.width(), map_t.height());
    let at = |x: usize, y: usize| f64::from(map_t.get(x, y));
    let diff = |lo: usize, hi: usize, f: &dyn Fn(usize) -> f64| -> f64 {
        if hi == lo {
            0.0
        } else {
            (f(hi) - f(lo)) / (hi - lo) as f64
        }
    };
    let mut vx = Vec::with_capacity(w * h);
    let mut vy = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
            vx.push(diff(x0, x1, &|xx| at(xx, y)));
            vy.push(diff(y0, y1, &|yy| at(x, yy)));
        }
    }
    let vt = map_t1
        .values()
        .iter()
        .zip(map_t.values())
        .map(|(&b, &a)| f64::from(b) - f64::from(a))
        .collect();
    let grid = |data| Grid {
        width: w,
        height: h,
        data,
    };
    Ok(Gradients {
        vx: grid(vx),
        vy: grid(vy),
        vt: grid(vt),
    })
}

/// Flow at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkSolution {
    pub u_x: f64,
    pub u_y: f64,
    pub valid: bool,
}

impl LkSolution {
    pub const INVALID: LkSolution = LkSolution {
        u_x: 0.0,
        u_y: 0.0,
        valid: false,
    };

    pub fn magnitude(&self) -> f64 {
        self.u_x.hypot(self.u_y)
    }
}

/// Window sums of the normal-equation terms.
#[derive(Debug, Clone, Copy, Default)]
struct NormalSums {
    xx: f64,
    xy: f64,
    yy: f64,
    xt: f64,
    yt: f64,
}

impl NormalSums {
    fn smallest_eigenvalue(&self) -> f64 {
        let trace = self.xx + self.yy;
        let disc = ((self.xx - self.yy).powi(2) + 4.0 * self.xy * self.xy).sqrt();
        (trace - disc) / 2.0
    }

    /// `U = (AᵀA)⁻¹ AᵀB` with `B = -V_t`.
    fn solve(&self, min_eigen: f64) -> LkSolution {
        let lambda_min = self.smallest_eigenvalue();
        let det = self.xx * self.yy - self.xy * self.xy;
        if !(lambda_min >= min_eigen) || det <= 0.0 {
            return LkSolution::INVALID;
        }
        let (bx, by) = (-self.xt, -self.yt);
        let u_x = (self.yy * bx - self.xy * by) / det;
        let u_y = (self.xx * by - self.xy * bx) / det;
        if u_x.is_finite() && u_y.is_finite() {
            LkSolution { u_x, u_y, valid: true }
        } else {
            LkSolution::INVALID
        }
    }
}

/// Inclusive window bounds around `c`, shrunk at the borders.
fn window_span(c: usize, half: usize, n: usize) -> (usize, usize) {
    (c.saturating_sub(half), (c + half).min(n - 1))
}

/// Smallest eigenvalue of AᵀA for the window around `(cx, cy)`.
pub fn structure_min_eigen(g: &Gradients, cx: usize, cy: usize, window: usize) -> f64 {
    direct_sums(g, cx, cy, window).smallest_eigenvalue()
}

fn direct_sums(g: &Gradients, cx: usize, cy: usize, window: usize) -> NormalSums {
    let half = window / 2;
    let (x0, x1) = window_span(cx, half, g.vx.width);
    let (y0, y1) = window_span(cy, half, g.vx.height);
    let mut s = NormalSums::default();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (ix, iy, it) = (g.vx.get(x, y), g.vy.get(x, y), g.vt.get(x, y));
            s.xx += ix * ix;
            s.xy += ix * iy;
            s.yy += iy * iy;
            s.xt += ix * it;
            s.yt += iy * it;
        }
    }
    s
}

/// Least-squares flow for the window centred on `(cx, cy)`. Windows whose
/// structure tensor has smallest eigenvalue below `min_eigen` are invalid.
pub fn lk_solve(g: &Gradients, cx: usize, cy: usize, params: &LkParams) -> LkSolution {
    direct_sums(g, cx, cy, params.window).solve(params.min_eigen)
}

/// Summed-area tables of the five normal-equation products.
struct IntegralSums {
    stride: usize,
    tables: [Vec<f64>; 5],
}

impl IntegralSums {
    fn new(g: &Gradients) -> Self {
        let (w, h) = (g.vx.width, g.vx.height);
        let stride = w + 1;
        let mut tables: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; stride * (h + 1)]);
        for y in 0..h {
            let mut row = [0.0f64; 5];
            for x in 0..w {
                let (ix, iy, it) = (g.vx.get(x, y), g.vy.get(x, y), g.vt.get(x, y));
                let terms = [ix * ix, ix * iy, iy * iy, ix * it, iy * it];
                for (k, table) in tables.iter_mut().enumerate() {
                    row[k] += terms[k];
                    table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row[k];
                }
            }
        }
        Self { stride, tables }
    }

    fn window(&self, x0: usize, x1: usize, y0: usize, y1: usize) -> NormalSums {
        let s = self.stride;
        let rect = |t: &Vec<f64>| {
            t[(y1 + 1) * s + x1 + 1] - t[y0 * s + x1 + 1] - t[(y1 + 1) * s + x0] + t[y0 * s + x0]
        };
        let [xx, xy, yy, xt, yt] = &self.tables;
        NormalSums {
            xx: rect(xx),
            xy: rect(xy),
            yy: rect(yy),
            xt: rect(xt),
            yt: rect(yt),
        }
    }
}

/// Flow sampled every `grid_stride` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    /// Samples per row and per column.
    pub cols: usize,
    pub rows: usize,
    pub grid_stride: usize,
    pub u_x: Vec<f64>,
    pub u_y: Vec<f64>,
    pub valid: Vec<bool>,
}

impl FlowField {
    /// `sqrt(u_x² + u_y²)` per sample; zero where invalid.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.u_x.iter().zip(&self.u_y).map(|(x, y)| x.hypot(*y)).collect()
    }

    pub fn valid_vectors(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.valid.len())
            .filter(|&i| self.valid[i])
            .map(|i| (self.u_x[i], self.u_y[i]))
    }

    /// Mean magnitude over valid samples, 0 when none are valid.
    pub fn mean_valid_magnitude(&self) -> f64 {
        let (sum, count) = self
            .valid_vectors()
            .fold((0.0, 0usize), |(s, c), (x, y)| (s + x.hypot(y), c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

pub fn flow_field(
    map_t: &SaliencyMap,
    map_t1: &SaliencyMap,
    params: &LkParams,
) -> Result<FlowField, FlowError> {
    params.validate()?;
    let g = gradients(map_t, map_t1)?;
    let (w, h) = (map_t.width(), map_t.height());
    let sums = IntegralSums::new(&g);
    let half = params.window / 2;
    let xs: Vec<usize> = (0..w).step_by(params.grid_stride).collect();
    let ys: Vec<usize> = (0..h).step_by(params.grid_stride).collect();
    let mut field = FlowField {
        cols: xs.len(),
        rows: ys.len(),
        grid_stride: params.grid_stride,
        u_x: Vec::with_capacity(xs.len() * ys.len()),
        u_y: Vec::with_capacity(xs.len() * ys.len()),
        valid: Vec::with_capacity(xs.len() * ys.len()),
    };
    for &y in &ys {
        let (y0, y1) = window_span(y, half, h);
        for &x in &xs {
            let (x0, x1) = window_span(x, half, w);
            let sol = sums.window(x0, x1, y0, y1).solve(params.min_eigen);
            field.u_x.push(sol.u_x);
            field.u_y.push(sol.u_y);
            field.valid.push(sol.valid);
        }
    }
    Ok(field)
}

/// Σ min / Σ max of two maps; 1 when both are all zero.
pub fn saliency_iou(map_t: &SaliencyMap, map_t1: &SaliencyMap) -> Result<f64, FlowError> {
    check_same_size(map_t, map_t1)?;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (&a, &b) in map_t.values().iter().zip(map_t1.values()) {
        num += f64::from(a.min(b));
        den += f64::from(a.max(b));
    }
    Ok(if den == 0.0 { 1.0 } else { num / den })
}

/// Motion magnitude and overlap for one pair of maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMotion {
    pub mean_magnitude: f64,
    pub iou: f64,
}

pub fn pair_motion(
    map_t: &SaliencyMap,
    map_t1: &SaliencyMap,
    params: &LkParams,
) -> Result<PairMotion, FlowError> {
    let field = flow_field(map_t, map_t1, params)?;
    Ok(PairMotion {
        mean_magnitude: field.mean_valid_magnitude(),
        iou: saliency_iou(map_t, map_t1)?,
    })
}

pub fn temporal_score(
    sal: &SaliencySequence,
    params: &LkParams,
    norm: TemporalNorm,
) -> Result<ScoreSeries, FlowError> {
    params.validate()?;
    if sal.maps.len() < 2 {
        return Err(FlowError::TooFewMaps(sal.maps.len()));
    }
    let values = sal
        .maps
        .par_windows(2)
        .map(|w| pair_motion(&w[0], &w[1], params).map(|m| norm.combine(m.mean_magnitude, m.iou)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreSeries::new(
        format!("saliency-flow/{}", norm.name()),
        values,
        consecutive_pairs(&sal.indices),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(w: usize, h: usize, cx: f64, cy: f64, sigma: f64) -> SaliencyMap {
        SaliencyMap::from_fn(w, h, |x, y| {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            (-d2 / (2.0 * sigma * sigma)).exp() as f32
        })
    }

    fn ramp(w: usize, shift: f64) -> SaliencyMap {
        SaliencyMap::from_fn(w, w, |x, _| ((x as f64 - shift) / w as f64) as f32)
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }

    #[test]
    fn gradient_examples() {
        let m = ramp(32, 0.0);
        let g = gradients(&m, &m).unwrap();
        assert!(g.vt.data.iter().all(|&v| v == 0.0));
        for y in 0..32 {
            for x in 1..31 {
                assert!((g.vx.get(x, y) - 1.0 / 32.0).abs() < 1e-6);
                assert_eq!(g.vy.get(x, y), 0.0);
            }
        }
        let flat = SaliencyMap::from_fn(8, 8, |_, _| 0.4);
        let g = gradients(&flat, &flat).unwrap();
        assert!(g.vx.data.iter().chain(&g.vy.data).all(|&v| v == 0.0));
    }

    #[test]
    fn size_mismatch() {
        let a = SaliencyMap::zeros(4, 4);
        let b = SaliencyMap::zeros(4, 5);
        assert_eq!(gradients(&a, &b).unwrap_err(), FlowError::SizeMismatch(4, 4, 4, 5));
        assert!(saliency_iou(&a, &b).is_err());
    }

    #[test]
    fn shifted_blob_recovers_unit_rightward_flow() {
        let (a, b) = (blob(64, 64, 30.0, 32.0, 8.0), blob(64, 64, 31.0, 32.0, 8.0));
        let g = gradients(&a, &b).unwrap();
        let params = LkParams::default();
        for (x, y) in [(24, 28), (30, 32), (36, 36), (27, 38)] {
            let sol = lk_solve(&g, x, y, &params);
            assert!(sol.valid);
            assert!((sol.u_x - 1.0).abs() < 0.1, "u_x {} at {x},{y}", sol.u_x);
            assert!(sol.u_y.abs() < 0.1, "u_y {} at {x},{y}", sol.u_y);
        }
    }

    #[test]
    fn linear_ramp_is_an_aperture_case() {
        // A ramp has gradients in one direction only, so AᵀA is rank one.
        let g = gradients(&ramp(64, 0.0), &ramp(64, 1.0)).unwrap();
        assert!(structure_min_eigen(&g, 32, 32, 21) < 1e-12);
        assert!(!lk_solve(&g, 32, 32, &LkParams::default()).valid);
    }

    #[test]
    fn constant_window_is_invalid() {
        let flat = SaliencyMap::from_fn(32, 32, |_, _| 0.7);
        let g = gradients(&flat, &flat).unwrap();
        assert_eq!(lk_solve(&g, 16, 16, &LkParams::default()), LkSolution::INVALID);
    }

    #[test]
    fn vertical_stripes_moved_vertically_are_ill_conditioned() {
        let stripes = |_shift: usize| {
            SaliencyMap::from_fn(48, 48, |x, _| (0.5 + 0.5 * (x as f64 * 0.6).sin()) as f32)
        };
        // translating along the stripes leaves the map unchanged
        let g = gradients(&stripes(0), &stripes(2)).unwrap();
        let params = LkParams::default();
        let lambda = structure_min_eigen(&g, 24, 24, params.window);
        assert!(lambda < params.min_eigen, "smallest eigenvalue {lambda}");
        assert!(!lk_solve(&g, 24, 24, &params).valid);
    }

    #[test]
    fn integral_and_direct_sums_agree() {
        let (a, b) = (blob(40, 30, 18.0, 14.0, 6.0), blob(40, 30, 19.5, 13.0, 6.0));
        let params = LkParams {
            window: 9,
            min_eigen: 1e-6,
            grid_stride: 1,
        };
        let field = flow_field(&a, &b, &params).unwrap();
        let g = gradients(&a, &b).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                let i = y * 40 + x;
                let direct = lk_solve(&g, x, y, &params);
                assert_eq!(direct.valid, field.valid[i], "at {x},{y}");
                if direct.valid {
                    assert!((direct.u_x - field.u_x[i]).abs() < 1e-6);
                    assert!((direct.u_y - field.u_y[i]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn identical_maps_have_zero_flow() {
        let m = blob(48, 48, 24.0, 24.0, 6.0);
        let field = flow_field(&m, &m, &LkParams::default()).unwrap();
        assert!(field.magnitudes().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn three_four_translation_has_magnitude_five() {
        let (a, b) = (blob(128, 128, 60.0, 60.0, 16.0), blob(128, 128, 63.0, 64.0, 16.0));
        let params = LkParams {
            window: 41,
            ..LkParams::default()
        };
        let field = flow_field(&a, &b, &params).unwrap();
        let mags: Vec<f64> = field.valid_vectors().map(|(x, y)| x.hypot(y)).collect();
        assert!(!mags.is_empty());
        let m = median(mags);
        assert!((m - 5.0).abs() <= 0.75, "median magnitude {m}");
    }

    #[test]
    fn magnitude_formula() {
        let s = LkSolution {
            u_x: 3.0,
            u_y: 4.0,
            valid: true,
        };
        assert_eq!(s.magnitude(), 5.0);
    }

    #[test]
    fn iou_examples() {
        let m = blob(16, 16, 8.0, 8.0, 3.0);
        assert_eq!(saliency_iou(&m, &m).unwrap(), 1.0);
        let left = SaliencyMap::from_fn(8, 8, |x, _| if x < 4 { 1.0 } else { 0.0 });
        let right = SaliencyMap::from_fn(8, 8, |x, _| if x >= 4 { 1.0 } else { 0.0 });
        assert_eq!(saliency_iou(&left, &right).unwrap(), 0.0);
        let half = SaliencyMap::from_fn(8, 8, |_, _| 0.5);
        let full = SaliencyMap::from_fn(8, 8, |_, _| 1.0);
        assert_eq!(saliency_iou(&half, &full).unwrap(), 0.5);
        assert_eq!(saliency_iou(&SaliencyMap::zeros(3, 3), &SaliencyMap::zeros(3, 3)).unwrap(), 1.0);
    }

    #[test]
    fn combiners() {
        assert_eq!(TemporalNorm::IouComplement.combine(5.0, 0.5), 2.5);
        assert_eq!(TemporalNorm::None.combine(5.0, 0.5), 5.0);
        assert!((TemporalNorm::IouDivide.combine(5.0, 0.5) - 5.0 / 0.500001).abs() < 1e-12);
    }

    fn sequence(maps: Vec<SaliencyMap>) -> SaliencySequence {
        let n = maps.len() as u64;
        SaliencySequence {
            video_id: "t".into(),
            maps,
            indices: (0..n).collect(),
            provider: "test".into(),
        }
    }

    #[test]
    fn static_saliency_gives_zero_series() {
        let m = blob(32, 32, 16.0, 16.0, 5.0);
        let s = temporal_score(&sequence(vec![m; 4]), &LkParams::default(), TemporalNorm::IouComplement)
            .unwrap();
        assert_eq!(s.values, vec![0.0; 3]);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn moving_blob_scores_positive() {
        let maps: Vec<_> = (0..4).map(|k| blob(64, 64, 24.0 + 2.0 * k as f64, 32.0, 7.0)).collect();
        let s = temporal_score(&sequence(maps), &LkParams::default(), TemporalNorm::None).unwrap();
        assert!(s.values.iter().all(|&v| v > 1.0 && v < 3.0), "{:?}", s.values);
        assert_eq!(s.label, "saliency-flow/none");
    }

    #[test]
    fn too_few_maps() {
        let s = sequence(vec![SaliencyMap::zeros(4, 4)]);
        assert_eq!(
            temporal_score(&s, &LkParams::default(), TemporalNorm::None).unwrap_err(),
            FlowError::TooFewMaps(1)
        );
    }

    #[test]
    fn param_validation() {
        assert!(LkParams { window: 4, ..LkParams::default() }.validate().is_err());
        assert!(LkParams { window: 1, ..LkParams::default() }.validate().is_err());
        assert!(LkParams { grid_stride: 0, ..LkParams::default() }.validate().is_err());
        assert!(LkParams::default().validate().is_ok());
    }
}
