//! Pointwise fusion of score series and the smoothing filter applied to the result.
//!
//! Operators:
//!
//! | operator      | value at pair `t`                                                 |
//! |---------------|-------------------------------------------------------------------|
//! | `linear`      | `Σ w_i S_i`                                                       |
//! | `min` / `max` | `min_i S_i` / `max_i S_i`                                         |
//! | `exponential` | `Σ (1 - w_t) S_i`, `w_t = d e^(1-d)`, `d = max_i S_i - min_i S_i` |
//! | `logarithmic` | `min_i (S_i - w_i) + max_i w_i`, `w_i = ln(1 / var_i)`            |
//! | `complex`     | `sqrt(S_1² + S_2²)`                                               |
//! | `harmonic`    | `2 Π S_i / Σ S_i` (0 where the sum is 0)                          |
//! | `variance`    | `Σ S_i / var_i`                                                   |
//!
//! `var_i` is the population variance of series `i`, floored at `epsilon`.

use serde::{Deserialize, Serialize};

use crate::error::FusionError;
use crate::score::ScoreSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionOperator {
    Linear,
    Min,
    Max,
    Exponential,
    Logarithmic,
    Complex,
    Harmonic,
    #[default]
    Variance,
}

impl FusionOperator {
    pub const ALL: [FusionOperator; 8] = [
        FusionOperator::Linear,
        FusionOperator::Min,
        FusionOperator::Max,
        FusionOperator::Exponential,
        FusionOperator::Logarithmic,
        FusionOperator::Complex,
        FusionOperator::Harmonic,
        FusionOperator::Variance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionOperator::Linear => "linear",
            FusionOperator::Min => "min",
            FusionOperator::Max => "max",
            FusionOperator::Exponential => "exponential",
            FusionOperator::Logarithmic => "logarithmic",
            FusionOperator::Complex => "complex",
            FusionOperator::Harmonic => "harmonic",
            FusionOperator::Variance => "variance",
        }
    }
}

impl std::str::FromStr for FusionOperator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FusionOperator::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| format!("unknown fusion operator `{s}`"))
    }
}

/// Whether smoothing is applied to the fused signal or to each input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothStage {
    #[default]
    AfterFusion,
    BeforeFusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSpec {
    pub operator: FusionOperator,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub epsilon: f64,
    pub normalize_inputs: bool,
    pub smooth_window: usize,
    pub smooth_stage: SmoothStage,
}

impl Default for FusionSpec {
    fn default() -> Self {
        Self {
            operator: FusionOperator::Variance,
            weights: None,
            epsilon: 1e-8,
            normalize_inputs: true,
            smooth_window: 5,
            smooth_stage: SmoothStage::AfterFusion,
        }
    }
}

impl FusionSpec {
    pub fn with_operator(operator: FusionOperator) -> Self {
        Self {
            operator,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return Err(FusionError::EvenWindow(self.smooth_window));
        }
        if !(self.epsilon > 0.0) {
            return Err(FusionError::BadEpsilon(self.epsilon));
        }
        Ok(())
    }
}

/// Fused and smoothed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalScore {
    pub values: ScoreSeries,
    /// Fused values before smoothing.
    pub unsmoothed: Vec<f64>,
    pub components: Vec<String>,
    pub spec: FusionSpec,
}

/// Min-max scale to `[0, 1]`; a constant series maps to zeros.
pub fn normalize_series(s: &ScoreSeries) -> ScoreSeries {
    let (lo, hi) = min_max(&s.values);
    let range = hi - lo;
    let values = if range > 0.0 {
        s.values.iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; s.len()]
    };
    s.with_values(s.label.clone(), values)
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Centered moving average; the window is truncated at the series ends.
pub fn smooth(s: &ScoreSeries, window: usize) -> Result<ScoreSeries, FusionError> {
    Ok(s.with_values(s.label.clone(), smooth_values(&s.values, window)?))
}

pub fn smooth_values(values: &[f64], window: usize) -> Result<Vec<f64>, FusionError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(FusionError::EvenWindow(window));
    }
    let half = window / 2;
    let n = values.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

/// Apply the fusion operator without smoothing or input normalization.
pub fn fuse_raw(inputs: &[&[f64]], spec: &FusionSpec) -> Result<Vec<f64>, FusionError> {
    let first = inputs.first().ok_or(FusionError::NoSeries)?;
    let len = first.len();
    if let Some(bad) = inputs.iter().find(|s| s.len() != len) {
        return Err(FusionError::LengthMismatch(len, bad.len()));
    }
    let guarded_var = |s: &[f64]| population_variance(s).max(spec.epsilon);
    let column = |t: usize| inputs.iter().map(move |s| s[t]);

    let fused = match spec.operator {
        FusionOperator::Linear => {
            let weights = spec
                .weights
                .as_ref()
                .filter(|w| w.len() == inputs.len())
                .ok_or(FusionError::MissingWeights(inputs.len()))?;
            (0..len)
                .map(|t| column(t).zip(weights).map(|(v, w)| v * w).sum())
                .collect()
        }
        FusionOperator::Min => (0..len).map(|t| column(t).fold(f64::INFINITY, f64::min)).collect(),
        FusionOperator::Max => (0..len)
            .map(|t| column(t).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        FusionOperator::Exponential => (0..len)
            .map(|t| {
                let (lo, hi) = column(t).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
                let d = hi - lo;
                let w = d * (1.0 - d).exp();
                column(t).map(|v| (1.0 - w) * v).sum()
            })
            .collect(),
        FusionOperator::Logarithmic => {
            let weights: Vec<f64> = inputs.iter().map(|s| (1.0 / guarded_var(s)).ln()).collect();
            let max_w = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (0..len)
                .map(|t| {
                    column(t)
                        .zip(&weights)
                        .map(|(v, w)| v - w)
                        .fold(f64::INFINITY, f64::min)
                        + max_w
                })
                .collect()
        }
        FusionOperator::Complex => {
            if inputs.len() != 2 {
                return Err(FusionError::WrongArity {
                    operator: "complex",
                    expected: 2,
                    found: inputs.len(),
                });
            }
            (0..len).map(|t| inputs[0][t].hypot(inputs[1][t])).collect()
        }
        FusionOperator::Harmonic => (0..len)
            .map(|t| {
                let sum: f64 = column(t).sum();
                if sum == 0.0 {
                    0.0
                } else {
                    2.0 * column(t).product::<f64>() / sum
                }
            })
            .collect(),
        FusionOperator::Variance => {
            let scales: Vec<f64> = inputs.iter().map(|s| 1.0 / guarded_var(s)).collect();
            (0..len)
                .map(|t| column(t).zip(&scales).map(|(v, k)| v * k).sum())
                .collect()
        }
    };
    Ok(fused)
}

/// Normalize (optionally), fuse and smooth.
pub fn fuse(series: &[ScoreSeries], spec: &FusionSpec) -> Result<FinalScore, FusionError> {
    spec.validate()?;
    let first = series.first().ok_or(FusionError::NoSeries)?;
    let mut inputs: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            if spec.normalize_inputs {
                normalize_series(s).values
            } else {
                s.values.clone()
            }
        })
        .collect();
    if let Some(bad) = inputs.iter().find(|s| s.len() != first.len()) {
        return Err(FusionError::LengthMismatch(first.len(), bad.len()));
    }
    if spec.smooth_stage == SmoothStage::BeforeFusion {
        for values in &mut inputs {
            *values = smooth_values(values, spec.smooth_window)?;
        }
    }
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let unsmoothed = fuse_raw(&refs, spec)?;
    let values = match spec.smooth_stage {
        SmoothStage::AfterFusion => smooth_values(&unsmoothed, spec.smooth_window)?,
        SmoothStage::BeforeFusion => unsmoothed.clone(),
    };
    Ok(FinalScore {
        values: first.with_values(format!("fused/{}", spec.operator.name()), values),
        unsmoothed,
        components: series.iter().map(|s| s.label.clone()).collect(),
        spec: spec.clone(),
    })
}
