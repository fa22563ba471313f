use serde::{Deserialize, Serialize};

/// One scalar per consecutive frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub label: String,
    pub values: Vec<f64>,
    /// Original frame numbers of each `(earlier, later)` pair.
    pub pair_indices: Vec<(u64, u64)>,
}

impl ScoreSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>, pair_indices: Vec<(u64, u64)>) -> Self {
        debug_assert_eq!(values.len(), pair_indices.len());
        Self {
            label: label.into(),
            values,
            pair_indices,
        }
    }

    /// Series with synthetic pair indices `(j, j + 1)`; handy when no frames back the values.
    pub fn from_values(label: impl Into<String>, values: Vec<f64>) -> Self {
        let pair_indices = (0..values.len() as u64).map(|j| (j, j + 1)).collect();
        Self::new(label, values, pair_indices)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, label: impl Into<String>, values: Vec<f64>) -> Self {
        Self::new(label, values, self.pair_indices.clone())
    }
}

/// Consecutive `(indices[k], indices[k + 1])` pairs.
pub fn consecutive_pairs(indices: &[u64]) -> Vec<(u64, u64)> {
    indices.windows(2).map(|w| (w[0], w[1])).collect()
}
