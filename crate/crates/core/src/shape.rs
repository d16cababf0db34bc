use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Ordered positive shape parameters `r_1, …, r_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ShapeVector(Vec<f64>);

impl ShapeVector {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::domain("shape vector must have at least one entry"));
        }
        if let Some(bad) = r.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("shape parameters must be positive, got {bad}")));
        }
        Ok(ShapeVector(r))
    }

    /// `n` copies of the same shape.
    pub fn repeated(r: f64, n: usize) -> Result<Self> {
        Self::new(vec![r; n])
    }

    /// Shapes `a_j + 1` for Meijer lower parameters `a_j > -1`.
    pub fn from_meijer(a: &[f64]) -> Result<Self> {
        Self::new(a.iter().map(|v| v + 1.0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn product(&self) -> f64 {
        self.0.iter().product()
    }

    /// Meijer lower parameters `r_j - 1`.
    pub fn meijer_parameters(&self) -> Vec<f64> {
        self.0.iter().map(|r| r - 1.0).collect()
    }

    /// Every shape shifted by `delta` (size biasing a product of gammas adds one).
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|r| r + delta).collect())
    }

    /// True when all entries are equal.
    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|r| *r == self.0[0])
    }

    /// Smallest pairwise gap between entries (infinite for `n = 1`).
    pub fn min_separation(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (i, a) in self.0.iter().enumerate() {
            for b in &self.0[i + 1..] {
                gap = gap.min((a - b).abs());
            }
        }
        gap
    }
}

impl TryFrom<Vec<f64>> for ShapeVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ShapeVector> for Vec<f64> {
    fn from(s: ShapeVector) -> Self {
        s.0
    }
}

impl fmt::Display for ShapeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}
