use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One real value per point of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        ScalarField(values)
    }

    /// Builds a field and rejects non-finite entries.
    pub fn try_new(values: Vec<f64>) -> Result<Self> {
        if let Some(point) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point });
        }
        Ok(ScalarField(values))
    }

    pub fn zeros(n: usize) -> Self {
        ScalarField(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        ScalarField(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn shifted(&self, b: f64) -> Self {
        self.map(|v| v + b)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        debug_assert_eq!(self.len(), other.len());
        ScalarField(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        debug_assert_eq!(self.len(), other.len());
        ScalarField(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Indices where the field is not exactly zero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] != 0.0).collect()
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(v: Vec<f64>) -> Self {
        ScalarField(v)
    }
}

/// Pointwise discrete gradient magnitude: for each point the largest edge
/// difference quotient `|f(x) - f(y)| / d(x, y)` over its incident edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GradientField(Vec<f64>);

impl GradientField {
    pub(crate) fn new(values: Vec<f64>) -> Self {
        GradientField(values)
    }

    pub fn into_field(self) -> ScalarField {
        ScalarField(self.0)
    }
}

impl Deref for GradientField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}
