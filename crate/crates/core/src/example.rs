use std::ops::Deref;

use crate::error::{Error, Result};

/// A fixed-length feature vector with finite entries: one frame, the unit of detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Example(Vec<f64>);

impl Example {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("example entry {i}")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Example {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Example {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Common dimension of a nonempty set of examples.
pub fn common_dim(data: &[Example]) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty data set".into()))?;
    let dim = first.dim();
    for e in data {
        crate::error::check_dim("data set", dim, e.dim())?;
    }
    Ok(dim)
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Example::new(vec![1.0, f64::NAN]).is_err());
        assert!(Example::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Example::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn common_dim_checks() {
        let a = Example::new(vec![1.0, 2.0]).unwrap();
        let b = Example::new(vec![1.0]).unwrap();
        assert_eq!(common_dim(&[a.clone(), a.clone()]).unwrap(), 2);
        assert!(common_dim(&[a, b]).is_err());
        assert!(common_dim(&[]).is_err());
    }
}
