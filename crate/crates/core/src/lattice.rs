//! Integer-lattice geometry: sites, drift directions and coordinate subsets.
//!
//! Axis indices are zero-based throughout the library (`0` is `e_1`).
//! Configuration files use one-based axis numbers and convert at the edge.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest Euclidean norm accepted when normalizing a direction.
pub const MIN_DIRECTION_NORM: f64 = 1e-9;

/// A point of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeSite(Vec<i64>);

impl LatticeSite {
    pub fn origin(dim: usize) -> Self {
        LatticeSite(vec![0; dim])
    }

    pub fn new(coords: Vec<i64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::config(format!(
                "lattice dimension must be at least 2, got {}",
                coords.len()
            )));
        }
        Ok(LatticeSite(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl From<&[i64]> for LatticeSite {
    fn from(coords: &[i64]) -> Self {
        LatticeSite(coords.to_vec())
    }
}

impl fmt::Display for LatticeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A unit vector of `R^d`, normalized at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Direction {
    components: Vec<f64>,
}

impl Direction {
    /// Normalizes `components`; rejects vectors with norm below [`MIN_DIRECTION_NORM`].
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("direction components must be finite"));
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < MIN_DIRECTION_NORM {
            return Err(Error::config(format!(
                "direction norm {norm:e} is too small to normalize"
            )));
        }
        Ok(Direction {
            components: components.into_iter().map(|c| c / norm).collect(),
        })
    }

    /// The canonical unit vector `e_{axis+1}` of `R^dim`.
    pub fn axis(dim: usize, axis: usize) -> Result<Self> {
        if axis >= dim {
            return Err(Error::config(format!(
                "axis {axis} out of range for dimension {dim}"
            )));
        }
        let mut components = vec![0.0; dim];
        components[axis] = 1.0;
        Ok(Direction { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Indices of the axes with a nonzero component.
    pub fn support(&self) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > 1e-12)
            .map(|(i, _)| i)
            .collect()
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        Direction::new(raw).map_err(serde::de::Error::custom)
    }
}

/// A set of canonical axes `D ⊂ {e_1, …, e_d}`, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinateSubset {
    dim: usize,
    indices: Vec<usize>,
}

impl CoordinateSubset {
    pub fn new(dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::config("coordinate subset must not be empty"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("coordinate subset has repeated axes"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::config(format!(
                "axis {bad} out of range for dimension {dim}"
            )));
        }
        Ok(CoordinateSubset { dim, indices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Cardinality `k = |D|`.
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.indices.binary_search(&axis).is_ok()
    }

    /// Axes outside the subset.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.dim).filter(|&i| !self.contains(i)).collect()
    }

    /// The cone experiment needs `d ≥ 4` and `1 ≤ k ≤ d − 3`.
    pub fn check_cone_regime(&self) -> Result<()> {
        if self.dim < 4 || self.k() + 3 > self.dim {
            return Err(Error::config(format!(
                "cone experiments need d >= 4 and 1 <= k <= d - 3 (d = {}, k = {})",
                self.dim,
                self.k()
            )));
        }
        Ok(())
    }

    /// True when every nonzero component of `ell` lies on an axis of the subset.
    pub fn spans(&self, ell: &Direction) -> bool {
        ell.dim() == self.dim && ell.support().iter().all(|&i| self.contains(i))
    }
}

/// Zeroes the coordinates of `delta` that lie in `subset`.
pub fn project_complement(delta: &[i64], subset: &CoordinateSubset) -> Result<Vec<i64>> {
    Error::check_dim(subset.dim(), delta.len())?;
    let mut out = delta.to_vec();
    project_complement_in_place(&mut out, subset);
    Ok(out)
}

#[inline]
pub(crate) fn project_complement_in_place(delta: &mut [i64], subset: &CoordinateSubset) {
    for &i in subset.indices() {
        delta[i] = 0;
    }
}

pub fn dot(direction: &Direction, delta: &[i64]) -> Result<f64> {
    Error::check_dim(direction.dim(), delta.len())?;
    Ok(dot_unchecked(direction.components(), delta))
}

#[inline]
pub(crate) fn dot_unchecked(components: &[f64], delta: &[i64]) -> f64 {
    components
        .iter()
        .zip(delta)
        .map(|(c, &v)| c * v as f64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subset(d: usize, idx: &[usize]) -> CoordinateSubset {
        CoordinateSubset::new(d, idx.to_vec()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let d1 = subset(4, &[0]);
        assert_eq!(project_complement(&[1, 0, 0, 0], &d1).unwrap(), vec![0; 4]);
        assert_eq!(
            project_complement(&[0, 0, 1, 0], &d1).unwrap(),
            vec![0, 0, 1, 0]
        );
        let d12 = subset(4, &[0, 1]);
        assert_eq!(project_complement(&[1, 1, 0, 0], &d12).unwrap(), vec![0; 4]);
    }

    #[test]
    fn projection_dimension_mismatch() {
        let d1 = subset(4, &[0]);
        assert!(matches!(
            project_complement(&[1, 0, 0], &d1),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn dot_examples() {
        let e1 = Direction::axis(2, 0).unwrap();
        assert_eq!(dot(&e1, &[3, -1]).unwrap(), 3.0);
        assert_eq!(dot(&e1, &[0, 5]).unwrap(), 0.0);
        let diag = Direction::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((dot(&diag, &[1, 1, 0, 0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(dot(&e1, &[1, 2, 3]).is_err());
    }

    #[test]
    fn direction_rejects_near_zero() {
        assert!(Direction::new(vec![1e-10, 0.0]).is_err());
        assert!(Direction::new(vec![0.0, f64::NAN]).is_err());
        let d = Direction::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(d.components(), &[0.6, 0.8]);
    }

    #[test]
    fn subset_validation() {
        assert!(CoordinateSubset::new(4, vec![]).is_err());
        assert!(CoordinateSubset::new(4, vec![1, 1]).is_err());
        assert!(CoordinateSubset::new(4, vec![4]).is_err());
        let s = subset(5, &[2, 0]);
        assert_eq!(s.indices(), &[0, 2]);
        assert_eq!(s.complement(), vec![1, 3, 4]);
        assert!(s.check_cone_regime().is_ok());
        assert!(subset(4, &[0, 1]).check_cone_regime().is_err());
        assert!(subset(3, &[0]).check_cone_regime().is_err());
        let ell = Direction::new(vec![1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(s.spans(&ell));
        assert!(!subset(5, &[0]).spans(&ell));
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(v in prop::collection::vec(-1000i64..1000, 6), mask in 1u8..63) {
            let idx: Vec<usize> = (0..6).filter(|i| mask & (1 << i) != 0).collect();
            let s = CoordinateSubset::new(6, idx).unwrap();
            let once = project_complement(&v, &s).unwrap();
            let twice = project_complement(&once, &s).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn dot_is_additive(
            a in prop::collection::vec(-1_000_000i64..=1_000_000, 4),
            b in prop::collection::vec(-1_000_000i64..=1_000_000, 4),
            raw in prop::collection::vec(-1.0f64..1.0, 4),
        ) {
            prop_assume!(raw.iter().map(|c| c * c).sum::<f64>() > 1e-6);
            let ell = Direction::new(raw).unwrap();
            let sum: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let lhs = dot(&ell, &sum).unwrap();
            let rhs = dot(&ell, &a).unwrap() + dot(&ell, &b).unwrap();
            let scale: f64 = ell.components().iter().zip(a.iter().zip(&b))
                .map(|(c, (x, y))| c.abs() * (x.abs() + y.abs()) as f64)
                .sum::<f64>()
                .max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }
}
