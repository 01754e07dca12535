//! Excitation schedule `p_n = min(C n^{-β}, 1)`, finite-support increment laws
//! for the centered (`ξ`) and drifted (`γ`) increments, and the checks that a
//! pair of laws is admissible (bounded jumps, centered `ξ`, positive drift of `γ`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{dot_unchecked, CoordinateSubset, Direction};
use crate::rng::StreamRng;

/// Tolerance on the total mass of an increment law.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSchedule {
    c: f64,
    beta: f64,
}

impl ExcitationSchedule {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::config(format!("C must be a positive real, got {c}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::config(format!(
                "beta must be a positive real, got {beta}"
            )));
        }
        Ok(ExcitationSchedule { c, beta })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `p_n = min(C·n^{-β}, 1)`; `n = 0` is outside the domain.
    pub fn p(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::domain("the excitation probability is defined for n >= 1"));
        }
        Ok(self.p_unchecked(n))
    }

    #[inline]
    pub(crate) fn p_unchecked(&self, n: u64) -> f64 {
        let x = n as f64;
        // sqrt and division are correctly rounded and much cheaper than powf
        let decay = if self.beta == 0.5 {
            1.0 / x.sqrt()
        } else if self.beta == 1.0 {
            1.0 / x
        } else {
            x.powf(-self.beta)
        };
        (self.c * decay).min(1.0)
    }
}

/// One support point of an increment law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub vector: Vec<i64>,
    pub mass: f64,
}

/// Source of increments for the walk engine.
///
/// Implementations consume exactly the one uniform they are handed per call,
/// which keeps traces reproducible regardless of the law. Laws that depend on
/// the past (adapted martingale differences) can keep state in `self`.
pub trait IncrementGenerator {
    fn dim(&self) -> usize;

    /// Upper bound on the Euclidean norm of every increment produced.
    fn jump_bound(&self) -> f64;

    /// Writes the increment for step `step` into `out`.
    fn generate(&mut self, step: u64, u: f64, out: &mut [i64]);
}

/// A finite-support law on `Z^d`, sampled by inverse CDF in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementDistribution {
    dim: usize,
    atoms: Vec<Atom>,
    jump_bound: f64,
    #[serde(skip)]
    flat: Vec<i64>,
    /// `thresholds[i]` is the cumulative mass of atoms `0..=i`, replaced by
    /// `+inf` from the last positive-mass atom on.
    #[serde(skip)]
    thresholds: Vec<f64>,
}

impl IncrementDistribution {
    /// Builds a law from `(vector, mass)` atoms.
    ///
    /// `jump_bound` defaults to the largest Euclidean norm in the support; an
    /// explicit bound smaller than that is rejected.
    pub fn new(atoms: Vec<Atom>, jump_bound: Option<f64>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::config("increment law needs at least one atom"))?;
        let dim = first.vector.len();
        if dim < 2 {
            return Err(Error::config(format!(
                "lattice dimension must be at least 2, got {dim}"
            )));
        }
        let mut total = 0.0;
        let mut max_norm: f64 = 0.0;
        for atom in &atoms {
            Error::check_dim(dim, atom.vector.len())?;
            if !(atom.mass.is_finite() && atom.mass >= 0.0) {
                return Err(Error::config(format!(
                    "atom masses must be nonnegative, got {}",
                    atom.mass
                )));
            }
            total += atom.mass;
            max_norm = max_norm.max(euclidean_norm(&atom.vector));
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::config(format!(
                "atom masses must sum to 1, got {total}"
            )));
        }
        let jump_bound = match jump_bound {
            Some(k) if !(k.is_finite() && k >= max_norm) => {
                return Err(Error::config(format!(
                    "jump bound {k} is smaller than the largest support norm {max_norm}"
                )));
            }
            Some(k) => k,
            None => max_norm,
        };

        let flat = atoms.iter().flat_map(|a| a.vector.iter().copied()).collect();
        let last_positive = atoms
            .iter()
            .rposition(|a| a.mass > 0.0)
            .ok_or_else(|| Error::config("increment law has no positive mass"))?;
        let mut cum = 0.0;
        let thresholds = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                cum += a.mass;
                if i >= last_positive {
                    f64::INFINITY
                } else {
                    cum
                }
            })
            .collect();

        Ok(IncrementDistribution {
            dim,
            atoms,
            jump_bound,
            flat,
            thresholds,
        })
    }

    /// A point mass at `vector`.
    pub fn single_atom(vector: Vec<i64>) -> Result<Self> {
        Self::new(vec![Atom { vector, mass: 1.0 }], None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn jump_bound(&self) -> f64 {
        self.jump_bound
    }

    /// Largest absolute coordinate over the support.
    pub fn max_abs_component(&self) -> i64 {
        self.flat.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Inverse-CDF index for the uniform `u ∈ [0, 1)`.
    #[inline]
    pub fn index_for(&self, u: f64) -> usize {
        self.thresholds.iter().filter(|&&t| t <= u).count()
    }

    /// Cumulative mass through atom `index` (`+∞` from the last positive atom on).
    pub fn threshold(&self, index: usize) -> f64 {
        self.thresholds[index]
    }

    #[inline]
    pub fn vector(&self, index: usize) -> &[i64] {
        &self.flat[index * self.dim..(index + 1) * self.dim]
    }

    /// Draws one increment, consuming exactly one uniform from `rng`.
    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> &[i64] {
        self.vector(self.index_for(rng.uniform()))
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for atom in &self.atoms {
            for (m, &v) in mean.iter_mut().zip(&atom.vector) {
                *m += atom.mass * v as f64;
            }
        }
        mean
    }

    /// `E[v·ℓ]`.
    pub fn mean_along(&self, ell: &Direction) -> Result<f64> {
        Error::check_dim(self.dim, ell.dim())?;
        Ok(self
            .atoms
            .iter()
            .map(|a| a.mass * dot_unchecked(ell.components(), &a.vector))
            .sum())
    }

    /// Second-moment matrix `E[v vᵀ]`, row-major.
    pub fn second_moment(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for atom in &self.atoms {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    m[i][j] += atom.mass * (atom.vector[i] * atom.vector[j]) as f64;
                }
            }
        }
        m
    }

    /// The law of `P_{D^c}(v)`: coordinates in `subset` are zeroed, atoms kept in order.
    pub fn project_complement(&self, subset: &CoordinateSubset) -> Result<Self> {
        Error::check_dim(self.dim, subset.dim())?;
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let mut vector = a.vector.clone();
                crate::lattice::project_complement_in_place(&mut vector, subset);
                Atom {
                    vector,
                    mass: a.mass,
                }
            })
            .collect();
        Self::new(atoms, Some(self.jump_bound))
    }

    /// True when both laws put the same mass on every lattice vector.
    pub fn same_law(&self, other: &Self) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let collect = |d: &Self| {
            let mut m: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
            for a in &d.atoms {
                if a.mass > 0.0 {
                    *m.entry(a.vector.clone()).or_default() += a.mass;
                }
            }
            m
        };
        let (a, b) = (collect(self), collect(other));
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|((va, ma), (vb, mb))| va == vb && (ma - mb).abs() <= MASS_TOLERANCE)
    }
}

impl IncrementGenerator for &IncrementDistribution {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jump_bound(&self) -> f64 {
        self.jump_bound
    }

    #[inline]
    fn generate(&mut self, _step: u64, u: f64, out: &mut [i64]) {
        out.copy_from_slice(self.vector(self.index_for(u)));
    }
}

impl<'de> Deserialize<'de> for IncrementDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            atoms: Vec<Atom>,
            jump_bound: Option<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        IncrementDistribution::new(raw.atoms, raw.jump_bound).map_err(serde::de::Error::custom)
    }
}

fn euclidean_norm(v: &[i64]) -> f64 {
    v.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
}

fn signed_axes(d: usize) -> impl Iterator<Item = (usize, i64)> {
    (0..d).flat_map(|j| [(j, 1i64), (j, -1i64)])
}

fn unit(d: usize, axis: usize, sign: i64) -> Vec<i64> {
    let mut v = vec![0; d];
    v[axis] = sign;
    v
}

/// Simple random walk law: mass `1/(2d)` on each of `±e_1, …, ±e_d`.
pub fn make_example_xi(d: usize) -> Result<IncrementDistribution> {
    if d < 2 {
        return Err(Error::config(format!("dimension must be at least 2, got {d}")));
    }
    let mass = 1.0 / (2 * d) as f64;
    let atoms = signed_axes(d)
        .map(|(j, s)| Atom {
            vector: unit(d, j, s),
            mass,
        })
        .collect();
    IncrementDistribution::new(atoms, None)
}

/// Drifted law along `e_1`: `δ/d` on `e_1`, `(1−δ)/d` on `−e_1`, `1/(2d)` on `±e_j`, `j ≥ 2`.
pub fn make_example_gamma(d: usize, delta: f64) -> Result<IncrementDistribution> {
    if d < 2 {
        return Err(Error::config(format!("dimension must be at least 2, got {d}")));
    }
    if !(delta > 0.5 && delta <= 1.0) {
        return Err(Error::config(format!(
            "delta must lie in (1/2, 1], got {delta}"
        )));
    }
    let df = d as f64;
    let atoms = signed_axes(d)
        .map(|(j, s)| {
            let mass = match (j, s) {
                (0, 1) => delta / df,
                (0, _) => (1.0 - delta) / df,
                _ => 1.0 / (2.0 * df),
            };
            Atom {
                vector: unit(d, j, s),
                mass,
            }
        })
        .collect();
    IncrementDistribution::new(atoms, None)
}

/// Outcome of checking a `(ξ, γ, ℓ)` triple against the bounded-jump and drift conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub mean_xi: Vec<f64>,
    /// `λ = E[γ·ℓ]`.
    pub drift_lambda: f64,
    /// Common bound `K` on the norm of both laws' increments.
    pub jump_bound: f64,
    pub bounded_jumps: bool,
    pub xi_centered: bool,
    pub positive_drift: bool,
    pub satisfied: bool,
}

impl ConditionReport {
    /// Human-readable reasons for failure, empty when satisfied.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.bounded_jumps {
            v.push(format!("increments exceed the jump bound {}", self.jump_bound));
        }
        if !self.xi_centered {
            v.push(format!("xi is not centered: mean {:?}", self.mean_xi));
        }
        if !self.positive_drift {
            v.push(format!(
                "gamma has no positive drift along the direction: lambda = {}",
                self.drift_lambda
            ));
        }
        v
    }
}

/// Checks `ξ` is centered, `γ` drifts along `ℓ` (`λ > 0`) and both laws share a jump bound.
///
/// A failing report is a normal return value; the engine refuses to run on it.
pub fn validate_conditions(
    xi: &IncrementDistribution,
    gamma: &IncrementDistribution,
    ell: &Direction,
) -> Result<ConditionReport> {
    Error::check_dim(xi.dim(), gamma.dim())?;
    Error::check_dim(xi.dim(), ell.dim())?;
    let mean_xi = xi.mean();
    let drift_lambda = gamma.mean_along(ell)?;
    let jump_bound = xi.jump_bound().max(gamma.jump_bound());
    let bounded_jumps = xi
        .atoms()
        .iter()
        .chain(gamma.atoms())
        .all(|a| euclidean_norm(&a.vector) <= jump_bound);
    let xi_centered = mean_xi.iter().all(|m| m.abs() <= MASS_TOLERANCE);
    let positive_drift = drift_lambda > MASS_TOLERANCE;
    Ok(ConditionReport {
        mean_xi,
        drift_lambda,
        jump_bound,
        bounded_jumps,
        xi_centered,
        positive_drift,
        satisfied: bounded_jumps && xi_centered && positive_drift,
    })
}
