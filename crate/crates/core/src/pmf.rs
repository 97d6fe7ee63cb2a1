//! Probability mass functions over finite alphabets and the divergences
//! between them. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p = 1` for a constructed [`Pmf`].
pub const PMF_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    /// Builds a pmf, rejecting negative or non-finite entries and sums off by
    /// more than [`PMF_TOLERANCE`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::check(&values, PMF_TOLERANCE)?;
        Ok(Pmf(values))
    }

    /// Accepts sums within `tol` of one and rescales so the result sums to one.
    pub fn normalized(mut values: Vec<f64>, tol: f64) -> Result<Self> {
        let sum = Self::check(&values, tol)?;
        values.iter_mut().for_each(|v| *v /= sum);
        Ok(Pmf(values))
    }

    fn check(values: &[f64], tol: f64) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::InvalidPmf("empty alphabet".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidPmf(format!("entry {v} is not a probability")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidPmf(format!("entries sum to {sum}")));
        }
        Ok(sum)
    }

    /// Wraps values produced by an exact computation on valid pmfs.
    pub(crate) fn from_computed(values: Vec<f64>) -> Self {
        debug_assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Pmf(values)
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        let mut v = vec![0.0; size];
        v[at] = 1.0;
        Pmf(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when `self ≪ other`: every symbol with positive mass here has
    /// positive mass in `other`.
    pub fn abs_continuous_wrt(&self, other: &Pmf) -> bool {
        self.0.iter().zip(&other.0).all(|(&p, &q)| p == 0.0 || q > 0.0)
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0,1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the last cumulative value
        self.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

impl std::ops::Index<usize> for Pmf {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A real-valued function over an output alphabet. Holds the
/// inclusion-exclusion terms `G_T`, the perturbation directions `ζ`, `ζ_n`
/// and the per-symbol deviations `Ψ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignedFunction(pub Vec<f64>);

impl SignedFunction {
    pub fn zeros(len: usize) -> Self {
        SignedFunction(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergences {
    /// `D(P‖Q)` in nats; `+∞` when `P ≪ Q` fails.
    pub kl: f64,
    /// `½ Σ |P − Q|`.
    pub tv: f64,
}

impl Divergences {
    pub fn kl_is_finite(&self) -> bool {
        self.kl.is_finite()
    }
}

pub fn divergences(p: &Pmf, q: &Pmf) -> Result<Divergences> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    Ok(Divergences {
        kl: kl_slices(p.values(), q.values()),
        tv: 0.5 * p.values().iter().zip(q.values()).map(|(a, b)| (a - b).abs()).sum::<f64>(),
    })
}

/// `D(P‖Q)` with `0·log(0/q) = 0` and `p·log(p/0) = +∞`.
pub fn kl(p: &Pmf, q: &Pmf) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    Ok(kl_slices(p.values(), q.values()))
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return f64::INFINITY;
        }
        acc += a * (a / b).ln();
    }
    acc
}
