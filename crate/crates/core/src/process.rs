//! The i.i.d. covert process: weight schedules `α_n`, the quadratic
//! sandwich on `D(Q_α‖Q_∅)`, the first-order mutual-information expansion,
//! and Bernstein's tail bound.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelPair, Side};
use crate::error::{Error, Result};
use crate::info::{covert_output, mutual_information, zeta_chi, RhoVector};
use crate::pmf::kl;

/// `α_n = a · n^{−e}` with `e ∈ (1/2, 1)`, so that `n α_n → ∞` while
/// `n α_n² → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub coefficient: f64,
    pub exponent: f64,
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule { coefficient: 1.0, exponent: 2.0 / 3.0 }
    }
}

impl AlphaSchedule {
    pub fn new(coefficient: f64, exponent: f64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(Error::InvalidParameter(format!("schedule coefficient {coefficient} must be positive")));
        }
        if !(exponent > 0.5 && exponent < 1.0) {
            return Err(Error::InvalidParameter(format!("schedule exponent {exponent} must lie in (1/2, 1)")));
        }
        Ok(AlphaSchedule { coefficient, exponent })
    }

    pub fn alpha_at(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("blocklength must be positive".into()));
        }
        let alpha = self.coefficient * (n as f64).powf(-self.exponent);
        if alpha > 1.0 {
            return Err(Error::AlphaTooLarge(alpha));
        }
        Ok(alpha)
    }

    /// Smallest blocklength where `α_n ≤ 1`.
    pub fn first_valid_n(&self) -> u64 {
        let n = self.coefficient.powf(1.0 / self.exponent).ceil().max(1.0) as u64;
        (n.saturating_sub(1).max(1)..).find(|&m| self.alpha_at(m).is_ok()).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub lower: f64,
    pub kl: f64,
    pub upper: f64,
    pub chi_n: f64,
    /// `kl / (α² χ_n / 2)`.
    pub ratio: f64,
    pub holds: bool,
}

/// `D(Q_α‖Q_∅) = Σ Q_∅ [(1+x) ln(1+x) − x]` with `x = α ζ_n / Q_∅`.
///
/// The `−x` terms sum to zero; keeping them makes every summand nonnegative
/// and avoids cancellation at small `α`.
fn kl_from_perturbation(q0: &[f64], zeta_n: &[f64], alpha: f64) -> f64 {
    q0.iter()
        .zip(zeta_n)
        .filter(|(&q, _)| q > 0.0)
        .map(|(&q, &z)| {
            let x = alpha * z / q;
            if x <= -1.0 {
                q * (-x)
            } else {
                q * ((1.0 + x) * x.ln_1p() - x)
            }
        })
        .sum()
}

/// Evaluates `(α²/2)(1 − √α) χ_n ≤ D(Q_α‖Q_∅) ≤ (α²/2)(1 + √α) χ_n`.
pub fn kl_sandwich(channel: &ChannelPair, rho: &RhoVector, alpha: f64) -> Result<SandwichReport> {
    rho.check_users(channel)?;
    if alpha == 0.0 {
        return Ok(SandwichReport { lower: 0.0, kl: 0.0, upper: 0.0, chi_n: f64::NAN, ratio: f64::NAN, holds: true });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in [0,1)")));
    }
    let zc = zeta_chi(channel, rho, Some(alpha))?;
    if zc.degenerate || zc.chi == 0.0 {
        return Err(Error::Degenerate);
    }
    let q0 = channel.innocent(Side::Warden).values();
    let kl = kl_from_perturbation(q0, zc.zeta.values(), alpha);
    let scale = alpha * alpha / 2.0 * zc.chi;
    let root = alpha.sqrt();
    let lower = scale * (1.0 - root);
    let upper = scale * (1.0 + root);
    Ok(SandwichReport { lower, kl, upper, chi_n: zc.chi, ratio: kl / scale, holds: lower <= kl && kl <= upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiExpansion {
    pub mi: f64,
    pub linear_term: f64,
    pub residual: f64,
}

/// `I(X[T]; out)` against its first-order term `Σ_{k∈T} ρ_k α D(row_k‖row_∅)`.
pub fn mi_expansion_residual(channel: &ChannelPair, side: Side, t: usize, rho: &RhoVector, alpha: f64) -> Result<MiExpansion> {
    if !(0.0..=0.25).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in [0, 0.25]")));
    }
    let mi = mutual_information(channel, side, t, rho, alpha)?;
    let mut linear_term = 0.0;
    for k in 1..=channel.users() {
        if t & (1 << (k - 1)) != 0 && rho[k - 1] > 0.0 {
            linear_term += rho[k - 1] * alpha * kl(channel.single(side, k), channel.innocent(side))?;
        }
    }
    Ok(MiExpansion { mi, linear_term, residual: mi - linear_term })
}

/// Bernstein's inequality for a sum of independent zero-mean variables
/// bounded by `c`: `P(Σ U_i > t) ≤ exp(−(t²/2) / (Σ E[U_i²] + c t / 3))`.
pub fn bernstein_bound(variance_sum: f64, c: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter("Bernstein bound needs t > 0 and c > 0".into()));
    }
    if !(variance_sum >= 0.0) {
        return Err(Error::InvalidParameter("variance sum must be nonnegative".into()));
    }
    Ok((-(t * t / 2.0) / (variance_sum + c * t / 3.0)).exp().clamp(0.0, 1.0))
}

/// Exact `D(Q_α‖Q_∅)` by plain summation over the direct mixture. Slower to
/// converge numerically than the sandwich path; used as a cross-check.
pub fn covert_kl_direct(channel: &ChannelPair, rho: &RhoVector, alpha: f64) -> Result<f64> {
    let out = covert_output(channel, Side::Warden, rho, alpha)?;
    kl(&out.direct, channel.innocent(Side::Warden))
}
