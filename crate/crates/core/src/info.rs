//! Information quantities of the covert input distribution, where user `k`
//! independently sends 1 with probability `ρ_k α`.
//!
//! Everything here is exact enumeration over the `2^K` input vectors and the
//! output alphabet; nothing is sampled.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelPair, Side};
use crate::error::{Error, Result};
use crate::pmf::{kl_slices, Pmf, SignedFunction};

pub const RHO_TOLERANCE: f64 = 1e-12;

/// Simplex weights splitting the transmission budget across users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RhoVector(Vec<f64>);

impl RhoVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("rho needs at least one weight".into()));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParameter(format!("rho {weights:?} has entries outside [0,1]")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > RHO_TOLERANCE {
            return Err(Error::InvalidParameter(format!("rho sums to {sum}")));
        }
        Ok(RhoVector(weights))
    }

    pub fn uniform(users: usize) -> Self {
        RhoVector(vec![1.0 / users as f64; users])
    }

    /// Two-user weights `(ρ₁, 1 − ρ₁)`.
    pub fn pair(rho1: f64) -> Result<Self> {
        Self::new(vec![rho1, 1.0 - rho1])
    }

    pub fn users(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    /// Per-user probabilities of sending 1: `ρ_k α`.
    pub fn activity(&self, alpha: f64) -> Vec<f64> {
        self.0.iter().map(|r| r * alpha).collect()
    }

    pub(crate) fn check_users(&self, channel: &ChannelPair) -> Result<()> {
        if self.users() != channel.users() {
            return Err(Error::InvalidParameter(format!(
                "rho has {} weights for a {}-user channel",
                self.users(),
                channel.users()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for RhoVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl FromStr for RhoVector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let weights = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad rho entry {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights)
    }
}

impl fmt::Display for RhoVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Iterates the subsets of `mask`, including `mask` itself and the empty set.
pub fn subsets_of(mask: usize) -> impl Iterator<Item = usize> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let s = next?;
        next = if s == 0 { None } else { Some((s - 1) & mask) };
        Some(s)
    })
}

/// Probability that exactly the users in `subset` (among those in `within`)
/// send 1, under independent activities `p`.
pub fn subset_probability(p: &[f64], within: usize, subset: usize) -> f64 {
    (0..p.len())
        .filter(|k| within & (1 << k) != 0)
        .map(|k| if subset & (1 << k) != 0 { p[k] } else { 1.0 - p[k] })
        .product()
}

fn product_over(p: &[f64], set: usize) -> f64 {
    (0..p.len()).filter(|k| set & (1 << k) != 0).map(|k| p[k]).product()
}

/// Inclusion-exclusion function `G_T = Σ_{U⊆T} (−1)^{|T|−|U|} row_U`.
pub fn g_function(channel: &ChannelPair, side: Side, t: usize) -> Result<SignedFunction> {
    if t >= channel.subsets() {
        return Err(Error::SubsetOutOfRange { subset: t, users: channel.users() });
    }
    let mut g = SignedFunction::zeros(channel.alphabet(side));
    let size_t = t.count_ones();
    for u in subsets_of(t) {
        let sign = if (size_t - u.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        for (acc, v) in g.0.iter_mut().zip(channel.row(side, u).values()) {
            *acc += sign * v;
        }
    }
    Ok(g)
}

fn g_table(channel: &ChannelPair, side: Side) -> Vec<SignedFunction> {
    (0..channel.subsets()).map(|t| g_function(channel, side, t).expect("in range")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ZetaChi {
    pub zeta: SignedFunction,
    pub chi: f64,
    /// `ζ ≡ 0`: the warden cannot see this input mix to first order.
    pub degenerate: bool,
}

/// Perturbation direction and curvature of the warden's output.
///
/// Without `alpha` this is the limiting `ζ = Σ ρ_k (Q_k − Q_∅)` and
/// `χ(ρ) = Σ ζ²/Q_∅`; with `alpha` it is `ζ_n = (Q_α − Q_∅)/α` and `χ_n`.
pub fn zeta_chi(channel: &ChannelPair, rho: &RhoVector, alpha: Option<f64>) -> Result<ZetaChi> {
    rho.check_users(channel)?;
    let q0 = channel.innocent(Side::Warden);
    let mut zeta = SignedFunction::zeros(channel.warden_alphabet());
    match alpha {
        None => {
            for k in 1..=channel.users() {
                let qk = channel.single(Side::Warden, k);
                for z in 0..zeta.0.len() {
                    zeta.0[z] += rho[k - 1] * (qk[z] - q0[z]);
                }
            }
        }
        Some(a) => {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidParameter(format!("alpha = {a} must lie in (0,1)")));
            }
            // (Q_α − Q_∅)/α through the inclusion-exclusion expansion, which
            // avoids cancellation for small α
            let p = rho.activity(a);
            for (t, g) in g_table(channel, Side::Warden).iter().enumerate().skip(1) {
                let w = product_over(&p, t) / a;
                for (acc, v) in zeta.0.iter_mut().zip(g.values()) {
                    *acc += w * v;
                }
            }
        }
    }
    let mut chi = 0.0;
    for (z, &v) in zeta.0.iter().enumerate() {
        if q0[z] > 0.0 {
            chi += v * v / q0[z];
        } else if v != 0.0 {
            return Err(Error::AbsoluteContinuity { symbol: z });
        }
    }
    let degenerate = zeta.max_abs() <= 1e-14;
    Ok(ZetaChi { zeta, chi, degenerate })
}

#[derive(Debug, Clone, Serialize)]
pub struct CovertOutput {
    pub direct: Pmf,
    pub inclusion_exclusion: Pmf,
}

/// Output distribution `P_α` / `Q_α` computed two ways: by averaging all
/// `2^K` rows, and as `row_∅ + Σ_{T≠∅} (Π_{k∈T} ρ_k α) G_T`.
pub fn covert_output(channel: &ChannelPair, side: Side, rho: &RhoVector, alpha: f64) -> Result<CovertOutput> {
    rho.check_users(channel)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in [0,1]")));
    }
    let p = rho.activity(alpha);
    let all = channel.subsets() - 1;
    let size = channel.alphabet(side);

    let mut direct = vec![0.0; size];
    for u in 0..channel.subsets() {
        let w = subset_probability(&p, all, u);
        if w == 0.0 {
            continue;
        }
        for (acc, v) in direct.iter_mut().zip(channel.row(side, u).values()) {
            *acc += w * v;
        }
    }

    let mut ie = channel.innocent(side).values().to_vec();
    for (t, g) in g_table(channel, side).iter().enumerate().skip(1) {
        let w = product_over(&p, t);
        if w == 0.0 {
            continue;
        }
        for (acc, v) in ie.iter_mut().zip(g.values()) {
            *acc += w * v;
        }
    }
    // the expansion can leave -1e-17 on zero-probability symbols
    ie.iter_mut().for_each(|v| *v = v.max(0.0));

    Ok(CovertOutput { direct: Pmf::from_computed(direct), inclusion_exclusion: Pmf::from_computed(ie) })
}

/// Output distribution `W(·|x_k = 1)` for user `k` (1-based) with the other
/// users drawing their covert inputs, in the inclusion-exclusion form
/// `Q_k + Σ_{S⊆K∖{k}, S≠∅} (Π_{i∈S} ρ_i α) Σ_{T⊆S} (−1)^{|S|−|T|} Q_{T∪{k}}`.
pub fn single_user_marginal(channel: &ChannelPair, side: Side, k: usize, rho: &RhoVector, alpha: f64) -> Result<Pmf> {
    rho.check_users(channel)?;
    if k == 0 || k > channel.users() {
        return Err(Error::InvalidParameter(format!("user {k} out of range")));
    }
    let bit = 1 << (k - 1);
    let others = (channel.subsets() - 1) & !bit;
    let p = rho.activity(alpha);
    let mut out = channel.row(side, bit).values().to_vec();
    for s in subsets_of(others).filter(|&s| s != 0) {
        let w = product_over(&p, s);
        if w == 0.0 {
            continue;
        }
        let size_s = s.count_ones();
        for t in subsets_of(s) {
            let sign = if (size_s - t.count_ones()) % 2 == 0 { w } else { -w };
            for (acc, v) in out.iter_mut().zip(channel.row(side, t | bit).values()) {
                *acc += sign * v;
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(Pmf::from_computed(out))
}

/// Per-symbol channel seen when the inputs of the users in `hidden` are
/// averaged out under their covert distribution. Entry `u` is the output
/// distribution given the visible inputs `u & !hidden`.
pub fn marginal_kernel(channel: &ChannelPair, side: Side, hidden: usize, activity: &[f64]) -> Vec<Vec<f64>> {
    let size = channel.alphabet(side);
    let mut kernel = vec![vec![0.0; size]; channel.subsets()];
    for u in 0..channel.subsets() {
        let base = u & !hidden;
        if base != u {
            kernel[u] = kernel[base].clone();
            continue;
        }
        for s in subsets_of(hidden) {
            let w = subset_probability(activity, hidden, s);
            if w == 0.0 {
                continue;
            }
            for (acc, v) in kernel[u].iter_mut().zip(channel.row(side, base | s).values()) {
                *acc += w * v;
            }
        }
    }
    kernel
}

fn check_mi_args(channel: &ChannelPair, rho: &RhoVector, t: usize, alpha: f64) -> Result<()> {
    rho.check_users(channel)?;
    if t == 0 || t >= channel.subsets() {
        return Err(Error::InvalidParameter(format!("T = {t} must be a nonempty subset")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in [0,1]")));
    }
    Ok(())
}

/// `I(X[T]; Y | X[T^c])` in nats under the covert input distribution.
pub fn conditional_mi(channel: &ChannelPair, side: Side, t: usize, rho: &RhoVector, alpha: f64) -> Result<f64> {
    check_mi_args(channel, rho, t, alpha)?;
    let p = rho.activity(alpha);
    let all = channel.subsets() - 1;
    let kernel = marginal_kernel(channel, side, t, &p);
    let mut mi = 0.0;
    for u in 0..channel.subsets() {
        let w = subset_probability(&p, all, u);
        if w == 0.0 {
            continue;
        }
        mi += w * kl_slices(channel.row(side, u).values(), &kernel[u]);
    }
    Ok(mi)
}

/// `I(X[T]; Y)` in nats with the inputs outside `T` averaged out.
pub fn mutual_information(channel: &ChannelPair, side: Side, t: usize, rho: &RhoVector, alpha: f64) -> Result<f64> {
    check_mi_args(channel, rho, t, alpha)?;
    let p = rho.activity(alpha);
    let all = channel.subsets() - 1;
    let per_input = marginal_kernel(channel, side, all & !t, &p);
    let output = &marginal_kernel(channel, side, all, &p)[0];
    let mut mi = 0.0;
    for s in subsets_of(t) {
        let w = subset_probability(&p, t, s);
        if w == 0.0 {
            continue;
        }
        mi += w * kl_slices(&per_input[s], output);
    }
    Ok(mi)
}
