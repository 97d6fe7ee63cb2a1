//! Covert throughput region: boundary points per `ρ`, key thresholds,
//! keyless feasibility, and sweeps over the simplex.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelPair, Side};
use crate::error::{Error, Result};
use crate::info::{zeta_chi, RhoVector};
use crate::pmf::kl;
use crate::rng::{substream, Domain};

/// Relative tolerance under which `D(P_k‖P_∅)` and `D(Q_k‖Q_∅)` count as equal.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_GRID: usize = 201;
pub const DEFAULT_SAMPLES: usize = 2000;

/// Per-user divergences `D(P_k‖P_∅)` and `D(Q_k‖Q_∅)`.
#[derive(Debug, Clone, Serialize)]
pub struct UserDivergences {
    pub receiver: Vec<f64>,
    pub warden: Vec<f64>,
}

pub fn user_divergences(channel: &ChannelPair) -> Result<UserDivergences> {
    let per_side = |side| {
        (1..=channel.users())
            .map(|k| kl(channel.single(side, k), channel.innocent(side)))
            .collect::<Result<Vec<_>>>()
    };
    Ok(UserDivergences { receiver: per_side(Side::Receiver)?, warden: per_side(Side::Warden)? })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionPoint {
    pub rho: RhoVector,
    pub chi: f64,
    /// Boundary throughputs `√(2/χ) ρ_k D(P_k‖P_∅)`.
    pub r: Vec<f64>,
    /// Minimal key throughputs `√(2/χ) ρ_k [D(Q_k‖Q_∅) − D(P_k‖P_∅)]⁺`.
    pub s: Vec<f64>,
    /// Key-pair point `√(2/χ) ρ_k D(Q_k‖Q_∅)`.
    pub key_pair: Vec<f64>,
    /// `D(P_k‖P_∅) > D(Q_k‖Q_∅)` strictly.
    pub keyless: Vec<bool>,
    /// The two divergences agree to [`EQUALITY_TOLERANCE`].
    pub boundary_case: Vec<bool>,
}

impl RegionPoint {
    /// The boundary point dominates the key-pair point componentwise.
    pub fn boundary_dominates_key_pair(&self) -> bool {
        self.r.iter().zip(&self.key_pair).all(|(r, k)| r >= k)
    }
}

pub fn throughput_bound(channel: &ChannelPair, rho: &RhoVector) -> Result<RegionPoint> {
    let div = user_divergences(channel)?;
    point_from(channel, rho, &div)
}

fn point_from(channel: &ChannelPair, rho: &RhoVector, div: &UserDivergences) -> Result<RegionPoint> {
    let zc = zeta_chi(channel, rho, None)?;
    if zc.degenerate || zc.chi <= 0.0 {
        return Err(Error::Degenerate);
    }
    let scale = (2.0 / zc.chi).sqrt();
    let users = channel.users();
    let mut point = RegionPoint {
        rho: rho.clone(),
        chi: zc.chi,
        r: Vec::with_capacity(users),
        s: Vec::with_capacity(users),
        key_pair: Vec::with_capacity(users),
        keyless: Vec::with_capacity(users),
        boundary_case: Vec::with_capacity(users),
    };
    for k in 0..users {
        let (dp, dq) = (div.receiver[k], div.warden[k]);
        point.r.push(scale * rho[k] * dp);
        point.key_pair.push(scale * rho[k] * dq);
        point.s.push(scale * rho[k] * (dq - dp).max(0.0));
        let equal = (dp - dq).abs() <= EQUALITY_TOLERANCE * dp.abs().max(dq.abs()).max(1.0);
        point.boundary_case.push(equal);
        point.keyless.push(dp > dq && !equal);
    }
    Ok(point)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionSweep {
    pub points: Vec<RegionPoint>,
    /// Parallel to `points`: not dominated componentwise by any other point.
    pub on_frontier: Vec<bool>,
    /// Grid indices skipped because `χ(ρ) = 0`.
    pub skipped: Vec<usize>,
}

/// Simplex weights to sweep: an even grid on `ρ₁` for two users, flat
/// Dirichlet samples otherwise, a single point for one user.
pub fn sweep_weights(users: usize, points: usize, seed: u64) -> Vec<RhoVector> {
    match users {
        1 => vec![RhoVector::new(vec![1.0]).unwrap()],
        2 => {
            let steps = points.max(2) - 1;
            (0..=steps)
                .map(|i| {
                    let r1 = i as f64 / steps as f64;
                    RhoVector::new(vec![r1, 1.0 - r1]).unwrap()
                })
                .collect()
        }
        _ => {
            let mut rng = substream(seed, Domain::RhoSample, 0);
            (0..points)
                .map(|_| {
                    let draws: Vec<f64> = (0..users).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                    let sum: f64 = draws.iter().sum();
                    let mut w: Vec<f64> = draws.iter().map(|d| d / sum).collect();
                    let err = 1.0 - w.iter().sum::<f64>();
                    w[0] += err;
                    RhoVector::new(w).unwrap()
                })
                .collect()
        }
    }
}

pub fn region_sweep(channel: &ChannelPair, points: usize, seed: u64) -> Result<RegionSweep> {
    if points == 0 {
        return Err(Error::InvalidParameter("sweep needs at least one point".into()));
    }
    let div = user_divergences(channel)?;
    let weights = sweep_weights(channel.users(), points, seed);
    let results: Vec<Result<RegionPoint>> = weights.par_iter().map(|rho| point_from(channel, rho, &div)).collect();

    let mut swept = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(p) => swept.push(p),
            Err(Error::Degenerate) => skipped.push(i),
            Err(e) => return Err(e),
        }
    }
    if swept.is_empty() {
        return Err(Error::Degenerate);
    }
    let on_frontier = pareto_mask(&swept.iter().map(|p| p.r.as_slice()).collect::<Vec<_>>());
    Ok(RegionSweep { points: swept, on_frontier, skipped })
}

/// Marks points not dominated by another point (`≥` everywhere, `>` somewhere).
pub fn pareto_mask(points: &[&[f64]]) -> Vec<bool> {
    points
        .iter()
        .map(|p| {
            !points.iter().any(|q| {
                q.iter().zip(p.iter()).all(|(a, b)| a >= b) && q.iter().zip(p.iter()).any(|(a, b)| a > b)
            })
        })
        .collect()
}
