//! Checks of the modelling assumptions on a [`ChannelPair`]:
//! absolute continuity at both observers and the requirement that the
//! warden's innocent row is not a mixture of its active rows.

use serde::Serialize;

use crate::channel::{ChannelPair, Side};
use crate::lp::feasible_point;

/// Equality tolerance for the convex-combination test.
pub const CONVEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct ReceiverContinuity {
    pub subset: usize,
    pub user: usize,
    /// `P_U ≪ P_k` and `P_k ≪ P_∅`.
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Entry `U - 1` reports `Q_U ≪ Q_∅` for nonempty subset `U`.
    pub abs_continuity_warden: Vec<bool>,
    pub abs_continuity_receiver: Vec<ReceiverContinuity>,
    /// True when `Q_∅` is NOT a convex combination of the nonempty-subset rows.
    pub convex_exclusion: bool,
    /// Mixing weights over subsets `1..2^K` when `convex_exclusion` fails.
    pub witness: Option<Vec<f64>>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.convex_exclusion
            && self.abs_continuity_warden.iter().all(|&b| b)
            && self.abs_continuity_receiver.iter().all(|r| r.holds)
    }
}

/// Mixing weights `w ≥ 0, Σw = 1` with `Σ_U w_U Q_U = Q_∅` over nonempty `U`,
/// if any exist within [`CONVEX_TOLERANCE`].
pub fn innocent_mixture_weights(channel: &ChannelPair) -> Option<Vec<f64>> {
    let rows = channel.rows(Side::Warden);
    let size = channel.warden_alphabet();
    let mut a: Vec<Vec<f64>> = (0..size).map(|z| rows[1..].iter().map(|r| r[z]).collect()).collect();
    a.push(vec![1.0; rows.len() - 1]);
    let mut b: Vec<f64> = rows[0].values().to_vec();
    b.push(1.0);
    feasible_point(&a, &b, CONVEX_TOLERANCE)
}

pub fn validate_assumptions(channel: &ChannelPair) -> AssumptionReport {
    let q0 = channel.innocent(Side::Warden);
    let abs_continuity_warden = (1..channel.subsets())
        .map(|u| channel.row(Side::Warden, u).abs_continuous_wrt(q0))
        .collect();

    let p0 = channel.innocent(Side::Receiver);
    let mut abs_continuity_receiver = Vec::new();
    for u in 1..channel.subsets() {
        for k in 1..=channel.users() {
            if u & (1 << (k - 1)) == 0 {
                continue;
            }
            let pk = channel.single(Side::Receiver, k);
            let holds = channel.row(Side::Receiver, u).abs_continuous_wrt(pk) && pk.abs_continuous_wrt(p0);
            abs_continuity_receiver.push(ReceiverContinuity { subset: u, user: k, holds });
        }
    }

    let witness = innocent_mixture_weights(channel);
    AssumptionReport {
        abs_continuity_warden,
        abs_continuity_receiver,
        convex_exclusion: witness.is_none(),
        witness,
    }
}
