//! Reference computations written independently of the library: plain
//! enumeration over input vectors and output sequences.

#![allow(dead_code)]

use covertmac::{ChannelPair, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;

pub fn e1() -> ChannelPair {
    ChannelPair::same_observer(vec![vec![0.9, 0.1], vec![0.8, 0.2], vec![0.7, 0.3], vec![0.6, 0.4]]).unwrap()
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn simplex(rng: &mut ChaCha20Rng, size: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..size).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn rows(channel: &ChannelPair, side: Side) -> Vec<Vec<f64>> {
    (0..channel.subsets()).map(|u| channel.row(side, u).values().to_vec()).collect()
}

/// Probability of input vector `u` when user `k` sends 1 w.p. `p[k]`.
pub fn input_prob(p: &[f64], u: usize) -> f64 {
    p.iter().enumerate().map(|(k, &pk)| if u >> k & 1 == 1 { pk } else { 1.0 - pk }).product()
}

pub fn covert_output(channel: &ChannelPair, side: Side, rho: &[f64], alpha: f64) -> Vec<f64> {
    let p: Vec<f64> = rho.iter().map(|r| r * alpha).collect();
    let r = rows(channel, side);
    let mut out = vec![0.0; r[0].len()];
    for (u, row) in r.iter().enumerate() {
        let w = input_prob(&p, u);
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out
}

/// Output law given `x_k = 1`, all other users random.
pub fn user_marginal(channel: &ChannelPair, side: Side, k: usize, rho: &[f64], alpha: f64) -> Vec<f64> {
    let mut p: Vec<f64> = rho.iter().map(|r| r * alpha).collect();
    p[k - 1] = 1.0;
    let r = rows(channel, side);
    let mut out = vec![0.0; r[0].len()];
    for (u, row) in r.iter().enumerate() {
        let w = input_prob(&p, u);
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| if *b == 0.0 { f64::INFINITY } else { a * (a / b).ln() })
        .sum()
}

/// `I(X[T]; out)` from the joint law of `(X[T], out)` with the other inputs
/// summed out: `H(out) − H(out | X[T])`.
pub fn mutual_information(channel: &ChannelPair, side: Side, t: usize, rho: &[f64], alpha: f64) -> f64 {
    let p: Vec<f64> = rho.iter().map(|r| r * alpha).collect();
    let r = rows(channel, side);
    let size = r[0].len();
    let mut by_visible: std::collections::BTreeMap<usize, (f64, Vec<f64>)> = Default::default();
    for (u, row) in r.iter().enumerate() {
        let w = input_prob(&p, u);
        let entry = by_visible.entry(u & t).or_insert((0.0, vec![0.0; size]));
        entry.0 += w;
        for (o, v) in entry.1.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    let out = covert_output(channel, side, rho, alpha);
    let h = |v: &[f64]| -> f64 { -v.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>() };
    let mut cond = 0.0;
    for (w, joint) in by_visible.values() {
        if *w > 0.0 {
            let c: Vec<f64> = joint.iter().map(|x| x / w).collect();
            cond += w * h(&c);
        }
    }
    h(&out) - cond
}

/// `D(Q̂ⁿ‖Q_∅ⁿ)` by listing every output sequence and every codeword tuple.
pub fn induced_kl(channel: &ChannelPair, words: &[Vec<Vec<u8>>]) -> f64 {
    let n = words[0][0].len();
    let size = channel.warden_alphabet();
    let tuples: usize = words.iter().map(|w| w.len()).product();
    let q0 = channel.innocent(Side::Warden).values();
    let mut total = 0.0;
    let mut z = vec![0usize; n];
    for idx in 0..size.pow(n as u32) {
        let mut rest = idx;
        for j in (0..n).rev() {
            z[j] = rest % size;
            rest /= size;
        }
        let mut qhat = 0.0;
        for t in 0..tuples {
            let mut pick = t;
            let chosen: Vec<&Vec<u8>> = words
                .iter()
                .map(|w| {
                    let c = &w[pick % w.len()];
                    pick /= w.len();
                    c
                })
                .collect();
            let mut prob = 1.0;
            for j in 0..n {
                let u = chosen.iter().enumerate().fold(0, |acc, (k, c)| acc | ((c[j] as usize) << k));
                prob *= channel.row(Side::Warden, u)[z[j]];
            }
            qhat += prob;
        }
        qhat /= tuples as f64;
        let base: f64 = z.iter().map(|&s| q0[s]).product();
        if qhat > 0.0 {
            total += qhat * (qhat / base).ln();
        }
    }
    total
}
