//! The warden's view of a codebook: the induced output distribution, its
//! divergence from the innocent and covert processes, per-symbol marginals,
//! and likelihood-ratio detection.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelPair, Side};
use crate::coding::{sample_outputs, Codebook, SchemeConfig, TUPLE_CAP};
use crate::error::{Error, Result};
use crate::info::{covert_output, g_function};
use crate::pmf::{kl, kl_slices, Pmf, SignedFunction};
use crate::rng::{substream, Domain};
use crate::stats::mean_and_se;
use crate::tuples::{LogSum, TupleScorer};

/// Largest `|Z|^n` tabulated in exact mode.
pub const OUTPUT_CAP: f64 = (1u64 << 24) as f64;

#[derive(Debug, Clone, Serialize)]
pub struct WardenMetrics {
    /// `D(Q̂ⁿ‖Q_∅^⊗n)`.
    pub d_innocent: f64,
    /// `D(Q̂ⁿ‖Q_α^⊗n)`.
    pub d_process: f64,
    /// `D(Q_α^⊗n‖Q_∅^⊗n) = n D(Q_α‖Q_∅)`.
    pub d_process_to_innocent: f64,
    /// `|d_innocent − d_process_to_innocent|`.
    pub identification_gap: f64,
    /// `d_process + 2 √(d_process/2) · n · log(1/min Q_∅)`.
    pub gap_envelope: f64,
    pub exact: bool,
    /// Standard errors of the Monte Carlo estimates (zero in exact mode).
    pub d_innocent_se: f64,
    pub d_process_se: f64,
    pub samples: usize,
}

/// `Q̂ⁿ` tabulated over `Z^n`; position 0 is the most significant digit.
#[derive(Debug, Clone)]
pub struct InducedDistribution {
    pub n: usize,
    pub alphabet: usize,
    pub probs: Vec<f64>,
}

impl InducedDistribution {
    pub fn index_of(&self, z: &[u16]) -> usize {
        z.iter().fold(0, |acc, &s| acc * self.alphabet + s as usize)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

fn check_users(channel: &ChannelPair, codebook: &Codebook) -> Result<()> {
    if codebook.users.len() != channel.users() {
        return Err(Error::InvalidParameter("codebook and channel disagree on K".into()));
    }
    Ok(())
}

fn check_tuple_cap(codebook: &Codebook) -> Result<()> {
    let tuples = codebook.tuple_count();
    if tuples > TUPLE_CAP {
        return Err(Error::CapExceeded { what: "message/key tuples", value: tuples, cap: TUPLE_CAP });
    }
    Ok(())
}

fn check_output_cap(alphabet: usize, n: usize) -> Result<()> {
    let outputs = (alphabet as f64).powi(n as i32);
    if outputs > OUTPUT_CAP {
        return Err(Error::CapExceeded { what: "|Z|^n", value: outputs, cap: OUTPUT_CAP });
    }
    Ok(())
}

/// Adds `weight · Π_j rows[j]` to `out`.
fn add_product(out: &mut [f64], rows: &[&[f64]], weight: f64, buf: &mut Vec<f64>, next: &mut Vec<f64>) {
    buf.clear();
    buf.push(weight);
    for row in rows {
        next.clear();
        for &v in buf.iter() {
            next.extend(row.iter().map(|r| v * r));
        }
        std::mem::swap(buf, next);
    }
    for (o, v) in out.iter_mut().zip(buf.iter()) {
        *o += v;
    }
}

fn product_table(row: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; row.len().pow(n as u32)];
    let rows = vec![row; n];
    add_product(&mut out, &rows, 1.0, &mut Vec::new(), &mut Vec::new());
    out
}

/// Every codeword of every user, as a per-user list of supports.
fn all_words(codebook: &Codebook) -> Vec<Vec<&[u32]>> {
    codebook.users.iter().map(|u| u.words().collect()).collect()
}

/// Visits every message/key tuple's per-position active sets.
fn for_each_tuple_pattern(codebook: &Codebook, mut f: impl FnMut(Vec<u32>)) {
    let words = all_words(codebook);
    let users = words.len();
    let mut idx = vec![0usize; users];
    loop {
        let supports: Vec<&[u32]> = (0..users).map(|k| words[k][idx[k]]).collect();
        f(codebook.active_sets(&supports));
        let mut k = 0;
        loop {
            if k == users {
                return;
            }
            idx[k] += 1;
            if idx[k] < words[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Exact `Q̂ⁿ(z) = avg over (m[K], ℓ[K]) of Π_j Q_{U_j}(z_j)`.
pub fn induced_distribution(channel: &ChannelPair, codebook: &Codebook) -> Result<InducedDistribution> {
    check_users(channel, codebook)?;
    check_tuple_cap(codebook)?;
    let alphabet = channel.warden_alphabet();
    let n = codebook.n;
    check_output_cap(alphabet, n)?;

    let mut patterns: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut total = 0usize;
    for_each_tuple_pattern(codebook, |p| {
        *patterns.entry(p).or_default() += 1;
        total += 1;
    });

    let rows = channel.rows(Side::Warden);
    let mut probs = vec![0.0; alphabet.pow(n as u32)];
    let (mut buf, mut next) = (Vec::new(), Vec::new());
    for (pattern, count) in &patterns {
        let per_position: Vec<&[f64]> = pattern.iter().map(|&u| rows[u as usize].values()).collect();
        add_product(&mut probs, &per_position, *count as f64 / total as f64, &mut buf, &mut next);
    }
    Ok(InducedDistribution { n, alphabet, probs })
}

fn envelope(d_process: f64, n: usize, q0_min: f64) -> f64 {
    let d = d_process.max(0.0);
    d + 2.0 * (d / 2.0).sqrt() * n as f64 * (1.0 / q0_min).ln()
}

fn process_to_innocent(channel: &ChannelPair, config: &SchemeConfig) -> Result<(Pmf, f64)> {
    let q_alpha = covert_output(channel, Side::Warden, &config.rho, config.alpha)?.direct;
    let d = config.n as f64 * kl(&q_alpha, channel.innocent(Side::Warden))?;
    Ok((q_alpha, d))
}

/// Exact metrics by tabulating `Q̂ⁿ`, `Q_∅^⊗n` and `Q_α^⊗n` over `Z^n`.
pub fn exact_metrics(channel: &ChannelPair, config: &SchemeConfig, codebook: &Codebook) -> Result<WardenMetrics> {
    let induced = induced_distribution(channel, codebook)?;
    let q0 = channel.innocent(Side::Warden);
    let (q_alpha, d_p2i) = process_to_innocent(channel, config)?;
    let innocent = product_table(q0.values(), codebook.n);
    let process = product_table(q_alpha.values(), codebook.n);
    let d_innocent = kl_slices(&induced.probs, &innocent);
    let d_process = kl_slices(&induced.probs, &process);
    Ok(WardenMetrics {
        d_innocent,
        d_process,
        d_process_to_innocent: d_p2i,
        identification_gap: (d_innocent - d_p2i).abs(),
        gap_envelope: envelope(d_process, codebook.n, q0.min()),
        exact: true,
        d_innocent_se: 0.0,
        d_process_se: 0.0,
        samples: 0,
    })
}

/// Log-likelihood ratio of the codebook mixture against the innocent
/// product, `log Q̂ⁿ(z) − log Q_∅^⊗n(z)`, summed over every tuple.
pub struct MixtureEvaluator<'a> {
    codebook: &'a Codebook,
    delta: Vec<Vec<Vec<LogSum>>>,
    log_tuples: f64,
}

impl<'a> MixtureEvaluator<'a> {
    pub fn new(channel: &ChannelPair, codebook: &'a Codebook) -> Result<Self> {
        check_users(channel, codebook)?;
        check_tuple_cap(codebook)?;
        let rows = channel.rows(Side::Warden);
        let q0 = rows[0].values();
        let delta = vec![rows
            .iter()
            .map(|r| {
                r.values()
                    .iter()
                    .zip(q0)
                    .map(|(&q, &base)| match (q == 0.0, base == 0.0) {
                        (true, _) => LogSum::of(f64::NEG_INFINITY),
                        (false, true) => LogSum::of(f64::INFINITY),
                        _ => LogSum::of(q.ln() - base.ln()),
                    })
                    .collect()
            })
            .collect()];
        Ok(MixtureEvaluator { codebook, delta, log_tuples: codebook.tuple_count().ln() })
    }

    pub fn log_ratio(&self, z: &[u16]) -> f64 {
        let words = all_words(self.codebook);
        let scorer = TupleScorer { delta: &self.delta };
        let (mut max, mut acc) = (f64::NEG_INFINITY, 0.0);
        let mut scratch = Vec::new();
        scorer.for_each(&words, z, &[LogSum::default()], &mut scratch, |_, s| {
            let v = s[0].value();
            if v == f64::INFINITY {
                max = f64::INFINITY;
                return ControlFlow::Break(());
            }
            if v > max {
                acc = acc * (max - v).exp() + 1.0;
                max = v;
            } else if v > f64::NEG_INFINITY {
                acc += (v - max).exp();
            }
            ControlFlow::Continue(())
        });
        if max.is_infinite() {
            return max;
        }
        max + acc.ln() - self.log_tuples
    }
}

/// Plug-in Monte Carlo estimates: `z` drawn from `Q̂ⁿ` by picking a uniform
/// message/key tuple and passing it through the channel, with the exact
/// mixture log-ratio evaluated at each sample.
pub fn monte_carlo_metrics(channel: &ChannelPair, config: &SchemeConfig, codebook: &Codebook, samples: usize, seed: u64) -> Result<WardenMetrics> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let evaluator = MixtureEvaluator::new(channel, codebook)?;
    let q0 = channel.innocent(Side::Warden);
    let (q_alpha, d_p2i) = process_to_innocent(channel, config)?;
    let process_shift: Vec<f64> = q_alpha.values().iter().zip(q0.values()).map(|(a, b)| a.ln() - b.ln()).collect();
    let rows = channel.rows(Side::Warden);

    let draws: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, Domain::Covertness, i as u64);
            let supports: Vec<&[u32]> = codebook
                .users
                .iter()
                .map(|u| {
                    let w = rng.random_range(0..u.len());
                    u.support(w / u.keys, w % u.keys)
                })
                .collect();
            let z = sample_outputs(rows, &codebook.active_sets(&supports), &mut rng);
            let innocent = evaluator.log_ratio(&z);
            let shift: f64 = z.iter().map(|&s| process_shift[s as usize]).sum();
            (innocent, innocent - shift)
        })
        .collect();
    let (d_innocent, d_innocent_se) = mean_and_se(&draws.iter().map(|d| d.0).collect::<Vec<_>>());
    let (d_process, d_process_se) = mean_and_se(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
    Ok(WardenMetrics {
        d_innocent,
        d_process,
        d_process_to_innocent: d_p2i,
        identification_gap: (d_innocent - d_p2i).abs(),
        gap_envelope: envelope(d_process, codebook.n, q0.min()),
        exact: false,
        d_innocent_se,
        d_process_se,
        samples,
    })
}

/// Exact metrics when both caps allow, otherwise Monte Carlo.
pub fn covertness_metrics(channel: &ChannelPair, config: &SchemeConfig, codebook: &Codebook, samples: usize, seed: u64) -> Result<WardenMetrics> {
    check_tuple_cap(codebook)?;
    if check_output_cap(channel.warden_alphabet(), codebook.n).is_ok() {
        exact_metrics(channel, config, codebook)
    } else {
        monte_carlo_metrics(channel, config, codebook, samples, seed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SymbolMarginals {
    /// `mu[k][j]`: fraction of user `k`'s codewords with a 1 at position `j`.
    pub mu: Vec<Vec<f64>>,
    pub qhat: Vec<Pmf>,
    /// `Ψ_j = Q̂_j − Q_∅`.
    pub psi: Vec<SignedFunction>,
    /// `Σ_j D(Q̂_j‖Q_∅)`, a lower bound on `D(Q̂ⁿ‖Q_∅^⊗n)`.
    pub chain_lower: f64,
}

/// Per-position warden marginals `Q̂_j = Q_∅ + Σ_{T≠∅} (Π_{k∈T} μ_kj) G_T`.
pub fn per_symbol_marginals(channel: &ChannelPair, codebook: &Codebook) -> Result<SymbolMarginals> {
    check_users(channel, codebook)?;
    check_tuple_cap(codebook)?;
    let n = codebook.n;
    let mu: Vec<Vec<f64>> = codebook
        .users
        .iter()
        .map(|u| {
            let mut counts = vec![0usize; n];
            for w in u.words() {
                for &j in w {
                    counts[j as usize] += 1;
                }
            }
            counts.into_iter().map(|c| c as f64 / u.len() as f64).collect()
        })
        .collect();
    let g: Vec<SignedFunction> = (0..channel.subsets()).map(|t| g_function(channel, Side::Warden, t)).collect::<Result<_>>()?;
    let q0 = channel.innocent(Side::Warden);
    let mut qhat = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    let mut chain_lower = 0.0;
    for j in 0..n {
        let mut q = q0.values().to_vec();
        for (t, gt) in g.iter().enumerate().skip(1) {
            let w: f64 = (0..channel.users()).filter(|k| t & (1 << k) != 0).map(|k| mu[k][j]).product();
            if w != 0.0 {
                q.iter_mut().zip(gt.values()).for_each(|(a, b)| *a += w * b);
            }
        }
        q.iter_mut().for_each(|v| *v = v.max(0.0));
        let pmf = Pmf::from_computed(q);
        chain_lower += kl(&pmf, q0)?;
        psi.push(SignedFunction(pmf.values().iter().zip(q0.values()).map(|(a, b)| a - b).collect()));
        qhat.push(pmf);
    }
    Ok(SymbolMarginals { mu, qhat, psi, chain_lower })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetectionResult {
    /// Likelihood-ratio threshold: decide "communication" when `Q̂ⁿ/Q_∅ⁿ > τ`.
    pub threshold: f64,
    pub alpha_err: f64,
    pub beta_err: f64,
    /// Standard error of `alpha_err + beta_err`.
    pub sigma: f64,
    pub bound_rhs: f64,
    /// `alpha_err + beta_err ≥ bound_rhs − 3 sigma`.
    pub bound_holds: bool,
}

impl DetectionResult {
    pub fn total(&self) -> f64 {
        self.alpha_err + self.beta_err
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub d_innocent: f64,
    pub bound_rhs: f64,
    pub trials: usize,
    pub points: Vec<DetectionResult>,
}

impl DetectionReport {
    pub fn minimum(&self) -> &DetectionResult {
        self.points.iter().min_by(|a, b| a.total().total_cmp(&b.total())).expect("nonempty sweep")
    }

    pub fn all_hold(&self) -> bool {
        self.points.iter().all(|p| p.bound_holds)
    }

    /// The equal-prior test, threshold 1.
    pub fn unit_threshold(&self) -> Option<&DetectionResult> {
        self.points.iter().find(|p| p.threshold == 1.0)
    }
}

/// `0`, `e^{-6} … e^{6}` in steps of `0.1` in the exponent, and `+∞`.
pub fn default_thresholds() -> Vec<f64> {
    let mut t = vec![0.0];
    t.extend((0..=120).map(|i| ((i as f64 - 60.0) / 10.0).exp()));
    t.push(f64::INFINITY);
    t
}

/// Simulates the warden's likelihood-ratio test under both hypotheses.
pub fn detection_tradeoff(
    channel: &ChannelPair,
    config: &SchemeConfig,
    codebook: &Codebook,
    trials: usize,
    seed: u64,
    thresholds: &[f64],
) -> Result<DetectionReport> {
    if trials == 0 || thresholds.is_empty() {
        return Err(Error::InvalidParameter("need trials and at least one threshold".into()));
    }
    let induced = induced_distribution(channel, codebook)?;
    let q0 = channel.innocent(Side::Warden);
    let innocent = product_table(q0.values(), codebook.n);
    let d_innocent = kl_slices(&induced.probs, &innocent);
    let _ = config;
    let llr_at = |idx: usize| {
        let v = induced.probs[idx].ln() - innocent[idx].ln();
        if v.abs() <= 1e-12 {
            0.0
        } else {
            v
        }
    };
    let rows = channel.rows(Side::Warden);
    let n = codebook.n;

    let h0: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, Domain::WardenH0, i as u64);
            let z = sample_outputs(rows, &vec![0u32; n], &mut rng);
            llr_at(induced.index_of(&z))
        })
        .collect();
    let h1: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, Domain::WardenH1, i as u64);
            let supports: Vec<&[u32]> = codebook
                .users
                .iter()
                .map(|u| {
                    let w = rng.random_range(0..u.len());
                    u.support(w / u.keys, w % u.keys)
                })
                .collect();
            let z = sample_outputs(rows, &codebook.active_sets(&supports), &mut rng);
            llr_at(induced.index_of(&z))
        })
        .collect();

    let bound_rhs = 1.0 - d_innocent.max(0.0).sqrt();
    let nt = trials as f64;
    let points = thresholds
        .iter()
        .map(|&tau| {
            let cut = if tau == 0.0 { f64::NEG_INFINITY } else { tau.ln() };
            let alpha_err = h0.iter().filter(|&&v| v > cut).count() as f64 / nt;
            let beta_err = h1.iter().filter(|&&v| v <= cut).count() as f64 / nt;
            let sigma = (alpha_err * (1.0 - alpha_err) / nt + beta_err * (1.0 - beta_err) / nt).sqrt();
            DetectionResult {
                threshold: tau,
                alpha_err,
                beta_err,
                sigma,
                bound_rhs,
                bound_holds: alpha_err + beta_err >= bound_rhs - 3.0 * sigma,
            }
        })
        .collect();
    Ok(DetectionReport { d_innocent, bound_rhs, trials, points })
}
