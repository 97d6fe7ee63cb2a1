//! Random-coding covert scheme: codebook sizing, low-weight random
//! codebooks, memoryless channel sampling, and the information-density
//! threshold decoder that knows every user's key.

use std::ops::ControlFlow;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelPair, Side};
use crate::error::{Error, Result};
use crate::info::{conditional_mi, marginal_kernel, RhoVector};
use crate::pmf::Pmf;
use crate::process::AlphaSchedule;
use crate::region::user_divergences;
use crate::rng::{substream, Domain};
use crate::stats::{wilson, Interval};
use crate::tuples::{LogSum, TupleScorer};

/// Largest `Π_k M_k L_k` for which the warden's view is evaluated by full
/// enumeration of message/key tuples.
pub const TUPLE_CAP: f64 = (1u64 << 20) as f64;
/// Largest `Π_k M_k` searched exhaustively by the decoder.
pub const DECODE_CAP: f64 = (1u64 << 16) as f64;

pub const DEFAULT_MU: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct SchemeConfig {
    pub n: usize,
    pub alpha: f64,
    pub rho: RhoVector,
    pub mu: f64,
    /// Target `log M_k` in nats.
    pub log_m: Vec<f64>,
    /// Target `log M_k L_k` in nats.
    pub log_ml: Vec<f64>,
    pub m: Vec<usize>,
    pub l: Vec<usize>,
    /// Decoder thresholds `γ_T` indexed by subset bitmask; entry 0 is unused.
    pub gamma: Vec<f64>,
}

fn round_count(log_count: f64) -> usize {
    let c = log_count.exp().round();
    if c >= usize::MAX as f64 {
        usize::MAX
    } else {
        (c as usize).max(1)
    }
}

fn thresholds(channel: &ChannelPair, rho: &RhoVector, n: usize, mu: f64, alpha: f64) -> Result<Vec<f64>> {
    let mut gamma = vec![0.0; channel.subsets()];
    for (t, g) in gamma.iter_mut().enumerate().skip(1) {
        *g = (1.0 - mu) * n as f64 * conditional_mi(channel, Side::Receiver, t, rho, alpha)?;
    }
    Ok(gamma)
}

fn check_common(channel: &ChannelPair, rho: &RhoVector, n: usize, mu: f64) -> Result<()> {
    rho.check_users(channel)?;
    if n == 0 {
        return Err(Error::InvalidParameter("blocklength must be positive".into()));
    }
    if n > u32::MAX as usize {
        return Err(Error::InvalidParameter("blocklength too large".into()));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidParameter(format!("mu = {mu} must lie in (0,1)")));
    }
    Ok(())
}

/// Sizes the scheme: `log M_k = (1−μ) ρ_k n α D(P_k‖P_∅)`,
/// `log M_k L_k = (1+μ) ρ_k n α D(Q_k‖Q_∅)`, counts rounded to the nearest
/// integer (at least 1), `γ_T = (1−μ) n I(X[T]; Y | X[T^c])`.
pub fn build_scheme(channel: &ChannelPair, rho: &RhoVector, n: usize, mu: f64, schedule: &AlphaSchedule) -> Result<SchemeConfig> {
    check_common(channel, rho, n, mu)?;
    let alpha = schedule.alpha_at(n as u64)?;
    let div = user_divergences(channel)?;
    let users = channel.users();
    let mut log_m = Vec::with_capacity(users);
    let mut log_ml = Vec::with_capacity(users);
    let mut m = Vec::with_capacity(users);
    let mut l = Vec::with_capacity(users);
    for k in 0..users {
        let weight = rho[k] * n as f64 * alpha;
        let lm = (1.0 - mu) * weight * div.receiver[k];
        let lml = (1.0 + mu) * weight * div.warden[k];
        if !lm.is_finite() || !lml.is_finite() {
            return Err(Error::InvalidParameter(format!("user {} has an infinite divergence", k + 1)));
        }
        let mk = round_count(lm);
        // keys fill the gap between M_k and the resolvability target
        let lk = round_count(lml - (mk as f64).ln());
        log_m.push(lm);
        log_ml.push(lml);
        m.push(mk);
        l.push(lk);
    }
    let gamma = thresholds(channel, rho, n, mu, alpha)?;
    Ok(SchemeConfig { n, alpha, rho: rho.clone(), mu, log_m, log_ml, m, l, gamma })
}

impl SchemeConfig {
    /// A scheme with explicit message and key counts.
    pub fn with_counts(
        channel: &ChannelPair,
        rho: &RhoVector,
        n: usize,
        alpha: f64,
        mu: f64,
        m: Vec<usize>,
        l: Vec<usize>,
    ) -> Result<Self> {
        check_common(channel, rho, n, mu)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in [0,1]")));
        }
        if m.len() != channel.users() || l.len() != channel.users() || m.iter().chain(&l).any(|&c| c == 0) {
            return Err(Error::InvalidParameter("need one positive M_k and L_k per user".into()));
        }
        let log_m = m.iter().map(|&c| (c as f64).ln()).collect();
        let log_ml = m.iter().zip(&l).map(|(&a, &b)| (a as f64).ln() + (b as f64).ln()).collect();
        let gamma = thresholds(channel, rho, n, mu, alpha)?;
        Ok(SchemeConfig { n, alpha, rho: rho.clone(), mu, log_m, log_ml, m, l, gamma })
    }

    pub fn users(&self) -> usize {
        self.m.len()
    }

    /// `log Π_k M_k L_k` of the rounded counts.
    pub fn log_tuples(&self) -> f64 {
        self.m.iter().zip(&self.l).map(|(&a, &b)| (a as f64).ln() + (b as f64).ln()).sum()
    }

    pub fn log_messages(&self) -> f64 {
        self.m.iter().map(|&a| (a as f64).ln()).sum()
    }

    pub fn require_tuple_cap(&self) -> Result<()> {
        let tuples = self.log_tuples().exp();
        if tuples > TUPLE_CAP * (1.0 + 1e-12) {
            return Err(Error::CapExceeded { what: "message/key tuples", value: tuples, cap: TUPLE_CAP });
        }
        Ok(())
    }

    pub fn require_decode_cap(&self) -> Result<()> {
        let tuples = self.log_messages().exp();
        if tuples > DECODE_CAP * (1.0 + 1e-12) {
            return Err(Error::CapExceeded { what: "message tuples", value: tuples, cap: DECODE_CAP });
        }
        Ok(())
    }
}

/// One user's `M × L` codewords, stored as sorted support positions.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCodebook {
    pub messages: usize,
    pub keys: usize,
    supports: Vec<Vec<u32>>,
}

impl UserCodebook {
    /// Builds from dense binary words ordered by `(message, key)`.
    pub fn from_words(messages: usize, keys: usize, words: &[Vec<u8>]) -> Result<Self> {
        if words.len() != messages * keys || messages == 0 || keys == 0 {
            return Err(Error::InvalidParameter(format!("expected {} words", messages * keys)));
        }
        let supports = words
            .iter()
            .map(|w| {
                if w.iter().any(|&b| b > 1) {
                    return Err(Error::InvalidParameter("codeword symbols must be 0 or 1".into()));
                }
                Ok(w.iter().enumerate().filter(|(_, &b)| b == 1).map(|(j, _)| j as u32).collect())
            })
            .collect::<Result<_>>()?;
        Ok(UserCodebook { messages, keys, supports })
    }

    pub fn support(&self, message: usize, key: usize) -> &[u32] {
        &self.supports[message * self.keys + key]
    }

    pub fn words(&self) -> impl Iterator<Item = &[u32]> {
        self.supports.iter().map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub n: usize,
    pub seed: Option<u64>,
    pub users: Vec<UserCodebook>,
}

impl Codebook {
    pub fn from_users(n: usize, users: Vec<UserCodebook>) -> Result<Self> {
        if users.iter().flat_map(|u| u.words()).any(|s| s.last().is_some_and(|&j| j as usize >= n)) {
            return Err(Error::InvalidParameter("codeword longer than the blocklength".into()));
        }
        Ok(Codebook { n, seed: None, users })
    }

    /// Dense word for user `k` (0-based).
    pub fn word(&self, k: usize, message: usize, key: usize) -> Vec<u8> {
        let mut w = vec![0u8; self.n];
        for &j in self.users[k].support(message, key) {
            w[j as usize] = 1;
        }
        w
    }

    pub fn tuple_count(&self) -> f64 {
        self.users.iter().map(|u| u.len() as f64).product()
    }

    pub fn message_tuple_count(&self) -> f64 {
        self.users.iter().map(|u| u.messages as f64).product()
    }

    /// Per-position active-user bitmask for one codeword per user.
    pub(crate) fn active_sets(&self, supports: &[&[u32]]) -> Vec<u32> {
        let mut u = vec![0u32; self.n];
        for (k, supp) in supports.iter().enumerate() {
            for &j in *supp {
                u[j as usize] |= 1 << k;
            }
        }
        u
    }
}

/// Draws every symbol of user `k` independently as 1 with probability `ρ_k α`.
pub fn generate_codebooks(config: &SchemeConfig, seed: u64) -> Codebook {
    let users = (0..config.users())
        .map(|k| {
            let p = config.rho[k] * config.alpha;
            let mut rng = substream(seed, Domain::Codebook, k as u64);
            let count = config.m[k] * config.l[k];
            let supports = (0..count)
                .map(|_| (0..config.n as u32).filter(|_| p > 0.0 && rng.random::<f64>() < p).collect())
                .collect();
            UserCodebook { messages: config.m[k], keys: config.l[k], supports }
        })
        .collect();
    Codebook { n: config.n, seed: Some(seed), users }
}

/// Samples a memoryless output sequence for the given per-position active sets.
pub(crate) fn sample_outputs<R: Rng>(rows: &[Pmf], active: &[u32], rng: &mut R) -> Vec<u16> {
    active.iter().map(|&u| rows[u as usize].sample_with(rng.random::<f64>()) as u16).collect()
}

/// Information-density decoder tables.
///
/// For nonempty `T` the density at one position is
/// `log P_U(y) − log W_T(y | x[T^c])` with `W_T` the channel seen when the
/// inputs in `T` are averaged over their covert distribution.
pub struct ThresholdDecoder {
    /// `base[c][y]`: density with every user silent; `c` indexes `T − 1`.
    base: Vec<Vec<LogSum>>,
    /// `delta[c][u][y]`: density change when the users in `u` are active.
    delta: Vec<Vec<Vec<LogSum>>>,
    gamma: Vec<f64>,
}

impl ThresholdDecoder {
    pub fn new(channel: &ChannelPair, config: &SchemeConfig) -> Result<Self> {
        config.rho.check_users(channel)?;
        let activity = config.rho.activity(config.alpha);
        let rows = channel.rows(Side::Receiver);
        let size = channel.receiver_alphabet();
        let density = |row: &Pmf, kernel: &[f64], y: usize| {
            let p = row[y];
            if p == 0.0 {
                f64::NEG_INFINITY
            } else if kernel[y] == 0.0 {
                f64::INFINITY
            } else {
                p.ln() - kernel[y].ln()
            }
        };
        let mut base = Vec::new();
        let mut delta = Vec::new();
        for t in 1..channel.subsets() {
            let kernel = marginal_kernel(channel, Side::Receiver, t, &activity);
            let b: Vec<LogSum> = (0..size).map(|y| LogSum::of(density(&rows[0], &kernel[0], y))).collect();
            let d: Vec<Vec<LogSum>> = (0..channel.subsets())
                .map(|u| (0..size).map(|y| LogSum::of(density(&rows[u], &kernel[u], y)).remove(b[y])).collect())
                .collect();
            base.push(b);
            delta.push(d);
        }
        Ok(ThresholdDecoder { base, delta, gamma: config.gamma[1..].to_vec() })
    }

    /// Decodes `obs` with the keys known. Returns the unique message tuple
    /// passing every threshold, or `None` when none or several pass.
    pub fn decode(&self, codebook: &Codebook, keys: &[usize], obs: &[u16]) -> Option<Vec<usize>> {
        self.decode_with_hint(codebook, keys, obs, None)
    }

    fn accepts(&self, score: &[LogSum]) -> bool {
        score.iter().zip(&self.gamma).all(|(s, g)| s.value() >= *g)
    }

    fn baseline(&self, obs: &[u16]) -> Vec<LogSum> {
        self.base.iter().map(|b| obs.iter().fold(LogSum::default(), |acc, &y| acc.add(b[y as usize]))).collect()
    }

    /// With a hint, stops as soon as the outcome differs from it.
    fn decode_with_hint(&self, codebook: &Codebook, keys: &[usize], obs: &[u16], hint: Option<&[usize]>) -> Option<Vec<usize>> {
        let words: Vec<Vec<&[u32]>> = codebook
            .users
            .iter()
            .zip(keys)
            .map(|(u, &key)| (0..u.messages).map(|m| u.support(m, key)).collect())
            .collect();
        let baseline = self.baseline(obs);
        let scorer = TupleScorer { delta: &self.delta };
        let mut scratch = Vec::new();

        if let Some(sent) = hint {
            // the sent tuple must pass, and then no other tuple may
            let only: Vec<Vec<&[u32]>> = words.iter().zip(sent).map(|(w, &m)| vec![w[m]]).collect();
            let mut ok = false;
            scorer.for_each(&only, obs, &baseline, &mut scratch, |_, s| {
                ok = self.accepts(s);
                ControlFlow::Break(())
            });
            if !ok {
                return None;
            }
            let mut rival = false;
            scorer.for_each(&words, obs, &baseline, &mut scratch, |idx, s| {
                if idx != sent && self.accepts(s) {
                    rival = true;
                    return ControlFlow::Break(());
                }
                ControlFlow::Continue(())
            });
            return if rival { None } else { Some(sent.to_vec()) };
        }

        let mut found: Option<Vec<usize>> = None;
        let mut unique = true;
        scorer.for_each(&words, obs, &baseline, &mut scratch, |idx, s| {
            if self.accepts(s) {
                if found.is_some() {
                    unique = false;
                    return ControlFlow::Break(());
                }
                found = Some(idx.to_vec());
            }
            ControlFlow::Continue(())
        });
        if unique {
            found
        } else {
            None
        }
    }

    /// Overrides every threshold, e.g. with `-∞` to accept any candidate.
    pub fn set_thresholds(&mut self, gamma: f64) {
        self.gamma.iter_mut().for_each(|g| *g = gamma);
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorEstimate {
    pub trials: usize,
    pub failures: usize,
    pub pe_hat: f64,
    /// Half-width of the Wilson 95% interval.
    pub ci95: f64,
    pub interval: Interval,
}

/// Monte Carlo block error rate of the threshold decoder.
pub fn simulate_error(channel: &ChannelPair, config: &SchemeConfig, codebook: &Codebook, trials: usize, seed: u64) -> Result<ErrorEstimate> {
    let decoder = ThresholdDecoder::new(channel, config)?;
    simulate_with_decoder(channel, &decoder, codebook, trials, seed)
}

pub fn simulate_with_decoder(
    channel: &ChannelPair,
    decoder: &ThresholdDecoder,
    codebook: &Codebook,
    trials: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if codebook.users.len() != channel.users() {
        return Err(Error::InvalidParameter("codebook and channel disagree on K".into()));
    }
    let tuples = codebook.message_tuple_count();
    if tuples > DECODE_CAP {
        return Err(Error::CapExceeded { what: "message tuples", value: tuples, cap: DECODE_CAP });
    }
    let rows = channel.rows(Side::Receiver);
    let failures = (0..trials)
        .into_par_iter()
        .filter(|&trial| {
            let mut rng = substream(seed, Domain::Trial, trial as u64);
            let sent: Vec<usize> = codebook.users.iter().map(|u| rng.random_range(0..u.messages)).collect();
            let keys: Vec<usize> = codebook.users.iter().map(|u| rng.random_range(0..u.keys)).collect();
            let supports: Vec<&[u32]> = codebook.users.iter().zip(&sent).zip(&keys).map(|((u, &m), &l)| u.support(m, l)).collect();
            let obs = sample_outputs(rows, &codebook.active_sets(&supports), &mut rng);
            decoder.decode_with_hint(codebook, &keys, &obs, Some(&sent)).is_none()
        })
        .count();
    let interval = wilson(failures, trials);
    Ok(ErrorEstimate {
        trials,
        failures,
        pe_hat: failures as f64 / trials as f64,
        ci95: interval.half_width(),
        interval,
    })
}
