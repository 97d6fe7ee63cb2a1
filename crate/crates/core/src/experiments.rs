//! Batch experiments behind the command-line tool. Every experiment returns
//! its data together with a CSV or JSON rendering, and all randomness is
//! derived from one seed so repeated runs are byte-identical.

use serde::Serialize;
use serde_json::{json, Value};

use crate::assumptions::{validate_assumptions, AssumptionReport};
use crate::channel::{ChannelPair, Side};
use crate::coding::{build_scheme, generate_codebooks, simulate_error, ErrorEstimate, SchemeConfig};
use crate::error::{Error, Result};
use crate::info::{covert_output, single_user_marginal, subset_probability, zeta_chi, RhoVector};
use crate::process::{bernstein_bound, kl_sandwich, mi_expansion_residual, AlphaSchedule};
use crate::region::{region_sweep, sweep_weights, throughput_bound, RegionSweep};
use crate::rng::child_seed;
use crate::warden::{covertness_metrics, detection_tradeoff, DetectionReport, WardenMetrics};

/// Display unit for information quantities. Computation is always in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Unit {
    #[default]
    Nats,
    Bits,
}

impl Unit {
    pub fn scale(self) -> f64 {
        match self {
            Unit::Nats => 1.0,
            Unit::Bits => std::f64::consts::LOG2_E,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn per_user(prefix: &str, users: usize) -> impl Iterator<Item = String> + '_ {
    (1..=users).map(move |k| format!("{prefix}_{k}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub users: usize,
    pub receiver_alphabet: usize,
    pub warden_alphabet: usize,
    pub assumptions: AssumptionReport,
    pub all_pass: bool,
}

pub fn validate(channel: &ChannelPair) -> ValidationReport {
    let assumptions = validate_assumptions(channel);
    ValidationReport {
        users: channel.users(),
        receiver_alphabet: channel.receiver_alphabet(),
        warden_alphabet: channel.warden_alphabet(),
        all_pass: assumptions.all_pass(),
        assumptions,
    }
}

/// Columns `rho_k, chi, r_k, s_k, keyless_k, on_frontier`.
pub fn region_table(channel: &ChannelPair, points: usize, seed: u64, unit: Unit) -> Result<(RegionSweep, Table)> {
    let sweep = region_sweep(channel, points, seed)?;
    let users = channel.users();
    let mut header: Vec<String> = per_user("rho", users).collect();
    header.push("chi".into());
    header.extend(per_user("r", users));
    header.extend(per_user("s", users));
    header.extend(per_user("keyless", users));
    header.push("on_frontier".into());
    let mut table = Table::new(header);
    let scale = unit.scale();
    for (p, &front) in sweep.points.iter().zip(&sweep.on_frontier) {
        let mut row: Vec<String> = p.rho.weights().iter().map(|&w| num(w)).collect();
        row.push(num(p.chi));
        row.extend(p.r.iter().map(|&v| num(v * scale)));
        row.extend(p.s.iter().map(|&v| num(v * scale)));
        row.extend(p.keyless.iter().map(|b| b.to_string()));
        row.push(front.to_string());
        table.rows.push(row);
    }
    Ok((sweep, table))
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub checks: Vec<LemmaCheck>,
    pub all_passed: bool,
}

pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const IDENTITY_ALPHAS: [f64; 3] = [0.01, 0.1, 0.5];
pub const SANDWICH_ALPHAS: [f64; 3] = [0.05, 0.01, 0.001];
pub const EXPANSION_LADDER: [f64; 4] = [0.04, 0.02, 0.01, 0.005];

/// `W(·|x_k = 1)` by summing over the other users' inputs.
pub fn marginal_by_enumeration(channel: &ChannelPair, side: Side, k: usize, rho: &RhoVector, alpha: f64) -> Vec<f64> {
    let bit = 1 << (k - 1);
    let others = (channel.subsets() - 1) & !bit;
    let p = rho.activity(alpha);
    let mut out = vec![0.0; channel.alphabet(side)];
    for u in (0..channel.subsets()).filter(|u| u & bit != 0) {
        let w = subset_probability(&p, others, u & others);
        for (acc, v) in out.iter_mut().zip(channel.row(side, u).values()) {
            *acc += w * v;
        }
    }
    out
}

/// Largest entrywise gap between the two forms of `Q_α`, both sides.
pub fn identity_gap(channel: &ChannelPair, rho: &RhoVector, alpha: f64) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for side in [Side::Receiver, Side::Warden] {
        let out = covert_output(channel, side, rho, alpha)?;
        for (a, b) in out.direct.values().iter().zip(out.inclusion_exclusion.values()) {
            gap = gap.max((a - b).abs());
        }
    }
    Ok(gap)
}

/// Largest entrywise gap between the closed-form single-user marginal and
/// enumeration, over users and both sides.
pub fn marginal_gap(channel: &ChannelPair, rho: &RhoVector, alpha: f64) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for side in [Side::Receiver, Side::Warden] {
        for k in 1..=channel.users() {
            let closed = single_user_marginal(channel, side, k, rho, alpha)?;
            let direct = marginal_by_enumeration(channel, side, k, rho, alpha);
            for (a, b) in closed.values().iter().zip(&direct) {
                gap = gap.max((a - b).abs());
            }
        }
    }
    Ok(gap)
}

/// `residual(α)/α²` over [`EXPANSION_LADDER`] and the spread between its
/// extremes (`∞` if the sign changes).
pub fn expansion_band(channel: &ChannelPair, t: usize, rho: &RhoVector) -> Result<(Vec<f64>, f64)> {
    let scaled = EXPANSION_LADDER
        .iter()
        .map(|&a| Ok(mi_expansion_residual(channel, Side::Warden, t, rho, a)?.residual / (a * a)))
        .collect::<Result<Vec<f64>>>()?;
    let lo = scaled.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let same_sign = scaled.iter().all(|&v| v > 0.0) || scaled.iter().all(|&v| v < 0.0);
    let spread = if same_sign { hi / lo } else { f64::INFINITY };
    Ok((scaled, spread))
}

/// Runs the identity, sandwich, expansion and convergence checks on one
/// channel. Random mixing weights come from `seed`.
pub fn lemma_battery(channel: &ChannelPair, samples: usize, seed: u64) -> Result<LemmaReport> {
    let users = channel.users();
    let mut weights = vec![RhoVector::uniform(users)];
    weights.extend(sweep_weights(users, samples, seed));
    let mut checks = Vec::new();

    let (mut ie, mut corollary) = (0.0f64, 0.0f64);
    for rho in &weights {
        for alpha in IDENTITY_ALPHAS {
            ie = ie.max(identity_gap(channel, rho, alpha)?);
            corollary = corollary.max(marginal_gap(channel, rho, alpha)?);
        }
    }
    let cases = weights.len() * IDENTITY_ALPHAS.len();
    checks.push(LemmaCheck {
        name: "inclusion_exclusion",
        passed: ie <= IDENTITY_TOLERANCE,
        detail: json!({ "cases": cases, "max_abs_diff": ie }),
    });
    checks.push(LemmaCheck {
        name: "single_user_marginal",
        passed: corollary <= IDENTITY_TOLERANCE,
        detail: json!({ "cases": cases, "max_abs_diff": corollary }),
    });

    let rho = RhoVector::uniform(users);
    match zeta_chi(channel, &rho, None) {
        Ok(zc) if !zc.degenerate => {
            let reports = SANDWICH_ALPHAS.iter().map(|&a| kl_sandwich(channel, &rho, a)).collect::<Result<Vec<_>>>()?;
            checks.push(LemmaCheck {
                name: "kl_sandwich",
                passed: reports.iter().all(|r| r.holds),
                detail: json!(SANDWICH_ALPHAS.iter().zip(&reports).map(|(a, r)| json!({ "alpha": a, "report": r })).collect::<Vec<_>>()),
            });

            let gaps: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
                .iter()
                .map(|&a| Ok((zeta_chi(channel, &rho, Some(a))?.chi - zc.chi).abs()))
                .collect::<Result<_>>()?;
            // halving α must at least halve the gap, up to a 10% allowance for
            // the next order
            let linear = gaps.windows(2).all(|w| w[1] <= 0.55 * w[0] || w[0] <= 1e-15 * zc.chi);
            checks.push(LemmaCheck {
                name: "chi_n_convergence",
                passed: linear,
                detail: json!({ "chi": zc.chi, "alphas": [1e-2, 5e-3, 2.5e-3], "abs_gap": gaps }),
            });
        }
        Ok(_) | Err(Error::Degenerate) => {
            checks.push(LemmaCheck { name: "kl_sandwich", passed: false, detail: json!({ "degenerate": true }) });
        }
        Err(e) => return Err(e),
    }

    let mut bands = Vec::new();
    let mut all_in_band = true;
    for t in 1..channel.subsets() {
        let (scaled, spread) = expansion_band(channel, t, &rho)?;
        all_in_band &= spread <= 2.0;
        bands.push(json!({ "subset": t, "residual_over_alpha_sq": scaled, "spread": num(spread) }));
    }
    checks.push(LemmaCheck {
        name: "mi_expansion",
        passed: all_in_band,
        detail: json!({ "alphas": EXPANSION_LADDER, "subsets": bands }),
    });

    let ts = [0.5, 1.0, 2.0, 4.0, 8.0];
    let values = ts.iter().map(|&t| bernstein_bound(1.0, 1.0, t)).collect::<Result<Vec<_>>>()?;
    checks.push(LemmaCheck {
        name: "bernstein_monotone",
        passed: values.windows(2).all(|w| w[1] <= w[0]) && values.iter().all(|&v| v > 0.0 && v <= 1.0),
        detail: json!({ "variance_sum": 1.0, "c": 1.0, "t": ts, "bound": values }),
    });

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(LemmaReport { checks, all_passed })
}

#[derive(Debug, Clone)]
pub struct SchemeOptions {
    pub n: usize,
    pub mu: f64,
    pub rho: RhoVector,
    pub schedule: AlphaSchedule,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutcome {
    pub config: SchemeConfig,
    pub error: ErrorEstimate,
    /// `None` when the warden analysis was skipped or exceeded its caps.
    pub warden: Option<WardenMetrics>,
}

/// Codebook, decoder trials and warden metrics for one blocklength. A
/// `warden_samples` of zero skips the warden analysis.
pub fn simulate(channel: &ChannelPair, opts: &SchemeOptions, trials: usize, warden_samples: usize, seed: u64) -> Result<SimulateOutcome> {
    let config = build_scheme(channel, &opts.rho, opts.n, opts.mu, &opts.schedule)?;
    config.require_decode_cap()?;
    let codebook = generate_codebooks(&config, child_seed(seed, 0));
    let error = simulate_error(channel, &config, &codebook, trials, child_seed(seed, 1))?;
    let warden = if warden_samples == 0 {
        None
    } else {
        match covertness_metrics(channel, &config, &codebook, warden_samples, child_seed(seed, 2)) {
            Ok(m) => Some(m),
            Err(Error::CapExceeded { .. }) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(SimulateOutcome { config, error, warden })
}

pub fn simulate_table(outcome: &SimulateOutcome, unit: Unit) -> Table {
    let users = outcome.config.users();
    let mut header = vec!["n".to_string(), "alpha".to_string()];
    header.extend(per_user("M", users));
    header.extend(per_user("L", users));
    header.extend(
        ["pe_hat", "ci95", "d_innocent", "d_innocent_se", "d_process", "d_process_se", "d_process_to_innocent", "identification_gap", "gap_envelope", "warden_exact"]
            .map(String::from),
    );
    let mut table = Table::new(header);
    let c = &outcome.config;
    let mut row = vec![c.n.to_string(), num(c.alpha)];
    row.extend(c.m.iter().map(|m| m.to_string()));
    row.extend(c.l.iter().map(|l| l.to_string()));
    row.push(num(outcome.error.pe_hat));
    row.push(num(outcome.error.ci95));
    let scale = unit.scale();
    match &outcome.warden {
        Some(w) => {
            for v in [w.d_innocent, w.d_innocent_se, w.d_process, w.d_process_se, w.d_process_to_innocent, w.identification_gap, w.gap_envelope] {
                row.push(num(v * scale));
            }
            row.push(w.exact.to_string());
        }
        None => row.extend(std::iter::repeat_n(String::new(), 8)),
    }
    table.rows.push(row);
    table
}

pub fn detect(channel: &ChannelPair, opts: &SchemeOptions, trials: usize, seed: u64, thresholds: &[f64]) -> Result<DetectionReport> {
    let config = build_scheme(channel, &opts.rho, opts.n, opts.mu, &opts.schedule)?;
    config.require_tuple_cap()?;
    let codebook = generate_codebooks(&config, child_seed(seed, 0));
    detection_tradeoff(channel, &config, &codebook, trials, child_seed(seed, 3), thresholds)
}

pub fn detect_table(report: &DetectionReport) -> Table {
    let mut table = Table::new(["threshold", "alpha_err", "beta_err", "total", "sigma", "bound_rhs", "bound_holds"].map(String::from).to_vec());
    for p in &report.points {
        table.rows.push(vec![
            num(p.threshold),
            num(p.alpha_err),
            num(p.beta_err),
            num(p.total()),
            num(p.sigma),
            num(p.bound_rhs),
            p.bound_holds.to_string(),
        ]);
    }
    table
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub alpha: f64,
    pub log_m_target: Vec<f64>,
    pub m: Vec<usize>,
    pub l: Vec<usize>,
    pub d_innocent: f64,
    pub d_innocent_se: f64,
    pub warden_exact: bool,
    /// `ln M_k / √(n · d_innocent)` with the rounded `M_k`.
    pub ratio: Vec<f64>,
    /// Boundary throughputs `√(2/χ) ρ_k D(P_k‖P_∅)`.
    pub target: Vec<f64>,
    pub error: ErrorEstimate,
}

/// Runs [`simulate`] along a ladder of blocklengths and normalizes the
/// message sizes by the measured covertness.
pub fn scaling(
    channel: &ChannelPair,
    opts: &SchemeOptions,
    ladder: &[usize],
    trials: usize,
    warden_samples: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if warden_samples == 0 {
        return Err(Error::InvalidParameter("scaling needs warden samples".into()));
    }
    let target = throughput_bound(channel, &opts.rho)?.r;
    let mut rows = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let run = simulate(channel, &SchemeOptions { n, ..opts.clone() }, trials, warden_samples, child_seed(seed, n as u64))?;
        let warden = run.warden.ok_or(Error::CapExceeded {
            what: "message/key tuples",
            value: run.config.log_tuples().exp(),
            cap: crate::coding::TUPLE_CAP,
        })?;
        let norm = (n as f64 * warden.d_innocent).sqrt();
        rows.push(ScalingRow {
            n,
            alpha: run.config.alpha,
            log_m_target: run.config.log_m.clone(),
            ratio: run.config.m.iter().map(|&m| (m as f64).ln() / norm).collect(),
            m: run.config.m,
            l: run.config.l,
            d_innocent: warden.d_innocent,
            d_innocent_se: warden.d_innocent_se,
            warden_exact: warden.exact,
            target: target.clone(),
            error: run.error,
        });
    }
    Ok(rows)
}

pub fn scaling_table(rows: &[ScalingRow]) -> Table {
    let users = rows.first().map_or(0, |r| r.m.len());
    let mut header = vec!["n".to_string(), "alpha".to_string()];
    header.extend(per_user("log_m", users));
    header.extend(per_user("M", users));
    header.extend(per_user("L", users));
    header.extend(["d_innocent", "d_innocent_se", "warden_exact"].map(String::from));
    header.extend(per_user("ratio", users));
    header.extend(per_user("r", users));
    header.extend(["pe_hat", "ci95"].map(String::from));
    let mut table = Table::new(header);
    for r in rows {
        let mut row = vec![r.n.to_string(), num(r.alpha)];
        row.extend(r.log_m_target.iter().map(|&v| num(v)));
        row.extend(r.m.iter().map(|v| v.to_string()));
        row.extend(r.l.iter().map(|v| v.to_string()));
        row.push(num(r.d_innocent));
        row.push(num(r.d_innocent_se));
        row.push(r.warden_exact.to_string());
        row.extend(r.ratio.iter().map(|&v| num(v)));
        row.extend(r.target.iter().map(|&v| num(v)));
        row.push(num(r.error.pe_hat));
        row.push(num(r.error.ci95));
        table.rows.push(row);
    }
    table
}
