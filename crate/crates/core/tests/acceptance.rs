//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use covertmac::channel::random_channel;
use covertmac::coding::{generate_codebooks, Codebook, SchemeConfig, UserCodebook};
use covertmac::experiments::{scaling, SchemeOptions};
use covertmac::info::{covert_output, single_user_marginal, zeta_chi};
use covertmac::pmf::kl;
use covertmac::process::{kl_sandwich, mi_expansion_residual, AlphaSchedule};
use covertmac::region::{region_sweep, throughput_bound};
use covertmac::warden::{default_thresholds, detection_tradeoff, exact_metrics, per_symbol_marginals};
use covertmac::{ChannelPair, RhoVector, Side};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 200 channels cycling K = 1..4 with alphabets of 2 to 4 symbols and a
/// random mixing vector.
fn fuzz_set() -> Vec<(ChannelPair, RhoVector)> {
    (0..200u64)
        .map(|i| {
            let mut r = common::rng(1000 + i);
            let k = 1 + (i % 4) as usize;
            let y = r.random_range(2..=4);
            let z = r.random_range(2..=4);
            let ch = random_channel(k, y, z, i).unwrap();
            let rho = RhoVector::new(common::simplex(&mut r, k)).unwrap();
            (ch, rho)
        })
        .collect()
}

fn inclusion_exclusion() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (ch, rho) in fuzz_set() {
        for alpha in [0.01, 0.1, 0.5] {
            for side in [Side::Receiver, Side::Warden] {
                let out = covert_output(&ch, side, &rho, alpha).unwrap();
                let oracle = common::covert_output(&ch, side, rho.weights(), alpha);
                for ((d, ie), o) in out.direct.values().iter().zip(out.inclusion_exclusion.values()).zip(&oracle) {
                    worst = worst.max((d - ie).abs()).max((ie - o).abs());
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-12 && t < Duration::from_secs(5),
        format!("200 channels x 3 alphas, max |direct - inclusion-exclusion| = {worst:.1e}, {t:.2?}"),
    )
}

fn corollary() -> Outcome {
    let mut worst: f64 = 0.0;
    for (ch, rho) in fuzz_set() {
        for alpha in [0.01, 0.1, 0.5] {
            for k in 1..=ch.users() {
                let closed = single_user_marginal(&ch, Side::Warden, k, &rho, alpha).unwrap();
                let oracle = common::user_marginal(&ch, Side::Warden, k, rho.weights(), alpha);
                for (a, b) in closed.values().iter().zip(&oracle) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("single-user marginal vs enumeration on the same set, max diff {worst:.1e}"))
}

/// `Σ Q_∅ [(1+x) ln(1+x) − x]`, `x = (Q_α − Q_∅)/Q_∅`, from the enumerated `Q_α`.
fn reference_covert_kl(ch: &ChannelPair, rho: &[f64], alpha: f64) -> f64 {
    let q0 = ch.innocent(Side::Warden).values();
    // Q_α − Q_∅ accumulated from row differences to keep precision at small α
    let p: Vec<f64> = rho.iter().map(|r| r * alpha).collect();
    let mut diff = vec![0.0; q0.len()];
    for u in 1..ch.subsets() {
        let w = common::input_prob(&p, u);
        for (d, (a, b)) in diff.iter_mut().zip(ch.row(Side::Warden, u).values().iter().zip(q0)) {
            *d += w * (a - b);
        }
    }
    q0.iter().zip(&diff).map(|(q, d)| {
        let x = d / q;
        q * ((1.0 + x) * x.ln_1p() - x)
    }).sum()
}

fn sandwich() -> Outcome {
    let start = Instant::now();
    let alphas = [0.05, 0.01, 0.001];
    let mut fails = [0usize; 3];
    let mut band_fails = [0usize; 3];
    let mut worst_kl: f64 = 0.0;
    let mut worst_ratio = (1.0f64, 0.0f64);
    for seed in 0..100u64 {
        let k = 2 + (seed % 2) as usize;
        let ch = random_channel(k, 3, 3, seed).unwrap();
        let rho = RhoVector::uniform(k);
        let chi = zeta_chi(&ch, &rho, None).unwrap().chi;
        for (i, &alpha) in alphas.iter().enumerate() {
            let r = kl_sandwich(&ch, &rho, alpha).unwrap();
            let oracle = reference_covert_kl(&ch, rho.weights(), alpha);
            worst_kl = worst_kl.max((r.kl - oracle).abs() / oracle);
            if !r.holds {
                fails[i] += 1;
            }
            let ratio = oracle / (alpha * alpha * chi / 2.0);
            if (ratio - 1.0).abs() > alpha.sqrt() {
                band_fails[i] += 1;
                if (ratio - 1.0).abs() / alpha.sqrt() > (worst_ratio.0 - 1.0).abs() / worst_ratio.1.max(1e-300).sqrt() {
                    worst_ratio = (ratio, alpha);
                }
            }
        }
    }
    let t = start.elapsed();
    let pass = fails.iter().chain(&band_fails).all(|&f| f == 0) && worst_kl < 1e-9 && t < Duration::from_secs(5);
    outcome(
        pass,
        format!(
            "100 channels (K=2,3; 3x3): sandwich violations at alpha 0.05/0.01/0.001 = {fails:?}, chi-ratio band violations = {band_fails:?}, \
             worst ratio {:.3} at alpha {}, KL rel err vs reference {worst_kl:.1e}, {t:.2?}",
            worst_ratio.0, worst_ratio.1
        ),
    )
}

fn expansion() -> Outcome {
    let ladder = [0.04, 0.02, 0.01, 0.005];
    let (mut cases, mut fails, mut mi_err) = (0usize, 0usize, 0.0f64);
    let mut worst = 0.0f64;
    for k in [2usize, 3] {
        for seed in 0..50u64 {
            let ch = random_channel(k, 3, 3, seed).unwrap();
            let rho = RhoVector::uniform(k);
            for t in 1..ch.subsets() {
                let scaled: Vec<f64> = ladder
                    .iter()
                    .map(|&a| {
                        let e = mi_expansion_residual(&ch, Side::Warden, t, &rho, a).unwrap();
                        let oracle = common::mutual_information(&ch, Side::Warden, t, rho.weights(), a);
                        mi_err = mi_err.max((e.mi - oracle).abs());
                        e.residual / (a * a)
                    })
                    .collect();
                let same_sign = scaled.iter().all(|&v| v > 0.0) || scaled.iter().all(|&v| v < 0.0);
                let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
                let spread = if same_sign { hi / lo } else { f64::INFINITY };
                worst = worst.max(spread);
                cases += 1;
                if spread > 2.0 {
                    fails += 1;
                }
            }
        }
    }
    outcome(
        fails == 0 && mi_err < 1e-12,
        format!("{cases} (channel, T) pairs on 50 channels each of K=2,3: {fails} outside the factor-2 band (worst spread {worst:.3}), MI vs reference {mi_err:.1e}"),
    )
}

fn fixture() -> Outcome {
    let ch = common::e1();
    let rho = RhoVector::uniform(2);
    let chi = zeta_chi(&ch, &rho, None).unwrap().chi;
    // ζ = ((0.8 - 0.9) + (0.7 - 0.9))/2 per symbol, so χ = 0.15²/0.9 + 0.15²/0.1
    let chi_oracle = 0.15f64 * 0.15 / 0.9 + 0.15 * 0.15 / 0.1;
    let d1 = kl(ch.single(Side::Warden, 1), ch.innocent(Side::Warden)).unwrap();
    let d1_oracle = common::kl(&[0.8, 0.2], &[0.9, 0.1]);
    let q = covert_output(&ch, Side::Warden, &rho, 0.1).unwrap();
    let q_oracle = common::covert_output(&ch, Side::Warden, &[0.5, 0.5], 0.1);
    let q_err = q
        .direct
        .values()
        .iter()
        .chain(q.inclusion_exclusion.values())
        .zip(q_oracle.iter().chain(&q_oracle))
        .zip([0.885, 0.115, 0.885, 0.115])
        .map(|((a, o), lit)| (a - o).abs().max((a - lit).abs()))
        .fold(0.0, f64::max);
    let pass = (chi - 0.25).abs() <= 4.0 * f64::EPSILON
        && (chi - chi_oracle).abs() <= 4.0 * f64::EPSILON
        && (d1 - 0.044403).abs() < 1e-6
        && (d1 - d1_oracle).abs() < 1e-15
        && q_err < 1e-12;
    outcome(pass, format!("chi = {chi} (|chi - 1/4| = {:.1e}), D(Q1||Q0) = {d1:.6}, Q_alpha(0.1) = {:?}", (chi - 0.25).abs(), q.direct.values()))
}

/// Users 1 and 2 share rows on both sides.
fn symmetric_channel(seed: u64) -> ChannelPair {
    let mut r = common::rng(seed);
    let side = |r: &mut _, size| {
        let (q0, q1, q12) = (common::simplex(r, size), common::simplex(r, size), common::simplex(r, size));
        vec![q0, q1.clone(), q1, q12]
    };
    let receiver = side(&mut r, 3);
    let warden = side(&mut r, 3);
    ChannelPair::from_rows(receiver, warden).unwrap()
}

fn region_structure() -> Outcome {
    let mut line_dev: f64 = 0.0;
    for seed in 0..20 {
        let ch = symmetric_channel(seed);
        let d = common::kl(ch.single(Side::Receiver, 1).values(), ch.innocent(Side::Receiver).values());
        let sweep = region_sweep(&ch, 201, 0).unwrap();
        // χ is the same for every ρ: ζ = Q_1 − Q_∅
        let q0 = ch.innocent(Side::Warden).values();
        let q1 = ch.single(Side::Warden, 1).values();
        let chi: f64 = q0.iter().zip(q1).map(|(a, b)| (b - a) * (b - a) / a).sum();
        for p in &sweep.points {
            let line = (2.0 / chi).sqrt() * d;
            line_dev = line_dev.max((p.r[0] + p.r[1] - line).abs());
        }
    }
    let mut mismatches = 0;
    for seed in 0..1000u64 {
        let ch = random_channel(2, 3, 3, 50_000 + seed).unwrap();
        let p = throughput_bound(&ch, &RhoVector::uniform(2)).unwrap();
        for k in 1..=2 {
            let dp = common::kl(ch.single(Side::Receiver, k).values(), ch.innocent(Side::Receiver).values());
            let dq = common::kl(ch.single(Side::Warden, k).values(), ch.innocent(Side::Warden).values());
            if p.keyless[k - 1] != (dp > dq) {
                mismatches += 1;
            }
        }
    }
    outcome(
        line_dev < 1e-10 && mismatches == 0,
        format!("20 symmetric channels x 201 points: max deviation from time-sharing line {line_dev:.1e}; keyless flag mismatches on 1000 channels: {mismatches}"),
    )
}

fn random_words(r: &mut impl Rng, count: usize, n: usize, p: f64) -> Vec<Vec<u8>> {
    (0..count).map(|_| (0..n).map(|_| u8::from(r.random::<f64>() < p)).collect()).collect()
}

fn chain_bound() -> Outcome {
    let (mut instances, mut violations, mut max_gap_exact, mut worst_oracle) = (0, 0, 0.0f64, 0.0f64);
    let mut r = common::rng(7);
    for seed in 0..40u64 {
        let ch = random_channel(2, 2 + (seed % 2) as usize, 2 + (seed % 3) as usize, seed).unwrap();
        let n = 2 + (seed % 5) as usize;
        let (m1, m2) = (1 + r.random_range(0..4usize), 1 + r.random_range(0..4usize));
        let words = [random_words(&mut r, m1, n, 0.3), random_words(&mut r, m2, n, 0.3)];
        let cb = Codebook::from_users(n, vec![UserCodebook::from_words(m1, 1, &words[0]).unwrap(), UserCodebook::from_words(m2, 1, &words[1]).unwrap()]).unwrap();
        let cfg = SchemeConfig::with_counts(&ch, &RhoVector::uniform(2), n, 0.2, 0.1, vec![m1, m2], vec![1, 1]).unwrap();
        let exact = exact_metrics(&ch, &cfg, &cb).unwrap();
        let marg = per_symbol_marginals(&ch, &cb).unwrap();
        let oracle = common::induced_kl(&ch, &words);
        worst_oracle = worst_oracle.max((exact.d_innocent - oracle).abs());
        instances += 1;
        if marg.chain_lower > exact.d_innocent + 1e-12 {
            violations += 1;
        }
        if m1 == 1 && m2 == 1 {
            max_gap_exact = max_gap_exact.max((marg.chain_lower - exact.d_innocent).abs());
        }
    }
    // product case on every size up to n = 6
    for n in 1..=6usize {
        let ch = random_channel(2, 3, 3, 100 + n as u64).unwrap();
        let words = [random_words(&mut r, 1, n, 0.5), random_words(&mut r, 1, n, 0.5)];
        let cb = Codebook::from_users(n, vec![UserCodebook::from_words(1, 1, &words[0]).unwrap(), UserCodebook::from_words(1, 1, &words[1]).unwrap()]).unwrap();
        let cfg = SchemeConfig::with_counts(&ch, &RhoVector::uniform(2), n, 0.2, 0.1, vec![1, 1], vec![1, 1]).unwrap();
        let exact = exact_metrics(&ch, &cfg, &cb).unwrap();
        let marg = per_symbol_marginals(&ch, &cb).unwrap();
        max_gap_exact = max_gap_exact.max((marg.chain_lower - exact.d_innocent).abs());
        instances += 1;
    }
    outcome(
        violations == 0 && max_gap_exact <= 1e-12 && worst_oracle < 1e-12,
        format!("{instances} exact instances (n <= 6, K = 2): {violations} chain violations, product-case gap {max_gap_exact:.1e}, d_innocent vs enumeration {worst_oracle:.1e}"),
    )
}

fn detection() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for (i, (n, m, l)) in [(4usize, [2usize, 2], [2usize, 1]), (5, [3, 2], [1, 2]), (6, [2, 3], [2, 2]), (6, [4, 1], [1, 4])].into_iter().enumerate() {
        let ch = random_channel(2, 3, 3, 200 + i as u64).unwrap();
        let cfg = SchemeConfig::with_counts(&ch, &RhoVector::uniform(2), n, 0.25, 0.1, m.to_vec(), l.to_vec()).unwrap();
        let cb = generate_codebooks(&cfg, 300 + i as u64);
        let report = detection_tradeoff(&ch, &cfg, &cb, 50_000, 400 + i as u64, &default_thresholds()).unwrap();
        let min = report.minimum();
        let ok = min.total() >= report.bound_rhs - 3.0 * min.sigma && report.all_hold();
        pass &= ok;
        lines.push(format!("n={n} d={:.3} min(a+b)={:.4} >= {:.4}", report.d_innocent, min.total(), report.bound_rhs));
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(30);
    outcome(pass, format!("{}; {t:.2?}", lines.join("; ")))
}

fn square_root_trend() -> Outcome {
    let start = Instant::now();
    let ch = random_channel(2, 2, 2, 1).unwrap();
    let opts = SchemeOptions { n: 0, mu: 0.1, rho: RhoVector::uniform(2), schedule: AlphaSchedule::default() };
    let rows = match scaling(&ch, &opts, &[500, 1000, 2000, 4000], 10_000, 1000, 1) {
        Ok(rows) => rows,
        Err(e) => return outcome(false, format!("scaling failed: {e}")),
    };
    let t = start.elapsed();
    let pe: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.error.pe_hat)).collect();
    let trend_ok = rows.windows(2).all(|w| w[1].error.pe_hat <= w[0].error.pe_hat || w[1].error.interval.overlaps(&w[0].error.interval));
    let last = rows.last().unwrap();
    let factors: Vec<f64> = last.ratio.iter().zip(&last.target).map(|(x, r)| x / r).collect();
    let ratio_ok = factors.iter().all(|f| (0.3..=1.2).contains(f));
    outcome(
        trend_ok && ratio_ok && t < Duration::from_secs(600),
        format!(
            "seed-1 channel (K=2, 2x2), mu 0.1, alpha_n = n^(-2/3): pe_hat {pe:?} nonincreasing within CI: {trend_ok}; \
             ratio / r_k at n=4000 = [{:.3}, {:.3}] (d_innocent {:.3}); {t:.2?}",
            factors[0], factors[1], last.d_innocent
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let channel = dir.path().join("ch.json");
    std::fs::write(&channel, random_channel(2, 2, 2, 1).unwrap().to_json_string()).unwrap();
    let ch = channel.to_str().unwrap();
    let runs: [&[&str]; 4] = [
        &["region", "--channel", ch, "--grid", "201"],
        &["simulate", "--channel", ch, "--n", "1000", "--trials", "4000", "--warden-samples", "300", "--seed", "5"],
        &["detect", "--channel", ch, "--n", "6", "--trials", "20000", "--seed", "3"],
        &["scaling", "--channel", ch, "--ns", "200,400", "--trials", "2000", "--warden-samples", "100", "--seed", "2"],
    ];
    let mut differing = Vec::new();
    for args in runs {
        let outputs: Vec<Vec<u8>> = [("1", "a"), ("8", "b"), ("3", "c")]
            .iter()
            .map(|(threads, tag)| {
                let out = dir.path().join(format!("{}-{tag}.csv", args[0]));
                let status = Command::new(env!("CARGO_BIN_EXE_covertmac"))
                    .args(args)
                    .args(["--out", out.to_str().unwrap()])
                    .env("COVERTMAC_THREADS", threads)
                    .status()
                    .unwrap();
                assert!(status.success(), "{args:?}");
                std::fs::read(out).unwrap()
            })
            .collect();
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            differing.push(args[0]);
        }
    }
    outcome(differing.is_empty(), format!("region, simulate, detect, scaling at 1, 8 and 3 threads: differing artifacts {differing:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("inclusion-exclusion identity", inclusion_exclusion),
        ("single-user marginal", corollary),
        ("KL sandwich", sandwich),
        ("MI expansion residual", expansion),
        ("fixture values", fixture),
        ("region structure", region_structure),
        ("chain bound", chain_bound),
        ("detection bound", detection),
        ("square-root trend", square_root_trend),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
