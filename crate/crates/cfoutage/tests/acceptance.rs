//! Acceptance checks A1–A9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use cfoutage::core::igsum::{fit_inverse_gamma, CharGrid, IgComponent, IgMixture, QuadratureSpec};
use cfoutage::core::rateadapt::{empirical_outage, ks_distance};
use cfoutage::core::receiver::{
    combined_channel_stats, diagonality_ratio, unknown_covariance_matrix, CombinerKind,
};
use cfoutage::core::rng::{domain, substream};
use cfoutage::core::scenario::{DesiredUePreset, ScenarioConfig};
use cfoutage::core::sim::{adversarial_pair, Network, SimSettings};
use cfoutage::pipeline::{evaluate_drops, run_scenario, ScenarioRun};
use num_complex::Complex64;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::gamma_ur;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: &str, limit: Duration, start: Instant, outcome: Outcome) -> bool {
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = outcome.pass && in_time;
    let timing = if in_time { String::new() } else { format!(" [over {limit:?}]") };
    println!(
        "{id} {} {} ({:.1} s){timing}",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail,
        took.as_secs_f64()
    );
    pass
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn a1() -> Outcome {
    let mut rng = substream(101, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mu = log_uniform(&mut rng, 1e-6, 1e6);
        let v = mu * mu * log_uniform(&mut rng, 1e-3, 1e3);
        let (a, b) = fit_inverse_gamma(mu, v).unwrap();
        let c = IgComponent::new(a, b, 1.0).unwrap();
        worst = worst.max(((c.mean() - mu) / mu).abs()).max(((c.variance() - v) / v).abs());
    }
    Outcome { pass: worst <= 1e-12, detail: format!("max relative moment error {worst:.2e} (limit 1e-12)") }
}

fn a2() -> Outcome {
    let mut rng = substream(102, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (a, b, w) = (rng.gen_range(2.05..40.0), log_uniform(&mut rng, 1e-3, 1e3), log_uniform(&mut rng, 1e-4, 1e2));
        let grid = CharGrid::new(&IgMixture::single(IgComponent::new(a, b, w).unwrap()).unwrap(), &QuadratureSpec::default()).unwrap();
        let g = Gamma::new(a, 1.0).unwrap();
        let xs: Vec<f64> = (0..200).map(|i| w * b / g.inverse_cdf(1.0 - (0.001 + 0.998 * i as f64 / 199.0))).collect();
        let f = grid.cdf(&xs).unwrap();
        for (x, v) in xs.iter().zip(&f.values) {
            worst = worst.max((v - gamma_ur(a, w * b / x)).abs());
        }
    }
    Outcome { pass: worst <= 1e-4, detail: format!("max |F - Q| {worst:.2e} over 20 components (limit 1e-4)") }
}

fn a3() -> Outcome {
    const N: usize = 1_000_000;
    let mut rng = substream(103, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let c = IgComponent::new(rng.gen_range(2.1..20.0), log_uniform(&mut rng, 1e-2, 1e2), 1.0).unwrap();
        let xs: Vec<f64> = (0..N).map(|_| c.sample(&mut rng)).collect();
        for s in [0.1, 1.0, 10.0] {
            let t = s / c.beta;
            let (mut sc, mut ss, mut sc2, mut ss2) = (0.0, 0.0, 0.0, 0.0);
            for &x in &xs {
                let (sn, cs) = (t * x).sin_cos();
                sc += cs;
                ss += sn;
                sc2 += cs * cs;
                ss2 += sn * sn;
            }
            let n = N as f64;
            let mean = Complex64::new(sc / n, ss / n);
            let var = (sc2 / n - mean.re * mean.re) + (ss2 / n - mean.im * mean.im);
            let se = (var / n).sqrt();
            let phi = c.char(t).unwrap();
            worst = worst.max((phi - mean).norm() / se);
        }
    }
    Outcome { pass: worst <= 4.0, detail: format!("max |phi - MC| = {worst:.2} std errors (limit 4)") }
}

/// Upper bound on `sup |F − F_n|` from `F` evaluated at every `stride`-th
/// order statistic: between two such points both CDFs are monotone.
fn ks_upper_bound(sorted: &[f64], grid: &CharGrid, stride: usize) -> f64 {
    let n = sorted.len();
    let idx: Vec<usize> = (0..n).step_by(stride).chain(std::iter::once(n - 1)).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| sorted[i]).collect();
    let mut pts: Vec<(usize, f64)> = idx.into_iter().zip(xs).collect();
    pts.dedup_by(|a, b| a.1 == b.1);
    let xs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let f = grid.cdf(&xs).unwrap().values;
    let nf = n as f64;
    let mut d: f64 = f[0].max(((pts[0].0 + 1) as f64 / nf) - 0.0);
    for w in 0..pts.len() - 1 {
        let (i0, i1) = (pts[w].0, pts[w + 1].0);
        // on [x_i0, x_i1): F_n ∈ [(i0+1)/n, i1/n], F ∈ [f0, f1]
        d = d.max(f[w + 1] - (i0 + 1) as f64 / nf).max(i1 as f64 / nf - f[w]);
    }
    d.max(1.0 - f[f.len() - 1])
}

fn a4() -> Outcome {
    const N: usize = 1_000_000;
    let mut rng = substream(104, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let comps: Vec<IgComponent> = (0..3)
            .map(|_| IgComponent::new(rng.gen_range(2.1..15.0), log_uniform(&mut rng, 1e-2, 1e2), log_uniform(&mut rng, 1e-3, 1.0)).unwrap())
            .collect();
        let m = IgMixture::new(comps).unwrap();
        let grid = CharGrid::new(&m, &QuadratureSpec::default()).unwrap();
        let mut xs: Vec<f64> = (0..N).map(|_| m.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        worst = worst.max(ks_upper_bound(&xs, &grid, 250));
    }
    Outcome { pass: worst <= 0.005, detail: format!("max KS {worst:.4} over 4 mixtures (limit 0.005)") }
}

fn band(eps: f64, n: usize) -> f64 {
    (3.0 * (eps * (1.0 - eps) / n as f64).sqrt()).max(0.04)
}

const EPSILONS: [f64; 3] = [0.01, 0.05, 0.1];

fn a5(runs: &[(usize, DesiredUePreset, ScenarioRun)]) -> (Outcome, bool) {
    let mut pass = true;
    let mut cells = Vec::new();
    for (k_u, preset, run) in runs {
        let r = &run.runs[0];
        for eps in EPSILONS {
            let p = r.outcome.policy(eps).unwrap();
            let est = empirical_outage(p.threshold, &r.validation_sinr).unwrap();
            let ok = (est.outage - eps).abs() <= band(eps, est.n);
            pass &= ok;
            if !ok {
                cells.push(format!("K_u={k_u}/{}/eps={eps}: {:.4}", preset.name(), est.outage));
            }
        }
    }
    let detail = if cells.is_empty() {
        "all 12 cells inside max(0.04, 3 sigma)".to_string()
    } else {
        format!("{} of 12 cells outside max(0.04, 3 sigma): {}", cells.len(), cells.join(", "))
    };
    (Outcome { pass, detail }, pass)
}

fn a6(runs: &[(usize, DesiredUePreset, ScenarioRun)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (k_u, preset, run) in runs {
        let r = &run.runs[0];
        let ks = ks_distance(&r.validation_sinr, |t| r.outcome.sinr_cdf(t)).unwrap();
        parts.push(format!("K_u={k_u}/{}: {ks:.4}", preset.name()));
        worst = worst.max(ks);
    }
    Outcome { pass: worst <= 0.05, detail: format!("KS {} (limit 0.05)", parts.join(", ")) }
}

fn a7(runs: &[(usize, DesiredUePreset, ScenarioRun)], proposed_ok: bool) -> Outcome {
    let mut pass = proposed_ok;
    let mut parts = Vec::new();
    for preset in [DesiredUePreset::Center, DesiredUePreset::Edge] {
        let outage = |k: usize| {
            let (_, _, run) = runs.iter().find(|(ku, p, _)| *ku == k && *p == preset).unwrap();
            let r = &run.runs[0];
            empirical_outage(r.outcome.baseline(6.0).unwrap().threshold, &r.validation_sinr).unwrap().outage
        };
        let (lo, hi) = (outage(50), outage(100));
        let (a, b) = (lo.min(hi), lo.max(hi));
        let ok = b > 0.0 && b >= 2.0 * a;
        pass &= ok;
        parts.push(format!("{}: {lo:.4} vs {hi:.4}", preset.name()));
    }
    let note = if proposed_ok { "" } else { "; proposed outside the A5 band" };
    Outcome { pass, detail: format!("6 dB baseline outage K_u=50 vs 100: {}{note}", parts.join(", ")) }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

fn a8() -> Outcome {
    let settings = SimSettings { validation_drops: 400, ..SimSettings::default() };
    let run = run_scenario(&ScenarioConfig::default(), &settings, &[CombinerKind::Mr, CombinerKind::Rzf]).unwrap();
    let mr = median(&run.get(CombinerKind::Mr).unwrap().validation_sinr);
    let rzf = median(&run.get(CombinerKind::Rzf).unwrap().validation_sinr);
    Outcome {
        pass: rzf > mr,
        detail: format!("median SINR RZF {:.2} dB, MR {:.2} dB", 10.0 * rzf.log10(), 10.0 * mr.log10()),
    }
}

fn a9() -> Outcome {
    let c = ScenarioConfig::default();
    let s = SimSettings::default();
    let net = Network::new(&c).unwrap();
    let drops = evaluate_drops(&net, domain::VALIDATION_DROPS, 50, &[CombinerKind::Rzf], &s).unwrap();
    let mean = drops.iter().map(|d| diagonality_ratio(&unknown_covariance_matrix(&d[0]))).sum::<f64>() / drops.len() as f64;
    let adv = adversarial_pair(c.antennas, c.correlation);
    let st = combined_channel_stats(&adv, 0, &[CombinerKind::Rzf], s.n_mc, s.method, &mut substream(c.seed, domain::ORACLE, 0)).unwrap();
    let adv_ratio = diagonality_ratio(&unknown_covariance_matrix(&st[0]));
    Outcome {
        pass: mean <= 0.2 && adv_ratio > 0.2,
        detail: format!("RZF mean ratio {mean:.4} over 50 drops (limit 0.2), adversarial {adv_ratio:.4} (must exceed 0.2)"),
    }
}

fn main() {
    let mut all = true;
    let t = Instant::now();
    all &= report("A1", Duration::from_secs(1), t, a1());
    let t = Instant::now();
    all &= report("A2", Duration::from_secs(30), t, a2());
    let t = Instant::now();
    all &= report("A3", Duration::from_secs(30), t, a3());
    let t = Instant::now();
    all &= report("A4", Duration::from_secs(60), t, a4());

    let t = Instant::now();
    let settings = SimSettings::default();
    let mut runs = Vec::new();
    for k_u in [50, 100] {
        for preset in [DesiredUePreset::Center, DesiredUePreset::Edge] {
            let c = ScenarioConfig { unknown_interferers: k_u, desired_ue: preset, ..ScenarioConfig::default() };
            runs.push((k_u, preset, run_scenario(&c, &settings, &[CombinerKind::Rzf]).unwrap()));
        }
    }
    let (o5, proposed_ok) = a5(&runs);
    all &= report("A5", Duration::from_secs(600), t, o5);
    let t6 = Instant::now();
    all &= report("A6", Duration::from_secs(600), t6, a6(&runs));
    all &= report("A7", Duration::from_secs(600), t6, a7(&runs, proposed_ok));

    let t = Instant::now();
    all &= report("A8", Duration::from_secs(120), t, a8());
    let t = Instant::now();
    all &= report("A9", Duration::from_secs(120), t, a9());

    if !all {
        std::process::exit(1);
    }
}
