//! The five experiments and the files they emit.

use std::path::{Path, PathBuf};

use cfoutage_core::igsum::{CharGrid, IgComponent, IgMixture};
use cfoutage_core::rateadapt::{empirical_outage, ks_distance, ApFit, OutagePolicy};
use cfoutage_core::receiver::{
    combined_channel_stats, diagonal_gap, diagonality_ratio, lsfd_weights, unknown_covariance_matrix, CombinerKind,
};
use cfoutage_core::rng::{domain, substream};
use cfoutage_core::scenario::DesiredUePreset;
use cfoutage_core::sim::{adversarial_pair, Network};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::gamma_ur;

use crate::config::{Experiment, ExperimentSpec};
use crate::error::AppError;
use crate::output::{num, write_csv, write_json, Provenance};
use crate::pipeline::{evaluate_drops, run_scenario};

/// Files written and one-line findings for the console.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

pub fn run(spec: &ExperimentSpec, out: &Path) -> Result<Report, AppError> {
    spec.validate()?;
    let prov = Provenance { config_hash: spec.hash(), seed: spec.scenario.seed };
    let mut report = Report::default();
    match spec.experiment {
        Experiment::ScenarioDump => scenario_dump(spec, &prov, out, &mut report)?,
        Experiment::SinrCdf => sinr_cdf(spec, &prov, out, &mut report)?,
        Experiment::OutageCurve => outage_curve(spec, &prov, out, &mut report)?,
        Experiment::OracleCheck => oracle_check(spec, &prov, out, &mut report)?,
        Experiment::DiagCovariance => diag_covariance(spec, &prov, out, &mut report)?,
    }
    Ok(report)
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn scenario_dump(spec: &ExperimentSpec, prov: &Provenance, out: &Path, report: &mut Report) -> Result<(), AppError> {
    let mut rows = Vec::new();
    for (k_u, preset) in spec.cells() {
        let net = Network::new(&spec.scenario_for(k_u, preset))?;
        let g = net.geometry();
        let mut push = |kind: &str, i: usize, p: &[f64; 2], serving: bool| {
            rows.push(vec![
                k_u.to_string(),
                preset.name().to_string(),
                kind.to_string(),
                i.to_string(),
                num(p[0]),
                num(p[1]),
                (serving as u8).to_string(),
            ]);
        };
        for (i, p) in g.ap_positions.iter().enumerate() {
            push("ap", i, p, g.serving_set.contains(&i));
        }
        for (i, p) in g.known_ue_positions.iter().enumerate() {
            push(if i == g.desired_ue_index { "desired_ue" } else { "known_ue" }, i, p, false);
        }
        let drop = net.drop_at(domain::FIT_DROPS, 0)?;
        for (i, p) in drop.unknown_positions.iter().enumerate() {
            push("unknown_ue", i, p, false);
        }
    }
    let path = out.join("geometry.csv");
    write_csv(&path, prov, &["k_u", "preset", "kind", "index", "x_m", "y_m", "serving"], &rows)?;
    report.files.push(path);
    Ok(())
}

fn sinr_cdf(spec: &ExperimentSpec, prov: &Provenance, out: &Path, report: &mut Report) -> Result<(), AppError> {
    const POINTS: usize = 241;
    let combiners = [CombinerKind::Mr, CombinerKind::Rzf];
    let mut rows = Vec::new();
    for (k_u, preset) in spec.cells() {
        let run = run_scenario(&spec.scenario_for(k_u, preset), &spec.sim, &combiners)?;
        let all_db = run.runs.iter().flat_map(|r| r.validation_sinr.iter().map(|&s| db(s)));
        let (lo, hi) = all_db.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let (lo, hi) = (lo.floor() - 3.0, hi.ceil() + 3.0);
        for r in &run.runs {
            let mut sorted = r.validation_sinr.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len() as f64;
            for i in 0..POINTS {
                let x_db = lo + (hi - lo) * i as f64 / (POINTS - 1) as f64;
                let t = 10f64.powf(x_db / 10.0);
                let analytic = r.outcome.sinr_cdf(t)?;
                let mc = sorted.partition_point(|&s| s <= t) as f64 / n;
                rows.push(vec![
                    k_u.to_string(),
                    preset.name().into(),
                    r.combiner.name().into(),
                    num(x_db),
                    num(analytic),
                    num(mc),
                ]);
            }
            let ks = ks_distance(&r.validation_sinr, |s| r.outcome.sinr_cdf(s))?;
            let median = sorted[sorted.len() / 2];
            report.notes.push(format!(
                "K_u={k_u} {} {}: KS={ks:.4} median SINR {:.2} dB",
                preset.name(),
                r.combiner.name(),
                db(median)
            ));
        }
    }
    let path = out.join("sinr_cdf.csv");
    write_csv(&path, prov, &["k_u", "preset", "combiner", "sinr_db", "cdf_analytic", "cdf_montecarlo"], &rows)?;
    report.files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct PolicyRecord<'a> {
    k_u: usize,
    preset: DesiredUePreset,
    combiner: CombinerKind,
    signal_power: f64,
    iusi: f64,
    noise_term: f64,
    /// LSFD weights as `[re, im]`.
    lsfd: Vec<[f64; 2]>,
    per_ap: &'a [ApFit],
    policies: Vec<PolicyRow>,
}

#[derive(Serialize)]
struct PolicyRow {
    #[serde(flatten)]
    policy: OutagePolicy,
    achieved_outage: f64,
    ci_lo: f64,
    ci_hi: f64,
}

#[derive(Serialize)]
struct PolicyFile<'a> {
    provenance: &'a Provenance,
    scenarios: Vec<PolicyRecord<'a>>,
}

fn outage_curve(spec: &ExperimentSpec, prov: &Provenance, out: &Path, report: &mut Report) -> Result<(), AppError> {
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (k_u, preset) in spec.cells() {
        let run = run_scenario(&spec.scenario_for(k_u, preset), &spec.sim, &[spec.combiner])?;
        runs.push((k_u, preset, run));
    }
    let mut records = Vec::new();
    for (k_u, preset, run) in &runs {
        let r = &run.runs[0];
        let o = &r.outcome;
        let mut policies = Vec::new();
        for &eps in &spec.epsilon_list {
            policies.push(o.policy(eps)?);
        }
        for &m in &spec.margins_db {
            policies.push(o.baseline(m)?);
        }
        let mut prs = Vec::new();
        for p in policies {
            let est = empirical_outage(p.threshold, &r.validation_sinr)?;
            rows.push(vec![
                k_u.to_string(),
                preset.name().into(),
                r.combiner.name().into(),
                p.method.name().into(),
                p.epsilon.map(num).unwrap_or_default(),
                p.margin_db.map(num).unwrap_or_default(),
                num(db(p.threshold)),
                num(p.se),
                num(est.outage),
                num(est.ci_lo),
                num(est.ci_hi),
            ]);
            if let Some(eps) = p.epsilon {
                report.notes.push(format!(
                    "K_u={k_u} {}: target {eps} achieved {:.4} [{:.4}, {:.4}] SE {:.3}",
                    preset.name(),
                    est.outage,
                    est.ci_lo,
                    est.ci_hi,
                    p.se
                ));
            }
            prs.push(PolicyRow { policy: p, achieved_outage: est.outage, ci_lo: est.ci_lo, ci_hi: est.ci_hi });
        }
        let d = &o.decomposition;
        records.push(PolicyRecord {
            k_u: *k_u,
            preset: *preset,
            combiner: r.combiner,
            signal_power: d.signal_power(),
            iusi: d.iusi,
            noise_term: d.noise_term,
            lsfd: d.a.iter().map(|c| [c.re, c.im]).collect(),
            per_ap: &o.fits,
            policies: prs,
        });
    }
    let path = out.join("outage_curve.csv");
    let header = [
        "k_u",
        "preset",
        "combiner",
        "method",
        "epsilon",
        "margin_db",
        "threshold_db",
        "se",
        "achieved_outage",
        "ci_lo",
        "ci_hi",
    ];
    write_csv(&path, prov, &header, &rows)?;
    report.files.push(path);
    let path = out.join("policy.json");
    write_json(&path, &PolicyFile { provenance: prov, scenarios: records })?;
    report.files.push(path);
    Ok(())
}

fn oracle_check(spec: &ExperimentSpec, prov: &Provenance, out: &Path, report: &mut Report) -> Result<(), AppError> {
    let o = spec.oracle;
    let comp = IgComponent::new(o.alpha, o.beta, o.weight)?;
    let grid = CharGrid::new(&IgMixture::single(comp)?, &spec.sim.quadrature)?;
    let gamma = Gamma::new(o.alpha, 1.0).map_err(|e| AppError::Config(format!("oracle: {e}")))?;
    let scale = o.weight * o.beta;
    // F(x) = Q(α, wβ/x), so the p-quantile is wβ / P^{-1}(α, 1 − p)
    let mut xs: Vec<f64> = (0..o.points)
        .map(|i| {
            let p = 0.001 + 0.998 * i as f64 / (o.points - 1) as f64;
            scale / gamma.inverse_cdf(1.0 - p)
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let f = grid.cdf(&xs)?;
    let mut worst: f64 = 0.0;
    let rows: Vec<Vec<String>> = xs
        .iter()
        .zip(&f.values)
        .map(|(&x, &v)| {
            let exact = gamma_ur(o.alpha, scale / x);
            worst = worst.max((v - exact).abs());
            vec![num(x), num(v), num(exact), num((v - exact).abs())]
        })
        .collect();
    let path = out.join("oracle_check.csv");
    write_csv(&path, prov, &["x", "F_gilpelaez", "F_oracle", "abs_diff"], &rows)?;
    report.files.push(path);
    report.notes.push(format!("max |F - Q| = {worst:e} (tolerance {:e})", o.tolerance));
    if !(worst <= o.tolerance) {
        return Err(AppError::Acceptance(format!("max |F - Q| = {worst:e} exceeds {:e}", o.tolerance)));
    }
    Ok(())
}

fn diag_covariance(spec: &ExperimentSpec, prov: &Provenance, out: &Path, report: &mut Report) -> Result<(), AppError> {
    let mut rows = Vec::new();
    let combiner = spec.combiner;
    for (k_u, preset) in spec.cells() {
        let net = Network::new(&spec.scenario_for(k_u, preset))?;
        let drops = evaluate_drops(&net, domain::VALIDATION_DROPS, spec.diag_drops, &[combiner], &spec.sim)?;
        let mut total = 0.0;
        for (i, d) in drops.iter().enumerate() {
            let m = unknown_covariance_matrix(&d[0]);
            let ratio = diagonality_ratio(&m);
            let gap = diagonal_gap(&lsfd_weights(&d[0])?, &m);
            total += ratio;
            rows.push(vec![
                k_u.to_string(),
                preset.name().into(),
                combiner.name().into(),
                "default".into(),
                i.to_string(),
                num(ratio),
                num(gap),
            ]);
        }
        report.notes.push(format!(
            "K_u={k_u} {}: mean diagonality ratio {:.4} over {} drops",
            preset.name(),
            total / drops.len() as f64,
            drops.len()
        ));
    }
    let s = adversarial_pair(spec.scenario.antennas, spec.scenario.correlation);
    let mut rng = substream(spec.scenario.seed, domain::ORACLE, 0);
    let st = &combined_channel_stats(&s, 0, &[combiner], spec.sim.n_mc, spec.sim.method, &mut rng)?[0];
    let m = unknown_covariance_matrix(st);
    let ratio = diagonality_ratio(&m);
    rows.push(vec![
        String::new(),
        String::new(),
        combiner.name().into(),
        "adversarial".into(),
        "0".into(),
        num(ratio),
        num(diagonal_gap(&lsfd_weights(st)?, &m)),
    ]);
    report.notes.push(format!("adversarial layout: diagonality ratio {ratio:.4}"));
    let path = out.join("diag_covariance.csv");
    write_csv(&path, prov, &["k_u", "preset", "combiner", "layout", "drop", "ratio", "diagonal_gap"], &rows)?;
    report.files.push(path);
    Ok(())
}
