//! Local combining at the serving APs, LSFD fusion at the CPU, and the
//! Monte Carlo statistics behind the SINR decomposition.
//!
//! `g_ki` is the `L_s`-vector `[√p_i v_k1^H h_i1, …]` of UE `i`'s
//! contribution to UE `k`'s locally combined signals.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, ChannelStatistics, Estimator, PSD_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{dot_h, hermitian_sqrt, matvec_into, norm_sq, quad_form, CMatrix, CVector, ZERO};

/// Relative slack before a negative variance is treated as a failure.
pub const VARIANCE_SLACK: f64 = 1e-9;

/// Smallest number of coherence blocks accepted for statistics.
pub const MIN_BLOCKS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerKind {
    Mr,
    Rzf,
}

impl CombinerKind {
    pub fn name(self) -> &'static str {
        match self {
            CombinerKind::Mr => "mr",
            CombinerKind::Rzf => "rzf",
        }
    }
}

/// How the per-block expectations are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsMethod {
    /// Samples the pilot signals only and averages the exact conditional
    /// moments of every channel given them. Same expectations as `Direct`
    /// with far lower variance.
    Conditional,
    /// Samples every channel and noise vector and averages `g g^H` literally.
    Direct,
    /// As `Direct`, but the APs use the true channels of the known UEs in
    /// place of estimates.
    PerfectCsi,
}

/// `ĥ / ‖ĥ‖²`.
pub fn mr_combiner(h_hat: &CVector) -> Result<CVector> {
    let e = norm_sq(h_hat.as_slice());
    if !(e >= 1e-300) {
        return Err(Error::DegenerateEstimate { norm_sq: e });
    }
    Ok(h_hat / Complex64::new(e, 0.0))
}

/// `(Σ_i p_i ĥ_i ĥ_i^H + σ² I)^{-1} p_k ĥ_k` over the known UEs' estimates at
/// one AP.
pub fn rzf_combiner(estimates: &[CVector], powers: &[f64], noise_power: f64, k: usize) -> Result<CVector> {
    if !(noise_power > 0.0) {
        return Err(Error::InvalidArgument { name: "noise power", value: noise_power });
    }
    let n = estimates[k].len();
    let mut a = CMatrix::identity(n, n) * Complex64::new(noise_power, 0.0);
    for (h, &p) in estimates.iter().zip(powers) {
        a.ger(Complex64::new(p, 0.0), h, &h.conjugate(), Complex64::new(1.0, 0.0));
    }
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite { what: "RZF Gram matrix", min_eigenvalue: f64::NAN })?;
    Ok(chol.solve(&(&estimates[k] * Complex64::new(powers[k], 0.0))))
}

fn combiner(kind: CombinerKind, estimates: &[CVector], powers: &[f64], noise_power: f64, k: usize) -> Result<CVector> {
    match kind {
        CombinerKind::Mr => mr_combiner(&estimates[k]),
        CombinerKind::Rzf => rzf_combiner(estimates, powers, noise_power, k),
    }
}

/// Expectations over fading for one drop, as seen from the desired UE.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedChannelStats {
    /// `E{g_kk}`.
    pub mean_g_kk: CVector,
    /// `E{g_ki g_ki^H}` for every known UE `i` (including `k`).
    pub second_moments: Vec<CMatrix>,
    /// `σ² E{‖v_kl‖²}`, the diagonal of the processed-noise covariance `F_k`.
    pub noise_diag: Vec<f64>,
    /// `Σ_{i∈D_u} E{g_ki g_ki^H}`. Simulator ground truth only.
    pub unknown: CMatrix,
    pub n_mc: usize,
}

impl CombinedChannelStats {
    fn zeros(aps: usize, known: usize) -> Self {
        Self {
            mean_g_kk: CVector::zeros(aps),
            second_moments: vec![CMatrix::zeros(aps, aps); known],
            noise_diag: vec![0.0; aps],
            unknown: CMatrix::zeros(aps, aps),
            n_mc: 0,
        }
    }

    fn scale(&mut self, s: f64) {
        let c = Complex64::new(s, 0.0);
        self.mean_g_kk *= c;
        self.second_moments.iter_mut().for_each(|m| *m *= c);
        self.noise_diag.iter_mut().for_each(|v| *v *= s);
        self.unknown *= c;
    }

    pub fn num_aps(&self) -> usize {
        self.mean_g_kk.len()
    }

    /// `Σ_{i∈D_n} E{g_ki g_ki^H}`.
    pub fn known_sum(&self) -> CMatrix {
        let l = self.num_aps();
        self.second_moments.iter().fold(CMatrix::zeros(l, l), |acc, m| acc + m)
    }

    /// Plain average of several drops' statistics, accumulated in slice order.
    pub fn average(items: &[Self]) -> Result<Self> {
        let first = items.first().ok_or(Error::InvalidArgument { name: "drop count", value: 0.0 })?;
        let mut out = Self::zeros(first.num_aps(), first.second_moments.len());
        for s in items {
            if s.num_aps() != out.num_aps() || s.second_moments.len() != out.second_moments.len() {
                return Err(Error::InvalidArgument { name: "statistics shape", value: s.num_aps() as f64 });
            }
            out.mean_g_kk += &s.mean_g_kk;
            for (a, b) in out.second_moments.iter_mut().zip(&s.second_moments) {
                *a += b;
            }
            for (a, b) in out.noise_diag.iter_mut().zip(&s.noise_diag) {
                *a += b;
            }
            out.unknown += &s.unknown;
            out.n_mc += s.n_mc;
        }
        out.scale(1.0 / items.len() as f64);
        Ok(out)
    }
}

fn add_outer(acc: &mut CMatrix, g: &[Complex64]) {
    let l = g.len();
    for c in 0..l {
        for r in 0..l {
            acc[(r, c)] += g[r] * g[c].conj();
        }
    }
}

/// Monte Carlo statistics over `n_mc` coherence blocks for UE `k`, one
/// result per requested combiner. All combiners see the same blocks.
pub fn combined_channel_stats<R: Rng + ?Sized>(
    stats: &ChannelStatistics,
    k: usize,
    combiners: &[CombinerKind],
    n_mc: usize,
    method: StatsMethod,
    rng: &mut R,
) -> Result<Vec<CombinedChannelStats>> {
    stats.validate()?;
    if n_mc < MIN_BLOCKS {
        return Err(Error::InvalidArgument { name: "n_mc", value: n_mc as f64 });
    }
    if !stats.is_known(k) {
        return Err(Error::InvalidArgument { name: "desired UE", value: k as f64 });
    }
    let mut out = match method {
        StatsMethod::Conditional => conditional_stats(stats, k, combiners, n_mc, rng)?,
        StatsMethod::Direct => direct_stats(stats, k, combiners, n_mc, false, rng)?,
        StatsMethod::PerfectCsi => direct_stats(stats, k, combiners, n_mc, true, rng)?,
    };
    for s in out.iter_mut() {
        s.n_mc = n_mc;
        s.scale(1.0 / n_mc as f64);
    }
    Ok(out)
}

struct ConditionalPrep {
    /// `L^H` for `Ψ_full = L L^H`, per `[t][j]`.
    upper: Vec<Vec<CMatrix>>,
    /// `√(τ_p p_i) R_ij Ψ_known^{-1} L`, per known `[i][j]`: `ĥ = map · w`.
    est_map: Vec<Vec<CMatrix>>,
    /// `p_i (R_ij − τ_p p_i R_ij Ψ_full^{-1} R_ij)`, per known `[i][j]`.
    known_var: Vec<Vec<CMatrix>>,
    /// Same, summed over the unknown UEs, per `j`.
    unknown_var: Vec<CMatrix>,
}

/// `out += p (R − τ_p p R Ψ^{-1} R)` given `L^{-1}` for `Ψ = L L^H`, using
/// `R Ψ^{-1} R = A^H A` with `A = L^{-1} R`.
fn add_error_covariance(out: &mut CMatrix, r: &CMatrix, p: f64, tau_p: usize, linv: &CMatrix, scratch: &mut [Complex64]) {
    let n = r.nrows();
    let (rd, ld) = (r.as_slice(), linv.as_slice());
    scratch.iter_mut().for_each(|x| *x = ZERO);
    for c in 0..n {
        let col = &mut scratch[c * n..(c + 1) * n];
        for k in 0..n {
            let x = rd[c * n + k];
            let lcol = &ld[k * n..(k + 1) * n];
            for m in k..n {
                col[m] += lcol[m] * x;
            }
        }
    }
    let gain = tau_p as f64 * p;
    let od = out.as_mut_slice();
    for b in 0..n {
        let cb = &scratch[b * n..(b + 1) * n];
        for a in 0..=b {
            let ca = &scratch[a * n..(a + 1) * n];
            let ab = dot_h(ca, cb);
            let v = (rd[b * n + a] - ab * gain) * p;
            if a == b {
                od[b * n + a] += Complex64::new(v.re, 0.0);
            } else {
                od[b * n + a] += v;
                od[a * n + b] += v.conj();
            }
        }
    }
}

fn prepare_conditional(stats: &ChannelStatistics) -> Result<ConditionalPrep> {
    let (aps, n, tau_p) = (stats.num_aps(), stats.antennas(), stats.tau_p);
    let not_pd = |what| Error::NotPositiveDefinite { what, min_eigenvalue: f64::NAN };
    let mut upper = vec![Vec::with_capacity(aps); tau_p];
    let mut lower = vec![Vec::with_capacity(aps); tau_p];
    let mut linv = vec![Vec::with_capacity(aps); tau_p];
    for t in 0..tau_p {
        for j in 0..aps {
            let l = stats.pilot_covariance(t, j, false).cholesky().ok_or(not_pd("pilot covariance"))?.unpack();
            let inv = l.solve_lower_triangular(&CMatrix::identity(n, n)).ok_or(not_pd("pilot covariance"))?;
            upper[t].push(l.adjoint());
            lower[t].push(l);
            linv[t].push(inv);
        }
    }
    let mut scratch = vec![ZERO; n * n];
    let mut est_map = vec![Vec::with_capacity(aps); stats.num_known];
    let mut known_var = vec![Vec::with_capacity(aps); stats.num_known];
    let mut unknown_var = Vec::with_capacity(aps);
    for j in 0..aps {
        let known_chol: Vec<_> = (0..tau_p)
            .map(|t| stats.pilot_covariance(t, j, true).cholesky().ok_or(not_pd("known pilot covariance")))
            .collect::<Result<_>>()?;
        for i in 0..stats.num_known {
            let t = stats.pilot_of[i];
            let r = &stats.r[i][j];
            let scale = Complex64::new((tau_p as f64 * stats.powers[i]).sqrt(), 0.0);
            let map = known_chol[t].solve(r).adjoint() * &lower[t][j] * scale;
            est_map[i].push(map);
            let mut c = CMatrix::zeros(n, n);
            add_error_covariance(&mut c, r, stats.powers[i], tau_p, &linv[t][j], &mut scratch);
            known_var[i].push(c);
        }
        let mut s = CMatrix::zeros(n, n);
        for i in stats.num_known..stats.num_ues() {
            if stats.powers[i] > 0.0 {
                let t = stats.pilot_of[i];
                add_error_covariance(&mut s, &stats.r[i][j], stats.powers[i], tau_p, &linv[t][j], &mut scratch);
            }
        }
        unknown_var.push(s);
    }
    Ok(ConditionalPrep { upper, est_map, known_var, unknown_var })
}

/// First column of `m` if `m` is exactly Hermitian Toeplitz.
fn toeplitz_column(m: &CMatrix) -> Option<Vec<Complex64>> {
    let n = m.nrows();
    for c in 0..n {
        for r in 0..n {
            let expect = if r >= c { m[(r - c, 0)] } else { m[(c - r, 0)].conj() };
            if m[(r, c)] != expect {
                return None;
            }
        }
    }
    Some((0..n).map(|r| m[(r, 0)]).collect())
}

/// `xc[d + N − 1] = Σ_{m−n=d} v_m^* z_n`, so that `v^H R z = Σ_d r(d) xc[d]`
/// for Toeplitz `R_mn = r(m − n)`.
fn cross_correlation(v: &[Complex64], z: &[Complex64], out: &mut [Complex64]) {
    let n = v.len();
    out.iter_mut().for_each(|o| *o = ZERO);
    for m in 0..n {
        let vm = v[m].conj();
        for (k, zk) in z.iter().enumerate() {
            out[m + n - 1 - k] += vm * zk;
        }
    }
}

/// `v^H R z` from `R`'s first column and [`cross_correlation`].
fn toeplitz_bilinear(first: &[Complex64], xc: &[Complex64]) -> Complex64 {
    let n = first.len();
    let mut acc = first[0] * xc[n - 1];
    for d in 1..n {
        acc += first[d] * xc[n - 1 + d] + first[d].conj() * xc[n - 1 - d];
    }
    acc
}

fn conditional_stats<R: Rng + ?Sized>(
    stats: &ChannelStatistics,
    k: usize,
    combiners: &[CombinerKind],
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<CombinedChannelStats>> {
    let (aps, n, tau_p, known, ues) = (stats.num_aps(), stats.antennas(), stats.tau_p, stats.num_known, stats.num_ues());
    let prep = prepare_conditional(stats)?;
    let mut acc: Vec<CombinedChannelStats> = combiners.iter().map(|_| CombinedChannelStats::zeros(aps, known)).collect();
    let active: Vec<usize> = (0..ues).filter(|&i| stats.powers[i] > 0.0).collect();
    // v^H E{h_ij | pilots} = √(τ_p p_i) v^H R_ij z_{t(i) j}; Toeplitz R take a
    // short path through the cross-correlation of v and z
    let columns: Vec<Vec<Option<Vec<Complex64>>>> =
        stats.r.iter().map(|row| row.iter().map(toeplitz_column).collect()).collect();
    let mut w = vec![vec![CVector::zeros(n); aps]; tau_p];
    let mut z = vec![vec![CVector::zeros(n); aps]; tau_p];
    let mut xc = vec![vec![vec![ZERO; 2 * n - 1]; aps]; tau_p];
    let mut scratch = vec![ZERO; n];
    let mut estimates = vec![vec![CVector::zeros(n); known]; aps];
    let mut g = vec![ZERO; aps];
    for _ in 0..n_mc {
        for t in 0..tau_p {
            for j in 0..aps {
                w[t][j] = complex_gaussian(n, rng);
                z[t][j].copy_from(&w[t][j]);
                if !prep.upper[t][j].solve_upper_triangular_mut(&mut z[t][j]) {
                    return Err(Error::NotPositiveDefinite { what: "pilot covariance", min_eigenvalue: 0.0 });
                }
            }
        }
        for j in 0..aps {
            for i in 0..known {
                let wt = &w[stats.pilot_of[i]][j];
                matvec_into(&prep.est_map[i][j], wt.as_slice(), estimates[j][i].as_mut_slice());
            }
        }
        for (c, &kind) in combiners.iter().enumerate() {
            let v: Vec<CVector> = (0..aps)
                .map(|j| combiner(kind, &estimates[j], &stats.powers[..known], stats.noise_power, k))
                .collect::<Result<_>>()?;
            for t in 0..tau_p {
                for j in 0..aps {
                    cross_correlation(v[j].as_slice(), z[t][j].as_slice(), &mut xc[t][j]);
                }
            }
            let a = &mut acc[c];
            for j in 0..aps {
                a.noise_diag[j] += stats.noise_power * v[j].norm_squared();
            }
            for &i in &active {
                let t = stats.pilot_of[i];
                let scale = Complex64::new(stats.powers[i] * (tau_p as f64).sqrt(), 0.0);
                for j in 0..aps {
                    let bilinear = match &columns[i][j] {
                        Some(first) => toeplitz_bilinear(first, &xc[t][j]),
                        None => {
                            matvec_into(&stats.r[i][j], z[t][j].as_slice(), &mut scratch);
                            dot_h(v[j].as_slice(), &scratch)
                        }
                    };
                    g[j] = scale * bilinear;
                }
                if i < known {
                    add_outer(&mut a.second_moments[i], &g);
                    if i == k {
                        for j in 0..aps {
                            a.mean_g_kk[j] += g[j];
                        }
                    }
                } else {
                    add_outer(&mut a.unknown, &g);
                }
            }
            for i in 0..known {
                for j in 0..aps {
                    a.second_moments[i][(j, j)] += quad_form(v[j].as_slice(), &prep.known_var[i][j]);
                }
            }
            if ues > known {
                for j in 0..aps {
                    a.unknown[(j, j)] += quad_form(v[j].as_slice(), &prep.unknown_var[j]);
                }
            }
        }
    }
    Ok(acc)
}

fn direct_stats<R: Rng + ?Sized>(
    stats: &ChannelStatistics,
    k: usize,
    combiners: &[CombinerKind],
    n_mc: usize,
    perfect: bool,
    rng: &mut R,
) -> Result<Vec<CombinedChannelStats>> {
    let (aps, n, tau_p, known, ues) = (stats.num_aps(), stats.antennas(), stats.tau_p, stats.num_known, stats.num_ues());
    let roots: Vec<Vec<CMatrix>> = stats
        .r
        .iter()
        .map(|row| row.iter().map(|r| hermitian_sqrt(r, PSD_TOLERANCE, "spatial correlation")).collect())
        .collect::<Result<_>>()?;
    let mut estimators = vec![Vec::with_capacity(known); aps];
    for j in 0..aps {
        for i in 0..known {
            let psi = stats.pilot_covariance(stats.pilot_of[i], j, true);
            estimators[j].push(Estimator::new(&stats.r[i][j], stats.powers[i], tau_p, &psi)?);
        }
    }
    let mut acc: Vec<CombinedChannelStats> = combiners.iter().map(|_| CombinedChannelStats::zeros(aps, known)).collect();
    let mut h = vec![vec![CVector::zeros(n); aps]; ues];
    let mut g = vec![ZERO; aps];
    let sigma = Complex64::new(stats.noise_power.sqrt(), 0.0);
    for _ in 0..n_mc {
        for i in 0..ues {
            for j in 0..aps {
                let w = complex_gaussian(n, rng);
                matvec_into(&roots[i][j], w.as_slice(), h[i][j].as_mut_slice());
            }
        }
        let mut estimates = vec![Vec::with_capacity(known); aps];
        for j in 0..aps {
            let mut y: Vec<CVector> = (0..tau_p).map(|_| complex_gaussian(n, rng) * sigma).collect();
            for i in 0..ues {
                let s = Complex64::new((tau_p as f64 * stats.powers[i]).sqrt(), 0.0);
                y[stats.pilot_of[i]].axpy(s, &h[i][j], Complex64::new(1.0, 0.0));
            }
            for i in 0..known {
                estimates[j].push(if perfect { h[i][j].clone() } else { estimators[j][i].estimate(&y[stats.pilot_of[i]]) });
            }
        }
        for (c, &kind) in combiners.iter().enumerate() {
            let v: Vec<CVector> = (0..aps)
                .map(|j| combiner(kind, &estimates[j], &stats.powers[..known], stats.noise_power, k))
                .collect::<Result<_>>()?;
            let a = &mut acc[c];
            for j in 0..aps {
                a.noise_diag[j] += stats.noise_power * v[j].norm_squared();
            }
            for i in 0..ues {
                let sp = Complex64::new(stats.powers[i].sqrt(), 0.0);
                for j in 0..aps {
                    g[j] = sp * v[j].dotc(&h[i][j]);
                }
                if i < known {
                    add_outer(&mut a.second_moments[i], &g);
                    if i == k {
                        for j in 0..aps {
                            a.mean_g_kk[j] += g[j];
                        }
                    }
                } else {
                    add_outer(&mut a.unknown, &g);
                }
            }
        }
    }
    Ok(acc)
}

/// `a_k = (Σ_{i∈D_n} E{g_ki g_ki^H} + F_k)^{-1} E{g_kk}`.
pub fn lsfd_weights(stats: &CombinedChannelStats) -> Result<CVector> {
    let mut m = stats.known_sum();
    for (j, &f) in stats.noise_diag.iter().enumerate() {
        m[(j, j)] += f;
    }
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let chol = m.cholesky().ok_or(Error::NotPositiveDefinite { what: "LSFD matrix", min_eigenvalue: f64::NAN })?;
    Ok(chol.solve(&stats.mean_g_kk))
}

/// Terms of the effective SINR `|DS|² / (IUI + IUSI + a^H F a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrDecomposition {
    pub a: CVector,
    /// `a^H E{g_kk}`.
    pub ds: Complex64,
    /// Known-UE interference plus self-interference (mW).
    pub iusi: f64,
    /// `a^H F_k a` (mW).
    pub noise_term: f64,
    /// `a^H (Σ_{i∈D_u} E{g_ki g_ki^H}) a` from the drop's own statistics (mW).
    pub iui_true: f64,
    /// `|a_l|²`.
    pub weights_sq: Vec<f64>,
}

impl SinrDecomposition {
    pub fn signal_power(&self) -> f64 {
        self.ds.norm_sqr()
    }

    /// SINR with the omniscient unknown-interference term.
    pub fn sinr(&self) -> f64 {
        self.signal_power() / (self.iui_true + self.iusi + self.noise_term)
    }

    /// SINR with unknown interference ignored.
    pub fn sinr_known_only(&self) -> f64 {
        self.signal_power() / (self.iusi + self.noise_term)
    }

    /// SINR for a given unknown-interference power.
    pub fn sinr_with(&self, iui: f64) -> f64 {
        self.signal_power() / (iui + self.iusi + self.noise_term)
    }
}

pub fn sinr_decomposition(stats: &CombinedChannelStats, a: &CVector) -> Result<SinrDecomposition> {
    if a.len() != stats.num_aps() {
        return Err(Error::InvalidArgument { name: "LSFD length", value: a.len() as f64 });
    }
    let ds = a.dotc(&stats.mean_g_kk);
    let total: f64 = stats.second_moments.iter().map(|m| quad_form(a.as_slice(), m)).sum();
    let mut iusi = total - ds.norm_sqr();
    if iusi < 0.0 {
        if iusi < -VARIANCE_SLACK * total.abs() {
            return Err(Error::NegativeVariance { what: "IUSI", value: iusi });
        }
        iusi = 0.0;
    }
    let noise_term: f64 = a.iter().zip(&stats.noise_diag).map(|(c, f)| c.norm_sqr() * f).sum();
    let iui_true = quad_form(a.as_slice(), &stats.unknown).max(0.0);
    Ok(SinrDecomposition {
        a: a.clone(),
        ds,
        iusi,
        noise_term,
        iui_true,
        weights_sq: a.iter().map(|c| c.norm_sqr()).collect(),
    })
}

/// Per-AP unknown interference power `Σ_{i∈D_u} p_i E{|v_kl^H h_il|²}`.
pub fn per_ap_unknown_power(stats: &CombinedChannelStats) -> Vec<f64> {
    (0..stats.num_aps()).map(|j| stats.unknown[(j, j)].re).collect()
}

/// `Σ_{i∈D_u} E{g_ki g_ki^H}`.
pub fn unknown_covariance_matrix(stats: &CombinedChannelStats) -> CMatrix {
    stats.unknown.clone()
}

/// `max_{l≠m} |Σ_lm| / min_l Σ_ll`; zero when there are no off-diagonal
/// entries or they all vanish.
pub fn diagonality_ratio(m: &CMatrix) -> f64 {
    let l = m.nrows();
    let mut off: f64 = 0.0;
    for r in 0..l {
        for c in 0..l {
            if r != c {
                off = off.max(m[(r, c)].norm());
            }
        }
    }
    if off == 0.0 {
        return 0.0;
    }
    let diag = (0..l).map(|j| m[(j, j)].re).fold(f64::INFINITY, f64::min);
    if diag > 0.0 {
        off / diag
    } else {
        f64::INFINITY
    }
}

/// Relative gap `|a^H Σ a − Σ_l |a_l|² Σ_ll| / a^H Σ a` between the full
/// unknown interference and its diagonal approximation.
pub fn diagonal_gap(a: &CVector, m: &CMatrix) -> f64 {
    let full = quad_form(a.as_slice(), m);
    let diag: f64 = a.iter().enumerate().map(|(j, c)| c.norm_sqr() * m[(j, j)].re).sum();
    if full == 0.0 {
        return if diag == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (full - diag).abs() / full
}

/// `(τ_u/τ_c) log2(1 + SINR)`.
pub fn se_from_sinr(sinr: f64, tau_u: usize, tau_c: usize) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(Error::InvalidArgument { name: "sinr", value: sinr });
    }
    if tau_c == 0 || tau_u > tau_c {
        return Err(Error::InvalidArgument { name: "tau_u", value: tau_u as f64 });
    }
    Ok(tau_u as f64 / tau_c as f64 * libm::log2(1.0 + sinr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{correlation_matrix, CorrelationModel};
    use crate::linalg::min_eigenvalue;
    use crate::rng::substream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ident(n: usize, beta: f64) -> CMatrix {
        CMatrix::identity(n, n) * c(beta, 0.0)
    }

    /// UEs given as (per-AP correlation matrices, power, pilot).
    fn synthetic(ues: Vec<(Vec<CMatrix>, f64, usize)>, known: usize, tau_p: usize, sigma2: f64) -> ChannelStatistics {
        ChannelStatistics {
            powers: ues.iter().map(|u| u.1).collect(),
            pilot_of: ues.iter().map(|u| u.2).collect(),
            r: ues.into_iter().map(|u| u.0).collect(),
            num_known: known,
            tau_p,
            noise_power: sigma2,
        }
    }

    #[test]
    fn mr_identities() {
        let e1 = CVector::from_vec(vec![c(1.0, 0.0), ZERO, ZERO]);
        assert_eq!(mr_combiner(&e1).unwrap(), e1);
        let h = CVector::from_vec(vec![c(0.3, -1.0), c(2.0, 0.5), c(-0.7, 0.1)]);
        let v = mr_combiner(&h).unwrap();
        assert!((v.dotc(&h) - c(1.0, 0.0)).norm() < 1e-15);
        let s = c(-2.0, 3.0);
        let vs = mr_combiner(&(&h * s)).unwrap();
        assert!((vs - &v / s.conj()).norm() < 1e-15);
        assert!(matches!(mr_combiner(&CVector::zeros(3)), Err(Error::DegenerateEstimate { .. })));
    }

    #[test]
    fn rzf_scalar_limit_and_two_by_two() {
        let (p, sigma2, z) = (0.2, 0.3, c(1.5, -0.5));
        let h = CVector::from_vec(vec![z, ZERO]);
        let v = rzf_combiner(&[h.clone()], &[p], sigma2, 0).unwrap();
        let expect = z * p / (p * z.norm_sqr() + sigma2);
        assert!((v[0] - expect).norm() < 1e-15 && v[1].norm() < 1e-15);

        let h2 = CVector::from_vec(vec![c(0.2, 0.1), c(-1.0, 0.4)]);
        let hk = CVector::from_vec(vec![c(0.7, -0.3), c(0.1, 0.9)]);
        let big = 1e9;
        let v = rzf_combiner(&[hk.clone(), h2.clone()], &[p, 0.5], big, 0).unwrap();
        let mr = &hk * c(p / big, 0.0);
        assert!((&v - &mr).norm() < 1e-8 * mr.norm());

        // hand inverse of [[a, b], [b*, d]]
        let (p1, p2) = (0.4, 0.9);
        let outer = |h: &CVector, p: f64| h * h.adjoint() * c(p, 0.0);
        let m = outer(&hk, p1) + outer(&h2, p2) + ident(2, sigma2);
        let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        let det = a * d - b * b.conj();
        let rhs = &hk * c(p1, 0.0);
        let x0 = (d * rhs[0] - b * rhs[1]) / det;
        let x1 = (-b.conj() * rhs[0] + a * rhs[1]) / det;
        let v = rzf_combiner(&[hk.clone(), h2.clone()], &[p1, p2], sigma2, 0).unwrap();
        assert!((v[0] - x0).norm() < 1e-13 && (v[1] - x1).norm() < 1e-13);
    }

    #[test]
    fn rejects_too_few_blocks_and_unknown_desired() {
        let s = synthetic(vec![(vec![ident(2, 1.0)], 0.1, 0), (vec![ident(2, 1.0)], 0.1, 0)], 1, 1, 0.1);
        let mut rng = substream(1, 0, 0);
        assert!(combined_channel_stats(&s, 0, &[CombinerKind::Mr], 99, StatsMethod::Conditional, &mut rng).is_err());
        assert!(combined_channel_stats(&s, 1, &[CombinerKind::Mr], 100, StatsMethod::Conditional, &mut rng).is_err());
    }

    #[test]
    fn mr_desired_gain_mean_is_sqrt_power() {
        let (p, n_mc) = (0.1, 4000);
        let r = correlation_matrix(&[0.0, 0.0], &[20.0, 5.0], 1e-3, 8, CorrelationModel::default());
        let s = synthetic(vec![(vec![r], p, 0)], 1, 1, 1e-4);
        for method in [StatsMethod::Conditional, StatsMethod::Direct] {
            let st = &combined_channel_stats(&s, 0, &[CombinerKind::Mr], n_mc, method, &mut substream(2, 0, 0)).unwrap()[0];
            let var = st.second_moments[0][(0, 0)].re - st.mean_g_kk[0].norm_sqr();
            let se = (var.max(0.0) / n_mc as f64).sqrt();
            assert!((st.mean_g_kk[0] - c(p.sqrt(), 0.0)).norm() <= 4.0 * se + 1e-12, "{method:?}");
        }
    }

    #[test]
    fn known_power_doubling_scales_second_moment() {
        let r0 = correlation_matrix(&[0.0, 0.0], &[20.0, 5.0], 1e-3, 4, CorrelationModel::default());
        let r1 = correlation_matrix(&[0.0, 0.0], &[-9.0, 5.0], 4e-4, 4, CorrelationModel::default());
        let build = |p1: f64| synthetic(vec![(vec![r0.clone()], 0.1, 0), (vec![r1.clone()], p1, 1)], 2, 2, 1e-4);
        let run = |p1: f64| {
            combined_channel_stats(&build(p1), 0, &[CombinerKind::Mr], 200, StatsMethod::Direct, &mut substream(3, 0, 0)).unwrap()
        };
        let (a, b) = (&run(0.1)[0], &run(0.2)[0]);
        assert!((&b.second_moments[1] - &a.second_moments[1] * c(2.0, 0.0)).norm() < 1e-12 * b.second_moments[1].norm());
        assert_eq!(a.mean_g_kk, b.mean_g_kk);
    }

    #[test]
    fn unknown_power_doubling_and_quadratic_form_oracle() {
        let n = 4;
        let beta_u = 2e-4;
        let known = vec![ident(n, 1e-3), ident(n, 1e-3)];
        let unknown = vec![ident(n, beta_u), ident(n, beta_u)];
        let sigma2 = 1e-4;
        let build = |pu: f64| {
            synthetic(vec![(known.clone(), 0.1, 0), (vec![ident(n, 5e-4); 2], 0.1, 1), (unknown.clone(), pu, 1)], 2, 2, sigma2)
        };
        let run = |pu: f64, method, n_mc| {
            combined_channel_stats(&build(pu), 0, &[CombinerKind::Mr], n_mc, method, &mut substream(4, 0, 0)).unwrap().remove(0)
        };
        let (a, b) = (run(0.1, StatsMethod::Direct, 200), run(0.2, StatsMethod::Direct, 200));
        let (pa, pb) = (per_ap_unknown_power(&a), per_ap_unknown_power(&b));
        for j in 0..2 {
            assert!((pb[j] - 2.0 * pa[j]).abs() < 1e-12 * pb[j]);
        }
        // v is independent of the unknown UE, so E|v^H h|² = β E‖v‖² = β F_jj/σ²
        for method in [StatsMethod::Conditional, StatsMethod::Direct] {
            let st = run(0.1, method, 4000);
            let pw = per_ap_unknown_power(&st);
            for j in 0..2 {
                let oracle = 0.1 * beta_u * st.noise_diag[j] / sigma2;
                assert!((pw[j] - oracle).abs() < 0.05 * oracle, "{method:?} {} {}", pw[j], oracle);
            }
        }
        let empty = synthetic(vec![(known.clone(), 0.1, 0)], 1, 1, sigma2);
        let st = combined_channel_stats(&empty, 0, &[CombinerKind::Mr], 100, StatsMethod::Conditional, &mut substream(4, 0, 0)).unwrap();
        assert!(per_ap_unknown_power(&st[0]).iter().all(|&v| v == 0.0));
        assert_eq!(unknown_covariance_matrix(&st[0]), CMatrix::zeros(2, 2));
        assert_eq!(diagonality_ratio(&st[0].unknown), 0.0);
    }

    fn contaminated_cluster() -> ChannelStatistics {
        let n = 8;
        let aps = [[0.0, 0.0], [150.0, 40.0], [60.0, -120.0]];
        let ue = |pos: [f64; 2], beta: [f64; 3]| -> Vec<CMatrix> {
            (0..3).map(|j| correlation_matrix(&aps[j], &pos, beta[j], n, CorrelationModel::default())).collect()
        };
        synthetic(
            vec![
                (ue([30.0, 10.0], [1e-3, 2e-4, 3e-4]), 0.1, 0),
                (ue([100.0, -50.0], [2e-4, 6e-4, 9e-4]), 0.1, 1),
                (ue([10.0, 90.0], [5e-4, 3e-4, 1e-4]), 0.1, 0),
                (ue([500.0, 0.0], [1e-5, 4e-5, 2e-5]), 0.1, 0),
                (ue([-300.0, -400.0], [3e-5, 1e-5, 4e-5]), 0.1, 1),
            ],
            3,
            2,
            2e-5,
        )
    }

    #[test]
    fn conditional_and_direct_routes_agree() {
        let s = contaminated_cluster();
        let kinds = [CombinerKind::Mr, CombinerKind::Rzf];
        let cond = combined_channel_stats(&s, 0, &kinds, 20_000, StatsMethod::Conditional, &mut substream(5, 0, 0)).unwrap();
        let direct = combined_channel_stats(&s, 0, &kinds, 20_000, StatsMethod::Direct, &mut substream(6, 0, 0)).unwrap();
        for (a, b) in cond.iter().zip(&direct) {
            let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
            assert!((&a.mean_g_kk - &b.mean_g_kk).norm() < 0.02 * b.mean_g_kk.norm());
            for (x, y) in a.second_moments.iter().zip(&b.second_moments) {
                assert!((x - y).norm() < 0.05 * y.norm());
            }
            assert!((&a.unknown - &b.unknown).norm() < 0.05 * b.unknown.norm());
            for (x, y) in a.noise_diag.iter().zip(&b.noise_diag) {
                assert!(rel(*x, *y) < 0.03);
            }
            let (da, db) = (
                sinr_decomposition(a, &lsfd_weights(a).unwrap()).unwrap(),
                sinr_decomposition(b, &lsfd_weights(b).unwrap()).unwrap(),
            );
            assert!(rel(da.sinr(), db.sinr()) < 0.03);
        }
    }

    #[test]
    fn second_moments_hermitian_psd() {
        let s = contaminated_cluster();
        for method in [StatsMethod::Conditional, StatsMethod::Direct] {
            for st in combined_channel_stats(&s, 0, &[CombinerKind::Mr, CombinerKind::Rzf], 200, method, &mut substream(7, 0, 0)).unwrap() {
                for m in st.second_moments.iter().chain([&st.unknown]) {
                    assert!((m - m.adjoint()).norm() <= 1e-12 * m.norm());
                    assert!(min_eigenvalue(m) >= -1e-9 * m.trace().re);
                }
                assert!(st.noise_diag.iter().all(|&f| f > 0.0));
            }
        }
    }

    #[test]
    fn rzf_beats_mr_under_contamination() {
        let s = contaminated_cluster();
        let st = combined_channel_stats(&s, 0, &[CombinerKind::Mr, CombinerKind::Rzf], 2000, StatsMethod::Conditional, &mut substream(8, 0, 0)).unwrap();
        let sinr = |x: &CombinedChannelStats| sinr_decomposition(x, &lsfd_weights(x).unwrap()).unwrap().sinr();
        assert!(sinr(&st[1]) > sinr(&st[0]));
    }

    fn hand_stats() -> CombinedChannelStats {
        let m1 = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.25), c(0.5, -0.25), c(1.0, 0.0)]);
        let m2 = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(-0.1, 0.0), c(-0.1, 0.0), c(0.6, 0.0)]);
        CombinedChannelStats {
            mean_g_kk: CVector::from_vec(vec![c(1.0, 0.2), c(0.4, -0.1)]),
            second_moments: vec![m1, m2],
            noise_diag: vec![0.2, 0.5],
            unknown: CMatrix::from_row_slice(2, 2, &[c(0.4, 0.0), c(0.05, 0.02), c(0.05, -0.02), c(0.3, 0.0)]),
            n_mc: 100,
        }
    }

    #[test]
    fn lsfd_matches_hand_solve() {
        let st = hand_stats();
        // M = m1 + m2 + diag(F) = [[2.5, 0.4+0.25i], [0.4−0.25i, 2.1]]
        let (a, b, d) = (c(2.5, 0.0), c(0.4, 0.25), c(2.1, 0.0));
        let det = a * d - b * b.conj();
        let e = &st.mean_g_kk;
        let x0 = (d * e[0] - b * e[1]) / det;
        let x1 = (-b.conj() * e[0] + a * e[1]) / det;
        let w = lsfd_weights(&st).unwrap();
        assert!((w[0] - x0).norm() < 1e-14 && (w[1] - x1).norm() < 1e-14);
    }

    #[test]
    fn single_ap_lsfd_is_positive_multiple() {
        let st = CombinedChannelStats {
            mean_g_kk: CVector::from_vec(vec![c(0.3, -0.4)]),
            second_moments: vec![CMatrix::from_element(1, 1, c(0.5, 0.0))],
            noise_diag: vec![0.1],
            unknown: CMatrix::zeros(1, 1),
            n_mc: 100,
        };
        let a = lsfd_weights(&st).unwrap();
        let ratio = a[0] / st.mean_g_kk[0];
        assert!(ratio.re > 0.0 && ratio.im.abs() < 1e-15);
        let d1 = sinr_decomposition(&st, &a).unwrap();
        let d2 = sinr_decomposition(&st, &(&a * c(17.0, 0.0))).unwrap();
        assert!((d1.sinr() - d2.sinr()).abs() < 1e-12 * d1.sinr());
    }

    #[test]
    fn sinr_invariances() {
        let st = hand_stats();
        let a = lsfd_weights(&st).unwrap();
        let d = sinr_decomposition(&st, &a).unwrap();
        let direct = d.ds.norm_sqr()
            / (quad_form(a.as_slice(), &st.unknown)
                + st.second_moments.iter().map(|m| quad_form(a.as_slice(), m)).sum::<f64>()
                - d.ds.norm_sqr()
                + a.iter().zip(&st.noise_diag).map(|(x, f)| x.norm_sqr() * f).sum::<f64>());
        assert!((d.sinr() - direct).abs() < 1e-12 * direct);
        let rotated = sinr_decomposition(&st, &(&a * c(-0.3, 2.2))).unwrap();
        assert!((rotated.sinr() - d.sinr()).abs() < 1e-12 * d.sinr());
        let mut scaled = st.clone();
        scaled.scale(7.5);
        scaled.mean_g_kk = &st.mean_g_kk * c(7.5f64.sqrt(), 0.0);
        let ds = sinr_decomposition(&scaled, &lsfd_weights(&scaled).unwrap()).unwrap();
        assert!((ds.sinr() - d.sinr()).abs() < 1e-12 * d.sinr());
        assert_eq!(d.weights_sq.len(), 2);
        assert!(d.iui_true > 0.0 && d.iusi >= 0.0 && d.noise_term > 0.0);
    }

    #[test]
    fn negative_iusi_is_reported() {
        let mut st = hand_stats();
        st.second_moments = vec![CMatrix::identity(2, 2) * c(1e-3, 0.0)];
        assert!(matches!(sinr_decomposition(&st, &lsfd_weights(&st).unwrap()), Err(Error::NegativeVariance { .. })));
    }

    #[test]
    fn no_unknown_means_no_unknown_term() {
        let s = synthetic(vec![(vec![ident(4, 1e-3), ident(4, 2e-4)], 0.1, 0), (vec![ident(4, 3e-4), ident(4, 1e-3)], 0.1, 1)], 2, 2, 1e-4);
        let st = &combined_channel_stats(&s, 0, &[CombinerKind::Rzf], 100, StatsMethod::Conditional, &mut substream(9, 0, 0)).unwrap()[0];
        let d = sinr_decomposition(st, &lsfd_weights(st).unwrap()).unwrap();
        assert_eq!(d.iui_true, 0.0);
        assert_eq!(d.sinr(), d.sinr_known_only());
    }

    #[test]
    fn perfect_csi_mr_has_no_self_interference() {
        let r = correlation_matrix(&[0.0, 0.0], &[7.0, 3.0], 1e-3, 8, CorrelationModel::default());
        let s = synthetic(vec![(vec![r], 0.1, 0)], 1, 1, 1e-4);
        let st = &combined_channel_stats(&s, 0, &[CombinerKind::Mr], 500, StatsMethod::PerfectCsi, &mut substream(10, 0, 0)).unwrap()[0];
        let d = sinr_decomposition(st, &lsfd_weights(st).unwrap()).unwrap();
        assert!(d.iusi <= 1e-9 * d.signal_power());
    }

    #[test]
    fn adversarial_layout_breaks_diagonality() {
        // one unknown UE as strong as the desired UE, equidistant from two
        // APs and on the desired pilot
        let n = 16;
        let (pos_k, pos_u) = ([0.0, 50.0], [0.0, -50.0]);
        let aps = [[-60.0, 0.0], [60.0, 0.0]];
        let ue = |pos: [f64; 2]| -> Vec<CMatrix> {
            aps.iter().map(|ap| correlation_matrix(ap, &pos, 1e-3, n, CorrelationModel::default())).collect()
        };
        let s = synthetic(vec![(ue(pos_k), 0.1, 0), (ue(pos_u), 0.1, 0)], 1, 1, 1e-5);
        let st = &combined_channel_stats(&s, 0, &[CombinerKind::Mr], 400, StatsMethod::Conditional, &mut substream(11, 0, 0)).unwrap()[0];
        let m = unknown_covariance_matrix(st);
        assert!(diagonality_ratio(&m) > 0.2, "{}", diagonality_ratio(&m));
        assert!((&m - m.adjoint()).norm() < 1e-12 * m.norm());
        assert!(min_eigenvalue(&m) > -1e-9 * m.trace().re);
    }

    #[test]
    fn spectral_efficiency() {
        assert_eq!(se_from_sinr(0.0, 190, 200).unwrap(), 0.0);
        assert!((se_from_sinr(1.0, 190, 200).unwrap() - 0.95).abs() < 1e-15);
        assert!((se_from_sinr(3.0, 190, 200).unwrap() - 1.9).abs() < 1e-15);
        assert!(se_from_sinr(-1.0, 190, 200).is_err());
    }

    #[test]
    fn averaging_is_plain_mean() {
        let a = hand_stats();
        let mut b = hand_stats();
        b.scale(3.0);
        let avg = CombinedChannelStats::average(&[a.clone(), b]).unwrap();
        let mut expect = a;
        expect.scale(2.0);
        assert!((&avg.unknown - &expect.unknown).norm() < 1e-15);
        assert_eq!(avg.n_mc, 200);
        assert!(CombinedChannelStats::average(&[]).is_err());
    }
}
