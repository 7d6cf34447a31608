//! Time-rescaling residuals and goodness-of-fit tests.
//!
//! If events are generated by an intensity `lambda`, the compensator
//! increments between consecutive events are i.i.d. unit-rate exponential.
//! Three tests probe that proposition: Kolmogorov-Smirnov and excess
//! dispersion against the Exp(1) law, and Ljung-Box for independence of the
//! rescaled intervals. The KS distance doubles as a model-comparison metric.

use serde::Serialize;

use crate::cascades::{Cascade, SirRealization};
use crate::error::{Error, Result};
use crate::kernels::SirSpec;
use crate::likelihood::{
    hawkesn_compensator_increments, sir_compensator_increments, HawkesNParams,
};

/// Significance level used throughout the reporting pipeline.
pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;

/// Minimum KS-distance gap for declaring one model better than another.
pub const DEFAULT_KS_GAP: f64 = 0.05;

/// Rescaled inter-event intervals of one cascade under one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledIntervals {
    taus: Vec<f64>,
}

impl RescaledIntervals {
    pub fn new(taus: Vec<f64>) -> Self {
        RescaledIntervals { taus }
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.taus.iter().sum::<f64>() / self.taus.len().max(1) as f64
    }

    /// Total rescaled time, `Lambda(t_n) - Lambda(t_1)`.
    pub fn total(&self) -> f64 {
        self.taus.iter().sum()
    }
}

/// Rescale a cascade under fitted self-exciting parameters.
pub fn rescale(params: &HawkesNParams, cascade: &Cascade) -> Result<RescaledIntervals> {
    if cascade.len() < 3 {
        return Err(Error::Precondition(format!(
            "rescaling cascade {} needs at least 3 events, got {}",
            cascade.id,
            cascade.len()
        )));
    }
    Ok(RescaledIntervals::new(hawkesn_compensator_increments(params, cascade)?))
}

/// Rescale the infection times of a realization under the SIR intensity
/// with observed recoveries.
pub fn rescale_sir(sir: &SirSpec, real: &SirRealization) -> Result<RescaledIntervals> {
    if real.len() < 3 {
        return Err(Error::Precondition(format!(
            "rescaling a realization needs at least 3 infections, got {}",
            real.len()
        )));
    }
    Ok(RescaledIntervals::new(sir_compensator_increments(sir, real)?))
}

fn need(taus: &[f64], n: usize) -> Result<()> {
    if taus.len() < n {
        return Err(Error::InsufficientSample { need: n, got: taus.len() });
    }
    Ok(())
}

/// Survival function of the Kolmogorov distribution,
/// `Q(z) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 z^2)`,
/// using the theta-function inversion for small `z`.
pub fn kolmogorov_sf(z: f64) -> f64 {
    if z < 0.2 {
        return 1.0;
    }
    if z < 0.755 {
        let v = 1.0 / (z * z);
        let w = (2.0 * std::f64::consts::PI).sqrt();
        let c = std::f64::consts::PI * std::f64::consts::PI / 8.0;
        return 1.0 - w / z * ((-c * v).exp() + (-9.0 * c * v).exp() + (-25.0 * c * v).exp());
    }
    if z < 6.8116 {
        let v = z * z;
        let mut sum = 0.0;
        for j in 1..=4 {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * (-2.0 * (j * j) as f64 * v).exp();
        }
        return (2.0 * sum).clamp(0.0, 1.0);
    }
    0.0
}

/// One-sample KS test of the rescaled intervals against Exp(1).
///
/// Returns the exact sup-distance `D` over the order statistics and an
/// asymptotic p-value with the `sqrt(n) + 0.12 + 0.11/sqrt(n)` effective
/// sample-size correction.
pub fn ks_test(taus: &[f64]) -> Result<(f64, f64)> {
    need(taus, 5)?;
    let n = taus.len();
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &t) in sorted.iter().enumerate() {
        let u = -(-t).exp_m1(); // 1 - e^{-t}
        let above = (i + 1) as f64 / nf - u;
        let below = u - i as f64 / nf;
        d = d.max(above).max(below);
    }
    let z = d * (nf.sqrt() + 0.12 + 0.11 / nf.sqrt());
    Ok((d, kolmogorov_sf(z)))
}

/// Excess-dispersion test: under Exp(1) the intervals have unit variance,
/// and `sqrt(n/8) (s^2 - 1)` is asymptotically standard normal. Two-sided.
///
/// The test is insensitive to the mean: it probes dispersion only.
pub fn ed_test(taus: &[f64]) -> Result<(f64, f64)> {
    need(taus, 5)?;
    let n = taus.len() as f64;
    let mean = taus.iter().sum::<f64>() / n;
    let var = taus.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0);
    let stat = (n / 8.0).sqrt() * (var - 1.0);
    let p = statrs::function::erf::erfc(stat.abs() / std::f64::consts::SQRT_2);
    Ok((stat, p))
}

/// Number of Ljung-Box lags used by the reporting pipeline.
pub fn default_lags(n: usize) -> usize {
    (n / 5).clamp(1, 10)
}

/// Ljung-Box independence test on the rescaled intervals with `lags`
/// autocorrelation terms; the statistic is chi-square with `lags` degrees
/// of freedom under independence.
pub fn lb_test(taus: &[f64], lags: usize) -> Result<(f64, f64)> {
    if lags == 0 {
        return Err(Error::Precondition("Ljung-Box needs at least one lag".into()));
    }
    need(taus, lags + 1)?;
    let n = taus.len();
    let nf = n as f64;
    let mean = taus.iter().sum::<f64>() / nf;
    let denom: f64 = taus.iter().map(|t| (t - mean) * (t - mean)).sum();
    let mut q = 0.0;
    for k in 1..=lags {
        let num: f64 = (k..n).map(|t| (taus[t] - mean) * (taus[t - k] - mean)).sum();
        let rho = if denom > 0.0 { num / denom } else { 0.0 };
        q += rho * rho / (nf - k as f64);
    }
    q *= nf * (nf + 2.0);
    let p = statrs::function::gamma::gamma_ur(lags as f64 / 2.0, q / 2.0);
    Ok((q, p))
}

/// Per-test pass flags at a significance level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TestPasses {
    pub ks: bool,
    pub ed: bool,
    pub lb: bool,
}

/// Goodness-of-fit summary of one cascade under one model.
#[derive(Debug, Clone, Serialize)]
pub struct GofReport {
    pub n_taus: usize,
    pub ks_d: f64,
    pub ks_p: f64,
    pub ed_stat: f64,
    pub ed_p: f64,
    pub lb_q: f64,
    pub lb_p: f64,
    pub lags: usize,
}

impl GofReport {
    /// Run all three tests on the rescaled intervals.
    pub fn from_intervals(intervals: &RescaledIntervals) -> Result<GofReport> {
        let taus = intervals.taus();
        let (ks_d, ks_p) = ks_test(taus)?;
        let (ed_stat, ed_p) = ed_test(taus)?;
        let lags = default_lags(taus.len());
        let (lb_q, lb_p) = lb_test(taus, lags)?;
        Ok(GofReport { n_taus: taus.len(), ks_d, ks_p, ed_stat, ed_p, lb_q, lb_p, lags })
    }

    /// A test passes when its p-value exceeds the significance level
    /// (the Exp(1)/independence hypothesis is not rejected).
    pub fn pass_at(&self, level: f64) -> TestPasses {
        TestPasses { ks: self.ks_p > level, ed: self.ed_p > level, lb: self.lb_p > level }
    }
}

/// Rescale and test a cascade in one step.
pub fn gof_report(params: &HawkesNParams, cascade: &Cascade) -> Result<GofReport> {
    GofReport::from_intervals(&rescale(params, cascade)?)
}

/// Which of two fitted models explains a cascade better, by KS distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelComparison {
    FirstBetter,
    SecondBetter,
    /// The distance gap is below the decision threshold.
    Tie,
}

/// Compare two reports for the same cascade: the smaller KS distance wins
/// unless the gap is below `min_gap`.
pub fn compare_models(a: &GofReport, b: &GofReport, min_gap: f64) -> ModelComparison {
    let gap = (a.ks_d - b.ks_d).abs();
    if gap < min_gap {
        ModelComparison::Tie
    } else if a.ks_d < b.ks_d {
        ModelComparison::FirstBetter
    } else {
        ModelComparison::SecondBetter
    }
}
