//! Log-likelihood evaluation for finite-population self-exciting processes
//! and for stochastic SIR with observed recoveries.
//!
//! The self-exciting intensity at time `t` is
//! `lambda(t) = max(N - N_t, 0)/N * sum_{t_i < t} m_i^rho * phi(t - t_i)`
//! with `N_t` counting events strictly before `t`; an event therefore does
//! not excite itself, and the first event (at time 0, with zero background
//! rate) contributes no log-intensity term.
//!
//! Between consecutive events the population factor is constant, so the
//! compensator decomposes into per-segment masses. Exponential kernels use
//! an O(n) decay recursion; power-law and q-exponential kernels use their
//! closed-form antiderivatives with one power evaluation per event pair;
//! the remaining families integrate each segment by adaptive quadrature.

use serde::Serialize;

use crate::cascades::{Cascade, SirRealization};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, SirSpec};
use crate::quad;

/// Absolute tolerance for per-segment quadrature of the compensator.
const SEGMENT_QUAD_TOL: f64 = 1e-10;

/// Parameters of a finite-population self-exciting model.
///
/// `population` is a positive real: it is fitted as a continuous parameter
/// and only floored for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HawkesNParams {
    pub kernel: KernelSpec,
    pub population: f64,
    /// Mark warping exponent; 0 evaluates the unmarked model.
    pub rho: f64,
}

impl HawkesNParams {
    pub fn new(kernel: KernelSpec, population: f64, rho: f64) -> Result<Self> {
        let params = HawkesNParams { kernel, population, rho };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.population.is_finite() && self.population >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "population must be at least 1, got {}",
                self.population
            )));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be >= 0, got {}", self.rho)));
        }
        Ok(())
    }

    /// The equivalent SIR view of these parameters.
    pub fn sir_view(&self) -> SirSpec {
        let mut sir = self.kernel.to_sir(self.population);
        sir.rho = self.rho;
        sir
    }
}

/// A log-likelihood together with the number of events it scored.
///
/// `loglik` is negative infinity (never NaN) for configurations under which
/// the observed events are impossible, e.g. a population smaller than the
/// event count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodValue {
    pub loglik: f64,
    pub n_events: usize,
}

impl LikelihoodValue {
    pub fn per_event(&self) -> f64 {
        self.loglik / self.n_events.max(1) as f64
    }

    pub fn is_impossible(&self) -> bool {
        self.loglik == f64::NEG_INFINITY
    }
}

fn event_weights(cascade: &Cascade, rho: f64) -> Vec<f64> {
    if rho == 0.0 {
        vec![1.0; cascade.len()]
    } else {
        cascade.events().iter().map(|e| e.mark.powf(rho)).collect()
    }
}

/// Intensity of the model at time `t` given the cascade history.
pub fn hawkesn_intensity(params: &HawkesNParams, cascade: &Cascade, t: f64) -> f64 {
    let n_before = cascade.events().partition_point(|e| e.time < t);
    let factor = (params.population - n_before as f64).max(0.0) / params.population;
    if factor == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for e in &cascade.events()[..n_before] {
        let w = if params.rho == 0.0 { 1.0 } else { e.mark.powf(params.rho) };
        sum += w * params.kernel.phi(t - e.time);
    }
    factor * sum
}

/// Per-event log-intensities and per-segment compensator masses.
struct Decomposition {
    /// `ln lambda(t_j^-)` for `j >= 1`; index 0 is unused (kept 0).
    log_lambda: Vec<f64>,
    /// Compensator mass of each inter-event segment `(t_k, t_{k+1})`.
    increments: Vec<f64>,
    /// Compensator mass of the censoring segment `(t_{n-1}, upto]`.
    censor: f64,
}

fn population_factor(population: f64, events_before: usize) -> f64 {
    (population - events_before as f64).max(0.0) / population
}

fn decompose(params: &HawkesNParams, cascade: &Cascade, upto: Option<f64>) -> Result<Decomposition> {
    params.validate()?;
    let times: Vec<f64> = cascade.times().collect();
    let n = times.len();
    let last = times[n - 1];
    let upto = match upto {
        Some(t) => {
            if t < last {
                return Err(Error::Precondition(format!(
                    "upto = {t} lies before the last event at {last}"
                )));
            }
            t
        }
        None => last,
    };
    let weights = event_weights(cascade, params.rho);
    let kernel = &params.kernel;

    let mut out = Decomposition {
        log_lambda: vec![0.0; n],
        increments: vec![0.0; n.saturating_sub(1)],
        censor: 0.0,
    };

    match kernel.family {
        KernelFamily::Exp => {
            let kappa = kernel.kappa;
            let theta = kernel.theta;
            // decayed = sum_{i<j} w_i exp(-theta (t_j - t_i)), built recursively
            let mut decayed = 0.0;
            for j in 1..n {
                let dt = times[j] - times[j - 1];
                let decay = (-theta * dt).exp();
                // value at t_{j-1} once event j-1 joins the sum
                let b = decayed + weights[j - 1];
                decayed = b * decay;
                let factor = population_factor(params.population, j);
                out.log_lambda[j] = (factor * kappa * theta * decayed).ln();
                // segment (t_{j-1}, t_j): sum_{i<=j-1} w_i [Phi(t_j-t_i) - Phi(t_{j-1}-t_i)]
                out.increments[j - 1] = factor * kappa * b * -(-theta * dt).exp_m1();
            }
            let b_last = decayed + weights[n - 1];
            let censor_mass = if upto.is_infinite() {
                kappa * b_last
            } else {
                kappa * b_last * -(-theta * (upto - last)).exp_m1()
            };
            out.censor = population_factor(params.population, n) * censor_mass;
        }
        KernelFamily::PowerLaw | KernelFamily::QExp => {
            // One log/exp round per event pair yields both phi and Phi,
            // with the 1 - e^x differences kept in expm1 form.
            let c_off = kernel.c.unwrap_or(f64::NAN);
            let pl_head = if kernel.family == KernelFamily::PowerLaw {
                c_off.powf(-kernel.theta)
            } else {
                f64::NAN
            };
            let pair = |lag: f64| -> (f64, f64) {
                let th = kernel.theta;
                match kernel.family {
                    KernelFamily::PowerLaw => {
                        let log_u = (lag / c_off).ln_1p();
                        let em1 = (-th * log_u).exp_m1();
                        let phi = kernel.kappa * pl_head * (em1 + 1.0) / (lag + c_off);
                        let mass = kernel.kappa / th * pl_head * -em1;
                        (phi, mass)
                    }
                    KernelFamily::QExp => {
                        let u = 1.0 + (th - 1.0) * lag;
                        let log_u = u.ln();
                        let phi = kernel.kappa * (log_u / (1.0 - th)).exp();
                        let mass = if (th - 2.0).abs() < 1e-12 {
                            kernel.kappa * log_u
                        } else {
                            let expo = (2.0 - th) / (1.0 - th);
                            kernel.kappa / (2.0 - th) * -(expo * log_u).exp_m1()
                        };
                        (phi, mass)
                    }
                    _ => unreachable!(),
                }
            };
            let mut prev_mass_sum = 0.0;
            for j in 1..n {
                let mut phi_sum = 0.0;
                let mut mass_sum = 0.0;
                for i in 0..j {
                    let (phi, mass) = pair(times[j] - times[i]);
                    phi_sum += weights[i] * phi;
                    mass_sum += weights[i] * mass;
                }
                let factor = population_factor(params.population, j);
                out.log_lambda[j] = (factor * phi_sum).ln();
                out.increments[j - 1] = factor * (mass_sum - prev_mass_sum);
                prev_mass_sum = mass_sum; // Phi(0) = 0 for the new event
            }
            let censor_mass: f64 = (0..n)
                .map(|i| weights[i] * kernel.integral(last - times[i], upto - times[i]))
                .sum();
            out.censor = population_factor(params.population, n) * censor_mass;
        }
        _ => {
            // Linear / Quadratic / Gaussian: log terms directly, segment
            // masses by adaptive quadrature of the triggering sum.
            for j in 1..n {
                let phi_sum: f64 =
                    (0..j).map(|i| weights[i] * kernel.phi(times[j] - times[i])).sum();
                let factor = population_factor(params.population, j);
                out.log_lambda[j] = (factor * phi_sum).ln();
                let trig = |t: f64| -> f64 {
                    (0..j).map(|i| weights[i] * kernel.phi(t - times[i])).sum()
                };
                out.increments[j - 1] =
                    factor * quad::integrate(&trig, times[j - 1], times[j], SEGMENT_QUAD_TOL);
            }
            let censor_mass = if upto.is_infinite() {
                (0..n)
                    .map(|i| weights[i] * kernel.integral(last - times[i], f64::INFINITY))
                    .sum()
            } else {
                let trig =
                    |t: f64| -> f64 { (0..n).map(|i| weights[i] * kernel.phi(t - times[i])).sum() };
                quad::integrate(&trig, last, upto, SEGMENT_QUAD_TOL)
            };
            out.censor = population_factor(params.population, n) * censor_mass;
        }
    }

    // ln of a non-positive intensity is NaN; normalize to the -inf flag
    for v in &mut out.log_lambda {
        if v.is_nan() {
            *v = f64::NEG_INFINITY;
        }
    }
    Ok(out)
}

/// Log-likelihood of `cascade` under `params`, optionally censored at `upto`
/// (which must not precede the last event). The default integrates exactly
/// to the last event time.
pub fn hawkesn_loglik(
    params: &HawkesNParams,
    cascade: &Cascade,
    upto: Option<f64>,
) -> Result<LikelihoodValue> {
    let parts = decompose(params, cascade, upto)?;
    let log_sum: f64 = parts.log_lambda[1..].iter().sum();
    let compensator: f64 = parts.increments.iter().sum::<f64>() + parts.censor;
    let loglik = if log_sum == f64::NEG_INFINITY { f64::NEG_INFINITY } else { log_sum - compensator };
    Ok(LikelihoodValue { loglik, n_events: cascade.len() })
}

/// Compensator increments `Lambda(t_j) - Lambda(t_{j-1})` between consecutive
/// events; these are the rescaled inter-event intervals of the model.
pub fn hawkesn_compensator_increments(
    params: &HawkesNParams,
    cascade: &Cascade,
) -> Result<Vec<f64>> {
    Ok(decompose(params, cascade, None)?.increments)
}

/// Score the holdout tail of a cascade: events are split by count at
/// `ceil(split_fraction * n)`, and the remaining events are scored with the
/// intensity conditioned on the full history over `(t_split, t_last]`.
pub fn holdout_loglik(
    params: &HawkesNParams,
    cascade: &Cascade,
    split_fraction: f64,
) -> Result<LikelihoodValue> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::Precondition(format!(
            "split fraction must lie in (0, 1), got {split_fraction}"
        )));
    }
    let n = cascade.len();
    let k = (split_fraction * n as f64).ceil() as usize;
    if k < 2 || n - k < 2 {
        return Err(Error::Precondition(format!(
            "split at {k}/{n} leaves fewer than 2 events on one side"
        )));
    }
    let parts = decompose(params, cascade, None)?;
    let log_sum: f64 = parts.log_lambda[k..].iter().sum();
    let compensator: f64 = parts.increments[k - 1..].iter().sum();
    let loglik = if log_sum == f64::NEG_INFINITY { f64::NEG_INFINITY } else { log_sum - compensator };
    Ok(LikelihoodValue { loglik, n_events: n - k })
}

/// Piecewise-constant SIR intensity walk shared by the likelihood and the
/// residual computation.
struct SirDecomposition {
    log_lambda: Vec<f64>,
    increments: Vec<f64>,
    /// Compensator mass after the last infection, up to `upto`.
    tail: f64,
}

fn sir_decompose(sir: &SirSpec, real: &SirRealization, upto: Option<f64>) -> Result<SirDecomposition> {
    sir.validate()?;
    let n = real.len();
    let last_infection = real.infections()[n - 1].time;
    let upto = match upto {
        Some(t) => {
            if t < last_infection {
                return Err(Error::Precondition(format!(
                    "upto = {t} lies before the last infection at {last_infection}"
                )));
            }
            t
        }
        None => real
            .recoveries()
            .iter()
            .copied()
            .filter(|r| r.is_finite())
            .fold(last_infection, f64::max),
    };

    // Boundaries where the intensity jumps. At equal times the infection is
    // processed first so its left-limit intensity still sees the recovering
    // individual as infected.
    #[derive(Clone, Copy)]
    enum Kind {
        Infection,
        Recovery,
    }
    let mut boundaries: Vec<(f64, u8, Kind, f64)> = Vec::with_capacity(2 * n);
    for (i, e) in real.infections().iter().enumerate() {
        let w = if sir.rho == 0.0 { 1.0 } else { e.mark.powf(sir.rho) };
        boundaries.push((e.time, 0, Kind::Infection, w));
        let r = real.recoveries()[i];
        if r.is_finite() && r <= upto {
            boundaries.push((r, 1, Kind::Recovery, w));
        }
    }
    boundaries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let population = sir.population;
    let mut cumulative = 0.0_f64; // infections so far, as a real
    let mut active_weight = 0.0_f64;
    let mut seg_start = 0.0_f64;
    let mut acc = 0.0_f64;
    let mut infections_seen = 0usize;
    let mut log_lambda = vec![0.0; n];
    let mut increments = Vec::with_capacity(n - 1);

    let lambda_now = |cumulative: f64, active_weight: f64| -> f64 {
        sir.beta * (population - cumulative).max(0.0) / population * active_weight.max(0.0)
    };

    for (time, _, kind, w) in boundaries {
        let lambda = lambda_now(cumulative, active_weight);
        acc += lambda * (time - seg_start);
        seg_start = time;
        match kind {
            Kind::Infection => {
                if infections_seen >= 1 {
                    log_lambda[infections_seen] =
                        if lambda > 0.0 { lambda.ln() } else { f64::NEG_INFINITY };
                    increments.push(acc);
                }
                acc = 0.0;
                cumulative += 1.0;
                active_weight += w;
                infections_seen += 1;
            }
            Kind::Recovery => {
                active_weight -= w;
            }
        }
    }
    let lambda = lambda_now(cumulative, active_weight);
    let tail = acc + lambda * (upto - seg_start);

    Ok(SirDecomposition { log_lambda, increments, tail })
}

/// Log-likelihood of a fully observed SIR realization: infection log-rates
/// minus the infection compensator plus the recovery-time densities.
///
/// The realization's recovery pairings are treated as observed data even
/// past `upto` (the censoring time only truncates the intensity integral);
/// individuals that never recover (infinite recovery time) simply contribute
/// no density term.
pub fn sir_loglik(sir: &SirSpec, real: &SirRealization, upto: Option<f64>) -> Result<LikelihoodValue> {
    let parts = sir_decompose(sir, real, upto)?;
    let mut loglik = -(parts.increments.iter().sum::<f64>() + parts.tail);
    for &v in &parts.log_lambda[1..] {
        loglik += v;
    }
    for (e, &r) in real.infections().iter().zip(real.recoveries()) {
        if r.is_finite() {
            let density = sir.recovery.density(r - e.time);
            loglik += if density > 0.0 { density.ln() } else { f64::NEG_INFINITY };
        }
    }
    if loglik.is_nan() {
        loglik = f64::NEG_INFINITY;
    }
    Ok(LikelihoodValue { loglik, n_events: real.len() })
}

/// Rescaled intervals between infection events under the true SIR intensity
/// (recoveries observed).
pub fn sir_compensator_increments(sir: &SirSpec, real: &SirRealization) -> Result<Vec<f64>> {
    Ok(sir_decompose(sir, real, None)?.increments)
}
