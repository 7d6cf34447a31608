//! Parametric kernel families and their induced recovery distributions.
//!
//! A triggering kernel `phi(t)` describes the rate at which one infection
//! event generates descendants at lag `t`. For monotone non-increasing
//! kernels the same object can be read as a scaled survival function of a
//! recovery time: `phi(t) = beta * P[recovery time > t]` with
//! `beta = phi(0)`. That identity induces, per family, a recovery density
//! `f(t) = -phi'(t)/phi(0)` and a recovery hazard `h(t) = -phi'(t)/phi(t)`,
//! all available here in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Follower-count power-law exponent used when marked quantities are
/// requested without an explicit value.
pub const DEFAULT_MARK_EXPONENT: f64 = 2.016;

/// The six supported kernel shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Linear,
    Quadratic,
    Gaussian,
    QExp,
    Exp,
    #[serde(alias = "pl", alias = "power-law")]
    PowerLaw,
}

impl KernelFamily {
    /// Canonical lowercase token used in CSV/JSON output.
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelFamily::Linear => "linear",
            KernelFamily::Quadratic => "quadratic",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::QExp => "qexp",
            KernelFamily::Exp => "exp",
            KernelFamily::PowerLaw => "powerlaw",
        }
    }

    /// Whether the family carries the extra offset parameter `c`.
    pub fn has_offset(&self) -> bool {
        matches!(self, KernelFamily::PowerLaw)
    }

    pub const ALL: [KernelFamily; 6] = [
        KernelFamily::Linear,
        KernelFamily::Quadratic,
        KernelFamily::Gaussian,
        KernelFamily::QExp,
        KernelFamily::Exp,
        KernelFamily::PowerLaw,
    ];
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelFamily::Linear),
            "quadratic" => Ok(KernelFamily::Quadratic),
            "gaussian" => Ok(KernelFamily::Gaussian),
            "qexp" | "q-exp" | "qexponential" => Ok(KernelFamily::QExp),
            "exp" | "exponential" => Ok(KernelFamily::Exp),
            "powerlaw" | "power-law" | "pl" => Ok(KernelFamily::PowerLaw),
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel family '{other}'"
            ))),
        }
    }
}

/// A parametric kernel `phi(t)` with scale `kappa`, shape `theta` and, for
/// the power-law family only, offset `c`.
///
/// Constraints: `kappa > 0`, `theta > 0` (`theta > 1` for `QExp`), `c > 0`.
/// The kernel is monotone non-increasing on its support and zero outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub kappa: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl KernelSpec {
    /// Build a kernel from any family, validating the parameter domain.
    pub fn with_params(family: KernelFamily, kappa: f64, theta: f64, c: Option<f64>) -> Result<Self> {
        let spec = KernelSpec { family, kappa, theta, c };
        spec.validate()?;
        Ok(spec)
    }

    /// Build a kernel for a family without the offset parameter.
    pub fn new(family: KernelFamily, kappa: f64, theta: f64) -> Result<Self> {
        Self::with_params(family, kappa, theta, None)
    }

    /// Build a power-law kernel `kappa * (t + c)^{-(1+theta)}`.
    pub fn power_law(kappa: f64, theta: f64, c: f64) -> Result<Self> {
        Self::with_params(KernelFamily::PowerLaw, kappa, theta, Some(c))
    }

    /// Check the parameter-domain constraints.
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be a positive real, got {}",
                self.kappa
            )));
        }
        let theta_min = if self.family == KernelFamily::QExp { 1.0 } else { 0.0 };
        if !(self.theta.is_finite() && self.theta > theta_min) {
            return Err(Error::InvalidParameter(format!(
                "theta must be > {theta_min} for the {} family, got {}",
                self.family, self.theta
            )));
        }
        match (self.family.has_offset(), self.c) {
            (true, Some(c)) if c.is_finite() && c > 0.0 => Ok(()),
            (true, _) => Err(Error::InvalidParameter(format!(
                "power-law kernels need a positive offset c, got {:?}",
                self.c
            ))),
            (false, Some(_)) => Err(Error::InvalidParameter(format!(
                "family {} does not take an offset c",
                self.family
            ))),
            (false, None) => Ok(()),
        }
    }

    fn offset(&self) -> f64 {
        self.c.unwrap_or(f64::NAN)
    }

    /// Upper end of the kernel support; infinite for unbounded families.
    pub fn support_end(&self) -> f64 {
        match self.family {
            KernelFamily::Linear => 1.0 / self.theta,
            KernelFamily::Quadratic => 2.0 / self.theta,
            _ => f64::INFINITY,
        }
    }

    /// Kernel value `phi(t)`; zero outside the support.
    pub fn phi(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.support_end() {
            return 0.0;
        }
        let th = self.theta;
        match self.family {
            KernelFamily::Linear => self.kappa * (1.0 - th * t),
            KernelFamily::Quadratic => {
                let base = 1.0 - 0.5 * th * t;
                self.kappa * base * base
            }
            KernelFamily::Gaussian => self.kappa * (-t * t / (2.0 * th * th)).exp(),
            KernelFamily::QExp => self.kappa * (1.0 + (th - 1.0) * t).powf(1.0 / (1.0 - th)),
            KernelFamily::Exp => self.kappa * th * (-th * t).exp(),
            KernelFamily::PowerLaw => self.kappa * (t + self.offset()).powf(-(1.0 + th)),
        }
    }

    /// `phi(0)`, the infection rate `beta` of the matching SIR process.
    pub fn rate_at_zero(&self) -> f64 {
        match self.family {
            KernelFamily::Exp => self.kappa * self.theta,
            KernelFamily::PowerLaw => self.kappa * self.offset().powf(-(1.0 + self.theta)),
            _ => self.kappa,
        }
    }

    /// The recovery-time distribution induced by this kernel.
    pub fn recovery(&self) -> RecoveryDistribution {
        RecoveryDistribution { family: self.family, theta: self.theta, c: self.c }
    }

    /// Recovery density `f(t) = -phi'(t)/phi(0)` in closed form.
    pub fn recovery_density(&self, t: f64) -> f64 {
        self.recovery().density(t)
    }

    /// Recovery hazard `h(t) = -phi'(t)/phi(t)` in closed form.
    ///
    /// Errors at or past the support end, where the kernel vanishes and the
    /// hazard has no finite value.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        self.recovery().hazard(t)
    }

    /// Closed-form `∫_0^t phi`; saturates at the total mass past the support.
    fn mass_up_to(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let th = self.theta;
        let end = self.support_end();
        let t = t.min(end);
        match self.family {
            KernelFamily::Linear => self.kappa * (t - 0.5 * th * t * t),
            KernelFamily::Quadratic => {
                let base = 1.0 - 0.5 * th * t;
                2.0 * self.kappa / (3.0 * th) * (1.0 - base * base * base)
            }
            KernelFamily::Gaussian => {
                self.kappa * th * (std::f64::consts::PI / 2.0).sqrt()
                    * statrs::function::erf::erf(t / (std::f64::consts::SQRT_2 * th))
            }
            KernelFamily::QExp => {
                if t.is_infinite() {
                    return self.total_mass();
                }
                if (th - 2.0).abs() < 1e-12 {
                    // theta = 2 degenerates to kappa/(1+t): logarithmic mass.
                    self.kappa * (1.0 + t).ln()
                } else {
                    let expo = (2.0 - th) / (1.0 - th);
                    let log_u = (1.0 + (th - 1.0) * t).ln();
                    // 1 - u^expo via expm1 to survive expo -> 0 and u -> 1
                    self.kappa / (2.0 - th) * -(expo * log_u).exp_m1()
                }
            }
            KernelFamily::Exp => {
                if t.is_infinite() {
                    self.kappa
                } else {
                    self.kappa * -(-th * t).exp_m1()
                }
            }
            KernelFamily::PowerLaw => {
                let c = self.offset();
                let head = c.powf(-th);
                if t.is_infinite() {
                    self.kappa / th * head
                } else {
                    // c^-t - (t+c)^-t = c^-t (1 - e^{-t ln(1 + t/c)}), kept
                    // in expm1 form: exact for theta near 0
                    self.kappa / th * head * -(-th * (t / c).ln_1p()).exp_m1()
                }
            }
        }
    }

    /// Closed-form `∫_a^b phi(τ) dτ`; `b` may be infinite.
    ///
    /// Requires `0 <= a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        assert!(
            a >= 0.0 && b >= a,
            "kernel integral needs 0 <= a <= b, got a={a}, b={b}"
        );
        if a == b {
            return 0.0;
        }
        self.mass_up_to(b) - self.mass_up_to(a)
    }

    /// Total kernel mass `∫_0^∞ phi`; infinite for QExp with `theta >= 2`.
    pub fn total_mass(&self) -> f64 {
        let th = self.theta;
        match self.family {
            KernelFamily::Linear => self.kappa / (2.0 * th),
            KernelFamily::Quadratic => 2.0 * self.kappa / (3.0 * th),
            KernelFamily::Gaussian => self.kappa * th * (std::f64::consts::PI / 2.0).sqrt(),
            KernelFamily::QExp => {
                if th >= 2.0 {
                    f64::INFINITY
                } else {
                    self.kappa / (2.0 - th)
                }
            }
            KernelFamily::Exp => self.kappa,
            KernelFamily::PowerLaw => self.kappa * self.offset().powf(-th) / th,
        }
    }

    /// Expected number of direct descendants of one event.
    ///
    /// Unmarked (`rho == 0`) this is the kernel mass; with marks distributed
    /// as a power law of exponent `alpha` the mass is scaled by
    /// `(alpha-1)/(alpha-1-rho)`, which requires `rho < alpha - 1`.
    pub fn branching_factor(&self, rho: f64, alpha: f64) -> Result<f64> {
        let mass = self.total_mass();
        if rho == 0.0 {
            return Ok(mass);
        }
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be >= 0, got {rho}")));
        }
        let limit = alpha - 1.0;
        if rho >= limit {
            return Err(Error::DivergentBranching { rho, limit });
        }
        Ok(mass * limit / (limit - rho))
    }

    /// View this kernel as the matching SIR specification: `beta = phi(0)`
    /// and the recovery distribution carries the shape parameters.
    pub fn to_sir(&self, population: f64) -> SirSpec {
        SirSpec {
            beta: self.rate_at_zero(),
            recovery: self.recovery(),
            population,
            rho: 0.0,
        }
    }
}

/// Recovery-time distribution of the generalized SIR process.
///
/// Shares the shape parameters of the kernel family it was derived from;
/// the kernel scale `kappa` cancels out of `f`, `h` and the quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryDistribution {
    pub family: KernelFamily,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl RecoveryDistribution {
    pub fn new(family: KernelFamily, theta: f64, c: Option<f64>) -> Result<Self> {
        let dist = RecoveryDistribution { family, theta, c };
        dist.validate()?;
        Ok(dist)
    }

    /// Domain check. The exponential family additionally admits `theta == 0`
    /// (no recovery ever), which is how the SI benchmark is expressed.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.family {
            KernelFamily::Exp => self.theta.is_finite() && self.theta >= 0.0,
            KernelFamily::QExp => self.theta.is_finite() && self.theta > 1.0,
            _ => self.theta.is_finite() && self.theta > 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "recovery shape theta = {} out of domain for family {}",
                self.theta, self.family
            )));
        }
        if self.family.has_offset() {
            match self.c {
                Some(c) if c.is_finite() && c > 0.0 => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "power-law recovery needs a positive offset c, got {other:?}"
                    )))
                }
            }
        } else if self.c.is_some() {
            return Err(Error::InvalidParameter(format!(
                "family {} does not take an offset c",
                self.family
            )));
        }
        Ok(())
    }

    fn offset(&self) -> f64 {
        self.c.unwrap_or(f64::NAN)
    }

    /// Upper end of the recovery-time support.
    pub fn support_end(&self) -> f64 {
        match self.family {
            KernelFamily::Linear => 1.0 / self.theta,
            KernelFamily::Quadratic => 2.0 / self.theta,
            _ => f64::INFINITY,
        }
    }

    /// Density `f(t)`; zero outside the support.
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.support_end() {
            return 0.0;
        }
        let th = self.theta;
        match self.family {
            KernelFamily::Linear => th,
            KernelFamily::Quadratic => th * (1.0 - 0.5 * th * t),
            KernelFamily::Gaussian => t / (th * th) * (-t * t / (2.0 * th * th)).exp(),
            KernelFamily::QExp => (1.0 + (th - 1.0) * t).powf(th / (1.0 - th)),
            KernelFamily::Exp => th * (-th * t).exp(),
            KernelFamily::PowerLaw => {
                let c = self.offset();
                (1.0 + th) * c.powf(1.0 + th) * (t + c).powf(-(2.0 + th))
            }
        }
    }

    /// Survival function `P[recovery time > t]`, equal to `phi(t)/phi(0)`.
    pub fn ccdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        if t >= self.support_end() {
            return 0.0;
        }
        let th = self.theta;
        match self.family {
            KernelFamily::Linear => 1.0 - th * t,
            KernelFamily::Quadratic => {
                let base = 1.0 - 0.5 * th * t;
                base * base
            }
            KernelFamily::Gaussian => (-t * t / (2.0 * th * th)).exp(),
            KernelFamily::QExp => (1.0 + (th - 1.0) * t).powf(1.0 / (1.0 - th)),
            KernelFamily::Exp => (-th * t).exp(),
            KernelFamily::PowerLaw => {
                let c = self.offset();
                (1.0 + t / c).powf(-(1.0 + th))
            }
        }
    }

    /// Hazard `h(t) = f(t) / ccdf(t)` in closed form.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        let end = self.support_end();
        if t >= end {
            return Err(Error::SingularHazard { t, support_end: end });
        }
        if t < 0.0 {
            return Err(Error::Precondition(format!("hazard needs t >= 0, got {t}")));
        }
        let th = self.theta;
        Ok(match self.family {
            KernelFamily::Linear => th / (1.0 - th * t),
            KernelFamily::Quadratic => 2.0 * th / (2.0 - th * t),
            KernelFamily::Gaussian => t / (th * th),
            KernelFamily::QExp => 1.0 / (1.0 + (th - 1.0) * t),
            KernelFamily::Exp => th,
            KernelFamily::PowerLaw => (1.0 + th) / (t + self.offset()),
        })
    }

    /// Inverse CDF, used for recovery sampling. `u` must lie in `[0, 1)`.
    ///
    /// An exponential recovery with `theta == 0` returns infinity: the
    /// individual never recovers (SI limit).
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&u), "quantile needs u in [0,1), got {u}");
        let th = self.theta;
        match self.family {
            KernelFamily::Linear => u / th,
            KernelFamily::Quadratic => 2.0 / th * (1.0 - (1.0 - u).sqrt()),
            KernelFamily::Gaussian => th * (-2.0 * (1.0 - u).ln()).sqrt(),
            KernelFamily::QExp => ((1.0 - u).powf(1.0 - th) - 1.0) / (th - 1.0),
            KernelFamily::Exp => -(1.0 - u).ln() / th,
            KernelFamily::PowerLaw => {
                let c = self.offset();
                c * ((1.0 - u).powf(-1.0 / (1.0 + th)) - 1.0)
            }
        }
    }

    /// Mean recovery time `∫ t f(t) dt = ∫ ccdf`; infinite when undefined.
    pub fn mean(&self) -> f64 {
        let th = self.theta;
        match self.family {
            KernelFamily::Linear => 1.0 / (2.0 * th),
            KernelFamily::Quadratic => 2.0 / (3.0 * th),
            KernelFamily::Gaussian => th * (std::f64::consts::PI / 2.0).sqrt(),
            KernelFamily::QExp => {
                if th >= 2.0 {
                    f64::INFINITY
                } else {
                    1.0 / (2.0 - th)
                }
            }
            KernelFamily::Exp => 1.0 / th,
            KernelFamily::PowerLaw => self.offset() / th,
        }
    }
}

/// Generalized stochastic SIR specification.
///
/// `population` is kept as a real number so that fitted (continuous) sizes
/// round-trip; simulation rounds it to a whole count of individuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirSpec {
    /// Infection rate `beta`, equal to `phi(0)` of the matching kernel.
    pub beta: f64,
    pub recovery: RecoveryDistribution,
    pub population: f64,
    /// Mark warping exponent; 0 for the unmarked process.
    #[serde(default)]
    pub rho: f64,
}

impl SirSpec {
    pub fn new(beta: f64, recovery: RecoveryDistribution, population: f64) -> Result<Self> {
        let spec = SirSpec { beta, recovery, population, rho: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.rho = rho;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be a non-negative real, got {}",
                self.beta
            )));
        }
        if !(self.population.is_finite() && self.population >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "population must be at least 1, got {}",
                self.population
            )));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be >= 0, got {}", self.rho)));
        }
        self.recovery.validate()
    }

    /// Invert the parameter map back to the kernel: `kappa` is recovered
    /// from `beta = phi(0)` per family.
    pub fn to_kernel(&self) -> Result<KernelSpec> {
        let kappa = match self.recovery.family {
            KernelFamily::Exp => self.beta / self.recovery.theta,
            KernelFamily::PowerLaw => {
                self.beta * self.recovery.offset().powf(1.0 + self.recovery.theta)
            }
            _ => self.beta,
        };
        KernelSpec::with_params(self.recovery.family, kappa, self.recovery.theta, self.recovery.c)
    }

    /// Branching factor `n* = beta * E[recovery time]`, mark-scaled like
    /// [`KernelSpec::branching_factor`].
    pub fn branching_factor(&self, alpha: f64) -> Result<f64> {
        let base = self.beta * self.recovery.mean();
        if self.rho == 0.0 {
            return Ok(base);
        }
        let limit = alpha - 1.0;
        if self.rho >= limit {
            return Err(Error::DivergentBranching { rho: self.rho, limit });
        }
        Ok(base * limit / (limit - self.rho))
    }

    /// Population rounded to a whole number of individuals for simulation.
    pub fn population_count(&self) -> u64 {
        self.population.round().max(1.0) as u64
    }
}
