//! Final-size (popularity) prediction.
//!
//! A fitted model summarizes the observed part of a cascade as a feature
//! vector (its parameters and branching factor). A boosted-tree regressor
//! maps those features to `sigma`, the fraction of the remaining fitted
//! population that will eventually be infected, and the final size follows
//! as `C_t + sigma (N - C_t)`. Cross-validation rotates 4 training folds
//! against 6 test folds and scores with the absolute relative error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cascades::Cascade;
use crate::error::{Error, Result};
use crate::gbm::{Gbm, GbmParams};
use crate::kernels::{KernelFamily, DEFAULT_MARK_EXPONENT};
use crate::likelihood::HawkesNParams;

/// Upper cap applied to the regression target `sigma`: badly underestimated
/// populations otherwise produce unbounded targets.
pub const SIGMA_CAP: f64 = 50.0;

/// Default observation window (seconds of cascade time).
pub const DEFAULT_OBSERVATION_WINDOW: f64 = 3600.0;

/// Features describing one fitted cascade prefix. The regression inputs are
/// the fitted parameter vector and branching factor; the observed count and
/// fitted population feed the size formula. The eventual final size never
/// appears here.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionFeatures {
    pub cascade_id: String,
    pub model: KernelFamily,
    pub feature_names: Vec<&'static str>,
    pub values: Vec<f64>,
    /// Events observed within the window (`C_t`).
    pub observed_count: usize,
    /// Observation window end, in cascade time.
    pub observed_time: f64,
    /// Fitted population size.
    pub population: f64,
}

/// Extract the per-model feature vector from parameters fitted on the
/// observed prefix of `cascade`.
///
/// Layouts: `exp` kernels yield `{beta, gamma, rho, N, n*}` (the SIR view);
/// other families yield `{beta, theta, (c,) rho, N, n*}`.
pub fn extract_features(
    params: &HawkesNParams,
    cascade: &Cascade,
    t_obs: f64,
) -> Result<PredictionFeatures> {
    let sir = params.sir_view();
    let n_star = params.kernel.branching_factor(params.rho, DEFAULT_MARK_EXPONENT)?;
    let (feature_names, values): (Vec<&'static str>, Vec<f64>) = match params.kernel.family {
        KernelFamily::Exp => (
            vec!["beta", "gamma", "rho", "population", "n_star"],
            vec![sir.beta, sir.recovery.theta, sir.rho, params.population, n_star],
        ),
        family if family.has_offset() => (
            vec!["beta", "theta", "c", "rho", "population", "n_star"],
            vec![
                sir.beta,
                sir.recovery.theta,
                sir.recovery.c.unwrap_or(f64::NAN),
                sir.rho,
                params.population,
                n_star,
            ],
        ),
        _ => (
            vec!["beta", "theta", "rho", "population", "n_star"],
            vec![sir.beta, sir.recovery.theta, sir.rho, params.population, n_star],
        ),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite feature for cascade {}: {values:?}",
            cascade.id
        )));
    }
    Ok(PredictionFeatures {
        cascade_id: cascade.id.clone(),
        model: params.kernel.family,
        feature_names,
        values,
        observed_count: cascade.count_up_to(t_obs),
        observed_time: t_obs,
        population: params.population,
    })
}

/// Predicted final size `C_t + sigma (N - C_t)`; `sigma > 1` is allowed
/// (the fitted population may underestimate the real audience).
pub fn predict_size(sigma: f64, observed_count: usize, population: f64) -> f64 {
    observed_count as f64 + sigma * (population - observed_count as f64)
}

/// Regression target: the `sigma` that reproduces the true final size,
/// with the denominator floored at one individual and the result capped.
pub fn sigma_target(final_size: usize, observed_count: usize, population: f64) -> f64 {
    let remaining = (population - observed_count as f64).max(1.0);
    (((final_size - observed_count.min(final_size)) as f64) / remaining).min(SIGMA_CAP)
}

/// Absolute relative error of a final-size prediction.
pub fn are(predicted: f64, true_size: usize) -> f64 {
    (predicted - true_size as f64).abs() / true_size as f64
}

/// Combine the final-size predictions of complementary models by averaging.
pub fn combine_predictions(predictions: &[f64]) -> Result<f64> {
    if predictions.len() < 2 {
        return Err(Error::Precondition(format!(
            "combining needs at least 2 predictions, got {}",
            predictions.len()
        )));
    }
    Ok(predictions.iter().sum::<f64>() / predictions.len() as f64)
}

/// Cross-validation protocol: `folds` folds, `train_folds` consecutive
/// folds train each iteration and the rest test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CvConfig {
    pub folds: usize,
    pub train_folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 10, train_folds: 4, seed: 0 }
    }
}

/// One labeled training example.
#[derive(Debug, Clone)]
pub struct TrainingRow {
    pub features: PredictionFeatures,
    pub final_size: usize,
}

impl TrainingRow {
    fn target(&self) -> f64 {
        sigma_target(self.final_size, self.features.observed_count, self.features.population)
    }
}

/// A trained sigma regressor with its training metadata.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaModel {
    gbm: Gbm,
    pub feature_names: Vec<String>,
    pub folds: usize,
    pub seed: u64,
}

impl SigmaModel {
    pub fn predict_sigma(&self, features: &PredictionFeatures) -> f64 {
        self.gbm.predict(&features.values)
    }

    /// Predicted final size for a feature row (sigma floored at 0).
    pub fn predict_final_size(&self, features: &PredictionFeatures) -> f64 {
        let sigma = self.predict_sigma(features).max(0.0);
        predict_size(sigma, features.observed_count, features.population)
    }
}

/// Held-out prediction for one cascade, averaged over the CV iterations in
/// which it sat in a test fold.
#[derive(Debug, Clone, Serialize)]
pub struct CvPrediction {
    pub cascade_id: String,
    pub sigma_hat: f64,
    pub observed_count: usize,
    pub population: f64,
    pub predicted: f64,
    pub true_size: usize,
    pub are: f64,
}

/// Output of `train_sigma`: the final model (trained on everything) and the
/// cross-validated error estimates.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaTraining {
    pub model: SigmaModel,
    pub predictions: Vec<CvPrediction>,
    /// Absolute relative errors of each CV iteration's test block.
    pub fold_ares: Vec<Vec<f64>>,
    pub fold_assignment: Vec<usize>,
}

impl SigmaTraining {
    pub fn median_are(&self) -> f64 {
        let mut ares: Vec<f64> = self.predictions.iter().map(|p| p.are).collect();
        ares.sort_by(f64::total_cmp);
        if ares.is_empty() {
            return f64::NAN;
        }
        let mid = ares.len() / 2;
        if ares.len() % 2 == 1 {
            ares[mid]
        } else {
            0.5 * (ares[mid - 1] + ares[mid])
        }
    }
}

/// Train the sigma regressor with rotating-fold cross validation.
pub fn train_sigma(rows: &[TrainingRow], cv: &CvConfig) -> Result<SigmaTraining> {
    if rows.len() < 20 {
        return Err(Error::Precondition(format!(
            "sigma training needs at least 20 cascades, got {}",
            rows.len()
        )));
    }
    if cv.folds < 2 || cv.train_folds == 0 || cv.train_folds >= cv.folds {
        return Err(Error::Precondition(format!(
            "invalid fold protocol: {} train of {} folds",
            cv.train_folds, cv.folds
        )));
    }
    let widths = rows[0].features.values.len();
    if rows.iter().any(|r| r.features.values.len() != widths) {
        return Err(Error::Precondition("feature rows have mixed layouts".into()));
    }

    // seeded balanced fold assignment
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cv.seed);
    order.shuffle(&mut rng);
    let mut fold_assignment = vec![0usize; rows.len()];
    for (pos, &row) in order.iter().enumerate() {
        fold_assignment[row] = pos % cv.folds;
    }

    let samples: Vec<Vec<f64>> = rows.iter().map(|r| r.features.values.clone()).collect();
    let targets: Vec<f64> = rows.iter().map(|r| r.target()).collect();
    let params = GbmParams::default();

    let mut sigma_sums = vec![0.0f64; rows.len()];
    let mut sigma_counts = vec![0usize; rows.len()];
    let mut fold_ares = Vec::with_capacity(cv.folds);
    for iteration in 0..cv.folds {
        let in_train = |fold: usize| -> bool {
            (0..cv.train_folds).any(|o| (iteration + o) % cv.folds == fold)
        };
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        let mut test_rows = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if in_train(fold_assignment[i]) {
                train_x.push(samples[i].clone());
                train_y.push(targets[i]);
            } else {
                let _ = row;
                test_rows.push(i);
            }
        }
        if train_x.is_empty() || test_rows.is_empty() {
            return Err(Error::Precondition("empty train or test block in CV".into()));
        }
        let booster = Gbm::fit(&train_x, &train_y, &params)?;
        let mut iter_ares = Vec::with_capacity(test_rows.len());
        for &i in &test_rows {
            let sigma = booster.predict(&samples[i]).max(0.0);
            sigma_sums[i] += sigma;
            sigma_counts[i] += 1;
            let predicted =
                predict_size(sigma, rows[i].features.observed_count, rows[i].features.population);
            iter_ares.push(are(predicted, rows[i].final_size));
        }
        fold_ares.push(iter_ares);
    }

    let predictions: Vec<CvPrediction> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let sigma_hat = sigma_sums[i] / sigma_counts[i].max(1) as f64;
            let predicted =
                predict_size(sigma_hat, row.features.observed_count, row.features.population);
            CvPrediction {
                cascade_id: row.features.cascade_id.clone(),
                sigma_hat,
                observed_count: row.features.observed_count,
                population: row.features.population,
                predicted,
                true_size: row.final_size,
                are: are(predicted, row.final_size),
            }
        })
        .collect();

    let final_model = Gbm::fit(&samples, &targets, &params)?;
    Ok(SigmaTraining {
        model: SigmaModel {
            gbm: final_model,
            feature_names: rows[0]
                .features
                .feature_names
                .iter()
                .map(|s| s.to_string())
                .collect(),
            folds: cv.folds,
            seed: cv.seed,
        },
        predictions,
        fold_ares,
        fold_assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn size_formula_examples() {
        assert_eq!(predict_size(0.0, 100, 200.0), 100.0);
        assert_eq!(predict_size(1.0, 100, 200.0), 200.0);
        assert_eq!(predict_size(1.5, 100, 200.0), 250.0);
    }

    #[test]
    fn are_examples() {
        assert_relative_eq!(are(150.0, 100), 0.5);
        assert_eq!(are(100.0, 100), 0.0);
        assert_relative_eq!(are(0.0, 100), 1.0);
    }

    #[test]
    fn combine_is_the_mean() {
        assert_eq!(combine_predictions(&[100.0, 200.0]).unwrap(), 150.0);
        assert_eq!(combine_predictions(&[42.0, 42.0, 42.0]).unwrap(), 42.0);
        assert!(combine_predictions(&[1.0]).is_err());
    }

    #[test]
    fn sigma_target_inverts_the_size_formula() {
        for (final_size, observed, population) in
            [(180usize, 40usize, 200.0f64), (90, 30, 100.0), (55, 55, 80.0)]
        {
            let sigma = sigma_target(final_size, observed, population);
            let back = predict_size(sigma, observed, population);
            assert_relative_eq!(back, final_size as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn sigma_target_is_clamped_when_population_is_underestimated() {
        // N_hat <= C_t: denominator floored at 1
        let sigma = sigma_target(500, 100, 80.0);
        assert_eq!(sigma, SIGMA_CAP);
        let mild = sigma_target(120, 100, 100.5);
        assert_relative_eq!(mild, 20.0);
    }

    fn fake_row(id: usize, x: f64, sigma_true: f64) -> TrainingRow {
        // population 200, observed 50: final size encodes the target sigma
        let final_size = (50.0 + sigma_true * 150.0).round() as usize;
        TrainingRow {
            features: PredictionFeatures {
                cascade_id: format!("c{id}"),
                model: KernelFamily::Exp,
                feature_names: vec!["beta", "gamma", "rho", "population", "n_star"],
                values: vec![x, 1.0 - x, 0.0, 200.0, x * 2.0],
                observed_count: 50,
                observed_time: 3600.0,
                population: 200.0,
            },
            final_size,
        }
    }

    fn synthetic_rows(n: usize) -> Vec<TrainingRow> {
        (0..n)
            .map(|i| {
                let x = (i % 50) as f64 / 50.0;
                // sigma rises with the feature, light deterministic "noise"
                let sigma = 0.2 + 0.6 * x + 0.02 * ((i * 7 % 13) as f64 / 13.0);
                fake_row(i, x, sigma)
            })
            .collect()
    }

    #[test]
    fn needs_twenty_rows() {
        let rows = synthetic_rows(10);
        assert!(train_sigma(&rows, &CvConfig::default()).is_err());
    }

    #[test]
    fn rotating_folds_test_each_row_the_right_number_of_times() {
        let rows = synthetic_rows(60);
        let cv = CvConfig::default();
        let training = train_sigma(&rows, &cv).unwrap();
        assert_eq!(training.fold_ares.len(), 10);
        // every row is tested in folds - train_folds = 6 iterations
        let tested: usize = training.fold_ares.iter().map(|f| f.len()).sum();
        assert_eq!(tested, 60 * 6);
    }

    #[test]
    fn informative_features_beat_shuffled_targets() {
        let rows = synthetic_rows(100);
        let cv = CvConfig { seed: 3, ..CvConfig::default() };
        let trained = train_sigma(&rows, &cv).unwrap();

        // baseline: constant sigma at the median target
        let mut targets: Vec<f64> = rows.iter().map(|r| r.target()).collect();
        targets.sort_by(f64::total_cmp);
        let median_sigma = targets[targets.len() / 2];
        let baseline_median = {
            let mut ares: Vec<f64> = rows
                .iter()
                .map(|r| {
                    let p = predict_size(
                        median_sigma,
                        r.features.observed_count,
                        r.features.population,
                    );
                    are(p, r.final_size)
                })
                .collect();
            ares.sort_by(f64::total_cmp);
            ares[ares.len() / 2]
        };
        assert!(
            trained.median_are() < baseline_median,
            "model {} vs baseline {baseline_median}",
            trained.median_are()
        );

        // permuting the size labels destroys the improvement
        let mut permuted = rows.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut sizes: Vec<usize> = permuted.iter().map(|r| r.final_size).collect();
        sizes.shuffle(&mut rng);
        for (row, s) in permuted.iter_mut().zip(sizes) {
            row.final_size = s;
        }
        let broken = train_sigma(&permuted, &cv).unwrap();
        assert!(
            broken.median_are() > trained.median_are(),
            "permuted {} vs real {}",
            broken.median_are(),
            trained.median_are()
        );
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let rows = synthetic_rows(40);
        let cv = CvConfig { seed: 11, ..CvConfig::default() };
        let a = train_sigma(&rows, &cv).unwrap();
        let b = train_sigma(&rows, &cv).unwrap();
        assert_eq!(a.fold_assignment, b.fold_assignment);
        for (x, y) in a.predictions.iter().zip(&b.predictions) {
            assert_eq!(x.sigma_hat.to_bits(), y.sigma_hat.to_bits());
        }
    }

    #[test]
    fn constant_targets_yield_constant_predictions() {
        let rows: Vec<TrainingRow> = (0..30)
            .map(|i| fake_row(i, (i % 7) as f64 / 7.0, 0.5))
            .collect();
        let trained = train_sigma(&rows, &CvConfig::default()).unwrap();
        let sigma0 = trained.model.predict_sigma(&rows[0].features);
        for r in &rows {
            assert_relative_eq!(
                trained.model.predict_sigma(&r.features),
                sigma0,
                epsilon = 1e-9
            );
        }
    }
}
