//! Train/test splitting and Delay-convention scoring.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, Dataset, GenConfig};
use crate::error::{Error, Result};
use crate::mdn::{self, MdnModel, MixturePrediction, NetworkConfig, TrainConfig};
use crate::rng;

/// Seeded shuffle, then the first `floor(n * fraction)` rows train and the
/// rest test.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    let n = data.len();
    let n_train = (n as f64 * fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidInput(format!(
            "split of {n} rows at {fraction} leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed));
    Ok((data.select(&idx[..n_train]), data.select(&idx[n_train..])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub observed: f64,
    pub fitted: f64,
    pub squared_error: f64,
}

/// Delay-convention fitted values and squared errors.
pub fn delay_rows(preds: &[MixturePrediction], y: &[f64]) -> Vec<EvalRow> {
    preds
        .iter()
        .zip(y)
        .map(|(p, &y)| {
            let fitted = p.delay_mean(y);
            EvalRow {
                observed: y,
                fitted,
                squared_error: (fitted - y) * (fitted - y),
            }
        })
        .collect()
}

fn mean_sq(rows: &[EvalRow]) -> f64 {
    rows.iter().map(|r| r.squared_error).sum::<f64>() / rows.len().max(1) as f64
}

/// MSE where each row's fitted value is the predicted component mean
/// closest to the observed response. With `k = 1` this is plain MSE.
pub fn delay_mse(m: &MdnModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot score an empty dataset".into()));
    }
    let preds = m.predict_rows(data.features())?;
    Ok(mean_sq(&delay_rows(&preds, data.response())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_kind: String,
    pub k: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Test rows.
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn build(model_kind: &str, m: &MdnModel, train: &Dataset, test: &Dataset) -> Result<Self> {
        let train_mse = delay_mse(m, train)?;
        let preds = m.predict_rows(test.features())?;
        let rows = delay_rows(&preds, test.response());
        Ok(Self {
            model_kind: model_kind.to_string(),
            k: m.k(),
            train_mse,
            test_mse: mean_sq(&rows),
            n_train: train.len(),
            n_test: test.len(),
            rows,
        })
    }
}

/// Data source for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GenSpec {
    /// RegCusp / Bimodal / SDE; the config's own seed is replaced by the
    /// experiment's derived seed.
    Synthetic(GenConfig),
    Oliva { n: usize },
}

impl GenSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GenSpec::Synthetic(c) => c.model.name(),
            GenSpec::Oliva { .. } => "oliva",
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match self {
            GenSpec::Synthetic(c) => {
                let mut c = c.clone();
                c.seed = seed;
                datagen::generate(&c)
            }
            GenSpec::Oliva { n } => datagen::gen_oliva(*n, seed),
        }
    }
}

/// Seeds used by one experiment, all derived from its master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSeeds {
    pub data: u64,
    pub split: u64,
    pub train: u64,
}

impl ExperimentSeeds {
    /// `derive_seed(seed, 0 | 1 | 2)` for data, split and training.
    pub fn from_master(seed: u64) -> Self {
        Self {
            data: rng::derive_seed(seed, 0),
            split: rng::derive_seed(seed, 1),
            train: rng::derive_seed(seed, 2),
        }
    }
}

/// Everything an experiment produced, for diagnostics beyond the reports.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub train: Dataset,
    pub test: Dataset,
    pub models: Vec<MdnModel>,
    pub reports: Vec<EvalReport>,
}

/// One dataset, one 50/50 split, every network trained on the same half.
pub fn run_experiment(
    gen: &GenSpec,
    nets: &[NetworkConfig],
    trainspec: &TrainConfig,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    run_experiment_full(gen, nets, trainspec, seed).map(|r| r.reports)
}

/// As [`run_experiment`], keeping the split and trained models. Each
/// network's `input_dim` is set from the data; the train config's seed is
/// replaced by the derived training seed.
pub fn run_experiment_full(
    gen: &GenSpec,
    nets: &[NetworkConfig],
    trainspec: &TrainConfig,
    seed: u64,
) -> Result<ExperimentRun> {
    let seeds = ExperimentSeeds::from_master(seed);
    let data = gen.generate(seeds.data)?;
    let (train, test) = split(&data, 0.5, seeds.split)?;
    let mut tc = trainspec.clone();
    tc.seed = seeds.train;

    let mut models = Vec::with_capacity(nets.len());
    let mut reports = Vec::with_capacity(nets.len());
    for (i, nc) in nets.iter().enumerate() {
        let mut nc = nc.clone();
        nc.input_dim = data.n_features();
        let m = mdn::train(&train, &nc, &tc).map_err(|e| Error::Experiment {
            spec: format!("network #{i} (k={}, hidden={:?})", nc.k, nc.hidden_sizes),
            source: Box::new(e),
        })?;
        reports.push(EvalReport::build(gen.name(), &m, &train, &test)?);
        models.push(m);
    }
    Ok(ExperimentRun {
        train,
        test,
        models,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{ModelKind, RegressionCoeffs};

    fn toy(n: usize) -> Dataset {
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Dataset::new(1, xs.clone(), xs, None).unwrap()
    }

    #[test]
    fn split_sizes_and_cover() {
        let d = toy(10);
        let (a, b) = split(&d, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        let mut all: Vec<f64> = a.response().iter().chain(b.response()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.response());
        let (a2, _) = split(&d, 0.5, 1).unwrap();
        assert_eq!(a, a2);

        let (a, b) = split(&toy(500), 0.5, 3).unwrap();
        assert_eq!((a.len(), b.len()), (250, 250));
        let (a, b) = split(&toy(7), 0.3, 3).unwrap();
        assert_eq!((a.len(), b.len()), (2, 5));
    }

    #[test]
    fn degenerate_splits_rejected() {
        assert!(split(&toy(10), 0.0, 1).is_err());
        assert!(split(&toy(10), 1.0, 1).is_err());
        assert!(split(&toy(3), 0.2, 1).is_err());
    }

    #[test]
    fn split_keeps_latent() {
        let c = RegressionCoeffs::new(vec![0.5, 1.0], vec![1.0, 2.0]).unwrap();
        let d = datagen::generate(&GenConfig::new(ModelKind::RegCusp, 20, c, 1.0, 1)).unwrap();
        let (a, b) = split(&d, 0.5, 2).unwrap();
        assert_eq!(a.latent().unwrap().controls.len(), 10);
        assert_eq!(b.latent().unwrap().branch.len(), 10);
    }

    fn pred(means: &[f64]) -> MixturePrediction {
        let k = means.len();
        MixturePrediction {
            means: means.to_vec(),
            sds: vec![1.0; k],
            weights: vec![1.0 / k as f64; k],
        }
    }

    #[test]
    fn delay_rows_examples() {
        let r = delay_rows(&[pred(&[-1.0, 1.0])], &[0.8]);
        assert!((r[0].squared_error - 0.04).abs() < 1e-15);
        let r = delay_rows(&[pred(&[2.0])], &[0.5]);
        assert_eq!(r[0].squared_error, 2.25);
    }

    #[test]
    fn delay_matches_exhaustive_choice() {
        let preds = [pred(&[0.0, 3.0]), pred(&[-2.0, 1.0]), pred(&[5.0, 4.5])];
        let ys = [2.0, -0.4, 4.6];
        // enumerate all 2^3 assignments; the minimum SSE is the delay choice
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let sse: f64 = (0..3)
                .map(|i| {
                    let m = preds[i].means[((mask >> i) & 1) as usize];
                    (m - ys[i]) * (m - ys[i])
                })
                .sum();
            best = best.min(sse);
        }
        let rows = delay_rows(&preds, &ys);
        assert!((mean_sq(&rows) - best / 3.0).abs() < 1e-12);
        // hand sum: 1.0 + 1.96 + 0.01
        assert!((best - 2.97).abs() < 1e-12);
    }
}
