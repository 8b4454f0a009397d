//! Pinned end-to-end recipes: data, split, 1- and 2-component fits, and
//! tolerance checks against published MSEs.

use serde::Serialize;

use crate::datagen::{GenConfig, ModelKind, RegressionCoeffs};
use crate::error::Result;
use crate::eval::{run_experiment_full, ExperimentRun, GenSpec};
use crate::mdn::{NetworkConfig, TrainConfig};

/// One published simulation setting with its reported test MSEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub mse1: f64,
    pub mse2: f64,
}

impl PublishedRow {
    pub fn coeffs(&self) -> RegressionCoeffs {
        RegressionCoeffs::new(self.a.to_vec(), self.b.to_vec()).expect("published coefficients are valid")
    }
}

pub const TABLE1: [PublishedRow; 5] = [
    PublishedRow { a: [0.8374, 0.5228, 3.1822], b: [3.5324, 0.1579, 4.6811], mse1: 1.207, mse2: 0.8773 },
    PublishedRow { a: [1.7122, 3.8342, 2.4415], b: [2.7407, 3.1888, 4.0322], mse1: 1.0242, mse2: 0.9468 },
    PublishedRow { a: [1.198, 2.7108, 4.0073], b: [2.1903, 4.3106, 4.5244], mse1: 1.2273, mse2: 0.9539 },
    PublishedRow { a: [0.419, 0.6107, 3.5677], b: [1.8378, 3.1572, 3.4127], mse1: 0.9218, mse2: 1.08 },
    PublishedRow { a: [4.2665, 2.6617, 3.6516], b: [0.8548, 3.5857, 4.0862], mse1: 1.0409, mse2: 1.0241 },
];

pub const BIMODAL_PUBLISHED: (f64, f64) = (7.86, 0.78);
pub const OLIVA_PUBLISHED: (f64, f64) = (1.12, 0.73);

/// Rows per synthetic dataset, before the 50/50 split.
pub const DESK_N: usize = 500;
/// Oliva dataset size.
pub const OLIVA_N: usize = 500;
/// Master seed of every pinned recipe.
pub const DEFAULT_SEED: u64 = 20190;
/// Seeded repeats for the k=2 vs k=1 ordering check.
pub const REPEATS: u64 = 5;

/// Default 1- and 2-component networks.
pub fn default_networks(input_dim: usize) -> [NetworkConfig; 2] {
    [NetworkConfig::new(input_dim, 1), NetworkConfig::new(input_dim, 2)]
}

pub fn default_training() -> TrainConfig {
    TrainConfig::new(0)
}

pub fn synthetic(model: ModelKind, row: &PublishedRow, n: usize) -> GenSpec {
    GenSpec::Synthetic(GenConfig::new(model, n, row.coeffs(), 1.0, 0))
}

/// Fits the default 1- and 2-component networks to one generated dataset.
pub fn fit_pair(gen: &GenSpec, tc: &TrainConfig, seed: u64) -> Result<ExperimentRun> {
    let nets = default_networks(1);
    run_experiment_full(gen, &nets, tc, seed)
}

/// One pass/fail line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub published: Option<f64>,
    pub achieved: f64,
    pub rule: String,
    pub pass: bool,
}

impl Check {
    pub fn within(label: impl Into<String>, published: Option<f64>, achieved: f64, lo: f64, hi: f64) -> Self {
        Self {
            label: label.into(),
            published,
            achieved,
            rule: format!("in [{lo:.4}, {hi:.4}]"),
            pass: achieved >= lo && achieved <= hi,
        }
    }

    pub fn holds(label: impl Into<String>, achieved: f64, rule: impl Into<String>, pass: bool) -> Self {
        Self {
            label: label.into(),
            published: None,
            achieved,
            rule: rule.into(),
            pass,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let published = self.published.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into());
        write!(
            f,
            "{:<4} {:<40} published {:>8}  achieved {:>8.4}  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.label,
            published,
            self.achieved,
            self.rule
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Reproduction {
    pub name: &'static str,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn mses(run: &ExperimentRun) -> (f64, f64) {
    (run.reports[0].test_mse, run.reports[1].test_mse)
}

/// Every published setting at desk scale. Row 1 gets the tight bands and the
/// seeded ordering check; the others are held to +-0.5 of the published MSE.
pub fn table1(seed: u64, tc: &TrainConfig) -> Result<Reproduction> {
    let mut checks = Vec::new();
    for (i, row) in TABLE1.iter().enumerate() {
        let gen = synthetic(ModelKind::RegCusp, row, DESK_N);
        let (m1, m2) = mses(&fit_pair(&gen, tc, crate::rng::derive_seed(seed, i as u64))?);
        let (b1, b2) = if i == 0 {
            ((0.8, 1.6), (0.7, 1.4))
        } else {
            ((row.mse1 - 0.5, row.mse1 + 0.5), (row.mse2 - 0.5, row.mse2 + 0.5))
        };
        checks.push(Check::within(format!("row {} 1-component MSE", i + 1), Some(row.mse1), m1, b1.0, b1.1));
        checks.push(Check::within(format!("row {} 2-component Delay-MSE", i + 1), Some(row.mse2), m2, b2.0, b2.1));
    }

    let ordered = (0..REPEATS)
        .map(|r| {
            let gen = synthetic(ModelKind::RegCusp, &TABLE1[0], DESK_N);
            let (m1, m2) = mses(&fit_pair(&gen, tc, crate::rng::derive_seed(seed, 100 + r))?);
            Ok(m2 <= m1 + 0.1)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();
    checks.push(Check::holds(
        "row 1 repeats with k=2 <= k=1 + 0.1",
        ordered as f64,
        format!(">= 4 of {REPEATS}"),
        ordered >= 4,
    ));
    Ok(Reproduction { name: "table1", seed, checks })
}

/// Bimodal separation and mean overlap outside the cusp region.
pub fn bimodal(seed: u64, tc: &TrainConfig) -> Result<Reproduction> {
    let gen = synthetic(ModelKind::BimodalRegCusp, &TABLE1[0], DESK_N);
    let run = fit_pair(&gen, tc, seed)?;
    let (m1, m2) = mses(&run);
    let cusp = run.train.cusp_fraction().unwrap_or(0.0) * 0.5 + run.test.cusp_fraction().unwrap_or(0.0) * 0.5;
    let overlap = median_mean_gap_outside_cusp(&run)?;
    Ok(Reproduction {
        name: "bimodal",
        seed,
        checks: vec![
            Check::holds("cusp-region fraction", cusp, ">= 0.3", cusp >= 0.3),
            Check::holds("1-component MSE", m1, "reported", true).published(BIMODAL_PUBLISHED.0),
            Check::holds("2-component Delay-MSE", m2, "< 1.3", m2 < 1.3).published(BIMODAL_PUBLISHED.1),
            Check::holds("MSE ratio k=1 / k=2", m1 / m2, ">= 3", m1 >= 3.0 * m2),
            Check::holds("median |mu1 - mu2| outside cusp", overlap, "< 0.5", overlap < 0.5),
        ],
    })
}

impl Check {
    fn published(mut self, value: f64) -> Self {
        self.published = Some(value);
        self
    }
}

/// Median distance between the two fitted means over test rows whose
/// controls lie outside the cusp region.
pub fn median_mean_gap_outside_cusp(run: &ExperimentRun) -> Result<f64> {
    let model = &run.models[1];
    let mask = run.test.cusp_mask().unwrap_or_default();
    let mut gaps = Vec::new();
    for (i, row) in run.test.rows().enumerate() {
        if mask.get(i).copied().unwrap_or(false) {
            continue;
        }
        let p = model.predict(row)?;
        gaps.push((p.means[0] - p.means[1]).abs());
    }
    Ok(median(&mut gaps))
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// SDE-stationary data: no published number, only the ordering.
pub fn sde(seed: u64, tc: &TrainConfig) -> Result<Reproduction> {
    let gen = synthetic(ModelKind::SdeCusp, &TABLE1[0], DESK_N);
    let (m1, m2) = mses(&fit_pair(&gen, tc, seed)?);
    Ok(Reproduction {
        name: "sde",
        seed,
        checks: vec![
            Check::holds("1-component MSE", m1, "reported", true),
            Check::holds("2-component Delay-MSE", m2, "< 1-component", m2 < m1),
        ],
    })
}

pub fn oliva(seed: u64, tc: &TrainConfig) -> Result<Reproduction> {
    let gen = GenSpec::Oliva { n: OLIVA_N };
    let (m1, m2) = mses(&fit_pair(&gen, tc, seed)?);
    Ok(Reproduction {
        name: "oliva",
        seed,
        checks: vec![
            Check::within("1-component MSE", Some(OLIVA_PUBLISHED.0), m1, 0.8, 1.6),
            Check::within("2-component Delay-MSE", Some(OLIVA_PUBLISHED.1), m2, 0.5, 1.1),
            Check::holds("k=2 below k=1", m1 - m2, "> 0", m2 < m1),
        ],
    })
}

/// Runs a recipe by its selector name.
pub fn reproduce(name: &str, seed: u64, tc: &TrainConfig) -> Option<Result<Reproduction>> {
    Some(match name {
        "table1" => table1(seed, tc),
        "bimodal" => bimodal(seed, tc),
        "sde" => sde(seed, tc),
        "oliva" => oliva(seed, tc),
        _ => return None,
    })
}

pub const SELECTORS: [&str; 4] = ["table1", "bimodal", "sde", "oliva"];
