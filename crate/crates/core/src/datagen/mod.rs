//! Seeded synthetic datasets from cusp models.
//!
//! All generators draw row `i` from its own random stream (see
//! [`crate::rng`]), so output depends only on the configuration and seed.

mod stationary;

pub use stationary::{sde_stationary_sample, StationarySampler, ENVELOPE_CELLS};

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::cusp::{self, ControlParams, RootSet};
use crate::error::{Error, Result};
use crate::rng;

/// Linear links from features to `(alpha, beta)`; intercepts first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionCoeffs {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl RegressionCoeffs {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let c = Self { a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(Error::InvalidInput(format!(
                "coefficient vectors differ in length ({} vs {})",
                self.a.len(),
                self.b.len()
            )));
        }
        if self.a.len() < 2 {
            return Err(Error::InvalidInput(
                "coefficient vectors need an intercept and at least one slope".into(),
            ));
        }
        if self.a.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Number of features these coefficients expect.
    pub fn n_features(&self) -> usize {
        self.a.len() - 1
    }

    /// Each coefficient drawn independently from U(0, 5).
    pub fn random_uniform<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Self {
        let u = Uniform::new(0.0, 5.0).expect("valid range");
        Self {
            a: (0..=p).map(|_| u.sample(rng)).collect(),
            b: (0..=p).map(|_| u.sample(rng)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    RegCusp,
    #[serde(rename = "bimodal")]
    BimodalRegCusp,
    #[serde(rename = "sde")]
    SdeCusp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::RegCusp => "regcusp",
            ModelKind::BimodalRegCusp => "bimodal",
            ModelKind::SdeCusp => "sde",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub coeffs: RegressionCoeffs,
    /// Standard deviation of the additive response noise.
    pub noise_sd: f64,
    /// Standard deviation of the zero-mean normal features.
    pub feature_sd: f64,
    pub seed: u64,
    pub model: ModelKind,
}

impl GenConfig {
    /// Feature standard deviation used when none is given (variance 4).
    pub const DEFAULT_FEATURE_SD: f64 = 2.0;

    pub fn new(model: ModelKind, n: usize, coeffs: RegressionCoeffs, noise_sd: f64, seed: u64) -> Self {
        Self {
            n,
            coeffs,
            noise_sd,
            feature_sd: Self::DEFAULT_FEATURE_SD,
            seed,
            model,
        }
    }

    pub fn p(&self) -> usize {
        self.coeffs.n_features()
    }

    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate()?;
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise_sd must be finite and nonnegative, got {}",
                self.noise_sd
            )));
        }
        if !(self.feature_sd > 0.0 && self.feature_sd.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature_sd must be finite and positive, got {}",
                self.feature_sd
            )));
        }
        Ok(())
    }
}

/// Which equilibrium a row's latent response sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Lower,
    Upper,
    Single,
}

impl Branch {
    /// Numeric code used in dataset files.
    pub fn code(self) -> i32 {
        match self {
            Branch::Lower => -1,
            Branch::Single => 0,
            Branch::Upper => 1,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            -1 => Some(Branch::Lower),
            0 => Some(Branch::Single),
            1 => Some(Branch::Upper),
            _ => None,
        }
    }
}

/// Ground truth kept alongside generated data.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub controls: Vec<ControlParams>,
    /// Noise-free response. For stationary-density data this is the stable
    /// equilibrium nearest the draw.
    pub noiseless_root: Vec<f64>,
    pub branch: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    /// Row-major `n x n_features`.
    features: Vec<f64>,
    response: Vec<f64>,
    latent: Option<Latent>,
}

impl Dataset {
    pub fn new(
        n_features: usize,
        features: Vec<f64>,
        response: Vec<f64>,
        latent: Option<Latent>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidInput("dataset needs at least one feature".into()));
        }
        let n = response.len();
        if features.len() != n * n_features {
            return Err(Error::Dimension {
                expected: n * n_features,
                got: features.len(),
                context: "feature matrix size",
            });
        }
        if let Some(l) = &latent {
            for (len, what) in [
                (l.controls.len(), "latent controls"),
                (l.noiseless_root.len(), "latent roots"),
                (l.branch.len(), "latent branches"),
            ] {
                if len != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: len,
                        context: what,
                    });
                }
            }
            if l.noiseless_root.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidInput("NaN in latent roots".into()));
            }
        }
        if features.iter().chain(&response).any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("NaN in dataset".into()));
        }
        Ok(Self {
            n_features,
            features,
            response,
            latent,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn latent(&self) -> Option<&Latent> {
        self.latent.as_ref()
    }

    /// Rows at `indices`, in that order, latent fields included.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let latent = self.latent.as_ref().map(|l| Latent {
            controls: indices.iter().map(|&i| l.controls[i]).collect(),
            noiseless_root: indices.iter().map(|&i| l.noiseless_root[i]).collect(),
            branch: indices.iter().map(|&i| l.branch[i]).collect(),
        });
        Dataset {
            n_features: self.n_features,
            features,
            response: indices.iter().map(|&i| self.response[i]).collect(),
            latent,
        }
    }

    /// Per-row cusp-region flag, when controls are known.
    pub fn cusp_mask(&self) -> Option<Vec<bool>> {
        self.latent
            .as_ref()
            .map(|l| l.controls.iter().map(|c| c.in_cusp_region()).collect())
    }

    /// Share of rows whose controls lie in the cusp region.
    pub fn cusp_fraction(&self) -> Option<f64> {
        self.cusp_mask()
            .map(|m| m.iter().filter(|&&b| b).count() as f64 / m.len().max(1) as f64)
    }
}

/// `alpha = a0 + sum a_j x_j`, `beta = b0 + sum b_j x_j`.
pub fn compute_controls(x: &[f64], c: &RegressionCoeffs) -> Result<ControlParams> {
    if x.len() + 1 != c.a.len() || c.a.len() != c.b.len() {
        return Err(Error::Dimension {
            expected: c.a.len().saturating_sub(1),
            got: x.len(),
            context: "feature vector vs coefficients",
        });
    }
    let lin = |w: &[f64]| w[0] + w[1..].iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
    ControlParams::new(lin(&c.a), lin(&c.b))
}

/// Dispatch on `cfg.model`.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    match cfg.model {
        ModelKind::RegCusp => gen_regcusp(cfg),
        ModelKind::BimodalRegCusp => gen_bimodal(cfg),
        ModelKind::SdeCusp => gen_sdecusp(cfg),
    }
}

fn expect_model(cfg: &GenConfig, kind: ModelKind) -> Result<()> {
    if cfg.model != kind {
        return Err(Error::InvalidInput(format!(
            "generator for {} called with model {}",
            kind.name(),
            cfg.model.name()
        )));
    }
    cfg.validate()
}

struct Row {
    x: Vec<f64>,
    controls: ControlParams,
    roots: RootSet,
}

fn draw_row(cfg: &GenConfig, r: &mut rng::Stream, feature: &Normal<f64>) -> Result<Row> {
    let x: Vec<f64> = (0..cfg.p()).map(|_| feature.sample(r)).collect();
    let controls = compute_controls(&x, &cfg.coeffs)?;
    let roots = cusp::solve_equilibrium(controls);
    Ok(Row { x, controls, roots })
}

/// Shared driver: features and controls per row, then `finish` chooses the
/// noiseless response and branch using the row's stream.
fn build<F>(cfg: &GenConfig, mut finish: F) -> Result<Dataset>
where
    F: FnMut(&Row, &mut rng::Stream) -> (f64, f64, Branch),
{
    let feature = Normal::new(0.0, cfg.feature_sd)
        .map_err(|e| Error::InvalidInput(format!("feature distribution: {e}")))?;
    let p = cfg.p();
    let mut features = Vec::with_capacity(cfg.n * p);
    let mut response = Vec::with_capacity(cfg.n);
    let mut controls = Vec::with_capacity(cfg.n);
    let mut roots = Vec::with_capacity(cfg.n);
    let mut branch = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut r = rng::row_stream(cfg.seed, i);
        let row = draw_row(cfg, &mut r, &feature)?;
        let (y, truth, b) = finish(&row, &mut r);
        features.extend_from_slice(&row.x);
        response.push(y);
        controls.push(row.controls);
        roots.push(truth);
        branch.push(b);
    }
    Dataset::new(
        p,
        features,
        response,
        Some(Latent {
            controls,
            noiseless_root: roots,
            branch,
        }),
    )
}

fn noise(sd: f64, r: &mut rng::Stream) -> f64 {
    if sd == 0.0 {
        // keep the stream position identical to the noisy case
        let _: f64 = rand_distr::StandardNormal.sample(r);
        0.0
    } else {
        let z: f64 = rand_distr::StandardNormal.sample(r);
        sd * z
    }
}

fn maxwell_branch(set: &RootSet, y: f64) -> Branch {
    match set.stable_pair() {
        Some((lo, _)) if y == lo => Branch::Lower,
        Some(_) => Branch::Upper,
        None => Branch::Single,
    }
}

/// Maxwell-selected root plus Gaussian noise.
pub fn gen_regcusp(cfg: &GenConfig) -> Result<Dataset> {
    expect_model(cfg, ModelKind::RegCusp)?;
    build(cfg, |row, r| {
        let truth = cusp::maxwell_of(&row.roots, row.controls);
        let y = truth + noise(cfg.noise_sd, r);
        (y, truth, maxwell_branch(&row.roots, truth))
    })
}

/// Inside the cusp region a fair coin picks the lower or upper stable root;
/// elsewhere the single root is used. Gaussian noise is added afterwards.
pub fn gen_bimodal(cfg: &GenConfig) -> Result<Dataset> {
    expect_model(cfg, ModelKind::BimodalRegCusp)?;
    build(cfg, |row, r| {
        // noise is drawn before the coin so non-cusp rows match RegCusp
        let eps = noise(cfg.noise_sd, r);
        let (truth, branch) = match row.roots.stable_pair() {
            Some((lo, hi)) => {
                if r.random::<bool>() {
                    (hi, Branch::Upper)
                } else {
                    (lo, Branch::Lower)
                }
            }
            None => (cusp::maxwell_of(&row.roots, row.controls), Branch::Single),
        };
        (truth + eps, truth, branch)
    })
}

fn nearest_stable(set: &RootSet, y: f64) -> (f64, Branch) {
    let truth = cusp::delay_root(set, y);
    let branch = match set.stable_pair() {
        Some((lo, _)) if truth == lo => Branch::Lower,
        Some(_) => Branch::Upper,
        None => Branch::Single,
    };
    (truth, branch)
}

/// Response drawn from the SDE stationary density at each row's controls;
/// no extra noise.
pub fn gen_sdecusp(cfg: &GenConfig) -> Result<Dataset> {
    expect_model(cfg, ModelKind::SdeCusp)?;
    build(cfg, |row, r| {
        let y = sde_stationary_sample(row.controls, r);
        let (truth, branch) = nearest_stable(&row.roots, y);
        (y, truth, branch)
    })
}

/// Oliva et al. style data with the auxiliary `U` variables kept.
#[derive(Debug, Clone)]
pub struct OlivaData {
    /// Features `(x1, x2, x3, y1, y2, y3, y4)`, response `Z`.
    pub data: Dataset,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

pub const OLIVA_ALPHA: [f64; 3] = [1.0, -0.969, -0.201];
pub const OLIVA_BETA: [f64; 4] = [0.44, 0.08, 0.67, 0.19];
const OLIVA_U1: f64 = 0.52;
const OLIVA_U2: f64 = 1.60;

pub fn gen_oliva(n: usize, seed: u64) -> Result<Dataset> {
    gen_oliva_full(n, seed).map(|o| o.data)
}

/// `X ~ U(-2,2)^3`, `Y ~ U(-3,3)^4`, `U1 ~ U(-3,3)`; controls are fixed
/// linear combinations, `Z` is a stationary-density draw and `U2` is chosen
/// so that `Z = -0.52 U1 - 1.60 U2`.
pub fn gen_oliva_full(n: usize, seed: u64) -> Result<OlivaData> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be at least 2, got {n}")));
    }
    let ux = Uniform::new(-2.0, 2.0).expect("valid range");
    let uy = Uniform::new(-3.0, 3.0).expect("valid range");
    let mut features = Vec::with_capacity(n * 7);
    let mut response = Vec::with_capacity(n);
    let mut controls = Vec::with_capacity(n);
    let mut roots = Vec::with_capacity(n);
    let mut branch = Vec::with_capacity(n);
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng::row_stream(seed, i);
        let x: [f64; 3] = std::array::from_fn(|_| ux.sample(&mut r));
        let y: [f64; 4] = std::array::from_fn(|_| uy.sample(&mut r));
        let u = uy.sample(&mut r);
        let alpha = OLIVA_ALPHA.iter().zip(&x).map(|(c, v)| c * v).sum();
        let beta = OLIVA_BETA.iter().zip(&y).map(|(c, v)| c * v).sum();
        let c = ControlParams::new(alpha, beta)?;
        let z = sde_stationary_sample(c, &mut r);
        let (truth, b) = nearest_stable(&cusp::solve_equilibrium(c), z);

        features.extend_from_slice(&x);
        features.extend_from_slice(&y);
        response.push(z);
        controls.push(c);
        roots.push(truth);
        branch.push(b);
        u1.push(u);
        u2.push(-(z + OLIVA_U1 * u) / OLIVA_U2);
    }
    let data = Dataset::new(
        7,
        features,
        response,
        Some(Latent {
            controls,
            noiseless_root: roots,
            branch,
        }),
    )?;
    Ok(OlivaData { data, u1, u2 })
}
