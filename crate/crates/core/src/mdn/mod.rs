//! Feed-forward mixture density network.
//!
//! Hidden layers are dense with a shared activation and (inverted) dropout
//! after each. Three linear heads read the last hidden layer: `k` means
//! (identity), `k` raw scales mapped to `exp(s) + sd_floor`, and `k` logits
//! mapped through a softmax to mixture weights. Inputs are standardized with
//! statistics stored in the model.

mod backprop;
mod loss;
mod optim;
mod train;

pub use backprop::{gradients, Gradients};
pub use loss::{log_sum_exp, mixture_nll, nll_loss};
pub use optim::{Optimizer, OptimizerState};
pub use train::{train, train_logged, TrainConfig, TrainLog};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    #[inline]
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    /// Number of mixture components.
    pub k: usize,
}

impl NetworkConfig {
    /// Three ReLU layers of width 32 with dropout 0.1.
    pub fn new(input_dim: usize, k: usize) -> Self {
        Self {
            input_dim,
            hidden_sizes: vec![32, 32, 32],
            activation: Activation::Relu,
            dropout_rate: 0.1,
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidInput("input_dim must be positive".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidInput(
                "hidden_sizes must be nonempty with positive widths".into(),
            ));
        }
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidInput(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// `(out, in)` shape of every layer: hidden layers, then mean, scale and
    /// weight heads.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_sizes.len() + 3);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_sizes {
            shapes.push((h, fan_in));
            fan_in = h;
        }
        for _ in 0..3 {
            shapes.push((self.k, fan_in));
        }
        shapes
    }

    pub fn layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.hidden_sizes.len())
            .map(|i| format!("hidden{i}"))
            .collect();
        names.extend(["mean_head", "scale_head", "weight_head"].map(String::from));
        names
    }
}

/// Dense affine map; `weights` is row-major `(rows = out, cols = in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    /// Weights uniform on `[-limit, limit]` with `limit = gain / sqrt(cols)`,
    /// zero bias.
    fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Self {
        let limit = gain / (cols as f64).sqrt();
        let u = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        Self {
            rows,
            cols,
            weights: (0..rows * cols).map(|_| u.sample(rng)).collect(),
            bias: vec![0.0; rows],
        }
    }

    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.cols);
        out.clear();
        out.extend(self.weights.chunks_exact(self.cols).zip(&self.bias).map(|(w, b)| {
            b + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
        }));
    }
}

/// Init gain for hidden layers, `sqrt(6)` (He-uniform).
pub const HIDDEN_INIT_GAIN: f64 = 2.449_489_742_783_178;
/// Init gain for the output heads, kept small so initial mixtures are flat.
pub const HEAD_INIT_GAIN: f64 = 0.1;

/// Per-feature affine map to zero mean and unit (population) variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            sd: vec![1.0; dim],
        }
    }

    /// Fit on row-major `features` with `dim` columns. Constant columns get
    /// unit scale.
    pub fn fit(features: &[f64], dim: usize) -> Self {
        let n = (features.len() / dim).max(1) as f64;
        let mut mean = vec![0.0; dim];
        for row in features.chunks_exact(dim) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in features.chunks_exact(dim) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let sd = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, sd }
    }

    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(&self.mean)
                .zip(&self.sd)
                .map(|((x, m), s)| (x - m) / s),
        );
    }
}

/// Gaussian mixture for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePrediction {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MixturePrediction {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    /// The component mean closest to `y`; ties go to the larger mean.
    pub fn delay_mean(&self, y: f64) -> f64 {
        let mut best = self.means[0];
        for &m in &self.means[1..] {
            let (d, db) = ((m - y).abs(), (best - y).abs());
            if d < db || (d == db && m > best) {
                best = m;
            }
        }
        best
    }

    /// Mixture mean, `sum pi_i mu_i`.
    pub fn mean(&self) -> f64 {
        self.means.iter().zip(&self.weights).map(|(m, w)| m * w).sum()
    }

    /// Log density of the mixture at `y`.
    pub fn log_density(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .means
            .iter()
            .zip(&self.sds)
            .zip(&self.weights)
            .map(|((m, s), w)| {
                let z = (y - m) / s;
                w.ln() - s.ln() - loss::HALF_LN_2PI - 0.5 * z * z
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Optional diagnostic: one draw from the predicted mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut j = self.k() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                j = i;
                break;
            }
        }
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        self.means[j] + self.sds[j] * z
    }
}

/// Whether a forward pass applies dropout, and with which stream.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Stream),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdnModel {
    config: NetworkConfig,
    /// Hidden layers followed by the mean, scale and weight heads.
    layers: Vec<Dense>,
    standardizer: Standardizer,
    sd_floor: f64,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Default)]
pub(crate) struct Trace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub act: Vec<Vec<f64>>,
    /// Dropout multipliers (0 or 1/(1-p)); empty when not training.
    pub mask: Vec<Vec<f64>>,
    /// What the next layer reads: `act * mask`.
    pub out: Vec<Vec<f64>>,
    pub heads: [Vec<f64>; 3],
}

impl MdnModel {
    pub const DEFAULT_SD_FLOOR: f64 = 1e-3;

    /// Fresh model with seeded uniform weights and identity standardizer.
    pub fn init<R: Rng + ?Sized>(config: NetworkConfig, sd_floor: f64, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes();
        let n_hidden = config.hidden_sizes.len();
        let layers = shapes
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| {
                let gain = if i < n_hidden {
                    HIDDEN_INIT_GAIN
                } else {
                    HEAD_INIT_GAIN
                };
                Dense::uniform(r, c, gain, rng)
            })
            .collect();
        let standardizer = Standardizer::identity(config.input_dim);
        Self::from_parts(config, layers, standardizer, sd_floor)
    }

    /// Assemble a model, checking every shape.
    pub fn from_parts(
        config: NetworkConfig,
        layers: Vec<Dense>,
        standardizer: Standardizer,
        sd_floor: f64,
    ) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes();
        let names = config.layer_names();
        if layers.len() != shapes.len() {
            return Err(Error::Dimension {
                expected: shapes.len(),
                got: layers.len(),
                context: "layer count",
            });
        }
        for ((l, &(r, c)), name) in layers.iter().zip(&shapes).zip(&names) {
            if l.rows != r || l.cols != c || l.weights.len() != r * c || l.bias.len() != r {
                return Err(Error::Layer {
                    layer: name.clone(),
                    message: format!(
                        "expected {r}x{c} weights and {r} biases, found {}x{} ({} weights, {} biases)",
                        l.rows,
                        l.cols,
                        l.weights.len(),
                        l.bias.len()
                    ),
                });
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Layer {
                    layer: name.clone(),
                    message: "non-finite parameter".into(),
                });
            }
        }
        if standardizer.mean.len() != config.input_dim || standardizer.sd.len() != config.input_dim {
            return Err(Error::Dimension {
                expected: config.input_dim,
                got: standardizer.mean.len(),
                context: "standardizer length",
            });
        }
        if standardizer.sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("standardizer sd must be positive".into()));
        }
        if !(sd_floor > 0.0 && sd_floor.is_finite()) {
            return Err(Error::InvalidInput(format!("sd_floor must be positive, got {sd_floor}")));
        }
        Ok(Self {
            config,
            layers,
            standardizer,
            sd_floor,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn set_standardizer(&mut self, s: Standardizer) -> Result<()> {
        if s.mean.len() != self.config.input_dim {
            return Err(Error::Dimension {
                expected: self.config.input_dim,
                got: s.mean.len(),
                context: "standardizer length",
            });
        }
        self.standardizer = s;
        Ok(())
    }

    pub fn sd_floor(&self) -> f64 {
        self.sd_floor
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub(crate) fn head_mut(&mut self, which: usize) -> &mut Dense {
        let n = self.layers.len();
        &mut self.layers[n - 3 + which]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::Dimension {
                expected: self.config.input_dim,
                got: x.len(),
                context: "input vector",
            });
        }
        Ok(())
    }

    pub(crate) fn trace(&self, x: &[f64], mut mode: Mode<'_>, t: &mut Trace) {
        let n_hidden = self.config.hidden_sizes.len();
        t.pre.resize_with(n_hidden, Vec::new);
        t.act.resize_with(n_hidden, Vec::new);
        t.mask.resize_with(n_hidden, Vec::new);
        t.out.resize_with(n_hidden, Vec::new);
        self.standardizer.apply(x, &mut t.input);

        let keep = 1.0 - self.config.dropout_rate;
        for l in 0..n_hidden {
            let input = if l == 0 { &t.input } else { &t.out[l - 1] };
            self.layers[l].apply(input, &mut t.pre[l]);
            let act = &mut t.act[l];
            act.clear();
            act.extend(t.pre[l].iter().map(|&v| self.config.activation.apply(v)));
            let mask = &mut t.mask[l];
            mask.clear();
            let out = &mut t.out[l];
            out.clear();
            match &mut mode {
                Mode::Train(rng) if self.config.dropout_rate > 0.0 => {
                    let scale = 1.0 / keep;
                    mask.extend((0..act.len()).map(|_| {
                        if rng.random::<f64>() < keep {
                            scale
                        } else {
                            0.0
                        }
                    }));
                    out.extend(act.iter().zip(mask.iter()).map(|(a, m)| a * m));
                }
                _ => out.extend_from_slice(act),
            }
        }
        let last = &t.out[n_hidden - 1];
        for h in 0..3 {
            self.layers[n_hidden + h].apply(last, &mut t.heads[h]);
        }
    }

    pub(crate) fn mixture_from_heads(&self, heads: &[Vec<f64>; 3]) -> MixturePrediction {
        let logits = &heads[2];
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
        let total: f64 = e.iter().sum();
        MixturePrediction {
            means: heads[0].clone(),
            sds: heads[1].iter().map(|s| s.exp() + self.sd_floor).collect(),
            weights: e.into_iter().map(|v| v / total).collect(),
        }
    }

    pub fn forward(&self, x: &[f64], mode: Mode<'_>) -> Result<MixturePrediction> {
        self.check_input(x)?;
        let mut t = Trace::default();
        self.trace(x, mode, &mut t);
        Ok(self.mixture_from_heads(&t.heads))
    }

    /// Deterministic prediction (no dropout).
    pub fn predict(&self, x: &[f64]) -> Result<MixturePrediction> {
        self.forward(x, Mode::Eval)
    }

    /// Predictions for every row of a row-major feature matrix.
    pub fn predict_rows(&self, features: &[f64]) -> Result<Vec<MixturePrediction>> {
        let d = self.config.input_dim;
        if !features.len().is_multiple_of(d) {
            return Err(Error::Dimension {
                expected: d,
                got: features.len() % d,
                context: "feature matrix width",
            });
        }
        let mut t = Trace::default();
        Ok(features
            .chunks_exact(d)
            .map(|x| {
                self.trace(x, Mode::Eval, &mut t);
                self.mixture_from_heads(&t.heads)
            })
            .collect())
    }
}
