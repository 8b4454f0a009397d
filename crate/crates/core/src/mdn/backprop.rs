use super::loss::head_nll_and_grad;
use super::{Dense, MdnModel, Mode, Trace};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Parameter-shaped gradient, one [`Dense`] per model layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(m: &MdnModel) -> Self {
        Self {
            layers: m.layers().iter().map(|l| Dense::zeros(l.rows, l.cols)).collect(),
        }
    }

    fn reset(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v = 0.0);
            l.bias.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v *= s);
            l.bias.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Scratch space reused across samples.
#[derive(Default)]
pub(crate) struct Workspace {
    trace: Trace,
    dheads: [Vec<f64>; 3],
    upstream: Vec<f64>,
    delta: Vec<f64>,
}

/// Forward + backward for one sample, adding `d nll / d params` to `grads`.
pub(crate) fn accumulate(
    m: &MdnModel,
    x: &[f64],
    y: f64,
    mode: Mode<'_>,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> f64 {
    m.trace(x, mode, &mut ws.trace);
    let loss = head_nll_and_grad(&ws.trace.heads, y, m.sd_floor(), &mut ws.dheads);

    let n_hidden = m.config().hidden_sizes.len();
    let act = m.config().activation;
    let t = &ws.trace;

    // heads
    let last = &t.out[n_hidden - 1];
    ws.upstream.clear();
    ws.upstream.resize(last.len(), 0.0);
    for h in 0..3 {
        let layer = &m.layers()[n_hidden + h];
        let g = &mut grads.layers[n_hidden + h];
        for (r, &d) in ws.dheads[h].iter().enumerate() {
            g.bias[r] += d;
            let row = r * layer.cols..(r + 1) * layer.cols;
            let pairs = g.weights[row.clone()].iter_mut().zip(&layer.weights[row]);
            for ((gw, &w), (&x, up)) in pairs.zip(last.iter().zip(ws.upstream.iter_mut())) {
                *gw += d * x;
                *up += d * w;
            }
        }
    }

    // hidden layers, last to first
    for l in (0..n_hidden).rev() {
        ws.delta.clear();
        for j in 0..t.pre[l].len() {
            let mut g = ws.upstream[j];
            if !t.mask[l].is_empty() {
                g *= t.mask[l][j];
            }
            ws.delta.push(g * act.derivative(t.pre[l][j], t.act[l][j]));
        }
        let input = if l == 0 { &t.input } else { &t.out[l - 1] };
        let layer = &m.layers()[l];
        let g = &mut grads.layers[l];
        ws.upstream.clear();
        ws.upstream.resize(layer.cols, 0.0);
        for (r, &d) in ws.delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g.bias[r] += d;
            let row = r * layer.cols..(r + 1) * layer.cols;
            let pairs = g.weights[row.clone()].iter_mut().zip(&layer.weights[row]);
            for ((gw, &w), (&x, up)) in pairs.zip(input.iter().zip(ws.upstream.iter_mut())) {
                *gw += d * x;
                *up += d * w;
            }
        }
    }
    loss
}

/// Mean loss and gradient over `rows` of a row-major feature matrix.
/// With `dropout = Some(rng)` each sample gets a fresh dropout mask.
pub(crate) fn batch_gradients(
    m: &MdnModel,
    features: &[f64],
    y: &[f64],
    rows: &[usize],
    mut dropout: Option<&mut Stream>,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> f64 {
    let d = m.config().input_dim;
    grads.reset();
    let mut total = 0.0;
    for &i in rows {
        let x = &features[i * d..(i + 1) * d];
        let mode = match dropout.as_deref_mut() {
            Some(r) => Mode::Train(r),
            None => Mode::Eval,
        };
        total += accumulate(m, x, y[i], mode, ws, grads);
    }
    let n = rows.len().max(1) as f64;
    grads.scale(1.0 / n);
    total / n
}

/// Analytic gradient of the mean NLL over a batch, dropout disabled.
/// Returns `(loss, gradient)`.
pub fn gradients(m: &MdnModel, features: &[f64], y: &[f64]) -> Result<(f64, Gradients)> {
    let d = m.config().input_dim;
    if y.is_empty() {
        return Err(Error::InvalidInput("gradient batch is empty".into()));
    }
    if features.len() != y.len() * d {
        return Err(Error::Dimension {
            expected: y.len() * d,
            got: features.len(),
            context: "gradient batch features",
        });
    }
    let rows: Vec<usize> = (0..y.len()).collect();
    let mut grads = Gradients::zeros_like(m);
    let mut ws = Workspace::default();
    let loss = batch_gradients(m, features, y, &rows, None, &mut ws, &mut grads);
    Ok((loss, grads))
}
