//! The three-layer feedforward network: tansig hidden layer, linear output.
//!
//! Parameters are stored flat and row-major in the same order as the
//! chromosome layout (`W`, `gamma`, `V`, `h`), so a gradient is itself a
//! [`NetworkParams`] and flattening is a concatenation.

mod train;

pub use train::{
    residual_jacobian, train, train_gd, train_lm, CurvePoint, ErrorCurve, StopReason, TrainConfig,
    TrainMethod, TrainOutcome,
};

use serde::{Deserialize, Serialize};

use crate::dataset::{classify_warning, Sample};
use crate::error::{Error, Result};

/// `floor((n + m) / 2) + a` hidden neurons for `n` inputs and `m` outputs,
/// with the adjustment term `a` in `1..=10`.
pub fn hidden_layer_size(n: usize, m: usize, a: usize) -> Result<usize> {
    if !(1..=10).contains(&a) {
        return Err(Error::Config(format!(
            "hidden-size adjustment {a} outside 1..=10"
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::Config(
            "input and output counts must be positive".into(),
        ));
    }
    Ok((n + m) / 2 + a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkShape {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl NetworkShape {
    pub fn new(inputs: usize, hidden: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return Err(Error::Config(format!(
                "network shape {inputs}-{hidden}-{outputs} has an empty layer"
            )));
        }
        Ok(Self {
            inputs,
            hidden,
            outputs,
        })
    }

    /// Hidden size chosen by [`hidden_layer_size`].
    pub fn sized(inputs: usize, outputs: usize, adjustment: usize) -> Result<Self> {
        Self::new(
            inputs,
            hidden_layer_size(inputs, outputs, adjustment)?,
            outputs,
        )
    }

    /// 19 indicators, 11 hidden neurons, one score.
    pub const fn standard() -> Self {
        Self {
            inputs: 19,
            hidden: 11,
            outputs: 1,
        }
    }

    pub fn parameter_count(&self) -> usize {
        (self.inputs + 1) * self.hidden + (self.hidden + 1) * self.outputs
    }
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self::standard()
    }
}

/// Weights and thresholds of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    shape: NetworkShape,
    /// `hidden x inputs`, row-major.
    w: Vec<f64>,
    gamma: Vec<f64>,
    /// `outputs x hidden`, row-major.
    v: Vec<f64>,
    h: Vec<f64>,
}

impl NetworkParams {
    pub fn new(
        shape: NetworkShape,
        w: Vec<f64>,
        gamma: Vec<f64>,
        v: Vec<f64>,
        h: Vec<f64>,
    ) -> Result<Self> {
        let check = |what, expected, found: &Vec<f64>| {
            if found.len() != expected {
                return Err(Error::Dimension {
                    what,
                    expected,
                    found: found.len(),
                });
            }
            Ok(())
        };
        check("W", shape.hidden * shape.inputs, &w)?;
        check("gamma", shape.hidden, &gamma)?;
        check("V", shape.outputs * shape.hidden, &v)?;
        check("h", shape.outputs, &h)?;
        let p = Self {
            shape,
            w,
            gamma,
            v,
            h,
        };
        if !p.is_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(p)
    }

    pub fn zeros(shape: NetworkShape) -> Self {
        Self {
            shape,
            w: vec![0.0; shape.hidden * shape.inputs],
            gamma: vec![0.0; shape.hidden],
            v: vec![0.0; shape.outputs * shape.hidden],
            h: vec![0.0; shape.outputs],
        }
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn w_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }
    pub fn gamma_mut(&mut self) -> &mut [f64] {
        &mut self.gamma
    }
    pub fn v_mut(&mut self) -> &mut [f64] {
        &mut self.v
    }
    pub fn h_mut(&mut self) -> &mut [f64] {
        &mut self.h
    }

    /// Weight from input `i` into hidden neuron `j`.
    pub fn w_at(&self, j: usize, i: usize) -> f64 {
        self.w[j * self.shape.inputs + i]
    }

    /// Weight from hidden neuron `j` into output `k`.
    pub fn v_at(&self, k: usize, j: usize) -> f64 {
        self.v[k * self.shape.hidden + j]
    }

    /// All entries in chromosome order.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w
            .iter()
            .chain(&self.gamma)
            .chain(&self.v)
            .chain(&self.h)
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w
            .iter_mut()
            .chain(self.gamma.iter_mut())
            .chain(self.v.iter_mut())
            .chain(self.h.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

/// `2 / (1 + e^(-2z)) - 1`, the hyperbolic-tangent sigmoid. Saturates to
/// exactly +-1 in floating point once `|z|` exceeds about 19.
#[inline]
pub fn tansig(z: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * z).exp()) - 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

pub fn forward(params: &NetworkParams, x: &[f64]) -> Result<Forward> {
    let s = params.shape;
    if x.len() != s.inputs {
        return Err(Error::Dimension {
            what: "input vector",
            expected: s.inputs,
            found: x.len(),
        });
    }
    let mut out = Forward {
        hidden: vec![0.0; s.hidden],
        output: vec![0.0; s.outputs],
    };
    forward_into(params, x, &mut out.hidden, &mut out.output);
    Ok(out)
}

pub(crate) fn forward_into(
    params: &NetworkParams,
    x: &[f64],
    hidden: &mut [f64],
    output: &mut [f64],
) {
    let s = params.shape;
    for (j, a) in hidden.iter_mut().enumerate() {
        let row = &params.w[j * s.inputs..(j + 1) * s.inputs];
        let z: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + params.gamma[j];
        *a = tansig(z);
    }
    for (k, y) in output.iter_mut().enumerate() {
        let row = &params.v[k * s.hidden..(k + 1) * s.hidden];
        *y = row
            .iter()
            .zip(hidden.iter())
            .map(|(v, a)| v * a)
            .sum::<f64>()
            + params.h[k];
    }
}

pub(crate) fn check_labeled(params: &NetworkParams, data: &[Sample]) -> Result<()> {
    let s = params.shape;
    for (index, sample) in data.iter().enumerate() {
        if sample.features.len() != s.inputs {
            return Err(Error::Dimension {
                what: "sample features",
                expected: s.inputs,
                found: sample.features.len(),
            });
        }
        if !sample.has_target() {
            return Err(Error::MissingTarget { index });
        }
        if sample.targets.len() != s.outputs {
            return Err(Error::Dimension {
                what: "sample targets",
                expected: s.outputs,
                found: sample.targets.len(),
            });
        }
    }
    Ok(())
}

/// Sum over samples and outputs of the squared residual.
pub fn sse_loss(params: &NetworkParams, data: &[Sample]) -> Result<f64> {
    check_labeled(params, data)?;
    Ok(sse_unchecked(params, data))
}

pub(crate) fn sse_unchecked(params: &NetworkParams, data: &[Sample]) -> f64 {
    let s = params.shape;
    let mut hidden = vec![0.0; s.hidden];
    let mut output = vec![0.0; s.outputs];
    let mut sse = 0.0;
    for sample in data {
        forward_into(params, &sample.features, &mut hidden, &mut output);
        sse += output
            .iter()
            .zip(&sample.targets)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>();
    }
    sse
}

/// `dE/dtheta` by backpropagation, shaped like the parameters.
pub fn gradient(params: &NetworkParams, data: &[Sample]) -> Result<NetworkParams> {
    check_labeled(params, data)?;
    Ok(gradient_unchecked(params, data))
}

pub(crate) fn gradient_unchecked(params: &NetworkParams, data: &[Sample]) -> NetworkParams {
    let s = params.shape;
    let mut grad = NetworkParams::zeros(s);
    let mut hidden = vec![0.0; s.hidden];
    let mut output = vec![0.0; s.outputs];
    let mut delta = vec![0.0; s.hidden];
    for sample in data {
        let x = &sample.features;
        forward_into(params, x, &mut hidden, &mut output);
        delta.iter_mut().for_each(|d| *d = 0.0);
        for k in 0..s.outputs {
            let e2 = 2.0 * (output[k] - sample.targets[k]);
            grad.h[k] += e2;
            for j in 0..s.hidden {
                grad.v[k * s.hidden + j] += e2 * hidden[j];
                delta[j] += e2 * params.v[k * s.hidden + j];
            }
        }
        for j in 0..s.hidden {
            let dj = delta[j] * (1.0 - hidden[j] * hidden[j]);
            grad.gamma[j] += dj;
            let row = &mut grad.w[j * s.inputs..(j + 1) * s.inputs];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += dj * xi;
            }
        }
    }
    grad
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mse: f64,
    /// First network output per sample.
    pub predictions: Vec<f64>,
    /// First target per sample.
    pub targets: Vec<f64>,
    /// Mean absolute residual over the outputs of each sample.
    pub per_sample_abs_error: Vec<f64>,
    /// Fraction of samples whose predicted warning level equals the target's.
    pub level_accuracy: f64,
}

pub fn evaluate(params: &NetworkParams, data: &[Sample]) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Empty);
    }
    check_labeled(params, data)?;
    let s = params.shape;
    let mut hidden = vec![0.0; s.hidden];
    let mut output = vec![0.0; s.outputs];
    let mut sse = 0.0;
    let mut predictions = Vec::with_capacity(data.len());
    let mut targets = Vec::with_capacity(data.len());
    let mut abs = Vec::with_capacity(data.len());
    let mut hits = 0usize;
    for sample in data {
        forward_into(params, &sample.features, &mut hidden, &mut output);
        let mut a = 0.0;
        for (y, t) in output.iter().zip(&sample.targets) {
            sse += (y - t) * (y - t);
            a += (y - t).abs();
        }
        abs.push(a / s.outputs as f64);
        predictions.push(output[0]);
        targets.push(sample.targets[0]);
        if classify_warning(output[0]) == classify_warning(sample.targets[0]) {
            hits += 1;
        }
    }
    Ok(Evaluation {
        mse: sse / (data.len() * s.outputs) as f64,
        predictions,
        targets,
        per_sample_abs_error: abs,
        level_accuracy: hits as f64 / data.len() as f64,
    })
}
