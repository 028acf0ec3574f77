//! GA-BP and plain BP runs on a shared train/test split, their comparison,
//! and the synthetic datasets used when no recorded data is at hand.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{fit_normalization, IndicatorSchema, NormStats, Sample};
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionTrace, GaConfig, GeneBounds};
use crate::genome::{self, chromosome_length, Chromosome};
use crate::network::{
    self, ErrorCurve, Evaluation, NetworkParams, NetworkShape, StopReason, TrainConfig,
};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[serde(rename = "gabp")]
    GaBp,
    Bp,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::GaBp => "gabp",
            Variant::Bp => "bp",
        }
    }
}

/// Training and test samples plus a fingerprint of their exact bits, used to
/// check that two runs saw the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    fingerprint: u64,
}

impl Split {
    pub fn new(train: Vec<Sample>, test: Vec<Sample>) -> Self {
        let mut hasher = DefaultHasher::new();
        for (tag, set) in [(0u8, &train), (1u8, &test)] {
            tag.hash(&mut hasher);
            set.len().hash(&mut hasher);
            for s in set {
                s.features.len().hash(&mut hasher);
                s.features
                    .iter()
                    .for_each(|v| v.to_bits().hash(&mut hasher));
                s.targets.len().hash(&mut hasher);
                s.targets.iter().for_each(|v| v.to_bits().hash(&mut hasher));
            }
        }
        let fingerprint = hasher.finish();
        Self {
            train,
            test,
            fingerprint,
        }
    }

    /// Fits normalisation on the raw training rows and applies it to both sets.
    pub fn normalized(
        raw_train: &[Sample],
        raw_test: &[Sample],
        schema: &IndicatorSchema,
    ) -> Result<(Self, NormStats)> {
        let stats = fit_normalization(raw_train, schema)?;
        let train = stats.apply_all(raw_train)?;
        let test = stats.apply_all(raw_test)?;
        Ok((Self::new(train, test), stats))
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub variant: Variant,
    pub seed: u64,
    /// Present for GA-BP runs only.
    pub trace: Option<EvolutionTrace>,
    pub curve: ErrorCurve,
    pub stop_reason: StopReason,
    /// Network at the start of gradient training.
    pub initial_params: NetworkParams,
    pub params: NetworkParams,
    pub train: Evaluation,
    /// `None` when the split has no test samples.
    pub test: Option<Evaluation>,
    pub duration: Duration,
    pub split_fingerprint: u64,
}

fn finish(
    variant: Variant,
    seed: u64,
    trace: Option<EvolutionTrace>,
    initial: NetworkParams,
    split: &Split,
    train_cfg: &TrainConfig,
    started: Instant,
) -> Result<RunReport> {
    let outcome = network::train(initial.clone(), &split.train, train_cfg)?;
    let train = network::evaluate(&outcome.params, &split.train)?;
    let test = if split.test.is_empty() {
        None
    } else {
        Some(network::evaluate(&outcome.params, &split.test)?)
    };
    Ok(RunReport {
        variant,
        seed,
        trace,
        curve: outcome.curve,
        stop_reason: outcome.stop_reason,
        initial_params: initial,
        params: outcome.params,
        train,
        test,
        duration: started.elapsed(),
        split_fingerprint: split.fingerprint,
    })
}

/// Evolves initial weights with the GA (seeded by `ga.seed`), then refines
/// the best chromosome with the gradient trainer.
pub fn run_gabp(
    split: &Split,
    shape: NetworkShape,
    ga: &GaConfig,
    train_cfg: &TrainConfig,
) -> Result<RunReport> {
    let started = Instant::now();
    train_cfg.validate()?;
    let evolved = evolve(&split.train, shape, ga)?;
    let initial = genome::decode(&evolved.best, shape)?;
    finish(
        Variant::GaBp,
        ga.seed,
        Some(evolved.trace),
        initial,
        split,
        train_cfg,
        started,
    )
}

/// Gradient training from a seeded uniform initialisation on `bounds`.
pub fn run_bp(
    split: &Split,
    shape: NetworkShape,
    train_cfg: &TrainConfig,
    bounds: GeneBounds,
    seed: u64,
) -> Result<RunReport> {
    let started = Instant::now();
    train_cfg.validate()?;
    let initial = random_params(shape, bounds, &mut rng::stream(seed, Stream::BpInit))?;
    finish(Variant::Bp, seed, None, initial, split, train_cfg, started)
}

fn random_params<R: Rng + ?Sized>(
    shape: NetworkShape,
    bounds: GeneBounds,
    rng: &mut R,
) -> Result<NetworkParams> {
    let genes = (0..chromosome_length(shape))
        .map(|_| bounds.sample(rng))
        .collect();
    genome::decode(&Chromosome::new(genes), shape)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleComparison {
    pub index: usize,
    pub target: f64,
    pub bp_prediction: f64,
    pub gabp_prediction: f64,
    pub bp_abs_error: f64,
    pub gabp_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub gabp: RunReport,
    pub bp: RunReport,
    /// One row per test sample.
    pub rows: Vec<SampleComparison>,
    /// `(mse_bp - mse_gabp) / mse_bp` on the test set.
    pub relative_reduction: f64,
}

/// Relative error reduction of GA-BP over BP. Zero when both errors are zero.
pub fn relative_reduction(mse_bp: f64, mse_gabp: f64) -> f64 {
    if mse_bp == mse_gabp {
        0.0
    } else {
        (mse_bp - mse_gabp) / mse_bp
    }
}

pub fn compare(gabp: RunReport, bp: RunReport) -> Result<ComparisonReport> {
    if gabp.variant != Variant::GaBp || bp.variant != Variant::Bp {
        return Err(Error::Config(
            "compare expects a GA-BP report and a BP report".into(),
        ));
    }
    if gabp.split_fingerprint != bp.split_fingerprint {
        return Err(Error::SplitMismatch);
    }
    let (Some(gt), Some(bt)) = (&gabp.test, &bp.test) else {
        return Err(Error::Empty);
    };
    let rows = (0..gt.predictions.len())
        .map(|i| SampleComparison {
            index: i,
            target: gt.targets[i],
            bp_prediction: bt.predictions[i],
            gabp_prediction: gt.predictions[i],
            bp_abs_error: bt.per_sample_abs_error[i],
            gabp_abs_error: gt.per_sample_abs_error[i],
        })
        .collect();
    let relative_reduction = relative_reduction(bt.mse, gt.mse);
    Ok(ComparisonReport {
        gabp,
        bp,
        rows,
        relative_reduction,
    })
}

/// Both variants on one split, BP initialised from the same seed as the GA.
pub fn paired_run(
    split: &Split,
    shape: NetworkShape,
    ga: &GaConfig,
    train_cfg: &TrainConfig,
) -> Result<ComparisonReport> {
    let gabp = run_gabp(split, shape, ga, train_cfg)?;
    let bp = run_bp(split, shape, train_cfg, ga.bounds(), ga.seed)?;
    compare(gabp, bp)
}

/// [`paired_run`] for every seed, in parallel; results keep the seed order.
pub fn paired_runs<F>(
    seeds: &[u64],
    split_for: F,
    shape: NetworkShape,
    ga: &GaConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<ComparisonReport>>
where
    F: Fn(u64) -> Result<Split> + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| {
            let split = split_for(seed)?;
            paired_run(&split, shape, &GaConfig { seed, ..ga.clone() }, train_cfg)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSummary {
    pub runs: usize,
    pub median_bp_train_mse: f64,
    pub median_gabp_train_mse: f64,
    pub median_bp_test_mse: f64,
    pub median_gabp_test_mse: f64,
    pub median_relative_reduction: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub fn summarize(reports: &[ComparisonReport]) -> SweepSummary {
    let col =
        |f: &dyn Fn(&ComparisonReport) -> f64| median(&reports.iter().map(f).collect::<Vec<_>>());
    let test_mse = |r: &RunReport| r.test.as_ref().map_or(f64::NAN, |t| t.mse);
    SweepSummary {
        runs: reports.len(),
        median_bp_train_mse: col(&|r| r.bp.train.mse),
        median_gabp_train_mse: col(&|r| r.gabp.train.mse),
        median_bp_test_mse: col(&|r| test_mse(&r.bp)),
        median_gabp_test_mse: col(&|r| test_mse(&r.gabp)),
        median_relative_reduction: col(&|r| r.relative_reduction),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOptions {
    pub samples: usize,
    pub test_size: usize,
    pub noise_sd: f64,
    pub gene_min: f64,
    pub gene_max: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            samples: 13,
            test_size: 3,
            noise_sd: 0.02,
            gene_min: -1.0,
            gene_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// The network that produced the noiseless targets.
    pub truth: NetworkParams,
}

impl SynthData {
    pub fn split(&self) -> Split {
        Split::new(self.train.clone(), self.test.clone())
    }
}

/// Samples a hidden network with genes uniform on the bounds and inputs
/// uniform on `[0, 1]`. The hidden network's output layer is then rescaled so
/// that its noiseless outputs over the drawn inputs span `[0.1, 0.9]`;
/// targets are those outputs plus Gaussian noise, clamped to `[0, 1]`. The
/// first `samples - test_size` rows form the training set.
pub fn synth_dataset(opts: &SynthOptions, shape: NetworkShape, seed: u64) -> Result<SynthData> {
    if opts.samples < 4 {
        return Err(Error::Config(format!(
            "need at least 4 samples, got {}",
            opts.samples
        )));
    }
    if opts.test_size >= opts.samples {
        return Err(Error::Config(
            "test_size must leave at least one training sample".into(),
        ));
    }
    if !(opts.noise_sd >= 0.0 && opts.noise_sd.is_finite()) {
        return Err(Error::Config(
            "noise_sd must be finite and non-negative".into(),
        ));
    }
    let bounds = GeneBounds::new(opts.gene_min, opts.gene_max)?;
    let noise = Normal::new(0.0, opts.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = rng::stream(seed, Stream::DataGen);

    let mut truth = random_params(shape, bounds, &mut rng)?;
    let inputs: Vec<Vec<f64>> = (0..opts.samples)
        .map(|_| (0..shape.inputs).map(|_| rng.random::<f64>()).collect())
        .collect();
    let raw: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| network::forward(&truth, x).map(|f| f.output))
        .collect::<Result<_>>()?;
    for k in 0..shape.outputs {
        let lo = raw.iter().map(|o| o[k]).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|o| o[k]).fold(f64::NEG_INFINITY, f64::max);
        let (scale, h) = if hi - lo > 1e-12 {
            let s = 0.8 / (hi - lo);
            (s, 0.1 + s * (truth.h()[k] - lo))
        } else {
            (0.0, 0.5)
        };
        let q = shape.hidden;
        truth.v_mut()[k * q..(k + 1) * q]
            .iter_mut()
            .for_each(|v| *v *= scale);
        truth.h_mut()[k] = h;
    }

    let mut samples = Vec::with_capacity(opts.samples);
    for x in inputs {
        let out = network::forward(&truth, &x)?.output;
        let targets = out
            .into_iter()
            .map(|y| {
                let e = if opts.noise_sd > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                (y + e).clamp(0.0, 1.0)
            })
            .collect();
        samples.push(Sample::with_targets(x, targets));
    }
    let test = samples.split_off(opts.samples - opts.test_size);
    Ok(SynthData {
        train: samples,
        test,
        truth,
    })
}
