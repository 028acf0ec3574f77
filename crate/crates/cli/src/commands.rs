use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gabp::pipeline::{paired_runs, summarize};
use gabp::{
    classify_warning, dataset, network, report, run_bp, run_gabp, synth_dataset, ComparisonReport,
    Evaluation, IndicatorSchema, ModelFile, RunReport, Sample, Split, TrainMethod,
};
use serde::Serialize;

use crate::config::CliConfig;
use crate::output::Staging;
use crate::{Command, Common, DataFiles, SynthArgs, TrainerArg, Tuning, VariantArg};

pub fn run(command: Command) -> Result<Vec<PathBuf>> {
    match command {
        Command::GenData { common, synth } => gen_data(&common, &synth),
        Command::Train {
            common,
            files,
            tuning,
        } => train(&common, &files, &tuning),
        Command::Predict {
            common,
            model,
            input,
        } => predict(&common, &model, &input),
        Command::Evaluate {
            common,
            model,
            test,
        } => evaluate(&common, &model, &test),
        Command::Compare {
            common,
            files,
            synth,
            tuning,
            seeds,
            svg,
        } => compare(&common, &files, &synth, &tuning, seeds, svg),
    }
}

fn resolve(
    common: &Common,
    files: &DataFiles,
    synth: &SynthArgs,
    tuning: &Tuning,
) -> Result<CliConfig> {
    let mut cfg = match &common.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.trainer {
        cfg.training.method = match t {
            TrainerArg::Lm => TrainMethod::Lm,
            TrainerArg::Gd => TrainMethod::Gd,
        };
    }
    if let Some(p) = &files.train {
        cfg.data.train = Some(p.clone());
    }
    if let Some(p) = &files.test {
        cfg.data.test = Some(p.clone());
    }
    if let Some(v) = synth.samples {
        cfg.data.samples = v;
    }
    if let Some(v) = synth.test_size {
        cfg.data.test_size = v;
    }
    if let Some(v) = synth.noise_sd {
        cfg.data.noise_sd = v;
    }
    if let Some(v) = tuning.hidden {
        cfg.network.hidden = v;
    }
    if let Some(v) = tuning.population {
        cfg.evolution.population_size = v;
    }
    if let Some(v) = tuning.generations {
        cfg.evolution.max_generations = v;
    }
    if let Some(v) = tuning.max_iter {
        cfg.training.max_iterations = v;
    }
    if let Some(v) = tuning.learning_rate {
        cfg.training.learning_rate = v;
    }
    if let Some(v) = tuning.goal_mse {
        cfg.training.goal_mse = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn variant_name(v: VariantArg) -> &'static str {
    match v {
        VariantArg::Gabp => "gabp",
        VariantArg::Bp => "bp",
    }
}

fn quoted(s: &str) -> String {
    format!("\"{s}\"")
}

/// A TOML report: the provenance block followed by a `[result]` table.
fn toml_report<T: Serialize>(provenance: &str, result: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Wrapper<'a, T> {
        result: &'a T,
    }
    let body = toml::to_string(&Wrapper { result }).context("cannot serialise report")?;
    Ok(format!("{provenance}\n{body}"))
}

fn gen_data(common: &Common, synth: &SynthArgs) -> Result<Vec<PathBuf>> {
    let cfg = resolve(common, &DataFiles::default(), synth, &Tuning::default())?;
    let schema = IndicatorSchema::standard();
    let data = synth_dataset(&cfg.synth(), cfg.shape()?, cfg.seed).context("generating data")?;
    let mut st = Staging::new(&common.out)?;
    st.write("train.csv", |w| {
        Ok(dataset::write_samples(w, &schema, &data.train, true)?)
    })?;
    st.write("test.csv", |w| {
        Ok(dataset::write_samples(w, &schema, &data.test, true)?)
    })?;
    st.write_str("truth.toml", &ModelFile::new(data.truth, None)?.to_toml())?;
    st.commit()
}

fn load_labelled(path: &Path, schema: &IndicatorSchema, what: &str) -> Result<Vec<Sample>> {
    dataset::load_samples(path, schema, true).with_context(|| format!("loading {what} data"))
}

/// Reads the configured train (and optional test) files and normalises both
/// with statistics fitted on the training rows.
fn load_split(cfg: &CliConfig) -> Result<(Split, gabp::NormStats)> {
    let schema = cfg.schema()?;
    let Some(train_path) = &cfg.data.train else {
        bail!("no training data: pass --train PATH or set data.train in the config");
    };
    let raw_train = load_labelled(train_path, &schema, "training")?;
    if raw_train.is_empty() {
        bail!("training data {} has no rows", train_path.display());
    }
    let raw_test = match &cfg.data.test {
        Some(p) => load_labelled(p, &schema, "test")?,
        None => Vec::new(),
    };
    Split::normalized(&raw_train, &raw_test, &schema).context("normalising data")
}

#[derive(Serialize)]
struct RunSummary {
    variant: &'static str,
    seed: u64,
    stop_reason: &'static str,
    iterations: usize,
    initial_sse: f64,
    final_sse: f64,
    train_mse: f64,
    train_level_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_level_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generations: Option<usize>,
    split_fingerprint: String,
}

impl RunSummary {
    fn new(r: &RunReport) -> Self {
        Self {
            variant: r.variant.name(),
            seed: r.seed,
            stop_reason: r.stop_reason.name(),
            iterations: r.curve.len().saturating_sub(1),
            initial_sse: r.curve.first().map_or(f64::NAN, |p| p.sse),
            final_sse: r.curve.last().map_or(f64::NAN, |p| p.sse),
            train_mse: r.train.mse,
            train_level_accuracy: r.train.level_accuracy,
            test_mse: r.test.as_ref().map(|t| t.mse),
            test_level_accuracy: r.test.as_ref().map(|t| t.level_accuracy),
            generations: r.trace.as_ref().map(|t| t.generations.len()),
            split_fingerprint: format!("{:016x}", r.split_fingerprint),
        }
    }
}

fn train(common: &Common, files: &DataFiles, tuning: &Tuning) -> Result<Vec<PathBuf>> {
    let cfg = resolve(common, files, &SynthArgs::default(), tuning)?;
    let variant = common.variant.unwrap_or(VariantArg::Gabp);
    let provenance = cfg.provenance("train", &[("variant", quoted(variant_name(variant)))])?;
    let (split, norm) = load_split(&cfg)?;
    let shape = cfg.shape()?;
    let run = match variant {
        VariantArg::Gabp => {
            run_gabp(&split, shape, &cfg.ga(), &cfg.training).context("GA-BP training")?
        }
        VariantArg::Bp => run_bp(&split, shape, &cfg.training, cfg.ga().bounds(), cfg.seed)
            .context("BP training")?,
    };

    let mut st = Staging::new(&common.out)?;
    st.write_str(
        "model.toml",
        &ModelFile::new(run.params.clone(), Some(norm))?.to_toml(),
    )?;
    st.write("curve.csv", |w| {
        Ok(report::write_curve(w, &provenance, &run.curve)?)
    })?;
    if let Some(trace) = &run.trace {
        st.write("trace.csv", |w| {
            Ok(report::write_trace(w, &provenance, trace)?)
        })?;
    }
    st.write_str(
        "report.toml",
        &toml_report(&provenance, &RunSummary::new(&run))?,
    )?;
    st.commit()
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let model =
        ModelFile::load(path).with_context(|| format!("loading model {}", path.display()))?;
    let n = IndicatorSchema::standard().len();
    if model.shape().inputs != n {
        bail!(
            "model {} expects {} inputs but rows carry {n} indicators",
            path.display(),
            model.shape().inputs
        );
    }
    Ok(model)
}

fn normalise_rows(model: &ModelFile, rows: Vec<Sample>) -> Result<Vec<Sample>> {
    match &model.norm {
        Some(norm) => Ok(norm.apply_all(&rows)?),
        None => Ok(rows),
    }
}

fn predict(common: &Common, model_path: &Path, input: &Path) -> Result<Vec<PathBuf>> {
    let cfg = resolve(
        common,
        &DataFiles::default(),
        &SynthArgs::default(),
        &Tuning::default(),
    )?;
    let provenance = cfg.provenance(
        "predict",
        &[
            ("model", quoted(&model_path.display().to_string())),
            ("input", quoted(&input.display().to_string())),
        ],
    )?;
    let model = load_model(model_path)?;
    let rows = dataset::load_samples(input, &cfg.schema()?, false).context("loading input rows")?;
    let rows = normalise_rows(&model, rows)?;
    let mut scores = Vec::with_capacity(rows.len());
    for s in &rows {
        scores.push(network::forward(&model.params, &s.features)?.output[0]);
    }
    let mut st = Staging::new(&common.out)?;
    st.write("predictions.csv", |w| {
        for line in provenance.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "score,level")?;
        for &y in &scores {
            writeln!(w, "{y},{}", classify_warning(y))?;
        }
        Ok(())
    })?;
    st.commit()
}

#[derive(Serialize)]
struct Metrics {
    samples: usize,
    mse: f64,
    level_accuracy: f64,
}

fn evaluate(common: &Common, model_path: &Path, test: &Path) -> Result<Vec<PathBuf>> {
    let cfg = resolve(
        common,
        &DataFiles::default(),
        &SynthArgs::default(),
        &Tuning::default(),
    )?;
    let provenance = cfg.provenance(
        "evaluate",
        &[
            ("model", quoted(&model_path.display().to_string())),
            ("test", quoted(&test.display().to_string())),
        ],
    )?;
    let model = load_model(model_path)?;
    let rows = normalise_rows(&model, load_labelled(test, &cfg.schema()?, "evaluation")?)?;
    let eval: Evaluation = network::evaluate(&model.params, &rows).context("evaluating model")?;

    let mut st = Staging::new(&common.out)?;
    st.write("evaluation.csv", |w| {
        for line in provenance.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(
            w,
            "sample,target,prediction,abs_error,target_level,predicted_level"
        )?;
        for i in 0..eval.predictions.len() {
            let (t, y) = (eval.targets[i], eval.predictions[i]);
            writeln!(
                w,
                "{i},{t},{y},{},{},{}",
                eval.per_sample_abs_error[i],
                classify_warning(t),
                classify_warning(y)
            )?;
        }
        Ok(())
    })?;
    let metrics = Metrics {
        samples: rows.len(),
        mse: eval.mse,
        level_accuracy: eval.level_accuracy,
    };
    st.write_str("metrics.toml", &toml_report(&provenance, &metrics)?)?;
    st.commit()
}

#[derive(Serialize)]
struct CompareSummary {
    runs: usize,
    first_seed: u64,
    median_bp_train_mse: f64,
    median_gabp_train_mse: f64,
    median_bp_test_mse: f64,
    median_gabp_test_mse: f64,
    median_relative_reduction: f64,
    gabp_lower_initial_sse: usize,
}

fn compare(
    common: &Common,
    files: &DataFiles,
    synth: &SynthArgs,
    tuning: &Tuning,
    seeds: u64,
    svg: bool,
) -> Result<Vec<PathBuf>> {
    if let Some(v) = common.variant {
        bail!(
            "compare always runs both variants; --variant {} is not accepted here",
            variant_name(v)
        );
    }
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = resolve(common, files, synth, tuning)?;
    let provenance = cfg.provenance("compare", &[("seeds", seeds.to_string())])?;
    let shape = cfg.shape()?;
    let seed_list: Vec<u64> = (0..seeds).map(|i| cfg.seed.wrapping_add(i)).collect();

    let reports: Vec<ComparisonReport> = if cfg.data.train.is_some() {
        let (split, _) = load_split(&cfg)?;
        if split.test.is_empty() {
            bail!("compare needs test data: pass --test PATH");
        }
        paired_runs(
            &seed_list,
            |_| Ok(split.clone()),
            shape,
            &cfg.ga(),
            &cfg.training,
        )
    } else {
        let schema = cfg.schema()?;
        let opts = cfg.synth();
        let split_for = |seed| {
            let d = synth_dataset(&opts, shape, seed)?;
            Split::normalized(&d.train, &d.test, &schema).map(|(s, _)| s)
        };
        paired_runs(&seed_list, split_for, shape, &cfg.ga(), &cfg.training)
    }
    .context("paired runs")?;

    let sweep = summarize(&reports);
    let median_row = (reports.len() > 1).then_some(&sweep);
    let summary = CompareSummary {
        runs: sweep.runs,
        first_seed: cfg.seed,
        median_bp_train_mse: sweep.median_bp_train_mse,
        median_gabp_train_mse: sweep.median_gabp_train_mse,
        median_bp_test_mse: sweep.median_bp_test_mse,
        median_gabp_test_mse: sweep.median_gabp_test_mse,
        median_relative_reduction: sweep.median_relative_reduction,
        gabp_lower_initial_sse: reports
            .iter()
            .filter(|r| initial_sse(&r.gabp) < initial_sse(&r.bp))
            .count(),
    };

    let mut st = Staging::new(&common.out)?;
    st.write("comparison.csv", |w| {
        Ok(report::write_comparison(
            w,
            &provenance,
            &reports,
            median_row,
        )?)
    })?;
    st.write("samples.csv", |w| {
        Ok(report::write_sample_table(w, &provenance, &reports)?)
    })?;
    st.write("curves.csv", |w| {
        Ok(report::write_paired_curves(w, &provenance, &reports)?)
    })?;
    st.write_str("report.toml", &toml_report(&provenance, &summary)?)?;
    if svg {
        for r in &reports {
            let seed = r.gabp.seed;
            st.write_str(&format!("curves_{seed}.svg"), &report::svg_error_curves(r))?;
            st.write_str(
                &format!("predictions_{seed}.svg"),
                &report::svg_predictions(r),
            )?;
        }
    }
    st.commit()
}

fn initial_sse(r: &RunReport) -> f64 {
    r.curve.first().map_or(f64::NAN, |p| p.sse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(seed: Option<u64>) -> Common {
        Common {
            config: None,
            seed,
            out: PathBuf::from("."),
            variant: None,
            trainer: Some(TrainerArg::Gd),
        }
    }

    #[test]
    fn flags_override_file() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 4\n[evolution]\npopulation_size = 12\nmax_generations = 7\n",
        )
        .unwrap();
        let mut c = common(Some(9));
        c.config = Some(path);
        let tuning = Tuning {
            generations: Some(3),
            ..Default::default()
        };
        let cfg = resolve(&c, &DataFiles::default(), &SynthArgs::default(), &tuning).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.evolution.population_size, 12);
        assert_eq!(cfg.evolution.max_generations, 3);
        assert_eq!(cfg.training.method, TrainMethod::Gd);
    }

    #[test]
    fn invalid_overrides_rejected() {
        let tuning = Tuning {
            population: Some(1),
            ..Default::default()
        };
        assert!(resolve(
            &common(None),
            &DataFiles::default(),
            &SynthArgs::default(),
            &tuning
        )
        .is_err());
        let synth = SynthArgs {
            samples: Some(5),
            test_size: Some(5),
            noise_sd: None,
        };
        assert!(resolve(
            &common(None),
            &DataFiles::default(),
            &synth,
            &Tuning::default()
        )
        .is_err());
    }

    #[test]
    fn report_has_provenance_and_result() {
        let cfg = CliConfig::default();
        let prov = cfg.provenance("evaluate", &[]).unwrap();
        let text = toml_report(
            &prov,
            &Metrics {
                samples: 3,
                mse: 0.25,
                level_accuracy: 1.0,
            },
        )
        .unwrap();
        let table: toml::Table = toml::from_str(&text).unwrap();
        assert_eq!(table["command"].as_str(), Some("evaluate"));
        assert_eq!(table["result"]["mse"].as_float(), Some(0.25));
        assert_eq!(table["evolution"]["population_size"].as_integer(), Some(60));
    }
}
