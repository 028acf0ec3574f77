//! Resolved run configuration: defaults, then the TOML file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gabp::evolution::{Coding, Selection};
use gabp::{GaConfig, IndicatorSchema, NetworkShape, Orientation, SynthOptions, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    pub network: NetworkSection,
    pub training: TrainConfig,
    pub evolution: EvolutionSection,
    pub data: DataSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub population_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub max_generations: usize,
    pub gene_min: f64,
    pub gene_max: f64,
    pub selection_k: f64,
    pub coding: Coding,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub samples: usize,
    pub test_size: usize,
    pub noise_sd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    /// Indicator codes whose larger raw values mean more danger.
    pub cost_indicators: Vec<String>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden: NetworkShape::standard().hidden,
        }
    }
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let ga = GaConfig::default();
        Self {
            population_size: ga.population_size,
            crossover_prob: ga.crossover_prob,
            mutation_prob: ga.mutation_prob,
            max_generations: ga.max_generations,
            gene_min: ga.gene_min,
            gene_max: ga.gene_max,
            selection_k: ga.selection_k,
            coding: ga.coding,
            selection: ga.selection,
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        let synth = SynthOptions::default();
        Self {
            samples: synth.samples,
            test_size: synth.test_size,
            noise_sd: synth.noise_sd,
            train: None,
            test: None,
            cost_indicators: Vec::new(),
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn schema(&self) -> Result<IndicatorSchema> {
        let mut schema = IndicatorSchema::standard();
        for code in &self.data.cost_indicators {
            schema.set_orientation(code, Orientation::Cost)?;
        }
        Ok(schema)
    }

    pub fn shape(&self) -> Result<NetworkShape> {
        Ok(NetworkShape::new(
            IndicatorSchema::standard().len(),
            self.network.hidden,
            1,
        )?)
    }

    pub fn ga(&self) -> GaConfig {
        let e = &self.evolution;
        GaConfig {
            population_size: e.population_size,
            crossover_prob: e.crossover_prob,
            mutation_prob: e.mutation_prob,
            max_generations: e.max_generations,
            gene_min: e.gene_min,
            gene_max: e.gene_max,
            selection_k: e.selection_k,
            coding: e.coding,
            selection: e.selection,
            seed: self.seed,
        }
    }

    pub fn synth(&self) -> SynthOptions {
        SynthOptions {
            samples: self.data.samples,
            test_size: self.data.test_size,
            noise_sd: self.data.noise_sd,
            gene_min: self.evolution.gene_min,
            gene_max: self.evolution.gene_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape()?;
        self.schema()?;
        self.ga().validate()?;
        self.training.validate()?;
        if self.data.test_size >= self.data.samples {
            bail!(
                "data.test_size ({}) must be below data.samples ({})",
                self.data.test_size,
                self.data.samples
            );
        }
        Ok(())
    }

    /// Header block embedded in every report: tool version, the command
    /// being run and the fully resolved configuration.
    pub fn provenance(&self, command: &str, extra: &[(&str, String)]) -> Result<String> {
        let mut out = format!(
            "generator = \"gabp {}\"\ncommand = \"{command}\"\n",
            gabp::VERSION
        );
        for (key, value) in extra {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out.push_str(&toml::to_string(self).context("cannot serialise configuration")?);
        Ok(out)
    }
}
