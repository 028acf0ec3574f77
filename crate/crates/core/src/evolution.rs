//! Real-coded genetic algorithm over network chromosomes.
//!
//! One generation: evaluate every chromosome, carry the best one over
//! unchanged, then fill the rest of the next population from roulette-selected
//! parent pairs, blending one gene per pair with probability `crossover_prob`
//! and mutating each gene of each child with probability `mutation_prob`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::genome::{self, chromosome_length, Chromosome};
use crate::network::{self, NetworkShape};
use crate::rng::{self, Stream};

/// Guards `1/E` and `k/E` against a perfect chromosome.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneBounds {
    pub min: f64,
    pub max: f64,
}

impl GeneBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Config(format!(
                "gene bounds [{min}, {max}] are empty"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.min..=self.max).contains(&x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.min..=self.max)
    }
}

impl Default for GeneBounds {
    fn default() -> Self {
        Self {
            min: -1.0,
            max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coding {
    #[default]
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    #[default]
    Roulette,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub max_generations: usize,
    pub gene_min: f64,
    pub gene_max: f64,
    /// Roulette adjustment coefficient; cancels out of the probabilities.
    pub selection_k: f64,
    pub coding: Coding,
    pub selection: Selection,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 60,
            crossover_prob: 0.7,
            mutation_prob: 0.05,
            max_generations: 50,
            gene_min: -1.0,
            gene_max: 1.0,
            selection_k: 1.0,
            coding: Coding::Real,
            selection: Selection::Roulette,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn bounds(&self) -> GeneBounds {
        GeneBounds {
            min: self.gene_min,
            max: self.gene_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GeneBounds::new(self.gene_min, self.gene_max)?;
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.max_generations == 0 {
            return bad("max_generations must be positive");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) || !(0.0..=1.0).contains(&self.mutation_prob)
        {
            return bad("operator probabilities must lie in [0, 1]");
        }
        if !(self.selection_k > 0.0 && self.selection_k.is_finite()) {
            return bad("selection_k must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    /// Sum of squared errors of the decoded network.
    pub objective: f64,
    /// `1 / (objective + EPSILON)`.
    pub fitness: f64,
}

pub fn fitness(chromosome: &Chromosome, data: &[Sample], shape: NetworkShape) -> Result<Fitness> {
    let params = genome::decode(chromosome, shape)?;
    let objective = network::sse_loss(&params, data)?;
    if objective.is_nan() {
        return Err(Error::NonFinite("objective"));
    }
    Ok(Fitness {
        objective,
        fitness: 1.0 / (objective + EPSILON),
    })
}

/// Roulette probabilities `P_i = f_i / sum f` with `f_i = k / (E_i + EPSILON)`,
/// so lower error gets the larger share.
pub fn selection_probabilities(objectives: &[f64], k: f64) -> Vec<f64> {
    let scores: Vec<f64> = objectives.iter().map(|e| k / (e + EPSILON)).collect();
    let total: f64 = scores.iter().sum();
    scores.into_iter().map(|f| f / total).collect()
}

/// Index chosen by cumulative-sum inversion of the uniform draw `u` in `[0, 1)`.
pub fn roulette_index(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` past the final partial sum.
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn roulette_select<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    roulette_index(probabilities, rng.random::<f64>())
}

/// Blends gene `j` of both parents with coefficient `b`; both children are
/// computed from the original parent values.
pub fn crossover(
    a: &Chromosome,
    n: &Chromosome,
    j: usize,
    b: f64,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() != n.len() {
        return Err(Error::ChromosomeLength {
            expected: a.len(),
            found: n.len(),
        });
    }
    if j >= a.len() {
        return Err(Error::Dimension {
            what: "crossover position",
            expected: a.len(),
            found: j,
        });
    }
    let (mut ca, mut cn) = (a.clone(), n.clone());
    let (aj, nj) = (a.genes[j], n.genes[j]);
    ca.genes[j] = aj * (1.0 - b) + nj * b;
    cn.genes[j] = nj * (1.0 - b) + aj * b;
    Ok((ca, cn))
}

/// Step-size factor `r2 (1 - g / G_max)^2`; vanishes at the last generation.
pub fn annealing(generation: usize, max_generations: usize, r2: f64) -> f64 {
    let t = 1.0 - (generation as f64 / max_generations as f64).min(1.0);
    r2 * t * t
}

/// One gene of the non-uniform mutation, clamped to the bounds.
pub fn mutate_gene(a: f64, f: f64, r: f64, bounds: GeneBounds) -> f64 {
    let raw = if r >= 0.5 {
        a + f * (a - bounds.max)
    } else {
        a + f * (bounds.min - a)
    };
    raw.clamp(bounds.min, bounds.max)
}

pub fn mutate<R: Rng + ?Sized>(
    chromosome: &Chromosome,
    generation: usize,
    cfg: &GaConfig,
    rng: &mut R,
) -> Chromosome {
    let bounds = cfg.bounds();
    let mut out = chromosome.clone();
    for gene in &mut out.genes {
        if rng.random::<f64>() < cfg.mutation_prob {
            let r: f64 = rng.random();
            let r2: f64 = rng.random();
            *gene = mutate_gene(
                *gene,
                annealing(generation, cfg.max_generations, r2),
                r,
                bounds,
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub objective: f64,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_sse: f64,
    pub mean_sse: f64,
    pub best: Chromosome,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionTrace {
    pub generations: Vec<GenerationRecord>,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    pub fn best_sse(&self) -> impl Iterator<Item = f64> + '_ {
        self.generations.iter().map(|g| g.best_sse)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionOutcome {
    pub best: Chromosome,
    pub best_sse: f64,
    pub trace: EvolutionTrace,
}

pub fn evolve(data: &[Sample], shape: NetworkShape, cfg: &GaConfig) -> Result<EvolutionOutcome> {
    evolve_observed(data, shape, cfg, |_, _| {})
}

/// [`evolve`], calling `observe(generation, population)` after each
/// generation has been evaluated.
pub fn evolve_observed<F>(
    data: &[Sample],
    shape: NetworkShape,
    cfg: &GaConfig,
    mut observe: F,
) -> Result<EvolutionOutcome>
where
    F: FnMut(usize, &[Individual]),
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty);
    }
    let bounds = cfg.bounds();
    let len = chromosome_length(shape);
    let mut init_rng = rng::stream(cfg.seed, Stream::PopulationInit);
    let mut op_rng = rng::stream(cfg.seed, Stream::Operators);

    let mut chromosomes: Vec<Chromosome> = (0..cfg.population_size)
        .map(|_| Chromosome::new((0..len).map(|_| bounds.sample(&mut init_rng)).collect()))
        .collect();

    let mut trace = EvolutionTrace::default();
    let mut best: Option<(Chromosome, f64)> = None;

    for g in 0..cfg.max_generations {
        let population = chromosomes
            .into_iter()
            .map(|c| {
                let f = fitness(&c, data, shape)?;
                Ok(Individual {
                    chromosome: c,
                    objective: f.objective,
                    fitness: f.fitness,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        observe(g, &population);

        let elite = argmin(&population);
        let elite_sse = population[elite].objective;
        let mean_sse =
            population.iter().map(|i| i.objective).sum::<f64>() / population.len() as f64;
        trace.generations.push(GenerationRecord {
            generation: g,
            best_sse: elite_sse,
            mean_sse,
            best: population[elite].chromosome.clone(),
        });
        if best.as_ref().is_none_or(|(_, e)| elite_sse < *e) {
            best = Some((population[elite].chromosome.clone(), elite_sse));
        }

        if g + 1 == cfg.max_generations {
            break;
        }
        chromosomes = next_generation(&population, elite, g + 1, cfg, &mut op_rng);
    }

    let (best, best_sse) = best.expect("max_generations is positive");
    Ok(EvolutionOutcome {
        best,
        best_sse,
        trace,
    })
}

fn argmin(population: &[Individual]) -> usize {
    population.iter().enumerate().fold(0, |acc, (i, ind)| {
        if ind.objective < population[acc].objective {
            i
        } else {
            acc
        }
    })
}

fn next_generation<R: Rng + ?Sized>(
    population: &[Individual],
    elite: usize,
    generation: usize,
    cfg: &GaConfig,
    rng: &mut R,
) -> Vec<Chromosome> {
    let objectives: Vec<f64> = population.iter().map(|i| i.objective).collect();
    let probs = selection_probabilities(&objectives, cfg.selection_k);
    let len = population[0].chromosome.len();

    let mut next = Vec::with_capacity(cfg.population_size);
    next.push(population[elite].chromosome.clone());
    while next.len() < cfg.population_size {
        let a = &population[roulette_select(&probs, rng)].chromosome;
        let b = &population[roulette_select(&probs, rng)].chromosome;
        let (ca, cb) = if rng.random::<f64>() < cfg.crossover_prob {
            let j = rng.random_range(0..len);
            let blend: f64 = rng.random();
            crossover(a, b, j, blend).expect("parents share the population's length")
        } else {
            (a.clone(), b.clone())
        };
        next.push(mutate(&ca, generation, cfg, rng));
        if next.len() < cfg.population_size {
            next.push(mutate(&cb, generation, cfg, rng));
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, NetworkParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn default_config() {
        let c = GaConfig::default();
        assert_eq!(c.population_size, 60);
        assert_eq!(c.crossover_prob, 0.7);
        assert_eq!(c.mutation_prob, 0.05);
        assert_eq!(c.max_generations, 50);
        assert_eq!(c.bounds(), GeneBounds::new(-1.0, 1.0).unwrap());
        assert_eq!(c.coding, Coding::Real);
        assert_eq!(c.selection, Selection::Roulette);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let base = GaConfig::default();
        for bad in [
            GaConfig {
                population_size: 1,
                ..base.clone()
            },
            GaConfig {
                gene_min: 1.0,
                gene_max: 1.0,
                ..base.clone()
            },
            GaConfig {
                crossover_prob: 1.5,
                ..base.clone()
            },
            GaConfig {
                max_generations: 0,
                ..base.clone()
            },
            GaConfig {
                selection_k: 0.0,
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn fitness_examples() {
        let shape = NetworkShape::new(1, 1, 1).unwrap();
        let perfect = Chromosome::new(vec![0.0, 0.0, 0.0, 0.4]);
        let f = fitness(&perfect, &[Sample::labeled(vec![0.3], 0.4)], shape).unwrap();
        assert_eq!(f.objective, 0.0);
        assert_eq!(f.fitness, 1.0 / EPSILON);

        let unit = Chromosome::new(vec![0.0, 0.0, 0.0, 1.0]);
        let f = fitness(&unit, &[Sample::labeled(vec![0.3], 0.0)], shape).unwrap();
        assert_eq!(f.objective, 1.0);
        assert!((f.fitness - 1.0).abs() < 1e-11);

        assert!(fitness(&Chromosome::new(vec![0.0; 3]), &[], shape).is_err());
    }

    #[test]
    fn fitness_matches_independent_forward() {
        let shape = NetworkShape::new(2, 2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let genes: Vec<f64> = (0..chromosome_length(shape))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let data: Vec<Sample> = (0..3)
            .map(|_| Sample::labeled(vec![rng.random(), rng.random()], rng.random()))
            .collect();
        // Oracle: W = genes[0..4], gamma = genes[4..6], V = genes[6..8], h = genes[8].
        let g = &genes;
        let oracle: f64 = data
            .iter()
            .map(|s| {
                let x = &s.features;
                let a0 = (g[0] * x[0] + g[1] * x[1] + g[4]).tanh();
                let a1 = (g[2] * x[0] + g[3] * x[1] + g[5]).tanh();
                let y = g[6] * a0 + g[7] * a1 + g[8];
                (y - s.targets[0]).powi(2)
            })
            .sum();
        let f = fitness(&Chromosome::new(genes.clone()), &data, shape).unwrap();
        assert!((f.objective - oracle).abs() < 1e-13);
    }

    #[test]
    fn probability_examples() {
        assert!(close(
            &selection_probabilities(&[1.0, 1.0, 1.0], 1.0),
            &[1.0 / 3.0; 3]
        ));
        assert!(close(
            &selection_probabilities(&[1.0, 1.0, 2.0], 1.0),
            &[0.4, 0.4, 0.2]
        ));
        let e = [0.3, 2.0, 0.01, 7.5];
        assert!(close(
            &selection_probabilities(&e, 1.0),
            &selection_probabilities(&e, 100.0)
        ));
    }

    #[test]
    fn roulette_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(roulette_select(&[1.0, 0.0, 0.0], &mut rng), 0);
        }
        assert_eq!(roulette_index(&[0.5, 0.5], 0.25), 0);
        assert_eq!(roulette_index(&[0.5, 0.5], 0.75), 1);
        assert_eq!(
            roulette_index(&[0.3, 0.3, 0.3999999999], 0.9999999999999),
            2
        );
    }

    #[test]
    fn crossover_examples() {
        let a = Chromosome::new(vec![1.0, 2.0, 9.0]);
        let n = Chromosome::new(vec![-1.0, 4.0, 8.0]);
        assert_eq!(crossover(&a, &n, 1, 0.0).unwrap(), (a.clone(), n.clone()));
        let (ca, cn) = crossover(&a, &n, 1, 1.0).unwrap();
        assert_eq!((ca.genes[1], cn.genes[1]), (4.0, 2.0));
        let (ca, cn) = crossover(&a, &n, 1, 0.5).unwrap();
        assert_eq!((ca.genes[1], cn.genes[1]), (3.0, 3.0));
        assert_eq!((ca.genes[0], ca.genes[2]), (1.0, 9.0));
        assert!(crossover(&a, &n, 3, 0.5).is_err());
        assert!(crossover(&a, &Chromosome::new(vec![0.0]), 0, 0.5).is_err());
    }

    #[test]
    fn mutation_examples() {
        let bounds = GeneBounds::new(-1.0, 1.0).unwrap();
        assert_eq!(annealing(50, 50, 0.9), 0.0);
        assert_eq!(mutate_gene(0.3, 0.0, 0.9, bounds), 0.3);
        assert_eq!(mutate_gene(0.3, 1.0, 0.2, bounds), -1.0);
        assert_eq!(mutate_gene(0.37, 1.0, 0.49, bounds), bounds.min);
        // 2 a_min - a_max = -3, clamped.
        assert_eq!(mutate_gene(-1.0, 1.0, 0.5, bounds), -1.0);
        assert_eq!(mutate_gene(0.5, 0.5, 0.7, bounds), 0.25);

        let cfg = GaConfig {
            mutation_prob: 1.0,
            ..GaConfig::default()
        };
        let c = Chromosome::new(vec![0.1, -0.4, 0.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(mutate(&c, cfg.max_generations, &cfg, &mut rng), c);
        let cfg = GaConfig {
            mutation_prob: 0.0,
            ..GaConfig::default()
        };
        assert_eq!(mutate(&c, 0, &cfg, &mut rng), c);
    }

    #[test]
    fn single_generation_returns_initial_best() {
        let shape = NetworkShape::new(2, 2, 1).unwrap();
        let data = [
            Sample::labeled(vec![0.1, 0.2], 0.5),
            Sample::labeled(vec![0.9, 0.3], 0.2),
        ];
        let cfg = GaConfig {
            population_size: 2,
            max_generations: 1,
            seed: 4,
            ..GaConfig::default()
        };
        let mut initial = Vec::new();
        let out = evolve_observed(&data, shape, &cfg, |_, pop| initial = pop.to_vec()).unwrap();
        assert_eq!(out.trace.len(), 1);
        let best = initial
            .iter()
            .min_by(|a, b| a.objective.total_cmp(&b.objective))
            .unwrap();
        assert_eq!(out.best, best.chromosome);
        assert_eq!(out.best_sse, best.objective);
    }

    #[test]
    fn evolve_is_deterministic() {
        let shape = NetworkShape::new(3, 2, 1).unwrap();
        let data: Vec<Sample> = (0..5)
            .map(|i| Sample::labeled(vec![i as f64 * 0.2, 0.5, 0.1], 0.1 * i as f64))
            .collect();
        let cfg = GaConfig {
            population_size: 10,
            max_generations: 8,
            seed: 77,
            ..GaConfig::default()
        };
        let a = evolve(&data, shape, &cfg).unwrap();
        let b = evolve(&data, shape, &cfg).unwrap();
        assert_eq!(a, b);
        let other = evolve(&data, shape, &GaConfig { seed: 78, ..cfg }).unwrap();
        assert_ne!(a.best, other.best);
    }

    #[test]
    fn improves_on_constant_target() {
        // Zero inputs: only gamma, V and h matter and y = 0.35 is reachable.
        let shape = NetworkShape::new(2, 2, 1).unwrap();
        let data: Vec<Sample> = (0..3)
            .map(|_| Sample::labeled(vec![0.0, 0.0], 0.35))
            .collect();
        let mut improved = 0;
        for seed in 0..100 {
            let cfg = GaConfig {
                population_size: 20,
                max_generations: 50,
                seed,
                ..GaConfig::default()
            };
            let out = evolve(&data, shape, &cfg).unwrap();
            let first = out.trace.generations[0].best_sse;
            if out.trace.generations.last().unwrap().best_sse < first {
                improved += 1;
            }
            assert!(out
                .trace
                .best_sse()
                .collect::<Vec<_>>()
                .windows(2)
                .all(|w| w[1] <= w[0]));
        }
        assert!(improved >= 95, "improved in {improved}/100 seeds");
    }

    #[test]
    fn best_decodes_to_reported_error() {
        let shape = NetworkShape::new(2, 3, 1).unwrap();
        let data: Vec<Sample> = (0..4)
            .map(|i| Sample::labeled(vec![0.25 * i as f64, 0.5], 0.2 * i as f64))
            .collect();
        let cfg = GaConfig {
            population_size: 12,
            max_generations: 10,
            ..GaConfig::default()
        };
        let out = evolve(&data, shape, &cfg).unwrap();
        let p: NetworkParams = genome::decode(&out.best, shape).unwrap();
        let sse: f64 = data
            .iter()
            .map(|s| (forward(&p, &s.features).unwrap().output[0] - s.targets[0]).powi(2))
            .sum();
        assert_eq!(sse, out.best_sse);
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one_and_rank(e in prop::collection::vec(0.0f64..100.0, 1..30), k in 0.01f64..1000.0) {
            let p = selection_probabilities(&e, k);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(close(&p, &selection_probabilities(&e, 1.0)));
            for i in 0..e.len() {
                for j in 0..e.len() {
                    if e[i] < e[j] {
                        prop_assert!(p[i] > p[j]);
                    }
                }
            }
        }

        #[test]
        fn crossover_convex_and_local(
            pair in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
            pos in any::<prop::sample::Index>(),
            b in 0.0f64..=1.0,
        ) {
            let a = Chromosome::new(pair.iter().map(|p| p.0).collect());
            let n = Chromosome::new(pair.iter().map(|p| p.1).collect());
            let j = pos.index(a.len());
            let (ca, cn) = crossover(&a, &n, j, b).unwrap();
            let (lo, hi) = (a.genes[j].min(n.genes[j]), a.genes[j].max(n.genes[j]));
            for c in [&ca, &cn] {
                prop_assert!(c.genes[j] >= lo && c.genes[j] <= hi);
            }
            for i in (0..a.len()).filter(|&i| i != j) {
                prop_assert_eq!(ca.genes[i], a.genes[i]);
                prop_assert_eq!(cn.genes[i], n.genes[i]);
            }
        }

        #[test]
        fn mutation_stays_in_bounds(
            genes in prop::collection::vec(-1.0f64..=1.0, 1..40),
            g in 0usize..=50, pm in 0.0f64..=1.0, seed in any::<u64>(),
        ) {
            let cfg = GaConfig { mutation_prob: pm, ..GaConfig::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = mutate(&Chromosome::new(genes), g, &cfg, &mut rng);
            prop_assert!(out.genes.iter().all(|&x| cfg.bounds().contains(x)));
        }
    }
}
