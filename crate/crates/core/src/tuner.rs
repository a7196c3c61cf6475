//! Hyperparameter selection: exhaustive grid search with a run-time
//! estimator, a genetic algorithm over `(width2, k, grid)`, and the fixed
//! pyramid heuristic.
//!
//! Searches vary only the middle layer of a three-layer network
//! `[input_dim, width2, 1]`. Every ranking uses the same total order:
//! validation F1 descending, precision descending, then the genome
//! lexicographically.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SplitDataset;
use crate::error::{Error, Result};
use crate::kan::{KanConfig, KanModel};
use crate::metrics::{self, format_width, MetricsReport};
use crate::seed;

pub const HEURISTIC_K: usize = 15;
pub const HEURISTIC_GRID: usize = 5;

/// Pyramid width, k = 15, grid = 5. No training involved.
pub fn heuristic_config(input_dim: usize) -> Result<KanConfig> {
    if input_dim < 2 {
        return Err(Error::InvalidDimension(input_dim));
    }
    Ok(KanConfig::new(
        vec![input_dim, (input_dim / 2).max(1), 1],
        HEURISTIC_K,
        HEURISTIC_GRID,
    ))
}

/// Inclusive integer interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi + 1 - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, v: usize) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.lo..=self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub width2: IntRange,
    pub k: IntRange,
    pub grid: IntRange,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            width2: IntRange::new(3, 30),
            k: IntRange::new(3, 20),
            grid: IntRange::new(3, 30),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("width2", self.width2), ("k", self.k), ("grid", self.grid)] {
            if r.lo < 1 || r.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "{name} range {}..={} must be non-empty with lower bound >= 1",
                    r.lo, r.hi
                )));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.width2.len() * self.k.len() * self.grid.len()
    }

    pub fn contains(&self, g: &Genome) -> bool {
        self.width2.contains(g.width2) && self.k.contains(g.k) && self.grid.contains(g.grid)
    }

    fn random_genome(&self, rng: &mut impl Rng) -> Genome {
        Genome {
            width2: self.width2.sample(rng),
            k: self.k.sample(rng),
            grid: self.grid.sample(rng),
        }
    }

    fn clamp(&self, g: Genome) -> Genome {
        Genome {
            width2: g.width2.clamp(self.width2.lo, self.width2.hi),
            k: g.k.clamp(self.k.lo, self.k.hi),
            grid: g.grid.clamp(self.grid.lo, self.grid.hi),
        }
    }
}

/// One candidate; field order gives the lexicographic (width2, k, grid) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub width2: usize,
    pub k: usize,
    pub grid: usize,
}

impl Genome {
    pub fn config(&self, base: &KanConfig, input_dim: usize) -> KanConfig {
        KanConfig {
            width: vec![input_dim, self.width2, 1],
            k: self.k,
            grid: self.grid,
            ..base.clone()
        }
    }

    fn gene(&self, i: usize) -> usize {
        [self.width2, self.k, self.grid][i]
    }

    fn set_gene(&mut self, i: usize, v: usize) {
        match i {
            0 => self.width2 = v,
            1 => self.k = v,
            _ => self.grid = v,
        }
    }
}

/// All genomes in lexicographic order.
pub fn enumerate_grid(space: &SearchSpace) -> Vec<Genome> {
    let mut out = Vec::with_capacity(space.size());
    for width2 in space.width2.lo..=space.width2.hi {
        for k in space.k.lo..=space.k.hi {
            for grid in space.grid.lo..=space.grid.hi {
                out.push(Genome { width2, k, grid });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMode {
    /// Unrounded mean training time.
    Exact,
    /// Mean rounded to whole seconds before multiplying.
    Rounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchTimeEstimate {
    pub mean_s: f64,
    pub total_s: f64,
    pub total_h: f64,
}

/// Exhaustive-search cost from the fastest and slowest observed trainings.
pub fn estimate_search_time(shortest_s: f64, longest_s: f64, count: u64, mode: EstimateMode) -> Result<SearchTimeEstimate> {
    if !(shortest_s > 0.0 && shortest_s <= longest_s && longest_s.is_finite()) || count < 1 {
        return Err(Error::InvalidTimes {
            shortest: shortest_s,
            longest: longest_s,
            count,
        });
    }
    let mut mean_s = (shortest_s + longest_s) / 2.0;
    if mode == EstimateMode::Rounded {
        mean_s = mean_s.round();
    }
    let total_s = mean_s * count as f64;
    Ok(SearchTimeEstimate {
        mean_s,
        total_s,
        total_h: total_s / 3600.0,
    })
}

/// Outcome of one trial. Equality ignores wall-clock timing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub genome: Genome,
    pub width: Vec<usize>,
    /// Validation metrics; `None` when training failed.
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub train_seconds: f64,
}

impl PartialEq for TrialRecord {
    fn eq(&self, other: &Self) -> bool {
        self.genome == other.genome
            && self.width == other.width
            && self.metrics == other.metrics
            && self.error == other.error
    }
}

impl TrialRecord {
    pub fn fitness(&self) -> f64 {
        self.metrics.as_ref().map_or(0.0, MetricsReport::f1_or_zero)
    }

    fn precision(&self) -> f64 {
        self.metrics.as_ref().map_or(0.0, MetricsReport::precision_or_zero)
    }
}

/// The ranking order: better trials compare as `Less`.
pub fn rank_order(a: &TrialRecord, b: &TrialRecord) -> Ordering {
    b.metrics
        .is_some()
        .cmp(&a.metrics.is_some())
        .then_with(|| b.fitness().total_cmp(&a.fitness()))
        .then_with(|| b.precision().total_cmp(&a.precision()))
        .then_with(|| a.genome.cmp(&b.genome))
}

pub fn rank(trials: &mut [TrialRecord]) {
    trials.sort_by(rank_order);
}

/// Trains one network for `genome` and scores it on the validation split.
/// Failures are captured in the record instead of propagated.
pub fn run_trial(genome: Genome, base: &KanConfig, data: &SplitDataset) -> TrialRecord {
    let input_dim = data.n_features();
    let config = genome.config(base, input_dim);
    let start = Instant::now();
    let outcome = KanModel::new(config.clone()).and_then(|mut model| {
        model.train(&data.train, &data.valid)?;
        model.evaluate(&data.valid)
    });
    let train_seconds = start.elapsed().as_secs_f64();
    let (metrics, error) = match outcome {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e.to_string())),
    };
    TrialRecord {
        genome,
        width: config.width,
        metrics,
        error,
        train_seconds,
    }
}

/// Trains every genome (or the first `budget` in enumeration order) and
/// returns the trials ranked.
pub fn grid_search(space: &SearchSpace, base: &KanConfig, data: &SplitDataset, budget: Option<usize>) -> Result<Vec<TrialRecord>> {
    space.validate()?;
    let mut genomes = enumerate_grid(space);
    if let Some(b) = budget {
        genomes.truncate(b);
    }
    let mut trials: Vec<TrialRecord> = genomes.par_iter().map(|&g| run_trial(g, base, data)).collect();
    rank(&mut trials);
    Ok(trials)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub cxpb: f64,
    pub mutpb: f64,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 20,
            cxpb: 0.5,
            mutpb: 0.2,
            tournament_size: 3,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidConfig("GA population must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.cxpb) || !(0.0..=1.0).contains(&self.mutpb) {
            return Err(Error::InvalidConfig("cxpb and mutpb must lie in [0, 1]".into()));
        }
        if self.tournament_size < 1 {
            return Err(Error::InvalidConfig("tournament size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub worst_fitness: f64,
    pub best_genome: Genome,
    /// Distinct genomes trained so far.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best: TrialRecord,
    pub history: Vec<GenerationStats>,
    /// Every distinct genome trained, ranked.
    pub trials: Vec<TrialRecord>,
}

/// Memoized fitness: a genome trains once; identical seeds make reuse exact.
struct Evaluator<'a> {
    base: &'a KanConfig,
    data: &'a SplitDataset,
    cache: BTreeMap<Genome, TrialRecord>,
}

impl Evaluator<'_> {
    fn evaluate(&mut self, genomes: &[Genome]) {
        let mut fresh: Vec<Genome> = genomes.iter().copied().filter(|g| !self.cache.contains_key(g)).collect();
        fresh.sort_unstable();
        fresh.dedup();
        let records: Vec<TrialRecord> = fresh.par_iter().map(|&g| run_trial(g, self.base, self.data)).collect();
        for r in records {
            self.cache.insert(r.genome, r);
        }
    }

    fn record(&self, g: &Genome) -> &TrialRecord {
        &self.cache[g]
    }
}

fn tournament(pop: &[Genome], eval: &Evaluator, size: usize, rng: &mut impl Rng) -> Genome {
    (0..size)
        .map(|_| pop[rng.random_range(0..pop.len())])
        .min_by(|a, b| rank_order(eval.record(a), eval.record(b)))
        .expect("tournament size >= 1")
}

fn stats(generation: usize, pop: &[Genome], eval: &Evaluator) -> GenerationStats {
    let fits: Vec<f64> = pop.iter().map(|g| eval.record(g).fitness()).collect();
    let best = pop
        .iter()
        .min_by(|a, b| rank_order(eval.record(a), eval.record(b)))
        .expect("non-empty population");
    GenerationStats {
        generation,
        best_fitness: eval.record(best).fitness(),
        mean_fitness: fits.iter().sum::<f64>() / fits.len() as f64,
        worst_fitness: fits.iter().copied().fold(f64::INFINITY, f64::min),
        best_genome: *best,
        evaluations: eval.cache.len(),
    }
}

/// Generational GA: tournament selection, uniform crossover with
/// probability `cxpb` per pair, random-reset mutation with probability
/// `mutpb` per individual (each gene reset with probability 1/3), fitness =
/// validation F1, and the best individual carried over unchanged.
pub fn ga_search(space: &SearchSpace, ga: &GaConfig, base: &KanConfig, data: &SplitDataset) -> Result<GaOutcome> {
    space.validate()?;
    ga.validate()?;
    let mut rng = seed::rng(ga.seed);
    let mut eval = Evaluator {
        base,
        data,
        cache: BTreeMap::new(),
    };

    let mut pop: Vec<Genome> = (0..ga.population).map(|_| space.random_genome(&mut rng)).collect();
    eval.evaluate(&pop);
    let mut history = vec![stats(0, &pop, &eval)];

    for generation in 1..=ga.generations {
        let elite = history.last().expect("initial stats").best_genome;
        let mut offspring: Vec<Genome> = (0..ga.population)
            .map(|_| tournament(&pop, &eval, ga.tournament_size, &mut rng))
            .collect();
        for pair in offspring.chunks_mut(2) {
            if let [a, b] = pair {
                if rng.random_bool(ga.cxpb) {
                    for gene in 0..3 {
                        if rng.random_bool(0.5) {
                            let (va, vb) = (a.gene(gene), b.gene(gene));
                            a.set_gene(gene, vb);
                            b.set_gene(gene, va);
                        }
                    }
                }
            }
        }
        for child in &mut offspring {
            if rng.random_bool(ga.mutpb) {
                for gene in 0..3 {
                    if rng.random_bool(1.0 / 3.0) {
                        let fresh = space.random_genome(&mut rng);
                        child.set_gene(gene, fresh.gene(gene));
                    }
                }
            }
            *child = space.clamp(*child);
        }
        eval.evaluate(&offspring);
        let worst = (0..offspring.len())
            .max_by(|&a, &b| rank_order(eval.record(&offspring[a]), eval.record(&offspring[b])).then(a.cmp(&b)))
            .expect("non-empty offspring");
        offspring[worst] = elite;
        pop = offspring;
        history.push(stats(generation, &pop, &eval));
    }

    let best_genome = history.last().expect("history").best_genome;
    let best = eval.record(&best_genome).clone();
    let mut trials: Vec<TrialRecord> = eval.cache.into_values().collect();
    rank(&mut trials);
    Ok(GaOutcome { best, history, trials })
}

pub const TUNER_CONFIG_VERSION: u32 = 1;

/// Versioned key/value file holding the search space and GA settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunerConfig {
    pub version: u32,
    #[serde(default)]
    pub space: SearchSpace,
    #[serde(default)]
    pub ga: GaConfig,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            version: TUNER_CONFIG_VERSION,
            space: SearchSpace::default(),
            ga: GaConfig::default(),
        }
    }
}

impl TunerConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TunerConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if cfg.version != TUNER_CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported tuner config version {}", cfg.version)));
        }
        cfg.space.validate()?;
        cfg.ga.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("tuner config serializes")
    }
}

/// Ranked trial log as CSV, starting with `Width,K,Grid,Precision,Recall,F1 Score`.
pub fn trials_csv(trials: &[TrialRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = vec!["Rank"];
    header.extend(metrics::CSV_HEADER);
    header.push("Error");
    w.write_record(&header).expect("in-memory write");
    for (i, t) in trials.iter().enumerate() {
        let mut row = vec![
            (i + 1).to_string(),
            format_width(&t.width),
            t.genome.k.to_string(),
            t.genome.grid.to_string(),
        ];
        match &t.metrics {
            Some(m) => row.extend(metrics::csv_metric_fields(m)),
            None => row.extend(std::iter::repeat_n(String::new(), metrics::CSV_HEADER.len() - 3)),
        }
        row.push(t.error.clone().unwrap_or_default());
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Fixed-width table in the `Width | K | Grid | Precision | Recall | F1 Score` layout.
pub fn trials_table(trials: &[TrialRecord]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"));
    let rows: Vec<[String; 6]> = trials
        .iter()
        .map(|t| {
            let m = t.metrics.as_ref();
            [
                format_width(&t.width),
                t.genome.k.to_string(),
                t.genome.grid.to_string(),
                m.map_or("failed".into(), |m| fmt(m.precision)),
                m.map_or("failed".into(), |m| fmt(m.recall)),
                m.map_or("failed".into(), |m| fmt(m.f1)),
            ]
        })
        .collect();
    let header = ["Width", "K", "Grid", "Precision", "Recall", "F1 Score"];
    let widths: Vec<usize> = (0..6)
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    writeln!(out, "{}", line(header.to_vec()).trim_end()).unwrap();
    for r in &rows {
        writeln!(out, "{}", line(r.iter().map(String::as_str).collect()).trim_end()).unwrap();
    }
    out
}

/// Per-trial training times, kept apart from the deterministic trial log.
pub fn trial_timings_csv(trials: &[TrialRecord]) -> String {
    let mut out = String::from("width2,k,grid,train_seconds\n");
    for t in trials {
        writeln!(out, "{},{},{},{:.6}", t.genome.width2, t.genome.k, t.genome.grid, t.train_seconds).unwrap();
    }
    out
}
