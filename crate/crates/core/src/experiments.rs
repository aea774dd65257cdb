//! Monte-Carlo drivers for finite-`n` quantities: the mean log-count
//! `ψ_n(α)`, the tail probability `Q_n(α, φ)`, its threshold density, the
//! per-edge increment of the Goldreich mean log-preimage count, and the
//! between/within-graph variance split.
//!
//! Every driver is a deterministic function of its configuration and seed.
//! Sample `i` uses `derive_seed(seed, i)`; per-sample work may run in
//! parallel but results are collected in index order and reduced serially.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{count_auto, log2_big, CountConfig, PreimagePartition};
use crate::error::{CspError, Result};
use crate::formula::{canonical_nae, Assignment, Clause, ClauseSemantics, Edge, Family, Formula, Model, Predicate};
use crate::sampler::{
    derive_seed, random_ordered_edge, rng_from_seed, sample, sample_gold_edges, CandidateSpace, CoupledPool, ModelSpec,
    PlantMode, Scheme, Seed,
};
use crate::scalar::{compensated_sum, mean_and_variance};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Largest `n` for which the Goldreich increment check enumerates inputs.
pub const AZUMA_MAX_VARS: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    pub alpha: f64,
    pub n: usize,
    pub estimate: f64,
    pub std_error: f64,
    /// Population variance of the per-sample values.
    pub variance: f64,
    pub samples: usize,
    pub seed: Seed,
}

impl EstimateResult {
    fn from_values(values: &[f64], alpha: f64, n: usize, seed: Seed) -> Self {
        let (mean, var) = mean_and_variance(values);
        let m = values.len() as f64;
        let std_error = if values.len() > 1 { (var * m / (m - 1.0)).sqrt() / m.sqrt() } else { 0.0 };
        Self { alpha, n, estimate: mean, std_error, variance: var, samples: values.len(), seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QnEstimate {
    pub alpha: f64,
    pub phi: f64,
    pub n: usize,
    pub proportion: f64,
    pub hits: usize,
    pub samples: usize,
    /// Wilson 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: Seed,
}

/// Wilson score interval for `hits` successes out of `samples`.
pub fn wilson_interval(hits: usize, samples: usize) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

impl QnEstimate {
    fn new(alpha: f64, phi: f64, n: usize, hits: usize, samples: usize, seed: Seed) -> Self {
        let (ci_low, ci_high) = wilson_interval(hits, samples);
        Self { alpha, phi, n, proportion: hits as f64 / samples.max(1) as f64, hits, samples, ci_low, ci_high, seed }
    }
}

fn require_planted(spec: &ModelSpec) -> Result<()> {
    if !spec.is_planted() {
        return Err(CspError::UnsupportedFamily("mean log-count is defined for planted models only".into()));
    }
    Ok(())
}

fn require_phi(phi: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(CspError::InvalidArgument(format!("phi = {phi} outside [0, 1]")));
    }
    Ok(())
}

fn require_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(CspError::InvalidArgument("sample count must be positive".into()));
    }
    Ok(())
}

/// `Z < 2^(n φ)`.
pub fn below_threshold(z: &BigUint, n: usize, phi: f64) -> bool {
    log2_big(z) < n as f64 * phi
}

fn log2_count(f: &Formula, cfg: &CountConfig) -> Result<BigUint> {
    Ok(count_auto(f, cfg)?.z)
}

fn per_variable_log2(f: &Formula, cfg: &CountConfig) -> Result<f64> {
    let z = log2_count(f, cfg)?;
    if z == BigUint::ZERO {
        return Err(CspError::InvalidArgument("sampled formula has no solutions".into()));
    }
    Ok(log2_big(&z) / f.n as f64)
}

/// Mean of `log2 Z / n` over independent planted samples.
pub fn estimate_psi(spec: &ModelSpec, samples: usize, seed: Seed, cfg: &CountConfig) -> Result<EstimateResult> {
    require_planted(spec)?;
    require_samples(samples)?;
    let values = (0..samples as u64)
        .into_par_iter()
        .map(|i| per_variable_log2(&sample(spec, derive_seed(seed, i))?, cfg))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EstimateResult::from_values(&values, spec.alpha, spec.n, seed))
}

/// `log2 Z / n` of each sample at each density, with sample `i` drawn as one
/// coupled chain. Rows are samples, columns follow `alphas`.
pub fn psi_paths(
    spec: &ModelSpec,
    alphas: &[f64],
    samples: usize,
    seed: Seed,
    cfg: &CountConfig,
) -> Result<Vec<Vec<f64>>> {
    require_planted(spec)?;
    require_samples(samples)?;
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            crate::sampler::coupled_chain(spec, alphas, derive_seed(seed, i))?
                .iter()
                .map(|f| per_variable_log2(f, cfg))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// `ψ̂` at each density from coupled sample paths.
pub fn psi_curve(
    spec: &ModelSpec,
    alphas: &[f64],
    samples: usize,
    seed: Seed,
    cfg: &CountConfig,
) -> Result<Vec<EstimateResult>> {
    let paths = psi_paths(spec, alphas, samples, seed, cfg)?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let column: Vec<f64> = paths.iter().map(|row| row[j]).collect();
            EstimateResult::from_values(&column, a, spec.n, seed)
        })
        .collect())
}

/// Fraction of independent samples with `Z < 2^(n φ)`.
pub fn estimate_qn(spec: &ModelSpec, phi: f64, samples: usize, seed: Seed, cfg: &CountConfig) -> Result<QnEstimate> {
    require_phi(phi)?;
    require_samples(samples)?;
    let hits = (0..samples as u64)
        .into_par_iter()
        .map(|i| Ok(below_threshold(&log2_count(&sample(spec, derive_seed(seed, i))?, cfg)?, spec.n, phi)))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    Ok(QnEstimate::new(spec.alpha, phi, spec.n, hits, samples, seed))
}

/// `Q̂` over an `alphas × phis` grid from one coupled sample set, so the
/// result is monotone in both coordinates. Output is row-major in `alphas`.
pub fn qn_grid(
    spec: &ModelSpec,
    alphas: &[f64],
    phis: &[f64],
    samples: usize,
    seed: Seed,
    cfg: &CountConfig,
) -> Result<Vec<QnEstimate>> {
    phis.iter().try_for_each(|&p| require_phi(p))?;
    require_samples(samples)?;
    let counts: Vec<Vec<BigUint>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            crate::sampler::coupled_chain(spec, alphas, derive_seed(seed, i))?
                .iter()
                .map(|f| log2_count(f, cfg))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(alphas.len() * phis.len());
    for (j, &a) in alphas.iter().enumerate() {
        for &phi in phis {
            let hits = counts.iter().filter(|row| below_threshold(&row[j], spec.n, phi)).count();
            out.push(QnEstimate::new(a, phi, spec.n, hits, samples, seed));
        }
    }
    Ok(out)
}

/// For each coupled sample, the key of the clause whose arrival first
/// pushes `Z` below `2^(n φ)`. Because `Z` only decreases along a pool,
/// `Q̂(α)` is the fraction of samples whose critical key lies below the
/// pool threshold at `α`.
#[derive(Clone, Debug)]
pub struct CriticalKeys {
    spec: ModelSpec,
    alpha_max: f64,
    phi: f64,
    keys: Vec<f64>,
    threshold_probe: CoupledPool,
}

impl CriticalKeys {
    pub fn new(
        spec: &ModelSpec,
        phi: f64,
        alpha_max: f64,
        samples: usize,
        seed: Seed,
        cfg: &CountConfig,
    ) -> Result<Self> {
        require_phi(phi)?;
        require_samples(samples)?;
        let keys = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let pool = CoupledPool::new(spec, alpha_max, derive_seed(seed, i))?;
                critical_key(&pool, spec.n, phi, cfg)
            })
            .collect::<Result<Vec<f64>>>()?;
        let threshold_probe = CoupledPool::new(spec, alpha_max, seed)?;
        Ok(Self { spec: spec.clone(), alpha_max, phi, keys, threshold_probe })
    }

    pub fn samples(&self) -> usize {
        self.keys.len()
    }

    pub fn hits(&self, alpha: f64) -> Result<usize> {
        let t = self.threshold_probe.key_threshold(alpha)?;
        Ok(self.keys.iter().filter(|&&k| k < t).count())
    }

    pub fn q_hat(&self, alpha: f64) -> Result<f64> {
        Ok(self.hits(alpha)? as f64 / self.keys.len() as f64)
    }

    /// Bisection for the density where `Q̂` crosses `level`. A value exactly
    /// at `level` moves the upper end, so ties resolve toward lower density.
    pub fn crossing(&self, level: f64, tolerance: f64) -> Result<ThresholdEstimate> {
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(CspError::InvalidArgument(format!("tolerance {tolerance} must be positive")));
        }
        let (mut lo, mut hi) = (0.0, self.alpha_max);
        let (mut q_lo, mut q_hi) = (self.q_hat(lo)?, self.q_hat(hi)?);
        if q_lo >= level || q_lo.is_nan() {
            return Err(CspError::NoCrossing(format!("Q̂(0) = {q_lo} is not below {level}")));
        }
        if q_hi < level || q_hi.is_nan() {
            return Err(CspError::NoCrossing(format!("Q̂({}) = {q_hi} does not reach {level}", self.alpha_max)));
        }
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            let q = self.q_hat(mid)?;
            if q >= level {
                hi = mid;
                q_hi = q;
            } else {
                lo = mid;
                q_lo = q;
            }
        }
        Ok(ThresholdEstimate {
            alpha_hat: 0.5 * (lo + hi),
            alpha_lo: lo,
            alpha_hi: hi,
            q_lo,
            q_hi,
            level,
            tolerance,
            n: self.spec.n,
            phi: self.phi,
            samples: self.keys.len(),
        })
    }

    /// Densities where `Q̂` crosses `low_level` and `high_level` on this sample set.
    pub fn window(&self, (low_level, high_level): (f64, f64), tolerance: f64) -> Result<TransitionWindow> {
        let lower = self.crossing(low_level, tolerance)?;
        let upper = self.crossing(high_level, tolerance)?;
        let width = upper.alpha_hat - lower.alpha_hat;
        Ok(TransitionWindow { lower, upper, width })
    }
}

/// Smallest prefix (in key order) whose count falls below the threshold.
fn critical_key(pool: &CoupledPool, n: usize, phi: f64, cfg: &CountConfig) -> Result<f64> {
    let mut keys: Vec<f64> = pool.keys().collect();
    keys.sort_by(|a, b| a.total_cmp(b));
    let below = |j: usize| -> Result<bool> {
        // first j keys
        let f = if j == 0 {
            pool.formula_where(|_| false)
        } else {
            let cut = keys[j - 1];
            pool.formula_where(|key| key <= cut)
        };
        Ok(below_threshold(&log2_count(&f, cfg)?, n, phi))
    };
    if !below(keys.len())? {
        return Ok(f64::INFINITY);
    }
    if below(0)? {
        return Ok(f64::NEG_INFINITY);
    }
    let (mut lo, mut hi) = (0usize, keys.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(keys[hi - 1])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub alpha_hat: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub level: f64,
    pub tolerance: f64,
    pub n: usize,
    pub phi: f64,
    pub samples: usize,
}

/// Density at which `Q̂_n(·, φ)` crosses ½, by bisection on `[0, alpha_max]`
/// over one coupled sample set.
pub fn locate_threshold(
    spec: &ModelSpec,
    phi: f64,
    tolerance: f64,
    alpha_max: f64,
    samples: usize,
    seed: Seed,
    cfg: &CountConfig,
) -> Result<ThresholdEstimate> {
    CriticalKeys::new(spec, phi, alpha_max, samples, seed, cfg)?.crossing(0.5, tolerance)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionWindow {
    pub lower: ThresholdEstimate,
    pub upper: ThresholdEstimate,
    /// `upper.alpha_hat - lower.alpha_hat`.
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AzumaTrial {
    pub edges: usize,
    pub new_edge: Edge,
    /// `L(G)` in bits.
    pub l_g: f64,
    /// `L(G ∪ e)` in bits.
    pub l_ge: f64,
    /// `L(G) - L(G ∪ e)`, evaluated as the conditional entropy of the new
    /// output bit given the old outputs.
    pub increment: f64,
    /// `l_g - l_ge` as a plain difference, a cross-check on `increment`.
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AzumaReport {
    pub n: usize,
    pub k: usize,
    pub predicate: Predicate,
    pub alpha: f64,
    pub seed: Seed,
    pub trials: Vec<AzumaTrial>,
    pub min: f64,
    pub max: f64,
    /// Indices of trials whose increment leaves `[0, 1]`.
    pub violations: Vec<usize>,
}

/// Exact `L(G) - L(G ∪ e)` for random Goldreich hypergraphs at density
/// `alpha` and a uniform extra ordered edge.
pub fn azuma_increment_check(n: usize, chi: &Predicate, alpha: f64, trials: usize, seed: Seed) -> Result<AzumaReport> {
    if n > AZUMA_MAX_VARS {
        return Err(CspError::ResourceLimit(format!(
            "increment check enumerates 2^{n} inputs; cap is n <= {AZUMA_MAX_VARS}"
        )));
    }
    let k = chi.arity();
    if k > n {
        return Err(CspError::InvalidArgument(format!("arity {k} exceeds n = {n}")));
    }
    let results = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(seed, t);
            let edges = sample_gold_edges(n, k, alpha, trial_seed)?;
            let mut rng = rng_from_seed(derive_seed(trial_seed, u64::MAX));
            let new_edge = random_ordered_edge(n, k, &mut rng);
            let mut part = PreimagePartition::new(n)?;
            for e in &edges {
                part.refine(e, chi)?;
            }
            let l_g = part.mean_log2_preimages();
            let increment = part.split_entropy(&new_edge, chi)?;
            part.refine(&new_edge, chi)?;
            let l_ge = part.mean_log2_preimages();
            Ok(AzumaTrial { edges: edges.len(), new_edge, l_g, l_ge, increment, difference: l_g - l_ge })
        })
        .collect::<Result<Vec<_>>>()?;
    let min = results.iter().map(|t| t.increment).fold(f64::INFINITY, f64::min);
    let max = results.iter().map(|t| t.increment).fold(f64::NEG_INFINITY, f64::max);
    let violations =
        results.iter().enumerate().filter(|(_, t)| !(0.0..=1.0).contains(&t.increment)).map(|(i, _)| i).collect();
    Ok(AzumaReport { n, k, predicate: chi.clone(), alpha, seed, trials: results, min, max, violations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceSplit {
    pub n: usize,
    pub alpha: f64,
    pub graph_samples: usize,
    pub plant_samples: usize,
    pub seed: Seed,
    pub mean: f64,
    /// Variance of `log2 Z / n` over all (graph, plant) pairs.
    pub total: f64,
    /// Variance over graphs of the per-graph mean.
    pub between: f64,
    /// Mean over graphs of the per-graph variance.
    pub within: f64,
}

/// Hypergraph skeleton of a planted formula: each edge with its clause
/// count, plus a random ranking of the eligible clause payloads.
struct Skeleton {
    edges: Vec<(Edge, usize, Vec<usize>)>,
}

impl Skeleton {
    fn new(f: &Formula, per_edge: usize, rng: &mut impl Rng) -> Self {
        let mut counts: BTreeMap<Edge, usize> = BTreeMap::new();
        for c in &f.clauses {
            *counts.entry(c.edge.clone()).or_insert(0) += 1;
        }
        let edges = counts
            .into_iter()
            .map(|(e, m)| {
                let mut order: Vec<usize> = (0..per_edge).collect();
                order.shuffle(rng);
                (e, m, order)
            })
            .collect();
        Self { edges }
    }

    /// Instance on this skeleton planted at `plant`: each edge takes the
    /// eligible payloads (ascending absolute order) at its ranked positions.
    fn instantiate(&self, family: Family, n: usize, k: usize, plant: &Assignment) -> Formula {
        let mut clauses = Vec::new();
        for (edge, m, order) in &self.edges {
            let w = plant.segment(edge);
            let eligible: Vec<ClauseSemantics> = match family {
                Family::Sat => (0..1u32 << k)
                    .filter(|&x| x != w)
                    .map(|pattern| ClauseSemantics::SatForbidden { pattern })
                    .collect(),
                Family::Naesat => (0..1u32 << (k - 1))
                    .filter(|&x| x != canonical_nae(w, k))
                    .map(|pattern| ClauseSemantics::NaeForbidden { pattern })
                    .collect(),
                Family::Xorsat => vec![ClauseSemantics::XorTarget { bit: w.count_ones() % 2 == 1 }],
                Family::Gold => unreachable!("rejected by variance_split"),
            };
            for &slot in order.iter().take(*m) {
                clauses.push(Clause { edge: edge.clone(), semantics: eligible[slot].clone() });
            }
        }
        Formula { n, k, family, model: Model::Binomial, planted: Some(plant.clone()), clauses }
    }
}

/// Law-of-total-variance decomposition of `log2 Z / n` into a
/// between-graph part and a within-graph part over clause payloads, which
/// are redrawn by drawing fresh plants on a fixed skeleton.
pub fn variance_split(
    spec: &ModelSpec,
    graph_samples: usize,
    plant_samples: usize,
    seed: Seed,
    cfg: &CountConfig,
) -> Result<VarianceSplit> {
    if plant_samples < 2 {
        return Err(CspError::InvalidArgument("variance split needs at least 2 plants per graph".into()));
    }
    require_samples(graph_samples)?;
    require_planted(spec)?;
    if spec.family == Family::Gold {
        return Err(CspError::UnsupportedFamily("variance split covers sat, naesat and xorsat".into()));
    }
    if spec.scheme != Scheme::Binomial {
        return Err(CspError::InvalidArgument("variance split uses the binomial model".into()));
    }
    let per_edge = CandidateSpace::new(spec.family, spec.n, spec.k)?.per_edge_satisfied as usize;
    let rows = (0..graph_samples as u64)
        .into_par_iter()
        .map(|g| {
            let graph_seed = derive_seed(seed, g);
            let base = sample(spec, graph_seed)?;
            let mut rng = rng_from_seed(derive_seed(graph_seed, 0));
            let skeleton = Skeleton::new(&base, per_edge, &mut rng);
            (0..plant_samples)
                .map(|_| {
                    let plant = match &spec.plant {
                        PlantMode::Fixed(a) => a.clone(),
                        _ => Assignment::new((0..spec.n).map(|_| rng.random::<bool>()).collect()),
                    };
                    per_variable_log2(&skeleton.instantiate(spec.family, spec.n, spec.k, &plant), cfg)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<f64> = rows.iter().flatten().copied().collect();
    let (mean, total) = mean_and_variance(&all);
    let group: Vec<(f64, f64)> = rows.iter().map(|r| mean_and_variance(r)).collect();
    let (_, between) = mean_and_variance(&group.iter().map(|g| g.0).collect::<Vec<_>>());
    let within = compensated_sum(group.iter().map(|g| g.1)) / group.len() as f64;
    Ok(VarianceSplit { n: spec.n, alpha: spec.alpha, graph_samples, plant_samples, seed, mean, total, between, within })
}
