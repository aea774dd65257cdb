//! Random instance generation: the planted and unplanted binomial models, the
//! fixed-size uniform model, and density-coupled chains.
//!
//! Candidate clauses are ranked by `(edge rank, payload index)`, with edges
//! in lexicographic order of their sorted variable sets (for gold formulas,
//! followed by the lexicographic rank of the ordering). Binomial sampling
//! walks this order with geometric skips at the largest requested density
//! and tags every visited candidate with a uniform variate on `[0, p_max)`;
//! the formula at density `p` keeps the candidates whose variate is below
//! `p`. A single-density sample is the one-element chain, so the two paths
//! agree for equal seeds.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CspError, Result};
use crate::formula::{Assignment, Clause, ClauseSemantics, Edge, Family, Formula, Model, Predicate};

pub type Seed = u64;

/// Generator used for every seeded draw in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: Seed) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th independent sub-experiment of `seed` (SplitMix64
/// finalizer over the pair).
pub fn derive_seed(seed: Seed, index: u64) -> Seed {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantMode {
    Random,
    Fixed(Assignment),
    Unplanted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Binomial,
    Uniform,
}

/// Parameters of a random model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub predicate: Option<Arc<Predicate>>,
    pub plant: PlantMode,
    pub scheme: Scheme,
}

impl ModelSpec {
    /// Planted binomial model with a random plant.
    pub fn planted(family: Family, n: usize, k: usize, alpha: f64) -> Self {
        Self { family, n, k, alpha, predicate: None, plant: PlantMode::Random, scheme: Scheme::Binomial }
    }

    pub fn unplanted(family: Family, n: usize, k: usize, alpha: f64) -> Self {
        Self { plant: PlantMode::Unplanted, ..Self::planted(family, n, k, alpha) }
    }

    /// Planted Goldreich model with predicate `chi`; `k` is its arity.
    pub fn gold(n: usize, chi: Predicate, alpha: f64) -> Self {
        let k = chi.arity();
        Self { predicate: Some(Arc::new(chi)), ..Self::planted(Family::Gold, n, k, alpha) }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_plant(&self, plant: PlantMode) -> Self {
        Self { plant, ..self.clone() }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Self { scheme, ..self.clone() }
    }

    pub fn is_planted(&self) -> bool {
        !matches!(self.plant, PlantMode::Unplanted)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(CspError::InvalidArgument(format!("arity k = {} must be >= 2", self.k)));
        }
        if self.k > self.n {
            return Err(CspError::InvalidArgument(format!("arity k = {} exceeds n = {}", self.k, self.n)));
        }
        if self.k > crate::formula::MAX_ARITY {
            return Err(CspError::InvalidArgument(format!("arity {} too large", self.k)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(CspError::DensityOutOfRange(format!("alpha = {}", self.alpha)));
        }
        match (&self.family, &self.predicate) {
            (Family::Gold, None) => return Err(CspError::InvalidArgument("gold model needs a predicate".into())),
            (Family::Gold, Some(p)) if p.arity() != self.k => {
                return Err(CspError::InvalidArgument(format!(
                    "predicate arity {} differs from k = {}",
                    p.arity(),
                    self.k
                )))
            }
            _ => {}
        }
        if let PlantMode::Fixed(a) = &self.plant {
            if a.len() != self.n {
                return Err(CspError::Dimension { expected: self.n, got: a.len() });
            }
        }
        if self.family == Family::Gold && !self.is_planted() {
            return Err(CspError::UnsupportedFamily("gold formulas are defined by a planted input".into()));
        }
        Ok(())
    }
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return None;
        }
    }
    Some(acc as u64)
}

fn factorial(k: u64) -> u64 {
    (1..=k).product()
}

/// Size and structure of the candidate clause set `C_k(n)` of a family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateSpace {
    pub family: Family,
    pub n: usize,
    pub k: usize,
    /// Number of (ordered, for gold) edges.
    pub edges: u64,
    /// Clauses per edge in the unplanted candidate set.
    pub per_edge: u64,
    /// Clauses per edge satisfied by a fixed plant.
    pub per_edge_satisfied: u64,
    /// `N = edges * per_edge`.
    pub total: u64,
}

impl CandidateSpace {
    pub fn new(family: Family, n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n || k > crate::formula::MAX_ARITY {
            return Err(CspError::InvalidArgument(format!("no candidate space for n={n}, k={k}")));
        }
        let overflow = || CspError::ResourceLimit(format!("candidate count for n={n}, k={k} overflows u64"));
        let subsets = binomial(n as u64, k as u64).ok_or_else(overflow)?;
        let (edges, per_edge, per_edge_satisfied) = match family {
            Family::Sat => (subsets, 1u64 << k, (1u64 << k) - 1),
            Family::Naesat => (subsets, 1u64 << (k - 1), (1u64 << (k - 1)) - 1),
            Family::Xorsat => (subsets, 2, 1),
            Family::Gold => (subsets.checked_mul(factorial(k as u64)).ok_or_else(overflow)?, 1, 1),
        };
        let total = edges.checked_mul(per_edge).ok_or_else(overflow)?;
        Ok(Self { family, n, k, edges, per_edge, per_edge_satisfied, total })
    }

    /// Candidates eligible under the given plant mode.
    pub fn eligible(&self, planted: bool) -> u64 {
        if planted {
            self.edges * self.per_edge_satisfied
        } else {
            self.total
        }
    }

    fn multiplicity(&self, planted: bool) -> u64 {
        if planted {
            self.per_edge_satisfied
        } else {
            self.per_edge
        }
    }

    /// Inclusion probability `p = alpha n / N`; densities above `N/n` are
    /// rejected, not clipped.
    pub fn probability(&self, alpha: f64) -> Result<f64> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(CspError::DensityOutOfRange(format!("alpha = {alpha}")));
        }
        let p = alpha * self.n as f64 / self.total as f64;
        if p > 1.0 + 1e-12 {
            return Err(CspError::DensityOutOfRange(format!(
                "alpha = {alpha} exceeds N/n = {}",
                self.total as f64 / self.n as f64
            )));
        }
        Ok(p.min(1.0))
    }
}

/// Lexicographic unranking of k-subsets and ordered k-tuples of `0..n`.
struct EdgeIndex {
    n: usize,
    k: usize,
    ordered: bool,
    /// `choose[a][b] = C(a, b)` for `a <= n`, `b <= k`.
    choose: Vec<Vec<u64>>,
    perms: u64,
}

impl EdgeIndex {
    fn new(n: usize, k: usize, ordered: bool) -> Self {
        let choose =
            (0..=n).map(|a| (0..=k).map(|b| binomial(a as u64, b as u64).unwrap_or(u64::MAX)).collect()).collect();
        Self { n, k, ordered, choose, perms: factorial(k as u64) }
    }

    fn subset(&self, mut rank: u64) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.k);
        let mut x = 0usize;
        for i in 0..self.k {
            loop {
                let below = self.choose[self.n - x - 1][self.k - i - 1];
                if rank < below {
                    out.push(x as u32);
                    x += 1;
                    break;
                }
                rank -= below;
                x += 1;
            }
        }
        out
    }

    fn edge(&self, rank: u64) -> Edge {
        let vars = if self.ordered {
            let sorted = self.subset(rank / self.perms);
            permute_lex(sorted, rank % self.perms)
        } else {
            self.subset(rank)
        };
        Edge::new(vars).expect("unranked edges are distinct")
    }
}

/// The `rank`-th permutation of `items` in lexicographic order.
fn permute_lex(mut items: Vec<u32>, mut rank: u64) -> Vec<u32> {
    let mut out = Vec::with_capacity(items.len());
    while !items.is_empty() {
        let f = factorial(items.len() as u64 - 1);
        let i = (rank / f) as usize;
        rank %= f;
        out.push(items.remove(i));
    }
    out
}

/// Clause with candidate rank `rank` in the candidate order.
fn clause_at(
    index: &EdgeIndex,
    space: &CandidateSpace,
    planted: Option<&Assignment>,
    predicate: Option<&Arc<Predicate>>,
    rank: u64,
) -> Clause {
    let mult = space.multiplicity(planted.is_some());
    let edge = index.edge(rank / mult);
    let j = (rank % mult) as u32;
    let k = space.k;
    let semantics = match (space.family, planted) {
        (Family::Sat, Some(v0)) => ClauseSemantics::SatForbidden { pattern: (j + 1) ^ v0.segment(&edge) },
        (Family::Sat, None) => ClauseSemantics::SatForbidden { pattern: j },
        (Family::Naesat, Some(v0)) => ClauseSemantics::nae((j + 1) ^ v0.segment(&edge), k),
        (Family::Naesat, None) => ClauseSemantics::NaeForbidden { pattern: j },
        (Family::Xorsat, Some(v0)) => ClauseSemantics::XorTarget { bit: v0.segment(&edge).count_ones() % 2 == 1 },
        (Family::Xorsat, None) => ClauseSemantics::XorTarget { bit: j == 1 },
        (Family::Gold, Some(v0)) => {
            let chi = predicate.expect("gold spec carries a predicate").clone();
            let bit = chi.eval(v0.segment(&edge));
            ClauseSemantics::GoldTarget { predicate: chi, bit }
        }
        (Family::Gold, None) => unreachable!("unplanted gold rejected by validation"),
    };
    Clause { edge, semantics }
}

/// One draw of per-candidate variates, from which formulas at any density up
/// to the pool's maximum can be read off. Formulas read from the same pool
/// are nested.
#[derive(Clone, Debug)]
pub struct CoupledPool {
    spec: ModelSpec,
    space: CandidateSpace,
    index: Arc<EdgeIndex>,
    planted: Option<Assignment>,
    /// `(candidate rank, key)`; binomial keys are variates in `[0, p_max)`,
    /// uniform keys are positions in a random order.
    entries: Vec<(u64, f64)>,
    max_alpha: f64,
}

impl std::fmt::Debug for EdgeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EdgeIndex(n={}, k={}, ordered={})", self.n, self.k, self.ordered)
    }
}

fn draw_plant(spec: &ModelSpec, rng: &mut SeededRng) -> Option<Assignment> {
    match &spec.plant {
        PlantMode::Random => Some(Assignment::new((0..spec.n).map(|_| rng.random::<bool>()).collect())),
        PlantMode::Fixed(a) => Some(a.clone()),
        PlantMode::Unplanted => None,
    }
}

fn uniform_count(alpha: f64, n: usize) -> u64 {
    let m = alpha * n as f64;
    let r = m.round();
    if (m - r).abs() < 1e-9 {
        r as u64
    } else {
        m.floor() as u64
    }
}

impl CoupledPool {
    /// Draws the pool for densities up to `max_alpha`.
    pub fn new(spec: &ModelSpec, max_alpha: f64, seed: Seed) -> Result<Self> {
        spec.validate()?;
        let space = CandidateSpace::new(spec.family, spec.n, spec.k)?;
        let mut rng = rng_from_seed(seed);
        let planted = draw_plant(spec, &mut rng);
        let eligible = space.eligible(planted.is_some());
        let entries = match spec.scheme {
            Scheme::Binomial => {
                let p_max = space.probability(max_alpha)?;
                sample_ranks_geometric(eligible, p_max, &mut rng)
            }
            Scheme::Uniform => {
                if !(max_alpha.is_finite() && max_alpha >= 0.0) {
                    return Err(CspError::DensityOutOfRange(format!("alpha = {max_alpha}")));
                }
                let m = uniform_count(max_alpha, spec.n);
                if m > eligible {
                    return Err(CspError::DensityOutOfRange(format!(
                        "alpha n = {m} exceeds the {eligible} eligible clauses"
                    )));
                }
                let mut ranks: Vec<u64> = if eligible <= usize::MAX as u64 {
                    rand::seq::index::sample(&mut rng, eligible as usize, m as usize)
                        .into_iter()
                        .map(|r| r as u64)
                        .collect()
                } else {
                    return Err(CspError::ResourceLimit("candidate space exceeds usize".into()));
                };
                ranks.shuffle(&mut rng);
                let mut entries: Vec<(u64, f64)> =
                    ranks.into_iter().enumerate().map(|(pos, r)| (r, pos as f64)).collect();
                entries.sort_unstable_by_key(|e| e.0);
                entries
            }
        };
        let ordered = spec.family == Family::Gold;
        Ok(Self {
            spec: spec.clone(),
            index: Arc::new(EdgeIndex::new(spec.n, spec.k, ordered)),
            space,
            planted,
            entries,
            max_alpha,
        })
    }

    pub fn planted(&self) -> Option<&Assignment> {
        self.planted.as_ref()
    }

    pub fn max_alpha(&self) -> f64 {
        self.max_alpha
    }

    pub fn space(&self) -> &CandidateSpace {
        &self.space
    }

    /// Number of candidates carried by the pool (the clause count at the
    /// maximum density).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn threshold(&self, alpha: f64) -> Result<f64> {
        if alpha > self.max_alpha * (1.0 + 1e-12) {
            return Err(CspError::InvalidArgument(format!("alpha {alpha} above the pool maximum {}", self.max_alpha)));
        }
        match self.spec.scheme {
            Scheme::Binomial => self.space.probability(alpha),
            Scheme::Uniform => Ok(uniform_count(alpha, self.spec.n) as f64),
        }
    }

    /// Keys of the pool entries in candidate order; the clause with key `t`
    /// is present at density `alpha` iff `t < self.key_threshold(alpha)`.
    pub fn keys(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.1)
    }

    pub fn key_threshold(&self, alpha: f64) -> Result<f64> {
        self.threshold(alpha)
    }

    pub fn clause(&self, i: usize) -> Clause {
        clause_at(&self.index, &self.space, self.planted.as_ref(), self.spec.predicate.as_ref(), self.entries[i].0)
    }

    /// Formula keeping exactly the entries for which `keep(key)` holds.
    pub fn formula_where(&self, keep: impl Fn(f64) -> bool) -> Formula {
        let clauses = self.entries.iter().enumerate().filter(|(_, e)| keep(e.1)).map(|(i, _)| self.clause(i)).collect();
        let model = match (self.spec.scheme, self.planted.is_some()) {
            (_, false) => Model::Unplanted,
            (Scheme::Binomial, true) => Model::Binomial,
            (Scheme::Uniform, true) => Model::Uniform,
        };
        Formula {
            n: self.spec.n,
            k: self.spec.k,
            family: self.spec.family,
            model,
            planted: self.planted.clone(),
            clauses,
        }
    }

    pub fn formula_at(&self, alpha: f64) -> Result<Formula> {
        let t = self.threshold(alpha)?;
        Ok(self.formula_where(|key| key < t))
    }
}

/// Ranks in `0..eligible` kept independently with probability `p`, each
/// tagged with a variate uniform on `[0, p)`.
fn sample_ranks_geometric(eligible: u64, p: f64, rng: &mut SeededRng) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    if p <= 0.0 || eligible == 0 {
        return out;
    }
    if p >= 1.0 {
        out.reserve(eligible as usize);
        for r in 0..eligible {
            out.push((r, rng.random::<f64>()));
        }
        return out;
    }
    let log_q = (-p).ln_1p();
    let mut rank: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_q).floor();
        if !gap.is_finite() || gap >= (eligible - rank) as f64 {
            break;
        }
        rank += gap as u64;
        out.push((rank, p * rng.random::<f64>()));
        rank += 1;
        if rank >= eligible {
            break;
        }
    }
    out
}

fn require_strictly_increasing(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(CspError::InvalidArgument("empty alpha sequence".into()));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1] || w[0].is_nan() || w[1].is_nan()) {
        return Err(CspError::InvalidArgument(format!("alphas {alphas:?} not strictly increasing")));
    }
    Ok(())
}

/// Nested formulas at increasing densities driven by one set of variates.
pub fn coupled_chain(spec: &ModelSpec, alphas: &[f64], seed: Seed) -> Result<Vec<Formula>> {
    require_strictly_increasing(alphas)?;
    let pool = CoupledPool::new(spec, *alphas.last().unwrap(), seed)?;
    alphas.iter().map(|&a| pool.formula_at(a)).collect()
}

fn sample_single(spec: &ModelSpec, seed: Seed) -> Result<Formula> {
    let mut chain = coupled_chain(spec, &[spec.alpha], seed)?;
    Ok(chain.pop().unwrap())
}

/// Planted SAT / NAESAT / XORSAT formula from the binomial model.
pub fn sample_planted(spec: &ModelSpec, seed: Seed) -> Result<Formula> {
    if spec.family == Family::Gold {
        return Err(CspError::UnsupportedFamily("use sample_planted_gold for gold".into()));
    }
    if !spec.is_planted() {
        return Err(CspError::InvalidArgument("sample_planted needs a plant mode".into()));
    }
    sample_single(&spec.with_scheme(Scheme::Binomial), seed)
}

/// Planted Goldreich formula: ordered edges kept with probability
/// `alpha n / N`, each with target `χ(v0[e])`.
pub fn sample_planted_gold(spec: &ModelSpec, seed: Seed) -> Result<Formula> {
    if spec.family != Family::Gold {
        return Err(CspError::UnsupportedFamily(format!("sample_planted_gold called for {}", spec.family)));
    }
    sample_single(&spec.with_scheme(Scheme::Binomial), seed)
}

/// Unplanted binomial formula; may be unsatisfiable.
pub fn sample_unplanted(spec: &ModelSpec, seed: Seed) -> Result<Formula> {
    if spec.family == Family::Gold {
        return Err(CspError::UnsupportedFamily("gold formulas are defined by a planted input".into()));
    }
    sample_single(&spec.with_plant(PlantMode::Unplanted).with_scheme(Scheme::Binomial), seed)
}

/// Exactly `floor(alpha n)` distinct eligible clauses.
pub fn sample_uniform(spec: &ModelSpec, seed: Seed) -> Result<Formula> {
    sample_single(&spec.with_scheme(Scheme::Uniform), seed)
}

/// Dispatches on family, plant mode and scheme.
pub fn sample(spec: &ModelSpec, seed: Seed) -> Result<Formula> {
    match (spec.scheme, spec.family, spec.is_planted()) {
        (Scheme::Uniform, _, _) => sample_uniform(spec, seed),
        (Scheme::Binomial, Family::Gold, _) => sample_planted_gold(spec, seed),
        (Scheme::Binomial, _, true) => sample_planted(spec, seed),
        (Scheme::Binomial, _, false) => sample_unplanted(spec, seed),
    }
}

/// Uniform ordered edge of `k` distinct variables.
pub fn random_ordered_edge<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Edge {
    let vars: Vec<u32> = rand::seq::index::sample(rng, n, k).into_iter().map(|v| v as u32).collect();
    Edge::new(vars).expect("distinct sample")
}

/// Ordered edges kept independently with probability `alpha n / (C(n,k) k!)`.
pub fn sample_gold_edges(n: usize, k: usize, alpha: f64, seed: Seed) -> Result<Vec<Edge>> {
    let space = CandidateSpace::new(Family::Gold, n, k)?;
    let p = space.probability(alpha)?;
    let mut rng = rng_from_seed(seed);
    let index = EdgeIndex::new(n, k, true);
    Ok(sample_ranks_geometric(space.edges, p, &mut rng).into_iter().map(|(r, _)| index.edge(r)).collect())
}
