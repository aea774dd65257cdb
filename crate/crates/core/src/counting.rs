//! Exact solution counting.
//!
//! Three independent routes compute `Z(F)`: Gray-code enumeration of all
//! assignments, the same enumeration run per connected component, and GF(2)
//! elimination for XORSAT. They are used as oracles for one another.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CspError, Result};
use crate::formula::{Assignment, Clause, ClauseSemantics, Edge, Family, Formula, Model, Predicate};

/// Default largest variable count handled by enumeration.
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 30;

/// Below this many variables enumeration stays on one thread.
const PARALLEL_MIN_VARS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Brute,
    Components,
    Gf2,
    Preimage,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountResult {
    #[serde(serialize_with = "decimal")]
    pub z: BigUint,
    /// `log2(z)`, `-inf` when `z = 0`.
    pub log2_z: f64,
    pub method: CountMethod,
}

fn decimal<S: Serializer>(z: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(z)
}

impl CountResult {
    pub fn new(z: BigUint, method: CountMethod) -> Self {
        let log2_z = log2_big(&z);
        Self { z, log2_z, method }
    }
}

/// `log2` of an arbitrary-precision integer, exact for powers of two.
pub fn log2_big(z: &BigUint) -> f64 {
    if z.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = z.bits();
    if bits <= 64 {
        return z.to_u64().unwrap().to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    let top = (z >> shift).to_u64().unwrap();
    (top as f64).log2() + shift as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountConfig {
    /// Largest variable count (per component, for the component counter)
    /// enumerated exhaustively.
    pub cap: usize,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self { cap: DEFAULT_BRUTE_FORCE_CAP }
    }
}

/// Clause acceptance tables flattened for incremental enumeration.
struct Enumerator {
    n: usize,
    words_per_clause: usize,
    tables: Vec<u64>,
    /// For each variable, `(clause, position mask)` pairs.
    occurrences: Vec<Vec<(u32, u32)>>,
    clause_vars: Vec<Vec<u32>>,
}

impl Enumerator {
    fn new(n: usize, k: usize, clauses: &[Clause]) -> Self {
        let words_per_clause = (1usize << k).div_ceil(64);
        let mut tables = vec![0u64; words_per_clause * clauses.len()];
        let mut occurrences = vec![Vec::new(); n];
        for (ci, c) in clauses.iter().enumerate() {
            for (s, ok) in c.acceptance_table().into_iter().enumerate() {
                if ok {
                    tables[ci * words_per_clause + s / 64] |= 1 << (s % 64);
                }
            }
            let mut seen = Vec::with_capacity(k);
            for &v in c.edge.vars() {
                if !seen.contains(&v) {
                    seen.push(v);
                    occurrences[v as usize].push((ci as u32, c.edge.position_mask(v)));
                }
            }
        }
        let clause_vars = clauses.iter().map(|c| c.edge.vars().to_vec()).collect();
        Self { n, words_per_clause, tables, occurrences, clause_vars }
    }

    #[inline]
    fn accepts(&self, clause: usize, segment: u32) -> bool {
        let s = segment as usize;
        self.tables[clause * self.words_per_clause + s / 64] >> (s % 64) & 1 == 1
    }

    /// Counts solutions whose top `n - low` variables equal `prefix`, walking
    /// the low variables in Gray-code order.
    fn count_block(&self, low: usize, prefix: u64) -> u64 {
        let start = prefix << low;
        let mut segments: Vec<u32> = self
            .clause_vars
            .iter()
            .map(|vars| vars.iter().fold(0u32, |acc, &v| (acc << 1) | (start >> v & 1) as u32))
            .collect();
        let mut violated: i64 = segments.iter().enumerate().filter(|&(c, &s)| !self.accepts(c, s)).count() as i64;
        let mut count = u64::from(violated == 0);
        for step in 1u64..(1u64 << low) {
            let v = step.trailing_zeros() as usize;
            for &(c, m) in &self.occurrences[v] {
                let c = c as usize;
                let before = self.accepts(c, segments[c]);
                segments[c] ^= m;
                let after = self.accepts(c, segments[c]);
                violated += i64::from(before) - i64::from(after);
            }
            count += u64::from(violated == 0);
        }
        count
    }

    fn count(&self) -> BigUint {
        let n = self.n;
        if n < PARALLEL_MIN_VARS {
            return BigUint::from(self.count_block(n, 0));
        }
        let high = (n - 16).min(10);
        let low = n - high;
        let total: u128 =
            (0..1u64 << high).into_par_iter().map(|prefix| u128::from(self.count_block(low, prefix))).sum();
        BigUint::from(total)
    }
}

fn check_cap(n: usize, cfg: &CountConfig, what: &str) -> Result<()> {
    if n > cfg.cap || n > 62 {
        return Err(CspError::ResourceLimit(format!(
            "{what} has {n} variables, brute-force cap is {}",
            cfg.cap.min(62)
        )));
    }
    Ok(())
}

/// Exhaustive count over all `2^n` assignments.
pub fn count_exact(f: &Formula) -> Result<CountResult> {
    count_exact_with(f, &CountConfig::default())
}

pub fn count_exact_with(f: &Formula, cfg: &CountConfig) -> Result<CountResult> {
    check_cap(f.n, cfg, "formula")?;
    let z = Enumerator::new(f.n, f.k, &f.clauses).count();
    Ok(CountResult::new(z, CountMethod::Brute))
}

/// Connected components of the variable-clause incidence graph.
#[derive(Clone, Debug)]
pub struct ComponentSplit {
    /// Variables of each component in increasing order.
    pub components: Vec<Vec<u32>>,
    /// Each component's clauses, with variables renumbered to positions in
    /// the component's variable list.
    pub formulas: Vec<Formula>,
    /// Variables in no clause.
    pub isolated: usize,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

pub fn split_components(f: &Formula) -> ComponentSplit {
    let mut parent: Vec<u32> = (0..f.n as u32).collect();
    let mut used = vec![false; f.n];
    for c in &f.clauses {
        let vars = c.edge.vars();
        for &v in vars {
            used[v as usize] = true;
        }
        let mut root = find(&mut parent, vars[0]);
        for &v in &vars[1..] {
            let r = find(&mut parent, v);
            if r != root {
                let (lo, hi) = if r < root { (r, root) } else { (root, r) };
                parent[hi as usize] = lo;
                root = lo;
            }
        }
    }
    let mut comp_of_root = vec![usize::MAX; f.n];
    let mut local = vec![0u32; f.n];
    let mut components: Vec<Vec<u32>> = Vec::new();
    for v in 0..f.n as u32 {
        if !used[v as usize] {
            continue;
        }
        let r = find(&mut parent, v) as usize;
        if comp_of_root[r] == usize::MAX {
            comp_of_root[r] = components.len();
            components.push(Vec::new());
        }
        let ci = comp_of_root[r];
        local[v as usize] = components[ci].len() as u32;
        components[ci].push(v);
    }
    let mut clause_lists: Vec<Vec<Clause>> = vec![Vec::new(); components.len()];
    for c in &f.clauses {
        let ci = comp_of_root[find(&mut parent, c.edge.vars()[0]) as usize];
        let edge = Edge::new(c.edge.vars().iter().map(|&v| local[v as usize]).collect())
            .expect("renumbering preserves distinctness");
        clause_lists[ci].push(Clause { edge, semantics: c.semantics.clone() });
    }
    let formulas = components
        .iter()
        .zip(clause_lists)
        .map(|(vars, clauses)| Formula {
            n: vars.len(),
            k: f.k,
            family: f.family,
            model: f.model,
            planted: None,
            clauses,
        })
        .collect();
    let isolated = used.iter().filter(|&&u| !u).count();
    ComponentSplit { components, formulas, isolated }
}

/// `2^isolated` times the product of per-component exhaustive counts.
pub fn count_components(f: &Formula) -> Result<CountResult> {
    count_components_with(f, &CountConfig::default())
}

pub fn count_components_with(f: &Formula, cfg: &CountConfig) -> Result<CountResult> {
    let split = split_components(f);
    for (i, comp) in split.formulas.iter().enumerate() {
        check_cap(comp.n, cfg, &format!("component {i} (first variable {})", split.components[i][0]))?;
    }
    let mut z = BigUint::one() << split.isolated;
    for comp in &split.formulas {
        let c = Enumerator::new(comp.n, comp.k, &comp.clauses).count();
        if c.is_zero() {
            return Ok(CountResult::new(BigUint::zero(), CountMethod::Components));
        }
        z *= c;
    }
    Ok(CountResult::new(z, CountMethod::Components))
}

/// Rank of the XOR system and whether it is consistent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Gf2System {
    pub rank: usize,
    pub consistent: bool,
}

/// Gaussian elimination over GF(2) on word-packed rows; the right-hand side
/// lives in bit `n` of each row. Rows are reduced against a basis keyed by
/// leading bit.
pub fn gf2_eliminate(n: usize, rows: impl IntoIterator<Item = (Vec<u32>, bool)>) -> Gf2System {
    let words = (n + 1).div_ceil(64);
    let mut basis: Vec<Option<Vec<u64>>> = vec![None; n];
    let mut rank = 0;
    let mut consistent = true;
    for (vars, rhs) in rows {
        let mut row = vec![0u64; words];
        for v in vars {
            row[v as usize / 64] ^= 1 << (v % 64);
        }
        if rhs {
            row[n / 64] ^= 1 << (n % 64);
        }
        loop {
            match first_var_bit(&row, n) {
                None => {
                    if row[n / 64] >> (n % 64) & 1 == 1 {
                        consistent = false;
                    }
                    break;
                }
                Some(lead) => match &basis[lead] {
                    Some(b) => row.iter_mut().zip(b).for_each(|(r, b)| *r ^= b),
                    None => {
                        basis[lead] = Some(row);
                        rank += 1;
                        break;
                    }
                },
            }
        }
    }
    Gf2System { rank, consistent }
}

fn first_var_bit(row: &[u64], n: usize) -> Option<usize> {
    for (w, &word) in row.iter().enumerate() {
        let word = if w == n / 64 { word & ((1u64 << (n % 64)) - 1) } else { word };
        if word != 0 {
            let bit = w * 64 + word.trailing_zeros() as usize;
            return (bit < n).then_some(bit);
        }
    }
    None
}

pub fn xorsat_system(f: &Formula) -> Result<Gf2System> {
    if f.family != Family::Xorsat {
        return Err(CspError::UnsupportedFamily(format!("GF(2) counting needs xorsat, got {}", f.family)));
    }
    Ok(gf2_eliminate(
        f.n,
        f.clauses.iter().map(|c| match c.semantics {
            ClauseSemantics::XorTarget { bit } => (c.edge.vars().to_vec(), bit),
            _ => unreachable!("family checked"),
        }),
    ))
}

/// `Z = 2^(n - rank)` for a consistent system, else 0. No variable cap.
pub fn count_xorsat(f: &Formula) -> Result<CountResult> {
    let sys = xorsat_system(f)?;
    let z = if sys.consistent { BigUint::one() << (f.n - sys.rank) } else { BigUint::zero() };
    Ok(CountResult::new(z, CountMethod::Gf2))
}

/// XOR through GF(2), everything else through components.
pub fn count_auto(f: &Formula, cfg: &CountConfig) -> Result<CountResult> {
    if f.family == Family::Xorsat {
        count_xorsat(f)
    } else {
        count_components_with(f, cfg)
    }
}

/// Goldreich formula whose clauses require `χ(u[e]) = χ(x[e])`.
pub fn gold_output_formula(x: &Assignment, edges: &[Edge], chi: &Predicate) -> Result<Formula> {
    let k = chi.arity();
    let chi = std::sync::Arc::new(chi.clone());
    let clauses = edges
        .iter()
        .map(|e| {
            if e.vars().iter().any(|&v| v as usize >= x.len()) {
                return Err(CspError::InvalidClause(format!("edge {:?} out of range", e.vars())));
            }
            let bit = chi.eval(x.segment(e));
            Clause::new(e.clone(), ClauseSemantics::GoldTarget { predicate: chi.clone(), bit })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Formula { n: x.len(), k, family: Family::Gold, model: Model::Binomial, planted: Some(x.clone()), clauses })
}

/// Number of inputs `u` with the same Goldreich output as `x`.
pub fn count_gold_preimages(x: &Assignment, edges: &[Edge], chi: &Predicate) -> Result<CountResult> {
    count_gold_preimages_with(x, edges, chi, &CountConfig::default())
}

pub fn count_gold_preimages_with(
    x: &Assignment,
    edges: &[Edge],
    chi: &Predicate,
    cfg: &CountConfig,
) -> Result<CountResult> {
    check_cap(x.len(), cfg, "preimage count")?;
    let f = gold_output_formula(x, edges, chi)?;
    let z = Enumerator::new(f.n, f.k, &f.clauses).count();
    Ok(CountResult::new(z, CountMethod::Preimage))
}

/// Same as [`count_gold_preimages`] reading edges and predicate off a gold
/// formula; the formula's own targets are ignored.
pub fn count_formula_preimages(x: &Assignment, f: &Formula) -> Result<CountResult> {
    if f.family != Family::Gold {
        return Err(CspError::UnsupportedFamily(format!("preimages need gold, got {}", f.family)));
    }
    let Some(chi) = f.clauses.iter().find_map(|c| match &c.semantics {
        ClauseSemantics::GoldTarget { predicate, .. } => Some(predicate.clone()),
        _ => None,
    }) else {
        return Ok(CountResult::new(BigUint::one() << x.len(), CountMethod::Preimage));
    };
    let edges: Vec<Edge> = f.clauses.iter().map(|c| c.edge.clone()).collect();
    count_gold_preimages(x, &edges, &chi)
}

/// Partition of `{0,1}^n` into classes of equal Goldreich output, refined
/// one edge at a time. Input `x` has variable `i` in bit `i`.
#[derive(Clone, Debug)]
pub struct PreimagePartition {
    n: usize,
    class: Vec<u32>,
    sizes: Vec<u64>,
}

/// Largest `n` the partition will enumerate.
pub const PARTITION_MAX_VARS: usize = 24;

#[inline]
fn word_segment(x: u64, edge: &Edge) -> u32 {
    edge.vars().iter().fold(0u32, |acc, &v| (acc << 1) | (x >> v & 1) as u32)
}

impl PreimagePartition {
    pub fn new(n: usize) -> Result<Self> {
        if n > PARTITION_MAX_VARS {
            return Err(CspError::ResourceLimit(format!(
                "preimage partition over {n} variables exceeds {PARTITION_MAX_VARS}"
            )));
        }
        Ok(Self { n, class: vec![0; 1 << n], sizes: vec![1 << n] })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.sizes.len()
    }

    /// `Z(x, G)`.
    pub fn preimages(&self, x: u64) -> u64 {
        self.sizes[self.class[x as usize] as usize]
    }

    fn check_edge(&self, edge: &Edge, chi: &Predicate) -> Result<()> {
        if edge.arity() != chi.arity() {
            return Err(CspError::InvalidClause("edge and predicate arity differ".into()));
        }
        if edge.vars().iter().any(|&v| v as usize >= self.n) {
            return Err(CspError::InvalidClause(format!("edge {:?} out of range", edge.vars())));
        }
        Ok(())
    }

    pub fn refine(&mut self, edge: &Edge, chi: &Predicate) -> Result<()> {
        self.check_edge(edge, chi)?;
        let mut remap = vec![u32::MAX; 2 * self.sizes.len()];
        let mut sizes = Vec::with_capacity(self.sizes.len() * 2);
        for (x, c) in self.class.iter_mut().enumerate() {
            let bit = chi.eval(word_segment(x as u64, edge)) as usize;
            let key = 2 * *c as usize + bit;
            if remap[key] == u32::MAX {
                remap[key] = sizes.len() as u32;
                sizes.push(0);
            }
            *c = remap[key];
            sizes[*c as usize] += 1;
        }
        self.sizes = sizes;
        Ok(())
    }

    /// `L(G) = E_X log2 Z(X, G)` in bits, with `X` uniform.
    pub fn mean_log2_preimages(&self) -> f64 {
        let total = (1u64 << self.n) as f64;
        let sum = crate::scalar::compensated_sum(self.sizes.iter().map(|&s| s as f64 * (s as f64).log2()));
        sum / total
    }

    /// Conditional entropy (bits) of the output bit of `edge` given the
    /// current output, which equals `L(G) - L(G ∪ e)`.
    pub fn split_entropy(&self, edge: &Edge, chi: &Predicate) -> Result<f64> {
        self.check_edge(edge, chi)?;
        let mut ones = vec![0u64; self.sizes.len()];
        for (x, &c) in self.class.iter().enumerate() {
            if chi.eval(word_segment(x as u64, edge)) {
                ones[c as usize] += 1;
            }
        }
        let total = (1u64 << self.n) as f64;
        // class size times the binary entropy of its split; an even split
        // contributes exactly its size, so the result never exceeds 1
        let terms = self.sizes.iter().zip(&ones).map(|(&s, &a)| {
            let p = a as f64 / s as f64;
            let h = |t: f64| if t > 0.0 { -t * t.log2() } else { 0.0 };
            s as f64 * (h(p) + h(1.0 - p))
        });
        Ok(crate::scalar::compensated_sum(terms) / total)
    }
}
