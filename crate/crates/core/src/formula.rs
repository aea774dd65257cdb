//! CSP instances: edges, clause semantics, assignments and the two symmetry
//! transforms (planting at zero, variable relabeling).
//!
//! Bit conventions: the restriction `y[e]` of an assignment to an edge is
//! packed into an integer with `vars[0]` as the most significant bit, and a
//! predicate table is indexed by that integer.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CspError, Result};

/// Largest supported clause arity. Packed segments are `u32` and predicate
/// tables hold `2^k` entries.
pub const MAX_ARITY: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sat,
    Naesat,
    Xorsat,
    Gold,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Sat => "sat",
            Family::Naesat => "naesat",
            Family::Xorsat => "xorsat",
            Family::Gold => "gold",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = CspError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sat" | "ksat" => Ok(Family::Sat),
            "nae" | "naesat" => Ok(Family::Naesat),
            "xor" | "xorsat" => Ok(Family::Xorsat),
            "gold" | "goldreich" => Ok(Family::Gold),
            other => Err(CspError::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

/// How a formula was generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Binomial,
    Uniform,
    Unplanted,
}

/// Truth table of a Boolean function on `k` bits.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    k: usize,
    table: Vec<bool>,
}

impl Predicate {
    pub fn new(k: usize, table: Vec<bool>) -> Result<Self> {
        if k == 0 || k > MAX_ARITY {
            return Err(CspError::InvalidArgument(format!("predicate arity {k} outside 1..={MAX_ARITY}")));
        }
        if table.len() != 1 << k {
            return Err(CspError::Dimension { expected: 1 << k, got: table.len() });
        }
        Ok(Self { k, table })
    }

    pub fn from_fn(k: usize, f: impl Fn(u32) -> bool) -> Result<Self> {
        if k == 0 || k > MAX_ARITY {
            return Err(CspError::InvalidArgument(format!("predicate arity {k} outside 1..={MAX_ARITY}")));
        }
        Self::new(k, (0..1u32 << k).map(f).collect())
    }

    /// Builds a predicate from the low `2^k` bits of `bits` (bit `i` is `χ(i)`).
    pub fn from_bits(k: usize, bits: u64) -> Result<Self> {
        if k > 6 {
            return Err(CspError::InvalidArgument(format!("from_bits supports k <= 6, got {k}")));
        }
        Self::from_fn(k, |x| bits >> x & 1 == 1)
    }

    pub fn parity(k: usize) -> Self {
        Self::from_fn(k, |x| x.count_ones() % 2 == 1).expect("valid arity")
    }

    pub fn and(k: usize) -> Self {
        let all = (1u32 << k) - 1;
        Self::from_fn(k, |x| x == all).expect("valid arity")
    }

    pub fn constant(k: usize, value: bool) -> Self {
        Self::from_fn(k, |_| value).expect("valid arity")
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    #[inline]
    pub fn eval(&self, x: u32) -> bool {
        self.table[x as usize]
    }

    pub fn ones(&self) -> usize {
        self.table.iter().filter(|&&b| b).count()
    }

    /// Low 64 bits of the table, for `k <= 6`.
    pub fn bits(&self) -> Option<u64> {
        (self.k <= 6).then(|| self.table.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i)))
    }

    /// Hex encoding of the table, most significant nibble first, `0x` prefix.
    /// Parity on three bits is `0x96`.
    pub fn to_hex(&self) -> String {
        let digits = (self.table.len() / 4).max(1);
        let mut out = String::with_capacity(digits + 2);
        out.push_str("0x");
        for d in (0..digits).rev() {
            let mut nibble = 0u32;
            for b in 0..4 {
                let i = 4 * d + b;
                if i < self.table.len() && self.table[i] {
                    nibble |= 1 << b;
                }
            }
            out.push(char::from_digit(nibble, 16).unwrap());
        }
        out
    }

    /// Parses a hex table. With `k = None` the arity is inferred from the
    /// digit count, which requires `k >= 2`.
    pub fn from_hex(s: &str, k: Option<usize>) -> Result<Self> {
        let body = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
        if body.is_empty() || !body.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(CspError::Parse(format!("bad hex predicate '{s}'")));
        }
        let k = match k {
            Some(k) => k,
            None => {
                let bits = body.len() * 4;
                if !bits.is_power_of_two() {
                    return Err(CspError::Parse(format!("cannot infer arity from '{s}'")));
                }
                bits.trailing_zeros() as usize
            }
        };
        if k == 0 || k > MAX_ARITY {
            return Err(CspError::InvalidArgument(format!("predicate arity {k} outside 1..={MAX_ARITY}")));
        }
        let size = 1usize << k;
        let mut table = vec![false; size];
        for (d, c) in body.chars().rev().enumerate() {
            let nibble = c.to_digit(16).unwrap();
            for b in 0..4 {
                if nibble >> b & 1 == 1 {
                    let i = 4 * d + b;
                    if i >= size {
                        return Err(CspError::Parse(format!("hex predicate '{s}' has bits beyond 2^{k}")));
                    }
                    table[i] = true;
                }
            }
        }
        Self::new(k, table)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predicate(k={}, {})", self.k, self.to_hex())
    }
}

#[derive(Serialize, Deserialize)]
struct PredicateRepr {
    k: usize,
    table: String,
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PredicateRepr { k: self.k, table: self.to_hex() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PredicateRepr::deserialize(d)?;
        Predicate::from_hex(&repr.table, Some(repr.k)).map_err(serde::de::Error::custom)
    }
}

/// Assignment of Boolean values to `n` variables.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    /// Low `n` bits of `word`, variable `i` taking bit `i`.
    pub fn from_word(n: usize, word: u64) -> Self {
        Self { bits: (0..n).map(|i| word >> i & 1 == 1).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    /// `y[e]` packed with `vars[0]` as the most significant bit.
    #[inline]
    pub fn segment(&self, edge: &Edge) -> u32 {
        edge.vars().iter().fold(0u32, |acc, &v| (acc << 1) | u32::from(self.bits[v as usize]))
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Assignment({self})")
    }
}

impl FromStr for Assignment {
    type Err = CspError;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(CspError::Parse(format!("assignment '{s}' is not a bit string"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered sequence of distinct variable indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Edge(Vec<u32>);

impl Edge {
    pub fn new(vars: Vec<u32>) -> Result<Self> {
        if vars.is_empty() || vars.len() > MAX_ARITY {
            return Err(CspError::InvalidClause(format!("edge arity {} outside 1..={MAX_ARITY}", vars.len())));
        }
        let distinct: HashSet<_> = vars.iter().collect();
        if distinct.len() != vars.len() {
            return Err(CspError::InvalidClause(format!("edge {vars:?} repeats a variable")));
        }
        Ok(Self(vars))
    }

    pub fn vars(&self) -> &[u32] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// Bit mask (in segment coordinates) of the positions holding `v`.
    pub fn position_mask(&self, v: u32) -> u32 {
        let k = self.0.len();
        self.0.iter().enumerate().filter(|(_, &u)| u == v).fold(0, |m, (i, _)| m | 1 << (k - 1 - i))
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let vars = Vec::<u32>::deserialize(d)?;
        Edge::new(vars).map_err(serde::de::Error::custom)
    }
}

/// Per-clause constraint on `y[e]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClauseSemantics {
    /// Satisfied iff `y[e] != pattern`.
    SatForbidden { pattern: u32 },
    /// Satisfied iff `y[e]` is neither `pattern` nor its complement. The
    /// stored pattern is the smaller of the two (leading bit clear).
    NaeForbidden { pattern: u32 },
    /// Satisfied iff the parity of `y[e]` equals `bit`.
    XorTarget { bit: bool },
    /// Satisfied iff `χ(y[e]) = bit`.
    GoldTarget { predicate: Arc<Predicate>, bit: bool },
}

impl ClauseSemantics {
    /// NAE semantics with the canonical member of `{pattern, complement}`.
    pub fn nae(pattern: u32, k: usize) -> Self {
        ClauseSemantics::NaeForbidden { pattern: canonical_nae(pattern, k) }
    }

    pub fn family(&self) -> Family {
        match self {
            ClauseSemantics::SatForbidden { .. } => Family::Sat,
            ClauseSemantics::NaeForbidden { .. } => Family::Naesat,
            ClauseSemantics::XorTarget { .. } => Family::Xorsat,
            ClauseSemantics::GoldTarget { .. } => Family::Gold,
        }
    }

    /// Evaluates on a packed segment of width `k`.
    #[inline]
    pub fn accepts(&self, segment: u32, k: usize) -> bool {
        match self {
            ClauseSemantics::SatForbidden { pattern } => segment != *pattern,
            ClauseSemantics::NaeForbidden { pattern } => segment != *pattern && segment != complement(*pattern, k),
            ClauseSemantics::XorTarget { bit } => (segment.count_ones() % 2 == 1) == *bit,
            ClauseSemantics::GoldTarget { predicate, bit } => predicate.eval(segment) == *bit,
        }
    }
}

#[inline]
pub fn complement(pattern: u32, k: usize) -> u32 {
    !pattern & mask(k)
}

#[inline]
pub fn mask(k: usize) -> u32 {
    if k >= 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

/// The member of `{pattern, complement}` whose leading bit is clear, which is
/// also the lexicographically smaller one.
#[inline]
pub fn canonical_nae(pattern: u32, k: usize) -> u32 {
    let p = pattern & mask(k);
    p.min(complement(p, k))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub edge: Edge,
    pub semantics: ClauseSemantics,
}

impl Clause {
    pub fn new(edge: Edge, semantics: ClauseSemantics) -> Result<Self> {
        let k = edge.arity();
        match &semantics {
            ClauseSemantics::SatForbidden { pattern } if *pattern > mask(k) => {
                return Err(CspError::InvalidClause(format!("pattern {pattern:#b} wider than edge arity {k}")));
            }
            ClauseSemantics::NaeForbidden { pattern } => {
                if *pattern > mask(k) {
                    return Err(CspError::InvalidClause(format!("pattern {pattern:#b} wider than edge arity {k}")));
                }
                if *pattern != canonical_nae(*pattern, k) {
                    return Err(CspError::InvalidClause(format!("NAE pattern {pattern:#b} is not canonical")));
                }
            }
            ClauseSemantics::GoldTarget { predicate, .. } if predicate.arity() != k => {
                return Err(CspError::InvalidClause(format!(
                    "predicate arity {} differs from edge arity {k}",
                    predicate.arity()
                )));
            }
            _ => {}
        }
        Ok(Self { edge, semantics })
    }

    pub fn arity(&self) -> usize {
        self.edge.arity()
    }

    /// Evaluates the clause on a full assignment.
    pub fn eval(&self, a: &Assignment) -> Result<bool> {
        if let Some(&v) = self.edge.vars().iter().find(|&&v| v as usize >= a.len()) {
            return Err(CspError::Dimension { expected: v as usize + 1, got: a.len() });
        }
        Ok(self.semantics.accepts(a.segment(&self.edge), self.arity()))
    }

    /// Truth table of the clause as a function of its packed segment.
    pub fn acceptance_table(&self) -> Vec<bool> {
        let k = self.arity();
        (0..1u32 << k).map(|s| self.semantics.accepts(s, k)).collect()
    }
}

pub fn eval_clause(clause: &Clause, a: &Assignment) -> Result<bool> {
    clause.eval(a)
}

/// A k-uniform CSP instance over variables `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    pub n: usize,
    pub k: usize,
    pub family: Family,
    pub model: Model,
    pub planted: Option<Assignment>,
    pub clauses: Vec<Clause>,
}

impl Formula {
    /// Validates arity, index range, family consistency and the planted
    /// length. Duplicate `(edge, semantics)` pairs are rejected for the
    /// binomial and uniform models.
    pub fn new(
        n: usize,
        k: usize,
        family: Family,
        model: Model,
        planted: Option<Assignment>,
        clauses: Vec<Clause>,
    ) -> Result<Self> {
        if k == 0 || k > MAX_ARITY {
            return Err(CspError::InvalidArgument(format!("arity {k} outside 1..={MAX_ARITY}")));
        }
        if let Some(p) = &planted {
            if p.len() != n {
                return Err(CspError::Dimension { expected: n, got: p.len() });
            }
        }
        for c in &clauses {
            if c.arity() != k {
                return Err(CspError::InvalidClause(format!("clause arity {} in a {k}-uniform formula", c.arity())));
            }
            if c.semantics.family() != family {
                return Err(CspError::InvalidClause(format!("{} clause in a {family} formula", c.semantics.family())));
            }
            if let Some(&v) = c.edge.vars().iter().find(|&&v| v as usize >= n) {
                return Err(CspError::InvalidClause(format!("variable {v} out of range 0..{n}")));
            }
        }
        let f = Self { n, k, family, model, planted, clauses };
        if f.has_duplicates() {
            return Err(CspError::InvalidClause("duplicate clause".into()));
        }
        Ok(f)
    }

    /// A formula with no clauses.
    pub fn empty(n: usize, k: usize, family: Family) -> Self {
        Self { n, k, family, model: Model::Unplanted, planted: None, clauses: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    fn has_duplicates(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.clauses.len());
        !self.clauses.iter().all(|c| seen.insert(c))
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool> {
        if a.len() != self.n {
            return Err(CspError::Dimension { expected: self.n, got: a.len() });
        }
        Ok(self.clauses.iter().all(|c| c.semantics.accepts(a.segment(&c.edge), self.k)))
    }

    /// `true` when there is no plant or the plant satisfies every clause.
    pub fn plant_satisfies(&self) -> bool {
        self.planted.as_ref().is_none_or(|p| self.eval(p).unwrap_or(false))
    }
}

pub fn eval_formula(f: &Formula, a: &Assignment) -> Result<bool> {
    f.eval(a)
}

/// Moves the plant to `0^n` by XOR-ing each clause with `v0[e]`. The solution
/// count is unchanged because the map `y -> y ⊕ v0` is a bijection between
/// the two solution sets.
pub fn zero_plant_transform(f: &Formula) -> Result<Formula> {
    let v0 = f.planted.as_ref().ok_or_else(|| CspError::InvalidArgument("formula has no planted assignment".into()))?;
    if f.family == Family::Gold {
        return Err(CspError::UnsupportedFamily("zero-plant reduction is not defined for gold formulas".into()));
    }
    let k = f.k;
    let clauses = f
        .clauses
        .iter()
        .map(|c| {
            let shift = v0.segment(&c.edge);
            let semantics = match &c.semantics {
                ClauseSemantics::SatForbidden { pattern } => ClauseSemantics::SatForbidden { pattern: pattern ^ shift },
                ClauseSemantics::NaeForbidden { pattern } => ClauseSemantics::nae(pattern ^ shift, k),
                ClauseSemantics::XorTarget { bit } => {
                    ClauseSemantics::XorTarget { bit: *bit ^ (shift.count_ones() % 2 == 1) }
                }
                ClauseSemantics::GoldTarget { .. } => unreachable!("gold rejected above"),
            };
            Clause { edge: c.edge.clone(), semantics }
        })
        .collect();
    Ok(Formula { n: f.n, k, family: f.family, model: f.model, planted: Some(Assignment::zeros(f.n)), clauses })
}

/// Renames variable `i` to `perm[i]` everywhere, keeping edge positions.
pub fn relabel(f: &Formula, perm: &[u32]) -> Result<Formula> {
    if perm.len() != f.n {
        return Err(CspError::InvalidPermutation(format!(
            "permutation has length {}, formula has {} variables",
            perm.len(),
            f.n
        )));
    }
    let mut seen = vec![false; f.n];
    for &p in perm {
        let p = p as usize;
        if p >= f.n || std::mem::replace(&mut seen[p], true) {
            return Err(CspError::InvalidPermutation(format!("{perm:?} is not a bijection")));
        }
    }
    let clauses = f
        .clauses
        .iter()
        .map(|c| Clause {
            edge: Edge(c.edge.vars().iter().map(|&v| perm[v as usize]).collect()),
            semantics: c.semantics.clone(),
        })
        .collect();
    let planted = f.planted.as_ref().map(|p| {
        let mut bits = vec![false; f.n];
        for (i, &b) in p.bits().iter().enumerate() {
            bits[perm[i] as usize] = b;
        }
        Assignment::new(bits)
    });
    Ok(Formula { n: f.n, k: f.k, family: f.family, model: f.model, planted, clauses })
}

/// Inverse of a permutation given as an image table.
pub fn invert_permutation(perm: &[u32]) -> Vec<u32> {
    let mut inv = vec![0u32; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p as usize] = i as u32;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(v: &[u32]) -> Edge {
        Edge::new(v.to_vec()).unwrap()
    }

    fn a(bits: &str) -> Assignment {
        bits.parse().unwrap()
    }

    #[test]
    fn sat_clause_rejects_forbidden_pattern() {
        let c = Clause::new(edge(&[0, 1]), ClauseSemantics::SatForbidden { pattern: 0b00 }).unwrap();
        assert!(!c.eval(&a("00")).unwrap());
        assert!(c.eval(&a("10")).unwrap());
    }

    #[test]
    fn xor_clause_checks_parity() {
        let c = Clause::new(edge(&[0, 1]), ClauseSemantics::XorTarget { bit: true }).unwrap();
        assert!(c.eval(&a("10")).unwrap());
        assert!(!c.eval(&a("11")).unwrap());
    }

    #[test]
    fn nae_clause_rejects_complement() {
        let c = Clause::new(edge(&[0, 1]), ClauseSemantics::nae(0b01, 2)).unwrap();
        assert!(!c.eval(&a("10")).unwrap());
        assert!(!c.eval(&a("01")).unwrap());
        assert!(c.eval(&a("00")).unwrap());
    }

    #[test]
    fn nae_canonicalization_identifies_pattern_and_complement() {
        for k in 1..=5 {
            for x in 0..1u32 << k {
                let c1 = Clause::new(edge(&(0..k as u32).collect::<Vec<_>>()), ClauseSemantics::nae(x, k));
                let c2 =
                    Clause::new(edge(&(0..k as u32).collect::<Vec<_>>()), ClauseSemantics::nae(complement(x, k), k));
                assert_eq!(c1, c2);
            }
        }
    }

    #[test]
    fn arity_mismatches_are_invalid_clauses() {
        let wide = Clause::new(edge(&[0, 1]), ClauseSemantics::SatForbidden { pattern: 0b100 });
        assert!(matches!(wide, Err(CspError::InvalidClause(_))));
        let gold = Clause::new(
            edge(&[0, 1]),
            ClauseSemantics::GoldTarget { predicate: Arc::new(Predicate::parity(3)), bit: true },
        );
        assert!(matches!(gold, Err(CspError::InvalidClause(_))));
        let non_canonical = Clause::new(edge(&[0, 1]), ClauseSemantics::NaeForbidden { pattern: 0b10 });
        assert!(matches!(non_canonical, Err(CspError::InvalidClause(_))));
        assert!(Edge::new(vec![1, 1]).is_err());
    }

    #[test]
    fn clause_eval_reports_short_assignment() {
        let c = Clause::new(edge(&[0, 4]), ClauseSemantics::XorTarget { bit: false }).unwrap();
        assert!(matches!(c.eval(&a("01")), Err(CspError::Dimension { .. })));
    }

    #[test]
    fn gold_parity_agrees_with_xor() {
        for k in 1..=6usize {
            let e = edge(&(0..k as u32).collect::<Vec<_>>());
            let parity = Arc::new(Predicate::parity(k));
            for bit in [false, true] {
                let g = ClauseSemantics::GoldTarget { predicate: parity.clone(), bit };
                let x = ClauseSemantics::XorTarget { bit };
                let cg = Clause::new(e.clone(), g).unwrap();
                let cx = Clause::new(e.clone(), x).unwrap();
                assert_eq!(cg.acceptance_table(), cx.acceptance_table());
            }
        }
    }

    #[test]
    fn formula_eval_edge_cases() {
        let f = Formula::empty(3, 2, Family::Sat);
        assert!(f.eval(&a("101")).unwrap());
        assert!(matches!(f.eval(&a("10")), Err(CspError::Dimension { expected: 3, got: 2 })));

        let c1 = Clause::new(edge(&[0, 1]), ClauseSemantics::SatForbidden { pattern: 0b11 }).unwrap();
        let c2 = Clause::new(edge(&[1, 2]), ClauseSemantics::SatForbidden { pattern: 0b01 }).unwrap();
        let f = Formula::new(3, 2, Family::Sat, Model::Unplanted, None, vec![c1, c2]).unwrap();
        assert!(!f.eval(&a("001")).unwrap());
        assert!(f.eval(&a("000")).unwrap());
    }

    #[test]
    fn formula_rejects_mixed_families_and_duplicates() {
        let s = Clause::new(edge(&[0, 1]), ClauseSemantics::SatForbidden { pattern: 0 }).unwrap();
        let x = Clause::new(edge(&[0, 1]), ClauseSemantics::XorTarget { bit: false }).unwrap();
        assert!(Formula::new(2, 2, Family::Sat, Model::Binomial, None, vec![s.clone(), x]).is_err());
        assert!(Formula::new(2, 2, Family::Sat, Model::Binomial, None, vec![s.clone(), s]).is_err());
    }

    #[test]
    fn zero_plant_xors_pattern_with_plant() {
        let c = Clause::new(edge(&[0, 1]), ClauseSemantics::SatForbidden { pattern: 0b10 }).unwrap();
        let f = Formula::new(2, 2, Family::Sat, Model::Binomial, Some(a("10")), vec![c]).unwrap();
        let g = zero_plant_transform(&f).unwrap();
        assert_eq!(g.planted, Some(a("00")));
        assert_eq!(g.clauses[0].semantics, ClauseSemantics::SatForbidden { pattern: 0b00 });
    }

    #[test]
    fn zero_plant_is_identity_on_zero_plant() {
        let c = Clause::new(edge(&[0, 2]), ClauseSemantics::nae(0b01, 2)).unwrap();
        let x = Clause::new(edge(&[1, 2]), ClauseSemantics::XorTarget { bit: false }).unwrap();
        let f = Formula::new(3, 2, Family::Naesat, Model::Binomial, Some(a("000")), vec![c]).unwrap();
        assert_eq!(zero_plant_transform(&f).unwrap(), f);
        let f = Formula::new(3, 2, Family::Xorsat, Model::Binomial, Some(a("000")), vec![x]).unwrap();
        assert_eq!(zero_plant_transform(&f).unwrap(), f);
    }

    #[test]
    fn zero_plant_rejects_gold_and_missing_plant() {
        let g = Formula::empty(3, 3, Family::Gold);
        assert!(matches!(zero_plant_transform(&g), Err(CspError::InvalidArgument(_))));
        let mut g = g;
        g.planted = Some(Assignment::zeros(3));
        assert!(matches!(zero_plant_transform(&g), Err(CspError::UnsupportedFamily(_))));
    }

    #[test]
    fn relabel_identity_and_inverse() {
        let c = Clause::new(edge(&[0, 3]), ClauseSemantics::SatForbidden { pattern: 0b10 }).unwrap();
        let f = Formula::new(4, 2, Family::Sat, Model::Binomial, Some(a("0100")), vec![c]).unwrap();
        assert_eq!(relabel(&f, &[0, 1, 2, 3]).unwrap(), f);
        let p = [2, 0, 3, 1];
        let g = relabel(&f, &p).unwrap();
        assert_eq!(g.clauses[0].edge.vars(), &[2, 1]);
        assert!(g.plant_satisfies());
        assert_eq!(relabel(&g, &invert_permutation(&p)).unwrap(), f);
    }

    #[test]
    fn relabel_rejects_non_bijection() {
        let f = Formula::empty(3, 2, Family::Sat);
        assert!(matches!(relabel(&f, &[0, 0, 1]), Err(CspError::InvalidPermutation(_))));
        assert!(matches!(relabel(&f, &[0, 1]), Err(CspError::InvalidPermutation(_))));
        assert!(matches!(relabel(&f, &[0, 1, 3]), Err(CspError::InvalidPermutation(_))));
    }

    #[test]
    fn predicate_hex_encoding() {
        assert_eq!(Predicate::parity(3).to_hex(), "0x96");
        assert_eq!(Predicate::from_hex("0x96", None).unwrap(), Predicate::parity(3));
        assert_eq!(Predicate::and(2).to_hex(), "0x8");
        assert_eq!(Predicate::from_hex("8", Some(2)).unwrap(), Predicate::and(2));
        assert_eq!(Predicate::from_hex("0x6996", None).unwrap(), Predicate::parity(4));
        assert!(Predicate::from_hex("0x1ff", Some(3)).is_err());
        assert!(Predicate::from_hex("zz", None).is_err());
    }

    #[test]
    fn formula_json_round_trip() {
        let p = Arc::new(Predicate::parity(3));
        let c = Clause::new(edge(&[2, 0, 1]), ClauseSemantics::GoldTarget { predicate: p, bit: true }).unwrap();
        let f = Formula::new(3, 3, Family::Gold, Model::Binomial, Some(a("100")), vec![c]).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let back: Formula = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }
}
