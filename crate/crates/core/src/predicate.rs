//! Boolean predicate analysis for Goldreich-type CSPs.
//!
//! Classification (balance, antisymmetry, low-order correlations) is exact.
//! The replica functional `Γ_ℓ` is evaluated either by direct summation over
//! replica tuples or through its expansion as a polynomial in the weights of
//! the measure; convexity is probed numerically and any violation found is
//! returned as a self-contained witness that can be re-checked, in floating
//! point or exactly over the rationals.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CspError, Result};
use crate::formula::{complement, Predicate};
use crate::sampler::{derive_seed, rng_from_seed, Seed};
use crate::scalar::Scalar;

/// Slack below which a convexity gap is not reported as a violation.
pub const WITNESS_TOLERANCE: f64 = 1e-9;

/// Largest arity accepted by the antisymmetric enumeration.
pub const MAX_SCAN_ARITY: usize = 5;

/// Cap on `(2^k)^ℓ`, the number of replica tuples a direct `Γ_ℓ` sum visits.
const MAX_REPLICA_TUPLES: u64 = 1 << 24;

pub fn is_balanced(chi: &Predicate) -> bool {
    chi.ones() == 1 << (chi.arity() - 1)
}

/// `χ(x̄) = 1 - χ(x)` for every input `x`.
pub fn is_antisymmetric(chi: &Predicate) -> bool {
    let k = chi.arity();
    (0..1u32 << k).all(|x| chi.eval(x) != chi.eval(complement(x, k)))
}

/// `2^-k Σ_x (-1)^(χ(x) ⊕ ⊕_{i∈s} x_i)`, where coordinate `i` is the
/// `i`-th variable of the edge (the `i`-th most significant bit).
pub fn correlation(chi: &Predicate, s: &[usize]) -> Result<Ratio<i64>> {
    let k = chi.arity();
    let distinct = s.iter().enumerate().all(|(a, i)| !s[..a].contains(i));
    if s.is_empty() || !distinct || s.iter().any(|&i| i >= k) {
        return Err(CspError::InvalidArgument(format!("{s:?} is not a nonempty subset of 0..{k}")));
    }
    let sum: i64 = (0..1u32 << k)
        .map(|x| {
            let bits = s.iter().fold(false, |acc, &i| acc ^ (x >> (k - 1 - i) & 1 == 1));
            if chi.eval(x) ^ bits {
                -1
            } else {
                1
            }
        })
        .sum();
    Ok(Ratio::new(sum, 1i64 << k))
}

fn all_single_correlations_vanish(chi: &Predicate) -> bool {
    (0..chi.arity()).all(|i| correlation(chi, &[i]).is_ok_and(|c| c.is_zero()))
}

fn all_pair_correlations_vanish(chi: &Predicate) -> bool {
    let k = chi.arity();
    (0..k).all(|i| (i + 1..k).all(|j| correlation(chi, &[i, j]).is_ok_and(|c| c.is_zero())))
}

/// Every antisymmetric predicate on `k` bits, in increasing order of the
/// choice word over the complement-pair representatives `x < 2^(k-1)`.
pub fn enumerate_antisymmetric(k: usize) -> Result<impl Iterator<Item = Predicate>> {
    if k == 0 {
        return Err(CspError::InvalidArgument("arity must be positive".into()));
    }
    if k > MAX_SCAN_ARITY {
        return Err(CspError::ResourceLimit(format!(
            "antisymmetric enumeration at k = {k} exceeds the k <= {MAX_SCAN_ARITY} limit"
        )));
    }
    let half = 1u32 << (k - 1);
    let count = 1u64 << half;
    Ok((0..count).map(move |choice| {
        Predicate::from_fn(k, |x| if x < half { choice >> x & 1 == 1 } else { choice >> complement(x, k) & 1 == 0 })
            .expect("k within range")
    }))
}

/// Probability measure on `ℓ`-bit tuples; weight `i` belongs to the tuple
/// whose first replica bit is the most significant bit of `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleMeasure<T> {
    ell: usize,
    weights: Vec<T>,
}

impl<T: Scalar> TupleMeasure<T> {
    pub fn new(ell: usize, weights: Vec<T>) -> Result<Self> {
        if ell == 0 || ell > 8 {
            return Err(CspError::InvalidArgument(format!("replica count {ell} outside 1..=8")));
        }
        if weights.len() != 1 << ell {
            return Err(CspError::Dimension { expected: 1 << ell, got: weights.len() });
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(CspError::InvalidArgument("negative weight".into()));
        }
        let total = weights.iter().cloned().fold(T::zero(), |a, b| a + b);
        if !total.near(&T::one(), 1e-12) {
            return Err(CspError::InvalidArgument(format!("weights sum to {total:?}, not 1")));
        }
        Ok(Self { ell, weights })
    }

    pub fn uniform(ell: usize) -> Self {
        let d = 1i64 << ell;
        Self { ell, weights: vec![T::from_ratio(1, d); d as usize] }
    }

    pub fn point_mass(ell: usize, tuple: usize) -> Result<Self> {
        let mut weights = vec![T::zero(); 1 << ell];
        *weights
            .get_mut(tuple)
            .ok_or_else(|| CspError::InvalidArgument(format!("tuple {tuple} outside 0..2^{ell}")))? = T::one();
        Self::new(ell, weights)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Same weights with the replicas reordered: replica `j` of the result
    /// is replica `perm[j]` of `self`.
    pub fn permute_replicas(&self, perm: &[usize]) -> Self {
        let ell = self.ell;
        let mut out = vec![T::zero(); self.weights.len()];
        for (t, w) in self.weights.iter().enumerate() {
            let bit = |j: usize| t >> (ell - 1 - j) & 1;
            let u = (0..ell).fold(0usize, |acc, j| (acc << 1) | bit(perm[j]));
            out[u] = w.clone();
        }
        Self { ell, weights: out }
    }
}

impl TupleMeasure<f64> {
    /// Uniform draw from the simplex by normalized exponentials.
    pub fn random<R: Rng + ?Sized>(ell: usize, rng: &mut R) -> Self {
        let raw: Vec<f64> = (0..1usize << ell).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = raw.iter().sum();
        Self { ell, weights: raw.into_iter().map(|w| w / total).collect() }
    }

    /// Exact rational copy, rescaled so the weights sum to exactly one.
    pub fn to_exact(&self) -> TupleMeasure<BigRational> {
        let raw: Vec<BigRational> =
            self.weights.iter().map(|&w| <BigRational as Scalar>::from_f64(w).expect("finite weight")).collect();
        let total = raw.iter().fold(BigRational::zero(), |a, b| a + b);
        TupleMeasure { ell: self.ell, weights: raw.into_iter().map(|w| w / &total).collect() }
    }

    fn from_raw(ell: usize, mut weights: Vec<f64>) -> Self {
        for w in &mut weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        Self { ell, weights: weights.into_iter().map(|w| w / total).collect() }
    }
}

/// `λ a + (1 - λ) b`, weight by weight.
pub fn mixture<T: Scalar>(a: &TupleMeasure<T>, b: &TupleMeasure<T>, lambda: &T) -> TupleMeasure<T> {
    let mu = T::one() - lambda.clone();
    TupleMeasure {
        ell: a.ell,
        weights: a
            .weights
            .iter()
            .zip(&b.weights)
            .map(|(x, y)| lambda.clone() * x.clone() + mu.clone() * y.clone())
            .collect(),
    }
}

fn check_replica_budget(k: usize, ell: usize) -> Result<()> {
    let tuples = (k as u64).checked_mul(ell as u64).filter(|&b| b < 63).map(|b| 1u64 << b);
    match tuples {
        Some(t) if t <= MAX_REPLICA_TUPLES => Ok(()),
        _ => Err(CspError::ResourceLimit(format!("Γ_ℓ with k = {k}, ℓ = {ell} visits more than 2^24 replica tuples"))),
    }
}

/// Calls `visit(rows)` once for every `ℓ`-tuple of inputs sharing one
/// predicate value, where `rows[i]` packs coordinate `i` of the `ℓ` replicas
/// (first replica most significant).
fn for_each_replica_tuple(chi: &Predicate, ell: usize, mut visit: impl FnMut(&[usize])) {
    fn descend(members: &[u32], k: usize, remaining: usize, rows: &mut [usize], visit: &mut dyn FnMut(&[usize])) {
        if remaining == 0 {
            visit(rows);
            return;
        }
        for &x in members {
            for (i, r) in rows.iter_mut().enumerate() {
                *r = (*r << 1) | (x >> (k - 1 - i) & 1) as usize;
            }
            descend(members, k, remaining - 1, rows, visit);
            for r in rows.iter_mut() {
                *r >>= 1;
            }
        }
    }

    let k = chi.arity();
    for value in [false, true] {
        let members: Vec<u32> = (0..1u32 << k).filter(|&x| chi.eval(x) == value).collect();
        let mut rows = vec![0usize; k];
        descend(&members, k, ell, &mut rows, &mut visit);
    }
}

/// `Γ_ℓ(ν) = ½ Σ_{χ(u¹)=…=χ(uˡ)} Π_i ν(u_i¹, …, u_iˡ)` by direct summation.
pub fn gamma_ell<T: Scalar>(chi: &Predicate, ell: usize, nu: &TupleMeasure<T>) -> Result<T> {
    if nu.ell != ell {
        return Err(CspError::InvalidArgument(format!("measure on {}-tuples passed for ℓ = {ell}", nu.ell)));
    }
    check_replica_budget(chi.arity(), ell)?;
    let mut total = T::zero();
    for_each_replica_tuple(chi, ell, |rows| {
        let term = rows.iter().fold(T::one(), |acc, &r| acc * nu.weights[r].clone());
        total = total.clone() + term;
    });
    Ok(total / T::from_ratio(2, 1))
}

/// `Γ_ℓ` expanded as a homogeneous degree-`k` polynomial in the `2^ℓ`
/// weights of `ν`.
#[derive(Clone, Debug)]
pub struct GammaPolynomial {
    ell: usize,
    k: usize,
    /// `(coefficient, [(weight index, exponent)])`; the overall factor ½ is
    /// applied in `eval`.
    terms: Vec<(u64, Vec<(usize, u32)>)>,
}

impl GammaPolynomial {
    pub fn new(chi: &Predicate, ell: usize) -> Result<Self> {
        if ell == 0 || ell > 8 {
            return Err(CspError::InvalidArgument(format!("replica count {ell} outside 1..=8")));
        }
        check_replica_budget(chi.arity(), ell)?;
        let dim = 1usize << ell;
        let mut coeffs: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        let mut exps = vec![0u8; dim];
        for_each_replica_tuple(chi, ell, |rows| {
            exps.iter_mut().for_each(|e| *e = 0);
            for &r in rows {
                exps[r] += 1;
            }
            *coeffs.entry(exps.clone()).or_insert(0) += 1;
        });
        let terms = coeffs
            .into_iter()
            .map(|(e, c)| {
                let factors = e.iter().enumerate().filter(|(_, &p)| p > 0).map(|(i, &p)| (i, u32::from(p))).collect();
                (c, factors)
            })
            .collect();
        Ok(Self { ell, k: chi.arity(), terms })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn dim(&self) -> usize {
        1 << self.ell
    }

    pub fn monomials(&self) -> usize {
        self.terms.len()
    }

    /// Evaluates at arbitrary weights (not required to be normalized).
    pub fn eval<T: Scalar>(&self, weights: &[T]) -> T {
        let mut powers: Vec<Vec<T>> = Vec::with_capacity(weights.len());
        for w in weights {
            let mut p = Vec::with_capacity(self.k + 1);
            p.push(T::one());
            for e in 1..=self.k {
                let next = p[e - 1].clone() * w.clone();
                p.push(next);
            }
            powers.push(p);
        }
        let mut total = T::zero();
        for (c, factors) in &self.terms {
            let mut term = T::from_ratio(*c as i64, 1);
            for &(i, e) in factors {
                term = term * powers[i][e as usize].clone();
            }
            total = total + term;
        }
        total / T::from_ratio(2, 1)
    }

    pub fn eval_f64(&self, weights: &[f64]) -> f64 {
        let stride = self.k + 1;
        let mut powers = vec![1.0f64; weights.len() * stride];
        for (i, &w) in weights.iter().enumerate() {
            for e in 1..=self.k {
                powers[i * stride + e] = powers[i * stride + e - 1] * w;
            }
        }
        let mut total = 0.0;
        for (c, factors) in &self.terms {
            let mut term = *c as f64;
            for &(i, e) in factors {
                term *= powers[i * stride + e as usize];
            }
            total += term;
        }
        total * 0.5
    }
}

/// Certified failure of midpoint-style convexity:
/// `Γ(λa + (1-λ)b) > λΓ(a) + (1-λ)Γ(b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityWitness {
    pub ell: usize,
    pub nu_a: TupleMeasure<f64>,
    pub nu_b: TupleMeasure<f64>,
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl ConvexityWitness {
    fn build(chi: &Predicate, ell: usize, a: TupleMeasure<f64>, b: TupleMeasure<f64>, lambda: f64) -> Result<Self> {
        let mid = mixture(&a, &b, &lambda);
        let lhs = gamma_ell(chi, ell, &mid)?;
        let rhs = lambda * gamma_ell(chi, ell, &a)? + (1.0 - lambda) * gamma_ell(chi, ell, &b)?;
        Ok(Self { ell, nu_a: a, nu_b: b, lambda, lhs, rhs, margin: lhs - rhs })
    }

    /// Re-evaluates `Γ_ℓ` at the three points by direct summation and checks
    /// both the recorded values (to 1e-10) and the margin (> 1e-9).
    pub fn verify(&self, chi: &Predicate) -> bool {
        let Ok(w) = Self::build(chi, self.ell, self.nu_a.clone(), self.nu_b.clone(), self.lambda) else {
            return false;
        };
        (w.lhs - self.lhs).abs() <= 1e-10
            && (w.rhs - self.rhs).abs() <= 1e-10
            && w.margin > WITNESS_TOLERANCE
            && self.lambda > 0.0
            && self.lambda < 1.0
    }

    /// Exact margin over the rationals, with each measure rescaled to total
    /// mass exactly one.
    pub fn exact_margin(&self, chi: &Predicate) -> Result<BigRational> {
        let poly = GammaPolynomial::new(chi, self.ell)?;
        let a = self.nu_a.to_exact();
        let b = self.nu_b.to_exact();
        let lambda = <BigRational as Scalar>::from_f64(self.lambda)
            .ok_or_else(|| CspError::InvalidArgument("non-finite lambda".into()))?;
        let mid = mixture(&a, &b, &lambda);
        let lhs = poly.eval(mid.weights());
        let rhs = lambda.clone() * poly.eval(a.weights()) + (BigRational::one() - lambda) * poly.eval(b.weights());
        Ok(lhs - rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub pairs: usize,
    pub hessian_points: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { pairs: 20_000, hessian_points: 200 }
    }
}

const LAMBDA_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// A near-violation worth refining over `λ`.
const NEAR_VIOLATION: f64 = -1e-3;

/// Searches for a convexity violation of `Γ_ℓ`: random simplex pairs at
/// `λ = ½` (refined over a `λ` grid when close), then finite-difference
/// Hessians at random interior points with the most negative curvature
/// direction promoted to an explicit pair. `None` means the budget ran out;
/// it is not evidence of convexity.
pub fn falsify_convexity(
    chi: &Predicate,
    ell: usize,
    budget: &SearchBudget,
    seed: Seed,
) -> Result<Option<ConvexityWitness>> {
    let poly = GammaPolynomial::new(chi, ell)?;
    let mut rng = rng_from_seed(seed);
    let gamma = |w: &[f64]| poly.eval_f64(w);

    for _ in 0..budget.pairs {
        let a = TupleMeasure::random(ell, &mut rng);
        let b = TupleMeasure::random(ell, &mut rng);
        let (ga, gb) = (gamma(&a.weights), gamma(&b.weights));
        let gap = |lambda: f64| gamma(&mixture(&a, &b, &lambda).weights) - (lambda * ga + (1.0 - lambda) * gb);
        let half = gap(0.5);
        if half < NEAR_VIOLATION {
            continue;
        }
        let (lambda, best) =
            LAMBDA_GRID.iter().map(|&l| (l, gap(l))).fold((0.5, half), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best > 2.0 * WITNESS_TOLERANCE {
            let w = ConvexityWitness::build(chi, ell, a, b, lambda)?;
            if w.verify(chi) {
                return Ok(Some(w));
            }
        }
    }

    for _ in 0..budget.hessian_points {
        let nu = TupleMeasure::random(ell, &mut rng);
        if let Some(w) = hessian_probe(chi, &poly, &nu)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// Finite-difference Hessian of `Γ` on the tangent space of the simplex at
/// `nu`; a negative eigenvalue becomes a symmetric pair around `nu`.
fn hessian_probe(chi: &Predicate, poly: &GammaPolynomial, nu: &TupleMeasure<f64>) -> Result<Option<ConvexityWitness>> {
    let dim = poly.dim();
    let m = dim - 1;
    let floor = nu.weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let h = (floor / 4.0).min(1e-3);
    if h.is_nan() || h <= 1e-7 {
        return Ok(None);
    }
    // basis e_j - e_last
    let shifted = |steps: &[(usize, f64)]| {
        let mut w = nu.weights.clone();
        for &(j, s) in steps {
            w[j] += s;
            w[m] -= s;
        }
        poly.eval_f64(&w)
    };
    let mut hess = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = (shifted(&[(i, h), (j, h)]) - shifted(&[(i, h), (j, -h)]) - shifted(&[(i, -h), (j, h)])
                + shifted(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(hess);
    let (idx, &lowest) =
        eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty spectrum");
    if lowest >= 0.0 {
        return Ok(None);
    }
    let v = eig.eigenvectors.column(idx);
    let mut dir = vec![0.0; dim];
    for j in 0..m {
        dir[j] += v[j];
        dir[m] -= v[j];
    }
    // largest step keeping both nu ± t dir non-negative
    let t_max = nu
        .weights
        .iter()
        .zip(&dir)
        .filter(|(_, d)| d.abs() > 0.0)
        .map(|(w, d)| w / d.abs())
        .fold(f64::INFINITY, f64::min);
    let mut t = 0.999 * t_max;
    for _ in 0..12 {
        let a = TupleMeasure::from_raw(nu.ell, nu.weights.iter().zip(&dir).map(|(w, d)| w + t * d).collect());
        let b = TupleMeasure::from_raw(nu.ell, nu.weights.iter().zip(&dir).map(|(w, d)| w - t * d).collect());
        let gap = poly.eval_f64(&mixture(&a, &b, &0.5).weights)
            - 0.5 * (poly.eval_f64(&a.weights) + poly.eval_f64(&b.weights));
        if gap > 2.0 * WITNESS_TOLERANCE {
            let w = ConvexityWitness::build(chi, nu.ell, a, b, 0.5)?;
            if w.verify(chi) {
                return Ok(Some(w));
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HypothesisStatus {
    Violated { ell: usize, witness: ConvexityWitness },
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivorReport {
    pub predicate: Predicate,
    #[serde(flatten)]
    pub status: HypothesisStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub k: usize,
    pub l_max: usize,
    pub seed: Seed,
    pub budget: SearchBudget,
    /// Antisymmetric candidates enumerated.
    pub total: usize,
    pub balanced: usize,
    pub no_single_correlation: usize,
    pub no_pair_correlation: usize,
    pub violated: usize,
    pub unresolved: usize,
    pub survivors: Vec<SurvivorReport>,
}

/// Per-candidate search seed, independent of scheduling.
fn candidate_seed(seed: Seed, chi: &Predicate, ell: usize) -> Seed {
    let table = chi.bits().unwrap_or(0);
    derive_seed(derive_seed(seed, table), ell as u64)
}

/// Runs the search for one predicate at `ℓ = 2..=l_max`, stopping at the
/// first violation.
pub fn check_hypothesis(chi: &Predicate, l_max: usize, budget: &SearchBudget, seed: Seed) -> Result<HypothesisStatus> {
    for ell in 2..=l_max {
        if let Some(witness) = falsify_convexity(chi, ell, budget, candidate_seed(seed, chi, ell))? {
            return Ok(HypothesisStatus::Violated { ell, witness });
        }
    }
    Ok(HypothesisStatus::Unresolved)
}

/// Enumerates antisymmetric predicates on `k` bits, filters by balance and
/// vanishing one- and two-bit correlations, and searches each survivor for a
/// convexity violation. Survivors are reported in enumeration order.
pub fn scan_predicates(k: usize, l_max: usize, budget: &SearchBudget, seed: Seed) -> Result<ScanReport> {
    let candidates: Vec<Predicate> = enumerate_antisymmetric(k)?.collect();
    let total = candidates.len();
    let balanced: Vec<Predicate> = candidates.into_iter().filter(is_balanced).collect();
    let n_balanced = balanced.len();
    let single: Vec<Predicate> = balanced.into_iter().filter(all_single_correlations_vanish).collect();
    let n_single = single.len();
    let pair: Vec<Predicate> = single.into_iter().filter(all_pair_correlations_vanish).collect();
    let n_pair = pair.len();

    let survivors = pair
        .into_par_iter()
        .map(|chi| {
            let status = check_hypothesis(&chi, l_max, budget, seed)?;
            Ok(SurvivorReport { predicate: chi, status })
        })
        .collect::<Result<Vec<_>>>()?;
    let violated = survivors.iter().filter(|s| matches!(s.status, HypothesisStatus::Violated { .. })).count();
    Ok(ScanReport {
        k,
        l_max,
        seed,
        budget: *budget,
        total,
        balanced: n_balanced,
        no_single_correlation: n_single,
        no_pair_correlation: n_pair,
        violated,
        unresolved: survivors.len() - violated,
        survivors,
    })
}
