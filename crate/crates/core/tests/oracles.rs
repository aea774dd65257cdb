//! Independent oracles: closed-form expectations checked against Monte-Carlo
//! means, naive enumeration checked against the counters, and hand-derived
//! values of the predicate functionals.

use csplab::counting::{count_components_with, count_exact, count_xorsat, CountConfig, PreimagePartition};
use csplab::experiments::{
    azuma_increment_check, estimate_psi, estimate_qn, psi_paths, qn_grid, variance_split, wilson_interval,
};
use csplab::formula::{Assignment, Family, Formula, Predicate};
use csplab::predicate::{correlation, gamma_ell, GammaPolynomial, TupleMeasure};
use csplab::sampler::{derive_seed, sample, CandidateSpace, ModelSpec, PlantMode, Scheme};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn naive_count(f: &Formula) -> u64 {
    (0..1u64 << f.n).filter(|&w| f.eval(&Assignment::from_word(f.n, w)).unwrap()).count() as u64
}

/// Edges on which an assignment at Hamming distance `d` from the plant
/// loses its eligible clauses, per family.
fn exposed_edges(family: Family, n: usize, k: usize, d: usize) -> f64 {
    match family {
        Family::Sat => binom(n, k) - binom(n - d, k),
        Family::Naesat => binom(n, k) - binom(n - d, k) - binom(d, k),
        Family::Xorsat => (1..=k).step_by(2).map(|j| binom(d, j) * binom(n - d, k - j)).sum(),
        Family::Gold => unreachable!(),
    }
}

/// `E[Z]` under the binomial planted model: an assignment at distance `d`
/// survives iff none of the eligible clauses it violates is drawn, and it
/// violates exactly one eligible clause on each exposed edge.
fn planted_mean_z(family: Family, n: usize, k: usize, alpha: f64) -> f64 {
    let p = CandidateSpace::new(family, n, k).unwrap().probability(alpha).unwrap();
    (0..=n).map(|d| binom(n, d) * (1.0 - p).powf(exposed_edges(family, n, k, d))).sum()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[test]
fn planted_mean_solution_count_matches_closed_form() {
    let (n, k, alpha) = (8, 3, 1.5);
    for family in [Family::Sat, Family::Naesat, Family::Xorsat] {
        let spec = ModelSpec::planted(family, n, k, alpha);
        let zs: Vec<f64> = (0..3000)
            .map(|i| count_exact(&sample(&spec, derive_seed(11, i)).unwrap()).unwrap().z.to_f64().unwrap())
            .collect();
        let (mean, se) = mean_and_se(&zs);
        let expect = planted_mean_z(family, n, k, alpha);
        assert!((mean - expect).abs() < 3.0 * se, "{family}: mean {mean} vs {expect} (se {se})");
    }
}

#[test]
fn unplanted_mean_solution_count_matches_closed_form() {
    let (n, k, alpha) = (8, 3, 1.0);
    let spec = ModelSpec::unplanted(Family::Sat, n, k, alpha);
    let p = CandidateSpace::new(Family::Sat, n, k).unwrap().probability(alpha).unwrap();
    let expect = 2f64.powi(n as i32) * (1.0 - p).powf(binom(n, k));
    let zs: Vec<f64> = (0..3000)
        .map(|i| count_exact(&sample(&spec, derive_seed(5, i)).unwrap()).unwrap().z.to_f64().unwrap())
        .collect();
    let (mean, se) = mean_and_se(&zs);
    assert!((mean - expect).abs() < 3.0 * se, "mean {mean} vs {expect} (se {se})");
}

#[test]
fn gold_parity_mean_count_matches_xor_form() {
    // parity Goldreich constraints are XOR constraints on ordered edges, each
    // unordered edge appearing k! times among the candidates
    let (n, k, alpha) = (8, 3, 1.0);
    let spec = ModelSpec::gold(n, Predicate::parity(k), alpha);
    let p = CandidateSpace::new(Family::Gold, n, k).unwrap().probability(alpha).unwrap();
    let expect: f64 = (0..=n).map(|d| binom(n, d) * (1.0 - p).powf(6.0 * exposed_edges(Family::Xorsat, n, k, d))).sum();
    let zs: Vec<f64> = (0..3000)
        .map(|i| count_exact(&sample(&spec, derive_seed(9, i)).unwrap()).unwrap().z.to_f64().unwrap())
        .collect();
    let (mean, se) = mean_and_se(&zs);
    assert!((mean - expect).abs() < 3.0 * se, "mean {mean} vs {expect} (se {se})");
}

#[test]
fn mean_clause_count_is_alpha_n() {
    let (n, alpha) = (12, 2.0);
    for family in [Family::Sat, Family::Naesat, Family::Xorsat] {
        let spec = ModelSpec::planted(family, n, 3, alpha);
        let ms: Vec<f64> = (0..2000).map(|i| sample(&spec, derive_seed(3, i)).unwrap().len() as f64).collect();
        let (mean, se) = mean_and_se(&ms);
        // the expected count is p times the eligible candidates, slightly
        // below alpha n because the plant rules some out
        let space = CandidateSpace::new(family, n, 3).unwrap();
        let expect = space.probability(alpha).unwrap() * space.eligible(true) as f64;
        assert!((mean - expect).abs() < 3.0 * se, "{family}: {mean} vs {expect}");
    }
}

#[test]
fn uniform_scheme_draws_exact_count() {
    let spec = ModelSpec::planted(Family::Sat, 10, 3, 2.5).with_scheme(Scheme::Uniform);
    for s in 0..50 {
        assert_eq!(sample(&spec, s).unwrap().len(), 25);
    }
}

#[test]
fn counters_agree_with_naive_enumeration() {
    for family in [Family::Sat, Family::Naesat, Family::Xorsat] {
        for s in 0..40 {
            let f = sample(&ModelSpec::unplanted(family, 10, 3, 1.5), s).unwrap();
            let z = BigUint::from(naive_count(&f));
            assert_eq!(count_exact(&f).unwrap().z, z);
            assert_eq!(count_components_with(&f, &CountConfig::default()).unwrap().z, z);
            if family == Family::Xorsat {
                assert_eq!(count_xorsat(&f).unwrap().z, z);
            }
        }
    }
    let spec = ModelSpec::gold(9, Predicate::from_hex("0x96", None).unwrap(), 1.0);
    for s in 0..20 {
        let f = sample(&spec, s).unwrap();
        assert_eq!(count_exact(&f).unwrap().z, BigUint::from(naive_count(&f)));
    }
}

#[test]
fn xorsat_psi_same_by_elimination_and_components() {
    // the component counter enumerates, so it needs a cap above the largest
    // component at this density
    let spec = ModelSpec::planted(Family::Xorsat, 50, 3, 0.4);
    for i in 0..20 {
        let f = sample(&spec, derive_seed(2, i)).unwrap();
        let by_rank = count_xorsat(&f).unwrap();
        let by_parts = count_components_with(&f, &CountConfig { cap: 32 }).unwrap();
        assert_eq!(by_rank.z, by_parts.z);
    }
    let a = estimate_psi(&spec, 20, 2, &CountConfig::default()).unwrap();
    assert!(a.estimate > 0.0 && a.estimate < 1.0);
}

#[test]
fn psi_paths_non_increasing_in_alpha() {
    let spec = ModelSpec::planted(Family::Sat, 16, 3, 2.0);
    for row in psi_paths(&spec, &[0.5, 1.0, 2.0], 30, 8, &CountConfig::default()).unwrap() {
        assert!(row.windows(2).all(|w| w[1] <= w[0]), "{row:?}");
    }
}

#[test]
fn qn_monotone_in_phi_and_alpha() {
    let spec = ModelSpec::planted(Family::Sat, 12, 3, 4.0);
    let alphas = [1.0, 2.0, 3.0, 4.0];
    let phis = [0.2, 0.4, 0.6, 0.8];
    let grid = qn_grid(&spec, &alphas, &phis, 60, 4, &CountConfig::default()).unwrap();
    for i in 0..alphas.len() {
        for j in 0..phis.len() {
            let q = grid[i * phis.len() + j].proportion;
            if j > 0 {
                assert!(q >= grid[i * phis.len() + j - 1].proportion);
            }
            if i > 0 {
                assert!(q >= grid[(i - 1) * phis.len() + j].proportion);
            }
        }
    }
    // independent draws at one density agree with the single-point estimator
    let q = estimate_qn(&spec.with_alpha(3.0), 0.4, 60, 4, &CountConfig::default()).unwrap();
    let (lo, hi) = wilson_interval(q.hits, q.samples);
    assert_eq!((q.ci_low, q.ci_high), (lo, hi));
    assert!(lo <= q.proportion && q.proportion <= hi);
}

#[test]
fn fixed_plant_has_no_within_variance() {
    let plant: Assignment = "0110100110".parse().unwrap();
    let spec = ModelSpec::planted(Family::Sat, 10, 3, 1.5).with_plant(PlantMode::Fixed(plant));
    let split = variance_split(&spec, 15, 4, 6, &CountConfig::default()).unwrap();
    assert_eq!(split.within, 0.0);
    assert!((split.total - split.between).abs() < 1e-12);
}

#[test]
fn gamma_values_by_hand() {
    let chi = Predicate::from_hex("0x96", None).unwrap();
    // diagonal measure: all replicas copy one column, so every column agrees
    let mut w = vec![0.0; 4];
    w[0] = 0.5;
    w[3] = 0.5;
    let diag = TupleMeasure::new(2, w).unwrap();
    let g: f64 = gamma_ell(&chi, 2, &diag).unwrap();
    assert!((g - 0.5).abs() < 1e-15);
    // independent uniform replicas of a balanced predicate agree with
    // probability 1/2
    let g: f64 = gamma_ell(&chi, 2, &TupleMeasure::uniform(2)).unwrap();
    assert!((g - 0.25).abs() < 1e-15);
    // exact rational evaluation of the polynomial form
    let poly = GammaPolynomial::new(&chi, 2).unwrap();
    let exact: BigRational = poly.eval(TupleMeasure::uniform(2).to_exact().weights());
    assert_eq!(exact, BigRational::new(1.into(), 4.into()));
    let ell1 = TupleMeasure::<f64>::uniform(1).to_exact();
    let g1: BigRational = gamma_ell(&Predicate::and(3), 1, &ell1).unwrap();
    assert_eq!(g1, BigRational::new(1.into(), 2.into()));
}

#[test]
fn parity_correlations() {
    let chi = Predicate::parity(3);
    for s in [vec![0], vec![1], vec![0, 2], vec![1, 2]] {
        assert!(correlation(&chi, &s).unwrap().is_zero());
    }
    assert_eq!(correlation(&chi, &[0, 1, 2]).unwrap().abs(), num_rational::Ratio::one());
}

#[test]
fn empty_graph_increment_is_one_bit() {
    // with no edges every input is alone in its class of size 2^n; one
    // balanced output bit halves every class
    let chi = Predicate::from_hex("0xe8", None).unwrap();
    let report = azuma_increment_check(8, &chi, 0.0, 10, 1).unwrap();
    for t in &report.trials {
        assert_eq!(t.edges, 0);
        assert_eq!(t.l_g, 8.0);
        assert_eq!(t.increment, 1.0);
    }
    let mut part = PreimagePartition::new(3).unwrap();
    assert_eq!(part.mean_log2_preimages(), 3.0);
    part.refine(&csplab::formula::Edge::new(vec![0, 1, 2]).unwrap(), &chi).unwrap();
    assert_eq!(part.mean_log2_preimages(), 2.0);
}
