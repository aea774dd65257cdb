//! Acceptance suite. Each test checks one criterion and prints a single
//! `PASS` or `FAIL` line; run with `--nocapture` to see the summary.

use std::process::Command;
use std::time::Instant;

use csplab::counting::{count_auto, count_components, count_exact, count_xorsat, xorsat_system, CountConfig};
use csplab::experiments::{azuma_increment_check, estimate_psi, variance_split, CriticalKeys};
use csplab::formula::{eval_formula, relabel, zero_plant_transform, ClauseSemantics, Family, Formula, Predicate};
use csplab::predicate::{
    gamma_ell, is_balanced, mixture, scan_predicates, HypothesisStatus, SearchBudget, TupleMeasure, WITNESS_TOLERANCE,
};
use csplab::sampler::{coupled_chain, derive_seed, rng_from_seed, sample, ModelSpec};
use num_bigint::BigUint;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

fn criterion(id: u32, title: &str, check: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = check();
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => println!("criterion {id:>2} PASS {title} ({detail}; {secs:.1}s)"),
        Err(detail) => {
            println!("criterion {id:>2} FAIL {title} ({detail}; {secs:.1}s)");
            panic!("criterion {id} failed: {detail}");
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_balanced(k: usize, rng: &mut impl Rng) -> Predicate {
    let mut table = vec![false; 1 << k];
    table[..1 << (k - 1)].fill(true);
    table.shuffle(rng);
    Predicate::new(k, table).unwrap()
}

fn random_spec(family: Family, n: usize, alpha: f64, rng: &mut impl Rng) -> ModelSpec {
    match family {
        Family::Gold => ModelSpec::gold(n, random_balanced(3, rng), alpha),
        f => ModelSpec::planted(f, n, 3, alpha),
    }
}

const FAMILIES: [Family; 4] = [Family::Sat, Family::Naesat, Family::Xorsat, Family::Gold];

#[test]
fn criterion_01_planted_satisfaction() {
    criterion(1, "planted formulas are satisfied by their plant", || {
        let mut rng = rng_from_seed(101);
        let alphas = [0.5, 1.0, 2.0, 3.0];
        for i in 0..10_000u64 {
            let family = FAMILIES[(i % 4) as usize];
            let n = 8 + ((i / 4) % 13) as usize;
            let spec = random_spec(family, n, alphas[((i / 52) % 4) as usize], &mut rng);
            let f = sample(&spec, derive_seed(1, i)).map_err(|e| e.to_string())?;
            let plant = f.planted.clone().ok_or("missing plant")?;
            ensure(eval_formula(&f, &plant).unwrap(), || format!("sample {i} ({family}, n={n}) rejects its plant"))?;
            let z = count_auto(&f, &CountConfig::default()).map_err(|e| e.to_string())?.z;
            ensure(z >= BigUint::from(1u32), || format!("sample {i} has Z = 0"))?;
        }
        Ok("10000 samples".into())
    });
}

#[test]
fn criterion_02_counter_cross_check() {
    criterion(2, "brute force, component and GF(2) counters agree", || {
        let mut rng = rng_from_seed(202);
        for family in FAMILIES {
            for i in 0..500u64 {
                let n = rng.random_range(6..=18);
                let alpha = rng.random_range(0.2..3.0);
                let mut spec = random_spec(family, n, alpha, &mut rng);
                if family != Family::Gold && i % 2 == 1 {
                    spec = ModelSpec::unplanted(family, n, 3, alpha);
                }
                let f = sample(&spec, derive_seed(2, i)).map_err(|e| e.to_string())?;
                let brute = count_exact(&f).map_err(|e| e.to_string())?.z;
                let parts = count_components(&f).map_err(|e| e.to_string())?.z;
                ensure(brute == parts, || format!("{family} #{i}: brute {brute} vs components {parts}"))?;
                if family == Family::Xorsat {
                    let rank = count_xorsat(&f).map_err(|e| e.to_string())?.z;
                    ensure(brute == rank, || format!("xorsat #{i}: brute {brute} vs gf2 {rank}"))?;
                }
            }
        }
        Ok("2000 instances".into())
    });
}

/// Rank over GF(2) of rows packed into `u64`, by plain elimination.
fn gf2_rank_oracle(n: usize, rows: &[(u64, bool)]) -> (usize, bool) {
    let mut basis: Vec<(u64, bool)> = Vec::new();
    for &(mut r, mut b) in rows {
        for &(v, vb) in &basis {
            let pivot = 63 - v.leading_zeros();
            if r >> pivot & 1 == 1 {
                r ^= v;
                b ^= vb;
            }
        }
        if r == 0 {
            if b {
                return (basis.len(), false);
            }
            continue;
        }
        // keep the basis reduced so each pivot bit appears in one row
        let pivot = 63 - r.leading_zeros();
        for row in basis.iter_mut() {
            if row.0 >> pivot & 1 == 1 {
                row.0 ^= r;
                row.1 ^= b;
            }
        }
        basis.push((r, b));
    }
    assert!(n <= 64);
    (basis.len(), true)
}

#[test]
fn criterion_03_xorsat_rank_structure() {
    criterion(3, "XORSAT count equals 2^(n - rank)", || {
        let mut rng = rng_from_seed(303);
        for i in 0..500u64 {
            let n = if i % 2 == 0 { 30 } else { 50 };
            let alpha = rng.random_range(0.2..1.5);
            let f = sample(&ModelSpec::planted(Family::Xorsat, n, 3, alpha), derive_seed(3, i)).unwrap();
            let rows: Vec<(u64, bool)> = f
                .clauses
                .iter()
                .map(|c| {
                    let mask = c.edge.vars().iter().fold(0u64, |m, &v| m | 1 << v);
                    let ClauseSemantics::XorTarget { bit } = c.semantics else { unreachable!() };
                    (mask, bit)
                })
                .collect();
            let (rank, consistent) = gf2_rank_oracle(n, &rows);
            ensure(consistent, || format!("#{i}: planted system inconsistent"))?;
            let sys = xorsat_system(&f).unwrap();
            ensure(sys.consistent && sys.rank == rank, || format!("#{i}: rank {} vs oracle {rank}", sys.rank))?;
            let z = count_xorsat(&f).unwrap().z;
            ensure(z == BigUint::from(1u32) << (n - rank), || format!("#{i}: Z = {z}, rank {rank}"))?;
        }
        Ok("500 instances at n = 30, 50".into())
    });
}

#[test]
fn criterion_04_symmetry() {
    criterion(4, "count invariant under relabelling and plant shift", || {
        let mut rng = rng_from_seed(404);
        for i in 0..200u64 {
            let family = FAMILIES[(i % 4) as usize];
            let n = rng.random_range(6..=12);
            let spec = random_spec(family, n, rng.random_range(0.5..3.0), &mut rng);
            let f = sample(&spec, derive_seed(4, i)).unwrap();
            let z = count_exact(&f).unwrap().z;
            let mut perm: Vec<u32> = (0..n as u32).collect();
            perm.shuffle(&mut rng);
            let g = relabel(&f, &perm).unwrap();
            ensure(count_exact(&g).unwrap().z == z, || format!("#{i} {family}: relabel changed Z"))?;
            if family != Family::Gold {
                let h = zero_plant_transform(&f).unwrap();
                ensure(count_exact(&h).unwrap().z == z, || format!("#{i} {family}: plant shift changed Z"))?;
            }
        }
        Ok("200 instances".into())
    });
}

#[test]
fn criterion_05_coupled_monotonicity() {
    criterion(5, "coupled formulas nested with non-increasing count", || {
        let alphas = [0.25, 0.5, 1.0, 2.0, 4.0];
        let mut rng = rng_from_seed(505);
        for family in FAMILIES {
            for seed in 0..100u64 {
                let spec = random_spec(family, 12, 4.0, &mut rng);
                let chain: Vec<Formula> = coupled_chain(&spec, &alphas, seed).unwrap();
                let mut prev: Option<(usize, BigUint)> = None;
                for (j, f) in chain.iter().enumerate() {
                    let z = count_exact(f).unwrap().z;
                    if let Some((pj, pz)) = &prev {
                        let earlier = &chain[*pj];
                        ensure(earlier.clauses.iter().all(|c| f.clauses.contains(c)), || {
                            format!("{family} seed {seed}: alpha {} not nested in {}", alphas[*pj], alphas[j])
                        })?;
                        ensure(z <= *pz, || format!("{family} seed {seed}: Z rose at alpha {}", alphas[j]))?;
                    }
                    prev = Some((j, z));
                }
            }
        }
        Ok("100 seeds x 4 families".into())
    });
}

#[test]
fn criterion_06_gamma_identities() {
    criterion(6, "single-replica and uniform two-replica values", || {
        let mut rng = rng_from_seed(606);
        for p in 0..20 {
            let k = rng.random_range(2..=5);
            let table = (0..1 << k).map(|_| rng.random::<bool>()).collect();
            let chi = Predicate::new(k, table).unwrap();
            for _ in 0..1000 {
                let nu = TupleMeasure::random(1, &mut rng);
                let g: f64 = gamma_ell(&chi, 1, &nu).unwrap();
                ensure((g - 0.5).abs() <= 1e-12, || format!("predicate {p}: single-replica value {g}"))?;
            }
        }
        let mut balanced = 0;
        for k in 1..=4usize {
            let uniform = TupleMeasure::<f64>::uniform(2);
            for bits in 0..1u64 << (1 << k) {
                let chi = Predicate::from_bits(k, bits).unwrap();
                if !is_balanced(&chi) {
                    continue;
                }
                balanced += 1;
                let g: f64 = gamma_ell(&chi, 2, &uniform).unwrap();
                ensure((g - 0.25).abs() <= 1e-12, || format!("{}: uniform two-replica value {g}", chi.to_hex()))?;
            }
        }
        Ok(format!("20000 measures; {balanced} balanced predicates"))
    });
}

/// Re-evaluates a witness from its measures with the direct sum.
fn recheck(chi: &Predicate, w: &csplab::predicate::ConvexityWitness) -> Result<f64, String> {
    let lambda = w.lambda;
    let mix = mixture(&w.nu_a, &w.nu_b, &lambda);
    let at = |nu: &TupleMeasure<f64>| gamma_ell::<f64>(chi, w.ell, nu).map_err(|e| e.to_string());
    let rhs = lambda * at(&w.nu_a)? + (1.0 - lambda) * at(&w.nu_b)?;
    Ok(at(&mix)? - rhs)
}

#[test]
fn criterion_07_witness_soundness() {
    criterion(7, "every witness in a k <= 4 scan re-verifies", || {
        let mut witnesses = 0;
        let threshold = BigRational::new(1.into(), 1_000_000_000.into());
        for k in 2..=4 {
            let report = scan_predicates(k, 3, &SearchBudget::default(), 7).map_err(|e| e.to_string())?;
            for s in &report.survivors {
                if let HypothesisStatus::Violated { witness, .. } = &s.status {
                    witnesses += 1;
                    let margin = recheck(&s.predicate, witness)?;
                    ensure(margin > WITNESS_TOLERANCE, || format!("{}: margin {margin}", s.predicate.to_hex()))?;
                    ensure(witness.verify(&s.predicate), || format!("{}: verify failed", s.predicate.to_hex()))?;
                    let exact = witness.exact_margin(&s.predicate).map_err(|e| e.to_string())?;
                    ensure(exact > threshold, || format!("{}: exact margin {exact}", s.predicate.to_hex()))?;
                }
            }
        }
        Ok(format!("{witnesses} witnesses"))
    });
}

#[test]
fn criterion_08_no_unresolved_antisymmetric_predicates() {
    criterion(8, "antisymmetric k <= 5 survivors all violate convexity", || {
        let mut summary = Vec::new();
        for k in 2..=5 {
            let report = scan_predicates(k, 3, &SearchBudget::default(), 1).map_err(|e| e.to_string())?;
            let unresolved: Vec<String> = report
                .survivors
                .iter()
                .filter(|s| s.status == HypothesisStatus::Unresolved)
                .map(|s| s.predicate.to_hex())
                .collect();
            ensure(unresolved.is_empty(), || format!("k = {k}: unresolved {unresolved:?}"))?;
            summary.push(format!("k={k}: {} survivors, {} violated", report.survivors.len(), report.violated));
        }
        Ok(summary.join(", "))
    });
}

#[test]
fn criterion_09_increment_bound() {
    criterion(9, "per-edge increments lie in [0, 1] bits", || {
        let mut rng = rng_from_seed(909);
        let mut predicates = vec![Predicate::parity(3)];
        predicates.extend((0..3).map(|_| random_balanced(3, &mut rng)));
        let mut extremes = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, chi) in predicates.iter().enumerate() {
            let r = azuma_increment_check(10, chi, 1.0, 200, derive_seed(9, i as u64)).map_err(|e| e.to_string())?;
            ensure(r.violations.is_empty(), || format!("{}: violations at {:?}", chi.to_hex(), r.violations))?;
            ensure(r.min >= 0.0 && r.max <= 1.0, || format!("{}: range [{}, {}]", chi.to_hex(), r.min, r.max))?;
            for t in &r.trials {
                ensure((t.increment - t.difference).abs() < 1e-9, || "difference form disagrees".into())?;
            }
            extremes = (extremes.0.min(r.min), extremes.1.max(r.max));
        }
        Ok(format!("4 predicates x 200 trials, range [{:.4}, {:.4}]", extremes.0, extremes.1))
    });
}

#[test]
fn criterion_10_window_narrows() {
    criterion(10, "transition window narrower at n = 20 than at n = 12", || {
        let cfg = CountConfig::default();
        let width = |n| {
            let spec = ModelSpec::planted(Family::Sat, n, 3, 8.0);
            CriticalKeys::new(&spec, 0.5, 8.0, 200, 0, &cfg)?.window((0.1, 0.9), 0.01).map(|w| w.width)
        };
        let w12 = width(12).map_err(|e| e.to_string())?;
        let w20 = width(20).map_err(|e| e.to_string())?;
        ensure(w20 < w12, || format!("width {w20} at n = 20 vs {w12} at n = 12"))?;
        Ok(format!("width {w12:.4} -> {w20:.4}"))
    });
}

#[test]
fn criterion_11_concentration_trend() {
    criterion(11, "log-count variance falls with n; variance split adds up", || {
        let cfg = CountConfig::default();
        let vars: Vec<f64> = [12, 16, 20]
            .iter()
            .map(|&n| estimate_psi(&ModelSpec::planted(Family::Sat, n, 3, 1.0), 200, 0, &cfg).unwrap().variance)
            .collect();
        ensure(vars[0] > vars[1] && vars[1] > vars[2], || format!("variances {vars:?}"))?;
        let split = variance_split(&ModelSpec::planted(Family::Sat, 12, 3, 1.0), 40, 5, 0, &cfg).unwrap();
        let gap = (split.total - split.between - split.within).abs();
        ensure(gap <= 1e-10, || format!("total - between - within = {gap}"))?;
        Ok(format!("variances {:.3e} > {:.3e} > {:.3e}; split gap {gap:.1e}", vars[0], vars[1], vars[2]))
    });
}

#[test]
fn criterion_12_cli_determinism() {
    criterion(12, "every subcommand is byte-reproducible across --jobs", || {
        let runs: [&[&str]; 10] = [
            &["sample", "--family", "naesat", "--n", "12", "--alpha", "2", "--seed", "5"],
            &["count", "--family", "sat", "--n", "10", "--k", "3", "--alpha", "1", "--seed", "7"],
            &["export", "--family", "xorsat", "--n", "12", "--alpha", "1", "--xor-dialect"],
            &["psi-curve", "--family", "sat", "--n", "10,12", "--alphas", "0.5,1,2", "--samples", "40"],
            &[
                "qn-curve",
                "--family",
                "naesat",
                "--n",
                "10",
                "--alphas",
                "1,2,3",
                "--phi",
                "0.3,0.6",
                "--samples",
                "40",
            ],
            &["threshold", "--family", "sat", "--n", "10", "--phi", "0.5", "--samples", "40", "--window"],
            &["azuma-check", "--n", "9", "--predicate", "0xe8", "--trials", "30"],
            &[
                "variance-split",
                "--family",
                "sat",
                "--n",
                "10",
                "--alpha",
                "1",
                "--graph-samples",
                "10",
                "--plant-samples",
                "4",
            ],
            &["predicate-scan", "--k", "4", "--seed", "3"],
            &["hypothesis-h", "--predicate", "0x6996", "--seed", "2"],
        ];
        for args in runs {
            let run = |jobs: &str| {
                let mut full: Vec<&str> = args.to_vec();
                full.extend(["--jobs", jobs]);
                Command::new(env!("CARGO_BIN_EXE_csplab")).args(&full).output().unwrap()
            };
            let (a, b, c) = (run("1"), run("1"), run("4"));
            ensure(a.status.success(), || format!("{}: {}", args[0], String::from_utf8_lossy(&a.stderr)))?;
            ensure(!a.stdout.is_empty(), || format!("{}: no output", args[0]))?;
            ensure(a.stdout == b.stdout, || format!("{}: rerun differs", args[0]))?;
            ensure(a.stdout == c.stdout, || format!("{}: --jobs 4 differs", args[0]))?;
        }
        Ok("10 subcommands".into())
    });
}
