mod common;

use diamond_core::datagen::{gen_power_cube, perturb_missing, PerturbSpec, PowerGenSpec};
use diamond_core::dcld::{dcld_diamond_heuristic, dcld_local_search, ShapeLimit};
use diamond_core::oracle::{brute_force_dcld, OracleBudget};
use diamond_core::{AggregatorKind, Cube};

/// Upper 0.1% point of χ² with 9 degrees of freedom.
const CHI2_9_999: f64 = 27.877;

fn spec(skew: f64, seed: u64) -> PowerGenSpec {
    PowerGenSpec {
        shape: vec![10, 1000, 1000],
        skew,
        facts: 20_000,
        seed,
    }
}

/// χ² of the first dimension's value counts against `⌈10·u^(1/a)⌉`.
fn first_dim_chi2(cube: &Cube, skew: f64) -> f64 {
    let mut observed = [0f64; 10];
    for cell in cube.cells() {
        observed[cell.coords[0] as usize] += 1.0;
    }
    let n = cube.cell_count() as f64;
    (1..=10)
        .map(|j| {
            let p = (j as f64 / 10.0).powf(skew) - ((j - 1) as f64 / 10.0).powf(skew);
            let e = n * p;
            (observed[j - 1] - e).powi(2) / e
        })
        .sum()
}

#[test]
fn uniform_power_cube_passes_chi_square() {
    let c = gen_power_cube(&spec(1.0, 11)).unwrap();
    assert_eq!(c.cell_count(), 20_000);
    let chi2 = first_dim_chi2(&c, 1.0);
    assert!(chi2 < CHI2_9_999, "chi2 = {chi2}");
}

#[test]
fn skewed_power_cube_follows_its_law() {
    // Wide companion dimensions keep distinct-tuple rejection from bending
    // the first marginal.
    let c = gen_power_cube(&PowerGenSpec {
        shape: vec![10, 100_000, 100_000],
        skew: 0.3,
        facts: 5000,
        seed: 12,
    })
    .unwrap();
    let chi2 = first_dim_chi2(&c, 0.3);
    assert!(chi2 < CHI2_9_999, "chi2 = {chi2}");
    // The same counts are far from uniform.
    assert!(first_dim_chi2(&c, 1.0) > 10.0 * CHI2_9_999);
}

#[test]
fn power_cube_values_stay_in_range() {
    let c = gen_power_cube(&PowerGenSpec {
        shape: vec![3, 7],
        skew: 0.2,
        facts: 21,
        seed: 5,
    })
    .unwrap();
    // Every tuple is drawn, so the cube is full.
    assert_eq!(c.cell_count(), 21);
    assert_eq!(c.shape(), vec![3, 7]);
    assert!(c.cells().all(|cell| cell.measure == 1.0));
    assert!(gen_power_cube(&PowerGenSpec {
        shape: vec![3, 7],
        skew: 0.2,
        facts: 22,
        seed: 5,
    })
    .is_err());
}

#[test]
fn generation_is_deterministic_per_seed() {
    let a = gen_power_cube(&spec(0.5, 3)).unwrap();
    let b = gen_power_cube(&spec(0.5, 3)).unwrap();
    let c = gen_power_cube(&spec(0.5, 4)).unwrap();
    assert_eq!(a.coords_flat(), b.coords_flat());
    assert!(a.same_cells(&b));
    assert!(!a.same_cells(&c));
}

#[test]
fn perturbation_keeps_a_binomial_share() {
    let c = gen_power_cube(&spec(1.0, 21)).unwrap();
    let n = c.cell_count() as f64;
    for (p, seed) in [(0.01, 1), (0.05, 2), (0.3, 3)] {
        let out = perturb_missing(&c, &PerturbSpec { p_missing: p, seed }).unwrap();
        assert!(c.contains(&out));
        let kept = out.cell_count() as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((kept - n * (1.0 - p)).abs() <= 4.0 * sd, "p = {p}: kept {kept} of {n}");
        let again = perturb_missing(&c, &PerturbSpec { p_missing: p, seed }).unwrap();
        assert!(out.same_cells(&again));
    }
    assert!(perturb_missing(&c, &PerturbSpec { p_missing: 0.0, seed: 0 }).unwrap().same_cells(&c));
    assert!(perturb_missing(&c, &PerturbSpec { p_missing: 1.0, seed: 0 }).unwrap().is_empty());
}

#[test]
fn dcld_heuristics_usually_reach_the_optimum() {
    let limit = ShapeLimit::uniform(2, 3).unwrap();
    let budget = OracleBudget::default();
    let seeds = 40u64;
    let (mut local_hits, mut diamond_hits) = (0, 0);
    for seed in 0..seeds {
        let c = common::random_cube(&[8, 8], 0.45, 1, 500 + seed);
        let best = brute_force_dcld(&c, &limit, AggregatorKind::Count, &budget).unwrap();
        let local = dcld_local_search(&c, &limit, AggregatorKind::Count).unwrap();
        let seeded = dcld_diamond_heuristic(&c, &limit, AggregatorKind::Count).unwrap();
        assert!(local.objective <= best.objective + 1e-12);
        assert!(seeded.objective <= best.objective + 1e-12);
        local_hits += usize::from((local.objective - best.objective).abs() < 1e-12);
        diamond_hits += usize::from((seeded.objective - best.objective).abs() < 1e-12);
    }
    assert!(2 * local_hits > seeds as usize, "local search optimal on {local_hits}/{seeds}");
    assert!(diamond_hits > 0, "diamond heuristic optimal on {diamond_hits}/{seeds}");
}
