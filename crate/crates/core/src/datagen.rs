//! Synthetic cubes, random cell removal and the missing-data robustness
//! sweep. Every generator draws from ChaCha8 seeded by the caller, so output
//! is identical across platforms for a given seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{AggregatorKind, Cube, CubeBuilder, Dimension};
use crate::error::{Error, Result};
use crate::kappa::kappa_binary;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGenSpec {
    pub shape: Vec<usize>,
    /// Exponent `a`; 1 is uniform, smaller values pile mass onto value 1.
    pub skew: f64,
    pub facts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub p_missing: f64,
    pub seed: u64,
}

fn numbered_dimension(name: String, n: usize) -> Dimension {
    let mut dim = Dimension::new(name);
    for v in 1..=n {
        dim.intern(&v.to_string());
    }
    dim
}

/// Draws tuples whose `i`-th component is `⌈n_i·u^(1/a)⌉` for `u` uniform on
/// `(0, 1]` until `facts` distinct tuples exist. Values are named `1..=n_i`,
/// dimensions `d0, d1, …`; every measure is 1.
pub fn gen_power_cube(spec: &PowerGenSpec) -> Result<Cube> {
    if !(spec.skew > 0.0 && spec.skew.is_finite()) {
        return Err(Error::Domain(format!("skew must be positive, got {}", spec.skew)));
    }
    let volume: f64 = spec.shape.iter().map(|&n| n as f64).product();
    if spec.facts as f64 > volume {
        return Err(Error::Infeasible(format!(
            "{} distinct facts requested from a volume of {volume}",
            spec.facts
        )));
    }
    let dims: Vec<Dimension> = spec
        .shape
        .iter()
        .enumerate()
        .map(|(i, &n)| numbered_dimension(format!("d{i}"), n))
        .collect();
    let mut builder = CubeBuilder::with_dimensions(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let inv = 1.0 / spec.skew;
    let mut ids = vec![0u32; spec.shape.len()];
    while builder.cell_count() < spec.facts {
        for (id, &n) in ids.iter_mut().zip(&spec.shape) {
            let u = 1.0 - rng.random::<f64>();
            let v = (n as f64 * u.powf(inv)).ceil().clamp(1.0, n as f64);
            *id = v as u32 - 1;
        }
        if !builder.contains_ids(&ids) {
            builder.add_ids(&ids, 1.0);
        }
    }
    Ok(builder.build())
}

/// An `n × n` COUNT cube with `2n` cells whose 2-carat diamond is the 2 × 2
/// block in the corner, and from which iterative pruning at `k = 2` removes
/// at most one row and one column per pass.
///
/// Two staircases leave the block: one starts at row 1 and runs through odd
/// rows and even columns, the other starts at column 1 and runs through even
/// rows and odd columns. Only the far end of each staircase is a count-1
/// slice. Cells are emitted in row-major order, so each pass reaches a
/// staircase's doomed end only after its predecessors have been written.
pub fn gen_adversarial_chain(n: usize) -> Result<Cube> {
    if n < 3 {
        return Err(Error::Domain(format!("chain needs n >= 3, got {n}")));
    }
    let mut cells: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
    for (mut r, mut c, row_next) in [(1, 2, true), (2, 1, false)] {
        let mut step_row = row_next;
        while r < n && c < n {
            cells.push((r, c));
            if step_row {
                r += 2;
            } else {
                c += 2;
            }
            step_row = !step_row;
        }
    }
    cells.sort_unstable();
    let mut builder = CubeBuilder::new(["row", "col"]);
    for (r, c) in cells {
        builder.add(&[r.to_string(), c.to_string()], 1.0)?;
    }
    Ok(builder.build())
}

/// All `2^d` cells of a `d`-dimensional cube with two values per dimension,
/// measure 1.
pub fn gen_full_binary_cube(d: usize) -> Result<Cube> {
    if !(1..=20).contains(&d) {
        return Err(Error::Domain(format!("full binary cube needs 1 <= d <= 20, got {d}")));
    }
    let dims: Vec<Dimension> = (0..d)
        .map(|i| {
            let mut dim = Dimension::new(format!("x{i}"));
            dim.intern("0");
            dim.intern("1");
            dim
        })
        .collect();
    let mut builder = CubeBuilder::with_dimensions(dims);
    let mut ids = vec![0u32; d];
    for bits in 0u32..(1 << d) {
        for (i, id) in ids.iter_mut().enumerate() {
            *id = (bits >> (d - 1 - i)) & 1;
        }
        builder.add_ids(&ids, 1.0);
    }
    Ok(builder.build())
}

/// Drops each cell independently with probability `p_missing`, keeping the
/// dictionaries.
pub fn perturb_missing(cube: &Cube, spec: &PerturbSpec) -> Result<Cube> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    perturb_with(cube, spec.p_missing, &mut rng)
}

fn perturb_with(cube: &Cube, p: f64, rng: &mut ChaCha8Rng) -> Result<Cube> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p_missing must lie in [0, 1], got {p}")));
    }
    Ok(cube.filter_cells(|_| !rng.random_bool(p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub kappa: f64,
    /// Trials per probability that produced this κ, in `probs` order.
    pub counts: Vec<usize>,
}

/// κ histogram per missing-cell probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub probs: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub base_kappa: f64,
    /// Ascending κ.
    pub rows: Vec<RobustnessRow>,
}

impl RobustnessTable {
    pub fn column_total(&self, col: usize) -> usize {
        self.rows.iter().map(|r| r.counts[col]).sum()
    }

    /// Most frequent κ in a column, the smaller on ties.
    pub fn modal_kappa(&self, col: usize) -> Option<f64> {
        let mut best: Option<(&RobustnessRow, usize)> = None;
        for r in &self.rows {
            let c = r.counts[col];
            if c > 0 && best.is_none_or(|(_, b)| c > b) {
                best = Some((r, c));
            }
        }
        best.map(|(r, _)| r.kappa)
    }

    /// Writes `kappa,p1,p2,…` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kappa");
        for p in &self.probs {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.kappa.to_string());
            for c in &r.counts {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs `trials` perturb-then-κ trials per probability. Trial `t` of
/// probability index `j` uses ChaCha8 seeded with `seed` on stream
/// `j·trials + t`, so each trial is reproducible on its own.
pub fn robustness_experiment(
    cube: &Cube,
    probs: &[f64],
    trials: usize,
    seed: u64,
    agg: AggregatorKind,
) -> Result<RobustnessTable> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("p_missing must lie in [0, 1], got {p}")));
    }
    let base_kappa = kappa_binary(cube, agg, None)?.kappa;
    let outcomes: Vec<Result<f64>> = par::map_range(probs.len() * trials, |job| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(job as u64);
        let perturbed = perturb_with(cube, probs[job / trials], &mut rng)?;
        Ok(kappa_binary(&perturbed, agg, None)?.kappa)
    });

    let mut hist: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (job, k) in outcomes.into_iter().enumerate() {
        let k = k?;
        hist.entry(k.to_bits()).or_insert_with(|| vec![0; probs.len()])[job / trials] += 1;
    }
    let mut rows: Vec<RobustnessRow> = hist
        .into_iter()
        .map(|(bits, counts)| RobustnessRow {
            kappa: f64::from_bits(bits),
            counts,
        })
        .collect();
    rows.sort_by(|a, b| a.kappa.total_cmp(&b.kappa));
    Ok(RobustnessTable {
        probs: probs.to_vec(),
        trials,
        seed,
        base_kappa,
        rows,
    })
}
