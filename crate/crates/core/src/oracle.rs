//! Exhaustive reference answers for tiny cubes.

use serde::{Deserialize, Serialize};

use crate::cube::{AggregatorKind, Cube};
use crate::dcld::{DcldResult, ShapeLimit, WorkCounters};
use crate::dice::{verify_carats, CaratVector};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBudget {
    /// Largest observed volume `Π n_i` the diamond oracle accepts.
    pub max_volume: f64,
    /// Largest `Σ n_i`; the diamond oracle visits `2^(Σ n_i)` selections.
    pub max_attributes: usize,
    /// Largest `Π C(n_i, p_i)` the DCLD oracle accepts.
    pub max_selections: f64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_volume: 128.0,
            max_attributes: 20,
            max_selections: 1e6,
        }
    }
}

/// Outcome of the diamond oracle when non-monotone measures are allowed.
#[derive(Debug, Clone)]
pub enum OracleDiamond {
    Unique(Cube),
    /// The union of all qualifying subcubes does not qualify; these are the
    /// maximal qualifying subcubes.
    NonUnique(Vec<Cube>),
}

/// The unique diamond, found by trying every per-dimension subset of
/// observed values and taking the union of those that meet the carats.
pub fn brute_force_diamond(cube: &Cube, carats: &CaratVector, agg: AggregatorKind, budget: &OracleBudget) -> Result<Cube> {
    if agg == AggregatorKind::Sum && cube.has_negative_measure() {
        return Err(Error::NegativeMeasure);
    }
    match brute_force_maximal(cube, carats, agg, budget)? {
        OracleDiamond::Unique(c) => Ok(c),
        OracleDiamond::NonUnique(_) => unreachable!("monotone aggregators give a unique diamond"),
    }
}

struct Bits {
    /// Dimension of each bit.
    dim_of: Vec<usize>,
    /// Id of each bit.
    id_of: Vec<u32>,
    /// Bits set by each cell (one per dimension).
    cell_masks: Vec<u64>,
}

impl Bits {
    fn new(cube: &Cube) -> Self {
        let mut bit_of: Vec<Vec<Option<u32>>> = cube.dims().iter().map(|dim| vec![None; dim.len()]).collect();
        let mut dim_of = Vec::new();
        let mut id_of = Vec::new();
        for (i, ids) in cube.retained_sets().into_iter().enumerate() {
            for id in ids {
                bit_of[i][id as usize] = Some(dim_of.len() as u32);
                dim_of.push(i);
                id_of.push(id);
            }
        }
        let cell_masks = cube
            .cells()
            .map(|cell| {
                cell.coords
                    .iter()
                    .enumerate()
                    .map(|(i, &id)| 1u64 << bit_of[i][id as usize].unwrap())
                    .fold(0, |a, b| a | b)
            })
            .collect();
        Self {
            dim_of,
            id_of,
            cell_masks,
        }
    }

    /// Observed attributes of the restriction to `mask`, if it meets the
    /// thresholds.
    fn qualifying(&self, mask: u64, weights: &[f64], k: &[f64], totals: &mut [f64]) -> Option<u64> {
        totals.iter_mut().for_each(|t| *t = 0.0);
        let mut observed = 0u64;
        for (&cm, &w) in self.cell_masks.iter().zip(weights) {
            if cm & !mask == 0 {
                observed |= cm;
                let mut bits = cm;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    totals[b] += w;
                    bits &= bits - 1;
                }
            }
        }
        let mut bits = observed;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            if totals[b] < k[self.dim_of[b]] {
                return None;
            }
            bits &= bits - 1;
        }
        Some(observed)
    }

    fn restrict(&self, cube: &Cube, mask: u64) -> Cube {
        let mut keep: Vec<Vec<u32>> = vec![Vec::new(); cube.dim_count()];
        for b in 0..self.dim_of.len() {
            if mask >> b & 1 == 1 {
                keep[self.dim_of[b]].push(self.id_of[b]);
            }
        }
        cube.restrict(&keep)
    }
}

fn check_diamond_budget(cube: &Cube, budget: &OracleBudget) -> Result<()> {
    let stats = cube.stats();
    if stats.volume > budget.max_volume {
        return Err(Error::BudgetExceeded {
            what: "oracle volume",
            required: stats.volume,
            limit: budget.max_volume,
        });
    }
    let attrs: usize = stats.shape.iter().sum();
    if attrs > budget.max_attributes.min(63) {
        return Err(Error::BudgetExceeded {
            what: "oracle attribute count",
            required: attrs as f64,
            limit: budget.max_attributes.min(63) as f64,
        });
    }
    Ok(())
}

/// Like [`brute_force_diamond`] but accepts negative SUM measures, in which
/// case the maximal qualifying subcubes need not be unique.
pub fn brute_force_maximal(
    cube: &Cube,
    carats: &CaratVector,
    agg: AggregatorKind,
    budget: &OracleBudget,
) -> Result<OracleDiamond> {
    if carats.len() != cube.dim_count() {
        return Err(Error::DimensionMismatch {
            expected: cube.dim_count(),
            got: carats.len(),
        });
    }
    check_diamond_budget(cube, budget)?;
    let bits = Bits::new(cube);
    let n = bits.dim_of.len();
    let weights: Vec<f64> = cube.measures().iter().map(|&m| agg.weight(m)).collect();
    let k = carats.as_slice();
    let total = 1usize << n;

    let union = par::fold_chunks(
        total,
        1 << 12,
        || 0u64,
        |acc, range| {
            let mut totals = vec![0.0; n];
            range.fold(acc, |acc, mask| {
                acc | bits.qualifying(mask as u64, &weights, k, &mut totals).unwrap_or(0)
            })
        },
        |a, b| a | b,
    );
    let candidate = bits.restrict(cube, union);
    if verify_carats(&candidate, carats, agg)? {
        return Ok(OracleDiamond::Unique(candidate));
    }

    let mut witnesses: Vec<u64> = par::fold_chunks(
        total,
        1 << 12,
        Vec::new,
        |mut acc, range| {
            let mut totals = vec![0.0; n];
            for mask in range {
                if let Some(obs) = bits.qualifying(mask as u64, &weights, k, &mut totals) {
                    if obs != 0 {
                        acc.push(obs);
                    }
                }
            }
            acc
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    );
    witnesses.sort_unstable();
    witnesses.dedup();
    let maximal: Vec<Cube> = witnesses
        .iter()
        .filter(|&&w| !witnesses.iter().any(|&o| o != w && o & w == w))
        .map(|&w| bits.restrict(cube, w))
        .collect();
    Ok(OracleDiamond::NonUnique(maximal))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Next `k`-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        if k == 0 || !next_combination(&mut c, n) {
            return out;
        }
    }
}

/// Best selection of exactly `min(n_i, p_i)` observed values per dimension,
/// by exhaustive search. Ties go to the lexicographically smallest
/// selection.
pub fn brute_force_dcld(cube: &Cube, limit: &ShapeLimit, agg: AggregatorKind, budget: &OracleBudget) -> Result<DcldResult> {
    let targets = limit.targets(cube)?;
    let observed = cube.retained_sets();
    let required: f64 = observed
        .iter()
        .zip(&targets)
        .map(|(ids, &t)| binomial(ids.len(), t))
        .product();
    if required > budget.max_selections {
        return Err(Error::BudgetExceeded {
            what: "oracle selections",
            required,
            limit: budget.max_selections,
        });
    }
    let d = cube.dim_count();
    let combos: Vec<Vec<Vec<usize>>> = observed
        .iter()
        .zip(&targets)
        .map(|(ids, &t)| combinations(ids.len(), t))
        .collect();
    // Position of each id within its dimension's observed list.
    let pos: Vec<Vec<usize>> = cube
        .dims()
        .iter()
        .zip(&observed)
        .map(|(dim, ids)| {
            let mut p = vec![usize::MAX; dim.len()];
            for (j, &id) in ids.iter().enumerate() {
                p[id as usize] = j;
            }
            p
        })
        .collect();
    let cells: Vec<(Vec<usize>, f64)> = cube
        .cells()
        .map(|c| {
            let at: Vec<usize> = c.coords.iter().enumerate().map(|(i, &id)| pos[i][id as usize]).collect();
            (at, agg.weight(c.measure))
        })
        .collect();

    let total = combos.iter().map(Vec::len).product::<usize>();
    let radix: Vec<usize> = combos.iter().map(Vec::len).collect();
    let decode = |mut index: usize, out: &mut [usize]| {
        for i in (0..d).rev() {
            out[i] = index % radix[i];
            index /= radix[i];
        }
    };
    let best = par::fold_chunks(
        total,
        1 << 10,
        || None::<(f64, usize)>,
        |mut best, range| {
            let mut digits = vec![0usize; d];
            let mut member: Vec<Vec<bool>> = observed.iter().map(|ids| vec![false; ids.len()]).collect();
            for index in range {
                decode(index, &mut digits);
                for i in 0..d {
                    member[i].iter_mut().for_each(|m| *m = false);
                    for &j in &combos[i][digits[i]] {
                        member[i][j] = true;
                    }
                }
                let score: f64 = cells
                    .iter()
                    .filter(|(at, _)| at.iter().enumerate().all(|(i, &j)| member[i][j]))
                    .map(|(_, w)| w)
                    .sum();
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, index));
                }
            }
            best
        },
        |a, b| match (a, b) {
            (Some(x), Some(y)) => Some(if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        },
    );

    let mut digits = vec![0usize; d];
    decode(best.map_or(0, |(_, i)| i), &mut digits);
    let selection: Vec<Vec<u32>> = (0..d)
        .map(|i| {
            if total == 0 {
                return Vec::new();
            }
            combos[i][digits[i]].iter().map(|&j| observed[i][j]).collect()
        })
        .collect();
    Ok(DcldResult::from_selection(cube, selection, agg, WorkCounters::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dice::dice;
    use crate::fixtures::{checkerboard, checkerboard_parity, density_counterexample, quadrant, sales_cube};

    #[test]
    fn sales_diamond_matches_dice() {
        let c = sales_cube();
        let k = CaratVector::new(vec![4.0, 10.0]).unwrap();
        let o = brute_force_diamond(&c, &k, AggregatorKind::Sum, &OracleBudget::default()).unwrap();
        let r = dice(&c, &k, AggregatorKind::Sum).unwrap();
        assert!(o.same_cells(&r.diamond));
        assert_eq!(o.cell_count(), 9);
    }

    #[test]
    fn zero_carats_whole_cube() {
        let c = sales_cube();
        let o = brute_force_diamond(&c, &CaratVector::uniform(2, 0.0), AggregatorKind::Count, &OracleBudget::default())
            .unwrap();
        assert!(o.same_cells(&c));
    }

    #[test]
    fn checkerboard_is_not_unique() {
        let c = checkerboard();
        let k = CaratVector::uniform(2, 2.0);
        match brute_force_maximal(&c, &k, AggregatorKind::Sum, &OracleBudget::default()).unwrap() {
            OracleDiamond::NonUnique(w) => {
                assert_eq!(w.len(), 2);
                assert!(w.iter().any(|x| x.same_cells(&checkerboard_parity(&c, 0))));
                assert!(w.iter().any(|x| x.same_cells(&checkerboard_parity(&c, 1))));
            }
            OracleDiamond::Unique(_) => panic!("expected several maximal cubes"),
        }
        assert!(matches!(
            brute_force_diamond(&c, &k, AggregatorKind::Sum, &OracleBudget::default()),
            Err(Error::NegativeMeasure)
        ));
    }

    #[test]
    fn budget_refuses_large_cubes() {
        let c = density_counterexample();
        let tight = OracleBudget {
            max_volume: 50.0,
            ..Default::default()
        };
        let err = brute_force_diamond(&c, &CaratVector::uniform(2, 1.0), AggregatorKind::Count, &tight);
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn counterexample_dcld_optimum() {
        let c = density_counterexample();
        let r = brute_force_dcld(&c, &ShapeLimit::uniform(2, 5).unwrap(), AggregatorKind::Count, &OracleBudget::default())
            .unwrap();
        assert_eq!(r.cells, 16);
        assert!(r.subcube.same_cells(&quadrant(&c, true)));
    }

    #[test]
    fn dense_square_any_pair() {
        let mut b = crate::cube::CubeBuilder::new(["a", "b"]);
        for i in 0..3 {
            for j in 0..3 {
                b.add(&[i.to_string(), j.to_string()], 1.0).unwrap();
            }
        }
        let c = b.build();
        let r = brute_force_dcld(&c, &ShapeLimit::uniform(2, 2).unwrap(), AggregatorKind::Count, &OracleBudget::default())
            .unwrap();
        assert_eq!(r.density, 1.0);
        assert_eq!(r.selection, vec![vec![0, 1], vec![0, 1]]);
    }
}
