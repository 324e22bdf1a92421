//! Heuristics for picking at most `p_i` values per dimension so that the
//! selected subcube is as dense (COUNT) or as heavy (SUM) as possible.

use serde::{Deserialize, Serialize};

use crate::bounds::kappa_upper_bound;
use crate::cube::{AggregatorKind, Cube};
use crate::dice::{dice, CaratVector};
use crate::error::{Error, Result};

/// Per-dimension value limits `p_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeLimit(Vec<usize>);

impl ShapeLimit {
    pub fn new(p: Vec<usize>) -> Result<Self> {
        if p.contains(&0) {
            return Err(Error::Domain("shape limits must be at least 1".into()));
        }
        Ok(Self(p))
    }

    pub fn uniform(d: usize, p: usize) -> Result<Self> {
        Self::new(vec![p; d])
    }

    /// `"5"` broadcasts; `"5,3,2"` gives one limit per dimension.
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Domain(format!("'{p}' is not a positive integer")))
            })
            .collect::<Result<_>>()?;
        match parts.len() {
            1 => Self::uniform(d, parts[0]),
            n if n == d => Self::new(parts),
            n => Err(Error::DimensionMismatch { expected: d, got: n }),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `min(n_i, p_i)` against the observed shape of `cube`.
    pub fn targets(&self, cube: &Cube) -> Result<Vec<usize>> {
        if self.0.len() != cube.dim_count() {
            return Err(Error::DimensionMismatch {
                expected: cube.dim_count(),
                got: self.0.len(),
            });
        }
        Ok(cube.shape().iter().zip(&self.0).map(|(&n, &p)| n.min(p)).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounters {
    /// Slices removed from the working subcube.
    pub deletions: u64,
    /// Slices added to the working subcube.
    pub insertions: u64,
    /// Candidate `(removed, added)` pairs considered.
    pub swap_evaluations: u64,
    pub dice_probes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DcldResult {
    /// Selected ids per dimension, ascending.
    pub selection: Vec<Vec<u32>>,
    #[serde(skip)]
    pub subcube: Cube,
    /// Selected value counts; the volume is their product.
    pub shape: Vec<usize>,
    pub cells: usize,
    pub sum: f64,
    pub density: f64,
    pub average: f64,
    /// Density under COUNT, total sum under SUM.
    pub objective: f64,
    pub work: WorkCounters,
    /// Carat level of the seeding diamond (diamond heuristic only).
    pub seed_carats: Option<f64>,
    /// Set when no `k ≥ 1` diamond was wide enough and the whole cube was
    /// trimmed instead.
    pub fallback: bool,
}

impl DcldResult {
    pub(crate) fn from_selection(
        cube: &Cube,
        selection: Vec<Vec<u32>>,
        agg: AggregatorKind,
        work: WorkCounters,
    ) -> Self {
        let subcube = cube.restrict(&selection);
        let shape: Vec<usize> = selection.iter().map(Vec::len).collect();
        let volume: f64 = shape.iter().map(|&n| n as f64).product();
        let cells = subcube.cell_count();
        let sum = subcube.total_sum();
        let (density, average) = if volume > 0.0 {
            (cells as f64 / volume, sum / volume)
        } else {
            (0.0, 0.0)
        };
        let objective = match agg {
            AggregatorKind::Count => density,
            AggregatorKind::Sum => sum,
        };
        Self {
            selection,
            subcube,
            shape,
            cells,
            sum,
            density,
            average,
            objective,
            work,
            seed_carats: None,
            fallback: false,
        }
    }
}

/// Density `|C| / volume` under COUNT, total sum under SUM; 0 for a
/// zero-volume cube. Volume uses the observed shape.
pub fn objective(cube: &Cube, agg: AggregatorKind) -> f64 {
    let stats = cube.stats();
    if stats.volume == 0.0 {
        return 0.0;
    }
    match agg {
        AggregatorKind::Count => stats.density,
        AggregatorKind::Sum => stats.total_sum,
    }
}

/// Keeps the `take` values of `dim` with the largest σ inside the current
/// selection, ties to the smaller id. Returns how many were dropped.
fn trim_dimension(cube: &Cube, selection: &mut [Vec<u32>], dim: usize, take: usize, agg: AggregatorKind) -> u64 {
    if selection[dim].len() <= take {
        return 0;
    }
    let inside = cube.restrict(&*selection);
    let totals = inside.slice_totals(agg);
    let mut ranked = selection[dim].clone();
    ranked.sort_by(|&a, &b| {
        totals[dim][b as usize]
            .total_cmp(&totals[dim][a as usize])
            .then(a.cmp(&b))
    });
    let dropped = (ranked.len() - take) as u64;
    ranked.truncate(take);
    ranked.sort_unstable();
    selection[dim] = ranked;
    dropped
}

/// Seeds from the largest uniform `k` whose diamond still has at least
/// `min(n_i, p_i)` values in every dimension, then trims each dimension in
/// turn to its top values by σ, recomputing σ after every trim.
pub fn dcld_diamond_heuristic(cube: &Cube, limit: &ShapeLimit, agg: AggregatorKind) -> Result<DcldResult> {
    let targets = limit.targets(cube)?;
    let d = cube.dim_count();
    let wide_enough = |c: &Cube| c.shape().iter().zip(&targets).all(|(&n, &t)| n >= t);
    let mut work = WorkCounters::default();

    let mut lo = 0.0;
    let mut seed = cube.clone();
    let mut hi = match agg {
        AggregatorKind::Count => kappa_upper_bound(&cube.stats(), agg),
        AggregatorKind::Sum => cube.total_sum().floor(),
    };
    while lo < hi {
        let mid = lo + ((hi - lo + 1.0) / 2.0).floor();
        let r = dice(&seed, &CaratVector::uniform(d, mid), agg)?;
        work.dice_probes += 1;
        if !r.diamond.is_empty() && wide_enough(&r.diamond) {
            lo = mid;
            seed = r.diamond;
        } else {
            hi = mid - 1.0;
        }
    }

    let mut selection = seed.retained_sets();
    for (i, &t) in targets.iter().enumerate() {
        work.deletions += trim_dimension(cube, &mut selection, i, t, agg);
    }
    let mut out = DcldResult::from_selection(cube, selection, agg, work);
    out.seed_carats = Some(lo);
    out.fallback = lo == 0.0;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSearchOptions {
    /// Upper limit on candidate swaps considered over the whole run.
    pub max_swap_evaluations: u64,
}

impl Default for LocalSearchOptions {
    fn default() -> Self {
        Self {
            max_swap_evaluations: 10_000_000_000,
        }
    }
}

pub fn dcld_local_search(cube: &Cube, limit: &ShapeLimit, agg: AggregatorKind) -> Result<DcldResult> {
    dcld_local_search_with(cube, limit, agg, &LocalSearchOptions::default())
}

/// Steepest-ascent search over selections of exactly `min(n_i, p_i)` values
/// per dimension. The start keeps the top values of each dimension in turn,
/// as the diamond heuristic trims. Step `s` only considers single swaps in
/// dimension `s mod d` and applies the best strictly improving one; the
/// search ends after a full round of dimensions changes nothing.
pub fn dcld_local_search_with(
    cube: &Cube,
    limit: &ShapeLimit,
    agg: AggregatorKind,
    opts: &LocalSearchOptions,
) -> Result<DcldResult> {
    let targets = limit.targets(cube)?;
    let d = cube.dim_count();
    let per_round: f64 = cube
        .shape()
        .iter()
        .zip(&targets)
        .map(|(&n, &t)| (t * (n - t)) as f64)
        .sum();
    if per_round > opts.max_swap_evaluations as f64 {
        return Err(Error::BudgetExceeded {
            what: "swap evaluations per round",
            required: per_round,
            limit: opts.max_swap_evaluations as f64,
        });
    }

    let mut selection = cube.retained_sets();
    for (i, &t) in targets.iter().enumerate() {
        trim_dimension(cube, &mut selection, i, t, agg);
    }
    let mut work = WorkCounters::default();

    let observed = cube.retained_sets();
    let mut chosen: Vec<Vec<bool>> = cube.dims().iter().map(|dim| vec![false; dim.len()]).collect();
    for (flags, ids) in chosen.iter_mut().zip(&selection) {
        for &id in ids {
            flags[id as usize] = true;
        }
    }
    // Cells grouped by value, per dimension, for the incremental updates.
    let mut by_value: Vec<Vec<Vec<u32>>> = cube.dims().iter().map(|dim| vec![Vec::new(); dim.len()]).collect();
    let coords = cube.coords_flat();
    for (c, row) in coords.chunks_exact(d).enumerate() {
        for (i, &id) in row.iter().enumerate() {
            by_value[i][id as usize].push(c as u32);
        }
    }
    // Number of dimensions in which each cell falls outside the selection.
    let mut miss: Vec<u8> = coords
        .chunks_exact(d)
        .map(|row| row.iter().enumerate().filter(|&(i, &id)| !chosen[i][id as usize]).count() as u8)
        .collect();
    let weights: Vec<f64> = cube.measures().iter().map(|&m| agg.weight(m)).collect();

    let mut tally: Vec<f64> = Vec::new();
    loop {
        let mut changed = false;
        for i in 0..d {
            if targets[i] == 0 || targets[i] == observed[i].len() {
                continue;
            }
            // Weight each value of dimension i would contribute if it were
            // the one selected there.
            tally.clear();
            tally.resize(chosen[i].len(), 0.0);
            for (c, row) in coords.chunks_exact(d).enumerate() {
                let id = row[i] as usize;
                let inside_elsewhere = match miss[c] {
                    0 => true,
                    1 => !chosen[i][id],
                    _ => false,
                };
                if inside_elsewhere {
                    tally[id] += weights[c];
                }
            }
            let mut out: Option<(u32, f64)> = None;
            let mut inn: Option<(u32, f64)> = None;
            for &id in &observed[i] {
                let t = tally[id as usize];
                if chosen[i][id as usize] {
                    if out.is_none_or(|(_, best)| t < best) {
                        out = Some((id, t));
                    }
                } else if inn.is_none_or(|(_, best)| t > best) {
                    inn = Some((id, t));
                }
            }
            let evaluated = (targets[i] * (observed[i].len() - targets[i])) as u64;
            work.swap_evaluations += evaluated;
            if work.swap_evaluations > opts.max_swap_evaluations {
                return Err(Error::BudgetExceeded {
                    what: "swap evaluations",
                    required: work.swap_evaluations as f64,
                    limit: opts.max_swap_evaluations as f64,
                });
            }
            let (Some((v, tv)), Some((w, tw))) = (out, inn) else {
                continue;
            };
            if tw > tv {
                chosen[i][v as usize] = false;
                chosen[i][w as usize] = true;
                for &c in &by_value[i][v as usize] {
                    miss[c as usize] += 1;
                }
                for &c in &by_value[i][w as usize] {
                    miss[c as usize] -= 1;
                }
                work.deletions += 1;
                work.insertions += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let selection: Vec<Vec<u32>> = chosen
        .iter()
        .map(|flags| (0..flags.len() as u32).filter(|&id| flags[id as usize]).collect())
        .collect();
    Ok(DcldResult::from_selection(cube, selection, agg, work))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{density_counterexample, quadrant};

    #[test]
    fn objective_values() {
        let c = density_counterexample();
        assert_eq!(objective(&quadrant(&c, false), AggregatorKind::Count), 0.60);
        assert_eq!(objective(&quadrant(&c, true), AggregatorKind::Count), 0.64);
        assert_eq!(objective(&Cube::empty(c.dims_arc().clone()), AggregatorKind::Count), 0.0);
    }

    #[test]
    fn diamond_heuristic_on_counterexample() {
        let c = density_counterexample();
        let r = dcld_diamond_heuristic(&c, &ShapeLimit::uniform(2, 5).unwrap(), AggregatorKind::Count).unwrap();
        assert_eq!(r.seed_carats, Some(3.0));
        assert!(r.subcube.same_cells(&quadrant(&c, false)));
        assert_eq!(r.cells, 15);
        assert_eq!(r.work.deletions, 0);
        assert!(!r.fallback);
    }

    #[test]
    fn local_search_on_counterexample() {
        let c = density_counterexample();
        let r = dcld_local_search(&c, &ShapeLimit::uniform(2, 5).unwrap(), AggregatorKind::Count).unwrap();
        assert_eq!(r.cells, 16);
        assert_eq!(r.shape, vec![5, 5]);
        assert!(r.subcube.same_cells(&quadrant(&c, true)));
        assert_eq!(r.work.insertions, 4);
    }

    #[test]
    fn limits_at_least_shape_keep_everything() {
        let c = density_counterexample();
        let limit = ShapeLimit::uniform(2, 10).unwrap();
        let r = dcld_local_search(&c, &limit, AggregatorKind::Count).unwrap();
        assert!(r.subcube.same_cells(&c));
        assert_eq!(r.work.swap_evaluations, 0);
    }

    #[test]
    fn budget_is_enforced() {
        let c = density_counterexample();
        let opts = LocalSearchOptions {
            max_swap_evaluations: 10,
        };
        let err = dcld_local_search_with(&c, &ShapeLimit::uniform(2, 5).unwrap(), AggregatorKind::Count, &opts);
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn limit_parsing() {
        assert_eq!(ShapeLimit::parse("5", 3).unwrap().as_slice(), &[5, 5, 5]);
        assert!(ShapeLimit::parse("0", 2).is_err());
        assert!(ShapeLimit::parse("1,2,3", 2).is_err());
    }
}
