//! Closed-form bounds relating cube size, shape, carats and the carat number,
//! plus the zeta-skew model of how many slices the first pass marks.

use serde::{Deserialize, Serialize};

use crate::cube::{AggregatorKind, Cube, CubeStats};
use crate::dice::{dice, CaratVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Lower,
    Upper,
}

/// What crossing the bound guarantees: a diamond exists, or none can exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Guarantee {
    Existence,
    NonExistence,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carats: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skew: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub kind: BoundKind,
    pub guarantee: Guarantee,
    pub inputs: BoundInputs,
}

/// Fewest cells a cube with these carats and shape can hold:
/// `max(max_i k_i·n_i, (Π k_i)^(1/(d−1)))`.
pub fn min_size_for_carats(carats: &CaratVector, shape: &[usize]) -> Result<f64> {
    let d = shape.len();
    if d <= 1 {
        return Err(Error::Domain("size bound needs at least two dimensions".into()));
    }
    if carats.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: carats.len(),
        });
    }
    let k = carats.as_slice();
    let per_dim = k
        .iter()
        .zip(shape)
        .map(|(&k, &n)| k * n as f64)
        .fold(0.0, f64::max);
    let product: f64 = k.iter().product();
    Ok(per_dim.max(product.powf(1.0 / (d as f64 - 1.0))))
}

/// Most cells a cube of this shape can hold without containing a
/// `k`-carat subcube: `1 + Σ (k_i − 1)(n_i − 1)`. For uniform `k` any cube
/// with more cells contains one. For unequal `k_i` the guarantee can fail:
/// the full 2 × 2 cube has 4 cells, above the value 3 for `k = (3, 1)`, yet
/// no row can reach 3 cells.
pub fn max_cells_without_diamond(shape: &[usize], carats: &CaratVector) -> Result<u64> {
    check_len(shape, carats)?;
    let extra: f64 = carats
        .as_slice()
        .iter()
        .zip(shape)
        .map(|(&k, &n)| (k.floor() - 1.0).max(0.0) * n.saturating_sub(1) as f64)
        .sum();
    Ok(1 + extra as u64)
}

/// `Σ (n_i + 1)·k_i + max_i k_i`: a non-negative cube whose total sum
/// reaches this value contains a `k`-sum-carat subcube.
pub fn max_sum_without_diamond(shape: &[usize], carats: &CaratVector) -> Result<f64> {
    check_len(shape, carats)?;
    let k = carats.as_slice();
    Ok(k.iter().zip(shape).map(|(&k, &n)| (n as f64 + 1.0) * k).sum::<f64>() + carats.max())
}

/// Average above which any heaviest-cube solution of this shape must meet
/// the `k`-sum-carat diamond.
pub fn hcld_average_threshold(shape: &[usize], carats: &CaratVector) -> Result<f64> {
    let volume: f64 = shape.iter().map(|&n| n as f64).product();
    if volume == 0.0 {
        return Ok(0.0);
    }
    Ok(max_sum_without_diamond(shape, carats)? / volume)
}

/// Density above which any densest-cube solution with at most `p` values per
/// dimension must meet the `k`-carat diamond.
pub fn dcld_density_threshold(shape: &[usize], p: usize, k: u64) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("p must be at least 1".into()));
    }
    let limited: Vec<usize> = shape.iter().map(|&n| n.min(p)).collect();
    let volume: f64 = limited.iter().map(|&n| n as f64).product();
    if volume == 0.0 {
        return Ok(0.0);
    }
    let slack: f64 = limited.iter().map(|&n| n.saturating_sub(1) as f64).sum();
    Ok((1.0 + (k.saturating_sub(1)) as f64 * slack) / volume)
}

fn check_len(shape: &[usize], carats: &CaratVector) -> Result<()> {
    if carats.len() != shape.len() {
        return Err(Error::DimensionMismatch {
            expected: shape.len(),
            got: carats.len(),
        });
    }
    Ok(())
}

/// Guaranteed lower bound on κ.
///
/// COUNT: the largest integer `k` with `1 + (k − 1)·Σ(n_i − 1) < |C|`, and at
/// least 1 for a non-empty cube. SUM: the larger of the biggest single
/// measure (a lone cell is its own diamond) and the largest `k` whose
/// sum-threshold `k·(Σ(n_i + 1) + 1)` the total reaches; floored when the
/// measures are integers.
pub fn kappa_lower_bound(stats: &CubeStats, agg: AggregatorKind) -> f64 {
    if stats.cell_count == 0 {
        return 0.0;
    }
    match agg {
        AggregatorKind::Count => {
            let slack: usize = stats.shape.iter().map(|&n| n.saturating_sub(1)).sum();
            if slack == 0 {
                return 1.0;
            }
            let cells = stats.cell_count as u64;
            // k − 1 < (|C| − 1) / slack
            let k = (cells - 1).div_ceil(slack as u64);
            k.max(1) as f64
        }
        AggregatorKind::Sum => {
            let denom: f64 = stats.shape.iter().map(|&n| n as f64 + 1.0).sum::<f64>() + 1.0;
            (stats.total_sum / denom).max(stats.max_measure).max(0.0)
        }
    }
}

/// The looser closed form `|C| / Σ(n_i − 1) − 3`, reported alongside
/// [`kappa_lower_bound`] for comparison.
pub fn kappa_lower_bound_loose(stats: &CubeStats) -> f64 {
    let slack: usize = stats.shape.iter().map(|&n| n.saturating_sub(1)).sum();
    if slack == 0 {
        return 0.0;
    }
    stats.cell_count as f64 / slack as f64 - 3.0
}

/// Upper bound on κ. COUNT: `min(Π_{i<d} n_i` over the ascending-sorted
/// shape, `|C|)`. SUM: the total sum.
pub fn kappa_upper_bound(stats: &CubeStats, agg: AggregatorKind) -> f64 {
    if stats.cell_count == 0 {
        return 0.0;
    }
    match agg {
        AggregatorKind::Count => {
            let mut shape = stats.shape.clone();
            shape.sort_unstable();
            let all_but_largest: f64 = shape[..shape.len().saturating_sub(1)].iter().map(|&n| n as f64).product();
            all_but_largest.min(stats.cell_count as f64)
        }
        AggregatorKind::Sum => stats.total_sum,
    }
}

#[derive(Debug, Clone)]
pub struct PrefilterResult {
    pub feasible: bool,
    /// Region that must contain every perfect subcube of the target shape.
    pub region: Cube,
    pub carats: CaratVector,
}

/// Dices with `k_i = Π_{j≠i} m_j` under COUNT; every perfect `m`-shaped
/// subcube lies in the resulting diamond.
pub fn perfect_prefilter(cube: &Cube, target: &[usize]) -> Result<PrefilterResult> {
    if target.len() != cube.dim_count() {
        return Err(Error::DimensionMismatch {
            expected: cube.dim_count(),
            got: target.len(),
        });
    }
    if target.contains(&0) {
        return Err(Error::Domain("target shape entries must be at least 1".into()));
    }
    let k: Vec<f64> = (0..target.len())
        .map(|i| {
            target
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &m)| m as f64)
                .product()
        })
        .collect();
    let carats = CaratVector::new(k)?;
    let region = dice(cube, &carats, AggregatorKind::Count)?.diamond;
    let feasible = !region.is_empty() && region.shape().iter().zip(target).all(|(&n, &m)| n >= m);
    Ok(PrefilterResult {
        feasible,
        region,
        carats,
    })
}

/// Tail of the Euler–Maclaurin expansion of `Σ_{j≥n} j^(−s)`, together with
/// the magnitude of the first omitted term.
fn zeta_tail(n: f64, s: f64) -> (f64, f64) {
    // Bernoulli numbers B_2, B_4, B_6, B_8, B_10 divided by (2m)!.
    const COEFFS: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
    ];
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // Derivative factor s(s+1)…(s+2m−2) · n^(−s−2m+1).
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    let mut next = 0.0;
    for (m, c) in COEFFS.iter().enumerate() {
        let term = c * rising * power;
        if m + 1 == COEFFS.len() {
            next = term.abs();
        } else {
            tail += term;
        }
        let a = s + 2.0 * m as f64 + 1.0;
        rising *= a * (a + 1.0);
        power /= n * n;
    }
    (tail, next)
}

/// `ζ(s) = Σ_{j≥1} j^(−s)` for `s > 1`: an explicit partial sum up to a cutoff
/// of at least `truncation`, grown until the analytic tail error drops below
/// 1e−12.
pub fn zeta(s: f64, truncation: usize) -> Result<f64> {
    if s.is_nan() || s <= 1.0 {
        return Err(Error::Domain(format!("zeta diverges for s = {s} (need s > 1)")));
    }
    let mut cutoff = truncation.max(8);
    loop {
        let (tail, err) = zeta_tail(cutoff as f64, s);
        if err < 1e-12 || cutoff >= 1 << 24 {
            let head: f64 = (1..cutoff).rev().map(|j| (j as f64).powf(-s)).sum();
            return Ok(head + tail);
        }
        cutoff *= 2;
    }
}

/// `P_{k,s} = Σ_{j<k} j^(−s) / ζ(s)`: probability that a zeta(s)-distributed
/// slice count falls below `k`.
pub fn below_threshold_probability(k: u64, s: f64, truncation: usize) -> Result<f64> {
    let z = zeta(s, truncation)?;
    let head: f64 = (1..k).rev().map(|j| (j as f64).powf(-s)).sum();
    Ok(head / z)
}

/// Expected fraction of slices marked for deletion by the first pass when
/// slice counts follow a zeta(s) law: `Σ n_i·P_{k_i,s} / Σ n_i`.
pub fn expected_marked_fraction(shape: &[usize], carats: &CaratVector, s: f64, truncation: usize) -> Result<f64> {
    check_len(shape, carats)?;
    let z = zeta(s, truncation)?;
    let total: f64 = shape.iter().map(|&n| n as f64).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let marked: f64 = shape
        .iter()
        .zip(carats.as_slice())
        .map(|(&n, &k)| {
            let head: f64 = (1..k.ceil() as u64).rev().map(|j| (j as f64).powf(-s)).sum();
            n as f64 * head / z
        })
        .sum();
    Ok(marked / total)
}
