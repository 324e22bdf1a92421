//! Carat-number search: the largest uniform `k` whose diamond is non-empty.
//!
//! Diamonds nest (a larger `k` gives a subcube of the smaller `k`'s diamond),
//! so every probe above a known non-empty `k` can start from that diamond
//! instead of the whole cube.

use serde::{Deserialize, Serialize};

use crate::bounds::{kappa_lower_bound, kappa_upper_bound};
use crate::cube::{AggregatorKind, Cube};
use crate::dice::{dice, min_slice_sigma, CaratVector, DiamondResult};
use crate::error::{Error, Result};

/// Above this ratio between the upper and lower bound the search doubles
/// from the lower bound before bisecting.
const GALLOP_RATIO: f64 = 65536.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Sequential,
    #[default]
    Binary,
}

impl std::str::FromStr for SearchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" => Ok(SearchMethod::Sequential),
            "binary" => Ok(SearchMethod::Binary),
            other => Err(Error::Domain(format!("unknown search method '{other}'"))),
        }
    }
}

/// One dice issued by the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub k: f64,
    pub nonempty: bool,
    pub passes: usize,
    /// Cells of the cube the probe started from.
    pub input_cells: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaResult {
    pub kappa: f64,
    #[serde(skip)]
    pub diamond: Cube,
    pub probes: Vec<Probe>,
    pub method: SearchMethod,
    /// Interval width at which a real-valued search stops; 0 for integer
    /// domains.
    pub tolerance: f64,
    /// False when κ is only known to within `tolerance`.
    pub exact: bool,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl KappaResult {
    pub fn dices(&self) -> usize {
        self.probes.len()
    }

    fn empty(cube: &Cube, method: SearchMethod) -> Self {
        Self {
            kappa: 0.0,
            diamond: Cube::empty(cube.dims_arc().clone()),
            probes: Vec::new(),
            method,
            tolerance: 0.0,
            exact: true,
            lower_bound: 0.0,
            upper_bound: 0.0,
        }
    }
}

/// Runs the chosen search. `tolerance` only matters for SUM over
/// non-integer measures; `None` means `1e-6 ×` the total sum.
pub fn kappa(cube: &Cube, agg: AggregatorKind, method: SearchMethod, tolerance: Option<f64>) -> Result<KappaResult> {
    match method {
        SearchMethod::Sequential => kappa_sequential(cube, agg),
        SearchMethod::Binary => kappa_binary(cube, agg, tolerance),
    }
}

fn integer_domain(cube: &Cube, agg: AggregatorKind) -> bool {
    agg == AggregatorKind::Count || cube.is_integral()
}

fn check_input(cube: &Cube, agg: AggregatorKind) -> Result<()> {
    if agg == AggregatorKind::Sum && cube.has_negative_measure() {
        return Err(Error::NegativeMeasure);
    }
    Ok(())
}

struct Prober<'a> {
    agg: AggregatorKind,
    d: usize,
    probes: &'a mut Vec<Probe>,
}

impl Prober<'_> {
    fn run(&mut self, from: &Cube, k: f64) -> Result<DiamondResult> {
        let r = dice(from, &CaratVector::uniform(self.d, k), self.agg)?;
        self.probes.push(Probe {
            k,
            nonempty: !r.diamond.is_empty(),
            passes: r.passes,
            input_cells: from.cell_count(),
            cells: r.diamond.cell_count(),
        });
        Ok(r)
    }
}

/// Steps `k` up by one from just above the lower bound, re-dicing the last
/// non-empty diamond each time. For real-valued SUM this finds `⌊κ⌋`.
pub fn kappa_sequential(cube: &Cube, agg: AggregatorKind) -> Result<KappaResult> {
    check_input(cube, agg)?;
    if cube.is_empty() {
        return Ok(KappaResult::empty(cube, SearchMethod::Sequential));
    }
    let stats = cube.stats();
    let lb = kappa_lower_bound(&stats, agg).floor();
    let ub = kappa_upper_bound(&stats, agg);
    let mut probes = Vec::new();
    let mut prober = Prober {
        agg,
        d: cube.dim_count(),
        probes: &mut probes,
    };

    let mut best: Option<Cube> = None;
    let mut k = lb + 1.0;
    loop {
        let from = best.as_ref().unwrap_or(cube);
        let r = prober.run(from, k)?;
        if r.diamond.is_empty() {
            break;
        }
        best = Some(r.diamond);
        k += 1.0;
    }
    let kappa = k - 1.0;
    let diamond = match best {
        Some(d) => d,
        None => prober.run(cube, kappa)?.diamond,
    };
    Ok(KappaResult {
        kappa,
        diamond,
        probes,
        method: SearchMethod::Sequential,
        tolerance: 0.0,
        exact: integer_domain(cube, agg),
        lower_bound: lb,
        upper_bound: ub,
    })
}

/// Bisects between the lower and upper bound.
///
/// The first probe dices at the lower bound. Each non-empty diamond `W`
/// then tightens both ends: its smallest slice σ is a carat level it
/// already meets, and κ cannot exceed the upper bound computed on `W`
/// itself. Later probes dice `W` rather than the whole cube.
pub fn kappa_binary(cube: &Cube, agg: AggregatorKind, tolerance: Option<f64>) -> Result<KappaResult> {
    check_input(cube, agg)?;
    if cube.is_empty() {
        return Ok(KappaResult::empty(cube, SearchMethod::Binary));
    }
    let integer = integer_domain(cube, agg);
    let stats = cube.stats();
    let mut lb = kappa_lower_bound(&stats, agg);
    if integer {
        lb = lb.floor();
    }
    let ub = kappa_upper_bound(&stats, agg);
    let tol = match tolerance {
        _ if integer => 0.0,
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::Domain(format!("tolerance must be positive, got {t}"))),
        None => (1e-6 * stats.total_sum).max(f64::MIN_POSITIVE),
    };

    let mut probes = Vec::new();
    let mut prober = Prober {
        agg,
        d: cube.dim_count(),
        probes: &mut probes,
    };
    let witness_floor = |w: &Cube| {
        let m = min_slice_sigma(w, agg).into_iter().fold(f64::INFINITY, f64::min);
        if integer {
            m.floor()
        } else {
            m
        }
    };

    let mut w = prober.run(cube, lb)?.diamond;
    if w.is_empty() {
        // Cannot happen for a correct lower bound; step down to stay total.
        return kappa_sequential(cube, agg);
    }
    let mut lo = lb.max(witness_floor(&w));
    let mut hi = ub.min(kappa_upper_bound(&w.stats(), agg));

    if hi > GALLOP_RATIO * lo.max(1.0) {
        loop {
            let k = (2.0 * lo).max(1.0);
            if k >= hi {
                break;
            }
            let r = prober.run(&w, k)?;
            if r.diamond.is_empty() {
                hi = if integer { k - 1.0 } else { k };
                break;
            }
            w = r.diamond;
            lo = k.max(witness_floor(&w));
            hi = hi.min(kappa_upper_bound(&w.stats(), agg));
        }
    }

    if integer {
        while lo < hi {
            let mid = lo + ((hi - lo + 1.0) / 2.0).floor();
            let r = prober.run(&w, mid)?;
            if r.diamond.is_empty() {
                hi = mid - 1.0;
            } else {
                w = r.diamond;
                lo = mid.max(witness_floor(&w));
                hi = hi.min(kappa_upper_bound(&w.stats(), agg));
            }
        }
    } else {
        while hi - lo > tol {
            let mid = lo + (hi - lo) / 2.0;
            let r = prober.run(&w, mid)?;
            if r.diamond.is_empty() {
                hi = mid;
            } else {
                w = r.diamond;
                lo = mid.max(witness_floor(&w));
                hi = hi.min(kappa_upper_bound(&w.stats(), agg));
            }
        }
    }

    Ok(KappaResult {
        kappa: lo,
        diamond: w,
        probes,
        method: SearchMethod::Binary,
        tolerance: tol,
        exact: integer,
        lower_bound: lb,
        upper_bound: ub,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::CubeBuilder;
    use crate::fixtures::sales_cube;

    #[test]
    fn sales_count_kappa_is_five() {
        let c = sales_cube();
        let s = kappa_sequential(&c, AggregatorKind::Count).unwrap();
        let b = kappa_binary(&c, AggregatorKind::Count, None).unwrap();
        assert_eq!(s.kappa, 5.0);
        assert_eq!(b.kappa, 5.0);
        assert!(b.diamond.same_cells(&c));
        assert_eq!(s.lower_bound, 4.0);
        // k = 5 then k = 6
        assert_eq!(s.dices(), 2);
    }

    #[test]
    fn single_cell_sum() {
        let mut b = CubeBuilder::new(["year", "city"]);
        b.add(&["1980", "Bologna"], 85.0).unwrap();
        let c = b.build();
        let r = kappa_binary(&c, AggregatorKind::Sum, None).unwrap();
        assert_eq!(r.kappa, 85.0);
        assert!(r.diamond.same_cells(&c));
        assert_eq!(kappa_sequential(&c, AggregatorKind::Sum).unwrap().kappa, 85.0);
    }

    #[test]
    fn empty_cube_has_zero_kappa() {
        let c = CubeBuilder::new(["a", "b"]).build();
        assert_eq!(kappa_binary(&c, AggregatorKind::Count, None).unwrap().kappa, 0.0);
        assert_eq!(kappa_sequential(&c, AggregatorKind::Count).unwrap().kappa, 0.0);
    }

    #[test]
    fn real_sum_is_approximate() {
        let c = sales_cube();
        let r = kappa_binary(&c, AggregatorKind::Sum, Some(1e-9)).unwrap();
        assert!(!r.exact);
        assert!(!r.diamond.is_empty());
        let above = dice(&c, &CaratVector::uniform(2, r.kappa + 1e-6), AggregatorKind::Sum).unwrap();
        assert!(above.diamond.is_empty());
        let floor = kappa_sequential(&c, AggregatorKind::Sum).unwrap();
        assert_eq!(floor.kappa, r.kappa.floor());
    }

    #[test]
    fn bad_tolerance() {
        let c = sales_cube();
        assert!(kappa_binary(&c, AggregatorKind::Sum, Some(0.0)).is_err());
    }

    #[test]
    fn method_parse() {
        assert_eq!("Binary".parse::<SearchMethod>().unwrap(), SearchMethod::Binary);
        assert!("ternary".parse::<SearchMethod>().is_err());
    }
}
