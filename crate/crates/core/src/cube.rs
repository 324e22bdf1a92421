//! Cube representation and the restriction / union / containment algebra.
//!
//! A [`Cube`] is an immutable fact table: `d` dimensions whose attribute values
//! are interned to dense `u32` ids, plus a list of allocated cells, each a
//! coordinate tuple with a real measure. Cells keep the order in which they
//! were ingested; the dicing engine streams them in that order.
//!
//! Restrictions share their parent's dictionaries, so comparisons between
//! cubes cut from a common parent work directly on ids. The attribute set of a
//! dimension is the set of ids actually referenced by cells ("observed"
//! semantics): a value whose slice is empty is not part of the cube.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bidirectional map between attribute strings and dense ids `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dimension {
    name: String,
    values: Vec<String>,
    index: HashMap<String, u32>,
}

impl Dimension {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Returns the id of `value`, assigning the next free id on first sight.
    pub fn intern(&mut self, value: &str) -> u32 {
        if let Some(&id) = self.index.get(value) {
            return id;
        }
        let id = self.values.len() as u32;
        self.values.push(value.to_owned());
        self.index.insert(value.to_owned(), id);
        id
    }

    pub fn id(&self, value: &str) -> Option<u32> {
        self.index.get(value).copied()
    }

    pub fn value(&self, id: u32) -> Option<&str> {
        self.values.get(id as usize).map(String::as_str)
    }

    /// Number of entries in the dictionary (not necessarily observed in a
    /// given restriction).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }
}

/// The slice aggregator. Both are linear, so slice totals can be decremented
/// cell by cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregatorKind {
    Count,
    Sum,
}

impl AggregatorKind {
    /// Contribution of one cell with measure `m` to its slices.
    #[inline]
    pub fn weight(self, m: f64) -> f64 {
        match self {
            AggregatorKind::Count => 1.0,
            AggregatorKind::Sum => m,
        }
    }
}

impl std::fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AggregatorKind::Count => "count",
            AggregatorKind::Sum => "sum",
        })
    }
}

impl std::str::FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "count" => Ok(AggregatorKind::Count),
            "sum" => Ok(AggregatorKind::Sum),
            other => Err(Error::Domain(format!("unknown aggregator '{other}'"))),
        }
    }
}

/// Summary statistics of a cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeStats {
    pub cell_count: usize,
    /// Observed attribute count `n_i` per dimension.
    pub shape: Vec<usize>,
    pub volume: f64,
    pub density: f64,
    pub total_sum: f64,
    pub max_measure: f64,
}

impl CubeStats {
    /// Stats for a hypothetical cube given only its shape and cell count.
    pub fn from_shape(shape: Vec<usize>, cell_count: usize, total_sum: f64) -> Self {
        let volume: f64 = shape.iter().map(|&n| n as f64).product();
        let density = if volume > 0.0 {
            cell_count as f64 / volume
        } else {
            0.0
        };
        Self {
            cell_count,
            shape,
            volume,
            density,
            total_sum,
            max_measure: 0.0,
        }
    }
}

/// Borrowed view of one allocated cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell<'a> {
    pub coords: &'a [u32],
    pub measure: f64,
}

#[derive(Debug, Clone)]
pub struct Cube {
    dims: Arc<[Dimension]>,
    coords: Vec<u32>,
    measures: Vec<f64>,
    has_negative: bool,
    integral: bool,
}

impl Cube {
    /// A cube with the given dictionaries and no cells.
    pub fn empty(dims: Arc<[Dimension]>) -> Self {
        Self {
            dims,
            coords: Vec::new(),
            measures: Vec::new(),
            has_negative: false,
            integral: true,
        }
    }

    /// Builds a cube from flat coordinates (`d` ids per cell) and measures.
    /// Coordinates must be distinct and valid ids of `dims`.
    pub(crate) fn from_parts(dims: Arc<[Dimension]>, coords: Vec<u32>, measures: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len(), dims.len() * measures.len());
        let has_negative = measures.iter().any(|&m| m < 0.0);
        let integral = measures.iter().all(|m| m.fract() == 0.0);
        Self {
            dims,
            coords,
            measures,
            has_negative,
            integral,
        }
    }

    pub fn dim_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn dims_arc(&self) -> &Arc<[Dimension]> {
        &self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn has_negative_measure(&self) -> bool {
        self.has_negative
    }

    /// True when every measure is an integer, so SUM totals are exact in `f64`
    /// (up to 2^53).
    pub fn is_integral(&self) -> bool {
        self.integral
    }

    pub fn cell(&self, i: usize) -> Cell<'_> {
        let d = self.dim_count();
        Cell {
            coords: &self.coords[i * d..(i + 1) * d],
            measure: self.measures[i],
        }
    }

    pub fn cells(&self) -> impl ExactSizeIterator<Item = Cell<'_>> + '_ {
        (0..self.cell_count()).map(move |i| self.cell(i))
    }

    pub fn coords_flat(&self) -> &[u32] {
        &self.coords
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn total_sum(&self) -> f64 {
        self.measures.iter().sum()
    }

    pub fn value_name(&self, dim: usize, id: u32) -> Option<&str> {
        self.dims.get(dim).and_then(|d| d.value(id))
    }

    /// Per-dimension flags over dictionary ids: `true` where the id is
    /// referenced by at least one cell.
    fn observed_masks(&self) -> Vec<Vec<bool>> {
        let d = self.dim_count();
        let mut masks: Vec<Vec<bool>> = self.dims.iter().map(|dim| vec![false; dim.len()]).collect();
        for row in self.coords.chunks_exact(d.max(1)) {
            for (mask, &id) in masks.iter_mut().zip(row) {
                mask[id as usize] = true;
            }
        }
        masks
    }

    /// Sorted ids referenced by cells in dimension `dim`.
    pub fn retained(&self, dim: usize) -> Vec<u32> {
        let d = self.dim_count();
        let mut mask = vec![false; self.dims[dim].len()];
        for row in self.coords.chunks_exact(d) {
            mask[row[dim] as usize] = true;
        }
        ids_of(&mask)
    }

    pub fn retained_sets(&self) -> Vec<Vec<u32>> {
        self.observed_masks().iter().map(|m| ids_of(m)).collect()
    }

    /// Observed attribute count per dimension.
    pub fn shape(&self) -> Vec<usize> {
        self.observed_masks()
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn stats(&self) -> CubeStats {
        let mut stats = CubeStats::from_shape(self.shape(), self.cell_count(), self.total_sum());
        stats.max_measure = self.measures.iter().copied().fold(0.0, f64::max);
        stats
    }

    /// Dense per-dimension slice totals indexed by dictionary id.
    pub fn slice_totals(&self, agg: AggregatorKind) -> Vec<Vec<f64>> {
        let d = self.dim_count();
        let mut totals: Vec<Vec<f64>> = self.dims.iter().map(|dim| vec![0.0; dim.len()]).collect();
        for (row, &m) in self.coords.chunks_exact(d.max(1)).zip(&self.measures) {
            let w = agg.weight(m);
            for (t, &id) in totals.iter_mut().zip(row) {
                t[id as usize] += w;
            }
        }
        totals
    }

    /// σ of the order-1 slice fixing `value` on dimension `dim`.
    pub fn slice_sigma(&self, dim: usize, value: u32, agg: AggregatorKind) -> Result<f64> {
        let d = self.dim_count();
        if dim >= d || value as usize >= self.dims[dim].len() {
            return Err(Error::UnknownValue { dim, id: value });
        }
        Ok(self
            .coords
            .chunks_exact(d)
            .zip(&self.measures)
            .filter(|(row, _)| row[dim] == value)
            .map(|(_, &m)| agg.weight(m))
            .sum())
    }

    /// Keeps exactly the cells whose every coordinate is in the matching keep
    /// set. Measures and dictionaries are unchanged.
    pub fn restrict<S: AsRef<[u32]>>(&self, keep: &[S]) -> Cube {
        assert_eq!(keep.len(), self.dim_count(), "one keep set per dimension");
        let masks: Vec<Vec<bool>> = self
            .dims
            .iter()
            .zip(keep)
            .map(|(dim, ids)| {
                let mut mask = vec![false; dim.len()];
                for &id in ids.as_ref() {
                    if let Some(slot) = mask.get_mut(id as usize) {
                        *slot = true;
                    }
                }
                mask
            })
            .collect();
        self.filter_cells(|row| row.iter().zip(&masks).all(|(&id, mask)| mask[id as usize]))
    }

    pub(crate) fn filter_cells(&self, mut keep: impl FnMut(&[u32]) -> bool) -> Cube {
        let d = self.dim_count();
        let mut coords = Vec::new();
        let mut measures = Vec::new();
        for (row, &m) in self.coords.chunks_exact(d.max(1)).zip(&self.measures) {
            if keep(row) {
                coords.extend_from_slice(row);
                measures.push(m);
            }
        }
        Cube::from_parts(self.dims.clone(), coords, measures)
    }

    fn shares_dictionaries(&self, other: &Cube) -> bool {
        Arc::ptr_eq(&self.dims, &other.dims) || self.dims == other.dims
    }

    /// Maps each id of `other`'s dictionaries to the id of the same string in
    /// `self`'s dictionaries.
    fn translation_from(&self, other: &Cube) -> Vec<Vec<Option<u32>>> {
        self.dims
            .iter()
            .zip(other.dims.iter())
            .map(|(mine, theirs)| theirs.values().iter().map(|v| mine.id(v)).collect())
            .collect()
    }

    fn cell_index(&self) -> HashMap<&[u32], f64> {
        let d = self.dim_count();
        self.coords
            .chunks_exact(d.max(1))
            .zip(self.measures.iter().copied())
            .collect()
    }

    /// True iff every cell of `inner` (and hence every observed attribute)
    /// appears in `self` with the same measure.
    pub fn contains(&self, inner: &Cube) -> bool {
        if self.dim_count() != inner.dim_count() {
            return false;
        }
        if inner.cell_count() > self.cell_count() {
            return false;
        }
        let index = self.cell_index();
        if self.shares_dictionaries(inner) {
            return inner
                .cells()
                .all(|c| index.get(c.coords) == Some(&c.measure));
        }
        let translation = self.translation_from(inner);
        let mut buf = vec![0u32; self.dim_count()];
        inner.cells().all(|c| {
            for (i, (&id, map)) in c.coords.iter().zip(&translation).enumerate() {
                match map[id as usize] {
                    Some(t) => buf[i] = t,
                    None => return false,
                }
            }
            index.get(buf.as_slice()) == Some(&c.measure)
        })
    }

    /// Same cells with the same measures, regardless of order.
    pub fn same_cells(&self, other: &Cube) -> bool {
        self.cell_count() == other.cell_count() && self.contains(other)
    }

    /// Union of two restrictions of a common parent: attribute sets are
    /// unioned and every cell of either operand is kept.
    pub fn union(&self, other: &Cube) -> Result<Cube> {
        if self.dim_count() != other.dim_count() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_count(),
                got: other.dim_count(),
            });
        }
        let d = self.dim_count();
        let (dims, translation) = if self.shares_dictionaries(other) {
            (self.dims.clone(), None)
        } else {
            let mut merged: Vec<Dimension> = self.dims.to_vec();
            let translation: Vec<Vec<u32>> = merged
                .iter_mut()
                .zip(other.dims.iter())
                .map(|(mine, theirs)| theirs.values().iter().map(|v| mine.intern(v)).collect())
                .collect();
            (Arc::from(merged), Some(translation))
        };

        let mut index: HashMap<Vec<u32>, f64> = HashMap::with_capacity(self.cell_count() + other.cell_count());
        let mut coords = self.coords.clone();
        let mut measures = self.measures.clone();
        for c in self.cells() {
            index.insert(c.coords.to_vec(), c.measure);
        }
        for c in other.cells() {
            let key: Vec<u32> = match &translation {
                Some(t) => c.coords.iter().zip(t).map(|(&id, map)| map[id as usize]).collect(),
                None => c.coords.to_vec(),
            };
            match index.get(&key) {
                Some(&m) if m == c.measure => {}
                Some(&m) => {
                    return Err(Error::IncompatibleRestriction(format!(
                        "cell {key:?} has measure {m} on one side and {} on the other",
                        c.measure
                    )))
                }
                None => {
                    coords.extend_from_slice(&key);
                    measures.push(c.measure);
                    index.insert(key, c.measure);
                }
            }
        }
        debug_assert_eq!(coords.len(), d * measures.len());
        Ok(Cube::from_parts(dims, coords, measures))
    }
}

fn ids_of(mask: &[bool]) -> Vec<u32> {
    mask.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i as u32)
        .collect()
}

/// Accumulates facts into a cube, interning attribute strings and rolling up
/// duplicate coordinates by summing their measures.
#[derive(Debug)]
pub struct CubeBuilder {
    dims: Vec<Dimension>,
    index: HashMap<Box<[u32]>, usize>,
    coords: Vec<u32>,
    measures: Vec<f64>,
    scratch: Vec<u32>,
}

impl CubeBuilder {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_dimensions(names.into_iter().map(Dimension::new).collect())
    }

    /// Starts from existing dictionaries; new values are appended to them.
    pub fn with_dimensions(dims: Vec<Dimension>) -> Self {
        Self {
            dims,
            index: HashMap::new(),
            coords: Vec::new(),
            measures: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn dim_count(&self) -> usize {
        self.dims.len()
    }

    pub fn cell_count(&self) -> usize {
        self.measures.len()
    }

    /// Adds one fact given attribute strings in dimension order.
    pub fn add<S: AsRef<str>>(&mut self, values: &[S], measure: f64) -> Result<()> {
        if values.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: values.len(),
            });
        }
        let mut ids = std::mem::take(&mut self.scratch);
        ids.clear();
        ids.extend(self.dims.iter_mut().zip(values).map(|(dim, v)| dim.intern(v.as_ref())));
        self.add_ids(&ids, measure);
        self.scratch = ids;
        Ok(())
    }

    /// Adds one fact by ids; every id must already exist in its dictionary.
    pub fn add_ids(&mut self, ids: &[u32], measure: f64) {
        debug_assert!(ids.iter().zip(&self.dims).all(|(&id, d)| (id as usize) < d.len()));
        if let Some(&slot) = self.index.get(ids) {
            self.measures[slot] += measure;
        } else {
            self.index.insert(ids.into(), self.measures.len());
            self.coords.extend_from_slice(ids);
            self.measures.push(measure);
        }
    }

    /// Whether a fact with these ids has already been added.
    pub fn contains_ids(&self, ids: &[u32]) -> bool {
        self.index.contains_key(ids)
    }

    pub fn dimension_mut(&mut self, dim: usize) -> &mut Dimension {
        &mut self.dims[dim]
    }

    pub fn build(self) -> Cube {
        Cube::from_parts(Arc::from(self.dims), self.coords, self.measures)
    }
}
