//! Multi-pass diamond dicing.
//!
//! A prescan computes σ for every order-1 slice and admits only values whose
//! slice meets its threshold. Each pass then streams the surviving rows:
//! rows whose every value is still admitted are written out, the others are
//! dropped and their contribution is subtracted from every co-occurring value
//! that is still admitted. A value is evicted as soon as its total falls below
//! the threshold, so evictions affect later rows of the same pass. The run
//! stops after the first pass that drops nothing.
//!
//! Rows live either in memory or in a pair of temporary files that are
//! rewritten sequentially each pass.

use std::borrow::Cow;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cube::{AggregatorKind, Cube, Dimension};
use crate::error::{Error, Result};
use crate::par;

/// Per-dimension thresholds `k_1, …, k_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaratVector(Vec<f64>);

impl CaratVector {
    pub fn new(k: Vec<f64>) -> Result<Self> {
        if let Some(bad) = k.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidCarats(format!("threshold {bad} is not a finite non-negative number")));
        }
        Ok(Self(k))
    }

    pub fn uniform(d: usize, k: f64) -> Self {
        Self(vec![k; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Parses `"4"` (broadcast to `d` dimensions) or `"4,10"`.
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidCarats(format!("'{p}' is not a number")))
            })
            .collect::<Result<_>>()?;
        match parts.len() {
            1 => Self::new(vec![parts[0]; d]),
            n if n == d => Self::new(parts),
            n => Err(Error::DimensionMismatch { expected: d, got: n }),
        }
    }

    pub(crate) fn check(&self, d: usize, agg: AggregatorKind) -> Result<()> {
        if self.0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.0.len(),
            });
        }
        if agg == AggregatorKind::Count && self.0.iter().any(|k| k.fract() != 0.0) {
            return Err(Error::InvalidCarats("COUNT thresholds must be integers".into()));
        }
        Ok(())
    }
}

/// Current σ of every admitted slice, indexed by dimension then attribute id.
#[derive(Debug, Clone)]
pub struct SliceStatsTable {
    totals: Vec<Vec<f64>>,
    alive: Vec<Vec<bool>>,
}

impl SliceStatsTable {
    /// σ of the value's surviving slice, or `None` once it has been evicted
    /// (or was never admitted).
    pub fn get(&self, dim: usize, id: u32) -> Option<f64> {
        let i = id as usize;
        self.alive[dim].get(i).copied().unwrap_or(false).then(|| self.totals[dim][i])
    }

    pub fn is_alive(&self, dim: usize, id: u32) -> bool {
        self.alive[dim].get(id as usize).copied().unwrap_or(false)
    }

    pub fn live_count(&self, dim: usize) -> usize {
        self.alive[dim].iter().filter(|&&a| a).count()
    }

    #[inline]
    fn row_alive(&self, row: &[u32]) -> bool {
        row.iter().zip(&self.alive).all(|(&id, a)| a[id as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Eviction {
    pub dim: usize,
    pub id: u32,
}

/// One streamed pass over the surviving rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: usize,
    pub cells_written: usize,
    pub cells_dropped: usize,
    pub evicted: Vec<Eviction>,
}

#[derive(Debug, Clone)]
pub struct DiamondResult {
    pub diamond: Cube,
    /// Number of passes `I`, including the final pass that confirmed stability.
    pub passes: usize,
    pub trace: Vec<PassRecord>,
    /// Values rejected by the prescan (their full-cube slice is already below
    /// threshold).
    pub prescan_evicted: Vec<Eviction>,
    pub converged: bool,
    pub table: SliceStatsTable,
}

impl DiamondResult {
    /// Passes that dropped at least one row.
    pub fn deleting_passes(&self) -> usize {
        self.trace.iter().filter(|p| p.cells_dropped > 0).count()
    }

    /// `(pass, cells remaining)` pairs, as written to the trace CSV.
    pub fn cells_remaining(&self) -> Vec<(usize, usize)> {
        self.trace.iter().map(|p| (p.pass, p.cells_written)).collect()
    }

    /// Values removed up to the end of `pass`, prescan rejections counted in
    /// pass 1.
    pub fn evicted_in_pass(&self, pass: usize) -> Vec<Eviction> {
        let mut out = if pass == 1 { self.prescan_evicted.clone() } else { Vec::new() };
        if let Some(rec) = self.trace.iter().find(|p| p.pass == pass) {
            out.extend_from_slice(&rec.evicted);
        }
        out
    }
}

/// How a pass applies evictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassMode {
    /// One sequential stream; an eviction takes effect on the very next row.
    #[default]
    Streaming,
    /// Rows are split into chunks scanned concurrently against the admitted
    /// sets as of the start of the pass; decrements are merged and evictions
    /// applied at the pass boundary. Same diamond, possibly more passes.
    Partitioned,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PassStorage {
    /// In memory while the cube has at most this many cells, files otherwise.
    Auto { memory_budget_cells: usize },
    Memory,
    /// Two-file ping-pong inside a fresh directory under `dir` (the system
    /// temp directory when `None`). The directory is removed on success and
    /// kept on failure.
    Files { dir: Option<PathBuf> },
}

impl Default for PassStorage {
    fn default() -> Self {
        PassStorage::Auto {
            memory_budget_cells: 64 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiceOptions {
    /// Absolute slack on `σ ≥ k`; a value is evicted when σ < k − ε.
    pub epsilon: f64,
    /// Permit SUM over negative measures, accepting a non-unique result.
    pub allow_negative: bool,
    pub storage: PassStorage,
    pub mode: PassMode,
}

impl Default for DiceOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            allow_negative: false,
            storage: PassStorage::default(),
            mode: PassMode::Streaming,
        }
    }
}

/// Computes the `k_1, …, k_d`-carat diamond of `cube` with default options.
pub fn dice(cube: &Cube, carats: &CaratVector, agg: AggregatorKind) -> Result<DiamondResult> {
    dice_with(cube, carats, agg, &DiceOptions::default())
}

pub fn dice_with(cube: &Cube, carats: &CaratVector, agg: AggregatorKind, opts: &DiceOptions) -> Result<DiamondResult> {
    let d = cube.dim_count();
    carats.check(d, agg)?;
    if agg == AggregatorKind::Sum && cube.has_negative_measure() && !opts.allow_negative {
        return Err(Error::NegativeMeasure);
    }
    let thresholds: Vec<f64> = carats.as_slice().iter().map(|k| k - opts.epsilon).collect();
    let (mut table, prescan_evicted) = prescan(cube, &thresholds, agg);

    let use_files = match &opts.storage {
        PassStorage::Memory => false,
        PassStorage::Files { .. } => true,
        PassStorage::Auto { memory_budget_cells } => cube.cell_count() > *memory_budget_cells,
    };

    let mut trace = Vec::new();
    let diamond = if use_files {
        let dir = match &opts.storage {
            PassStorage::Files { dir: Some(dir) } => dir.clone(),
            _ => std::env::temp_dir(),
        };
        let mut store = FileStore::new(cube, &dir)?;
        let outcome = run_streaming(&mut store, &mut table, &thresholds, agg, &mut trace).and_then(|()| store.finish());
        match outcome {
            Ok(c) => c,
            Err(e) => {
                store.keep_for_debugging();
                return Err(e);
            }
        }
    } else {
        let mut store = MemoryStore::new(cube);
        match opts.mode {
            PassMode::Streaming => run_streaming(&mut store, &mut table, &thresholds, agg, &mut trace)?,
            PassMode::Partitioned => run_partitioned(&mut store, &mut table, &thresholds, agg, &mut trace),
        }
        store.finish()
    };

    Ok(DiamondResult {
        diamond,
        passes: trace.len(),
        trace,
        prescan_evicted,
        converged: true,
        table,
    })
}

/// True iff every order-1 slice of every dimension has σ ≥ k_i. The empty
/// cube qualifies vacuously.
pub fn verify_carats(cube: &Cube, carats: &CaratVector, agg: AggregatorKind) -> Result<bool> {
    carats.check(cube.dim_count(), agg)?;
    Ok(min_slice_sigma(cube, agg)
        .iter()
        .zip(carats.as_slice())
        .all(|(&lowest, &k)| lowest >= k))
}

/// Smallest σ over the observed slices of each dimension (`+∞` for a
/// dimension with no cells).
pub fn min_slice_sigma(cube: &Cube, agg: AggregatorKind) -> Vec<f64> {
    let d = cube.dim_count();
    let mut totals: Vec<Vec<f64>> = cube.dims().iter().map(|dim| vec![0.0; dim.len()]).collect();
    let mut seen: Vec<Vec<bool>> = cube.dims().iter().map(|dim| vec![false; dim.len()]).collect();
    for (row, &m) in cube.coords_flat().chunks_exact(d).zip(cube.measures()) {
        let w = agg.weight(m);
        for i in 0..d {
            totals[i][row[i] as usize] += w;
            seen[i][row[i] as usize] = true;
        }
    }
    totals
        .iter()
        .zip(&seen)
        .map(|(t, s)| {
            t.iter()
                .zip(s)
                .filter(|(_, &s)| s)
                .map(|(&v, _)| v)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn prescan(cube: &Cube, thresholds: &[f64], agg: AggregatorKind) -> (SliceStatsTable, Vec<Eviction>) {
    let d = cube.dim_count();
    let mut totals: Vec<Vec<f64>> = cube.dims().iter().map(|dim| vec![0.0; dim.len()]).collect();
    let mut seen: Vec<Vec<bool>> = cube.dims().iter().map(|dim| vec![false; dim.len()]).collect();
    for (row, &m) in cube.coords_flat().chunks_exact(d).zip(cube.measures()) {
        let w = agg.weight(m);
        for i in 0..d {
            let id = row[i] as usize;
            totals[i][id] += w;
            seen[i][id] = true;
        }
    }
    let mut evicted = Vec::new();
    let alive = (0..d)
        .map(|i| {
            (0..totals[i].len())
                .map(|id| {
                    let ok = totals[i][id] >= thresholds[i];
                    if seen[i][id] && !ok {
                        evicted.push(Eviction { dim: i, id: id as u32 });
                    }
                    seen[i][id] && ok
                })
                .collect()
        })
        .collect();
    (SliceStatsTable { totals, alive }, evicted)
}

/// Source and sink of rows for one pass.
trait RowStore {
    /// Streams the current rows; rows for which `keep` returns true become the
    /// input of the next pass. Returns `(written, dropped)`.
    fn pass<F: FnMut(&[u32], f64) -> bool>(&mut self, pass: usize, keep: F) -> Result<(usize, usize)>;
}

fn run_streaming<S: RowStore>(
    store: &mut S,
    table: &mut SliceStatsTable,
    thresholds: &[f64],
    agg: AggregatorKind,
    trace: &mut Vec<PassRecord>,
) -> Result<()> {
    loop {
        let pass = trace.len() + 1;
        let mut evicted = Vec::new();
        let (written, dropped) = store.pass(pass, |row, m| {
            if table.row_alive(row) {
                return true;
            }
            let w = agg.weight(m);
            for (i, &id) in row.iter().enumerate() {
                let id = id as usize;
                if table.alive[i][id] {
                    table.totals[i][id] -= w;
                    if table.totals[i][id] < thresholds[i] {
                        table.alive[i][id] = false;
                        evicted.push(Eviction { dim: i, id: id as u32 });
                    }
                }
            }
            false
        })?;
        trace.push(PassRecord {
            pass,
            cells_written: written,
            cells_dropped: dropped,
            evicted,
        });
        if dropped == 0 {
            return Ok(());
        }
    }
}

fn run_partitioned(
    store: &mut MemoryStore<'_>,
    table: &mut SliceStatsTable,
    thresholds: &[f64],
    agg: AggregatorKind,
    trace: &mut Vec<PassRecord>,
) {
    let d = store.d;
    let mut offsets = Vec::with_capacity(d + 1);
    offsets.push(0usize);
    for t in &table.totals {
        offsets.push(offsets.last().unwrap() + t.len());
    }
    let flat_len = *offsets.last().unwrap();

    loop {
        let pass = trace.len() + 1;
        let coords: &[u32] = &store.coords;
        let measures: &[f64] = &store.measures;
        let n = measures.len();
        let chunk = (n / (par::worker_count() * 4)).max(4096);
        let snapshot: &SliceStatsTable = table;

        type Acc = (Vec<f64>, Vec<(usize, Vec<bool>)>);
        let (dec, mut flags): Acc = par::fold_chunks(
            n,
            chunk,
            || (Vec::new(), Vec::new()),
            |(mut dec, mut flags), range| {
                let mut keep = Vec::with_capacity(range.len());
                for r in range.clone() {
                    let row = &coords[r * d..(r + 1) * d];
                    let ok = snapshot.row_alive(row);
                    if !ok {
                        if dec.is_empty() {
                            dec.resize(flat_len, 0.0);
                        }
                        let w = agg.weight(measures[r]);
                        for (i, &id) in row.iter().enumerate() {
                            if snapshot.alive[i][id as usize] {
                                dec[offsets[i] + id as usize] += w;
                            }
                        }
                    }
                    keep.push(ok);
                }
                flags.push((range.start, keep));
                (dec, flags)
            },
            |(a_dec, mut a_flags), (b_dec, b_flags)| {
                let dec = match (a_dec.is_empty(), b_dec.is_empty()) {
                    (true, _) => b_dec,
                    (_, true) => a_dec,
                    _ => a_dec.iter().zip(&b_dec).map(|(x, y)| x + y).collect(),
                };
                a_flags.extend(b_flags);
                (dec, a_flags)
            },
        );
        flags.sort_unstable_by_key(|(start, _)| *start);
        let keep: Vec<bool> = flags.into_iter().flat_map(|(_, k)| k).collect();
        let (written, dropped) = store.compact(&keep);

        let mut evicted = Vec::new();
        if !dec.is_empty() {
            for i in 0..d {
                for id in 0..table.totals[i].len() {
                    let delta = dec[offsets[i] + id];
                    if delta != 0.0 && table.alive[i][id] {
                        table.totals[i][id] -= delta;
                        if table.totals[i][id] < thresholds[i] {
                            table.alive[i][id] = false;
                            evicted.push(Eviction { dim: i, id: id as u32 });
                        }
                    }
                }
            }
        }
        trace.push(PassRecord {
            pass,
            cells_written: written,
            cells_dropped: dropped,
            evicted,
        });
        if dropped == 0 {
            return;
        }
    }
}

struct MemoryStore<'a> {
    dims: Arc<[Dimension]>,
    d: usize,
    coords: Cow<'a, [u32]>,
    measures: Cow<'a, [f64]>,
    out_coords: Vec<u32>,
    out_measures: Vec<f64>,
}

impl<'a> MemoryStore<'a> {
    fn new(cube: &'a Cube) -> Self {
        Self {
            dims: cube.dims_arc().clone(),
            d: cube.dim_count(),
            coords: Cow::Borrowed(cube.coords_flat()),
            measures: Cow::Borrowed(cube.measures()),
            out_coords: Vec::new(),
            out_measures: Vec::new(),
        }
    }

    fn swap_buffers(&mut self) {
        let prev_coords = std::mem::replace(&mut self.coords, Cow::Owned(std::mem::take(&mut self.out_coords)));
        let prev_measures = std::mem::replace(&mut self.measures, Cow::Owned(std::mem::take(&mut self.out_measures)));
        if let Cow::Owned(mut v) = prev_coords {
            v.clear();
            self.out_coords = v;
        }
        if let Cow::Owned(mut v) = prev_measures {
            v.clear();
            self.out_measures = v;
        }
    }

    fn compact(&mut self, keep: &[bool]) -> (usize, usize) {
        let d = self.d;
        let mut written = 0;
        for (r, &k) in keep.iter().enumerate() {
            if k {
                self.out_coords.extend_from_slice(&self.coords[r * d..(r + 1) * d]);
                self.out_measures.push(self.measures[r]);
                written += 1;
            }
        }
        self.swap_buffers();
        (written, keep.len() - written)
    }

    fn finish(self) -> Cube {
        Cube::from_parts(self.dims, self.coords.into_owned(), self.measures.into_owned())
    }
}

impl RowStore for MemoryStore<'_> {
    fn pass<F: FnMut(&[u32], f64) -> bool>(&mut self, _pass: usize, mut keep: F) -> Result<(usize, usize)> {
        let d = self.d;
        let mut written = 0;
        let mut dropped = 0;
        for (row, &m) in self.coords.chunks_exact(d).zip(self.measures.iter()) {
            if keep(row, m) {
                self.out_coords.extend_from_slice(row);
                self.out_measures.push(m);
                written += 1;
            } else {
                dropped += 1;
            }
        }
        self.swap_buffers();
        Ok((written, dropped))
    }
}

/// Rows as fixed-width little-endian records: `d` u32 ids then an f64.
struct FileStore<'a> {
    cube: &'a Cube,
    dir: Option<tempfile::TempDir>,
    current: Option<PathBuf>,
    rows: usize,
}

impl<'a> FileStore<'a> {
    fn new(cube: &'a Cube, parent: &Path) -> Result<Self> {
        let dir = tempfile::Builder::new().prefix("diamond-passes-").tempdir_in(parent)?;
        Ok(Self {
            cube,
            dir: Some(dir),
            current: None,
            rows: cube.cell_count(),
        })
    }

    fn dir_path(&self) -> &Path {
        self.dir.as_ref().expect("pass directory").path()
    }

    fn record_len(&self) -> usize {
        self.cube.dim_count() * 4 + 8
    }

    fn write_record(out: &mut impl Write, row: &[u32], m: f64) -> io::Result<()> {
        for &id in row {
            out.write_all(&id.to_le_bytes())?;
        }
        out.write_all(&m.to_le_bytes())
    }

    fn stream<F: FnMut(&[u32], f64) -> io::Result<()>>(&self, mut f: F) -> io::Result<()> {
        match &self.current {
            None => {
                for cell in self.cube.cells() {
                    f(cell.coords, cell.measure)?;
                }
                Ok(())
            }
            Some(path) => {
                let d = self.cube.dim_count();
                let mut input = BufReader::with_capacity(1 << 16, File::open(path)?);
                let mut buf = vec![0u8; self.record_len()];
                let mut row = vec![0u32; d];
                for _ in 0..self.rows {
                    input.read_exact(&mut buf)?;
                    for (i, id) in row.iter_mut().enumerate() {
                        *id = u32::from_le_bytes(buf[i * 4..i * 4 + 4].try_into().unwrap());
                    }
                    let m = f64::from_le_bytes(buf[d * 4..d * 4 + 8].try_into().unwrap());
                    f(&row, m)?;
                }
                Ok(())
            }
        }
    }

    fn finish(&mut self) -> Result<Cube> {
        let d = self.cube.dim_count();
        let mut coords = Vec::with_capacity(self.rows * d);
        let mut measures = Vec::with_capacity(self.rows);
        let last = self.rows;
        self.stream(|row, m| {
            coords.extend_from_slice(row);
            measures.push(m);
            Ok(())
        })
        .map_err(|source| Error::PassIo { pass: last, source })?;
        if let Some(dir) = self.dir.take() {
            dir.close()?;
        }
        Ok(Cube::from_parts(self.cube.dims_arc().clone(), coords, measures))
    }

    fn keep_for_debugging(&mut self) {
        if let Some(dir) = self.dir.take() {
            let _ = dir.keep();
        }
    }
}

impl RowStore for FileStore<'_> {
    fn pass<F: FnMut(&[u32], f64) -> bool>(&mut self, pass: usize, mut keep: F) -> Result<(usize, usize)> {
        let io_err = |source| Error::PassIo { pass, source };
        let out_path = self.dir_path().join(format!("pass-{pass}.bin"));
        let mut out = BufWriter::with_capacity(1 << 16, File::create(&out_path).map_err(io_err)?);
        let mut written = 0;
        let mut dropped = 0;
        self.stream(|row, m| {
            if keep(row, m) {
                written += 1;
                Self::write_record(&mut out, row, m)
            } else {
                dropped += 1;
                Ok(())
            }
        })
        .map_err(io_err)?;
        out.flush().map_err(io_err)?;
        drop(out);
        if let Some(prev) = self.current.replace(out_path) {
            std::fs::remove_file(prev).map_err(io_err)?;
        }
        self.rows = written;
        Ok((written, dropped))
    }
}
