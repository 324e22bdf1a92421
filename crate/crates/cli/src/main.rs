//! `diamond`: batch front end for diamond dicing.
//!
//! Exit status 0 on success (an empty diamond included), 2 for usage or
//! input errors, 3 for runtime failures such as I/O or an exceeded budget.

mod output;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use diamond_core::bounds::{
    dcld_density_threshold, expected_marked_fraction, hcld_average_threshold, kappa_lower_bound, kappa_upper_bound,
    max_cells_without_diamond, max_sum_without_diamond, min_size_for_carats, BoundInputs, BoundKind, BoundReport,
    Guarantee,
};
use diamond_core::datagen::{
    gen_adversarial_chain, gen_full_binary_cube, gen_power_cube, perturb_missing, robustness_experiment, PerturbSpec,
    PowerGenSpec,
};
use diamond_core::dcld::{dcld_diamond_heuristic, dcld_local_search, ShapeLimit};
use diamond_core::oracle::{brute_force_dcld, brute_force_diamond, OracleBudget};
use diamond_core::{
    dice_with, ingest_csv, kappa, write_csv, AggregatorKind, CaratVector, ColumnRef, Cube, CubeStats, DiceOptions,
    FactSchema, PassMode, PassStorage, SearchMethod,
};
use serde::Serialize;

use crate::output::{sibling, write_atomic, write_json, Run};

/// Temporary pass files go here instead of beside the output.
const TMPDIR_ENV: &str = "DIAMOND_TMPDIR";

/// Cubes up to this many cells are diced in memory under `--storage auto`.
const MEMORY_BUDGET_CELLS: usize = 64 << 20;

#[derive(Parser)]
#[command(name = "diamond", version, about = "Diamond dicing of fact tables")]
struct Cli {
    /// Worker threads for the parallel paths (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Re-encode a fact table in canonical form (duplicates merged).
    Ingest(IngestArgs),
    /// Compute the k-carat diamond.
    Dice(DiceArgs),
    /// Find the carat number κ.
    Kappa(KappaArgs),
    /// Dense subcube with at most p values per dimension.
    Dcld(DcldArgs),
    /// Closed-form bounds for a cube or a hypothetical shape.
    Bounds(BoundsArgs),
    /// Generate a synthetic fact table.
    Gen(GenArgs),
    /// Drop each fact independently with a fixed probability.
    Perturb(PerturbArgs),
    /// Distribution of κ under repeated perturbation.
    Robustness(RobustnessArgs),
}

#[derive(Args, Serialize)]
struct InputArgs {
    /// Fact-table CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Dimension columns by name or index (default: all but the measure).
    #[arg(long, value_delimiter = ',')]
    dims: Vec<String>,
    /// Measure column by name or index (default: every fact weighs 1).
    #[arg(long)]
    measure: Option<String>,
}

impl InputArgs {
    fn load(&self, run: &mut Run) -> Result<Cube, Failure> {
        let schema = FactSchema::new(
            self.dims.iter().map(|d| ColumnRef::parse(d)).collect(),
            self.measure.as_deref().map(ColumnRef::parse),
        );
        let file = File::open(&self.input)
            .with_context(|| format!("opening {}", self.input.display()))
            .map_err(Failure::input)?;
        let cube = ingest_csv(BufReader::new(file), &schema)
            .with_context(|| format!("reading {}", self.input.display()))
            .map_err(Failure::input)?;
        run.input(&self.input);
        Ok(cube)
    }

    fn measure_name(&self) -> &str {
        self.measure.as_deref().filter(|m| m.parse::<usize>().is_err()).unwrap_or("measure")
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Agg {
    Count,
    Sum,
}

impl From<Agg> for AggregatorKind {
    fn from(a: Agg) -> Self {
        match a {
            Agg::Count => AggregatorKind::Count,
            Agg::Sum => AggregatorKind::Sum,
        }
    }
}

#[derive(Args, Serialize)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    output: PathBuf,
    /// Stats JSON (default: `<output stem>.stats.json`).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Storage {
    Auto,
    Memory,
    Files,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Streaming,
    Partitioned,
}

#[derive(Args, Serialize)]
struct DiceArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "count")]
    agg: Agg,
    /// One value for every dimension or one per dimension, comma-separated.
    #[arg(long)]
    carats: String,
    #[arg(long)]
    output: PathBuf,
    /// Trace CSV (default: `<output stem>.trace.csv`).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Stats JSON (default: `<output stem>.stats.json`).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Cross-check against exhaustive search; refuses cubes over budget.
    #[arg(long)]
    oracle: bool,
    #[arg(long, value_enum, default_value = "auto")]
    storage: Storage,
    #[arg(long, value_enum, default_value = "streaming")]
    mode: Mode,
    /// Accept SUM over negative measures.
    #[arg(long)]
    allow_negative: bool,
}

#[derive(Args, Serialize)]
struct KappaArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "count")]
    agg: Agg,
    #[arg(long, default_value = "binary")]
    method: String,
    /// Bracket width at which a real-valued SUM search stops.
    #[arg(long)]
    tolerance: Option<f64>,
    /// KappaResult JSON.
    #[arg(long)]
    output: PathBuf,
    /// Also write the κ-diamond as CSV.
    #[arg(long)]
    diamond: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DcldArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "count")]
    agg: Agg,
    /// Most values kept per dimension: one value or one per dimension.
    #[arg(long)]
    p: String,
    /// `diamond` (dice-seeded trim) or `local` (swap search).
    #[arg(long, default_value = "diamond")]
    method: String,
    /// Subcube CSV.
    #[arg(long)]
    output: PathBuf,
    /// DcldResult JSON (default: `<output stem>.stats.json`).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Also compute the exhaustive optimum; refuses cubes over budget.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args, Serialize)]
struct BoundsArgs {
    /// Take shape, cell count and total from this fact table.
    #[arg(long, conflicts_with_all = ["shape", "cells", "sum"])]
    input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    dims: Vec<String>,
    #[arg(long)]
    measure: Option<String>,
    /// Attribute counts n_i, comma-separated.
    #[arg(long, value_delimiter = ',')]
    shape: Vec<usize>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    sum: Option<f64>,
    #[arg(long, value_enum, default_value = "count")]
    agg: Agg,
    #[arg(long)]
    carats: Option<String>,
    /// Per-dimension limit for the DCLD density threshold.
    #[arg(long)]
    p: Option<usize>,
    /// Zeta exponent s for the expected first-pass marking.
    #[arg(long)]
    skew: Option<f64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GenKind {
    Power,
    Chain,
    Binary,
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "power")]
    kind: GenKind,
    /// Power: attribute counts per dimension.
    #[arg(long, value_delimiter = ',')]
    shape: Vec<usize>,
    /// Power: exponent a (1 is uniform).
    #[arg(long, default_value_t = 1.0)]
    skew: f64,
    /// Power: distinct facts to draw.
    #[arg(long)]
    facts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Chain length or binary-cube dimension count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct PerturbArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Probability that a fact is dropped.
    #[arg(long)]
    p_missing: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct RobustnessArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "count")]
    agg: Agg,
    /// Drop probabilities, one column each.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03,0.04,0.05")]
    probs: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Table CSV: one row per κ, one count column per probability.
    #[arg(long)]
    output: PathBuf,
}

/// An error tagged with the exit status it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }
}

impl From<diamond_core::Error> for Failure {
    fn from(e: diamond_core::Error) -> Self {
        if e.is_runtime() {
            Failure::runtime(e)
        } else {
            Failure::input(e)
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = set_threads(n) {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Ingest(a) => run_ingest(a),
        Command::Dice(a) => run_dice(a),
        Command::Kappa(a) => run_kappa(a),
        Command::Dcld(a) => run_dcld(a),
        Command::Bounds(a) => run_bounds(a),
        Command::Gen(a) => run_gen(a),
        Command::Perturb(a) => run_perturb(a),
        Command::Robustness(a) => run_robustness(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> anyhow::Result<()> {
    if n == 0 {
        anyhow::bail!("--threads must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(n: usize) -> anyhow::Result<()> {
    if n > 1 {
        eprintln!("warning: built without the parallel feature; running on one thread");
    }
    Ok(())
}

fn write_cube(run: &mut Run, path: &Path, cube: &Cube, measure: &str) -> Outcome {
    write_atomic(path, |w| Ok(write_csv(cube, w, measure)?)).map_err(Failure::runtime)?;
    run.output(path);
    Ok(())
}

fn write_json_output<T: Serialize>(run: &mut Run, path: &Path, value: &T) -> Outcome {
    write_json(path, value).map_err(Failure::runtime)?;
    run.output(path);
    Ok(())
}

fn finish(run: Run, primary: &Path, summary: String) -> Outcome {
    let manifest = run.finish(primary).map_err(Failure::runtime)?;
    println!("{summary}; manifest {}", manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct DimensionCount<'a> {
    dimension: &'a str,
    retained: usize,
}

#[derive(Serialize)]
struct CubeSummary<'a> {
    cells: usize,
    retained: Vec<DimensionCount<'a>>,
    density: f64,
    total_sum: f64,
}

impl<'a> CubeSummary<'a> {
    fn of(cube: &'a Cube) -> Self {
        let stats = cube.stats();
        Self {
            cells: cube.cell_count(),
            retained: cube
                .dims()
                .iter()
                .zip(&stats.shape)
                .map(|(d, &n)| DimensionCount {
                    dimension: d.name(),
                    retained: n,
                })
                .collect(),
            density: stats.density,
            total_sum: stats.total_sum,
        }
    }
}

fn run_ingest(a: &IngestArgs) -> Outcome {
    let mut run = Run::new("ingest", a);
    let cube = a.input.load(&mut run)?;
    write_cube(&mut run, &a.output, &cube, a.input.measure_name())?;
    let stats = a.stats.clone().unwrap_or_else(|| sibling(&a.output, "stats.json"));
    write_json_output(&mut run, &stats, &CubeSummary::of(&cube))?;
    finish(run, &a.output, format!("ingested {} cells", cube.cell_count()))
}

#[derive(Serialize)]
struct DiceStats<'a> {
    agg: AggregatorKind,
    carats: &'a [f64],
    passes: usize,
    deleting_passes: usize,
    converged: bool,
    input_cells: usize,
    #[serde(flatten)]
    diamond: CubeSummary<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_agrees: Option<bool>,
}

fn pass_dir(output: &Path) -> PathBuf {
    if let Some(dir) = std::env::var_os(TMPDIR_ENV) {
        return PathBuf::from(dir);
    }
    match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
        _ => PathBuf::from("."),
    }
}

fn run_dice(a: &DiceArgs) -> Outcome {
    let mut run = Run::new("dice", a);
    let cube = a.input.load(&mut run)?;
    let agg = AggregatorKind::from(a.agg);
    let carats = CaratVector::parse(&a.carats, cube.dim_count())?;
    let files = PassStorage::Files {
        dir: Some(pass_dir(&a.output)),
    };
    let storage = match a.storage {
        Storage::Memory => PassStorage::Memory,
        Storage::Files => files,
        Storage::Auto if cube.cell_count() <= MEMORY_BUDGET_CELLS => PassStorage::Memory,
        Storage::Auto => files,
    };
    let opts = DiceOptions {
        storage,
        mode: match a.mode {
            Mode::Streaming => PassMode::Streaming,
            Mode::Partitioned => PassMode::Partitioned,
        },
        allow_negative: a.allow_negative,
        ..Default::default()
    };
    let r = dice_with(&cube, &carats, agg, &opts)?;

    let oracle_agrees = if a.oracle {
        let expected = brute_force_diamond(&cube, &carats, agg, &OracleBudget::default())?;
        if !expected.same_cells(&r.diamond) {
            return Err(Failure::runtime(anyhow!(
                "oracle disagrees: {} cells from dicing, {} from exhaustive search",
                r.diamond.cell_count(),
                expected.cell_count()
            )));
        }
        Some(true)
    } else {
        None
    };

    write_cube(&mut run, &a.output, &r.diamond, a.input.measure_name())?;
    let trace = a.trace.clone().unwrap_or_else(|| sibling(&a.output, "trace.csv"));
    write_atomic(&trace, |w| {
        writeln!(w, "pass,cells_remaining")?;
        for (pass, cells) in r.cells_remaining() {
            writeln!(w, "{pass},{cells}")?;
        }
        Ok(())
    })
    .map_err(Failure::runtime)?;
    run.output(&trace);
    let stats = a.stats.clone().unwrap_or_else(|| sibling(&a.output, "stats.json"));
    let report = DiceStats {
        agg,
        carats: carats.as_slice(),
        passes: r.passes,
        deleting_passes: r.deleting_passes(),
        converged: r.converged,
        input_cells: cube.cell_count(),
        diamond: CubeSummary::of(&r.diamond),
        oracle_agrees,
    };
    write_json_output(&mut run, &stats, &report)?;
    run.passes = Some(r.passes);
    finish(
        run,
        &a.output,
        format!(
            "diamond {} of {} cells after {} passes ({} deleting)",
            r.diamond.cell_count(),
            cube.cell_count(),
            r.passes,
            r.deleting_passes()
        ),
    )
}

fn run_kappa(a: &KappaArgs) -> Outcome {
    let mut run = Run::new("kappa", a);
    let cube = a.input.load(&mut run)?;
    let method: SearchMethod = a.method.parse()?;
    let r = kappa(&cube, a.agg.into(), method, a.tolerance)?;
    write_json_output(&mut run, &a.output, &r)?;
    if let Some(path) = &a.diamond {
        write_cube(&mut run, path, &r.diamond, a.input.measure_name())?;
    }
    run.probes = Some(r.dices());
    finish(run, &a.output, format!("kappa {} after {} dices", r.kappa, r.dices()))
}

#[derive(Serialize)]
struct DcldReport<'a> {
    method: &'a str,
    #[serde(flatten)]
    result: &'a diamond_core::dcld::DcldResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_objective: Option<f64>,
}

fn run_dcld(a: &DcldArgs) -> Outcome {
    let mut run = Run::new("dcld", a);
    let cube = a.input.load(&mut run)?;
    let agg = AggregatorKind::from(a.agg);
    let limit = ShapeLimit::parse(&a.p, cube.dim_count())?;
    let result = match a.method.as_str() {
        "diamond" => dcld_diamond_heuristic(&cube, &limit, agg)?,
        "local" => dcld_local_search(&cube, &limit, agg)?,
        other => return Err(Failure::input(anyhow!("unknown dcld method '{other}' (diamond or local)"))),
    };
    let oracle_objective = if a.oracle {
        Some(brute_force_dcld(&cube, &limit, agg, &OracleBudget::default())?.objective)
    } else {
        None
    };
    write_cube(&mut run, &a.output, &result.subcube, a.input.measure_name())?;
    let stats = a.stats.clone().unwrap_or_else(|| sibling(&a.output, "stats.json"));
    let report = DcldReport {
        method: &a.method,
        result: &result,
        oracle_objective,
    };
    write_json_output(&mut run, &stats, &report)?;
    finish(
        run,
        &a.output,
        format!("subcube {:?} with {} cells, objective {}", result.shape, result.cells, result.objective),
    )
}

#[derive(Serialize)]
struct BoundsOutput {
    stats: CubeStats,
    bounds: Vec<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_marked_fraction: Option<f64>,
}

fn run_bounds(a: &BoundsArgs) -> Outcome {
    let mut run = Run::new("bounds", a);
    let stats = match &a.input {
        Some(path) => {
            let input = InputArgs {
                input: path.clone(),
                dims: a.dims.clone(),
                measure: a.measure.clone(),
            };
            input.load(&mut run)?.stats()
        }
        None if a.shape.is_empty() => return Err(Failure::input(anyhow!("give --input or --shape"))),
        None => {
            let cells = a.cells.unwrap_or(0);
            CubeStats::from_shape(a.shape.clone(), cells, a.sum.unwrap_or(cells as f64))
        }
    };
    let agg = AggregatorKind::from(a.agg);
    let shape = stats.shape.clone();
    let carats = a.carats.as_deref().map(|c| CaratVector::parse(c, shape.len())).transpose()?;
    let mut inputs = BoundInputs {
        shape: Some(shape.clone()),
        carats: carats.as_ref().map(|c| c.as_slice().to_vec()),
        ..Default::default()
    };
    let report = |name: &str, value: f64, kind, guarantee, inputs: &BoundInputs| BoundReport {
        name: name.to_owned(),
        value,
        kind,
        guarantee,
        inputs: inputs.clone(),
    };

    let mut bounds = Vec::new();
    if let Some(k) = &carats {
        if shape.len() >= 2 {
            let v = min_size_for_carats(k, &shape)?;
            bounds.push(report("min_cells_for_diamond", v, BoundKind::Lower, Guarantee::NonExistence, &inputs));
        }
        let v = max_cells_without_diamond(&shape, k)? as f64;
        bounds.push(report("max_cells_without_diamond", v, BoundKind::Upper, Guarantee::Existence, &inputs));
        let v = max_sum_without_diamond(&shape, k)?;
        bounds.push(report("max_sum_without_diamond", v, BoundKind::Upper, Guarantee::Existence, &inputs));
        let v = hcld_average_threshold(&shape, k)?;
        bounds.push(report("heaviest_cube_average_threshold", v, BoundKind::Upper, Guarantee::Existence, &inputs));
        if let Some(p) = a.p {
            let mut with_p = inputs.clone();
            with_p.p = Some(p);
            let v = dcld_density_threshold(&shape, p, k.max().floor() as u64)?;
            bounds.push(report("densest_cube_density_threshold", v, BoundKind::Upper, Guarantee::Existence, &with_p));
        }
    }
    inputs.carats = None;
    inputs.cell_count = Some(stats.cell_count);
    inputs.total_sum = Some(stats.total_sum);
    bounds.push(report("kappa_lower_bound", kappa_lower_bound(&stats, agg), BoundKind::Lower, Guarantee::Existence, &inputs));
    bounds.push(report("kappa_upper_bound", kappa_upper_bound(&stats, agg), BoundKind::Upper, Guarantee::NonExistence, &inputs));

    let expected = match (a.skew, &carats) {
        (Some(s), Some(k)) => Some(expected_marked_fraction(&shape, k, s, 1 << 12)?),
        (Some(_), None) => return Err(Failure::input(anyhow!("--skew needs --carats"))),
        _ => None,
    };
    let n = bounds.len();
    write_json_output(
        &mut run,
        &a.output,
        &BoundsOutput {
            stats,
            bounds,
            expected_marked_fraction: expected,
        },
    )?;
    finish(run, &a.output, format!("{n} bounds"))
}

fn run_gen(a: &GenArgs) -> Outcome {
    let mut run = Run::new("gen", a);
    let cube = match a.kind {
        GenKind::Power => {
            let facts = a.facts.ok_or_else(|| Failure::input(anyhow!("power generation needs --facts")))?;
            gen_power_cube(&PowerGenSpec {
                shape: a.shape.clone(),
                skew: a.skew,
                facts,
                seed: a.seed,
            })?
        }
        GenKind::Chain => gen_adversarial_chain(a.n.ok_or_else(|| Failure::input(anyhow!("chain needs --n")))?)?,
        GenKind::Binary => gen_full_binary_cube(a.n.ok_or_else(|| Failure::input(anyhow!("binary cube needs --n")))?)?,
    };
    write_cube(&mut run, &a.output, &cube, "measure")?;
    write_json_output(&mut run, &sibling(&a.output, "spec.json"), a)?;
    finish(run, &a.output, format!("generated {} cells, shape {:?}", cube.cell_count(), cube.shape()))
}

fn run_perturb(a: &PerturbArgs) -> Outcome {
    let mut run = Run::new("perturb", a);
    let cube = a.input.load(&mut run)?;
    let spec = PerturbSpec {
        p_missing: a.p_missing,
        seed: a.seed,
    };
    let out = perturb_missing(&cube, &spec)?;
    write_cube(&mut run, &a.output, &out, a.input.measure_name())?;
    write_json_output(&mut run, &sibling(&a.output, "spec.json"), &spec)?;
    finish(run, &a.output, format!("kept {} of {} cells", out.cell_count(), cube.cell_count()))
}

fn run_robustness(a: &RobustnessArgs) -> Outcome {
    let mut run = Run::new("robustness", a);
    let cube = a.input.load(&mut run)?;
    let table = robustness_experiment(&cube, &a.probs, a.trials, a.seed, a.agg.into())?;
    write_atomic(&a.output, |w| Ok(w.write_all(table.to_csv().as_bytes())?)).map_err(Failure::runtime)?;
    run.output(&a.output);
    write_json_output(&mut run, &sibling(&a.output, "spec.json"), &table)?;
    run.probes = Some(a.probs.len() * a.trials);
    finish(run, &a.output, format!("unperturbed kappa {}; {} trials per probability", table.base_kappa, a.trials))
}
