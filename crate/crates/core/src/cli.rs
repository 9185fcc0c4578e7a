//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 parse or usage error, 3 guard
//! violation, 4 no periodic cycle within `--cmax`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::annealer::{anneal_seeds, trace_csv, AnnealOptions, Schedule, DEFAULT_LAYERS};
use crate::hamiltonian::{
    cluster_model, gen_stochastic_heisenberg, load_text, toric_model, HamError, Hamiltonian, HamiltonianFile,
};
use crate::solver_general::{solve_general, GeneralOptions, SolveError, SolveResult, DEFAULT_MAX_TERMS};
use crate::solver_local1d::{solve_local1d_cached, Local1dCache, Local1dOptions};
use crate::solver_periodic::{
    diagonal_grid, extended_scan_cached, solve_periodic_1d_cached, solve_periodic_1d_degenerate,
    solve_supercell_c1_cached, toric_crossing, toric_curvature_flip, PeriodicError, PeriodicResult, SupercellCache,
    DEFAULT_C_MAX,
};

/// Largest locality for which `--algo auto` picks the chain solver.
pub const AUTO_LOCAL1D_MAX_K: usize = 6;

#[derive(Parser, Debug)]
#[command(name = "stabgs", version, about = "Exact stabilizer ground states of Pauli Hamiltonians")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "STABGS_THREADS")]
    pub threads: Option<usize>,
    /// Write the run manifest here instead of stderr.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ground state of a finite Hamiltonian.
    Solve(SolveArgs),
    /// Ground state of an infinite chain or lattice.
    Periodic(PeriodicArgs),
    /// Phase labels over a parameter grid (CSV).
    Sweep(SweepArgs),
    /// Crossing and curvature-flip fields of the toric model along h_x = h_z.
    Transitions(TransitionArgs),
    /// Simulated annealing over Clifford circuits, compared with the exact solver.
    Anneal(AnnealArgs),
    /// Per-site timing of the chain solver (CSV).
    Bench(BenchArgs),
    /// Preparation circuit of the ground state (JSON).
    Export(SolveArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    Auto,
    Local1d,
    General,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub algo: Algo,
    /// Term limit for the general solver.
    #[arg(long, default_value_t = DEFAULT_MAX_TERMS)]
    pub max_terms: usize,
}

#[derive(Args, Debug)]
pub struct PeriodicArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_C_MAX)]
    pub cmax: usize,
    /// List every phase at the minimum energy.
    #[arg(long)]
    pub degenerate: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// `cluster` (J_y, h_y), `toric` (h_x, h_z), or a Hamiltonian file with `{p1}` / `{p2}` placeholders.
    #[arg(long)]
    pub model: String,
    /// `p1:start:stop:steps,p2:start:stop:steps`; the second axis may be omitted.
    #[arg(long)]
    pub grid: String,
    #[arg(long, default_value_t = DEFAULT_C_MAX)]
    pub cmax: usize,
    /// Rotation grid for extended scans: `diag:STEP` or `a0:a1:na,b0:b1:nb`.
    #[arg(long)]
    pub angles: Option<String>,
    /// Torus extent for lattice models, `AxB`.
    #[arg(long, default_value = "3x3")]
    pub dims: String,
}

#[derive(Args, Debug)]
pub struct TransitionArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value = "3x3")]
    pub dims: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainModel {
    Xxyyzz,
    Xxyy,
}

#[derive(Args, Debug)]
pub struct AnnealArgs {
    /// Fixed instance; without it every seed draws its own random chain.
    #[arg(long, conflicts_with = "model")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ChainModel>,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// `S` or `S1..S2` (inclusive).
    #[arg(long, default_value = "0")]
    pub seeds: String,
    #[arg(long, default_value_t = DEFAULT_LAYERS)]
    pub layers: usize,
    #[arg(long, default_value_t = 2500)]
    pub steps: usize,
    #[arg(long, default_value_t = 5.0)]
    pub t_start: f64,
    #[arg(long, default_value_t = 0.05)]
    pub t_end: f64,
    /// Random initial slots instead of identities.
    #[arg(long)]
    pub random_start: bool,
    /// Directory for per-seed `trace_<seed>.csv` files.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "xxyyzz")]
    pub model: ChainModel,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Parse(String),
    Guard(String),
    NoCycle(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Guard(_) => 3,
            CliError::NoCycle(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Parse(m) | CliError::Guard(m) | CliError::NoCycle(m) => m,
        }
    }
}

impl From<HamError> for CliError {
    fn from(e: HamError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Guard(e.to_string())
    }
}

impl From<PeriodicError> for CliError {
    fn from(e: PeriodicError) -> Self {
        match e {
            PeriodicError::NoCycleFound { .. } => CliError::NoCycle(e.to_string()),
            PeriodicError::Guard { .. } => CliError::Guard(e.to_string()),
            PeriodicError::Ham(h) => h.into(),
            other => CliError::Parse(other.to_string()),
        }
    }
}

/// What a command hands back: text for stdout plus the manifest fields.
pub struct Output {
    pub stdout: String,
    pub payload: Value,
    pub input_sha256: Option<String>,
    pub seeds: Vec<u64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command_line: Vec<String>,
    input_sha256: Option<&'a str>,
    seeds: &'a [u64],
    versions: Value,
    result: &'a Value,
    timing: Value,
}

struct Input {
    text: String,
    sha256: String,
}

fn read_input(path: &Path) -> Result<Input, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))?;
    let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{:02x}", b)).collect();
    let text = String::from_utf8(bytes).map_err(|_| CliError::Parse(format!("{}: not UTF-8", path.display())))?;
    Ok(Input { text, sha256 })
}

fn finite(file: HamiltonianFile) -> Result<Hamiltonian, CliError> {
    match file {
        HamiltonianFile::Finite(h) => Ok(h),
        _ => Err(CliError::Parse("expected a finite Hamiltonian ('qubits' header)".into())),
    }
}

fn pick_algo(algo: Algo, h: &Hamiltonian) -> Algo {
    match algo {
        Algo::Auto if h.k() <= AUTO_LOCAL1D_MAX_K => Algo::Local1d,
        Algo::Auto => Algo::General,
        a => a,
    }
}

fn solve_with(h: &Hamiltonian, args: &SolveArgs) -> Result<SolveResult, CliError> {
    Ok(match pick_algo(args.algo, h) {
        Algo::General => solve_general(h, &GeneralOptions { max_terms: args.max_terms, ..Default::default() })?,
        _ => solve_local1d_cached(h, &Local1dOptions::default(), &Local1dCache::new()).result,
    })
}

/// Drops the sign of a zero so empty sums print as `0`.
fn num(x: f64) -> f64 {
    x + 0.0
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_solve(args: &SolveArgs) -> Result<Output, CliError> {
    let input = read_input(&args.input)?;
    let h = finite(load_text(&input.text)?)?;
    let r = solve_with(&h, args)?;
    let payload = json!({
        "energy": num(r.energy),
        "generators": r.group.to_texts(),
        "algo": r.algorithm,
        "tie_break": r.tie_break_note,
    });
    Ok(Output { stdout: json_text(&payload), payload, input_sha256: Some(input.sha256), seeds: vec![] })
}

fn cmd_export(args: &SolveArgs) -> Result<Output, CliError> {
    let input = read_input(&args.input)?;
    let h = finite(load_text(&input.text)?)?;
    let r = solve_with(&h, args)?;
    let (full, added) = r.group.completed();
    let circuit = full.to_clifford_circuit().map_err(|e| CliError::Guard(e.to_string()))?;
    let payload = json!({
        "energy": num(r.energy),
        "generators": r.group.to_texts(),
        "completed": !added.is_empty(),
        "completion": added.iter().map(|p| p.to_text()).collect::<Vec<_>>(),
        "circuit": circuit,
    });
    Ok(Output { stdout: json_text(&payload), payload, input_sha256: Some(input.sha256), seeds: vec![] })
}

fn periodic_json(r: &PeriodicResult) -> Value {
    json!({
        "e_per_site": num(r.e_per_site),
        "supercell_c": r.supercell_c,
        "generators": r.generators_in_supercell.to_texts(),
        "phase_signature": r.phase_signature,
    })
}

fn cmd_periodic(args: &PeriodicArgs) -> Result<Output, CliError> {
    let input = read_input(&args.input)?;
    let payload = match load_text(&input.text)? {
        HamiltonianFile::Periodic(h) => {
            let cache = Local1dCache::new();
            if args.degenerate {
                let (all, truncated) = solve_periodic_1d_degenerate(&h, args.cmax, &cache)?;
                json!({
                    "e_per_site": num(all[0].e_per_site),
                    "phases": all.iter().map(periodic_json).collect::<Vec<_>>(),
                    "truncated": truncated,
                })
            } else {
                periodic_json(&solve_periodic_1d_cached(&h, args.cmax, &cache)?)
            }
        }
        HamiltonianFile::Supercell(h) => periodic_json(&solve_supercell_c1_cached(&h, &SupercellCache::new())?),
        HamiltonianFile::Finite(_) => {
            return Err(CliError::Parse("expected a 'period' or 'supercell' Hamiltonian".into()));
        }
    };
    Ok(Output { stdout: json_text(&payload), payload, input_sha256: Some(input.sha256), seeds: vec![] })
}

/// `name:start:stop:steps`; one step yields only `start`.
fn parse_axis(s: &str) -> Result<(String, Vec<f64>), CliError> {
    let bad = || CliError::Parse(format!("bad grid axis '{}', expected name:start:stop:steps", s));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let a: f64 = parts[1].parse().map_err(|_| bad())?;
    let b: f64 = parts[2].parse().map_err(|_| bad())?;
    let steps: usize = parts[3].parse().map_err(|_| bad())?;
    if steps == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let vals = (0..steps)
        .map(|i| if steps == 1 { a } else { a + (b - a) * i as f64 / (steps - 1) as f64 })
        .collect();
    Ok((parts[0].to_string(), vals))
}

fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    parse_axis(&format!("x:{}", s)).map(|a| a.1)
}

fn parse_dims(s: &str) -> Result<[usize; 2], CliError> {
    let bad = || CliError::Parse(format!("bad dims '{}', expected AxB", s));
    let (a, b) = s.split_once('x').ok_or_else(bad)?;
    Ok([a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?])
}

fn parse_angles(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    if let Some(step) = s.strip_prefix("diag:") {
        let step: f64 = step.parse().map_err(|_| CliError::Parse(format!("bad angle step '{}'", step)))?;
        if !(step > 0.0) {
            return Err(CliError::Parse("angle step must be positive".into()));
        }
        return Ok(diagonal_grid(step));
    }
    let (a, b) = s.split_once(',').ok_or_else(|| CliError::Parse(format!("bad angle grid '{}'", s)))?;
    let (alphas, betas) = (parse_range(a)?, parse_range(b)?);
    Ok(alphas.iter().flat_map(|&x| betas.iter().map(move |&y| (x, y))).collect())
}

/// Renders a float the way Rust prints it, so `{p1}` substitution round-trips.
fn fmt_f(x: f64) -> String {
    format!("{}", x)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<Output, CliError> {
    let mut axes = args.grid.split(',');
    let (n1, v1) = parse_axis(axes.next().unwrap_or(""))?;
    let (n2, v2) = match axes.next() {
        Some(a) => parse_axis(a)?,
        None => ("p2".to_string(), vec![0.0]),
    };
    if axes.next().is_some() {
        return Err(CliError::Parse("at most two grid axes".into()));
    }
    let angles = args.angles.as_deref().map(parse_angles).transpose()?;
    let dims = parse_dims(&args.dims)?;
    let template = match args.model.as_str() {
        "cluster" | "toric" => None,
        path => Some(read_input(Path::new(path))?),
    };
    let chain_cache = Local1dCache::new();
    let cell_cache = SupercellCache::new();
    let mut out = String::from("param1,param2,e_per_site,supercell_c,phase_signature");
    if angles.is_some() {
        out.push_str(",alpha,beta");
    }
    out.push('\n');
    let mut rows = Vec::new();
    for &p1 in &v1 {
        for &p2 in &v2 {
            let file = match (&template, args.model.as_str()) {
                (None, "cluster") => HamiltonianFile::Periodic(cluster_model(p1, p2)),
                (None, _) => HamiltonianFile::Supercell(toric_model(p1, p2, dims)),
                (Some(t), _) => load_text(&t.text.replace("{p1}", &fmt_f(p1)).replace("{p2}", &fmt_f(p2)))?,
            };
            let (r, ab) = match (file, &angles) {
                (HamiltonianFile::Periodic(h), None) => (solve_periodic_1d_cached(&h, args.cmax, &chain_cache)?, None),
                (HamiltonianFile::Supercell(h), None) => (solve_supercell_c1_cached(&h, &cell_cache)?, None),
                (HamiltonianFile::Supercell(h), Some(grid)) => {
                    let scan = extended_scan_cached(&h, grid, &cell_cache)?;
                    let best = scan.points[scan.best].clone();
                    (best.result, Some((best.alpha, best.beta)))
                }
                (HamiltonianFile::Periodic(_), Some(_)) => {
                    return Err(CliError::Parse("--angles applies to lattice models only".into()));
                }
                (HamiltonianFile::Finite(_), _) => {
                    return Err(CliError::Parse("sweep needs a 'period' or 'supercell' model".into()));
                }
            };
            let _ = write!(out, "{},{},{},{},{}", p1, p2, num(r.e_per_site), r.supercell_c, csv_field(&r.phase_signature));
            if let Some((a, b)) = ab {
                let _ = write!(out, ",{},{}", a, b);
            }
            out.push('\n');
            rows.push(json!({
                n1.as_str(): p1,
                n2.as_str(): p2,
                "e_per_site": num(r.e_per_site),
                "supercell_c": r.supercell_c,
                "phase_signature": r.phase_signature,
            }));
        }
    }
    let payload = json!({ "axes": [n1, n2], "rows": rows });
    Ok(Output { stdout: out, payload, input_sha256: template.map(|t| t.sha256), seeds: vec![] })
}

fn cmd_transitions(args: &TransitionArgs) -> Result<Output, CliError> {
    let dims = parse_dims(&args.dims)?;
    let cache = SupercellCache::new();
    let grid = diagonal_grid(args.step);
    let crossing = toric_crossing(dims, &grid, 0.0, 1.0, args.tol, &cache)?;
    let flip = toric_curvature_flip(dims, args.step, 1.0, 2.0, args.tol, &cache)?;
    let payload = json!({ "crossing": crossing, "curvature_flip": flip, "step": args.step, "tol": args.tol });
    Ok(Output { stdout: json_text(&payload), payload, input_sha256: None, seeds: vec![] })
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Parse(format!("bad seeds '{}', expected S or S1..S2", s));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.parse().map_err(|_| bad())?]),
    }
}

fn cmd_anneal(args: &AnnealArgs) -> Result<Output, CliError> {
    let seeds = parse_seeds(&args.seeds)?;
    let fixed = match &args.input {
        Some(p) => {
            let input = read_input(p)?;
            Some((finite(load_text(&input.text)?)?, input.sha256))
        }
        None => None,
    };
    if fixed.is_none() && (args.k < 2 || args.n < args.k) {
        return Err(CliError::Parse("random chains need n >= k >= 2".into()));
    }
    let with_zz = args.model.unwrap_or(ChainModel::Xxyyzz) == ChainModel::Xxyyzz;
    let opts = AnnealOptions {
        schedule: Schedule { t_start: args.t_start, t_end: args.t_end, steps: args.steps },
        layers: args.layers,
        random_start: args.random_start,
    };
    let cache = Local1dCache::new();
    let mut per_seed = Vec::new();
    let (mut ratio_sum, mut n_exact) = (0.0, 0usize);
    for &seed in &seeds {
        let h = match &fixed {
            Some((h, _)) => h.clone(),
            None => gen_stochastic_heisenberg(args.n, args.k, seed, with_zz),
        };
        let exact = solve_local1d_cached(&h, &Local1dOptions::default(), &cache).result.energy;
        let r = anneal_seeds(&h, &opts, &[seed]).remove(0);
        if let Some(dir) = &args.trace_dir {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
            let path = dir.join(format!("trace_{}.csv", seed));
            std::fs::write(&path, trace_csv(&r.trace)).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let ratio = if exact != 0.0 { r.best_energy / exact } else { 1.0 };
        let is_exact = (r.best_energy - exact).abs() <= 1e-9 * (1.0 + exact.abs());
        ratio_sum += ratio;
        n_exact += is_exact as usize;
        per_seed.push(json!({
            "seed": seed,
            "best_energy": num(r.best_energy),
            "exact_energy": num(exact),
            "ratio": ratio,
            "exact": is_exact,
            "accepted": r.accepted,
        }));
    }
    let payload = json!({
        "n": fixed.as_ref().map_or(args.n, |(h, _)| h.n_sites()),
        "layers": args.layers,
        "schedule": opts.schedule,
        "runs": per_seed,
        "mean_ratio": ratio_sum / seeds.len() as f64,
        "fraction_exact": n_exact as f64 / seeds.len() as f64,
    });
    Ok(Output { stdout: json_text(&payload), payload, input_sha256: fixed.map(|f| f.1), seeds })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<Output, CliError> {
    if args.k < 2 || args.n < args.k || args.repeat == 0 {
        return Err(CliError::Parse("bench needs n >= k >= 2 and repeat >= 1".into()));
    }
    let h = gen_stochastic_heisenberg(args.n, args.k, args.seed, args.model == ChainModel::Xxyyzz);
    let mut runs = Vec::new();
    let mut totals = Vec::new();
    let mut energy = 0.0;
    for _ in 0..args.repeat {
        let t = Instant::now();
        let out = solve_local1d_cached(&h, &Local1dOptions { cold_sites: true, ..Default::default() }, &Local1dCache::new());
        totals.push(t.elapsed().as_secs_f64());
        energy = out.result.energy;
        runs.push(out.stats);
    }
    let mut csv = String::from("site,frontier,seconds\n");
    let mut sites = Vec::new();
    for i in 0..runs[0].len() {
        let s = median(runs.iter().map(|r| r[i].seconds).collect());
        let _ = writeln!(csv, "{},{},{}", runs[0][i].m, runs[0][i].frontier, s);
        sites.push(json!({ "site": runs[0][i].m, "frontier": runs[0][i].frontier, "seconds": s }));
    }
    let total = median(totals);
    let _ = writeln!(csv, "total,,{}", total);
    let payload = json!({ "n": args.n, "k": args.k, "seed": args.seed, "energy": num(energy), "sites": sites, "total_seconds": total });
    Ok(Output { stdout: csv, payload, input_sha256: None, seeds: vec![args.seed] })
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Periodic(a) => cmd_periodic(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Transitions(a) => cmd_transitions(a),
        Command::Anneal(a) => cmd_anneal(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Export(a) => cmd_export(a),
    }
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(t) = cli.threads {
        // a second initialization only happens in tests; keep the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let start = Instant::now();
    let out = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.code();
        }
    };
    print!("{}", out.stdout);
    let manifest = Manifest {
        command_line: std::env::args().collect(),
        input_sha256: out.input_sha256.as_deref(),
        seeds: &out.seeds,
        versions: json!({ "stabgs": env!("CARGO_PKG_VERSION") }),
        result: &out.payload,
        timing: json!({ "wall_seconds": start.elapsed().as_secs_f64() }),
    };
    let text = serde_json::to_string(&manifest).expect("serializable");
    match &cli.manifest {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text + "\n") {
                eprintln!("error: {}: {}", p.display(), e);
                return 1;
            }
        }
        None => eprintln!("{}", text),
    }
    0
}
