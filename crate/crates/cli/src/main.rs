use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use centerout::assignment::SolverChoice;
use centerout::experiments::{self, DfConfig, GcConfig};
use centerout::grid::DirectionMethod;
use centerout::io::{self, FitFile, VERSION};
use centerout::moreau::{step_f, DEFAULT_PROX_TOLERANCE};
use centerout::pipeline::{self, FitConfig};
use centerout::points::PointSet;
use centerout::ranks::{contour, sign_curves, sphere_mesh};
use centerout::Error;

const DEFAULT_LEVELS: [f64; 6] = [0.02, 0.20, 0.25, 0.50, 0.75, 0.90];

#[derive(Parser, Debug)]
#[command(name = "centerout", version, about = "Center-outward ranks, signs and quantile contours")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CENTEROUT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a sample: writes fit.json and table.csv.
    Fit(FitArgs),
    /// Evaluate a fitted map at the points of a CSV file.
    Eval(EvalArgs),
    /// Quantile contours and sign curves of a fit.
    Contours(ContourArgs),
    /// Glivenko-Cantelli decay experiment.
    Gc(GcArgs),
    /// Distribution-freeness experiment.
    Dftest(DfArgs),
    /// Mahalanobis ranks and signs against the center-outward ones.
    CompareEll(CompareArgs),
    /// Barycentric interpolation counterexample.
    Counterexample(CounterArgs),
}

#[derive(Args, Debug, Clone)]
struct GridOpts {
    /// Number of rings.
    #[arg(long = "n-r", requires = "n_s")]
    n_r: Option<usize>,
    /// Number of directions.
    #[arg(long = "n-s", requires = "n_r")]
    n_s: Option<usize>,
    /// Target n_S / n_R when the grid is chosen automatically.
    #[arg(long, default_value_t = 2.0)]
    ratio: f64,
    /// equal-angle, random-sphere or fibonacci-sphere.
    #[arg(long)]
    direction_method: Option<String>,
    #[arg(long, default_value = "auto")]
    solver: String,
    #[arg(long, default_value_t = 5)]
    max_retries: usize,
    #[arg(long, default_value_t = 0.1)]
    retry_factor: f64,
}

impl GridOpts {
    fn config(&self, seed: u64) -> anyhow::Result<FitConfig> {
        Ok(FitConfig {
            ratio: self.ratio,
            n_r: self.n_r,
            n_s: self.n_s,
            direction_method: self.direction_method.as_deref().map(str::parse::<DirectionMethod>).transpose()?,
            grid_seed: seed,
            solver: self.solver.parse::<SolverChoice>()?,
            max_retries: self.max_retries,
            retry_factor: self.retry_factor,
            ..FitConfig::default()
        })
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Sample CSV, one observation per row.
    #[arg(long, short)]
    input: PathBuf,
    /// Directory for fit.json and table.csv.
    #[arg(long, short)]
    output_dir: PathBuf,
    #[command(flatten)]
    grid: GridOpts,
    /// Seed for random directions, grid tie-breaking and sample jitter.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smoothing constant of the forward map (default: the largest valid one).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_PROX_TOLERANCE)]
    prox_tolerance: f64,
    /// Jitter repeated rows instead of failing certification.
    #[arg(long)]
    tie_break: bool,
    /// Skip the quantile map.
    #[arg(long)]
    no_quantile: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MapKind {
    /// Smoothed distribution function.
    Forward,
    /// Smoothed quantile function.
    Quantile,
    /// Forward map snapped to the grid rings.
    Step,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Points CSV.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "forward")]
    map: MapKind,
}

#[derive(Args, Debug)]
struct ContourArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Directory for contours.csv and signs.csv.
    #[arg(long, short)]
    output_dir: PathBuf,
    /// Comma-separated probability contents; an empty list writes nothing.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    levels: Option<Vec<f64>>,
    /// Vertices per contour.
    #[arg(long, default_value_t = 256)]
    mesh: usize,
    /// Number of equally spread sign directions (0 for none; both
    /// directions on the line).
    #[arg(long, default_value_t = 8)]
    sign_directions: usize,
    /// Points per sign curve.
    #[arg(long, default_value_t = 50)]
    sign_mesh: usize,
}

#[derive(Args, Debug)]
struct GcArgs {
    #[arg(long, default_value = "std-normal")]
    model: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "200,1000,4000")]
    sizes: Vec<usize>,
    /// Replicates per size.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long)]
    seed: u64,
    /// Fresh points for the smoothed sup surrogate (0 skips it).
    #[arg(long, default_value_t = 10_000)]
    sup_points: usize,
    #[command(flatten)]
    grid: GridOpts,
    /// report.csv; metadata goes next to it as report.meta.json.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DfArgs {
    #[arg(long = "n-r", default_value_t = 2)]
    n_r: usize,
    #[arg(long = "n-s", default_value_t = 3)]
    n_s: usize,
    #[arg(long, default_value_t = 20_000)]
    replications: usize,
    #[arg(long, value_delimiter = ',', default_value = "std-normal,fig2-sep4")]
    models: Vec<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    grid: GridOpts,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct CounterArgs {
    /// Optional JSON report.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_points(path: &Path) -> anyhow::Result<PointSet> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(io::read_sample_csv(BufReader::new(file))?)
}

fn read_fit(path: &Path) -> anyhow::Result<FitFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FitFile::from_json(&text)?)
}

fn cmd_fit(args: FitArgs) -> anyhow::Result<()> {
    let mut sample = read_points(&args.input)?;
    if args.tie_break {
        let (jittered, moved) = pipeline::jitter_duplicates(&sample, args.seed);
        if moved > 0 {
            warn!("jittered {moved} repeated rows");
        }
        sample = jittered;
    }
    let config = FitConfig {
        epsilon: args.epsilon,
        prox_tolerance: args.prox_tolerance,
        quantile: !args.no_quantile,
        ..args.grid.config(args.seed)?
    };
    let fit = pipeline::fit(&sample, &config)?;
    info!(
        "n = {}, grid {} x {} + {}, eps* = {:e}, {} retries",
        fit.grid.spec.n,
        fit.grid.spec.n_r,
        fit.grid.spec.n_s,
        fit.grid.spec.n_0,
        fit.certificate.as_ref().map_or(f64::NAN, |c| c.epsilon_star),
        fit.retries
    );
    let file = FitFile::from_fit(&fit, &config)?;
    fs::create_dir_all(&args.output_dir)?;
    let mut w = create(&args.output_dir.join("fit.json"))?;
    w.write_all(file.to_json()?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    io::write_table_csv(create(&args.output_dir.join("table.csv"))?, &fit.table)?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let file = read_fit(&args.fit)?;
    let points = read_points(&args.input)?;
    if points.dim() != file.d {
        bail!(Error::InvalidInput(format!("points have dimension {}, fit has {}", points.dim(), file.d)));
    }
    let out = match args.map {
        MapKind::Forward => file.forward.eval_batch(&points)?,
        MapKind::Quantile => match &file.quantile {
            Some(q) => q.eval_batch(&points)?,
            None => bail!(Error::InvalidInput("fit has no quantile map".into())),
        },
        MapKind::Step => {
            let rows = points.rows().map(|x| step_f(&file.forward, x, file.n_r)).collect::<Result<Vec<_>, _>>()?;
            PointSet::from_rows(&rows)?
        }
    };
    io::write_points_csv(create(&args.output)?, &out)?;
    Ok(())
}

fn cmd_contours(args: ContourArgs) -> anyhow::Result<()> {
    let file = read_fit(&args.fit)?;
    let Some(q) = &file.quantile else {
        bail!(Error::InvalidInput("fit has no quantile map".into()));
    };
    let levels = args.levels.unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
    if levels.is_empty() {
        info!("no levels requested");
        return Ok(());
    }
    let sets = levels.iter().map(|&l| contour(q, l, args.mesh, None)).collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(&args.output_dir)?;
    io::write_contours_csv(create(&args.output_dir.join("contours.csv"))?, &sets)?;
    if args.sign_directions > 0 {
        let dirs = sphere_mesh(file.d, 1.0, args.sign_directions)?;
        let curves = sign_curves(q, &dirs, args.sign_mesh)?;
        io::write_sign_curves_csv(create(&args.output_dir.join("signs.csv"))?, &curves)?;
    }
    Ok(())
}

fn cmd_gc(args: GcArgs) -> anyhow::Result<()> {
    let config = GcConfig {
        model: args.model,
        dim: args.dim,
        sizes: args.sizes,
        seeds: args.seeds,
        master_seed: args.seed,
        sup_points: args.sup_points,
        fit: args.grid.config(0)?,
    };
    let rows = experiments::gc(&config)?;
    io::write_gc_csv(create(&args.output)?, &rows)?;
    write_json(&args.output.with_extension("meta.json"), &json!({ "version": VERSION, "config": config }))?;
    Ok(())
}

fn cmd_dftest(args: DfArgs) -> anyhow::Result<()> {
    let config = DfConfig {
        n_r: args.n_r,
        n_s: args.n_s,
        replications: args.replications,
        models: args.models,
        master_seed: args.seed,
    };
    let report = experiments::dftest(&config)?;
    write_json(&args.output, &json!({ "version": VERSION, "config": config, "report": report }))
}

fn cmd_compare_ell(args: CompareArgs) -> anyhow::Result<()> {
    let fit = args.grid.config(0)?;
    let report = experiments::compare_ell(args.n, args.dim, args.seed, &fit)?;
    let config = json!({ "n": args.n, "dim": args.dim, "seed": args.seed, "fit": fit });
    write_json(&args.output, &json!({ "version": VERSION, "config": config, "report": report }))
}

fn cmd_counterexample(args: CounterArgs) -> anyhow::Result<()> {
    let report = experiments::counterexample()?;
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
    if let Some(path) = &args.output {
        write_json(path, &json!({ "version": VERSION, "report": report }))?;
    }
    if !report.pass {
        bail!(Error::Certification { epsilon_star: report.naive_epsilon_star, cycle: vec![] });
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Certification { .. } | Error::NotInterpolable(_)) => 2,
        Some(Error::SolverFailure(_)) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Contours(a) => cmd_contours(a),
        Command::Gc(a) => cmd_gc(a),
        Command::Dftest(a) => cmd_dftest(a),
        Command::CompareEll(a) => cmd_compare_ell(a),
        Command::Counterexample(a) => cmd_counterexample(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
