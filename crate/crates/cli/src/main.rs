use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dslt_core::estimator::{dslt_ladder, first_chaos_ladder, slt, Scheme};
use dslt_core::experiment::{
    emit_results, parse_config, parse_eps_list, run_clt_ladder, run_existence_sweep,
    with_thread_budget, write_csv, write_existence_csv, ExperimentConfig, OutputFormat, THREADS_ENV,
};
use dslt_core::fbm::{derive_seed, read_path, write_path, FbmGenerator, HurstModel, TimeGrid};
use dslt_core::moments::{chaos_coefficient_rational, ChaosCoefficient, PrefactorMode, MAX_CHAOS_ORDER};
use dslt_core::quad::{
    first_chaos_variance, lemma23_i_ratio, lemma23_ii_ratio, sigma_squared, v3_ac_factor,
    v3_b_factor, v3_factorized_limit, variance_pieces, MuConvention, QuadSpec,
};

/// Simulation, moments and limit experiments for the regularized derivative
/// of self-intersection local time of fractional Brownian motion.
#[derive(Parser)]
#[command(name = "dslt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write fBm sample paths as binary files.
    Gen(GenArgs),
    /// Evaluate the estimator on one path.
    Estimate(EstimateArgs),
    /// Run an ε-ladder of the scaled estimator with normality statistics.
    Clt(CltArgs),
    /// Probe L² existence across Hurst indices.
    Existence(ExistenceArgs),
    /// Evaluate limit constants and variance pieces by quadrature.
    Quadcheck(QuadArgs),
    /// Tabulate chaos coefficients.
    Chaos(ChaosArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    /// Time horizon.
    #[arg(long = "t")]
    horizon: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    /// Comma-separated mollifier widths.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// midpoint | trapezoid
    #[arg(long)]
    scheme: Option<Scheme>,
    /// signed | absolute
    #[arg(long)]
    mu_convention: Option<MuConvention>,
    /// paper | per-coordinate
    #[arg(long)]
    prefactor: Option<PrefactorMode>,
    /// Worker threads; defaults to the DSLT_THREADS environment variable,
    /// then to hardware parallelism.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

impl Common {
    /// Overlays the flags that were given on `cfg`.
    fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        let m = &cfg.model;
        cfg.model = HurstModel::first_order(
            self.hurst.unwrap_or(m.hurst()),
            self.dim.unwrap_or(m.dim()),
            self.horizon.unwrap_or(m.horizon()),
        )?;
        if let Some(n) = self.grid_n {
            cfg.grid_n = n;
        }
        if let Some(n) = self.paths {
            cfg.n_paths = n;
        }
        if let Some(e) = &self.eps {
            cfg.eps_ladder = parse_eps_list(e)?;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if let Some(c) = self.mu_convention {
            cfg.mu_convention = c;
        }
        if let Some(p) = self.prefactor {
            cfg.prefactor = p;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn config(&self) -> Result<ExperimentConfig> {
        self.apply(ExperimentConfig::default())
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Read the path from a file written by `gen` instead of simulating one.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated spatial offset for the local time itself.
    #[arg(long)]
    y: Option<String>,
}

#[derive(Args)]
struct CltArgs {
    #[command(flatten)]
    common: Common,
    /// Key-value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip the quadrature targets.
    #[arg(long)]
    no_quad: bool,
}

#[derive(Args)]
struct ExistenceArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated Hurst indices.
    #[arg(long, default_value = "0.25,0.4")]
    hursts: String,
}

#[derive(Args)]
struct QuadArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
}

#[derive(Args)]
struct ChaosArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Largest total order q listed.
    #[arg(long, default_value_t = 3)]
    max_order: u32,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            ))
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

fn gen(args: GenArgs) -> Result<()> {
    let cfg = args.common.config()?;
    let dir = args.common.out.clone().unwrap_or_else(|| PathBuf::from("paths"));
    std::fs::create_dir_all(&dir)?;
    let grid = TimeGrid::new(cfg.grid_n, cfg.model.horizon())?;
    let generator = FbmGenerator::new(&cfg.model, &grid)?;
    let n = args.common.paths.unwrap_or(1);
    for i in 0..n {
        let path = generator.generate(derive_seed(cfg.master_seed, i as u64));
        let file = dir.join(format!("path_{i:05}.fbm"));
        write_path(&path, BufWriter::new(File::create(&file)?))?;
        println!("{}", file.display());
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let cfg = args.common.config()?;
    let path = match &args.input {
        Some(p) => read_path(std::io::BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        ))?,
        None => {
            let grid = TimeGrid::new(cfg.grid_n, cfg.model.horizon())?;
            FbmGenerator::new(&cfg.model, &grid)?.generate(derive_seed(cfg.master_seed, 0))
        }
    };
    let y = match &args.y {
        Some(s) => parse_eps_list(s).context("parsing --y")?,
        None => vec![0.0; path.dim()],
    };
    let dslt = dslt_ladder(&path, &cfg.eps_ladder, cfg.scheme)?;
    let chaos = first_chaos_ladder(&path, &cfg.eps_ladder, cfg.prefactor, cfg.scheme)?;
    let mut rows = Vec::new();
    for (i, &eps) in cfg.eps_ladder.iter().enumerate() {
        rows.push((eps, dslt[i], chaos[i], slt(&path, eps, &y, cfg.scheme)?.value));
    }
    let mut out = sink(args.common.out.as_deref())?;
    match args.common.format {
        OutputFormat::Csv => {
            writeln!(out, "eps,dslt,first_chaos,slt")?;
            for (e, d, c, s) in rows {
                writeln!(out, "{e},{d},{c},{s}")?;
            }
        }
        OutputFormat::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|&(eps, dslt, first_chaos, slt)| {
                    serde_json::json!({"eps": eps, "dslt": dslt, "first_chaos": first_chaos, "slt": slt})
                })
                .collect();
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "seed": path.seed(),
                    "scheme": cfg.scheme.name(),
                    "rows": v,
                }))?
            )?;
        }
    }
    Ok(())
}

fn clt(args: CltArgs) -> Result<()> {
    let base = match &args.config {
        Some(p) => parse_config(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = args.common.apply(base)?;
    if args.no_quad {
        cfg.quad_targets = false;
    }
    // Incremental rows go to the CSV; JSON is written once at the end.
    let final_out = cfg.out.clone();
    if args.common.format == OutputFormat::Json {
        cfg.out = final_out.as_ref().map(|p| p.with_extension("partial.csv"));
    }
    let result = run_clt_ladder(&cfg)?;
    match final_out {
        Some(p) => {
            let written = emit_results(&result, args.common.format, &p)?;
            for w in written {
                eprintln!("wrote {}", w.display());
            }
        }
        None => match args.common.format {
            OutputFormat::Csv => write_csv(&result.rows, std::io::stdout().lock())?,
            OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&result)?),
        },
    }
    Ok(())
}

fn existence(args: ExistenceArgs) -> Result<()> {
    let cfg = args.common.config()?;
    let hursts = parse_eps_list(&args.hursts).context("parsing --hursts")?;
    let table = run_existence_sweep(&cfg, &hursts)?;
    let out = sink(args.common.out.as_deref())?;
    match args.common.format {
        OutputFormat::Csv => write_existence_csv(&table, out)?,
        OutputFormat::Json => {
            let mut out = out;
            writeln!(out, "{}", serde_json::to_string_pretty(&table)?)?;
        }
    }
    Ok(())
}

fn opt(r: dslt_core::Result<f64>) -> Option<f64> {
    r.ok()
}

fn quadcheck(args: QuadArgs) -> Result<()> {
    let mut common = args.common.clone();
    if common.eps.is_none() {
        common.eps = Some("1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8".into());
    }
    let cfg = common.config()?;
    let threads = cfg.resolved_threads()?;
    let m = &cfg.model;
    let spec = QuadSpec::with_tolerances(args.rel_tol, 1e-300);
    let sigma2 = sigma_squared(m).ok();
    let rows = with_thread_budget(threads, || {
        cfg.eps_ladder
            .iter()
            .map(|&eps| {
                let v = variance_pieces(eps, m, cfg.mu_convention, cfg.prefactor, &spec)?;
                let fc = first_chaos_variance(eps, m, cfg.mu_convention, cfg.prefactor, &spec)?;
                let s = v.scaled / v.total.max(f64::MIN_POSITIVE);
                Ok(serde_json::json!({
                    "eps": eps,
                    "v1": v.v1,
                    "v2": v.v2,
                    "v3": v.v3,
                    "total": v.total,
                    "quad_error": v.error,
                    "scaled_total": v.scaled,
                    "scaled_first_chaos": fc.value * s,
                    "lemma_i_ratio": opt(lemma23_i_ratio(eps, m.hurst(), m.dim())),
                    "lemma_ii_ratio": opt(lemma23_ii_ratio(eps, m.hurst(), m.dim())),
                    "b_factor": opt(v3_b_factor(m, eps)),
                    "ac_factor": opt(v3_ac_factor(m, eps)),
                    "v3_factorized": opt(v3_factorized_limit(m, eps)),
                }))
            })
            .collect::<dslt_core::Result<Vec<_>>>()
    })??;
    let mut out = sink(args.common.out.as_deref())?;
    match args.common.format {
        OutputFormat::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "hurst": m.hurst(),
                "dim": m.dim(),
                "horizon": m.horizon(),
                "mu_convention": cfg.mu_convention.name(),
                "prefactor": cfg.prefactor.name(),
                "sigma2": sigma2,
                "rows": rows,
            }))?
        )?,
        OutputFormat::Csv => {
            let cols = [
                "eps", "v1", "v2", "v3", "total", "quad_error", "scaled_total", "scaled_first_chaos",
                "lemma_i_ratio", "lemma_ii_ratio", "b_factor", "ac_factor", "v3_factorized",
            ];
            writeln!(out, "# sigma2 = {}", sigma2.map_or("NaN".into(), |s| s.to_string()))?;
            writeln!(out, "{}", cols.join(","))?;
            for r in &rows {
                let line: Vec<String> = cols
                    .iter()
                    .map(|c| r[c].as_f64().map_or("NaN".into(), |x| x.to_string()))
                    .collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
    }
    Ok(())
}

/// All multi-indices of length `dim` with total order `q`.
fn compositions(q: u32, dim: usize) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![q]];
    }
    (0..=q)
        .rev()
        .flat_map(|first| {
            compositions(q - first, dim - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn chaos(args: ChaosArgs) -> Result<()> {
    if args.dim == 0 {
        bail!("--dim must be positive");
    }
    if args.max_order == 0 || args.max_order > MAX_CHAOS_ORDER {
        bail!("--max-order must be in 1..={MAX_CHAOS_ORDER}");
    }
    let mut rows = Vec::new();
    for q in 1..=args.max_order {
        for multi in compositions(q, args.dim) {
            let rational = chaos_coefficient_rational(&multi)?;
            rows.push((ChaosCoefficient::new(multi)?, rational.to_string()));
        }
    }
    let mut out = sink(args.out.as_deref())?;
    match args.format {
        OutputFormat::Csv => {
            writeln!(out, "order,multi_index,rational_times_2pi_pow_half_dim,beta")?;
            for (c, r) in &rows {
                let idx: Vec<String> = c.q_multi.iter().map(u32::to_string).collect();
                writeln!(out, "{},{},{},{}", c.order(), idx.join(" "), r, c.beta)?;
            }
        }
        OutputFormat::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(c, r)| serde_json::json!({"q_multi": c.q_multi, "rational": r, "beta": c.beta}))
                .collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
        }
    }
    Ok(())
}

fn global_threads(common: Option<&Common>) -> Result<()> {
    let explicit = common.and_then(|c| c.threads);
    let cfg = ExperimentConfig {
        threads: explicit,
        ..ExperimentConfig::default()
    };
    let n = cfg
        .resolved_threads()
        .with_context(|| format!("resolving the thread budget ({THREADS_ENV})"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Gen(a) => Some(&a.common),
        Command::Estimate(a) => Some(&a.common),
        Command::Clt(a) => Some(&a.common),
        Command::Existence(a) => Some(&a.common),
        Command::Quadcheck(a) => Some(&a.common),
        Command::Chaos(_) => None,
    };
    global_threads(common)?;
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Estimate(a) => estimate(a),
        Command::Clt(a) => clt(a),
        Command::Existence(a) => existence(a),
        Command::Quadcheck(a) => quadcheck(a),
        Command::Chaos(a) => chaos(a),
    }
}
