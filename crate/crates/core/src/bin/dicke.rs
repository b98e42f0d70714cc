use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dicke_boa::config::RunConfig;
use dicke_boa::experiments::CanonicalCase;
use dicke_boa::pipeline::*;
use dicke_boa::Result;

#[derive(Parser)]
#[command(name = "dicke", version, about = "Exact spectrum and Born-Oppenheimer band analysis of the Dicke model")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Canonical parameter set used as the base configuration.
    #[arg(long, value_enum, global = true)]
    case: Option<Case>,

    /// TOML configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV files and run.json.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Exact spectrum with convergence flags.
    Diag,
    /// Peres lattices of J_z', a†a and J_z with semiclassical curves.
    Peres,
    /// Band weights and participation ratios.
    Npc,
    /// Band requantization against the exact spectrum.
    Requant,
    /// Requantization error against system size.
    Scaling,
    /// Two-mode harmonic baseline.
    Harmonic,
    /// Every experiment above.
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Case {
    A,
    B,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    omega: Option<f64>,
    #[arg(long, global = true)]
    omega0: Option<f64>,
    /// Coupling in units of the critical coupling.
    #[arg(long = "coupling-ratio-f", global = true, conflicts_with = "gamma")]
    coupling_ratio_f: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    j: Option<f64>,
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    maslov_index: Option<u32>,
    /// Highest analysed energy, in units of jω0.
    #[arg(long, global = true, allow_negative_numbers = true)]
    e_ceiling: Option<f64>,
    /// Error-statistics window in units of jω0, as `lo,hi`.
    #[arg(long, global = true, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<(f64, f64)>,
    #[arg(long, global = true, value_delimiter = ',')]
    j_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    #[arg(long, global = true)]
    npc_threshold: Option<f64>,
    #[arg(long, global = true)]
    guard_fraction: Option<f64>,
    #[arg(long, global = true)]
    tail_tolerance: Option<f64>,
    #[arg(long, global = true)]
    validity_threshold: Option<f64>,
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            omega => c.omega,
            omega0 => c.omega0,
            j => c.j,
            e_ceiling => c.e_ceiling,
            j_list => c.j_list,
            grid_points => c.grid_points,
            npc_threshold => c.tolerances.npc_threshold,
            guard_fraction => c.tolerances.guard_fraction,
            tail_tolerance => c.tolerances.tail_tolerance,
            validity_threshold => c.tolerances.validity_threshold,
        }
        if let Some(f) = self.coupling_ratio_f {
            c.coupling_ratio_f = Some(f);
            c.gamma = None;
        }
        if let Some(g) = self.gamma {
            c.gamma = Some(g);
            c.coupling_ratio_f = None;
        }
        if self.n_max.is_some() {
            c.n_max = self.n_max;
        }
        if self.maslov_index.is_some() {
            c.maslov_index = self.maslov_index;
        }
        if let Some((lo, hi)) = self.window {
            c.window = [lo, hi];
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, cli.case) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(Case::A)) => RunConfig::canonical(CanonicalCase::A),
        (None, Some(Case::B) | None) => RunConfig::canonical(CanonicalCase::B),
    };
    if cli.config.is_some() && cli.case.is_some() {
        log::warn!("--case is ignored when --config is given");
    }
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(cli)?;
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    let name = format!("{:?}", cli.command).to_lowercase();
    let mut manifest = Manifest::new(&name, &cfg)?;

    use Command::*;
    let needs_exact = matches!(cli.command, Diag | Peres | Npc | Requant | All);
    let analysis = if needs_exact { Some(exact_stage(&cfg)?) } else { None };
    let summary = &mut manifest.summary;
    if let Some(a) = &analysis {
        if matches!(cli.command, Diag | All) {
            summary.insert("diag".into(), write_diag(a, &cfg, out)?);
        }
        if matches!(cli.command, Npc | All) {
            summary.insert("npc".into(), write_npc(a, &cfg, out)?);
        }
        if matches!(cli.command, Peres | All) {
            summary.insert("peres".into(), write_peres(a, &cfg, out)?);
        }
        if matches!(cli.command, Requant | All) {
            summary.insert("requant".into(), write_requant(a, &cfg, out)?);
        }
    }
    if matches!(cli.command, Harmonic | All) {
        summary.insert("harmonic".into(), write_harmonic(analysis.as_ref(), &cfg, out)?);
    }
    if matches!(cli.command, Scaling | All) {
        let (runs, failed) = scaling_runs(&cfg);
        let (results, value) = write_scaling(&runs, &failed, &cfg, out)?;
        for r in &results {
            if let (Some(p), Some(fit)) = (r.points.first(), r.fit) {
                println!("maslov {}: alpha = {:.3} over {} sizes", p.maslov_index, fit.alpha, r.points.len());
            }
        }
        summary.insert("scaling".into(), value);
    }
    let path = manifest.write(out, started)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}
