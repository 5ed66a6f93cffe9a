//! Command-line entry points: `generate`, `run`, `compare` and `serve`.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 a run ended
//! without reaching `complete`.

mod compare;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use compare::{compare_reports, load_report, Comparison, ComparisonRow};

use crate::engine::{run, EngineError, FaultSchedule, RunOptions, RunResult};
use crate::fusion::{candidates_csv, heatmap_csv};
use crate::mission::MetricsReport;
use crate::world::{generate_scenario, load_scenario, save_scenario, ControllerMode, Scenario, ScenarioParams};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "AIDEDEX_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("incompatible reports: {0}")]
    IncompatibleReports(String),
    #[error("port in use: {0}")]
    PortInUse(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

#[derive(Debug, Parser)]
#[command(name = "aidedex", version, about = "Heterogeneous multi-robot counter-IED mission simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario file.
    Generate(GenerateArgs),
    /// Run one scenario for one or more seeds and write reports.
    Run(RunArgs),
    /// Compare two metrics reports.
    Compare(CompareArgs),
    /// Run a supervised mission behind the operator gateway.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct WorldArgs {
    /// Grid size as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size)]
    pub size: Option<(u32, u32)>,
    #[arg(long)]
    pub threats: Option<usize>,
    /// Fraction of cells inside buildings.
    #[arg(long)]
    pub indoor: Option<f64>,
    /// Obstacle probability for outdoor cells.
    #[arg(long)]
    pub obstacles: Option<f64>,
}

impl WorldArgs {
    fn given(&self) -> bool {
        self.size.is_some() || self.threats.is_some() || self.indoor.is_some() || self.obstacles.is_some()
    }

    pub fn params(&self, mode: ControllerMode) -> ScenarioParams {
        let mut p = ScenarioParams { controller_mode: mode, ..Default::default() };
        if let Some((w, h)) = self.size {
            p.width = w;
            p.height = h;
        }
        if let Some(n) = self.threats {
            p.threat_count = n;
        }
        if let Some(f) = self.indoor {
            p.indoor_fraction = f;
        }
        if let Some(f) = self.obstacles {
            p.obstacle_density = f;
        }
        p
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "centralized")]
    pub mode: ControllerMode,
    /// Output file; defaults to `<out dir>/scenario-<seed>.toml`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Scenario file. Mutually exclusive with the generation flags.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[command(flatten)]
    pub world: WorldArgs,
    /// Controller mode; defaults to the scenario's own.
    #[arg(long)]
    pub mode: Option<ControllerMode>,
    /// Fault schedule (TOML).
    #[arg(long)]
    pub faults: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub max_ticks: u64,
}

impl SourceArgs {
    /// The scenario for one seed: loaded (seed overridden) or generated.
    pub fn scenario(&self, seed: Option<u64>) -> Result<Scenario, CliError> {
        let mut s = match (&self.scenario, self.world.given()) {
            (Some(_), true) => return Err(CliError::Config("give either --scenario or generation flags, not both".into())),
            (Some(path), false) => {
                let mut s = load_scenario(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                if let Some(seed) = seed {
                    s.seed = seed;
                }
                s
            }
            (None, _) => {
                let p = self.world.params(self.mode.unwrap_or(ControllerMode::Centralized));
                generate_scenario(&p, seed.unwrap_or(1)).map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        if let Some(m) = self.mode {
            s.controller_mode = m;
        }
        Ok(s)
    }

    pub fn faults(&self) -> Result<FaultSchedule, CliError> {
        match &self.faults {
            Some(p) => Ok(FaultSchedule::load(p)?),
            None => Ok(FaultSchedule::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Single seed.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seed list: `1..32` (inclusive), `1..=32` or `1,4,9`.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<SeedList>,
    /// Phase transitions wait for operator approval (nobody approves in a headless run).
    #[arg(long)]
    pub supervised: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report file or run directory.
    pub a: PathBuf,
    pub b: PathBuf,
    /// Print the comparison as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Ticks per second; 0 runs unpaced.
    #[arg(long, default_value_t = 10.0)]
    pub pace: f64,
    /// Seconds to keep serving after the run ends.
    #[arg(long, default_value_t = 5.0)]
    pub linger: f64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let bad = || format!("size `{s}` is not WIDTHxHEIGHT");
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: u32 = w.trim().parse().map_err(|_| bad())?;
    let h: u32 = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let bad = || format!("seeds `{s}` is not A..B, A..=B or a comma list");
    let out: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(SeedList(out))
}

/// `--out`, else `$AIDEDEX_OUT`, else `./aidedex-out`.
pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf).or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("aidedex-out"))
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes the artifacts of one run into `dir`.
pub fn write_artifacts(dir: &Path, r: &RunResult) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    r.log.write_to(dir.join("events.jsonl"))?;
    let metrics = serde_json::to_string_pretty(&r.metrics).expect("metrics serialize");
    std::fs::write(dir.join("metrics.json"), metrics + "\n").map_err(|e| io(dir, e))?;
    std::fs::write(dir.join("heatmap.csv"), heatmap_csv(&r.heatmap)).map_err(|e| io(dir, e))?;
    std::fs::write(dir.join("candidates.csv"), candidates_csv(&r.candidates, r.heatmap.width())).map_err(|e| io(dir, e))?;
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<PathBuf, CliError> {
    let s = generate_scenario(&a.world.params(a.mode), a.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let path = match &a.out {
        Some(p) => p.clone(),
        None => out_dir(None).join(format!("scenario-{}.toml", a.seed)),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    save_scenario(&s, &path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    println!(
        "wrote {} ({}x{}, {} threats, {} mode, seed {})",
        path.display(),
        s.grid.width(),
        s.grid.height(),
        s.threats.len(),
        s.controller_mode,
        s.seed
    );
    Ok(path)
}

/// Runs every requested seed; returns the reports in seed order.
pub fn cmd_run(a: &RunArgs) -> Result<Vec<MetricsReport>, CliError> {
    let faults = a.source.faults()?;
    let out = out_dir(a.out.as_deref());
    let seeds: Vec<Option<u64>> = match (&a.seeds, a.seed) {
        (Some(list), _) => list.0.iter().copied().map(Some).collect(),
        (None, s) => vec![s],
    };
    let batch = seeds.len() > 1;
    let mut reports = Vec::new();
    for seed in seeds {
        let scenario = a.source.scenario(seed)?;
        let opts = RunOptions { max_ticks: a.source.max_ticks, supervised: a.supervised, faults: faults.clone(), models: None };
        let r = run(&scenario, opts)?;
        let dir = if batch { out.join(format!("seed-{}", scenario.seed)) } else { out.clone() };
        write_artifacts(&dir, &r)?;
        let m = &r.metrics;
        println!(
            "seed {:>4}  {:<11}  {:<10} ticks {:>5}  coverage {:.3}  recall {}  precision {}  -> {}",
            m.seed,
            m.mode,
            m.outcome,
            m.ticks,
            m.coverage,
            opt(m.recall),
            opt(m.precision),
            dir.display()
        );
        reports.push(r.metrics);
    }
    if batch {
        std::fs::create_dir_all(&out).map_err(|e| io(&out, e))?;
        std::fs::write(out.join("aggregate.csv"), aggregate_csv(&reports)).map_err(|e| io(&out, e))?;
        std::fs::write(out.join("summary.csv"), summary_csv(&reports)).map_err(|e| io(&out, e))?;
        println!("\n{}", summary_table(&reports));
    }
    Ok(reports)
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.3}"))
}

/// Numeric columns shared by the batch tables.
pub fn report_columns(m: &MetricsReport) -> Vec<(&'static str, Option<f64>)> {
    vec![
        ("complete", Some(if m.outcome == "complete" { 1.0 } else { 0.0 })),
        ("ticks", Some(m.ticks as f64)),
        ("phase_reached", Some(m.phase_reached.ordinal() as f64)),
        ("coverage", Some(m.coverage)),
        ("candidates", Some(m.candidates as f64)),
        ("declared", Some(m.declared as f64)),
        ("true_positives", Some(m.true_positives as f64)),
        ("recall", m.recall),
        ("precision", m.precision),
        ("false_candidates", Some(m.false_candidates as f64)),
        ("classification_accuracy", m.classification_accuracy),
        ("dismissed", Some(m.dismissed as f64)),
        ("messages_sent", Some(m.messages.sent as f64)),
        ("loss_rate", Some(m.messages.loss_rate)),
        ("robots_failed", Some(m.robots_failed as f64)),
    ]
}

/// One row per run.
pub fn aggregate_csv(reports: &[MetricsReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let names: Vec<&str> = report_columns(first).iter().map(|c| c.0).collect();
    let mut out = format!("seed,mode,outcome,{}\n", names.join(","));
    for m in reports {
        let vals: Vec<String> = report_columns(m).iter().map(|c| c.1.map_or(String::new(), |v| format!("{v}"))).collect();
        out += &format!("{},{},{},{}\n", m.seed, m.mode, m.outcome, vals.join(","));
    }
    out
}

/// Mean and sample standard deviation per metric, over runs where it is defined.
pub fn summary_stats(reports: &[MetricsReport]) -> Vec<(&'static str, usize, f64, f64)> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    let cols: Vec<Vec<Option<f64>>> = reports.iter().map(|m| report_columns(m).into_iter().map(|c| c.1).collect()).collect();
    report_columns(first)
        .iter()
        .enumerate()
        .map(|(j, (name, _))| {
            let xs: Vec<f64> = cols.iter().filter_map(|r| r[j]).collect();
            let n = xs.len();
            let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
            let sd = if n < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
            (*name, n, mean, sd)
        })
        .collect()
}

pub fn summary_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("metric,n,mean,sd\n");
    for (name, n, mean, sd) in summary_stats(reports) {
        out += &format!("{name},{n},{mean},{sd}\n");
    }
    out
}

fn summary_table(reports: &[MetricsReport]) -> String {
    let mut out = format!("{:<24} {:>4} {:>12} {:>12}\n", "metric", "n", "mean", "sd");
    for (name, n, mean, sd) in summary_stats(reports) {
        out += &format!("{name:<24} {n:>4} {mean:>12.4} {sd:>12.4}\n");
    }
    out
}

pub fn cmd_compare(a: &CompareArgs) -> Result<Comparison, CliError> {
    let ra = load_report(&a.a)?;
    let rb = load_report(&a.b)?;
    let c = compare_reports(&ra, &rb)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&c).expect("comparison serializes"));
    } else {
        print!("{}", c.table());
    }
    Ok(c)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| EXIT_OK),
        Command::Run(a) => cmd_run(a).map(|rs| if rs.iter().all(|r| r.outcome == "complete") { EXIT_OK } else { EXIT_INCOMPLETE }),
        Command::Compare(a) => cmd_compare(a).map(|_| EXIT_OK),
        Command::Serve(a) => crate::opserver::cmd_serve(a).map(|m| if m.outcome == "complete" { EXIT_OK } else { EXIT_INCOMPLETE }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_and_seed_syntax() {
        assert_eq!(parse_size("50x40"), Ok((50, 40)));
        assert!(parse_size("50").is_err());
        assert!(parse_size("0x5").is_err());
        assert!(parse_size("ax5").is_err());
        assert_eq!(parse_seeds("1..32").unwrap().0.len(), 32);
        assert_eq!(parse_seeds("3..=5").unwrap().0, vec![3, 4, 5]);
        assert_eq!(parse_seeds("4, 9").unwrap().0, vec![4, 9]);
        assert!(parse_seeds("5..1").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with(["aidedex", "generate", "--size", "fifty"]), EXIT_CONFIG);
        assert_eq!(main_with(["aidedex", "bogus"]), EXIT_CONFIG);
    }

    #[test]
    fn stats() {
        let s = summary_stats(&[]);
        assert!(s.is_empty());
    }
}
