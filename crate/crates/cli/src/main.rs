use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tvclt_cli::{check_identities, emit, load_config, run, run_cases, ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "tvclt", version, about = "Certify total-variation CLT bounds on exact grid densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding the config.
    #[arg(long, global = true, env = "TVCLT_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Output formats, overriding the config.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<Format>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "TVCLT_THREADS")]
    threads: Option<usize>,
    /// Seed for the random test functions, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every case and check, then write reports.
    Run { config: PathBuf },
    /// Run only the Stein and identity checks.
    CheckIdentities { config: PathBuf },
    /// Print the bound report of every sequence at one n.
    Bound {
        config: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Print the version.
    Version,
}

impl Cli {
    fn config(&self, path: &PathBuf) -> Result<ExperimentConfig> {
        let mut cfg = load_config(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        if !self.format.is_empty() {
            cfg.output.formats = self.format.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    execute(Cli::parse())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring thread pool")?;
    }
    let ok = |pass: bool| if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE };
    match &cli.command {
        Command::Version => {
            println!("tvclt {}", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config } => {
            let cfg = cli.config(config)?;
            let start = Instant::now();
            let report = run(&cfg);
            let files = emit(&report, &cfg.output.formats, &cfg.output.dir)
                .with_context(|| format!("writing reports to {}", cfg.output.dir.display()))?;
            for f in &report.failures {
                eprintln!("FAIL {f}");
            }
            eprintln!(
                "{} cases, {} failures, {} files in {} ({:.1}s)",
                report.cases.len(),
                report.failures.len(),
                files.len(),
                cfg.output.dir.display(),
                start.elapsed().as_secs_f64()
            );
            Ok(ok(report.passed))
        }
        Command::CheckIdentities { config } => {
            let cfg = cli.config(config)?;
            let summary = check_identities(&cfg);
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ok(summary.passed))
        }
        Command::Bound { config, n } => {
            let cfg = cli.config(config)?;
            let cases = run_cases(&cfg, &[*n]);
            println!("{}", serde_json::to_string_pretty(&cases)?);
            Ok(ok(cases.iter().all(|c| c.holds())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvclt::GridConfig;
    use tvclt_cli::to_toml;

    fn tiny(extent: f64, dir: &std::path::Path) -> PathBuf {
        let mut cfg = load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/suite.toml")).unwrap();
        cfg.n_values = vec![2, 3];
        cfg.sequences.retain(|s| s.name == "logistic_iid");
        cfg.grid = GridConfig { m: 1 << 11, extent_sigmas: extent };
        cfg.checks.identities = false;
        cfg.checks.smoothing = false;
        cfg.output.dir = dir.join("out");
        let path = dir.join("tiny.toml");
        std::fs::write(&path, to_toml(&cfg)).unwrap();
        path
    }

    fn exec(args: &[&str]) -> Result<ExitCode> {
        execute(Cli::try_parse_from(std::iter::once("tvclt").chain(args.iter().copied())).unwrap())
    }

    #[test]
    fn version_flag_and_subcommand() {
        let e = Cli::try_parse_from(["tvclt", "--version"]).err().unwrap();
        assert_eq!(e.kind(), clap::error::ErrorKind::DisplayVersion);
        assert_eq!(exec(&["version"]).unwrap(), ExitCode::SUCCESS);
    }

    #[test]
    fn flags_override_config() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tiny(16.0, tmp.path());
        let p = path.to_str().unwrap();
        let cli = Cli::try_parse_from(["tvclt", "run", p, "--format", "csv,json", "--seed", "7", "--out-dir", "elsewhere"]).unwrap();
        let cfg = cli.config(&path).unwrap();
        assert_eq!(cfg.output.formats, vec![Format::Csv, Format::Json]);
        assert_eq!(cfg.output.dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn exit_code_contract() {
        let tmp = tempfile::tempdir().unwrap();
        let good = tiny(16.0, tmp.path());
        assert_eq!(exec(&["run", good.to_str().unwrap(), "--format", "csv"]).unwrap(), ExitCode::SUCCESS);
        assert!(tmp.path().join("out/report.csv").is_file());
        assert!(!tmp.path().join("out/report.json").exists());
        assert_eq!(exec(&["bound", good.to_str().unwrap(), "--n", "4"]).unwrap(), ExitCode::SUCCESS);

        let bad = tiny(2.0, tmp.path());
        assert_eq!(exec(&["bound", bad.to_str().unwrap(), "--n", "2"]).unwrap(), ExitCode::FAILURE);
        assert!(exec(&["run", tmp.path().join("missing.toml").to_str().unwrap()]).is_err());
    }
}
