use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use fraclat::config::{parse_document, parse_pairs, Format, Sources};
use fraclat::output::{render_json, ArtifactWriter};
use fraclat::{run, self_test_with, ExperimentConfig, ExperimentReport, SelfTestOptions};

/// Numerical experiments for the fractional discrete Laplacian.
#[derive(Debug, Parser)]
#[command(name = "fraclat", version)]
struct Cli {
    /// Experiment name (kernel-dump, apply, ucp-lattice, ucp-torus, slab-1d,
    /// slab-2d, transference, extension-trace, carleman-commutator,
    /// carleman-probe, boundary-bulk, inverse-sweep) or `self-test`.
    experiment: String,
    /// Parameters as key=value.
    params: Vec<String>,
    /// Flat JSON or TOML document with parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn print(report: &ExperimentReport) {
    for line in report.lines() {
        println!("{line}");
    }
    println!(
        "{}: {} of {} checks passed in {:.3} s",
        report.experiment,
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        report.wall_time_s
    );
}

fn main_inner(cli: Cli) -> Result<ExperimentReport> {
    if cli.experiment == "self-test" {
        let report = self_test_with(SelfTestOptions {
            seed: cli.seed.unwrap_or(0),
            ..SelfTestOptions::default()
        });
        if let Some(dir) = &cli.out {
            let mut w = ArtifactWriter::create(dir)?;
            w.write("report.json", &render_json(&report))?;
            w.finish()?;
        }
        return Ok(report);
    }
    let document = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_document(&text, Format::from_path(path))?
        }
        None => Default::default(),
    };
    let cfg = ExperimentConfig::assemble(Sources {
        experiment: Some(cli.experiment.clone()),
        document,
        pairs: parse_pairs(&cli.params)?,
        output_dir: cli.out.clone(),
        seed: cli.seed,
    })?;
    let report = run(&cfg)?;
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(report) => {
            print(&report);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
