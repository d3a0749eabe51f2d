use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use transferlab::classify::{classify, straube_probe, ClassifyConfig, Thresholds};
use transferlab::gallery::{gallery_entry, list_gallery};
use transferlab::io::{
    format_g17, matrix_to_string, write_curve_csv, write_density_csv, write_json,
};
use transferlab::montecarlo::{
    annealed_correlation, basin_survey, pairing, DEFAULT_BASIN_THRESHOLD, DEFAULT_N_AVG,
    DEFAULT_N_BURN,
};
use transferlab::spectral::{ergodic_decomposition, invariant_density, ErgodicDecomposition};
use transferlab::system::{system_from_json, validate_system, RandomSystem};
use transferlab::ulam::{build_ulam, build_ulam_mc, Partition, TransferMatrix};
use transferlab::{Result, TlError};

#[derive(Parser)]
#[command(
    name = "transferlab",
    about = "Ulam discretization, ergodic decomposition and operator-class probes for 1-D random maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the discretized transfer operator and write it per grid size
    Operator(RunArgs),
    /// Ergodic decomposition: component densities, periods, absorption
    Densities(RunArgs),
    /// Run the operator-class probes across the resolution ladder
    Classify(RunArgs),
    /// Monte Carlo survey of statistical basins
    Basins(RunArgs),
    /// Annealed correlation decay along the invariant density
    Correlate(RunArgs),
    /// Built-in example systems
    Gallery {
        #[command(subcommand)]
        action: GalleryCmd,
    },
}

#[derive(Subcommand)]
enum GalleryCmd {
    /// Print every gallery id with a one-line description
    List,
    /// Write a gallery entry's system definition as JSON
    Export { id: String },
}

#[derive(Args)]
struct RunArgs {
    /// Path to a system JSON file
    #[arg(long, conflicts_with = "gallery")]
    system: Option<PathBuf>,
    /// Built-in gallery id
    #[arg(long)]
    gallery: Option<String>,
    /// Comma-separated grid sizes (resolution ladder)
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Seed for Monte Carlo commands
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $TRANSFERLAB_OUT or ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gauss-Legendre order for kernel builds
    #[arg(long, default_value_t = 8)]
    quadrature: u32,
    /// Monte Carlo sample count (basins; forces a sampled build for operator)
    #[arg(long)]
    samples: Option<u64>,
    /// Cap on worker threads (output is identical for any cap)
    #[arg(long)]
    threads: Option<usize>,
    /// JSON file overriding probe thresholds
    #[arg(long)]
    threshold_file: Option<PathBuf>,
}

impl RunArgs {
    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("TRANSFERLAB_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn load_system(&self) -> Result<(String, RandomSystem)> {
        if let Some(id) = &self.gallery {
            let entry = gallery_entry(id)?;
            return Ok((id.clone(), entry.system));
        }
        let Some(path) = &self.system else {
            return Err(TlError::InvalidSpec(
                "one of --system or --gallery is required".into(),
            ));
        };
        if !path.exists() {
            return Err(TlError::InvalidSpec("system spec not found".into()));
        }
        let text = std::fs::read_to_string(path)?;
        let system = validate_system(system_from_json(&text)?)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "system".into());
        Ok((id, system))
    }

    fn grids(&self, default: &[usize]) -> Vec<usize> {
        self.grid.clone().unwrap_or_else(|| default.to_vec())
    }

    fn thresholds(&self) -> Result<Thresholds> {
        match &self.threshold_file {
            None => Ok(Thresholds::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Operator(a)
        | Command::Densities(a)
        | Command::Classify(a)
        | Command::Basins(a)
        | Command::Correlate(a) => a.threads,
        Command::Gallery { .. } => None,
    };
    if let Some(t) = threads {
        if t > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                TlError::UnknownId(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Operator(args) => cmd_operator(&args),
        Command::Densities(args) => cmd_densities(&args),
        Command::Classify(args) => cmd_classify(&args),
        Command::Basins(args) => cmd_basins(&args),
        Command::Correlate(args) => cmd_correlate(&args),
        Command::Gallery { action } => cmd_gallery(action),
    }
}

fn res_dir(out: &Path, id: &str, n: usize) -> Result<PathBuf> {
    let dir = out.join(id).join(format!("N{n}"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn build_for(args: &RunArgs, system: &RandomSystem, n: usize) -> Result<TransferMatrix> {
    build_ulam(system, Partition::new(n)?, args.quadrature)
}

fn cmd_operator(args: &RunArgs) -> Result<ExitCode> {
    let (id, system) = args.load_system()?;
    let out = args.out_dir();
    for n in args.grids(&[256]) {
        let part = Partition::new(n)?;
        let k = match args.samples {
            Some(s) if s > 0 => build_ulam_mc(&system, part, s)?,
            _ => build_ulam(&system, part, args.quadrature)?,
        };
        let dir = res_dir(&out, &id, n)?;
        let path = dir.join("operator.mtx");
        std::fs::write(&path, matrix_to_string(&k))?;
        println!(
            "N={n} nnz={} method={} max_row_defect={} -> {}",
            k.nnz(),
            k.build_method,
            format_g17(k.max_row_defect()),
            path.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn decomposition_json(
    decomp: &ErgodicDecomposition,
    warnings: &[String],
    has_transient: bool,
) -> serde_json::Value {
    json!({
        "components": decomp.components.iter().enumerate().map(|(ci, c)| json!({
            "support": c.support,
            "period": c.period,
            "density_file": format!("component_{ci}.csv"),
        })).collect::<Vec<_>>(),
        "transient_cells": decomp.transient_cells,
        "absorption_matrix_file": if has_transient { json!("absorption.csv") } else { serde_json::Value::Null },
        "maximal_support_reached": decomp.maximal_support_reached,
        "warnings": warnings,
    })
}

fn cmd_densities(args: &RunArgs) -> Result<ExitCode> {
    let (id, system) = args.load_system()?;
    let out = args.out_dir();
    for n in args.grids(&[256]) {
        let k = build_for(args, &system, n)?;
        let decomp = ergodic_decomposition(&k, 1e-12)?;
        let mut warnings = Vec::new();
        let (alpha, _) = straube_probe(&k, &[1.0 / 16.0, 0.25, 0.5], 2 * n)?;
        if alpha.iter().all(|&(_, a)| a >= 1.0 - 1e-3) {
            warnings.push(
                "Straube evidence is against (S): evolved mass concentrates on vanishing sets; \
                 the computed decomposition is a resolution artifact"
                    .to_string(),
            );
        }
        let dir = res_dir(&out, &id, n)?;
        for (ci, c) in decomp.components.iter().enumerate() {
            write_density_csv(&dir.join(format!("component_{ci}.csv")), &c.density)?;
        }
        let has_transient = !decomp.transient_cells.is_empty();
        if has_transient {
            let mut lines = String::from("cell");
            for ci in 0..decomp.components.len() {
                lines.push_str(&format!(",component_{ci}"));
            }
            lines.push('\n');
            for (ti, &cell) in decomp.transient_cells.iter().enumerate() {
                lines.push_str(&cell.to_string());
                for &w in &decomp.absorption[ti] {
                    lines.push(',');
                    lines.push_str(&format_g17(w));
                }
                lines.push('\n');
            }
            std::fs::write(dir.join("absorption.csv"), lines)?;
        }
        write_json(
            &dir.join("decomposition.json"),
            &decomposition_json(&decomp, &warnings, has_transient),
        )?;
        println!(
            "N={n} components={} transient_cells={} periods={:?}",
            decomp.components.len(),
            decomp.transient_cells.len(),
            decomp.components.iter().map(|c| c.period).collect::<Vec<_>>()
        );
        for w in &warnings {
            eprintln!("WARNING: {w}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(args: &RunArgs) -> Result<ExitCode> {
    let (id, system) = args.load_system()?;
    let out = args.out_dir();
    let config = ClassifyConfig {
        ladder: args.grids(&[64, 128, 256, 512]),
        quadrature: args.quadrature,
        thresholds: args.thresholds()?,
        ..ClassifyConfig::default()
    };
    let report = classify(&system, &id, &config)?;
    let dir = out.join(&id);
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join("classification.json"), &report.to_json())?;
    for curve in &report.curves {
        let cdir = res_dir(&out, &id, curve.resolution)?;
        write_curve_csv(&cdir.join(format!("{}.csv", curve.name)), ("n", "value"), curve.points.iter().cloned())?;
    }
    for p in &report.probes {
        println!("{:8} {}", p.class_tag.as_str(), p.verdict.as_str());
    }
    if !report.hierarchy_ok {
        eprintln!("error: hierarchy consistency check failed");
        return Ok(ExitCode::from(4));
    }
    println!("hierarchy_ok=true -> {}", dir.join("classification.json").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_basins(args: &RunArgs) -> Result<ExitCode> {
    let (id, system) = args.load_system()?;
    let out = args.out_dir();
    let n = *args.grids(&[256]).last().expect("grid");
    let part = Partition::new(n)?;
    let k = build_ulam(&system, part, args.quadrature)?;
    let decomp = ergodic_decomposition(&k, 1e-12)?;
    let samples = args.samples.unwrap_or(2000) as usize;
    let report = basin_survey(
        &system,
        part,
        &decomp,
        samples,
        DEFAULT_N_BURN,
        DEFAULT_N_AVG,
        DEFAULT_BASIN_THRESHOLD,
        args.seed,
    )?;
    let dir = res_dir(&out, &id, n)?;
    write_json(
        &dir.join("basins.json"),
        &json!({
            "n_samples": report.n_samples,
            "threshold": report.threshold,
            "fractions": report.fractions,
            "unassigned": report.unassigned,
            "counts": report.counts,
            "unassigned_count": report.unassigned_count,
            "seed": args.seed,
        }),
    )?;
    println!(
        "N={n} samples={} fractions={:?} unassigned={}",
        report.n_samples, report.fractions, report.unassigned
    );
    Ok(ExitCode::SUCCESS)
}

/// Mean-zero observable supported on the invariant density's support:
/// alternating signs over the support cells, centered against h.
fn support_battery(h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let support: Vec<usize> = (0..n).filter(|&i| h[i] > 1e-8).collect();
    let mut phi = vec![0.0f64; n];
    for (pos, &cell) in support.iter().enumerate() {
        phi[cell] = if pos % 2 == 0 { 1.0 } else { -1.0 };
    }
    let mass: f64 = support.iter().map(|&c| h[c]).sum();
    let mean = pairing(&phi, h) * n as f64 / mass;
    for &cell in &support {
        phi[cell] -= mean;
    }
    // psi: indicator of the first half of the support, centered the same way.
    let mut psi = vec![0.0f64; n];
    for (pos, &cell) in support.iter().enumerate() {
        if pos < support.len() / 2 {
            psi[cell] = 1.0;
        }
    }
    (phi, psi)
}

fn cmd_correlate(args: &RunArgs) -> Result<ExitCode> {
    let (id, system) = args.load_system()?;
    let out = args.out_dir();
    for n in args.grids(&[256]) {
        let k = build_for(args, &system, n)?;
        let h = invariant_density(&k, 1e-12, 200_000)?;
        let (phi, psi) = support_battery(&h);
        let fit = annealed_correlation(&k, &h, &phi, &psi, 50)?;
        let dir = res_dir(&out, &id, n)?;
        write_curve_csv(&dir.join("correlation.csv"), ("n", "value"), fit.curve.iter().cloned().enumerate())?;
        write_json(
            &dir.join("correlation_fit.json"),
            &json!({
                "c": fit.c,
                "rho": fit.rho,
                "r2": fit.r2,
                "fitted_points": fit.fitted_points,
            }),
        )?;
        println!(
            "N={n} rho={:.6} c={:.6} r2={:.4} fitted_points={}",
            fit.rho, fit.c, fit.r2, fit.fitted_points.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gallery(action: GalleryCmd) -> Result<ExitCode> {
    match action {
        GalleryCmd::List => {
            for entry in list_gallery() {
                let marker = if entry.exploratory { " [exploratory]" } else { "" };
                println!("{:36} {}{}", entry.id, entry.notes, marker);
            }
            Ok(ExitCode::SUCCESS)
        }
        GalleryCmd::Export { id } => {
            let entry = gallery_entry(&id)?;
            let out = std::env::var_os("TRANSFERLAB_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{id}.json"));
            std::fs::write(&path, transferlab::system::system_to_json(&entry.system)?)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
