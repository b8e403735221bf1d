//! Command-line entry point: one subcommand per experiment, each reading
//! a JSON config and writing CSV tables (plus SVG plots) to an output
//! directory. Exit codes: 0 success, 2 configuration error, 3 numerical
//! failure.

use clap::{Args, Parser, Subcommand};
use fraclod_cli::config::{load_config, ExperimentConfig};
use fraclod_cli::svg::emit_svg_plot;
use fraclod_cli::table::{emit_csv, Cell, ResultTable};
use fraclod_cli::{drivers, CliError};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "fraclod",
    about = "Multiscale finite-element studies for fractured 2D media",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/SVG files (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Integer factor shrinking mesh resolutions for fast runs.
    #[arg(long, default_value_t = 1)]
    scale: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Dual-basis norms over degenerating arc domains.
    DualNorms(RunArgs),
    /// Corrector decay rings for both interpolation variants.
    Decay(RunArgs),
    /// Elliptic convergence study with a coarse-FEM contrast column.
    Convergence(RunArgs),
    /// Error versus patch size and classification threshold.
    PatchStudy(RunArgs),
    /// Wave upscaling errors against a fine reference trajectory.
    Wave(RunArgs),
    /// Mesh statistics per refinement level.
    MeshInfo(RunArgs),
}

fn main() {
    let cli = Cli::parse();
    let (args, expected) = match &cli.command {
        Command::DualNorms(a) => (a, "dual_norm_table"),
        Command::Decay(a) => (a, "decay_demo"),
        Command::Convergence(a) => (a, "convergence"),
        Command::PatchStudy(a) => (a, "patch_study"),
        Command::Wave(a) => (a, "wave"),
        Command::MeshInfo(a) => (a, "mesh_info"),
    };
    match run(args, expected) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(args: &RunArgs, expected_kind: &str) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    if config.kind_name() != expected_kind {
        return Err(CliError::Config(format!(
            "config kind '{}' does not match the '{}' subcommand",
            config.kind_name(),
            expected_kind
        )));
    }
    if args.scale == 0 || !args.scale.is_power_of_two() {
        return Err(CliError::Config(format!(
            "--scale must be a positive power of two, got {}",
            args.scale
        )));
    }
    config.apply_scale(args.scale);
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;

    match &config {
        ExperimentConfig::DualNormTable(c) => {
            let table = drivers::run_dual_norm_table(c)?;
            emit_csv(&table, args.out.join("dual_norms.csv"))?;
            emit_svg_plot(
                &table,
                "a",
                &["psi1", "psi2"],
                true,
                true,
                args.out.join("dual_norms.svg"),
            )?;
        }
        ExperimentConfig::DecayDemo(c) => {
            let table = drivers::run_decay_demo(c)?;
            emit_csv(&table, args.out.join("decay.csv"))?;
            let plot = pivot_decay(&table);
            let columns: Vec<&str> = plot.columns().iter().skip(1).map(|s| s.as_str()).collect();
            emit_svg_plot(
                &plot,
                "layer",
                &columns,
                false,
                true,
                args.out.join("decay.svg"),
            )?;
        }
        ExperimentConfig::Convergence(c) => {
            let table = drivers::run_convergence_with_outputs(c, Some(&args.out))?;
            emit_csv(&table, args.out.join("convergence.csv"))?;
            emit_svg_plot(
                &table,
                "h",
                &["lod_error", "fem_error"],
                true,
                true,
                args.out.join("convergence.svg"),
            )?;
        }
        ExperimentConfig::PatchStudy(c) => {
            let table = drivers::run_patch_study(c)?;
            emit_csv(&table, args.out.join("patch_study.csv"))?;
            let plot = pivot_patch_study(&table);
            let columns: Vec<&str> = plot.columns().iter().skip(1).map(|s| s.as_str()).collect();
            emit_svg_plot(
                &plot,
                "k",
                &columns,
                false,
                true,
                args.out.join("patch_study.svg"),
            )?;
        }
        ExperimentConfig::Wave(c) => {
            let table = drivers::run_wave_with_snapshots(c, Some(&args.out))?;
            emit_csv(&table, args.out.join("wave.csv"))?;
            let error_columns: Vec<String> = table
                .columns()
                .iter()
                .filter(|c| c.starts_with("error_"))
                .cloned()
                .collect();
            let refs: Vec<&str> = error_columns.iter().map(|s| s.as_str()).collect();
            emit_svg_plot(&table, "h", &refs, true, true, args.out.join("wave.svg"))?;
        }
        ExperimentConfig::MeshInfo(c) => {
            let table = drivers::run_mesh_info(c)?;
            emit_csv(&table, args.out.join("mesh_info.csv"))?;
        }
    }
    Ok(())
}

/// Long-to-wide pivot of the decay table: one energy column per variant.
fn pivot_decay(table: &ResultTable) -> ResultTable {
    let variants: Vec<String> = {
        let mut v = Vec::new();
        for row in table.rows() {
            if let Cell::Text(s) = &row[0] {
                if !v.contains(s) {
                    v.push(s.clone());
                }
            }
        }
        v
    };
    let mut columns = vec!["layer".to_string()];
    columns.extend(variants.iter().cloned());
    let refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut out = ResultTable::new(&refs);
    let layers: Vec<i64> = {
        let mut l = Vec::new();
        for row in table.rows() {
            if let Cell::Int(m) = row[1] {
                if !l.contains(&m) {
                    l.push(m);
                }
            }
        }
        l.sort_unstable();
        l
    };
    for &layer in &layers {
        let mut cells = vec![Cell::Int(layer)];
        for variant in &variants {
            let value = table
                .rows()
                .iter()
                .find(|r| {
                    matches!(&r[0], Cell::Text(s) if s == variant)
                        && matches!(r[1], Cell::Int(m) if m == layer)
                })
                .and_then(|r| r[2].as_f64());
            cells.push(value.map_or(Cell::Empty, Cell::Float));
        }
        out.push(cells);
    }
    out
}

/// Long-to-wide pivot of the patch study: one error column per
/// (variant, sigma) pair.
fn pivot_patch_study(table: &ResultTable) -> ResultTable {
    let mut series: Vec<(String, f64)> = Vec::new();
    for row in table.rows() {
        if let (Cell::Text(v), Some(sigma)) = (&row[0], row[1].as_f64()) {
            let key = (v.clone(), sigma);
            if !series.contains(&key) {
                series.push(key);
            }
        }
    }
    let labels: Vec<String> = series
        .iter()
        .map(|(v, s)| {
            if *s > 0.0 {
                format!("{v}_sigma{s}")
            } else {
                v.clone()
            }
        })
        .collect();
    let mut columns = vec!["k".to_string()];
    columns.extend(labels.iter().cloned());
    let refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut out = ResultTable::new(&refs);
    let ks: Vec<i64> = {
        let mut l = Vec::new();
        for row in table.rows() {
            if let Cell::Int(k) = row[2] {
                if !l.contains(&k) {
                    l.push(k);
                }
            }
        }
        l.sort_unstable();
        l
    };
    for &k in &ks {
        let mut cells = vec![Cell::Int(k)];
        for (variant, sigma) in &series {
            let value = table
                .rows()
                .iter()
                .find(|r| {
                    matches!(&r[0], Cell::Text(s) if s == variant)
                        && r[1].as_f64() == Some(*sigma)
                        && matches!(r[2], Cell::Int(kk) if kk == k)
                })
                .and_then(|r| r[3].as_f64());
            cells.push(value.map_or(Cell::Empty, Cell::Float));
        }
        out.push(cells);
    }
    out
}
