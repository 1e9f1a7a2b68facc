//! `cutfem run <case>` — convergence and stability studies for the cut
//! finite element toolkit.
//!
//! Every run writes three files into the output directory:
//!
//! * `results.csv` — one row per level with the pinned column schema;
//! * `convergence.svg` — log-log error plot with dashed reference slopes;
//! * `run.json` — flat metadata (case, resolved options, column semantics).
//!
//! Exit codes: 0 on success, 2 when `--check` was requested and an
//! acceptance check failed, 1 on any error (unknown case, malformed
//! config, invalid options, solver failure).

mod cases;
mod config;
mod svg;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cutfem", version, about = "Cut finite element experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a study case and write results.csv, convergence.svg and run.json
    Run {
        /// One of: poisson | interface | biharmonic | triharmonic | heat | sliver | extension-props
        case: String,
        /// Number of refinement levels (τ halvings for heat); at least 2
        #[arg(long)]
        levels: Option<usize>,
        /// Nitsche boundary/interface penalty
        #[arg(long)]
        beta: Option<f64>,
        /// Secondary Nitsche penalty weight
        #[arg(long)]
        gamma: Option<f64>,
        /// Element order, where the case supports a choice
        #[arg(long)]
        order: Option<usize>,
        /// Cut-cell quadrature subdivision depth
        #[arg(long)]
        depth: Option<usize>,
        /// Sliver width for the sliver case
        #[arg(long)]
        eps: Option<f64>,
        /// Evaluate the case's acceptance checks; exit 2 if any fails
        #[arg(long)]
        check: bool,
        /// Output directory (created if missing; default: current directory)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Flat `key = value` options file; command-line flags override it
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() {
    std::process::exit(run());
}

fn fail(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    1
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let Cmd::Run { case, levels, beta, gamma, order, depth, eps, check, out, config } = cli.cmd;

    let flags = config::Options { levels, beta, gamma, order, depth, eps, check, out };
    let file_opts = match config.as_deref().map(config::parse_config).transpose() {
        Ok(o) => o.unwrap_or_default(),
        Err(msg) => return fail(&msg),
    };
    let opts = flags.over(file_opts);

    if let Some(l) = opts.levels {
        if l < 2 {
            return fail(&format!("need ≥ 2 levels (got {l})"));
        }
    }

    let out_dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail(&format!("cannot create output directory {}: {e}", out_dir.display()));
    }

    let output = match cases::run_case(&case, &opts) {
        Ok(o) => o,
        Err(msg) => return fail(&msg),
    };

    let mut all_pass = true;
    if opts.check {
        for c in &output.checks {
            all_pass &= c.pass;
        }
    }

    // results.csv
    let mut csv = String::from(cases::CSV_HEADER);
    csv.push('\n');
    for row in &output.rows {
        csv.push_str(&row.csv_fields().join(","));
        csv.push('\n');
    }
    if let Err(e) = std::fs::write(out_dir.join("results.csv"), csv) {
        return fail(&format!("cannot write results.csv: {e}"));
    }

    // convergence.svg
    let plot = svg::log_log_plot(&output.title, &output.x_label, "error", &output.series, &output.ref_lines);
    if let Err(e) = std::fs::write(out_dir.join("convergence.svg"), plot) {
        return fail(&format!("cannot write convergence.svg: {e}"));
    }

    // run.json (serde_json's map is sorted, so the file is deterministic)
    let mut meta = serde_json::Map::new();
    meta.insert("case".into(), json!(case));
    meta.insert("check".into(), json!(opts.check));
    if opts.check {
        meta.insert("check_passed".into(), json!(all_pass));
    }
    for (k, v) in &output.notes {
        meta.insert(k.clone(), json!(v));
    }
    let mut meta_text = serde_json::to_string_pretty(&serde_json::Value::Object(meta)).expect("serialize metadata");
    meta_text.push('\n');
    if let Err(e) = std::fs::write(out_dir.join("run.json"), meta_text) {
        return fail(&format!("cannot write run.json: {e}"));
    }

    // stdout summary
    println!("{}", output.title);
    println!();
    print_table(&output.rows);
    println!();
    if opts.check {
        for c in &output.checks {
            println!("check {}: {} — {}", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail);
        }
        println!();
    }
    for file in ["results.csv", "convergence.svg", "run.json"] {
        println!("wrote {}", out_dir.join(file).display());
    }

    if opts.check && !all_pass {
        2
    } else {
        0
    }
}

/// Aligned text table of the result rows, skipping all-empty columns.
fn print_table(rows: &[cases::Row]) {
    let header: Vec<&str> = cases::CSV_HEADER.split(',').collect();
    let cells: Vec<Vec<String>> = rows.iter().map(|r| r.csv_fields()).collect();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&c| c == 0 || cells.iter().any(|r| !r[c].is_empty()))
        .collect();
    let width = |c: usize| {
        cells.iter().map(|r| r[c].len()).chain(std::iter::once(header[c].len())).max().unwrap_or(0)
    };
    let head: Vec<String> = keep.iter().map(|&c| format!("{:>w$}", header[c], w = width(c))).collect();
    println!("{}", head.join("  "));
    for r in &cells {
        let line: Vec<String> = keep.iter().map(|&c| format!("{:>w$}", r[c], w = width(c))).collect();
        println!("{}", line.join("  "));
    }
}
