//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use featurelens_core::bench::{run_bench, BenchOptions, DEFAULT_BENCH_COLUMNS};
use featurelens_core::ingest::load_manifest;
use featurelens_core::model::{DataKind, SystemCollection};
use featurelens_core::selection::export_selection_to_path;
use featurelens_core::session::load_session;

use crate::api::schema_json;
use crate::serve::{serve, ServeConfig, DEFAULT_HOST, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "featurelens", version, about = "Linked feature-space and 3D exploration of atoms and densities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a manifest and serve the HTTP API.
    Serve {
        manifest: PathBuf,
        #[arg(long, env = "FEATURELENS_HOST", default_value = DEFAULT_HOST)]
        host: String,
        #[arg(long, env = "FEATURELENS_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Do not open a browser window.
        #[arg(long)]
        no_browser: bool,
    },
    /// Write the points selected by a saved session to CSV.
    Export {
        manifest: PathBuf,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pool to export; defaults to the kind of the first active brush.
        #[arg(long)]
        kind: Option<DataKind>,
    },
    /// Print systems, counts and column summaries.
    Stats {
        manifest: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Time brush, histogram, correlation and PCA on the loaded data.
    Bench {
        manifest: PathBuf,
        #[arg(long)]
        kind: Option<DataKind>,
        #[arg(long, default_value_t = DEFAULT_BENCH_COLUMNS)]
        columns: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Exit nonzero when any timing exceeds its limit.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        json: bool,
    },
}

fn load(path: &Path) -> Result<SystemCollection, String> {
    load_manifest(path).map_err(|e| e.to_string())
}

fn export(manifest: &Path, session: &Path, out: &Path, kind: Option<DataKind>) -> Result<(), String> {
    let c = load(manifest)?;
    let bytes = std::fs::read(session).map_err(|e| format!("cannot read {}: {e}", session.display()))?;
    let restored = load_session(&bytes, &c).map_err(|e| e.to_string())?;
    for w in &restored.warnings {
        eprintln!("warning: {w}");
    }
    let kind = kind
        .or_else(|| restored.selection.brushes().iter().find(|b| b.active).map(|b| b.kind))
        .unwrap_or(if c.total(DataKind::Voxel) > 0 { DataKind::Voxel } else { DataKind::Atom });
    let rows = export_selection_to_path(&c, restored.selection.mask(kind), kind, out).map_err(|e| e.to_string())?;
    println!("{rows} {kind} rows written to {}", out.display());
    Ok(())
}

fn fmt_num(v: &serde_json::Value) -> String {
    v.as_f64().map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

fn stats(manifest: &Path, as_json: bool) -> Result<(), String> {
    let c = load(manifest)?;
    let s = schema_json(&c);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&s).expect("json"));
        return Ok(());
    }
    let systems = s["systems"].as_array().unwrap();
    println!(
        "{} system{}, {} atoms, {} voxels",
        systems.len(),
        if systems.len() == 1 { "" } else { "s" },
        c.total(DataKind::Atom),
        c.total(DataKind::Voxel)
    );
    for sys in systems {
        let grid = match sys["grid"]["shape"].as_array() {
            Some(sh) => format!(", grid {}", sh.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("x")),
            None => String::new(),
        };
        println!("  {}: {} atoms, {} voxels{grid}", sys["id"].as_str().unwrap(), sys["atoms"], sys["voxels"]);
    }
    for kind in DataKind::ALL {
        let cols = s["columns"][kind.as_str()].as_array().unwrap();
        println!("{kind} columns ({}):", cols.len());
        for col in cols {
            let unit = col["unit"].as_str().map(|u| format!(" [{u}]")).unwrap_or_default();
            println!(
                "  {}{unit}  min {}  max {}  non-finite {}",
                col["name"].as_str().unwrap(),
                fmt_num(&col["min"]),
                fmt_num(&col["max"]),
                col["non_finite"]
            );
        }
    }
    Ok(())
}

fn bench(manifest: &Path, opts: BenchOptions, strict: bool, as_json: bool) -> Result<(), String> {
    let c = load(manifest)?;
    let report = run_bench(&c, &opts).map_err(|e| e.to_string())?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        print!("{}", report.render());
    }
    if strict && !report.passed() {
        return Err("timing limits exceeded".into());
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Serve {
            manifest,
            host,
            port,
            no_browser,
        } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(serve(ServeConfig {
                manifest,
                host,
                port,
                open_browser: !no_browser,
            }))
        }
        Command::Export {
            manifest,
            session,
            out,
            kind,
        } => export(&manifest, &session, &out, kind),
        Command::Stats { manifest, json } => stats(&manifest, json),
        Command::Bench {
            manifest,
            kind,
            columns,
            repeats,
            strict,
            json,
        } => bench(&manifest, BenchOptions { kind, columns, repeats }, strict, json),
    }
}

/// Process entry point: exit 0 on success, 1 with a one-line diagnostic on
/// failure, 2 on usage errors.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.replace('\n', " "));
            std::process::ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_valid() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["featurelens", "serve", "m.json", "--port", "9000", "--no-browser"]).unwrap();
        match cli.command {
            Command::Serve { port, no_browser, .. } => assert!(port == 9000 && no_browser),
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from(["featurelens", "export", "m.json", "--session", "s.json", "--out", "o.csv", "--kind", "atom"]).unwrap();
        assert!(matches!(cli.command, Command::Export { kind: Some(DataKind::Atom), .. }));
        assert!(Cli::try_parse_from(["featurelens", "stats", "m.json", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["featurelens", "export", "m.json"]).is_err());
    }
}
