use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ethdaq::scenario::{self, apply_param, catalog, render, resolve_out_dir, run_doc, ScenarioDoc, ScenarioError};

#[derive(Parser)]
#[command(name = "ethdaq", version, about = "Switched Ethernet and DAQ dataflow simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a canned scenario or a scenario file.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; multi-document scenarios get one subdirectory per document.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a scalar, e.g. `--param switches.*.fc_enabled=false`.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Shorthand for `--param run.load_scale=X`.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// List canned scenarios.
    List,
    /// Check a scenario file or canned scenario without running it.
    Validate { scenario: String },
    /// Print the documents of a canned scenario or file.
    Show { scenario: String },
}

fn prepare(scenario: &str, seed: Option<u64>, params: &[String], alpha: Option<f64>) -> Result<Vec<ScenarioDoc>, ScenarioError> {
    let mut docs = scenario::load(scenario)?;
    let mut overrides = vec![];
    for p in params {
        let (k, v) = p.split_once('=').ok_or_else(|| ScenarioError::Param {
            key: p.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(a) = alpha {
        overrides.push(("alpha".into(), a.to_string()));
    }
    if let Some(s) = seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    for doc in &mut docs {
        for (k, v) in &overrides {
            *doc = apply_param(doc, k, v)?;
        }
    }
    Ok(docs)
}

fn run(scenario: &str, seed: Option<u64>, out: Option<PathBuf>, params: &[String], alpha: Option<f64>) -> Result<(), ScenarioError> {
    let docs = prepare(scenario, seed, params, alpha)?;
    let multi = docs.len() > 1;
    for doc in &docs {
        let dir = match (&out, multi) {
            (Some(o), true) => o.join(&doc.name),
            (o, _) => resolve_out_dir(o.as_deref(), doc),
        };
        let outcome = run_doc(doc, Some(&dir))?;
        println!("{}: wrote {}", doc.name, dir.display());
        let m = outcome.metrics();
        for key in [
            "frames_sent",
            "frames_delivered",
            "switch_drops",
            "host_drops",
            "conservation_violations",
        ] {
            if let Some(v) = m.summary(key) {
                println!("  {key} = {v}");
            }
        }
        for (k, v) in &outcome.results {
            println!("  {k} = {v}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run {
            scenario,
            seed,
            out,
            params,
            alpha,
        } => run(&scenario, seed, out, &params, alpha),
        Cmd::List => {
            for e in catalog() {
                println!("{:<18} {:<12} {}", e.name, e.golden, e.description);
            }
            Ok(())
        }
        Cmd::Validate { scenario } => scenario::load(&scenario).and_then(|docs| {
            for d in docs {
                let issues = scenario::validate(&d);
                if !issues.is_empty() {
                    return Err(ScenarioError::Invalid(issues));
                }
                println!(
                    "{}: ok ({} switches, {} hosts, {} links)",
                    d.name,
                    d.switches.len(),
                    d.hosts.len(),
                    d.links.len()
                );
            }
            Ok(())
        }),
        Cmd::Show { scenario } => scenario::load(&scenario).map(|docs| {
            for d in docs {
                println!("# {}\n{}", d.name, render(&d));
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
