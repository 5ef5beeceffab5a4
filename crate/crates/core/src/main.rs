use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use attrec::experiments::{self, RunManifest};
use attrec::simulator::Scenario;
use attrec::{ModelSet, ObjectCatalog, Observation, Recognizer};

#[derive(Parser)]
#[command(
    name = "attrec",
    version,
    about = "Attribute-based object recognition with two-threshold classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate two-threshold models on a scenario's training draws.
    Calibrate {
        /// Scenario file, or a bundled name (exp1, exp2, exp3).
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Training replicate to draw.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Fuse scored observations (`attribute,bin,score` lines) into a decision.
    Fuse {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Observation file; `-` reads stdin.
        #[arg(long)]
        obs: PathBuf,
    },
    /// Score distributions per distance bin.
    Exp1(ExpArgs),
    /// Error against number of views, two thresholds versus one.
    Exp2(ExpArgs),
    /// Per-bin accuracy of attribute-family systems.
    Exp3(ExpArgs),
    /// Guaranteed-recognition and convergence suites.
    Theorems {
        /// Episodes in the convergence run.
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
        /// Randomized catalogs in the guaranteed-recognition suite.
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for the convergence CSV and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct ExpArgs {
    #[arg(long)]
    scenario: String,
    /// Trials per point (replicates per bin for exp1).
    #[arg(long)]
    trials: Option<usize>,
    /// Defaults to the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Scenario plus the exact text it was parsed from.
fn load_scenario(arg: &str) -> Result<(Scenario, String)> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let scenario = Scenario::load(path)?;
        return Ok((scenario, text));
    }
    match (Scenario::builtin(arg), Scenario::builtin_text(arg)) {
        (Some(s), Some(text)) => Ok((s, text.to_string())),
        _ => bail!("no scenario file or bundled scenario named {arg:?}"),
    }
}

fn load_catalog(arg: &Path) -> Result<ObjectCatalog> {
    if !arg.exists() {
        if let Some(c) = arg.to_str().and_then(attrec::simulator::builtin_catalog) {
            return Ok(c);
        }
    }
    Ok(ObjectCatalog::load(arg)?)
}

fn write_outputs(dir: &Path, files: &[(&str, String)], manifest: &RunManifest) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in files {
        fs::write(dir.join(name), body).with_context(|| format!("writing {name}"))?;
    }
    fs::write(dir.join("manifest.json"), manifest.to_json()).context("writing manifest.json")?;
    Ok(())
}

fn read_observations(text: &str, recognizer: &Recognizer) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            bail!("line {}: expected attribute,bin,score", n + 1);
        }
        if fields[0] == "attribute" && n == 0 {
            continue;
        }
        let attr = recognizer
            .catalog
            .attribute_index(fields[0])
            .or_else(|| {
                fields[0]
                    .parse()
                    .ok()
                    .filter(|&i| i < recognizer.catalog.num_attributes())
            })
            .with_context(|| format!("line {}: unknown attribute {:?}", n + 1, fields[0]))?;
        let bin = fields[1].parse().with_context(|| format!("line {}: bad bin", n + 1))?;
        let score = fields[2]
            .parse()
            .with_context(|| format!("line {}: bad score", n + 1))?;
        out.push((attr, bin, score));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Calibrate {
            scenario,
            out,
            replicate,
        } => {
            let (scenario, _) = load_scenario(&scenario)?;
            let models = scenario.calibrate_replicate(replicate)?;
            fs::write(&out, models.to_json()).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Fuse { catalog, model, obs } => {
            let catalog = load_catalog(&catalog)?;
            let models = ModelSet::load(&model)?;
            let recognizer = Recognizer::new(catalog, models)?;
            let text = if obs.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin())?
            } else {
                fs::read_to_string(&obs).with_context(|| format!("reading {}", obs.display()))?
            };
            let mut state = recognizer.start();
            let mut seen: Vec<Observation> = Vec::new();
            for (attr, bin, score) in read_observations(&text, &recognizer)? {
                seen.push(recognizer.observe_score(&mut state, attr, bin, score)?);
            }
            println!("{}", serde_json::to_string_pretty(&recognizer.record(&state, &seen))?);
        }
        Command::Exp1(args) => {
            let (scenario, text) = load_scenario(&args.scenario)?;
            let seed = args.seed.unwrap_or(scenario.seed());
            let result = experiments::experiment1(&scenario, args.trials, seed)?;
            let manifest = RunManifest::new(
                "exp1",
                seed,
                result.replicates,
                Some((scenario.name(), &text)),
                &["exp1_kde.csv", "exp1_overlap.csv"],
            );
            write_outputs(
                &args.out,
                &[
                    ("exp1_kde.csv", result.kde_csv()),
                    ("exp1_overlap.csv", result.overlap_csv()),
                ],
                &manifest,
            )?;
            print!("{}", result.overlap_csv());
            println!("far-near separation: {:.2} standard errors", result.separation_z());
        }
        Command::Exp2(args) => {
            let (scenario, text) = load_scenario(&args.scenario)?;
            let seed = args.seed.unwrap_or(scenario.seed());
            let trials = args.trials.unwrap_or(2000);
            let curve = experiments::experiment2(&scenario, trials, seed)?;
            let manifest = RunManifest::new("exp2", seed, trials, Some((scenario.name(), &text)), &["exp2.csv"]);
            write_outputs(&args.out, &[("exp2.csv", curve.csv())], &manifest)?;
            print!("{}", curve.csv());
        }
        Command::Exp3(args) => {
            let (scenario, text) = load_scenario(&args.scenario)?;
            let seed = args.seed.unwrap_or(scenario.seed());
            let trials = args.trials.unwrap_or(2000);
            let table = experiments::experiment3(&scenario, trials, seed)?;
            let manifest = RunManifest::new("exp3", seed, trials, Some((scenario.name(), &text)), &["exp3.csv"]);
            write_outputs(&args.out, &[("exp3.csv", table.csv())], &manifest)?;
            print!("{}", table.csv());
        }
        Command::Theorems {
            trials,
            cases,
            seed,
            out,
        } => {
            let report = experiments::theorem_suites(cases, trials, seed)?;
            let t1 = &report.theorem1;
            println!(
                "guaranteed recognition: {}/{} correct, {} failures",
                t1.correct,
                t1.cases,
                t1.failures.len()
            );
            let c = &report.convergence;
            for (k, t) in c.k_values.iter().zip(&c.errors) {
                println!("convergence K={k}: error {:.6} ± {:.6}", t.error(), t.halfwidth());
            }
            if let Some(dir) = out {
                let manifest = RunManifest::new("theorems", seed, trials, None, &["convergence.csv"]);
                write_outputs(&dir, &[("convergence.csv", c.csv())], &manifest)?;
            }
            println!("{}", if report.passed() { "PASS" } else { "FAIL" });
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
