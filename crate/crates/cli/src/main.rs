//! `chemautomata`: run words through the chemical automata, compare them
//! with the exact recognisers, tune the L3 recipe and draw the locus map.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
//! simulation or the tuner fails.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chemautomata::analysis::{
    differential_test, locus_map, suite_words, tune_recipe, Automaton, TuneOptions, TuneResult,
};
use chemautomata::chem_pda::{yield_report, PairCounting, YieldReport};
use chemautomata::chem_tm::{BzModel, TmReport, TmSetup};
use chemautomata::ode::Tolerances;
use chemautomata::par::Jobs;
use chemautomata::reactor::{RunManifest, DEFAULT_TAU_S, TRANSIENT_S};
use chemautomata::thermo::ThermoDb;
use chemautomata::{Error, Language, Result, Verdict, Word};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::{load_recipe, Config};

#[derive(Parser, Debug)]
#[command(name = "chemautomata", version, about = "One-pot chemical automata for L1, L2 and L3")]
struct Cli {
    /// TOML config; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one word: trajectory CSV plus verdict JSON.
    Run(RunArgs),
    /// Differential test of every word against the recogniser.
    Suite(SuiteArgs),
    /// Tune the L3 aliquots for a constant area and calibrate the verdict.
    Tune(TuneArgs),
    /// Frequency–amplitude locus map from earlier L3 runs.
    Map(MapArgs),
    /// Exact recogniser only.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// L1, L2 or L3.
    #[arg(long)]
    lang: Option<Language>,
    /// Aliquot recipe (TOML).
    #[arg(long)]
    recipe: Option<PathBuf>,
    /// Interval between symbols, s (> 30).
    #[arg(long)]
    tau_s: Option<f64>,
    /// Relative integration tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tuned L3 calibration (JSON written by `tune`). Without it L3 runs tune first.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    word: String,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[command(flatten)]
    common: Common,
    /// Longest word enumerated (L1, L2; L3 uses the curated set).
    #[arg(long)]
    max_len: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[command(flatten)]
    common: Common,
    /// Objective evaluations.
    #[arg(long)]
    budget: Option<usize>,
    /// Flatten the area over aⁿbⁿcⁿ for n = 1..=n_max.
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct MapArgs {
    /// Run directories (or their verdict.json files) from `run --lang L3`.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Calibration whose accept band is drawn.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    lang: Option<Language>,
    #[arg(long)]
    word: String,
}

/// Contents of `verdict.json`.
#[derive(Debug, Serialize, Deserialize)]
struct RunRecord {
    #[serde(flatten)]
    verdict: Verdict,
    #[serde(flatten)]
    manifest: Manifest,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    enthalpy_yield: Option<YieldReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    oscillation: Option<TmReport>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    language: Language,
    word: Word,
    recipe_id: String,
    seed: u64,
    tau_s: f64,
    rtol: f64,
}

#[derive(Serialize)]
struct OracleRecord {
    language: Language,
    word: Word,
    #[serde(flatten)]
    verdict: Verdict,
}

/// Effective settings after merging config and flags.
struct Resolved {
    lang: Language,
    tau_s: f64,
    tol: Tolerances,
    seed: u64,
    out: PathBuf,
    recipe: Option<PathBuf>,
    calibration: Option<PathBuf>,
    cfg: Config,
}

fn resolve(c: &Common, cfg: &Config) -> Result<Resolved> {
    let lang = c
        .lang
        .or(cfg.lang)
        .ok_or_else(|| Error::Configuration("--lang is required".into()))?;
    let tau_s = c.tau_s.or(cfg.tau_s).unwrap_or(DEFAULT_TAU_S);
    if !(tau_s > TRANSIENT_S && tau_s.is_finite()) {
        return Err(Error::Configuration(format!("tau_s must exceed {TRANSIENT_S} s, got {tau_s}")));
    }
    let rtol = c.rtol.or(cfg.rtol).unwrap_or(1e-6);
    let atol = cfg.atol.unwrap_or(1e-12);
    let tol = Tolerances::new(rtol, atol).map_err(|e| Error::Configuration(e.to_string()))?;
    Ok(Resolved {
        lang,
        tau_s,
        tol,
        seed: c.seed.or(cfg.seed).unwrap_or(0),
        out: c.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| "out".into()),
        recipe: c.recipe.clone().or_else(|| cfg.recipe.clone()),
        calibration: c.calibration.clone().or_else(|| cfg.calibration.clone()),
        cfg: cfg.clone(),
    })
}

fn tune_options(r: &Resolved, budget: Option<usize>, n_max: Option<usize>, jobs: Jobs) -> Result<TuneOptions> {
    let d = TuneOptions::default();
    let n_max = n_max.or(r.cfg.tune.n_max).unwrap_or(4);
    if !(1..=5).contains(&n_max) {
        return Err(Error::Configuration(format!("n_max must be in 1..=5, got {n_max}")));
    }
    Ok(TuneOptions {
        n_range: (1..=n_max).collect(),
        budget: budget.or(r.cfg.tune.budget).unwrap_or(d.budget),
        seed: r.seed,
        band_floor_vs: r.cfg.tune.band_floor_vs.unwrap_or(d.band_floor_vs),
        frequency_weight: r.cfg.tune.frequency_weight.unwrap_or(d.frequency_weight),
        tau_s: r.tau_s,
        jobs,
        ..d
    })
}

fn load_calibration(path: &Path) -> Result<TuneResult> {
    let t: TuneResult = serde_json::from_str(&fs::read_to_string(path)?)?;
    t.calibration.validate()?;
    Ok(t)
}

/// The automaton for `r.lang`, with the tuned L3 model when applicable.
fn build(r: &Resolved, jobs: Jobs) -> Result<(Automaton, Option<BzModel>)> {
    let db = ThermoDb::load()?;
    let recipe = r.recipe.as_deref().map(load_recipe).transpose()?;
    let (mut auto, bz) = match r.lang {
        Language::L3 => {
            let tuned = match &r.calibration {
                Some(p) => load_calibration(p)?,
                None => {
                    eprintln!("no --calibration given; tuning the L3 recipe first (seed {})", r.seed);
                    tune_recipe(&BzModel::default(), &TmSetup::default(), &tune_options(r, None, None, jobs)?)?
                }
            };
            let model = tuned.model(&BzModel::default());
            let mut auto = Automaton::tm(model.clone(), &tuned.setup)?;
            auto.recipe = tuned.recipe;
            (auto, Some(model))
        }
        l => (Automaton::for_language(l, &db)?, None),
    };
    if let Some(recipe) = recipe {
        auto.recipe = recipe;
    }
    auto.recipe.validate()?;
    auto.tau_s = r.tau_s;
    auto.settings.tol = r.tol;
    Ok((auto, bz))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn cmd_run(a: &RunArgs, cfg: &Config) -> Result<()> {
    let r = resolve(&a.common, cfg)?;
    let word = r.lang.parse_word(&a.word)?;
    let (auto, bz) = build(&r, Jobs::SEQUENTIAL)?;
    let start = Instant::now();
    let (traj, verdict) = auto.run(&word)?;

    let enthalpy_yield = match r.lang {
        Language::L2 => {
            yield_report(&word, &traj, &auto.recipe, &ThermoDb::load()?, PairCounting::default()).ok()
        }
        _ => None,
    };
    let oscillation = bz
        .as_ref()
        .map(|m| m.analyse(&traj).map(|a| TmReport::new(&word, &a)))
        .transpose()?;
    let record = RunRecord {
        verdict,
        manifest: Manifest {
            language: r.lang,
            word,
            recipe_id: auto.recipe.id.clone(),
            seed: r.seed,
            tau_s: r.tau_s,
            rtol: r.tol.rtol,
        },
        enthalpy_yield,
        oscillation,
    };

    fs::create_dir_all(&r.out)?;
    let mut csv = std::io::BufWriter::new(fs::File::create(r.out.join("trajectory.csv"))?);
    traj.write_csv(auto.model.as_ref(), &mut csv)?;
    csv.flush()?;
    write_json(&r.out.join("verdict.json"), &record)?;
    let manifest = RunManifest {
        language: r.lang,
        word: record.manifest.word.clone(),
        recipe_id: record.manifest.recipe_id.clone(),
        seed: r.seed,
        verdict,
    };
    write_json(&r.out.join("manifest.json"), &manifest)?;
    println!("{}", serde_json::to_string(&record)?);
    eprintln!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_suite(a: &SuiteArgs, cfg: &Config) -> Result<()> {
    let r = resolve(&a.common, cfg)?;
    let jobs = Jobs(a.jobs.or(cfg.jobs));
    if jobs.0 == Some(0) {
        return Err(Error::Configuration("--jobs must be at least 1".into()));
    }
    let max_len = a.max_len.or(cfg.max_len).unwrap_or(match r.lang {
        Language::L1 => 8,
        Language::L2 => 10,
        Language::L3 => 4,
    });
    if max_len == 0 {
        return Err(Error::Configuration("--max-len must be at least 1".into()));
    }
    let (auto, _) = build(&r, jobs)?;
    let words = suite_words(r.lang, max_len);
    let bound = (r.lang != Language::L3).then_some(max_len);
    let report = differential_test(&auto, &words, bound, jobs)?;

    fs::create_dir_all(&r.out)?;
    write_json(&r.out.join("report.json"), &report)?;
    fs::write(r.out.join("report.csv"), report.to_csv())?;
    println!(
        "{}: {} words, {} mismatches",
        report.language, report.words, report.mismatches
    );
    for row in report.mismatched() {
        let chem = row.chemical.map_or("error".to_string(), |v| v.to_string());
        eprintln!(
            "mismatch {:?}: oracle {} chemical {}{}",
            row.word.to_string(),
            row.oracle,
            chem,
            row.diagnostic.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
        );
    }
    eprintln!("runtime {:.3} s", report.runtime.as_secs_f64());
    Ok(())
}

fn cmd_tune(a: &TuneArgs, cfg: &Config) -> Result<()> {
    let mut common = a.common.clone();
    common.lang = Some(common.lang.or(cfg.lang).unwrap_or(Language::L3));
    let r = resolve(&common, cfg)?;
    if r.lang != Language::L3 {
        return Err(Error::Configuration("tune applies to L3 only".into()));
    }
    let opts = tune_options(&r, a.budget, a.n_max, Jobs(a.jobs.or(cfg.jobs)))?;
    let start = Instant::now();
    let result = tune_recipe(&BzModel::default(), &TmSetup::default(), &opts)?;
    fs::create_dir_all(&r.out)?;
    let path = r.out.join("tune.json");
    write_json(&path, &result)?;
    let c = &result.calibration;
    println!(
        "A* = {:.4} V·s, δ = {:.4} V·s, spread {:.4}%, objective {:.3e} -> {:.3e} in {} evaluations; wrote {}",
        c.area_center_vs,
        c.area_half_width_vs,
        100.0 * result.area_spread(),
        result.objective_initial,
        result.objective,
        result.evaluations,
        path.display()
    );
    eprintln!("runtime {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_map(a: &MapArgs, cfg: &Config) -> Result<()> {
    let calibration = a
        .calibration
        .clone()
        .or_else(|| cfg.calibration.clone())
        .map(|p| load_calibration(&p))
        .transpose()?;
    let mut points = Vec::with_capacity(a.runs.len());
    for p in &a.runs {
        let file = if p.is_dir() { p.join("verdict.json") } else { p.clone() };
        let rec: RunRecord = serde_json::from_str(&fs::read_to_string(&file)?)?;
        let osc = rec.oscillation.ok_or_else(|| {
            Error::Configuration(format!("{} is not an L3 run record", file.display()))
        })?;
        points.push(osc);
    }
    let map = locus_map(&points, calibration.as_ref().map(|t| &t.calibration))?;
    for w in &map.warnings {
        eprintln!("warning: {w}");
    }
    let out = a.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| "out".into());
    fs::create_dir_all(&out)?;
    fs::write(out.join("locus.csv"), &map.csv)?;
    fs::write(out.join("locus.svg"), &map.svg)?;
    println!("{} points; wrote {}", points.len(), out.join("locus.svg").display());
    Ok(())
}

fn cmd_oracle(a: &OracleArgs, cfg: &Config) -> Result<()> {
    let lang = a
        .lang
        .or(cfg.lang)
        .ok_or_else(|| Error::Configuration("--lang is required".into()))?;
    let word = lang.parse_word(&a.word)?;
    let verdict = lang.recognize(&word)?;
    println!("{}", serde_json::to_string(&OracleRecord { language: lang, word, verdict })?);
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Simulation { .. }
        | Error::Numerical(_)
        | Error::Consistency(_)
        | Error::Tuning(_)
        | Error::UndefinedYield => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = cli
        .config
        .as_deref()
        .map(Config::load)
        .transpose()
        .map(Option::unwrap_or_default)
        .and_then(|cfg| match &cli.command {
            Command::Run(a) => cmd_run(a, &cfg),
            Command::Suite(a) => cmd_suite(a, &cfg),
            Command::Tune(a) => cmd_tune(a, &cfg),
            Command::Map(a) => cmd_map(a, &cfg),
            Command::Oracle(a) => cmd_oracle(a, &cfg),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
