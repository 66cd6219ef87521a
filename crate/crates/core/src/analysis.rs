//! Differential suites against the exact recognisers, recipe tuning for the
//! L3 automaton, and the frequency–amplitude locus map.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem_fa::PrecipitationModel;
use crate::chem_pda::AcidBaseModel;
use crate::chem_tm::{BzModel, Calibration, Signature, TmAnalysis, TmReport, TmSetup};
use crate::error::{Error, Result};
use crate::formal::{enumerate_words, in_block_order, Language, Outcome, RejectKind, Symbol, Verdict, Word};
use crate::par::{self, Jobs};
use crate::reactor::{
    run_word, simulate, AliquotRecipe, ChemistryModel, FeedSchedule, Mixture, SimSettings,
    Trajectory, DEFAULT_TAU_S,
};
use crate::thermo::ThermoDb;

/// A chemistry model with everything needed to run words through it.
pub struct Automaton {
    pub model: Box<dyn ChemistryModel>,
    pub recipe: AliquotRecipe,
    pub initial: Mixture,
    pub tau_s: f64,
    pub end_marker: bool,
    pub settings: SimSettings,
}

impl Automaton {
    pub fn fa(db: &ThermoDb) -> Result<Self> {
        let m = PrecipitationModel::from_db(db)?;
        Ok(Automaton {
            initial: m.initial_mixture()?,
            recipe: PrecipitationModel::default_recipe(),
            model: Box::new(m),
            tau_s: DEFAULT_TAU_S,
            end_marker: false,
            settings: SimSettings::default(),
        })
    }

    pub fn pda(db: &ThermoDb) -> Result<Self> {
        let m = AcidBaseModel::from_db(db)?;
        Ok(Automaton {
            initial: m.initial_mixture()?,
            recipe: AcidBaseModel::default_recipe(),
            model: Box::new(m),
            tau_s: DEFAULT_TAU_S,
            end_marker: true,
            settings: SimSettings::default(),
        })
    }

    pub fn tm(model: BzModel, setup: &TmSetup) -> Result<Self> {
        model.kinetics.validate()?;
        Ok(Automaton {
            initial: setup.initial_mixture()?,
            recipe: setup.recipe("tm"),
            model: Box::new(model),
            tau_s: DEFAULT_TAU_S,
            end_marker: true,
            settings: SimSettings::default(),
        })
    }

    /// Default automaton for a language. L3 needs a calibration to reach a
    /// verdict; see [`tune_recipe`].
    pub fn for_language(language: Language, db: &ThermoDb) -> Result<Self> {
        match language {
            Language::L1 => Self::fa(db),
            Language::L2 => Self::pda(db),
            Language::L3 => Self::tm(BzModel::default(), &TmSetup::default()),
        }
    }

    pub fn language(&self) -> Language {
        self.model.language()
    }

    pub fn schedule(&self, word: &Word) -> Result<FeedSchedule> {
        FeedSchedule::new(word.clone(), self.tau_s, self.end_marker)
    }

    pub fn run(&self, word: &Word) -> Result<(Trajectory, Verdict)> {
        let s = self.schedule(word)?;
        run_word(self.model.as_ref(), &self.recipe, &s, &self.initial, &self.settings)
    }

    pub fn simulate(&self, word: &Word) -> Result<Trajectory> {
        let s = self.schedule(word)?;
        simulate(self.model.as_ref(), &self.recipe, &s, &self.initial, &self.settings)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub word: Word,
    pub oracle: Verdict,
    /// `None` when the simulation failed; see `diagnostic`.
    pub chemical: Option<Verdict>,
    #[serde(rename = "match")]
    pub matched: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialReport {
    pub language: Language,
    /// Enumeration bound, or `None` for a curated set.
    pub max_len: Option<usize>,
    pub words: usize,
    pub mismatches: usize,
    pub rows: Vec<DiffRow>,
    /// Wall time. Left out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub runtime: Duration,
}

impl DifferentialReport {
    /// `word,oracle,chemical,match`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("word,oracle,chemical,match\n");
        for r in &self.rows {
            let chem = r.chemical.map_or_else(|| "error".to_string(), |v| v.to_string());
            let _ = writeln!(out, "{},{},{},{}", r.word, r.oracle, chem, r.matched);
        }
        out
    }

    pub fn mismatched(&self) -> impl Iterator<Item = &DiffRow> {
        self.rows.iter().filter(|r| !r.matched)
    }
}

/// Run every word through the chemistry and the recogniser. Simulation
/// failures count as mismatches and keep their message.
pub fn differential_test(
    auto: &Automaton,
    words: &[Word],
    max_len: Option<usize>,
    jobs: Jobs,
) -> Result<DifferentialReport> {
    let language = auto.language();
    for w in words {
        language.check_alphabet(w)?;
    }
    let start = Instant::now();
    let rows = par::map(words, jobs, |w| {
        let oracle = language.recognize(w).expect("alphabet checked above");
        let (chemical, diagnostic) = match auto.run(w) {
            Ok((_, v)) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        DiffRow {
            word: w.clone(),
            oracle,
            matched: chemical == Some(oracle),
            chemical,
            diagnostic,
        }
    });
    let mismatches = rows.iter().filter(|r| !r.matched).count();
    Ok(DifferentialReport {
        language,
        max_len,
        words: rows.len(),
        mismatches,
        rows,
        runtime: start.elapsed(),
    })
}

/// Evaluation set for L3: `aⁿbⁿcⁿ` for n ≤ 4, ±1 and ±2 block-count
/// perturbations of n = 2 and 3, and every order violation up to length 4.
pub fn curated_l3_set() -> Vec<Word> {
    let mut out: Vec<Word> = (1..=4).map(Word::anbncn).collect();
    for n in [2usize, 3] {
        for d in [-2i64, -1, 1, 2] {
            let m = (n as i64 + d) as usize;
            out.push(Word::blocks(m, n, n));
            out.push(Word::blocks(n, m, n));
            out.push(Word::blocks(n, n, m));
        }
    }
    out.extend(
        enumerate_words(Language::L3.alphabet(), 4, false)
            .into_iter()
            .filter(|w| !in_block_order(w)),
    );
    let mut seen = std::collections::HashSet::new();
    out.retain(|w| seen.insert(w.clone()));
    out
}

/// Words a suite runs: exhaustive for L1 and L2, curated for L3.
pub fn suite_words(language: Language, max_len: usize) -> Vec<Word> {
    match language {
        Language::L3 => curated_l3_set(),
        l => enumerate_words(l.alphabet(), max_len, false),
    }
}

/// Simulate one L3 word and read area, descriptors and verdict.
pub fn run_tm(auto: &Automaton, model: &BzModel, word: &Word) -> Result<(Trajectory, TmAnalysis)> {
    let traj = auto.simulate(word)?;
    let a = model.analyse(&traj)?;
    Ok((traj, a))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    /// Word lengths `n` of the `aⁿbⁿcⁿ` family whose area is flattened.
    pub n_range: Vec<usize>,
    /// Maximum objective evaluations.
    pub budget: usize,
    pub seed: u64,
    /// Lower bound on the accept half-width δ, V·s.
    pub band_floor_vs: f64,
    /// Initial simplex edge, in natural-log units of the tuned amounts.
    pub initial_step: f64,
    /// Stop when the simplex objective spread falls below this.
    pub ftol: f64,
    #[serde(skip)]
    pub jobs: Jobs,
    /// Weight of the frequency spread in the objective; 0 flattens area only.
    pub frequency_weight: f64,
    pub tau_s: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            n_range: vec![1, 2, 3, 4],
            budget: 80,
            seed: 0,
            band_floor_vs: 0.1,
            initial_step: 0.4,
            ftol: 1e-4,
            jobs: Jobs::default(),
            frequency_weight: 0.1,
            tau_s: DEFAULT_TAU_S,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptPoint {
    pub n: usize,
    pub area_vs: f64,
    pub frequency_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub setup: TmSetup,
    pub recipe: AliquotRecipe,
    pub calibration: Calibration,
    pub objective_initial: f64,
    pub objective: f64,
    /// Best objective after each simplex iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub accepted: Vec<AcceptPoint>,
    pub seed: u64,
}

impl TuneResult {
    pub fn model(&self, base: &BzModel) -> BzModel {
        base.clone().with_calibration(self.calibration.clone())
    }

    /// Relative spread `(max − min)/mean` of the accepted areas.
    pub fn area_spread(&self) -> f64 {
        rel_spread(&self.accepted.iter().map(|p| p.area_vs).collect::<Vec<_>>())
    }
}

/// Objective value for points that fail to simulate or stop oscillating.
pub const INFEASIBLE: f64 = 1e3;

fn rel_spread(x: &[f64]) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    (hi - lo) / mean.abs()
}

fn setup_at(base: &TmSetup, theta: &[f64]) -> TmSetup {
    TmSetup {
        b_mol: theta[0].exp(),
        c_mol: theta[1].exp(),
        ..*base
    }
}

/// Area and frequency of each word; errors and degenerate final windows
/// come back as `Err` with a message.
fn measure(
    model: &BzModel,
    setup: &TmSetup,
    words: &[Word],
    tau_s: f64,
    jobs: Jobs,
) -> std::result::Result<Vec<(f64, f64)>, String> {
    let mut auto = Automaton::tm(model.clone(), setup).map_err(|e| e.to_string())?;
    auto.tau_s = tau_s;
    let out = par::map(words, jobs, |w| {
        let traj = auto.simulate(w).map_err(|e| format!("{w}: {e}"))?;
        let area = crate::chem_tm::area_word(&traj, &model.redox).map_err(|e| e.to_string())?;
        let d = crate::chem_tm::estimate_descriptors(&traj, &model.redox).map_err(|e| e.to_string())?;
        Ok((area.area_vs, d.frequency_hz))
    });
    out.into_iter().collect()
}

/// Nelder–Mead on `θ`, stopping after `budget` evaluations or when the
/// simplex objective spread drops below `ftol`. Returns the best point, its
/// value, the per-iteration best history and the evaluation count.
fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    simplex: Vec<Vec<f64>>,
    budget: usize,
    ftol: f64,
) -> (Vec<f64>, f64, Vec<f64>, usize) {
    let n = simplex[0].len();
    let mut evals = 0usize;
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for x in simplex {
        if evals == budget {
            break;
        }
        evals += 1;
        let fx = f(&x);
        pts.push((x, fx));
    }
    let sort = |p: &mut Vec<(Vec<f64>, f64)>| p.sort_by(|a, b| a.1.total_cmp(&b.1));
    sort(&mut pts);
    let mut history = vec![pts[0].1];
    if pts.len() < n + 1 {
        return (pts[0].0.clone(), pts[0].1, history, evals);
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(&a, &b)| a + t * (b - a)).collect()
    };
    while evals < budget {
        if pts[n].1 - pts[0].1 <= ftol && pts[n].1 < INFEASIBLE {
            break;
        }
        let mut c = vec![0.0; n];
        for (x, _) in &pts[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        let worst = pts[n].0.clone();
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            f(x)
        };
        // Reflection through the centroid is c + (c − worst).
        let xr = lerp(&worst, &c, 2.0);
        let fr = eval(&xr, &mut evals);
        if fr < pts[0].1 {
            if evals < budget {
                let xe = lerp(&worst, &c, 3.0);
                let fe = eval(&xe, &mut evals);
                pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else {
                pts[n] = (xr, fr);
            }
        } else if fr < pts[n - 1].1 {
            pts[n] = (xr, fr);
        } else if evals < budget {
            let (xc, fc) = if fr < pts[n].1 {
                let xc = lerp(&worst, &c, 1.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = lerp(&worst, &c, 0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fr.min(pts[n].1) {
                pts[n] = (xc, fc);
            } else {
                let best = pts[0].0.clone();
                for p in pts.iter_mut().skip(1) {
                    if evals == budget {
                        break;
                    }
                    let x = lerp(&best, &p.0, 0.5);
                    let fx = eval(&x, &mut evals);
                    *p = (x, fx);
                }
            }
        }
        sort(&mut pts);
        history.push(pts[0].1);
    }
    (pts[0].0.clone(), pts[0].1, history, evals)
}

/// Flatten the area (and frequency) of `aⁿbⁿcⁿ` over `n_range` by tuning the
/// `b` and `c` aliquots, with `a` held as the scale anchor. Then set the
/// accept band from the tuned areas and learn the reject signatures from
/// the ±1 block perturbations of `a²b²c²`.
pub fn tune_recipe(model: &BzModel, initial: &TmSetup, opts: &TuneOptions) -> Result<TuneResult> {
    if opts.n_range.is_empty() || opts.n_range.iter().any(|&n| !(1..=5).contains(&n)) {
        return Err(Error::input("n_range must be a non-empty subset of 1..=5"));
    }
    if opts.budget == 0 {
        return Err(Error::input("tuning budget must be at least one evaluation"));
    }
    if !(initial.b_mol > 0.0 && initial.c_mol > 0.0) {
        return Err(Error::input("initial b and c amounts must be > 0"));
    }
    let words: Vec<Word> = opts.n_range.iter().map(|&n| Word::anbncn(n)).collect();
    let longest = opts
        .n_range
        .iter()
        .enumerate()
        .max_by_key(|&(_, n)| n)
        .map(|(i, _)| i)
        .unwrap_or(0);

    let mut last_error = String::new();
    let mut objective = |theta: &[f64]| -> f64 {
        match measure(model, &setup_at(initial, theta), &words, opts.tau_s, opts.jobs) {
            Ok(r) if r[longest].1 > 0.0 => {
                let areas: Vec<f64> = r.iter().map(|p| p.0).collect();
                let freqs: Vec<f64> = r.iter().map(|p| p.1).collect();
                rel_spread(&areas) + opts.frequency_weight * rel_spread(&freqs)
            }
            Ok(_) => {
                last_error = "oscillations die out on the longest word".into();
                INFEASIBLE
            }
            Err(e) => {
                last_error = e;
                INFEASIBLE
            }
        }
    };

    // Randomly rotated initial simplex; the seed fixes the search order.
    let theta0 = vec![initial.b_mol.ln(), initial.c_mol.ln()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let angle = rng.random::<f64>() * std::f64::consts::TAU;
    let (s, c) = angle.sin_cos();
    let h = opts.initial_step;
    let simplex = vec![
        theta0.clone(),
        vec![theta0[0] + h * c, theta0[1] + h * s],
        vec![theta0[0] - h * s, theta0[1] + h * c],
    ];
    let mut f0 = None;
    let mut counted = |x: &[f64]| {
        let v = objective(x);
        f0.get_or_insert(v);
        v
    };
    let (best, fbest, history, evaluations) = nelder_mead(&mut counted, simplex, opts.budget, opts.ftol);
    let objective_initial = f0.unwrap_or(INFEASIBLE);
    if fbest >= INFEASIBLE {
        return Err(Error::Tuning(format!(
            "no oscillating recipe found in {evaluations} evaluations; last failure: {last_error}"
        )));
    }

    let setup = setup_at(initial, &best);
    let r = measure(model, &setup, &words, opts.tau_s, opts.jobs).map_err(Error::Tuning)?;
    let accepted: Vec<AcceptPoint> = opts
        .n_range
        .iter()
        .zip(&r)
        .map(|(&n, &(area_vs, frequency_hz))| AcceptPoint {
            n,
            area_vs,
            frequency_hz,
        })
        .collect();
    let areas: Vec<f64> = r.iter().map(|p| p.0).collect();
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let a_star = mean(&areas);
    let spread_abs = rel_spread(&areas) * a_star.abs();
    let f_star = mean(&r.iter().map(|p| p.1).collect::<Vec<_>>());
    let calibration = calibrate_signatures(
        model,
        &setup,
        opts.tau_s,
        opts.jobs,
        a_star,
        (2.0 * spread_abs).max(opts.band_floor_vs),
        f_star,
    )?;
    Ok(TuneResult {
        recipe: setup.recipe("tm-tuned"),
        setup,
        calibration,
        objective_initial,
        objective: fbest,
        history,
        evaluations,
        accepted,
        seed: opts.seed,
    })
}

/// The six ±1 block perturbations of `a²b²c²`, labelled.
pub fn calibration_words() -> Vec<(&'static str, Word)> {
    vec![
        ("+a", Word::blocks(3, 2, 2)),
        ("-c", Word::blocks(2, 2, 1)),
        ("+b", Word::blocks(2, 3, 2)),
        ("-a", Word::blocks(1, 2, 2)),
        ("+c", Word::blocks(2, 2, 3)),
        ("-b", Word::blocks(2, 1, 2)),
    ]
}

fn calibrate_signatures(
    model: &BzModel,
    setup: &TmSetup,
    tau_s: f64,
    jobs: Jobs,
    a_star: f64,
    delta: f64,
    f_star: f64,
) -> Result<Calibration> {
    let cal = calibration_words();
    let words: Vec<Word> = cal.iter().map(|(_, w)| w.clone()).collect();
    let r = measure(model, setup, &words, tau_s, jobs).map_err(Error::Tuning)?;
    let raw: Vec<[f64; 2]> = r.iter().map(|&(a, f)| [a - a_star, f - f_star]).collect();
    let rms = |k: usize| (raw.iter().map(|d| d[k] * d[k]).sum::<f64>() / raw.len() as f64).sqrt();
    let scale = [rms(0), rms(1)];
    if !(scale[0] > 0.0 && scale[1] > 0.0) {
        return Err(Error::Tuning("reject families do not move area and frequency".into()));
    }
    let mut signatures = Vec::with_capacity(cal.len());
    for ((label, w), d) in cal.iter().zip(&raw) {
        let kind = Language::L3
            .recognize(w)?
            .reject_kind()
            .ok_or_else(|| Error::Tuning(format!("calibration word {w} is accepted")))?;
        let (x, y) = (d[0] / scale[0], d[1] / scale[1]);
        let norm = x.hypot(y);
        signatures.push(Signature {
            label: label.to_string(),
            direction: [x / norm, y / norm],
            kind,
        });
    }
    Ok(Calibration {
        area_center_vs: a_star,
        area_half_width_vs: delta,
        frequency_ref_hz: f_star,
        scale,
        signatures,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocusMap {
    pub csv: String,
    pub svg: String,
    pub warnings: Vec<String>,
}

fn kind_color(v: &Verdict) -> &'static str {
    match v.reject_kind() {
        None => "#000000",
        Some(RejectKind::ExcessA) => "#d62728",
        Some(RejectKind::ExcessB) => "#1f77b4",
        Some(RejectKind::ExcessC) => "#2ca02c",
        Some(RejectKind::BadOrder) => "#9467bd",
        Some(_) => "#7f7f7f",
    }
}

/// `(frequency, amplitude_diff)` scatter with verdict labels. Accepted
/// words are joined by the constant-area line; points whose area lies in
/// the accept band get a ring.
pub fn locus_map(points: &[TmReport], calib: Option<&Calibration>) -> Result<LocusMap> {
    if points.len() < 2 {
        return Err(Error::input("locus map needs at least two runs"));
    }
    let mut warnings = Vec::new();
    let band = calib.filter(|c| c.area_half_width_vs > 0.0);
    if band.is_none() {
        warnings.push("accept band is empty; band overlay omitted".to_string());
    }
    let in_band = |p: &TmReport| band.map(|c| c.in_band(p.area_vs));

    let mut csv = String::from("word,frequency_Hz,amplitude_diff_V,area_Vs,outcome,reject_kind,in_band\n");
    for p in points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{:?},{},{}",
            p.word,
            p.frequency_hz,
            p.amplitude_diff_v,
            p.area_vs,
            p.verdict,
            p.reject_kind.map_or(String::new(), |k| k.to_string()),
            in_band(p).map_or(String::new(), |b| b.to_string()),
        );
    }

    let (w, h, m) = (720.0, 520.0, 60.0);
    let range = |f: fn(&TmReport) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1e-3) * 0.05 };
        (lo - pad, hi + pad)
    };
    let (x0, x1) = range(|p| p.frequency_hz);
    let (y0, y1) = range(|p| p.amplitude_diff_v);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">frequency (Hz)  [{x0:.4} – {x1:.4}]</text>"#,
        w / 2.0,
        h - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" transform="rotate(-90 18 {})" text-anchor="middle">amplitude difference (V)  [{y0:.4} – {y1:.4}]</text>"#,
        h / 2.0,
        h / 2.0
    );

    let mut accepted: Vec<&TmReport> = points
        .iter()
        .filter(|p| p.verdict == Outcome::Accept && !p.word.is_empty())
        .collect();
    accepted.sort_by_key(|p| p.word.len());
    if accepted.len() >= 2 {
        let path: Vec<String> = accepted
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.frequency_hz), sy(p.amplitude_diff_v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="4"/>"#,
            path.join(" ")
        );
    }
    for p in points {
        let (cx, cy) = (sx(p.frequency_hz), sy(p.amplitude_diff_v));
        if in_band(p) == Some(true) {
            let _ = writeln!(
                svg,
                r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="9" fill="none" stroke="#ff7f0e" stroke-width="2"/>"##
            );
        }
        let _ = writeln!(
            svg,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="5" fill="{}"><title>{} {}</title></circle>"#,
            kind_color(&p.as_verdict()),
            p.word,
            p.as_verdict()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="9">{}</text>"#,
            cx + 7.0,
            cy - 7.0,
            p.word
        );
    }
    if let Some(c) = band {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">ring: area within A* ± δ = {:.3} ± {:.3} V·s</text>"#,
            m + 8.0,
            m + 18.0,
            c.area_center_vs,
            c.area_half_width_vs
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(LocusMap { csv, svg, warnings })
}

/// Words grouped by the reject family they belong to, for reports.
pub fn l3_family(word: &Word) -> &'static str {
    if !in_block_order(word) || word.is_empty() {
        return "order";
    }
    let (a, b, c) = (
        word.count(Symbol::A),
        word.count(Symbol::B),
        word.count(Symbol::C),
    );
    if a == b && b == c {
        "accept"
    } else if b == c {
        if a > b { "+a" } else { "-a" }
    } else if a == c {
        if b > a { "+b" } else { "-b" }
    } else if a == b {
        if c > a { "+c" } else { "-c" }
    } else {
        "mixed"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let s = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.5]];
        let (x, fx, hist, evals) = nelder_mead(&mut f, s, 400, 1e-14);
        assert!(fx < 1e-8, "{fx}");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 2.0).abs() < 1e-3);
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
        assert!(evals <= 400);
    }

    #[test]
    fn nelder_mead_respects_tiny_budgets() {
        let mut calls = 0;
        let mut f = |x: &[f64]| {
            calls += 1;
            x[0] * x[0]
        };
        let s = vec![vec![1.0], vec![2.0]];
        let (_, fx, _, evals) = nelder_mead(&mut f, s, 1, 0.0);
        assert_eq!(evals, 1);
        assert_eq!(fx, 1.0);
        assert_eq!(calls, 1);
    }

    #[test]
    fn curated_set_contents() {
        let set = curated_l3_set();
        for n in 1..=4 {
            assert!(set.contains(&Word::anbncn(n)));
        }
        assert!(set.contains(&"aaabbcc".parse().unwrap()));
        assert!(set.contains(&"ba".parse().unwrap()));
        // 4 accepts, 24 perturbations, 86 order violations.
        assert_eq!(set.len(), 4 + 24 + 86);
        let unique: std::collections::HashSet<_> = set.iter().collect();
        assert_eq!(unique.len(), set.len());
    }

    #[test]
    fn families() {
        let f = |s: &str| l3_family(&s.parse().unwrap());
        assert_eq!(f("aabbcc"), "accept");
        assert_eq!(f("aaabbcc"), "+a");
        assert_eq!(f("aabcc"), "-b");
        assert_eq!(f("aabbccc"), "+c");
        assert_eq!(f("bac"), "order");
    }

    #[test]
    fn tiny_locus_map() {
        let p = |w: &str, f: f64| TmReport {
            word: w.parse().unwrap(),
            frequency_hz: f,
            amplitude_diff_v: 0.1,
            area_vs: 90.0,
            verdict: Outcome::Accept,
            reject_kind: None,
        };
        let pts = [p("abc", 0.1), p("aabbcc", 0.11)];
        let map = locus_map(&pts, None).unwrap();
        assert_eq!(map.csv.lines().count(), 3);
        assert_eq!(map.warnings.len(), 1);
        assert!(map.svg.contains("<polyline"));
        assert!(locus_map(&pts[..1], None).is_err());
    }
}
