//! Semi-batch, well-stirred one-pot reactor.
//!
//! A run feeds one aliquot per symbol at fixed intervals `τ`, lets the
//! chemistry model equilibrate instantly after each aliquot and then evolve
//! for the rest of the interval while the state is sampled.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formal::{Language, RejectKind, Symbol, Verdict, Word};
use crate::ode::{Integrator, Tolerances};

/// Transient discarded at the start of the post-`#` window, s.
pub const TRANSIENT_S: f64 = 30.0;
pub const DEFAULT_TAU_S: f64 = 300.0;
pub const DEFAULT_TEMPERATURE_K: f64 = 298.15;

#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    species: Arc<[String]>,
    conc: Vec<f64>,
    pub volume_dm3: f64,
    pub temperature_k: f64,
    /// Σ ΔH°r·ξ over every reaction so far, kJ. Negative when heat was
    /// released; see [`Mixture::heat_released_kj`].
    pub reaction_enthalpy_kj: f64,
}

impl Mixture {
    /// All species at zero concentration.
    pub fn new(species: &[&str], volume_dm3: f64, temperature_k: f64) -> Result<Self> {
        if !(volume_dm3 > 0.0 && volume_dm3.is_finite()) {
            return Err(Error::input(format!("volume must be > 0, got {volume_dm3}")));
        }
        if !(temperature_k > 0.0) {
            return Err(Error::input(format!("temperature must be > 0, got {temperature_k}")));
        }
        Ok(Mixture {
            species: species.iter().map(|s| s.to_string()).collect(),
            conc: vec![0.0; species.len()],
            volume_dm3,
            temperature_k,
            reaction_enthalpy_kj: 0.0,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub(crate) fn species_arc(&self) -> Arc<[String]> {
        Arc::clone(&self.species)
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.conc[i])
    }

    pub fn concentrations(&self) -> &[f64] {
        &self.conc
    }

    pub fn concentrations_mut(&mut self) -> &mut [f64] {
        &mut self.conc
    }

    pub fn set(&mut self, name: &str, molar: f64) -> Result<()> {
        let i = self
            .index(name)
            .ok_or_else(|| Error::input(format!("unknown species {name}")))?;
        if !(molar >= 0.0 && molar.is_finite()) {
            return Err(Error::input(format!("concentration of {name} must be finite and >= 0")));
        }
        self.conc[i] = molar;
        Ok(())
    }

    /// Builder-style [`Mixture::set`].
    pub fn with(mut self, name: &str, molar: f64) -> Result<Self> {
        self.set(name, molar)?;
        Ok(self)
    }

    pub fn moles(&self, name: &str) -> Option<f64> {
        self.get(name).map(|c| c * self.volume_dm3)
    }

    pub fn heat_released_kj(&self) -> f64 {
        0.0 - self.reaction_enthalpy_kj
    }
}

/// One symbol's aliquot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aliquot {
    pub volume_dm3: f64,
    pub amounts_mol: BTreeMap<String, f64>,
}

impl Aliquot {
    pub fn new(volume_dm3: f64, amounts: &[(&str, f64)]) -> Self {
        Aliquot {
            volume_dm3,
            amounts_mol: amounts.iter().map(|&(s, n)| (s.to_string(), n)).collect(),
        }
    }

    pub fn amount(&self, species: &str) -> f64 {
        self.amounts_mol.get(species).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volume_dm3 > 0.0 && self.volume_dm3.is_finite()) {
            return Err(Error::input(format!(
                "aliquot volume must be > 0, got {}",
                self.volume_dm3
            )));
        }
        for (s, &n) in &self.amounts_mol {
            if !n.is_finite() {
                return Err(Error::input(format!("non-finite amount of {s}")));
            }
            if n < 0.0 {
                return Err(Error::input(format!("negative amount of {s}")));
            }
        }
        Ok(())
    }
}

/// A symbol fed to the reactor: an input letter or the end marker `#`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeedSymbol {
    Input(Symbol),
    EndMarker,
}

impl fmt::Display for FeedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeedSymbol::Input(s) => write!(f, "{s}"),
            FeedSymbol::EndMarker => f.write_str("#"),
        }
    }
}

impl FromStr for FeedSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some('#'), None) => Ok(FeedSymbol::EndMarker),
            (Some(c), None) => Symbol::from_char(c)
                .map(FeedSymbol::Input)
                .ok_or_else(|| Error::input(format!("unknown feed symbol {s:?}"))),
            _ => Err(Error::input(format!("unknown feed symbol {s:?}"))),
        }
    }
}

impl Serialize for FeedSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeedSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-symbol aliquots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AliquotRecipe {
    pub id: String,
    pub aliquots: BTreeMap<FeedSymbol, Aliquot>,
}

impl AliquotRecipe {
    pub fn new(id: &str) -> Self {
        AliquotRecipe {
            id: id.to_string(),
            aliquots: BTreeMap::new(),
        }
    }

    pub fn with(mut self, symbol: FeedSymbol, aliquot: Aliquot) -> Self {
        self.aliquots.insert(symbol, aliquot);
        self
    }

    pub fn get(&self, symbol: FeedSymbol) -> Result<&Aliquot> {
        self.aliquots
            .get(&symbol)
            .ok_or_else(|| Error::input(format!("recipe {} has no aliquot for {symbol}", self.id)))
    }

    pub fn validate(&self) -> Result<()> {
        self.aliquots.values().try_for_each(Aliquot::validate)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedSchedule {
    pub tau_s: f64,
    pub word: Word,
    pub end_marker: bool,
}

impl FeedSchedule {
    pub fn new(word: Word, tau_s: f64, end_marker: bool) -> Result<Self> {
        if !(tau_s > TRANSIENT_S && tau_s.is_finite()) {
            return Err(Error::input(format!(
                "symbol interval must exceed {TRANSIENT_S} s, got {tau_s}"
            )));
        }
        Ok(FeedSchedule {
            tau_s,
            word,
            end_marker,
        })
    }

    /// Injection time of `#`: `τ × |word|`.
    pub fn t_end_marker(&self) -> f64 {
        self.tau_s * self.word.len() as f64
    }

    /// `τ′ = τ − 30 s`.
    pub fn tau_prime(&self) -> f64 {
        self.tau_s - TRANSIENT_S
    }

    pub fn feed(&self) -> Vec<FeedSymbol> {
        let mut v: Vec<_> = self.word.iter().map(|&s| FeedSymbol::Input(s)).collect();
        if self.end_marker {
            v.push(FeedSymbol::EndMarker);
        }
        v
    }

    pub fn t_final(&self) -> f64 {
        self.tau_s * self.feed().len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t_s: f64,
    pub conc: Vec<f64>,
    pub volume_dm3: f64,
    pub reaction_enthalpy_kj: f64,
    pub observables: Vec<f64>,
}

/// State right after a symbol's aliquot has equilibrated.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolEvent {
    pub index: usize,
    pub symbol: FeedSymbol,
    pub t_s: f64,
    pub observables: Vec<f64>,
    pub status: Option<RejectKind>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub species: Arc<[String]>,
    pub observable_names: Vec<String>,
    pub samples: Vec<Sample>,
    pub events: Vec<SymbolEvent>,
    pub tau_s: f64,
    pub t_end_marker_s: f64,
    /// First in-run reject, if any. Integration continues regardless.
    pub pinned: Option<(usize, RejectKind)>,
    pub final_mixture: Mixture,
}

impl Trajectory {
    pub fn observable_index(&self, name: &str) -> Option<usize> {
        self.observable_names.iter().position(|s| s == name)
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// `(t, value)` of one observable column.
    pub fn observable_series(&self, name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let i = self.observable_index(name)?;
        Some(
            self.samples
                .iter()
                .map(|s| (s.t_s, s.observables[i]))
                .unzip(),
        )
    }

    /// CSV with header `t,species...,observables...`.
    pub fn write_csv<W: Write>(&self, model: &dyn ChemistryModel, out: &mut W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.species.iter().cloned());
        header.extend(self.observable_names.iter().cloned());
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.t_s.to_string()];
            row.extend(s.conc.iter().map(|c| c.to_string()));
            row.extend(
                s.observables
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| model.render_observable(i, v)),
            );
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Moles injected so far, per species.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeedLedger {
    pub injected_mol: BTreeMap<String, f64>,
}

impl FeedLedger {
    pub fn injected(&self, species: &str) -> f64 {
        self.injected_mol.get(species).copied().unwrap_or(0.0)
    }

    fn record(&mut self, aliquot: &Aliquot) {
        for (s, &n) in &aliquot.amounts_mol {
            *self.injected_mol.entry(s.clone()).or_default() += n;
        }
    }
}

/// Chemistry of one automaton. Implementations are immutable and shared
/// across concurrent runs.
pub trait ChemistryModel: Sync {
    fn language(&self) -> Language;

    fn species(&self) -> &'static [&'static str];

    fn observable_names(&self) -> &'static [&'static str];

    fn observables(&self, mix: &Mixture) -> Vec<f64>;

    fn render_observable(&self, _column: usize, value: f64) -> String {
        value.to_string()
    }

    /// Fast chemistry, applied right after an aliquot lands.
    fn equilibrate(&self, mix: &mut Mixture) -> Result<()>;

    /// Consulted after every symbol; `Some` pins an in-run reject.
    /// `ledger` holds what was injected before this aliquot.
    fn check_symbol(
        &self,
        _symbol: FeedSymbol,
        _aliquot: &Aliquot,
        _mix: &Mixture,
        _ledger: &FeedLedger,
    ) -> Option<RejectKind> {
        None
    }

    /// Slow chemistry between aliquots. Models with only instantaneous
    /// chemistry keep the default.
    fn evolve(
        &self,
        _mix: &mut Mixture,
        _t0: f64,
        _duration: f64,
        _integ: &mut Integrator,
    ) -> std::result::Result<(), String> {
        Ok(())
    }

    fn default_sample_dt(&self, tau_s: f64) -> f64 {
        tau_s / 10.0
    }

    /// End-of-computation verdict.
    fn verdict(&self, traj: &Trajectory) -> Result<Verdict>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSettings {
    pub tol: Tolerances,
    /// Sampling interval; `None` uses the model default.
    pub sample_dt_s: Option<f64>,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            tol: Tolerances {
                rtol: 1e-6,
                atol: 1e-12,
            },
            sample_dt_s: None,
        }
    }
}

/// Add an aliquot: `V′ = V + v`, old concentrations scale by `V/V′`, injected
/// species gain `n/V′`.
pub fn inject_aliquot(mix: &Mixture, aliquot: &Aliquot) -> Result<Mixture> {
    aliquot.validate()?;
    let mut out = mix.clone();
    let v_new = mix.volume_dm3 + aliquot.volume_dm3;
    let scale = mix.volume_dm3 / v_new;
    for c in &mut out.conc {
        *c *= scale;
    }
    for (s, &n) in &aliquot.amounts_mol {
        let i = mix
            .index(s)
            .ok_or_else(|| Error::input(format!("aliquot species {s} not present in mixture")))?;
        out.conc[i] += n / v_new;
    }
    out.volume_dm3 = v_new;
    Ok(out)
}

/// Feed the schedule through the reactor and record the trajectory.
pub fn simulate(
    model: &dyn ChemistryModel,
    recipe: &AliquotRecipe,
    schedule: &FeedSchedule,
    initial: &Mixture,
    settings: &SimSettings,
) -> Result<Trajectory> {
    model.language().check_alphabet(&schedule.word)?;
    let feed = schedule.feed();
    for &s in &feed {
        recipe.get(s)?.validate()?;
    }
    if initial.species().len() != model.species().len()
        || initial
            .species()
            .iter()
            .zip(model.species())
            .any(|(a, b)| a != b)
    {
        return Err(Error::input("initial mixture does not use the model's species table"));
    }

    let tau = schedule.tau_s;
    let dt_req = settings
        .sample_dt_s
        .unwrap_or_else(|| model.default_sample_dt(tau));
    if !(dt_req > 0.0) {
        return Err(Error::input("sampling interval must be > 0"));
    }
    let per_interval = (tau / dt_req).round().max(1.0) as usize;
    let dt = tau / per_interval as f64;

    let mut traj = Trajectory {
        species: initial.species_arc(),
        observable_names: model.observable_names().iter().map(|s| s.to_string()).collect(),
        samples: Vec::with_capacity(feed.len() * per_interval + 1),
        events: Vec::with_capacity(feed.len()),
        tau_s: tau,
        t_end_marker_s: schedule.t_end_marker(),
        pinned: None,
        final_mixture: initial.clone(),
    };
    let mut mix = initial.clone();
    let mut ledger = FeedLedger::default();
    let mut integ = Integrator::new(settings.tol);

    let record = |traj: &mut Trajectory, t: f64, mix: &Mixture| {
        traj.samples.push(Sample {
            t_s: t,
            conc: mix.concentrations().to_vec(),
            volume_dm3: mix.volume_dm3,
            reaction_enthalpy_kj: mix.reaction_enthalpy_kj,
            observables: model.observables(mix),
        });
    };

    for (i, &sym) in feed.iter().enumerate() {
        let t_i = i as f64 * tau;
        let aliquot = recipe.get(sym)?;
        mix = inject_aliquot(&mix, aliquot)?;
        model.equilibrate(&mut mix)?;
        let status = model.check_symbol(sym, aliquot, &mix, &ledger);
        ledger.record(aliquot);
        if let (Some(kind), None) = (status, traj.pinned) {
            traj.pinned = Some((i, kind));
        }
        traj.events.push(SymbolEvent {
            index: i,
            symbol: sym,
            t_s: t_i,
            observables: model.observables(&mix),
            status,
        });
        integ.reset_step();
        for k in 0..per_interval {
            let t = t_i + k as f64 * dt;
            record(&mut traj, t, &mix);
            if let Err(message) = model.evolve(&mut mix, t, dt, &mut integ) {
                traj.final_mixture = mix;
                return Err(Error::Simulation {
                    message,
                    t_s: t,
                    partial: Box::new(traj),
                });
            }
        }
    }
    record(&mut traj, feed.len() as f64 * tau, &mix);
    traj.final_mixture = mix;
    Ok(traj)
}

/// [`simulate`] plus the verdict. An in-run reject pins the verdict.
pub fn run_word(
    model: &dyn ChemistryModel,
    recipe: &AliquotRecipe,
    schedule: &FeedSchedule,
    initial: &Mixture,
    settings: &SimSettings,
) -> Result<(Trajectory, Verdict)> {
    let traj = simulate(model, recipe, schedule, initial, settings)?;
    let verdict = match traj.pinned {
        Some((_, kind)) => Verdict::reject(kind),
        None => model.verdict(&traj)?,
    };
    Ok((traj, verdict))
}

/// JSON record written next to a trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub language: Language,
    pub word: Word,
    pub recipe_id: String,
    pub seed: u64,
    pub verdict: Verdict,
}
