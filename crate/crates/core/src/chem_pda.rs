//! Acid–base one-stack automaton for the Dyck language. NaOH is `(`,
//! malonic acid is `)`, Methyl Red is `#`, and the pH plays the stack: it
//! sits at the hydrogen-malonate point when the stack is empty, above it
//! while opens are pending and below it once a close finds nothing to pop.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formal::{matched_pairs_min, matched_pairs_prefix, Language, RejectKind, Symbol, Verdict, Word};
use crate::reactor::{
    inject_aliquot, Aliquot, AliquotRecipe, ChemistryModel, FeedLedger, FeedSymbol, Mixture,
    Trajectory, DEFAULT_TEMPERATURE_K,
};
use crate::thermo::ThermoDb;

pub const SPECIES: [&str; 5] = ["Na+", "OH-", "H+", "CH2(COOH)2", "MethylRed"];
const NA: usize = 0;
const OH: usize = 1;
const H: usize = 2;
const MAL: usize = 3;

pub const OBSERVABLES: [&str; 3] = ["pH", "indicator_color", "heat_kJ"];

/// Bracket for `[H⁺]`, M.
const H_MIN: f64 = 1e-16;
const H_MAX: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndicatorColor {
    Red,
    Transition,
    Yellow,
}

impl IndicatorColor {
    fn code(self) -> f64 {
        match self {
            IndicatorColor::Red => 0.0,
            IndicatorColor::Transition => 1.0,
            IndicatorColor::Yellow => 2.0,
        }
    }
}

impl fmt::Display for IndicatorColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndicatorColor::Red => "red",
            IndicatorColor::Transition => "transition",
            IndicatorColor::Yellow => "yellow",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcidBaseModel {
    pub ka1: f64,
    pub ka2: f64,
    pub kw: f64,
    pub midpoint_ph: f64,
    pub band_eps: f64,
    /// Methyl Red turns from red to yellow across this pH range.
    pub indicator_band: (f64, f64),
    /// Neutralisation enthalpy, kJ/mol.
    pub dh_kj_per_mol: f64,
}

impl AcidBaseModel {
    pub const DEFAULT_BAND_EPS: f64 = 0.30;

    pub fn from_db(db: &ThermoDb) -> Result<Self> {
        let c = &db.constants;
        let m = AcidBaseModel {
            ka1: 10f64.powf(-c.pka1_malonic),
            ka2: 10f64.powf(-c.pka2_malonic),
            kw: c.kw,
            midpoint_ph: 0.5 * (c.pka1_malonic + c.pka2_malonic),
            band_eps: Self::DEFAULT_BAND_EPS,
            indicator_band: (4.4, 6.2),
            dh_kj_per_mol: db.reaction("neutralization")?,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ka1 > self.ka2 && self.ka2 > 0.0 && self.kw > 0.0) {
            return Err(Error::Configuration("need Ka1 > Ka2 > 0 and Kw > 0".into()));
        }
        if !(self.midpoint_ph > 0.0 && self.midpoint_ph < 14.0) {
            return Err(Error::Configuration(format!(
                "midpoint pH {} outside (0, 14)",
                self.midpoint_ph
            )));
        }
        if !(self.band_eps > 0.0) {
            return Err(Error::Configuration("band_eps must be > 0".into()));
        }
        Ok(())
    }

    pub fn color(&self, ph: f64) -> IndicatorColor {
        if ph < self.indicator_band.0 {
            IndicatorColor::Red
        } else if ph <= self.indicator_band.1 {
            IndicatorColor::Transition
        } else {
            IndicatorColor::Yellow
        }
    }

    /// 0.1 dm³ of water at its own equilibrium.
    pub fn initial_mixture(&self) -> Result<Mixture> {
        let mut m = Mixture::new(&SPECIES, 0.1, DEFAULT_TEMPERATURE_K)?;
        let h = solve_h(0.0, 0.0, self)?;
        m.concentrations_mut()[H] = h;
        m.concentrations_mut()[OH] = self.kw / h;
        Ok(m)
    }

    /// Equimolar aliquots: 5 cm³ of 0.1 M NaOH for `(`, 5 cm³ of 0.1 M
    /// malonic acid for `)`, and a trace of indicator for `#`.
    pub fn default_recipe() -> AliquotRecipe {
        AliquotRecipe::new("pda-default")
            .with(
                FeedSymbol::Input(Symbol::Open),
                Aliquot::new(0.005, &[("Na+", 5e-4), ("OH-", 5e-4)]),
            )
            .with(
                FeedSymbol::Input(Symbol::Close),
                Aliquot::new(0.005, &[("CH2(COOH)2", 5e-4)]),
            )
            .with(FeedSymbol::EndMarker, Aliquot::new(0.001, &[("MethylRed", 1e-6)]))
    }

    pub fn stack_status(&self, ph: f64) -> StackStatus {
        if ph < self.midpoint_ph - self.band_eps {
            StackStatus::Underflow
        } else {
            StackStatus::Ok
        }
    }
}

/// `[H⁺] + [Na⁺] − [OH⁻] − [HMal⁻] − 2[Mal²⁻]`, M. Strictly increasing in `h`.
pub fn charge_residual(h: f64, c_acid: f64, c_base: f64, m: &AcidBaseModel) -> f64 {
    let d = h * h + m.ka1 * h + m.ka1 * m.ka2;
    let anion = c_acid * (m.ka1 * h + 2.0 * m.ka1 * m.ka2) / d;
    h + c_base - m.kw / h - anion
}

/// Equilibrium `[H⁺]` for analytical acid and base totals.
pub fn solve_h(c_acid: f64, c_base: f64, m: &AcidBaseModel) -> Result<f64> {
    if !(c_acid >= 0.0 && c_base >= 0.0 && c_acid.is_finite() && c_base.is_finite()) {
        return Err(Error::input(format!(
            "totals must be finite and >= 0, got acid {c_acid}, base {c_base}"
        )));
    }
    let f = |h: f64| charge_residual(h, c_acid, c_base, m);
    let (mut lo, mut hi) = (H_MIN.ln(), H_MAX.ln());
    if f(lo.exp()) > 0.0 || f(hi.exp()) < 0.0 {
        return Err(Error::Numerical(format!(
            "[H+] not bracketed for acid {c_acid}, base {c_base}"
        )));
    }
    // Bisect in ln h until the bracket stops shrinking.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid.exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (lo.exp(), hi.exp());
    Ok(if f(a).abs() <= f(b).abs() { a } else { b })
}

pub fn solve_ph(c_acid: f64, c_base: f64, m: &AcidBaseModel) -> Result<f64> {
    Ok(-solve_h(c_acid, c_base, m)?.log10())
}

fn mixture_ph(mix: &Mixture) -> f64 {
    -mix.concentrations()[H].log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StackStatus {
    Ok,
    /// A close found the stack empty.
    Underflow,
}

/// Inject one symbol's aliquot and read the stack.
pub fn pda_process_symbol(
    mix: &Mixture,
    symbol: FeedSymbol,
    recipe: &AliquotRecipe,
    model: &AcidBaseModel,
) -> Result<(Mixture, StackStatus)> {
    if let FeedSymbol::Input(s) = symbol {
        if !Language::L2.alphabet().contains(&s) {
            return Err(Error::InvalidSymbol {
                symbol: s.as_char(),
                language: Language::L2,
            });
        }
    }
    let mut out = inject_aliquot(mix, recipe.get(symbol)?)?;
    model.equilibrate(&mut out)?;
    let status = model.stack_status(mixture_ph(&out));
    Ok((out, status))
}

/// PopEmptyStack if any post-symbol pH fell below the band, NonEmptyStack if
/// the run ends above it, Accept otherwise.
pub fn pda_verdict(traj: &Trajectory, model: &AcidBaseModel) -> Result<Verdict> {
    let ph_col = traj
        .observable_index("pH")
        .ok_or_else(|| Error::input("trajectory has no pH column"))?;
    if traj
        .events
        .iter()
        .any(|e| model.stack_status(e.observables[ph_col]) == StackStatus::Underflow)
    {
        return Ok(Verdict::reject(RejectKind::PopEmptyStack));
    }
    let last = traj
        .samples
        .last()
        .ok_or_else(|| Error::input("empty trajectory"))?;
    if last.observables[ph_col] > model.midpoint_ph + model.band_eps {
        return Ok(Verdict::reject(RejectKind::NonEmptyStack));
    }
    Ok(Verdict::ACCEPT)
}

impl ChemistryModel for AcidBaseModel {
    fn language(&self) -> Language {
        Language::L2
    }

    fn species(&self) -> &'static [&'static str] {
        &SPECIES
    }

    fn observable_names(&self) -> &'static [&'static str] {
        &OBSERVABLES
    }

    fn observables(&self, mix: &Mixture) -> Vec<f64> {
        let ph = mixture_ph(mix);
        vec![ph, self.color(ph).code(), mix.heat_released_kj()]
    }

    fn render_observable(&self, column: usize, value: f64) -> String {
        if column == 1 {
            match value as u8 {
                0 => IndicatorColor::Red,
                1 => IndicatorColor::Transition,
                _ => IndicatorColor::Yellow,
            }
            .to_string()
        } else {
            value.to_string()
        }
    }

    /// Re-solve the pH. Whatever OH⁻ disappears was neutralised, so the heat
    /// ledger moves by ΔH°r × (OH⁻ before − OH⁻ after).
    fn equilibrate(&self, mix: &mut Mixture) -> Result<()> {
        let v = mix.volume_dm3;
        let c = mix.concentrations();
        let h = solve_h(c[MAL], c[NA], self)?;
        let oh = self.kw / h;
        let neutralised = v * (c[OH] - oh);
        mix.reaction_enthalpy_kj += self.dh_kj_per_mol * neutralised;
        let c = mix.concentrations_mut();
        c[H] = h;
        c[OH] = oh;
        Ok(())
    }

    fn check_symbol(
        &self,
        _symbol: FeedSymbol,
        _aliquot: &Aliquot,
        mix: &Mixture,
        _ledger: &FeedLedger,
    ) -> Option<RejectKind> {
        (self.stack_status(mixture_ph(mix)) == StackStatus::Underflow)
            .then_some(RejectKind::PopEmptyStack)
    }

    fn verdict(&self, traj: &Trajectory) -> Result<Verdict> {
        pda_verdict(traj, self)
    }
}

/// Formation heat of what a sequence of aliquots put into the reactor, kJ.
fn input_formation_kj<'a>(
    aliquots: impl Iterator<Item = &'a Aliquot>,
    db: &ThermoDb,
) -> Result<f64> {
    let mut total = 0.0;
    for a in aliquots {
        for (species, &n) in &a.amounts_mol {
            if db.is_spectator(species) {
                continue;
            }
            total += n * db.input_formation(species)?;
        }
    }
    Ok(total)
}

fn yield_pct(reaction_kj: f64, formation_kj: f64) -> Result<f64> {
    if formation_kj == 0.0 {
        return Err(Error::UndefinedYield);
    }
    Ok(100.0 * reaction_kj / formation_kj)
}

/// Reaction heat of the whole run over the formation heat of its input, %.
pub fn enthalpy_yield(traj: &Trajectory, recipe: &AliquotRecipe, db: &ThermoDb) -> Result<f64> {
    let aliquots = traj
        .events
        .iter()
        .map(|e| recipe.get(e.symbol))
        .collect::<Result<Vec<_>>>()?;
    let formation = input_formation_kj(aliquots.into_iter(), db)?;
    yield_pct(traj.final_mixture.reaction_enthalpy_kj, formation)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCounting {
    /// Pairs matched while scanning left to right.
    #[default]
    Prefix,
    /// `min(#open, #close)`.
    Min,
}

impl PairCounting {
    pub fn count(self, word: &Word) -> usize {
        match self {
            PairCounting::Prefix => matched_pairs_prefix(word),
            PairCounting::Min => matched_pairs_min(word),
        }
    }
}

/// Pair-counting estimate: `n_pairs · c · ΔH°r` over the input formation heat,
/// with `c` the base delivered by one `(`.
pub fn enthalpy_yield_approx(
    word: &Word,
    recipe: &AliquotRecipe,
    db: &ThermoDb,
    counting: PairCounting,
) -> Result<f64> {
    Language::L2.check_alphabet(word)?;
    let per_pair = recipe.get(FeedSymbol::Input(Symbol::Open))?.amount("OH-");
    let aliquots = word
        .iter()
        .map(|&s| recipe.get(FeedSymbol::Input(s)))
        .collect::<Result<Vec<_>>>()?;
    let formation = input_formation_kj(aliquots.into_iter(), db)?;
    let heat = counting.count(word) as f64 * per_pair * db.reaction("neutralization")?;
    yield_pct(heat, formation)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YieldReport {
    pub word: Word,
    #[serde(rename = "Y_exact_pct")]
    pub y_exact_pct: f64,
    #[serde(rename = "Y_approx_pct")]
    pub y_approx_pct: f64,
    pub n_pairs: usize,
}

pub fn yield_report(
    word: &Word,
    traj: &Trajectory,
    recipe: &AliquotRecipe,
    db: &ThermoDb,
    counting: PairCounting,
) -> Result<YieldReport> {
    Ok(YieldReport {
        word: word.clone(),
        y_exact_pct: enthalpy_yield(traj, recipe, db)?,
        y_approx_pct: enthalpy_yield_approx(word, recipe, db, counting)?,
        n_pairs: counting.count(word),
    })
}
