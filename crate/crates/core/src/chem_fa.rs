//! Precipitation automaton for L1: KIO₃ is `a`, AgNO₃ is `b`, and any word
//! that brings both ions together precipitates AgIO₃ and releases heat.

use crate::error::{Error, Result};
use crate::formal::{Language, RejectKind, Symbol, Verdict};
use crate::reactor::{
    Aliquot, AliquotRecipe, ChemistryModel, FeedSymbol, Mixture, Trajectory,
    DEFAULT_TEMPERATURE_K,
};
use crate::thermo::ThermoDb;

pub const SPECIES: [&str; 5] = ["K+", "IO3-", "Ag+", "NO3-", "AgIO3(s)"];
const IO3: usize = 1;
const AG: usize = 2;
const SOLID: usize = 4;

pub const OBSERVABLES: [&str; 2] = ["precipitate_mol", "heat_kJ"];

/// Smallest amount of solid taken as a visible precipitate, mol.
pub const VISIBILITY_MOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PrecipitationModel {
    pub ksp: f64,
    /// ΔH°r of Ag⁺ + IO₃⁻ → AgIO₃(s), kJ/mol.
    pub dh_kj_per_mol: f64,
    pub visibility_mol: f64,
}

impl PrecipitationModel {
    pub fn new(ksp: f64, dh_kj_per_mol: f64) -> Result<Self> {
        if !(ksp > 0.0 && ksp.is_finite()) {
            return Err(Error::Configuration(format!("Ksp must be > 0, got {ksp}")));
        }
        Ok(PrecipitationModel {
            ksp,
            dh_kj_per_mol,
            visibility_mol: VISIBILITY_MOL,
        })
    }

    pub fn from_db(db: &ThermoDb) -> Result<Self> {
        Self::new(db.constants.ksp_agio3_m2, db.reaction("agio3_precipitation")?)
    }

    /// Heat that must accompany a visible precipitate, kJ.
    pub fn heat_threshold_kj(&self) -> f64 {
        self.dh_kj_per_mol.abs() * self.visibility_mol
    }

    /// 0.1 dm³ of water.
    pub fn initial_mixture(&self) -> Result<Mixture> {
        Mixture::new(&SPECIES, 0.1, DEFAULT_TEMPERATURE_K)
    }

    /// 0.01 dm³ of 0.1 M KIO₃ for `a` and of 0.1 M AgNO₃ for `b`.
    pub fn default_recipe() -> AliquotRecipe {
        AliquotRecipe::new("fa-default")
            .with(
                FeedSymbol::Input(Symbol::A),
                Aliquot::new(0.01, &[("K+", 1e-3), ("IO3-", 1e-3)]),
            )
            .with(
                FeedSymbol::Input(Symbol::B),
                Aliquot::new(0.01, &[("Ag+", 1e-3), ("NO3-", 1e-3)]),
            )
    }
}

/// Amount precipitated (M) to bring `[Ag⁺][IO₃⁻]` down to `ksp`: the root of
/// `(a − x)(b − x) = ksp` below `min(a, b)`, or 0 when unsaturated.
pub fn precipitation_extent(ag: f64, io3: f64, ksp: f64) -> f64 {
    let excess = ag * io3 - ksp;
    if excess <= 0.0 {
        return 0.0;
    }
    // Rationalised form of ((a+b) − √((a−b)² + 4K))/2; no cancellation.
    let d = ag - io3;
    2.0 * excess / ((ag + io3) + (d * d + 4.0 * ksp).sqrt())
}

pub fn equilibrate_precipitation(mix: &mut Mixture, model: &PrecipitationModel) {
    let c = mix.concentrations();
    let x = precipitation_extent(c[AG], c[IO3], model.ksp);
    if x <= 0.0 {
        return;
    }
    let v = mix.volume_dm3;
    let c = mix.concentrations_mut();
    // Residuals straight from the quadratic so their product is Ksp to rounding.
    let d = c[AG] - c[IO3];
    let small = 2.0 * model.ksp / (d.abs() + (d * d + 4.0 * model.ksp).sqrt());
    let (ag, io3) = if d >= 0.0 { (small + d, small) } else { (small, small - d) };
    c[AG] = ag;
    c[IO3] = io3;
    c[SOLID] += x;
    mix.reaction_enthalpy_kj += model.dh_kj_per_mol * x * v;
}

/// Accept iff a visible precipitate formed. Heat must tell the same story.
pub fn fa_verdict(traj: &Trajectory, model: &PrecipitationModel) -> Result<Verdict> {
    let last = traj
        .samples
        .last()
        .ok_or_else(|| Error::input("empty trajectory"))?;
    let solid = last.observables[0];
    let heat = last.observables[1];
    let visible = solid >= model.visibility_mol;
    // Half the threshold leaves room for rounding in the heat ledger.
    let warm = heat > 0.5 * model.heat_threshold_kj();
    match (visible, warm) {
        (true, true) => Ok(Verdict::ACCEPT),
        (false, false) => Ok(Verdict::reject(RejectKind::NoReaction)),
        _ => Err(Error::Consistency(format!(
            "precipitate {solid:e} mol but heat released {heat:e} kJ"
        ))),
    }
}

impl ChemistryModel for PrecipitationModel {
    fn language(&self) -> Language {
        Language::L1
    }

    fn species(&self) -> &'static [&'static str] {
        &SPECIES
    }

    fn observable_names(&self) -> &'static [&'static str] {
        &OBSERVABLES
    }

    fn observables(&self, mix: &Mixture) -> Vec<f64> {
        vec![
            mix.concentrations()[SOLID] * mix.volume_dm3,
            mix.heat_released_kj(),
        ]
    }

    fn equilibrate(&self, mix: &mut Mixture) -> Result<()> {
        equilibrate_precipitation(mix, self);
        Ok(())
    }

    fn verdict(&self, traj: &Trajectory) -> Result<Verdict> {
        fa_verdict(traj, self)
    }
}
