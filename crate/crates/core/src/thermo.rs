//! Standard thermodynamic data (298.15 K, CRC Handbook values).
//!
//! The built-in table can be replaced by a `thermo.toml` in the directory
//! named by `CHEMAUTOMATA_DATA_DIR`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATA_DIR_ENV: &str = "CHEMAUTOMATA_DATA_DIR";
pub const THERMO_FILE: &str = "thermo.toml";
pub const SCHEMA_VERSION: u32 = 1;

/// Heat of `OH⁻ + H⁺ → H₂O` used for the acid–base ledger.
pub const NEUTRALIZATION_KJ_PER_MOL: f64 = -55.89;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoDb {
    pub schema_version: u32,
    /// ΔH°f per species, kJ/mol.
    pub formation_kj_per_mol: BTreeMap<String, f64>,
    /// ΔH°r per named reaction, kJ/mol.
    pub reaction_kj_per_mol: BTreeMap<String, f64>,
    /// Formation entry standing for each reactor species in the yield
    /// denominator.
    pub input_species: BTreeMap<String, String>,
    /// Reactor species left out of the yield denominator. NaOH enters
    /// through OH⁻(aq) only, so Na⁺ is listed here.
    #[serde(default)]
    pub spectators: Vec<String>,
    pub constants: Constants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Solubility product of AgIO₃, M².
    pub ksp_agio3_m2: f64,
    pub pka1_malonic: f64,
    pub pka2_malonic: f64,
    pub kw: f64,
}

impl Default for ThermoDb {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ThermoDb {
    pub fn builtin() -> Self {
        let formation = [
            ("Ag+(aq)", 105.6),
            ("IO3-(aq)", -221.3),
            ("AgIO3(s)", -171.1),
            ("K+(aq)", -252.4),
            ("NO3-(aq)", -207.4),
            ("KIO3(s)", -501.4),
            ("AgNO3(s)", -124.4),
            ("Na+(aq)", -240.1),
            ("OH-(aq)", -230.0),
            ("H+(aq)", 0.0),
            ("H2O(l)", -285.8),
            ("CH2(COOH)2(s)", -891.0),
            ("NaBrO3(s)", -342.5),
            ("BrO3-(aq)", -67.1),
        ];
        let reactions = [("neutralization", NEUTRALIZATION_KJ_PER_MOL)];
        let inputs = [
            ("OH-", "OH-(aq)"),
            ("CH2(COOH)2", "CH2(COOH)2(s)"),
            ("IO3-", "IO3-(aq)"),
            ("Ag+", "Ag+(aq)"),
            ("BrO3-", "BrO3-(aq)"),
        ];
        let spectators = ["Na+", "K+", "NO3-", "MethylRed"];
        let mut db = ThermoDb {
            schema_version: SCHEMA_VERSION,
            formation_kj_per_mol: formation
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
            reaction_kj_per_mol: reactions
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
            input_species: inputs
                .iter()
                .map(|&(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            spectators: spectators.iter().map(|s| s.to_string()).collect(),
            constants: Constants {
                ksp_agio3_m2: 3.17e-8,
                pka1_malonic: 2.85,
                pka2_malonic: 5.70,
                kw: 1e-14,
            },
        };
        let dh = db.precipitation_enthalpy();
        db.reaction_kj_per_mol
            .insert("agio3_precipitation".to_string(), dh);
        db
    }

    /// Built-in table, or `$CHEMAUTOMATA_DATA_DIR/thermo.toml` when the
    /// variable is set.
    pub fn load() -> Result<Self> {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) => Self::from_file(&Path::new(&dir).join(THERMO_FILE)),
            None => Ok(Self::builtin()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let db: ThermoDb = toml::from_str(&text)?;
        db.validate()?;
        Ok(db)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Configuration(format!(
                "thermo schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for (input, entry) in &self.input_species {
            if !self.formation_kj_per_mol.contains_key(entry) {
                return Err(Error::Configuration(format!(
                    "input species {input} maps to {entry}, which has no formation enthalpy"
                )));
            }
        }
        let c = &self.constants;
        if !(c.ksp_agio3_m2 > 0.0 && c.kw > 0.0 && c.pka1_malonic < c.pka2_malonic) {
            return Err(Error::Configuration("invalid equilibrium constants".into()));
        }
        Ok(())
    }

    pub fn formation(&self, species: &str) -> Result<f64> {
        self.formation_kj_per_mol
            .get(species)
            .copied()
            .ok_or_else(|| Error::Configuration(format!("no formation enthalpy for {species}")))
    }

    pub fn reaction(&self, name: &str) -> Result<f64> {
        self.reaction_kj_per_mol
            .get(name)
            .copied()
            .ok_or_else(|| Error::Configuration(format!("no reaction enthalpy for {name}")))
    }

    pub fn is_spectator(&self, species: &str) -> bool {
        self.spectators.iter().any(|s| s == species)
    }

    /// ΔH°f used for a reactor species in the yield denominator.
    pub fn input_formation(&self, recipe_species: &str) -> Result<f64> {
        let entry = self.input_species.get(recipe_species).ok_or_else(|| {
            Error::Configuration(format!("recipe species {recipe_species} has no thermo entry"))
        })?;
        self.formation(entry)
    }

    /// Ag⁺(aq) + IO₃⁻(aq) → AgIO₃(s), from formation enthalpies.
    pub fn precipitation_enthalpy(&self) -> f64 {
        let f = |k: &str| self.formation_kj_per_mol.get(k).copied().unwrap_or(f64::NAN);
        f("AgIO3(s)") - f("Ag+(aq)") - f("IO3-(aq)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precipitation_is_exothermic() {
        let db = ThermoDb::builtin();
        let dh = db.reaction("agio3_precipitation").unwrap();
        assert!((dh - (-55.4)).abs() < 1e-9, "{dh}");
    }

    #[test]
    fn neutralization_value() {
        assert_eq!(
            ThermoDb::builtin().reaction("neutralization").unwrap(),
            -55.89
        );
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let db = ThermoDb::builtin();
        let text = toml::to_string(&db).unwrap();
        let back: ThermoDb = toml::from_str(&text).unwrap();
        assert_eq!(back, db);
        let mut bad = db.clone();
        bad.input_species
            .insert("BrO3-".into(), "missing(aq)".into());
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unknown_input_species_is_a_configuration_error() {
        let db = ThermoDb::builtin();
        assert!(matches!(
            db.input_formation("glucose"),
            Err(Error::Configuration(_))
        ));
        assert_eq!(db.input_formation("OH-").unwrap(), -230.0);
        assert!(db.is_spectator("Na+"));
    }
}
