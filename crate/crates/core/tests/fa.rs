use chemautomata::analysis::{differential_test, suite_words, Automaton};
use chemautomata::chem_fa::{equilibrate_precipitation, precipitation_extent, PrecipitationModel};
use chemautomata::par::Jobs;
use chemautomata::thermo::ThermoDb;
use chemautomata::{Language, RejectKind, Verdict, Word};
use proptest::prelude::*;

fn auto() -> Automaton {
    Automaton::fa(&ThermoDb::builtin()).unwrap()
}

fn run(s: &str) -> Verdict {
    auto().run(&s.parse::<Word>().unwrap()).unwrap().1
}

/// Bisection on `(a − x)(b − x) = K` over `[0, min(a, b)]`.
fn extent_by_bisection(a: f64, b: f64, k: f64) -> f64 {
    if a * b <= k {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, a.min(b));
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if (a - mid) * (b - mid) > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn observed_sequences() {
    assert_eq!(run("aab"), Verdict::ACCEPT);
    assert_eq!(run("aaa"), Verdict::reject(RejectKind::NoReaction));
    assert_eq!(run("b"), Verdict::reject(RejectKind::NoReaction));
}

#[test]
fn aab_leaves_solid_and_heat() {
    let a = auto();
    let (traj, _) = a.run(&"aab".parse().unwrap()).unwrap();
    let last = traj.samples.last().unwrap();
    assert!(last.observables[0] > 1e-6);
    // ΔH°r from the formation table: −(−55.4) kJ/mol per mole precipitated.
    assert!((last.observables[1] - 55.4 * last.observables[0]).abs() < 1e-9);
}

#[test]
fn symmetric_extent() {
    let x = precipitation_extent(0.01, 0.01, 3.17e-8);
    assert!((x - 9.822e-3).abs() < 1e-6);
    assert_eq!(precipitation_extent(0.0, 0.3, 3.17e-8), 0.0);
}

#[test]
fn reaction_enthalpy_comes_from_formation_table() {
    let m = PrecipitationModel::from_db(&ThermoDb::builtin()).unwrap();
    // ΔH°f: AgIO₃(s) −171.1, Ag⁺ +105.6, IO₃⁻ −221.3 kJ/mol.
    assert!((m.dh_kj_per_mol - (-171.1 - 105.6 + 221.3)).abs() < 1e-9);
}

#[test]
fn exhaustive_suite_to_length_8() {
    let words = suite_words(Language::L1, 8);
    let r = differential_test(&auto(), &words, Some(8), Jobs::default()).unwrap();
    assert_eq!(r.words, 510);
    assert_eq!(r.mismatches, 0, "{:?}", r.mismatched().collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn extent_matches_bisection(a in 0.0f64..0.05, b in 0.0f64..0.05) {
        let k = 3.17e-8;
        let x = precipitation_extent(a, b, k);
        let y = extent_by_bisection(a, b, k);
        prop_assert!((x - y).abs() <= 1e-12 + 1e-9 * y);
    }

    #[test]
    fn equilibrium_reaches_ksp(a in 2e-4f64..0.05, b in 2e-4f64..0.05) {
        let m = PrecipitationModel::from_db(&ThermoDb::builtin()).unwrap();
        let mut mix = m.initial_mixture().unwrap().with("Ag+", a).unwrap().with("IO3-", b).unwrap();
        equilibrate_precipitation(&mut mix, &m);
        let q = mix.get("Ag+").unwrap() * mix.get("IO3-").unwrap();
        prop_assert!((q - m.ksp).abs() <= 1e-12 * m.ksp);
    }
}
