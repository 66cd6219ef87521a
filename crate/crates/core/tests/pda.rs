use chemautomata::analysis::{differential_test, suite_words, Automaton};
use chemautomata::chem_pda::{
    charge_residual, enthalpy_yield, enthalpy_yield_approx, pda_process_symbol, solve_h, solve_ph,
    AcidBaseModel, PairCounting, StackStatus,
};
use chemautomata::formal::Symbol;
use chemautomata::par::Jobs;
use chemautomata::reactor::{ChemistryModel, FeedSymbol};
use chemautomata::thermo::ThermoDb;
use chemautomata::{Language, RejectKind, Verdict, Word};
use proptest::prelude::*;

fn model() -> AcidBaseModel {
    AcidBaseModel::from_db(&ThermoDb::builtin()).unwrap()
}

fn auto() -> Automaton {
    Automaton::pda(&ThermoDb::builtin()).unwrap()
}

fn w(s: &str) -> Word {
    s.parse().unwrap()
}

/// Scan the charge-balance residual on a 1e-4 pH grid for the sign change,
/// then bisect inside that cell.
fn ph_by_scan(c_acid: f64, c_base: f64, m: &AcidBaseModel) -> f64 {
    let r = |ph: f64| charge_residual(10f64.powf(-ph), c_acid, c_base, m);
    let mut lo = 0.0;
    while r(lo + 1e-4) > 0.0 {
        lo += 1e-4;
    }
    let mut hi = lo + 1e-4;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if r(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn ph_examples() {
    let m = model();
    assert!((solve_ph(0.0, 0.0, &m).unwrap() - 7.0).abs() < 1e-3);
    assert!((solve_ph(0.0, 0.01, &m).unwrap() - 12.0).abs() < 1e-3);
    let eq = solve_ph(0.01, 0.01, &m).unwrap();
    assert!((eq - ph_by_scan(0.01, 0.01, &m)).abs() < 1e-6);
    // The amphiprotic mean is only a high-concentration limit; at 0.01 M the
    // exact root sits a few hundredths above it.
    assert!((eq - 0.5 * (2.85 + 5.70)).abs() < 0.05, "{eq}");
    let strong = solve_ph(0.05, 0.05, &m).unwrap();
    assert!((strong - 0.5 * (2.85 + 5.70)).abs() < 0.01, "{strong}");
}

#[test]
fn negative_totals_are_rejected() {
    assert!(solve_ph(-1e-3, 0.0, &model()).is_err());
}

#[test]
fn stack_moves() {
    let m = model();
    let recipe = AcidBaseModel::default_recipe();
    let water = m.initial_mixture().unwrap();
    let open = FeedSymbol::Input(Symbol::Open);
    let close = FeedSymbol::Input(Symbol::Close);

    let (after_open, s) = pda_process_symbol(&water, open, &recipe, &m).unwrap();
    assert_eq!(s, StackStatus::Ok);
    let (_, s) = pda_process_symbol(&water, close, &recipe, &m).unwrap();
    assert_eq!(s, StackStatus::Underflow);
    let (pair, s) = pda_process_symbol(&after_open, close, &recipe, &m).unwrap();
    assert_eq!(s, StackStatus::Ok);
    let ph = m.observables(&pair)[0];
    assert!((ph - m.midpoint_ph).abs() <= m.band_eps, "{ph}");
}

#[test]
fn verdicts() {
    let a = auto();
    assert_eq!(a.run(&w("(())")).unwrap().1, Verdict::ACCEPT);
    assert_eq!(a.run(&w("((")).unwrap().1, Verdict::reject(RejectKind::NonEmptyStack));
    assert_eq!(a.run(&w(")")).unwrap().1, Verdict::reject(RejectKind::PopEmptyStack));
}

#[test]
fn one_pair_releases_one_aliquot_of_neutralisation() {
    let a = auto();
    let db = ThermoDb::builtin();
    let (traj, _) = a.run(&w("()")).unwrap();
    let c_mol = a.recipe.get(FeedSymbol::Input(Symbol::Close)).unwrap().amount("CH2(COOH)2");
    let heat = traj.final_mixture.heat_released_kj();
    // −ΔH°r = 55.89 kJ/mol; water's own OH⁻ adds a few ppm.
    assert!((heat - 55.89 * c_mol).abs() < 1e-3 * 55.89 * c_mol, "{heat}");
    let y = enthalpy_yield(&traj, &a.recipe, &db).unwrap();
    let approx = enthalpy_yield_approx(&w("()"), &a.recipe, &db, PairCounting::default()).unwrap();
    assert!((y - approx).abs() < 1e-3 * approx.abs());
}

#[test]
fn close_before_open_still_neutralises() {
    let a = auto();
    let db = ThermoDb::builtin();
    let (traj, _) = a.run(&w(")(")).unwrap();
    assert!(traj.final_mixture.heat_released_kj() > 0.0);
    assert_eq!(PairCounting::Prefix.count(&w(")(")), 0);
    assert_eq!(PairCounting::Min.count(&w(")(")), 1);
    assert_eq!(enthalpy_yield_approx(&w(")("), &a.recipe, &db, PairCounting::Prefix).unwrap(), 0.0);
}

#[test]
fn dyck_beats_all_opens() {
    let a = auto();
    let db = ThermoDb::builtin();
    let y = |s: &str| enthalpy_yield(&a.simulate(&w(s)).unwrap(), &a.recipe, &db).unwrap().abs();
    assert!(y("(())") > y("(((("));
    assert!(y("(())") > y("))))"));
}

#[test]
fn approximation_tracks_ledger_on_dyck_words() {
    let a = auto();
    let db = ThermoDb::builtin();
    for x in suite_words(Language::L2, 10) {
        if !Language::L2.recognize(&x).unwrap().is_accept() {
            continue;
        }
        let exact = enthalpy_yield(&a.simulate(&x).unwrap(), &a.recipe, &db).unwrap();
        let approx = enthalpy_yield_approx(&x, &a.recipe, &db, PairCounting::default()).unwrap();
        assert!((exact - approx).abs() <= 0.10 * exact.abs(), "{x}: {exact} vs {approx}");
    }
}

#[test]
fn exhaustive_suite_to_length_10() {
    let words = suite_words(Language::L2, 10);
    let r = differential_test(&auto(), &words, Some(10), Jobs::default()).unwrap();
    assert_eq!(r.words, 2046);
    assert_eq!(r.mismatches, 0, "{:?}", r.mismatched().collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn solver_matches_scan(la in -6.0f64..-1.0, lb in -6.0f64..-1.0) {
        let m = model();
        let (ca, cb) = (10f64.powf(la), 10f64.powf(lb));
        prop_assert!((solve_ph(ca, cb, &m).unwrap() - ph_by_scan(ca, cb, &m)).abs() < 1e-6);
        let h = solve_h(ca, cb, &m).unwrap();
        prop_assert!(charge_residual(h, ca, cb, &m).abs() < 1e-12);
    }

    #[test]
    fn ph_is_monotone(la in -6.0f64..-1.0, lb in -6.0f64..-1.0) {
        let m = model();
        let (ca, cb) = (10f64.powf(la), 10f64.powf(lb));
        let p = solve_ph(ca, cb, &m).unwrap();
        prop_assert!(solve_ph(ca * 1.1, cb, &m).unwrap() < p);
        prop_assert!(solve_ph(ca, cb * 1.1, &m).unwrap() > p);
    }
}
