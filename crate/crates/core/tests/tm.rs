use std::sync::OnceLock;

use chemautomata::analysis::{
    curated_l3_set, differential_test, l3_family, locus_map, run_tm, tune_recipe, Automaton,
    TuneOptions, TuneResult,
};
use chemautomata::chem_tm::{
    bz_derivatives, descriptors_from_series, limit_cycle_period, nernst_potential, BzModel,
    BzSystem, Kinetics, Pools, TmReport, TmSetup,
};
use chemautomata::formal::in_block_order;
use chemautomata::ode::{Integrator, Tolerances};
use chemautomata::par::Jobs;
use chemautomata::{RejectKind, Verdict, Word};

fn w(s: &str) -> Word {
    s.parse().unwrap()
}

fn tuned() -> &'static TuneResult {
    static T: OnceLock<TuneResult> = OnceLock::new();
    T.get_or_init(|| {
        tune_recipe(&BzModel::default(), &TmSetup::default(), &TuneOptions::default()).unwrap()
    })
}

fn tuned_auto() -> (Automaton, BzModel) {
    let t = tuned();
    let model = t.model(&BzModel::default());
    let mut auto = Automaton::tm(model.clone(), &t.setup).unwrap();
    auto.recipe = t.recipe.clone();
    (auto, model)
}

fn pools() -> Pools {
    let s = TmSetup::default();
    Pools {
        bromate: 0.02,
        organic: 0.01,
        acid: s.acid_m * 0.8,
        catalyst: 1e-4,
    }
}

#[test]
fn quiescent_without_intermediates() {
    let sys = BzSystem {
        kin: Kinetics::default(),
        pools: Pools { catalyst: 1e-4, ..pools() },
    };
    let d = bz_derivatives(&[0.0, 0.0, 0.0], &sys);
    assert_eq!(d[2], 0.0);
}

#[test]
fn limit_cycle_and_self_convergence() {
    let sys = BzSystem {
        kin: Kinetics::default(),
        pools: pools(),
    };
    let y0 = [1e-8, 1e-6, 1e-7];
    let p = |rtol| limit_cycle_period(&sys, y0, 200.0, 10, 0.05, Tolerances::new(rtol, 1e-14).unwrap());
    let coarse = p(1e-6).unwrap();
    let fine = p(1e-10).unwrap();
    assert!(coarse > 0.0);
    assert!((coarse - fine).abs() <= 1e-3 * fine, "{coarse} vs {fine}");
}

#[test]
fn rates_match_finite_differences_of_a_reference_solution() {
    let sys = BzSystem {
        kin: Kinetics::default(),
        pools: pools(),
    };
    let mut integ = Integrator::new(Tolerances::new(1e-10, 1e-16).unwrap());
    let mut y = [1e-8, 1e-6, 1e-7];
    integ.advance(&sys, &mut y, 0.0, 20.0).unwrap();
    let h = 1e-4;
    let mut a = y;
    integ.advance(&sys, &mut a, 20.0, h).unwrap();
    let mut b = [1e-8, 1e-6, 1e-7];
    let mut back = Integrator::new(Tolerances::new(1e-10, 1e-16).unwrap());
    back.advance(&sys, &mut b, 0.0, 20.0 - h).unwrap();
    let d = bz_derivatives(&y, &sys);
    for i in 0..3 {
        let fd = (a[i] - b[i]) / (2.0 * h);
        let scale = d[i].abs().max(1e-12);
        assert!((fd - d[i]).abs() / scale < 1e-4, "species {i}: {fd} vs {}", d[i]);
    }
}

#[test]
fn nernst_values() {
    let obs = BzModel::default().redox;
    assert_eq!(nernst_potential(1e-4, 1e-4, &obs).volt, obs.v0);
    let decade = nernst_potential(1e-3, 1e-4, &obs).volt - obs.v0;
    let expected = 8.314 * 298.15 / 96485.0 * 10f64.ln();
    assert!((decade - expected).abs() < 1e-12);
    assert!((decade - 0.05916).abs() < 1e-4);
    assert!(nernst_potential(0.0, 1e-4, &obs).clamped);
}

#[test]
fn synthetic_descriptors() {
    let t: Vec<f64> = (0..=600).map(|k| 30.0 + 0.5 * k as f64).collect();
    let v: Vec<f64> = t.iter().map(|&s| 0.5 + 0.1 * (2.0 * std::f64::consts::PI * s / 25.0).sin()).collect();
    let d = descriptors_from_series(&t, &v, 1.0, (30.0, 330.0), None);
    assert!((d.frequency_hz - 0.04).abs() < 1e-3);
    let flat = descriptors_from_series(&t, &vec![0.3; t.len()], 1.0, (30.0, 330.0), None);
    assert_eq!(flat.frequency_hz, 0.0);
    assert!(flat.degenerate);
}

#[test]
fn phase_violation_is_pinned() {
    let (auto, _) = tuned_auto();
    let (traj, v) = auto.run(&w("bac")).unwrap();
    assert_eq!(v, Verdict::reject(RejectKind::BadOrder));
    let (i, k) = traj.pinned.unwrap();
    assert_eq!(k, RejectKind::BadOrder);
    assert_eq!(i, 1);
}

#[test]
fn tuned_recipe_meets_its_targets() {
    let t = tuned();
    assert!(t.objective <= t.objective_initial);
    assert!(t.history.windows(2).all(|p| p[1] <= p[0]));
    let first3: Vec<f64> = t.accepted.iter().filter(|p| p.n <= 3).map(|p| p.area_vs).collect();
    let mean = first3.iter().sum::<f64>() / first3.len() as f64;
    let spread = (first3.iter().copied().fold(f64::MIN, f64::max)
        - first3.iter().copied().fold(f64::MAX, f64::min))
        / mean;
    assert!(spread <= 0.05, "{spread}");
    assert!(t.area_spread() <= 0.05);
    assert_eq!(t.calibration.signatures.len(), 6);
}

#[test]
fn figure_words_under_tuned_recipe() {
    let (auto, model) = tuned_auto();
    let calib = &tuned().calibration;
    let (_, acc) = run_tm(&auto, &model, &w("aabbcc")).unwrap();
    assert_eq!(acc.verdict, Verdict::ACCEPT);
    assert!(calib.in_band(acc.area.area_vs));
    let (_, rej) = run_tm(&auto, &model, &w("aaabbcc")).unwrap();
    assert_eq!(rej.verdict, Verdict::reject(RejectKind::ExcessA));
    assert!(!calib.in_band(rej.area.area_vs));
}

#[test]
fn curated_set_agrees_with_recogniser() {
    let (auto, _) = tuned_auto();
    let words = curated_l3_set();
    let r = differential_test(&auto, &words, None, Jobs::default()).unwrap();
    assert_eq!(r.mismatches, 0, "{:?}", r.mismatched().collect::<Vec<_>>());
}

#[test]
fn locus_layout() {
    let (auto, model) = tuned_auto();
    let calib = &tuned().calibration;
    let words: Vec<Word> = curated_l3_set().into_iter().filter(in_block_order).collect();
    let points: Vec<TmReport> = words
        .iter()
        .map(|x| TmReport::new(x, &run_tm(&auto, &model, x).unwrap().1))
        .collect();
    let map = locus_map(&points, Some(calib)).unwrap();
    assert_eq!(map.csv.lines().count(), points.len() + 1);
    assert!(map.warnings.is_empty());

    // Excess a and excess c land on opposite sides of the accepted cluster.
    let mean_f = |fam: &str| {
        let f: Vec<f64> = points
            .iter()
            .filter(|p| l3_family(&p.word) == fam)
            .map(|p| p.frequency_hz)
            .collect();
        f.iter().sum::<f64>() / f.len() as f64
    };
    let (fa, f0, fc) = (mean_f("+a"), mean_f("accept"), mean_f("+c"));
    assert!((fa - f0) * (fc - f0) < 0.0, "{fa} {f0} {fc}");

    let accepted: Vec<TmReport> = points.into_iter().filter(|p| l3_family(&p.word) == "accept").collect();
    let map = locus_map(&accepted, Some(calib)).unwrap();
    assert!(map.csv.lines().skip(1).all(|l| l.contains(",Accept,,true")));
}
