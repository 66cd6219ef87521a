//! Belousov–Zhabotinsky automaton for `aⁿbⁿcⁿ`.
//!
//! Kinetics are a dimensional three-variable Oregonator in HBrO₂ (X), Br⁻ (Y)
//! and the oxidised catalyst Ru(bpy)₃³⁺ (Z). Bromate (`a`), malonic acid
//! (`b`), acid (depleted by `c`) and the catalyst total (`#`) are pool
//! species: aliquots change them, the kinetics only read them.
//!
//! | step | rate |
//! |------|------|
//! | A + Y → X + P          | k₁·h²·A·Y |
//! | X + Y → 2P             | k₂·h·X·Y |
//! | A + X → 2X + 2Z        | k₃·h·A·X·(C−Z)/C |
//! | 2X → A + P             | k₄·X² |
//! | B + Z → (f/2)·Y        | k₅·hᵖ·B·Z |

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formal::{Language, Outcome, RejectKind, Symbol, Verdict, Word};
use crate::ode::{Integrator, OdeSystem, Tolerances};
use crate::reactor::{
    Aliquot, AliquotRecipe, ChemistryModel, FeedLedger, FeedSymbol, Mixture,
    Trajectory, DEFAULT_TEMPERATURE_K, TRANSIENT_S,
};

pub const SPECIES: [&str; 8] = [
    "HBrO2",
    "Br-",
    "Ru3+",
    "BrO3-",
    "CH2(COOH)2",
    "H+",
    "Ru_total",
    "OH-",
];
const X: usize = 0;
const Y: usize = 1;
const Z: usize = 2;
const BRO3: usize = 3;
const MAL: usize = 4;
const H: usize = 5;
const CAT: usize = 6;
const OH: usize = 7;

pub const OBSERVABLES: [&str; 3] = ["V_volt", "Ru3_frac", "nernst_clamped"];

pub const SAMPLE_DT_S: f64 = 0.5;

/// Pool fed by each input letter, in phase order.
const PHASE_POOLS: [(Symbol, &str); 3] = [
    (Symbol::A, "BrO3-"),
    (Symbol::B, "CH2(COOH)2"),
    (Symbol::C, "OH-"),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kinetics {
    /// M⁻³ s⁻¹
    pub k1: f64,
    /// M⁻² s⁻¹
    pub k2: f64,
    /// M⁻² s⁻¹
    pub k3: f64,
    /// M⁻¹ s⁻¹
    pub k4: f64,
    /// M⁻¹⁻ᵖ s⁻¹
    pub k5: f64,
    pub f: f64,
    /// Acid order `p` of the catalyst-reduction step.
    pub acid_order: f64,
}

impl Default for Kinetics {
    fn default() -> Self {
        Kinetics {
            k1: 2.0,
            k2: 3e6,
            k3: 42.0,
            k4: 3e3,
            k5: 1.0,
            f: 1.0,
            acid_order: 1.0,
        }
    }
}

impl Kinetics {
    pub fn validate(&self) -> Result<()> {
        let k = [self.k1, self.k2, self.k3, self.k4, self.k5];
        if k.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::Configuration("rate constants must be > 0".into()));
        }
        if !(self.f > 0.0 && self.f <= 3.0) {
            return Err(Error::Configuration(format!("f = {} outside (0, 3]", self.f)));
        }
        Ok(())
    }
}

/// Pool composition the dynamic species see, M.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pools {
    pub bromate: f64,
    pub organic: f64,
    pub acid: f64,
    pub catalyst: f64,
}

impl Pools {
    pub fn of(mix: &Mixture) -> Self {
        let c = mix.concentrations();
        Pools {
            bromate: c[BRO3],
            organic: c[MAL],
            acid: c[H],
            catalyst: c[CAT],
        }
    }
}

/// The Oregonator with frozen pools, as an ODE in `[X, Y, Z]`.
#[derive(Clone, Copy, Debug)]
pub struct BzSystem {
    pub kin: Kinetics,
    pub pools: Pools,
}

impl BzSystem {
    fn rate_factors(&self) -> [f64; 5] {
        let k = &self.kin;
        let p = &self.pools;
        let h = p.acid;
        [
            k.k1 * h * h * p.bromate,
            k.k2 * h,
            k.k3 * h * p.bromate,
            k.k4,
            k.k5 * h.powf(k.acid_order) * p.organic,
        ]
    }
}

/// d[X, Y, Z]/dt.
pub fn bz_derivatives(state: &[f64; 3], sys: &BzSystem) -> [f64; 3] {
    let mut d = [0.0; 3];
    sys.rhs(state, &mut d);
    d
}

impl OdeSystem for BzSystem {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, y: &[f64], d: &mut [f64]) {
        let [q1, q2, q3, q4, q5] = self.rate_factors();
        let c = self.pools.catalyst;
        let free = if c > 0.0 { (c - y[Z]) / c } else { 0.0 };
        let r1 = q1 * y[Y];
        let r2 = q2 * y[X] * y[Y];
        let r3 = q3 * y[X] * free;
        let r4 = q4 * y[X] * y[X];
        let r5 = q5 * y[Z];
        d[X] = r1 - r2 + r3 - 2.0 * r4;
        d[Y] = -r1 - r2 + 0.5 * self.kin.f * r5;
        d[Z] = 2.0 * r3 - r5;
    }

    fn jacobian(&self, y: &[f64], j: &mut DMatrix<f64>) {
        let [q1, q2, q3, q4, q5] = self.rate_factors();
        let c = self.pools.catalyst;
        let (free, dfree) = if c > 0.0 { ((c - y[Z]) / c, -1.0 / c) } else { (0.0, 0.0) };
        // ∂r/∂(X, Y, Z) for r1..r5.
        let r1 = [0.0, q1, 0.0];
        let r2 = [q2 * y[Y], q2 * y[X], 0.0];
        let r3 = [q3 * free, 0.0, q3 * y[X] * dfree];
        let r4 = [2.0 * q4 * y[X], 0.0, 0.0];
        let r5 = [0.0, 0.0, q5];
        let half_f = 0.5 * self.kin.f;
        for k in 0..3 {
            j[(X, k)] = r1[k] - r2[k] + r3[k] - 2.0 * r4[k];
            j[(Y, k)] = -r1[k] - r2[k] + half_f * r5[k];
            j[(Z, k)] = 2.0 * r3[k] - r5[k];
        }
    }
}

/// Advance the dynamic species of `mix` by `duration` with the pools frozen.
pub fn integrate_interval(
    mix: &mut Mixture,
    kin: &Kinetics,
    duration: f64,
    integ: &mut Integrator,
) -> Result<()> {
    let sys = BzSystem {
        kin: *kin,
        pools: Pools::of(mix),
    };
    let c = mix.concentrations_mut();
    let mut y = [c[X], c[Y], c[Z]];
    integ
        .advance(&sys, &mut y, 0.0, duration)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    c[..3].copy_from_slice(&y);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedoxObservables {
    /// V vs. reference.
    pub v0: f64,
    /// J mol⁻¹ K⁻¹
    pub r_gas: f64,
    pub temperature_k: f64,
    /// C mol⁻¹
    pub faraday: f64,
    pub n_e: f64,
    /// Reduced-form remainder defining full oxidation, M.
    pub full_ox_eps: f64,
}

impl Default for RedoxObservables {
    fn default() -> Self {
        RedoxObservables {
            v0: 1.0,
            r_gas: 8.314,
            temperature_k: DEFAULT_TEMPERATURE_K,
            faraday: 96485.0,
            n_e: 1.0,
            full_ox_eps: 1e-9,
        }
    }
}

/// Concentrations below this are clamped before taking logarithms, M.
pub const NERNST_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potential {
    pub volt: f64,
    /// A nonpositive concentration was clamped.
    pub clamped: bool,
}

impl RedoxObservables {
    pub fn thermal_voltage(&self) -> f64 {
        self.r_gas * self.temperature_k / (self.n_e * self.faraday)
    }

    /// Potential with all but `full_ox_eps` of the catalyst oxidised.
    pub fn v_max(&self, catalyst_total: f64) -> f64 {
        nernst_potential(catalyst_total - self.full_ox_eps, self.full_ox_eps, self).volt
    }

    /// ΔG = −n_e·F·V, J/mol.
    pub fn gibbs(&self, volt: f64) -> f64 {
        -self.n_e * self.faraday * volt
    }
}

/// `V0 + (RT/n_eF)·ln(ox/red)`.
pub fn nernst_potential(ox: f64, red: f64, obs: &RedoxObservables) -> Potential {
    let clamped = !(ox > 0.0 && red > 0.0);
    let (ox, red) = (ox.max(NERNST_FLOOR), red.max(NERNST_FLOOR));
    Potential {
        volt: obs.v0 + obs.thermal_voltage() * (ox / red).ln(),
        clamped,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaMetric {
    pub area_vs: f64,
    /// The same area from the Gibbs-energy form.
    pub area_gibbs_vs: f64,
    pub v_max: f64,
    pub tau_prime_s: f64,
    pub window_s: (f64, f64),
}

/// Trapezoid of `y(t)` over `[a, b]`, interpolating linearly at the ends.
fn trapezoid(t: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    let at = |x: f64, i: usize| y[i] + (y[i + 1] - y[i]) * (x - t[i]) / (t[i + 1] - t[i]);
    let mut sum = 0.0;
    for i in 0..t.len().saturating_sub(1) {
        let (lo, hi) = (t[i].max(a), t[i + 1].min(b));
        if hi <= lo {
            continue;
        }
        sum += 0.5 * (at(lo, i) + at(hi, i)) * (hi - lo);
    }
    sum
}

/// Area over `[t_start, t_start + τ′]` of a sampled potential trace:
/// `V_max·τ′ − ∫V dt`, cross-checked against
/// `−(ΔG′·τ′ − ∫ΔG dt)/(n_e·F)` with `ΔG′ = −n_e·F·V_max`.
pub fn area_from_series(
    t: &[f64],
    v: &[f64],
    v_max: f64,
    t_start: f64,
    tau_prime: f64,
    obs: &RedoxObservables,
) -> Result<AreaMetric> {
    let t_end = t_start + tau_prime;
    if t.len() != v.len() || t.len() < 2 {
        return Err(Error::input("need at least two samples"));
    }
    let slack = 1e-9 * t_end.abs().max(1.0);
    if t[0] > t_start + slack || t[t.len() - 1] < t_end - slack {
        return Err(Error::input(format!(
            "samples cover [{}, {}], window is [{t_start}, {t_end}]",
            t[0],
            t[t.len() - 1]
        )));
    }
    let area = v_max * tau_prime - trapezoid(t, v, t_start, t_end);
    let nf = obs.n_e * obs.faraday;
    let g: Vec<f64> = v.iter().map(|&x| obs.gibbs(x)).collect();
    let area_gibbs = -(obs.gibbs(v_max) * tau_prime - trapezoid(t, &g, t_start, t_end)) / nf;
    let scale = area.abs().max(v_max.abs() * tau_prime);
    if (area - area_gibbs).abs() > 1e-9 * scale {
        return Err(Error::Consistency(format!(
            "potential and Gibbs forms of the area differ: {area} vs {area_gibbs}"
        )));
    }
    Ok(AreaMetric {
        area_vs: area,
        area_gibbs_vs: area_gibbs,
        v_max,
        tau_prime_s: tau_prime,
        window_s: (t_start, t_end),
    })
}

/// Area of a completed run over `[t_# + 30, t_# + τ]`.
pub fn area_word(traj: &Trajectory, obs: &RedoxObservables) -> Result<AreaMetric> {
    let (t, v) = traj
        .observable_series("V_volt")
        .ok_or_else(|| Error::input("trajectory has no V_volt column"))?;
    let v_max = obs.v_max(traj.final_mixture.concentrations()[CAT]);
    area_from_series(
        &t,
        &v,
        v_max,
        traj.t_end_marker_s + TRANSIENT_S,
        traj.tau_s - TRANSIENT_S,
        obs,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationDescriptors {
    pub frequency_hz: f64,
    /// Mean peak-to-trough height of the final window minus that of the
    /// window before `#`, V.
    pub amplitude_diff_v: f64,
    /// Fewer than two peaks in the final window.
    pub degenerate: bool,
}

/// Minimum prominence of a peak, as a fraction of `V_max − window min`.
pub const PEAK_PROMINENCE: f64 = 0.05;

#[derive(Clone, Debug, Default, PartialEq)]
struct Peaks {
    times: Vec<f64>,
    heights: Vec<f64>,
    troughs: Vec<f64>,
}

fn find_peaks(t: &[f64], v: &[f64], v_max: f64) -> Peaks {
    let n = v.len();
    if n < 3 {
        return Peaks::default();
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let min_prom = PEAK_PROMINENCE * (v_max - vmin);
    let mut idx = Vec::new();
    for i in 1..n - 1 {
        if !(v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > mean) {
            continue;
        }
        // A flat top counts once, at its left edge, if it falls afterwards.
        match v[i + 1..].iter().find(|&&x| x != v[i]) {
            Some(&x) if x < v[i] => {}
            _ => continue,
        }
        // Prominence: height above the higher of the two flanking minima,
        // each taken up to the next higher sample or the window edge.
        let mut left = v[i];
        for &x in v[..i].iter().rev() {
            if x > v[i] {
                break;
            }
            left = left.min(x);
        }
        let mut right = v[i];
        for &x in &v[i + 1..] {
            if x > v[i] {
                break;
            }
            right = right.min(x);
        }
        if v[i] - left.max(right) >= min_prom {
            idx.push(i);
        }
    }
    let mut p = Peaks::default();
    for &i in &idx {
        let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let dt = 0.5 * (t[i + 1] - t[i - 1]);
        p.times.push(t[i] + shift * dt);
        p.heights.push(b - 0.25 * (a - c) * shift);
    }
    for w in idx.windows(2) {
        let lo = v[w[0]..w[1]].iter().copied().fold(f64::INFINITY, f64::min);
        p.troughs.push(lo);
    }
    p
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn amplitude(p: &Peaks) -> f64 {
    if p.troughs.is_empty() {
        0.0
    } else {
        mean(&p.heights) - mean(&p.troughs)
    }
}

fn window(t: &[f64], v: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let eps = 1e-9 * b.abs().max(1.0);
    t.iter()
        .zip(v)
        .filter(|(&t, _)| t >= a - eps && t <= b + eps)
        .map(|(&t, &v)| (t, v))
        .unzip()
}

/// Frequency and amplitude change from a sampled trace. `final_window` is
/// `[t_# + 30, t_# + τ]`, `pre_window` the matching slice of the last input
/// interval (absent for the empty word).
pub fn descriptors_from_series(
    t: &[f64],
    v: &[f64],
    v_max: f64,
    final_window: (f64, f64),
    pre_window: Option<(f64, f64)>,
) -> OscillationDescriptors {
    let (tf, vf) = window(t, v, final_window.0, final_window.1);
    let fin = find_peaks(&tf, &vf, v_max);
    let pre_amp = pre_window
        .map(|(a, b)| {
            let (tp, vp) = window(t, v, a, b);
            amplitude(&find_peaks(&tp, &vp, v_max))
        })
        .unwrap_or(0.0);
    let k = fin.times.len();
    let degenerate = k < 2;
    let frequency_hz = if degenerate {
        0.0
    } else {
        (k - 1) as f64 / (fin.times[k - 1] - fin.times[0])
    };
    OscillationDescriptors {
        frequency_hz,
        amplitude_diff_v: amplitude(&fin) - pre_amp,
        degenerate,
    }
}

pub fn estimate_descriptors(traj: &Trajectory, obs: &RedoxObservables) -> Result<OscillationDescriptors> {
    let (t, v) = traj
        .observable_series("V_volt")
        .ok_or_else(|| Error::input("trajectory has no V_volt column"))?;
    let v_max = obs.v_max(traj.final_mixture.concentrations()[CAT]);
    let t_sharp = traj.t_end_marker_s;
    let pre = (t_sharp > 0.0).then_some((t_sharp - traj.tau_s + TRANSIENT_S, t_sharp));
    Ok(descriptors_from_series(
        &t,
        &v,
        v_max,
        (t_sharp + TRANSIENT_S, t_sharp + traj.tau_s),
        pre,
    ))
}

/// Direction a reject family displaces the normalised `(ΔA, Δf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    /// Perturbation that defines it, e.g. `+a`.
    pub label: String,
    pub direction: [f64; 2],
    pub kind: RejectKind,
}

/// Accept band and reject-signature map produced by tuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// A*, V·s.
    pub area_center_vs: f64,
    /// δ, V·s.
    pub area_half_width_vs: f64,
    /// f*, Hz.
    pub frequency_ref_hz: f64,
    /// Typical reject displacement along each axis, (V·s, Hz). Dividing by
    /// it puts area and frequency changes on an equal footing.
    pub scale: [f64; 2],
    pub signatures: Vec<Signature>,
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        let usable = self.area_center_vs > 0.0
            && self.area_half_width_vs >= 0.0
            && self.frequency_ref_hz > 0.0
            && self.scale.iter().all(|&s| s > 0.0 && s.is_finite());
        if !usable {
            return Err(Error::Configuration("calibration band is not usable".into()));
        }
        if self.signatures.is_empty() {
            return Err(Error::Configuration("calibration has no reject signatures".into()));
        }
        Ok(())
    }

    pub fn in_band(&self, area_vs: f64) -> bool {
        (area_vs - self.area_center_vs).abs() <= self.area_half_width_vs
    }

    /// Normalised displacement from the accept point.
    pub fn displacement(&self, area_vs: f64, frequency_hz: f64) -> [f64; 2] {
        [
            (area_vs - self.area_center_vs) / self.scale[0],
            (frequency_hz - self.frequency_ref_hz) / self.scale[1],
        ]
    }

    /// Signature whose direction is closest in angle to the displacement.
    pub fn classify(&self, area_vs: f64, frequency_hz: f64) -> Option<&Signature> {
        let d = self.displacement(area_vs, frequency_hz);
        let norm = d[0].hypot(d[1]);
        self.signatures.iter().max_by(|a, b| {
            let cos = |s: &Signature| {
                let n = s.direction[0].hypot(s.direction[1]) * norm;
                if n > 0.0 {
                    (s.direction[0] * d[0] + s.direction[1] * d[1]) / n
                } else {
                    -1.0
                }
            };
            cos(a).total_cmp(&cos(b))
        })
    }
}

/// Pinned in-run reject first, then the area band, then the signature map.
pub fn tm_verdict(
    pinned: Option<RejectKind>,
    descriptors: &OscillationDescriptors,
    area: &AreaMetric,
    calib: Option<&Calibration>,
) -> Result<Verdict> {
    if let Some(kind) = pinned {
        return Ok(Verdict::reject(kind));
    }
    let calib = calib.ok_or_else(|| Error::Configuration("no calibration loaded".into()))?;
    calib.validate()?;
    if calib.in_band(area.area_vs) {
        return Ok(Verdict::ACCEPT);
    }
    let sig = calib
        .classify(area.area_vs, descriptors.frequency_hz)
        .ok_or_else(|| Error::Configuration("calibration has no reject signatures".into()))?;
    Ok(Verdict::reject(sig.kind))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BzModel {
    pub kinetics: Kinetics,
    pub redox: RedoxObservables,
    pub calibration: Option<Calibration>,
}

/// Starting pot and aliquot sizes. Amounts are per aliquot, mol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmSetup {
    pub volume_dm3: f64,
    pub bromate_m: f64,
    pub organic_m: f64,
    pub acid_m: f64,
    pub aliquot_dm3: f64,
    pub a_mol: f64,
    pub b_mol: f64,
    pub c_mol: f64,
    pub marker_mol: f64,
}

impl Default for TmSetup {
    fn default() -> Self {
        TmSetup {
            volume_dm3: 0.1,
            bromate_m: 0.3,
            organic_m: 0.15,
            acid_m: 2.0,
            aliquot_dm3: 1e-3,
            a_mol: 3e-3,
            b_mol: 3e-3,
            c_mol: 1e-2,
            marker_mol: 1e-4,
        }
    }
}

impl TmSetup {
    pub fn recipe(&self, id: &str) -> AliquotRecipe {
        let v = self.aliquot_dm3;
        AliquotRecipe::new(id)
            .with(FeedSymbol::Input(Symbol::A), Aliquot::new(v, &[("BrO3-", self.a_mol)]))
            .with(FeedSymbol::Input(Symbol::B), Aliquot::new(v, &[("CH2(COOH)2", self.b_mol)]))
            .with(FeedSymbol::Input(Symbol::C), Aliquot::new(v, &[("OH-", self.c_mol)]))
            .with(
                FeedSymbol::EndMarker,
                Aliquot::new(v, &[("Ru_total", self.marker_mol), ("Br-", 2.0 * self.marker_mol)]),
            )
    }

    /// Bromate, malonic acid and sulfuric acid only. Without catalyst or
    /// bromide nothing reacts, so every word reaches `#` from the same
    /// dynamic state and only the pool composition tells words apart.
    pub fn initial_mixture(&self) -> Result<Mixture> {
        Mixture::new(&SPECIES, self.volume_dm3, DEFAULT_TEMPERATURE_K)?
            .with("BrO3-", self.bromate_m)?
            .with("CH2(COOH)2", self.organic_m)?
            .with("H+", self.acid_m)
    }
}

impl BzModel {
    pub fn with_calibration(mut self, calib: Calibration) -> Self {
        self.calibration = Some(calib);
        self
    }

    fn potential(&self, mix: &Mixture) -> Potential {
        let c = mix.concentrations();
        nernst_potential(c[Z], c[CAT] - c[Z], &self.redox)
    }

    /// Area, descriptors and verdict of a completed run.
    pub fn analyse(&self, traj: &Trajectory) -> Result<TmAnalysis> {
        let area = area_word(traj, &self.redox)?;
        let descriptors = estimate_descriptors(traj, &self.redox)?;
        let verdict = tm_verdict(
            traj.pinned.map(|(_, k)| k),
            &descriptors,
            &area,
            self.calibration.as_ref(),
        )?;
        Ok(TmAnalysis {
            area,
            descriptors,
            verdict,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TmAnalysis {
    pub area: AreaMetric,
    pub descriptors: OscillationDescriptors,
    pub verdict: Verdict,
}

impl ChemistryModel for BzModel {
    fn language(&self) -> Language {
        Language::L3
    }

    fn species(&self) -> &'static [&'static str] {
        &SPECIES
    }

    fn observable_names(&self) -> &'static [&'static str] {
        &OBSERVABLES
    }

    fn observables(&self, mix: &Mixture) -> Vec<f64> {
        let c = mix.concentrations();
        let p = self.potential(mix);
        let frac = if c[CAT] > 0.0 { c[Z] / c[CAT] } else { 0.0 };
        vec![p.volt, frac, if p.clamped { 1.0 } else { 0.0 }]
    }

    /// `c` delivers hydroxide, which takes protons off the acid pool at once.
    fn equilibrate(&self, mix: &mut Mixture) -> Result<()> {
        let c = mix.concentrations_mut();
        let n = c[OH].min(c[H]);
        c[OH] -= n;
        c[H] -= n;
        Ok(())
    }

    /// A letter whose pool precedes one that has already been fed breaks the
    /// `a*b*c*` phase order; `#` on an untouched pot has nothing to read.
    fn check_symbol(
        &self,
        symbol: FeedSymbol,
        _aliquot: &Aliquot,
        _mix: &Mixture,
        ledger: &FeedLedger,
    ) -> Option<RejectKind> {
        let fed = |pool: &str| ledger.injected(pool) > 0.0;
        match symbol {
            FeedSymbol::Input(s) => {
                let phase = PHASE_POOLS.iter().position(|&(p, _)| p == s)?;
                PHASE_POOLS[phase + 1..]
                    .iter()
                    .any(|&(_, pool)| fed(pool))
                    .then_some(RejectKind::BadOrder)
            }
            FeedSymbol::EndMarker => (!PHASE_POOLS.iter().any(|&(_, pool)| fed(pool)))
                .then_some(RejectKind::BadOrder),
        }
    }

    fn evolve(
        &self,
        mix: &mut Mixture,
        _t0: f64,
        duration: f64,
        integ: &mut Integrator,
    ) -> std::result::Result<(), String> {
        integrate_interval(mix, &self.kinetics, duration, integ).map_err(|e| e.to_string())
    }

    fn default_sample_dt(&self, _tau_s: f64) -> f64 {
        SAMPLE_DT_S
    }

    fn verdict(&self, traj: &Trajectory) -> Result<Verdict> {
        Ok(self.analyse(traj)?.verdict)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmReport {
    pub word: Word,
    #[serde(rename = "frequency_Hz")]
    pub frequency_hz: f64,
    #[serde(rename = "amplitude_diff_V")]
    pub amplitude_diff_v: f64,
    #[serde(rename = "area_Vs")]
    pub area_vs: f64,
    pub verdict: Outcome,
    pub reject_kind: Option<RejectKind>,
}

impl TmReport {
    pub fn new(word: &Word, a: &TmAnalysis) -> Self {
        TmReport {
            word: word.clone(),
            frequency_hz: a.descriptors.frequency_hz,
            amplitude_diff_v: a.descriptors.amplitude_diff_v,
            area_vs: a.area.area_vs,
            verdict: a.verdict.outcome(),
            reject_kind: a.verdict.reject_kind(),
        }
    }

    pub fn as_verdict(&self) -> Verdict {
        match self.reject_kind {
            Some(k) if self.verdict == Outcome::Reject => Verdict::reject(k),
            _ => Verdict::ACCEPT,
        }
    }
}

/// Mean period of the limit cycle at fixed pools, from upward crossings of
/// the mid-level of `Z`. Integrates `settle_s` first, then measures
/// `periods` full cycles on a `dt_s` grid.
pub fn limit_cycle_period(
    sys: &BzSystem,
    y0: [f64; 3],
    settle_s: f64,
    periods: usize,
    dt_s: f64,
    tol: Tolerances,
) -> Result<f64> {
    let mut integ = Integrator::new(tol);
    let mut y = y0;
    let num = |e: crate::ode::IntegrationError| Error::Numerical(e.to_string());
    integ.advance(sys, &mut y, 0.0, settle_s).map_err(num)?;
    // One pass to find the level, one to time crossings.
    let probe_s = 4.0 * (periods as f64 + 2.0) * 60.0;
    let steps = (probe_s / dt_s) as usize;
    let mut trace = Vec::with_capacity(steps);
    let mut yy = y;
    for k in 0..steps {
        integ.advance(sys, &mut yy, settle_s + k as f64 * dt_s, dt_s).map_err(num)?;
        trace.push(yy[Z]);
    }
    let lo = trace.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-3 * hi.abs()) {
        return Err(Error::Numerical("no sustained oscillation".into()));
    }
    let level = 0.5 * (lo + hi);
    let mut crossings = Vec::new();
    for k in 1..trace.len() {
        if trace[k - 1] < level && trace[k] >= level {
            let frac = (level - trace[k - 1]) / (trace[k] - trace[k - 1]);
            crossings.push((k as f64 - 1.0 + frac) * dt_s);
            if crossings.len() == periods + 1 {
                break;
            }
        }
    }
    if crossings.len() < periods + 1 {
        return Err(Error::Numerical(format!(
            "only {} crossings in the probe window",
            crossings.len()
        )));
    }
    Ok((crossings[periods] - crossings[0]) / periods as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> BzSystem {
        BzSystem {
            kin: Kinetics::default(),
            pools: Pools {
                bromate: 0.1,
                organic: 0.15,
                acid: 1.0,
                catalyst: 1e-3,
            },
        }
    }

    #[test]
    fn no_flux_at_origin() {
        let d = bz_derivatives(&[0.0, 0.0, 0.0], &standard());
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let sys = standard();
        let y = [2e-7, 3e-6, 4e-4];
        let mut ja = DMatrix::zeros(3, 3);
        sys.jacobian(&y, &mut ja);
        let mut f0 = [0.0; 3];
        let mut f1 = [0.0; 3];
        sys.rhs(&y, &mut f0);
        for j in 0..3 {
            let h = 1e-7 * y[j];
            let mut yp = y;
            yp[j] += h;
            sys.rhs(&yp, &mut f1);
            for i in 0..3 {
                let fd = (f1[i] - f0[i]) / h;
                let scale = ja[(i, j)].abs().max(1e-3);
                assert!((fd - ja[(i, j)]).abs() < 1e-5 * scale, "({i},{j}) {fd} {}", ja[(i, j)]);
            }
        }
    }

    #[test]
    fn nernst_decade() {
        let obs = RedoxObservables::default();
        let p = nernst_potential(10.0, 1.0, &obs);
        assert!((p.volt - obs.v0 - 0.05916).abs() < 1e-4);
        assert!(!p.clamped);
        assert_eq!(nernst_potential(0.3, 0.3, &obs).volt, obs.v0);
        assert!(nernst_potential(0.0, 1.0, &obs).clamped);
    }

    #[test]
    fn phase_discipline() {
        let m = BzModel::default();
        let mut ledger = FeedLedger::default();
        let al = Aliquot::new(1e-4, &[]);
        let mix = TmSetup::default().initial_mixture().unwrap();
        let sym = |c| FeedSymbol::Input(Symbol::from_char(c).unwrap());
        assert_eq!(m.check_symbol(FeedSymbol::EndMarker, &al, &mix, &ledger), Some(RejectKind::BadOrder));
        ledger.injected_mol.insert("CH2(COOH)2".into(), 1e-3);
        assert_eq!(m.check_symbol(sym('a'), &al, &mix, &ledger), Some(RejectKind::BadOrder));
        assert_eq!(m.check_symbol(sym('b'), &al, &mix, &ledger), None);
        assert_eq!(m.check_symbol(sym('c'), &al, &mix, &ledger), None);
        assert_eq!(m.check_symbol(FeedSymbol::EndMarker, &al, &mix, &ledger), None);
    }

    #[test]
    fn hydroxide_consumes_acid() {
        let m = BzModel::default();
        let mut mix = TmSetup::default().initial_mixture().unwrap().with("OH-", 0.2).unwrap();
        m.equilibrate(&mut mix).unwrap();
        let h0 = TmSetup::default().acid_m;
        assert!((mix.get("H+").unwrap() - (h0 - 0.2)).abs() < 1e-12);
        assert_eq!(mix.get("OH-"), Some(0.0));
    }

    #[test]
    fn peaks_of_a_sinusoid() {
        let t: Vec<f64> = (0..=540).map(|k| 30.0 + 0.5 * k as f64).collect();
        let w = 2.0 * std::f64::consts::PI / 25.0;
        let v: Vec<f64> = t.iter().map(|&t| 0.5 + 0.1 * (w * t).sin()).collect();
        let d = descriptors_from_series(&t, &v, 1.0, (30.0, 300.0), None);
        assert!(!d.degenerate);
        assert!((d.frequency_hz - 0.04).abs() < 1e-3, "{}", d.frequency_hz);
        assert!((d.amplitude_diff_v - 0.2).abs() < 1e-3, "{}", d.amplitude_diff_v);
    }

    #[test]
    fn flat_signal_is_degenerate() {
        let t: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let v = vec![0.7; 100];
        let d = descriptors_from_series(&t, &v, 1.0, (0.0, 99.0), None);
        assert!(d.degenerate);
        assert_eq!(d.frequency_hz, 0.0);
    }

    #[test]
    fn uncovered_window_is_an_input_error() {
        let obs = RedoxObservables::default();
        let t = [0.0, 1.0, 2.0];
        let v = [0.0; 3];
        assert!(area_from_series(&t, &v, 1.0, 0.0, 5.0, &obs).is_err());
    }

    #[test]
    fn missing_calibration_is_a_configuration_error() {
        let area = AreaMetric {
            area_vs: 1.0,
            area_gibbs_vs: 1.0,
            v_max: 1.0,
            tau_prime_s: 1.0,
            window_s: (0.0, 1.0),
        };
        let d = OscillationDescriptors {
            frequency_hz: 0.1,
            amplitude_diff_v: 0.0,
            degenerate: false,
        };
        assert!(matches!(tm_verdict(None, &d, &area, None), Err(Error::Configuration(_))));
        assert_eq!(
            tm_verdict(Some(RejectKind::BadOrder), &d, &area, None).unwrap(),
            Verdict::reject(RejectKind::BadOrder)
        );
    }
}
