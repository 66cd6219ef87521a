//! Adaptive Rosenbrock integrator for small stiff autonomous systems.
//!
//! Four-stage, order-4 method with an embedded order-3 error estimate
//! (Shampine's parameter set, the one used by the classic `stiff` routine).
//! Each step needs one Jacobian and one LU factorisation of
//! `I/(γh) − J`. Steps are shortened to land exactly on the requested end
//! time, so calling [`Integrator::advance`] once per sample interval gives
//! exact samples without interpolation.

use nalgebra::{DMatrix, DVector};

/// Right-hand side of `dy/dt = f(y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, y: &[f64], dydt: &mut [f64]);

    /// `∂f/∂y`. The default is a forward-difference approximation.
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.dim();
        let mut f0 = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        self.rhs(y, &mut f0);
        let mut yp = y.to_vec();
        for j in 0..n {
            let dy = f64::EPSILON.sqrt() * y[j].abs().max(1e-12);
            yp[j] = y[j] + dy;
            self.rhs(&yp, &mut f1);
            for i in 0..n {
                jac[(i, j)] = (f1[i] - f0[i]) / dy;
            }
            yp[j] = y[j];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerances {
    pub const MIN_RTOL: f64 = 1e-10;
    pub const MAX_RTOL: f64 = 1e-4;

    pub fn new(rtol: f64, atol: f64) -> Result<Self, IntegrationError> {
        if !(Self::MIN_RTOL..=Self::MAX_RTOL).contains(&rtol) || !(atol > 0.0) {
            return Err(IntegrationError::BadTolerance { rtol, atol });
        }
        Ok(Tolerances { rtol, atol })
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum IntegrationError {
    #[error("step size underflow (h = {h:e}) at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("singular iteration matrix at t = {0}")]
    Singular(f64),
    #[error("relative tolerance {rtol:e} outside [1e-10, 1e-4] or atol {atol:e} not positive")]
    BadTolerance { rtol: f64, atol: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Shampine's parameters.
const GAM: f64 = 1.0 / 2.0;
const A21: f64 = 2.0;
const A31: f64 = 48.0 / 25.0;
const A32: f64 = 6.0 / 25.0;
const C21: f64 = -8.0;
const C31: f64 = 372.0 / 25.0;
const C32: f64 = 12.0 / 5.0;
const C41: f64 = -112.0 / 125.0;
const C42: f64 = -54.0 / 125.0;
const C43: f64 = -2.0 / 5.0;
const B1: f64 = 19.0 / 9.0;
const B2: f64 = 1.0 / 2.0;
const B3: f64 = 25.0 / 108.0;
const B4: f64 = 125.0 / 108.0;
const E1: f64 = 17.0 / 54.0;
const E2: f64 = 7.0 / 36.0;
const E3: f64 = 0.0;
const E4: f64 = 125.0 / 108.0;

/// Components below this (M) make a step count as an undershoot.
pub const NEGATIVITY_FLOOR: f64 = -1e-12;

/// Stateful stepper. Keeps the last accepted step size between calls so that
/// a long run split into sample intervals does not restart from scratch.
#[derive(Clone, Debug)]
pub struct Integrator {
    pub tol: Tolerances,
    pub max_steps: usize,
    h: Option<f64>,
    stats: Stats,
}

impl Integrator {
    pub fn new(tol: Tolerances) -> Self {
        Integrator {
            tol,
            max_steps: 5_000_000,
            h: None,
            stats: Stats::default(),
        }
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Forget the step-size history, e.g. after an aliquot perturbs the state.
    pub fn reset_step(&mut self) {
        self.h = None;
    }

    /// Advance `y` by `duration`. `t0` is only used in error reports.
    pub fn advance<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        y: &mut [f64],
        t0: f64,
        duration: f64,
    ) -> Result<(), IntegrationError> {
        if duration <= 0.0 {
            return Ok(());
        }
        let n = sys.dim();
        let mut ws = Workspace::new(n);
        let t_end = t0 + duration;
        let mut t = t0;
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(sys, y, duration, &mut ws),
        };
        let h_min = 1e-14 * t_end.abs().max(1.0);
        let mut steps = 0usize;
        while t < t_end {
            let remaining = t_end - t;
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            if h_try < h_min && !last {
                return Err(IntegrationError::StepUnderflow { t, h: h_try });
            }
            steps += 1;
            if steps > self.max_steps {
                return Err(IntegrationError::TooManySteps(self.max_steps));
            }
            match self.try_step(sys, y, h_try, t, &mut ws)? {
                StepOutcome::Accepted { err } => {
                    y.copy_from_slice(ws.y_new.as_slice());
                    t = if last { t_end } else { t + h_try };
                    self.stats.accepted += 1;
                    let fac = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.25)).clamp(0.2, 5.0)
                    };
                    // a truncated final step says nothing about the natural step size
                    if !last || h_try * fac > h {
                        h = h_try * fac;
                    }
                }
                StepOutcome::Rejected { err } => {
                    self.stats.rejected += 1;
                    let fac = if err.is_finite() {
                        (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.5)
                    } else {
                        0.25
                    };
                    h = h_try * fac;
                    if h < h_min {
                        return Err(IntegrationError::StepUnderflow { t, h });
                    }
                }
            }
        }
        self.h = Some(h);
        Ok(())
    }

    fn initial_step<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        y: &[f64],
        duration: f64,
        ws: &mut Workspace,
    ) -> f64 {
        sys.rhs(y, ws.f0.as_mut_slice());
        self.stats.rhs_evals += 1;
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for (yi, fi) in y.iter().zip(ws.f0.iter()) {
            let sc = self.tol.atol + self.tol.rtol * yi.abs();
            d0 = d0.max((yi / sc).abs());
            d1 = d1.max((fi / sc).abs());
        }
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0.min(duration).max(1e-12)
    }

    fn try_step<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        y: &[f64],
        h: f64,
        t: f64,
        ws: &mut Workspace,
    ) -> Result<StepOutcome, IntegrationError> {
        let n = y.len();
        let y0 = DVector::from_column_slice(y);
        sys.rhs(y, ws.f0.as_mut_slice());
        sys.jacobian(y, &mut ws.jac);
        self.stats.rhs_evals += 1;

        let mut a = -ws.jac.clone();
        for i in 0..n {
            a[(i, i)] += 1.0 / (GAM * h);
        }
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(IntegrationError::Singular(t));
        }
        let solve = |rhs: DVector<f64>| lu.solve(&rhs).ok_or(IntegrationError::Singular(t));

        let g1 = solve(ws.f0.clone())?;
        let y2 = &y0 + A21 * &g1;
        sys.rhs(y2.as_slice(), ws.f1.as_mut_slice());
        let g2 = solve(&ws.f1 + (C21 / h) * &g1)?;
        let y3 = &y0 + A31 * &g1 + A32 * &g2;
        sys.rhs(y3.as_slice(), ws.f1.as_mut_slice());
        self.stats.rhs_evals += 2;
        let g3 = solve(&ws.f1 + (C31 / h) * &g1 + (C32 / h) * &g2)?;
        let g4 = solve(&ws.f1 + (C41 / h) * &g1 + (C42 / h) * &g2 + (C43 / h) * &g3)?;

        ws.y_new = &y0 + B1 * &g1 + B2 * &g2 + B3 * &g3 + B4 * &g4;
        let err_vec = E1 * &g1 + E2 * &g2 + E3 * &g3 + E4 * &g4;

        let mut err: f64 = 0.0;
        for i in 0..n {
            let ynew = ws.y_new[i];
            if !ynew.is_finite() {
                return Ok(StepOutcome::Rejected { err: f64::INFINITY });
            }
            let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(ynew.abs());
            err = err.max((err_vec[i] / sc).abs());
        }
        if ws.y_new.iter().any(|&v| v < NEGATIVITY_FLOOR) {
            return Ok(StepOutcome::Rejected { err: err.max(2.0) });
        }
        if err <= 1.0 {
            Ok(StepOutcome::Accepted { err })
        } else {
            Ok(StepOutcome::Rejected { err })
        }
    }
}

enum StepOutcome {
    Accepted { err: f64 },
    Rejected { err: f64 },
}

struct Workspace {
    f0: DVector<f64>,
    f1: DVector<f64>,
    jac: DMatrix<f64>,
    y_new: DVector<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            f0: DVector::zeros(n),
            f1: DVector::zeros(n),
            jac: DMatrix::zeros(n, n),
            y_new: DVector::zeros(n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;

    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, y: &[f64], d: &mut [f64]) {
            d[0] = -y[0];
        }
    }

    /// Robertson's stiff kinetics problem.
    struct Robertson;

    impl OdeSystem for Robertson {
        fn dim(&self) -> usize {
            3
        }
        fn rhs(&self, y: &[f64], d: &mut [f64]) {
            d[0] = -0.04 * y[0] + 1e4 * y[1] * y[2];
            d[1] = 0.04 * y[0] - 1e4 * y[1] * y[2] - 3e7 * y[1] * y[1];
            d[2] = 3e7 * y[1] * y[1];
        }
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let mut integ = Integrator::new(Tolerances::new(1e-8, 1e-12).unwrap());
        let mut y = [1.0];
        integ.advance(&Decay, &mut y, 0.0, 1.0).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-7, "{}", y[0]);
    }

    #[test]
    fn zero_duration_is_identity() {
        let mut integ = Integrator::new(Tolerances::new(1e-6, 1e-12).unwrap());
        let mut y = [0.3, 0.2, 0.1];
        integ.advance(&Robertson, &mut y, 0.0, 0.0).unwrap();
        assert_eq!(y, [0.3, 0.2, 0.1]);
    }

    #[test]
    fn robertson_stays_conservative_and_nonnegative() {
        let mut integ = Integrator::new(Tolerances::new(1e-6, 1e-12).unwrap());
        let mut y = [1.0, 0.0, 0.0];
        let mut t = 0.0;
        for dt in [0.4, 3.6, 36.0] {
            integ.advance(&Robertson, &mut y, t, dt).unwrap();
            t += dt;
            assert!(y.iter().all(|&v| v >= NEGATIVITY_FLOOR));
            assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        // y1(40) from the standard Robertson reference solution
        assert!((y[0] - 0.715_827_1).abs() < 1e-4, "{:?}", y);
    }

    #[test]
    fn bad_tolerances_rejected() {
        assert!(Tolerances::new(1e-3, 1e-12).is_err());
        assert!(Tolerances::new(1e-11, 1e-12).is_err());
        assert!(Tolerances::new(1e-6, 0.0).is_err());
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let err_at = |rtol: f64| {
            let mut integ = Integrator::new(Tolerances::new(rtol, rtol * 1e-4).unwrap());
            let mut y = [1.0];
            integ.advance(&Decay, &mut y, 0.0, 2.0).unwrap();
            (y[0] - (-2.0f64).exp()).abs()
        };
        assert!(err_at(1e-10) < err_at(1e-6));
        assert!(err_at(1e-6) < 1e-5);
    }
}
