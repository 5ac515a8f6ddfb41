//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)).
//!
//! The stepper is deliberately small: autonomous systems, dense state as a
//! `Vec<f64>`, embedded error control, optional rejection of steps that
//! produce negative coordinates (population systems evolve on the closed
//! positive orthant and the exact flow never leaves it).
//!
//! Coordinates that are exactly zero stay exactly zero whenever the vector
//! field satisfies `f_i(y) = 0` for `y_i = 0`, because every stage value of
//! such a coordinate is then zero as well. This is relied on for invariant
//! faces of Lotka-Volterra systems and is checked in tests rather than
//! enforced by clamping.

/// Tolerances and step-size limits.
#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on the step size.
    pub h_max: f64,
    /// Reject steps whose result has a negative coordinate.
    pub reject_negative: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            h_max: 50.0,
            reject_negative: true,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum OdeError {
    #[error("non-finite state or derivative at t = {t}")]
    NonFinite { t: f64 },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights are the last row of A (FSAL); these are the error
// weights b5 - b4.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One adaptive stepper instance. Drive it manually with [`Stepper::step`]
/// or use [`integrate`] for a fixed horizon.
pub struct Stepper<F: FnMut(&[f64], &mut [f64])> {
    f: F,
    t: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    h: f64,
    opts: OdeOptions,
    first: bool,
    /// Sum of accepted local error estimates in the max norm. For dynamics
    /// that contract toward an equilibrium this is a usable (heuristic)
    /// bound on the global error; expanding flows can amplify past it.
    pub accumulated_error: f64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
}

impl<F: FnMut(&[f64], &mut [f64])> Stepper<F> {
    pub fn new(f: F, t0: f64, y0: Vec<f64>, opts: OdeOptions) -> Self {
        let n = y0.len();
        Stepper {
            f,
            t: t0,
            y: y0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            h: 1e-4,
            opts,
            first: true,
            accumulated_error: 0.0,
            accepted_steps: 0,
            rejected_steps: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    fn initial_step(&mut self) {
        (self.f)(&self.y, &mut self.k[0]);
        let ynorm = self.y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let fnorm = self.k[0].iter().map(|v| v.abs()).fold(0.0, f64::max);
        self.h = (0.01 * (1.0 + ynorm) / (1.0 + fnorm)).min(self.opts.h_max);
        self.first = false;
    }

    /// Advance by one accepted step (internally retrying rejected ones).
    /// `t_target`, when finite, caps the step so the integration never
    /// overshoots it.
    pub fn step(&mut self, t_target: f64) -> Result<(), OdeError> {
        if self.first {
            self.initial_step();
        }
        let n = self.y.len();
        loop {
            let mut h = self.h.min(self.opts.h_max);
            if t_target.is_finite() {
                h = h.min(t_target - self.t);
            }
            if h <= f64::EPSILON * self.t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t: self.t, h });
            }

            // stages 2..7; k1 is either fresh or reused from FSAL
            for s in 0..6 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in A[s].iter().enumerate().take(s + 1) {
                        acc += a * self.k[j][i];
                    }
                    self.stage[i] = self.y[i] + h * acc;
                }
                let (head, tail) = self.k.split_at_mut(s + 1);
                let _ = head;
                (self.f)(&self.stage, &mut tail[0]);
            }
            // 5th-order solution is the last stage state (A[5] row)
            let mut y_new = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..6 {
                    acc += A[5][j] * self.k[j][i];
                }
                y_new[i] = self.y[i] + h * acc;
            }
            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite { t: self.t });
            }

            // scaled RMS error estimate
            let mut err_sq = 0.0;
            let mut max_scale = 0.0f64;
            for i in 0..n {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * self.k[j][i];
                }
                e *= h;
                let scale =
                    self.opts.abs_tol + self.opts.rel_tol * self.y[i].abs().max(y_new[i].abs());
                max_scale = max_scale.max(scale);
                err_sq += (e / scale) * (e / scale);
            }
            let err = (err_sq / n as f64).sqrt();

            let negative = self.opts.reject_negative && y_new.iter().any(|&v| v < 0.0);
            if err <= 1.0 && !negative {
                // FSAL: derivative at the accepted point becomes next k1
                let (head, tail) = self.k.split_at_mut(6);
                let _ = head;
                (self.f)(&y_new, &mut tail[0]);
                self.k.swap(0, 6);
                self.t += h;
                self.y = y_new;
                // max-norm bound on the local error implied by the scaled RMS
                self.accumulated_error += err * (n as f64).sqrt() * max_scale;
                self.accepted_steps += 1;
                let grow = 0.9 * err.max(1e-10).powf(-0.2);
                self.h = (h * grow.clamp(0.2, 5.0)).min(self.opts.h_max);
                return Ok(());
            }
            self.rejected_steps += 1;
            if negative && err <= 1.0 {
                self.h = h * 0.5;
            } else {
                let shrink = 0.9 * err.max(1e-10).powf(-0.2);
                self.h = h * shrink.clamp(0.1, 0.9);
            }
        }
    }
}

/// Result of a fixed-horizon integration.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub accumulated_error: f64,
}

/// Integrate the autonomous system `dy/dt = f(y)` from `t0` to `t1`.
pub fn integrate<F: FnMut(&[f64], &mut [f64])>(
    f: F,
    y0: Vec<f64>,
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
) -> Result<OdeSolution, OdeError> {
    let mut st = Stepper::new(f, t0, y0, opts.clone());
    while st.t() < t1 - f64::EPSILON * t1.abs().max(1.0) {
        st.step(t1)?;
    }
    Ok(OdeSolution {
        t: st.t,
        y: st.y,
        accepted_steps: st.accepted_steps,
        rejected_steps: st.rejected_steps,
        accumulated_error: st.accumulated_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let sol = integrate(
            |y, dy| dy[0] = -0.7 * y[0],
            vec![2.0],
            0.0,
            5.0,
            &OdeOptions::default(),
        )
        .unwrap();
        let exact = 2.0 * (-0.7f64 * 5.0).exp();
        assert!((sol.y[0] - exact).abs() < 1e-8, "{} vs {exact}", sol.y[0]);
    }

    #[test]
    fn logistic_reaches_carrying_capacity() {
        // dn/dt = n (r - a n), equilibrium r/a
        let (r, a) = (0.8, 1.3);
        let sol = integrate(
            move |y, dy| dy[0] = y[0] * (r - a * y[0]),
            vec![0.05],
            0.0,
            100.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((sol.y[0] - r / a).abs() < 1e-7);
    }

    #[test]
    fn harmonic_oscillator_energy_and_accuracy() {
        // y'' = -y integrated as a 2d system over ten periods
        let t1 = 20.0 * std::f64::consts::PI;
        let sol = integrate(
            |y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            vec![1.0, 0.0],
            0.0,
            t1,
            &OdeOptions {
                reject_negative: false,
                ..OdeOptions::default()
            },
        )
        .unwrap();
        assert!((sol.y[0] - 1.0).abs() < 1e-6);
        assert!(sol.y[1].abs() < 1e-6);
    }

    #[test]
    fn zero_coordinate_stays_exactly_zero() {
        // second coordinate starts at 0 and its derivative vanishes there
        let sol = integrate(
            |y, dy| {
                dy[0] = y[0] * (1.0 - y[0] - 0.3 * y[1]);
                dy[1] = y[1] * (0.9 - y[1] - 0.4 * y[0]);
            },
            vec![0.2, 0.0],
            0.0,
            50.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.y[1], 0.0);
        assert!((sol.y[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn halved_tolerance_changes_result_within_error_estimate() {
        // competitive dynamics contracting toward an interior equilibrium;
        // this is the regime where accumulated_error is meant to be a bound.
        // Stop mid-transient so the two runs have not both collapsed onto
        // the equilibrium yet.
        let run = |rel: f64, abs: f64| {
            integrate(
                |y, dy| {
                    dy[0] = y[0] * (1.0 - y[0] - 0.3 * y[1]);
                    dy[1] = y[1] * (0.9 - y[1] - 0.4 * y[0]);
                },
                vec![0.05, 1.5],
                0.0,
                6.0,
                &OdeOptions {
                    abs_tol: abs,
                    rel_tol: rel,
                    ..OdeOptions::default()
                },
            )
            .unwrap()
        };
        let coarse = run(1e-6, 1e-8);
        let fine = run(5e-7, 5e-9);
        let diff = (coarse.y[0] - fine.y[0])
            .abs()
            .max((coarse.y[1] - fine.y[1]).abs());
        assert!(
            diff <= coarse.accumulated_error.max(1e-12),
            "diff {diff} vs estimate {}",
            coarse.accumulated_error
        );
    }
}
