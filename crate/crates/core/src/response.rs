//! Closed-form frequency response of the aggregate second-order model and its
//! sequential composition over a disturbance scenario.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DisturbanceForecast, DisturbanceScenario, GridParameters};
use crate::scalar::{lit, Scalar};
use crate::trajectory::{compose, DampedSinusoid, SegmentedTrajectory};

/// Second-order characteristics of `2HT s² + (2H + DT) s + (D + R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedSecondOrder<T> {
    pub zeta: T,
    pub omega_n: T,
    pub omega_d: T,
    pub eta: T,
    pub phi: T,
    pub h_total: T,
    pub d_total: T,
    pub r: T,
    pub t_sg: T,
    pub h_dvpp: T,
    pub d_dvpp: T,
}

impl<T: Scalar> DerivedSecondOrder<T> {
    /// Envelope decay rate `ζωn = 1/(2T) + D/(4H)`.
    pub fn decay_rate(&self) -> T {
        self.zeta * self.omega_n
    }

    /// Static gain `1/(D + R)`.
    pub fn static_gain(&self) -> T {
        (self.d_total + self.r).recip()
    }

    /// Time for the envelope to shrink by `e^{-k}`.
    pub fn settling_time(&self, k: T) -> T {
        k / self.decay_rate()
    }

    /// Frequency kernel of a step of size `delta_p`.
    pub fn frequency_kernel(&self, delta_p: T) -> DampedSinusoid<T> {
        let amp = delta_p * self.static_gain() * self.eta;
        DampedSinusoid {
            offset: delta_p * self.static_gain(),
            sin_coef: amp * self.phi.cos(),
            cos_coef: amp * self.phi.sin(),
            decay: self.decay_rate(),
            omega: self.omega_d,
        }
    }
}

/// Derive ζ, ωn, ωd, η and φ for the grid's combined inertia and damping.
pub fn derive_second_order<T: Scalar>(grid: &GridParameters<T>) -> Result<DerivedSecondOrder<T>> {
    let two = lit::<T>(2.0);
    let h = grid.h_total();
    let d = grid.d_total();
    let (r, t_sg) = (grid.r, grid.t_sg);
    let omega_n = ((d + r) / (two * h * t_sg)).sqrt();
    let zeta = (two * h + d * t_sg) / (two * (two * t_sg * h * (r + d)).sqrt());
    if !(zeta.is_finite() && zeta < T::one() && omega_n > T::zero()) {
        return Err(Error::OverdampedRegime { zeta: zeta.as_f64() });
    }
    let one_m_z2 = T::one() - zeta * zeta;
    let omega_d = omega_n * one_m_z2.sqrt();
    let eta = ((T::one() - two * t_sg * omega_n * zeta + t_sg * t_sg * omega_n * omega_n) / one_m_z2)
        .sqrt();
    // Quadrant fixed so that η·sin φ = −1 (zero deviation at the step instant).
    let phi = (-omega_d).atan2(t_sg * omega_n * omega_n - zeta * omega_n);
    Ok(DerivedSecondOrder {
        zeta,
        omega_n,
        omega_d,
        eta,
        phi,
        h_total: h,
        d_total: d,
        r,
        t_sg,
        h_dvpp: grid.h_dvpp,
        d_dvpp: grid.d_dvpp,
    })
}

/// `F(ΔP, t) = ΔP/(D+R)·[1 + e^{−ζωn t}·η·sin(ωd t + φ)]`.
pub fn step_response<T: Scalar>(d: &DerivedSecondOrder<T>, delta_p: T, t: T) -> T {
    let env = (-d.decay_rate() * t).exp();
    delta_p * d.static_gain() * (T::one() + env * d.eta * (d.omega_d * t + d.phi).sin())
}

/// `dF/dt`; equals `ΔP/(2H)` at `t = 0`.
pub fn step_response_derivative<T: Scalar>(d: &DerivedSecondOrder<T>, delta_p: T, t: T) -> T {
    let sigma = d.decay_rate();
    let arg = d.omega_d * t + d.phi;
    delta_p
        * d.static_gain()
        * d.eta
        * (-sigma * t).exp()
        * (d.omega_d * arg.cos() - sigma * arg.sin())
}

/// Piecewise frequency trajectory of a scenario: each segment adds
/// `P_i·F(ΔP_i, t − t_i)` to the value the previous segment had at `t_i`.
/// Disturbances sharing an instant act as one combined step.
pub fn sequential_response<T: Scalar>(
    scenario: &DisturbanceScenario<T>,
    forecast: &DisturbanceForecast<T>,
    d: &DerivedSecondOrder<T>,
) -> Result<SegmentedTrajectory<T>> {
    compose(scenario, forecast, |w| d.frequency_kernel(w))
}

/// Whether every gap between occurrence instants is at least
/// `k/(ζωn)`, the condition under which carried baselines are settled values.
pub fn spacing_holds<T: Scalar>(traj: &SegmentedTrajectory<T>, d: &DerivedSecondOrder<T>, k: T) -> bool {
    let need = d.settling_time(k);
    let starts: Vec<T> = traj.segments.iter().map(|s| s.start).collect();
    starts.windows(2).all(|w| w[1] - w[0] >= need)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(h: f64, d: f64) -> GridParameters<f64> {
        GridParameters::new(10.0, 2.0, 10.0, 7.0).with_dvpp(h, d)
    }

    /// ζ and ωn from the complex roots of the characteristic polynomial.
    fn poly_oracle(g: &GridParameters<f64>) -> (f64, f64) {
        let (h, d) = (g.h_total(), g.d_total());
        let a = 2.0 * h * g.t_sg;
        let b = 2.0 * h + d * g.t_sg;
        let c = d + g.r;
        let disc = b * b - 4.0 * a * c;
        assert!(disc < 0.0);
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a);
        let wn = (re * re + im * im).sqrt();
        (-re / wn, wn)
    }

    #[test]
    fn zeta_matches_polynomial_roots() {
        for (h, d, zeta_frozen) in [(19.86, 10.68, 0.762_443_240_610_409), (0.0, 0.0, 0.414_757_531_003_126_6)] {
            let g = grid(h, d);
            let so = derive_second_order(&g).unwrap();
            let (z, wn) = poly_oracle(&g);
            assert!((so.zeta - z).abs() < 1e-12);
            assert!((so.omega_n - wn).abs() < 1e-12);
            assert!((so.zeta - zeta_frozen).abs() < 1e-9, "{}", so.zeta);
            assert!((so.eta * so.phi.sin() + 1.0).abs() < 1e-12);
            assert!((so.omega_d - wn * (1.0 - z * z).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_inertia_scales_natural_frequency() {
        let g1 = GridParameters::new(10.0, 2.0, 10.0, 7.0);
        let g2 = GridParameters::new(20.0, 2.0, 10.0, 7.0);
        let a = derive_second_order(&g1).unwrap();
        let b = derive_second_order(&g2).unwrap();
        assert!((b.omega_n - a.omega_n / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn overdamped_is_rejected() {
        // Heavy damping, tiny inertia.
        let g = GridParameters::new(0.1, 30.0, 10.0, 7.0);
        assert!(matches!(derive_second_order(&g), Err(Error::OverdampedRegime { .. })));
    }

    #[test]
    fn step_response_endpoints() {
        let d = derive_second_order(&grid(19.86, 10.68)).unwrap();
        assert!(step_response(&d, 0.7, 0.0).abs() < 1e-15);
        let fin = step_response(&d, 1.0, 1e4);
        assert!((fin - 1.0 / 22.68).abs() < 1e-15);
        assert!(step_response(&d, -0.2, 1e4) < 0.0);
    }

    #[test]
    fn derivative_initial_value_and_fd() {
        let d = derive_second_order(&grid(19.86, 10.68)).unwrap();
        let r0 = step_response_derivative(&d, 0.253, 0.0);
        assert!((r0 - 0.253 / (2.0 * 29.86)).abs() < 1e-15);
        for &t in &[0.5, 3.0, 11.0, 40.0] {
            let h = 1e-5;
            let fd = (step_response(&d, 0.253, t + h) - step_response(&d, 0.253, t - h)) / (2.0 * h);
            assert!((fd - step_response_derivative(&d, 0.253, t)).abs() < 1e-10);
        }
        assert_eq!(step_response_derivative(&d, 0.0, 3.0), 0.0);
        assert!(step_response_derivative(&d, 1.0, 1e4).abs() < 1e-30);
    }

    #[test]
    fn kernel_agrees_with_eta_phi_form() {
        let d = derive_second_order(&grid(5.0, 3.0)).unwrap();
        let k = d.frequency_kernel(-0.3);
        for i in 0..200 {
            let t = i as f64 * 0.37;
            assert!((k.value(t) - step_response(&d, -0.3, t)).abs() < 1e-14);
            assert!((k.derivative(t) - step_response_derivative(&d, -0.3, t)).abs() < 1e-14);
        }
    }

    fn forecast1() -> DisturbanceForecast<f64> {
        DisturbanceForecast::new(60.0, vec![0.253], vec![1.0])
    }

    #[test]
    fn single_segment_reduces_to_step() {
        let d = derive_second_order(&grid(19.86, 10.68)).unwrap();
        let f = forecast1();
        let s = DisturbanceScenario::from_offsets(60.0, &[0.0]);
        let tr = sequential_response(&s, &f, &d).unwrap();
        for i in 0..=600 {
            let t = i as f64 * 0.1;
            assert!((tr.value(t) - step_response(&d, 0.253, t)).abs() < 1e-15);
        }
    }

    #[test]
    fn opposite_steps_cancel() {
        let d = derive_second_order(&grid(19.86, 10.68)).unwrap();
        let f = DisturbanceForecast::new(200.0, vec![0.3, -0.3], vec![1.0, 1.0]);
        let s = DisturbanceScenario::from_offsets(200.0, &[0.0, 0.0]);
        let tr = sequential_response(&s, &f, &d).unwrap();
        assert!(tr.value(400.0).abs() < 1e-3);
    }

    #[test]
    fn mismatch_is_reported() {
        let d = derive_second_order(&grid(19.86, 10.68)).unwrap();
        let f = forecast1();
        let s = DisturbanceScenario::from_offsets(60.0, &[0.0, 0.0]);
        assert!(matches!(sequential_response(&s, &f, &d), Err(Error::ScenarioMismatch { .. })));
    }

    #[test]
    fn coincident_disturbances_stack() {
        let d = derive_second_order(&grid(19.86, 10.68)).unwrap();
        let f = DisturbanceForecast::new(60.0, vec![0.1, 0.2], vec![0.5, 1.0]);
        let s = DisturbanceScenario::from_times(vec![60.0, 60.0]);
        let tr = sequential_response(&s, &f, &d).unwrap();
        assert_eq!(tr.segments.len(), 1);
        assert_eq!(tr.segments[0].members, vec![0, 1]);
        assert!((tr.value(100.0) - step_response(&d, 0.25, 40.0)).abs() < 1e-15);
        assert_eq!(tr.value(59.0), 0.0);
    }

    #[test]
    fn boundaries_are_continuous() {
        let d = derive_second_order(&grid(4.0, 1.0)).unwrap();
        let f = DisturbanceForecast::new(
            60.0,
            vec![0.095, 0.109, -0.204, -0.158, 0.253],
            vec![0.8, 0.5, 0.8, 0.9, 0.7],
        );
        let s = DisturbanceScenario::from_offsets(60.0, &[30.0, 0.0, 60.0, 30.0, 0.0]);
        let tr = sequential_response(&s, &f, &d).unwrap();
        for k in 1..tr.segments.len() {
            let t = tr.segments[k].start;
            assert!((tr.value_in(k - 1, t) - tr.value(t)).abs() < 1e-12);
        }
        assert!(!spacing_holds(&tr, &d, 5.0) || tr.min_spacing().unwrap() >= d.settling_time(5.0));
    }
}
