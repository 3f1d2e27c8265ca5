//! Closed-form families: product spheres S^k x S^(n-k) and geodesic spheres.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

use crate::geometry::PrincipalCurvatures;

pub const U_MIN: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("degenerate product sphere angle u = {0}")]
    DegenerateAngle(f64),
    #[error("invalid factor split n = {n}, k = {k}")]
    Split { n: usize, k: usize },
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("t_end must exceed the start time")]
    EmptyInterval,
    #[error("geodesic sphere extinct before t = {0}")]
    Extinct(f64),
    #[error("geodesic radius out of range: {0}")]
    Radius(f64),
}

/// S^k(rho cos u) x S^(n-k)(rho sin u).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductSphereState {
    pub n: usize,
    pub k: usize,
    pub u: f64,
    pub t: f64,
}

impl ProductSphereState {
    pub fn new(n: usize, k: usize, u: f64) -> Result<Self, ModelError> {
        if k == 0 || k >= n {
            return Err(ModelError::Split { n, k });
        }
        if !(u > 0.0 && u < FRAC_PI_2) {
            return Err(ModelError::DegenerateAngle(u));
        }
        Ok(Self { n, k, u, t: 0.0 })
    }

    /// Factor radii (r, s) with r^2 + s^2 = 1/K.
    pub fn radii(&self, kc: f64) -> (f64, f64) {
        let rho = 1.0 / kc.sqrt();
        (rho * self.u.cos(), rho * self.u.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSphereState {
    pub n: usize,
    pub d: f64,
    pub t: f64,
}

/// (lambda on the S^k factor, mu on the S^(n-k) factor).
pub fn product_sphere_pair(state: &ProductSphereState, kc: f64) -> Result<(f64, f64), ModelError> {
    if !(state.u > 0.0 && state.u < FRAC_PI_2) {
        return Err(ModelError::DegenerateAngle(state.u));
    }
    let sk = kc.sqrt();
    Ok((-sk * state.u.tan(), sk / state.u.tan()))
}

pub fn product_sphere_curvatures(state: &ProductSphereState, kc: f64) -> Result<PrincipalCurvatures, ModelError> {
    let (l, m) = product_sphere_pair(state, kc)?;
    let mut v = vec![l; state.k];
    v.extend(std::iter::repeat(m).take(state.n - state.k));
    Ok(PrincipalCurvatures::new(v).expect("finite"))
}

/// H and |A|^2 in closed form.
pub fn product_sphere_h_a2(state: &ProductSphereState, kc: f64) -> Result<(f64, f64), ModelError> {
    let (l, m) = product_sphere_pair(state, kc)?;
    let (k, nk) = (state.k as f64, (state.n - state.k) as f64);
    Ok((k * l + nk * m, k * l * l + nk * m * m))
}

/// |A|^2 - H^2/(n-1), expanded with lambda*mu = -K so that no large terms cancel.
pub fn product_sphere_cylindrical_deficit(state: &ProductSphereState, kc: f64) -> Result<f64, ModelError> {
    let (l, m) = product_sphere_pair(state, kc)?;
    let (n, k) = (state.n as f64, state.k as f64);
    Ok((k * (n - 1.0 - k) * l * l + (n - k) * (k - 1.0) * m * m + 2.0 * k * (n - k) * kc) / (n - 1.0))
}

/// |A|^2 - H^2/(n-2) - 4K, expanded the same way.
pub fn product_sphere_strict_margin(state: &ProductSphereState, kc: f64) -> Result<f64, ModelError> {
    let (l, m) = product_sphere_pair(state, kc)?;
    let (n, k) = (state.n as f64, state.k as f64);
    Ok((k * (n - 2.0 - k) * l * l + (n - k) * (k - 2.0) * m * m + 2.0 * k * (n - k) * kc) / (n - 2.0) - 4.0 * kc)
}

pub fn product_sphere_ode_rhs(state: &ProductSphereState, kc: f64) -> f64 {
    let (n, k) = (state.n as f64, state.k as f64);
    -kc * ((n - k) / state.u.tan() - k * state.u.tan())
}

pub fn minimal_clifford_angle(n: usize, k: usize) -> f64 {
    (((n - k) as f64) / k as f64).sqrt().atan()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Base step in units of 1/K; clipped to 1e-3.
    pub dt_k: f64,
    pub record_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { dt_k: 1e-3, record_every: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Collapse {
    /// u -> 0: the S^(n-k) factor shrinks.
    SecondFactor,
    /// u -> pi/2: the S^k factor shrinks.
    FirstFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<ProductSphereState>,
    pub collapse: Option<Collapse>,
}

pub fn rk4_step(state: &ProductSphereState, dt: f64, kc: f64) -> ProductSphereState {
    let f = |u: f64| product_sphere_ode_rhs(&ProductSphereState { u, ..*state }, kc);
    let u = state.u;
    let k1 = f(u);
    let k2 = f(u + 0.5 * dt * k1);
    let k3 = f(u + 0.5 * dt * k2);
    let k4 = f(u + dt * k3);
    ProductSphereState { u: u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), t: state.t + dt, ..*state }
}

pub fn flow_product_sphere(
    state: &ProductSphereState,
    t_end: f64,
    kc: f64,
    ctl: &StepControl,
) -> Result<Trajectory, ModelError> {
    if !(t_end > state.t) {
        return Err(ModelError::EmptyInterval);
    }
    let dt0 = ctl.dt_k.min(1e-3) / kc;
    let mut s = *state;
    let mut states = vec![s];
    let mut steps = 0usize;
    loop {
        if s.u < U_MIN {
            return Ok(Trajectory { states, collapse: Some(Collapse::SecondFactor) });
        }
        if s.u > FRAC_PI_2 - U_MIN {
            return Ok(Trajectory { states, collapse: Some(Collapse::FirstFactor) });
        }
        let remaining = t_end - s.t;
        if remaining <= 1e-12 * t_end.abs().max(1.0 / kc) {
            break;
        }
        let mut dt = dt0.min(remaining);
        let rate = product_sphere_ode_rhs(&s, kc).abs();
        let room = s.u.min(FRAC_PI_2 - s.u);
        while rate * dt > 1e-2 || rate * dt > 1e-2 * room {
            dt *= 0.5;
        }
        if dt < 1e-15 / kc {
            return Err(ModelError::StepUnderflow(s.t));
        }
        s = rk4_step(&s, dt, kc);
        if dt == remaining {
            s.t = t_end;
        }
        steps += 1;
        if steps % ctl.record_every.max(1) == 0 {
            states.push(s);
        }
    }
    if states.last().map(|l| l.t) != Some(s.t) {
        states.push(s);
    }
    Ok(Trajectory { states, collapse: None })
}

/// Geodesic radius at time t: cos(sqrt(K) d) = cos(sqrt(K) d0) e^(nKt).
pub fn geodesic_sphere_closed_form(d0: f64, t: f64, n: usize, kc: f64) -> Result<f64, ModelError> {
    let sk = kc.sqrt();
    if !(d0 * sk > 0.0 && d0 * sk < std::f64::consts::PI) {
        return Err(ModelError::Radius(d0));
    }
    if t == 0.0 {
        return Ok(d0);
    }
    let c = (sk * d0).cos() * (n as f64 * kc * t).exp();
    if c.abs() >= 1.0 {
        return Err(ModelError::Extinct(t));
    }
    Ok(c.acos() / sk)
}

pub fn geodesic_sphere_extinction_time(d0: f64, n: usize, kc: f64) -> f64 {
    -(kc.sqrt() * d0).cos().abs().ln() / (n as f64 * kc)
}

/// RK4 integration of d' = -n sqrt(K) cot(sqrt(K) d); the independent route for the closed form.
pub fn geodesic_sphere_rk4(d0: f64, t: f64, n: usize, kc: f64, dt: f64) -> f64 {
    let sk = kc.sqrt();
    let f = |d: f64| -(n as f64) * sk / (sk * d).tan();
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut d = d0;
    for _ in 0..steps {
        let k1 = f(d);
        let k2 = f(d + 0.5 * h * k1);
        let k3 = f(d + 0.5 * h * k2);
        let k4 = f(d + h * k3);
        d += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    d
}

pub fn geodesic_sphere_curvatures(n: usize, d: f64, kc: f64) -> PrincipalCurvatures {
    let sk = kc.sqrt();
    PrincipalCurvatures::new(vec![sk / (sk * d).tan(); n]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{mean_curvature, second_form_norm_sq};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    fn st(n: usize, k: usize, u: f64) -> ProductSphereState {
        ProductSphereState::new(n, k, u).unwrap()
    }

    #[test]
    fn clifford_values() {
        let c = product_sphere_curvatures(&st(4, 2, FRAC_PI_4), 1.0).unwrap();
        for (a, b) in c.as_slice().iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let s = st(5, 2, FRAC_PI_4);
        let (h, a2) = product_sphere_h_a2(&s, 1.0).unwrap();
        assert_relative_eq!(h, 1.0, epsilon = 1e-14);
        assert_relative_eq!(a2, 5.0, epsilon = 1e-14);
        let (r, s2) = s.radii(1.0);
        assert_relative_eq!(h, (3.0 * r * r - 2.0 * s2 * s2) / (r * s2), epsilon = 1e-14);
        assert_relative_eq!(a2, (2.0 * s2.powi(4) + 3.0 * r.powi(4)) / (r * r * s2 * s2), epsilon = 1e-14);
        let c4 = product_sphere_curvatures(&st(4, 2, FRAC_PI_4), 4.0).unwrap();
        assert_relative_eq!(c4.min(), -2.0, epsilon = 1e-14);
        assert_relative_eq!(c4.max(), 2.0, epsilon = 1e-14);
        assert!(ProductSphereState::new(4, 2, 0.0).is_err());
        assert!(product_sphere_pair(&ProductSphereState { n: 4, k: 2, u: FRAC_PI_2, t: 0.0 }, 1.0).is_err());
    }

    #[test]
    fn clifford_angles() {
        assert_relative_eq!(minimal_clifford_angle(4, 2), FRAC_PI_4, epsilon = 1e-15);
        assert_relative_eq!(minimal_clifford_angle(4, 1), FRAC_PI_3, epsilon = 1e-15);
        for (n, k) in [(4, 1), (4, 2), (4, 3), (5, 2), (6, 1), (7, 3)] {
            let u = minimal_clifford_angle(n, k);
            let (h, a2) = product_sphere_h_a2(&st(n, k, u), 1.0).unwrap();
            assert!(h.abs() < 1e-13);
            assert_relative_eq!(a2, n as f64, epsilon = 1e-13);
        }
    }

    #[test]
    fn ode_signs() {
        assert!(product_sphere_ode_rhs(&st(4, 2, FRAC_PI_4), 1.0).abs() < 1e-15);
        assert!(product_sphere_ode_rhs(&st(4, 1, 0.05), 1.0) < 0.0);
        let us = minimal_clifford_angle(4, 1);
        assert!(product_sphere_ode_rhs(&st(4, 1, us + 1e-3), 1.0) > 0.0);
        assert!(product_sphere_ode_rhs(&st(4, 1, us - 1e-3), 1.0) < 0.0);
    }

    #[test]
    fn ode_rate_is_minus_h_over_rho() {
        // u moves along the unit normal (-sin u w1, cos u w2) at speed rho u'.
        for &(n, k, u, kc) in &[(4, 1, 0.3, 1.0), (5, 2, 1.1, 4.0), (6, 3, 0.7, 0.25)] {
            let s = st(n, k, u);
            let (h, _) = product_sphere_h_a2(&s, kc).unwrap();
            assert_relative_eq!(product_sphere_ode_rhs(&s, kc), -h * kc.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn equilibrium_and_reversal() {
        let u0 = minimal_clifford_angle(4, 2);
        let tr = flow_product_sphere(&st(4, 2, u0), 3.0, 1.0, &StepControl::default()).unwrap();
        assert!(tr.collapse.is_none());
        assert!(tr.states.iter().all(|s| (s.u - u0).abs() <= 1e-10 * (1.0 + s.t)));
        let s = st(4, 1, 0.3);
        let f = rk4_step(&s, 1e-3, 1.0);
        let b = rk4_step(&f, -1e-3, 1.0);
        assert!((b.u - s.u).abs() < 1e-9);
    }

    #[test]
    fn tube_collapses_and_pinching_monotone() {
        let tr = flow_product_sphere(&st(4, 1, 0.3), 5.0, 1.0, &StepControl::default()).unwrap();
        assert_eq!(tr.collapse, Some(Collapse::SecondFactor));
        let q: Vec<f64> = tr
            .states
            .iter()
            .map(|s| {
                let (h, a2) = product_sphere_h_a2(s, 1.0).unwrap();
                crate::geometry::quadratic_margin_hq(4, h, a2, 1.0, 0.5)
            })
            .collect();
        assert!(q[0] <= 0.0);
        assert!(q.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn sharpness_formulas() {
        for n in 4..9 {
            for i in 1..20 {
                let u = 1.5 * i as f64 / 20.0;
                let s = st(n, 2, u);
                let (r, ss) = s.radii(1.0);
                let expect = 2.0 * (n as f64 - 4.0) / (n as f64 - 2.0) * ss * ss / (r * r);
                let m = product_sphere_strict_margin(&s, 1.0).unwrap();
                assert!((m - expect).abs() <= 1e-13 * (1.0 + expect.abs()));
                let c = product_sphere_curvatures(&s, 1.0).unwrap();
                let g = crate::geometry::strict_margin(&c, 1.0);
                assert!((g - expect).abs() <= 1e-11 * (1.0 + second_form_norm_sq(&c)));
            }
        }
        let mut prev = f64::INFINITY;
        for e in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let d = product_sphere_cylindrical_deficit(&st(4, 1, e), 1.0).unwrap();
            assert!(d < prev && d > 2.0);
            prev = d;
        }
        assert!((product_sphere_cylindrical_deficit(&st(4, 1, 1e-3), 1.0).unwrap() - 2.0).abs() < 1e-5);
        let c = product_sphere_curvatures(&st(4, 1, 0.2), 1.0).unwrap();
        assert_relative_eq!(
            crate::geometry::cylindrical_deficit(&c),
            product_sphere_cylindrical_deficit(&st(4, 1, 0.2), 1.0).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn geodesic_sphere_closed_form_matches_rk4() {
        for &(d0, n, kc, frac) in &[(FRAC_PI_3, 4, 1.0, 0.9), (0.5, 3, 1.0, 0.95), (0.8, 6, 4.0, 0.8), (2.0, 4, 0.25, 0.9)] {
            let te = geodesic_sphere_extinction_time(d0, n, kc);
            let t = frac * te;
            let closed = geodesic_sphere_closed_form(d0, t, n, kc).unwrap();
            let rk = geodesic_sphere_rk4(d0, t, n, kc, 1e-6 / kc);
            assert!((closed - rk).abs() <= 1e-8 * closed, "{closed} {rk}");
        }
        assert_relative_eq!(geodesic_sphere_extinction_time(FRAC_PI_3, 4, 1.0), 2f64.ln() / 4.0, epsilon = 1e-15);
        assert_relative_eq!(geodesic_sphere_closed_form(FRAC_PI_2, 3.0, 4, 1.0).unwrap(), FRAC_PI_2, epsilon = 1e-9);
        assert_eq!(geodesic_sphere_closed_form(0.7, 0.0, 4, 1.0).unwrap(), 0.7);
        assert!(geodesic_sphere_closed_form(FRAC_PI_3, 0.2, 4, 1.0).is_err());
        let c = geodesic_sphere_curvatures(4, FRAC_PI_4, 1.0);
        assert_relative_eq!(mean_curvature(&c), 4.0, epsilon = 1e-14);
    }
}
