//! Pointwise curvature algebra on principal curvatures, and the derived
//! constants of the pinching estimates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension n = {0} is below 3")]
    Dimension(usize),
    #[error("invalid flow parameter: {0}")]
    Param(String),
    #[error("expected {expected} principal curvatures, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite principal curvature")]
    NonFinite,
    #[error("inadmissible constants: {0}")]
    Inadmissible(String),
    #[error("input is not strictly pinched (noncollapsing radicand {0} <= 0)")]
    NotPinched(f64),
}

/// Principal curvatures, stored ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalCurvatures {
    lambda: Vec<f64>,
}

impl PrincipalCurvatures {
    pub fn new(mut lambda: Vec<f64>) -> Result<Self, GeometryError> {
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        lambda.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { lambda })
    }

    /// Checks the length against the hypersurface dimension as well.
    pub fn with_dim(lambda: Vec<f64>, n: usize) -> Result<Self, GeometryError> {
        if lambda.len() != n {
            return Err(GeometryError::Length { expected: n, got: lambda.len() });
        }
        Self::new(lambda)
    }

    /// Rotationally symmetric spectrum: `rot` with multiplicity n-1 and `prof` once.
    pub fn rotational(n: usize, rot: f64, prof: f64) -> Result<Self, GeometryError> {
        let mut v = vec![rot; n - 1];
        v.push(prof);
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn min(&self) -> f64 {
        self.lambda[0]
    }

    pub fn max(&self) -> f64 {
        self.lambda[self.lambda.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        let mut v: Vec<f64> = self.lambda.iter().map(|l| -l).collect();
        v.reverse();
        Self { lambda: v }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.lambda.iter().map(|l| c * l).collect()).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Theta")]
    pub theta: f64,
    pub eta: f64,
    pub sigma: f64,
}

impl FlowParams {
    /// Lists every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 3 {
            out.push(format!("n >= 3 required (got {})", self.n));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            out.push(format!("K > 0 required (got {})", self.k));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(format!("0 < alpha < 1 required (got {})", self.alpha));
        }
        if self.n == 3 && self.alpha <= 2.0 / 3.0 {
            out.push(format!("alpha > 2/3 required when n=3 (got {})", self.alpha));
        }
        if !(self.v > 0.0) {
            out.push(format!("V > 0 required (got {})", self.v));
        }
        if !(self.theta > 0.0) {
            out.push(format!("Theta > 0 required (got {})", self.theta));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            out.push(format!("0 < sigma < 1 required (got {})", self.sigma));
        }
        if self.n >= 3 && self.alpha > 0.0 && self.alpha < 2.0 {
            let (wp, wc) = eta_windows(self.n, self.alpha);
            if !(self.eta > 0.0 && self.eta < wp && self.eta < wc) {
                out.push(format!(
                    "eta = {} outside admissible windows: Poincare (0, {:.6}), cylindrical (0, {:.6})",
                    self.eta, wp, wc
                ));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<DerivedConstants, GeometryError> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(GeometryError::Param(v.join("; ")));
        }
        derive_constants(self.n, self.alpha, self.eta)
    }

    pub fn rho(&self) -> f64 {
        1.0 / self.k.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub beta: f64,
    pub c_noncollapse: f64,
    pub eta_max_poincare: f64,
    pub eta_max_cylindrical: f64,
}

/// Upper ends of the two admissible eta windows (Poincare, cylindrical).
pub fn eta_windows(n: usize, alpha: f64) -> (f64, f64) {
    let nf = n as f64;
    let wp = 1.0 / (nf - 2.0 + alpha) - 1.0 / (nf - 1.0);
    let wc = (2.0 - alpha) * (nf - alpha) / (2.0 * nf * (nf - 1.0) * (nf - 2.0 + alpha));
    (wp, wc)
}

pub fn derive_constants(n: usize, alpha: f64, eta: f64) -> Result<DerivedConstants, GeometryError> {
    if n < 3 {
        return Err(GeometryError::Dimension(n));
    }
    if !(alpha > 0.0 && alpha < 2.0) || !eta.is_finite() {
        return Err(GeometryError::Inadmissible(format!("alpha = {alpha}")));
    }
    let nf = n as f64;
    let (wp, wc) = eta_windows(n, alpha);
    if wp <= 0.0 {
        return Err(GeometryError::Inadmissible(format!(
            "Poincare eta window (0, {wp}) is empty for n = {n}, alpha = {alpha}"
        )));
    }
    if !(eta > 0.0 && eta < wp && eta < wc) {
        return Err(GeometryError::Inadmissible(format!(
            "eta = {eta} outside windows: Poincare (0, {wp}), cylindrical (0, {wc})"
        )));
    }
    let s = alpha / (2.0 * nf * (nf - 1.0));
    let a = 1.0 / (nf - 2.0 + alpha) - 1.0 / (nf - 1.0) - eta + s;
    let b = 2.0 * (2.0 - alpha);
    if a <= 0.0 {
        return Err(GeometryError::Inadmissible(format!("a = {a} <= 0")));
    }
    let d1 = 1.0 - (nf + 2.0) / 3.0 * (1.0 / (nf - 2.0 + alpha) - s);
    let d2 = 1.0 / a / (2.0 * (nf - 1.0));
    let d3 = alpha + nf / 2.0 - 2.0;
    let delta = d1.min(d2).min(d3);
    if delta <= 0.0 {
        return Err(GeometryError::Inadmissible(format!("delta = {delta} <= 0")));
    }
    Ok(DerivedConstants {
        a,
        b,
        delta,
        beta: 0.5 * (3.0 / (nf + 2.0) - 1.0 / (nf - 1.0)),
        c_noncollapse: ((nf - 2.0) * (nf - 2.0 + alpha) / (4.0 * alpha)).sqrt(),
        eta_max_poincare: wp,
        eta_max_cylindrical: wc,
    })
}

pub fn mean_curvature(pc: &PrincipalCurvatures) -> f64 {
    pc.lambda.iter().sum()
}

pub fn second_form_norm_sq(pc: &PrincipalCurvatures) -> f64 {
    pc.lambda.iter().map(|l| l * l).sum()
}

pub fn scalar_curvature(pc: &PrincipalCurvatures, k: f64) -> f64 {
    let h = mean_curvature(pc);
    let n = pc.n() as f64;
    h * h - second_form_norm_sq(pc) + n * (n - 1.0) * k
}

/// Q_alpha from (H, |A|^2); nonpositive iff the alpha-pinching condition holds.
pub fn quadratic_margin_hq(n: usize, h: f64, a2: f64, k: f64, alpha: f64) -> f64 {
    a2 - h * h / (n as f64 - 2.0 + alpha) - 2.0 * (2.0 - alpha) * k
}

pub fn quadratic_margin(pc: &PrincipalCurvatures, k: f64, alpha: f64) -> f64 {
    quadratic_margin_hq(pc.n(), mean_curvature(pc), second_form_norm_sq(pc), k, alpha)
}

/// Margin of the strict condition; negative iff it holds.
/// n >= 4: |A|^2 - H^2/(n-2) - 4K.  n = 3: |A|^2 - 3H^2/5 - 8K/3.
pub fn strict_margin_hq(n: usize, h: f64, a2: f64, k: f64) -> f64 {
    if n == 3 {
        a2 - 0.6 * h * h - 8.0 / 3.0 * k
    } else {
        a2 - h * h / (n as f64 - 2.0) - 4.0 * k
    }
}

pub fn strict_margin(pc: &PrincipalCurvatures, k: f64) -> f64 {
    strict_margin_hq(pc.n(), mean_curvature(pc), second_form_norm_sq(pc), k)
}

pub fn strict_pinching_check(pc: &PrincipalCurvatures, k: f64, n: usize) -> bool {
    strict_margin_hq(n, mean_curvature(pc), second_form_norm_sq(pc), k) < 0.0
}

pub fn cylindrical_deficit_hq(n: usize, h: f64, a2: f64) -> f64 {
    a2 - h * h / (n as f64 - 1.0)
}

pub fn cylindrical_deficit(pc: &PrincipalCurvatures) -> f64 {
    cylindrical_deficit_hq(pc.n(), mean_curvature(pc), second_form_norm_sq(pc))
}

pub fn weight_w(h: f64, k: f64, dc: &DerivedConstants) -> Result<f64, GeometryError> {
    if dc.a <= 0.0 {
        return Err(GeometryError::Inadmissible(format!("a = {} <= 0", dc.a)));
    }
    Ok(dc.a * h * h + dc.b * k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FSigma {
    pub f: f64,
    pub f_plus: f64,
}

pub fn f_sigma_eta_hq(
    n: usize,
    h: f64,
    a2: f64,
    t: f64,
    params: &FlowParams,
    dc: &DerivedConstants,
) -> FSigma {
    let w = dc.a * h * h + dc.b * params.k;
    let num = a2 - (1.0 / (n as f64 - 1.0) + params.eta) * h * h;
    let f = num * w.powf(params.sigma - 1.0);
    let f_plus = ((2.0 * dc.delta * params.k * t).exp() * f).max(0.0);
    FSigma { f, f_plus }
}

pub fn f_sigma_eta(pc: &PrincipalCurvatures, t: f64, params: &FlowParams, dc: &DerivedConstants) -> FSigma {
    f_sigma_eta_hq(pc.n(), mean_curvature(pc), second_form_norm_sq(pc), t, params, dc)
}

pub fn noncollapse_f_hq(n: usize, h: f64, a2: f64, k: f64) -> Result<f64, GeometryError> {
    let r = 4.0 * k + h * h / (n as f64 - 2.0) - a2;
    if r <= 0.0 {
        return Err(GeometryError::NotPinched(r));
    }
    Ok(r.sqrt())
}

pub fn noncollapse_f(pc: &PrincipalCurvatures, k: f64) -> Result<f64, GeometryError> {
    noncollapse_f_hq(pc.n(), mean_curvature(pc), second_form_norm_sq(pc), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pc(v: &[f64]) -> PrincipalCurvatures {
        PrincipalCurvatures::new(v.to_vec()).unwrap()
    }

    fn params(n: usize, k: f64) -> FlowParams {
        FlowParams { n, k, alpha: 0.5, v: 100.0, theta: 100.0, eta: 0.05, sigma: 0.1 }
    }

    #[test]
    fn basic_invariants() {
        let c = pc(&[1.0, -1.0, 1.0, -1.0, 1.0]);
        assert_eq!(c.as_slice(), &[-1.0, -1.0, 1.0, 1.0, 1.0]);
        assert_eq!(mean_curvature(&c), 1.0);
        assert_eq!(second_form_norm_sq(&c), 5.0);
        assert_eq!(mean_curvature(&pc(&[1.0; 4])), 4.0);
        assert_eq!(scalar_curvature(&pc(&[0.0; 4]), 1.0), 12.0);
        assert_eq!(scalar_curvature(&pc(&[-1.0, -1.0, 1.0, 1.0]), 1.0), 8.0);
        assert_eq!(scalar_curvature(&pc(&[1.0; 4]), 1.0), 24.0);
    }

    #[test]
    fn margins_on_product_spheres() {
        let clifford = pc(&[-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(strict_margin(&clifford, 1.0), 0.0);
        assert!(!strict_pinching_check(&clifford, 1.0, 4));
        let s2s3 = pc(&[-1.0, -1.0, 1.0, 1.0, 1.0]);
        assert_relative_eq!(strict_margin(&s2s3, 1.0), 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(quadratic_margin(&pc(&[0.0; 4]), 1.0, 0.5), -3.0);
        assert!(strict_pinching_check(&pc(&[1.0; 4]), 1.0, 4));
        assert!(strict_pinching_check(&pc(&[0.0; 3]), 1.0, 3));
    }

    #[test]
    fn cylinder_and_umbilic_deficits() {
        assert_eq!(cylindrical_deficit(&pc(&[0.0, 1.0, 1.0, 1.0])), 0.0);
        assert!(cylindrical_deficit(&pc(&[1.0; 4])) < 0.0);
    }

    #[test]
    fn derived_constants_reference_values() {
        let dc = derive_constants(4, 0.5, 0.05).unwrap();
        assert_relative_eq!(dc.a, 0.0375, epsilon = 1e-15);
        assert_eq!(dc.b, 3.0);
        assert_relative_eq!(dc.delta, 1.0 - 2.0 * (0.4 - 0.5 / 24.0), epsilon = 1e-15);
        assert_relative_eq!(dc.delta, 0.241667, epsilon = 1e-6);
        assert_relative_eq!(dc.beta, 1.0 / 12.0, epsilon = 1e-15);
        assert_relative_eq!(dc.c_noncollapse, 2.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(dc.eta_max_poincare, 0.4 - 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(dc.eta_max_cylindrical, 0.0875, epsilon = 1e-15);
        assert!(derive_constants(4, 1.0, 0.01).is_err());
        let dc3 = derive_constants(3, 2.0 / 3.0, 0.05).unwrap();
        assert!(dc3.delta > 0.0 && dc3.delta <= 1.0 / 6.0 + 1e-15);
    }

    #[test]
    fn weight_and_f_sigma_reference() {
        let dc = derive_constants(4, 0.5, 0.05).unwrap();
        assert_relative_eq!(weight_w(2.0, 1.0, &dc).unwrap(), 3.15, epsilon = 1e-14);
        assert_eq!(weight_w(0.0, 1.0, &dc).unwrap(), 3.0);
        let p = params(4, 1.0);
        let f = f_sigma_eta(&pc(&[0.0, 0.0, 1.0, 1.0]), 0.0, &p, &dc);
        assert_relative_eq!(f.f, (2.0 - (1.0 / 3.0 + 0.05) * 4.0) * 3.15f64.powf(-0.9), epsilon = 1e-14);
        assert!((f.f - 0.1661).abs() < 1e-4);
        assert_eq!(f.f_plus, f.f);
        let u = f_sigma_eta(&pc(&[2.0; 4]), 1.0, &p, &dc);
        assert!(u.f < 0.0 && u.f_plus == 0.0);
        let p1 = FlowParams { sigma: 1.0, ..p };
        let f1 = f_sigma_eta(&pc(&[0.0, 0.0, 1.0, 1.0]), 0.0, &p1, &dc);
        assert_relative_eq!(f1.f, 2.0 - (1.0 / 3.0 + 0.05) * 4.0, epsilon = 1e-14);
    }

    #[test]
    fn noncollapse_f_values() {
        assert_relative_eq!(noncollapse_f(&pc(&[1.0; 4]), 1.0).unwrap(), 8f64.sqrt(), epsilon = 1e-15);
        assert_eq!(noncollapse_f(&pc(&[0.0; 4]), 1.0).unwrap(), 2.0);
        assert!(noncollapse_f(&pc(&[-1.0, -1.0, 1.0, 1.0]), 1.0).is_err());
    }

    #[test]
    fn param_validation_lists_all() {
        let bad = FlowParams { n: 3, k: -1.0, alpha: 0.5, v: 0.0, theta: 1.0, eta: 0.9, sigma: 0.1 };
        let v = bad.violations();
        assert!(v.iter().any(|s| s.contains("alpha > 2/3 required when n=3")));
        assert!(v.iter().any(|s| s.contains("K > 0")));
        assert!(v.iter().any(|s| s.contains("V > 0")));
        assert!(v.iter().any(|s| s.contains("Poincare") && s.contains("cylindrical")));
        assert!(params(4, 1.0).validate().is_ok());
    }

    fn spectrum() -> impl Strategy<Value = Vec<f64>> {
        (3usize..8).prop_flat_map(|n| proptest::collection::vec(-5.0f64..5.0, n))
    }

    proptest! {
        #[test]
        fn scaling_covariance(l in spectrum(), ci in 0usize..3) {
            let c = [0.5, 2.0, 10.0][ci];
            let n = l.len();
            let p = pc(&l);
            let q = p.scaled(c);
            let (k, kc) = (1.0, c * c);
            prop_assert_eq!(strict_pinching_check(&p, k, n), strict_pinching_check(&q, kc, n));
            let m0 = quadratic_margin(&p, k, 0.5);
            let m1 = quadratic_margin(&q, kc, 0.5);
            prop_assert!((m1 - c * c * m0).abs() <= 1e-9 * (1.0 + m1.abs()));
            prop_assert!((mean_curvature(&q) - c * mean_curvature(&p)).abs() <= 1e-9 * (1.0 + c * mean_curvature(&p).abs()));
            prop_assert!((scalar_curvature(&q, kc) - c * c * scalar_curvature(&p, k)).abs() <= 1e-8 * (1.0 + scalar_curvature(&q, kc).abs()));
            let par = FlowParams { n, ..params(n, 1.0) };
            if let Ok(dc) = par.validate() {
                let parc = FlowParams { k: kc, ..par };
                let w0 = weight_w(mean_curvature(&p), k, &dc).unwrap();
                let w1 = weight_w(mean_curvature(&q), kc, &dc).unwrap();
                prop_assert!((w1 - c * c * w0).abs() <= 1e-9 * w1);
                let f0 = f_sigma_eta(&p, 0.3, &par, &dc).f;
                let f1 = f_sigma_eta(&q, 0.3 / (c * c), &parc, &dc).f;
                prop_assert!(f0.signum() == f1.signum() || f0.abs() < 1e-12);
            }
            if let (Ok(f0), Ok(f1)) = (noncollapse_f(&p, k), noncollapse_f(&q, kc)) {
                prop_assert!((f1 - c * f0).abs() <= 1e-9 * f1);
            }
        }

        #[test]
        fn orientation_invariance(l in spectrum()) {
            let p = pc(&l);
            let r = p.reversed();
            prop_assert_eq!(r.as_slice().len(), p.n());
            prop_assert!(r.as_slice().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!((mean_curvature(&r) + mean_curvature(&p)).abs() < 1e-12);
            prop_assert!((second_form_norm_sq(&r) - second_form_norm_sq(&p)).abs() < 1e-12);
            prop_assert!((quadratic_margin(&r, 1.0, 0.5) - quadratic_margin(&p, 1.0, 0.5)).abs() < 1e-9);
            prop_assert!((cylindrical_deficit(&r) - cylindrical_deficit(&p)).abs() < 1e-9);
            match (noncollapse_f(&r, 1.0), noncollapse_f(&p, 1.0)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12 * (1.0 + b)),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn admissibility_boundary(n in 3usize..9, alpha in 0.01f64..0.99, t in 0.0f64..1.2) {
            let (wp, wc) = eta_windows(n, alpha);
            let eta = t * wp.max(1e-6);
            let ok = derive_constants(n, alpha, eta);
            let nf = n as f64;
            let a = 1.0 / (nf - 2.0 + alpha) - 1.0 / (nf - 1.0) - eta + alpha / (2.0 * nf * (nf - 1.0));
            let s = alpha / (2.0 * nf * (nf - 1.0));
            let d = (1.0 - (nf + 2.0) / 3.0 * (1.0 / (nf - 2.0 + alpha) - s))
                .min(1.0 / a / (2.0 * (nf - 1.0)))
                .min(alpha + nf / 2.0 - 2.0);
            let inside = wp > 0.0 && eta > 0.0 && eta < wp && eta < wc && d > 0.0;
            prop_assert_eq!(ok.is_ok(), inside);
            if let Ok(dc) = ok {
                prop_assert!(dc.a > 0.0 && dc.delta > 0.0);
                prop_assert!((dc.a - a).abs() < 1e-14);
            }
        }
    }
}
