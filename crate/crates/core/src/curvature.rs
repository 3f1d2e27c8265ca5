//! Discrete principal curvatures and their derivatives on a profile curve.
//!
//! Tangent and profile curvature at a node come from the small circle of the
//! orbit sphere through the node and its two neighbors, so geodesic circles
//! (spheres, tubes, the equator) are reproduced without truncation error.
//! Derivatives along the profile use the Codazzi relation
//! d(lambda_rot)/dxi = w (kappa - lambda_rot), w = (dz/dxi)/z.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PrincipalCurvatures;
use crate::profile::{cross, dot, norm, scale, sub, ProfileCurve, P3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error("degenerate spacing at node {0}")]
    Spacing(usize),
    #[error("non-finite curvature at node {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeFrame {
    pub tangent: P3,
    pub normal: P3,
    pub kappa: f64,
    pub lambda_rot: f64,
    /// (dz/dxi)/z; zero at axis nodes where it is singular.
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCurvature {
    pub lambda_rot: f64,
    pub kappa_prof: f64,
    pub h: f64,
    pub norm_a2: f64,
    /// d(lambda_rot)/dxi from Codazzi.
    pub mu: f64,
    pub dkappa: f64,
    pub grad_h: f64,
    pub grad_a2: f64,
    pub hess_a2: f64,
}

impl NodeCurvature {
    pub fn principal(&self, n: usize) -> PrincipalCurvatures {
        PrincipalCurvatures::rotational(n, self.lambda_rot, self.kappa_prof).expect("finite")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurvatures {
    pub nodes: Vec<NodeCurvature>,
    pub frames: Vec<NodeFrame>,
    pub xi: Vec<f64>,
    /// Interior node with z < 1e-6 rho, if any.
    pub pinch: Option<usize>,
    /// max |d(lambda_rot)/dxi (finite difference) - mu| / max(1, |mu|) over interior nodes.
    pub codazzi_residual: f64,
}

impl ProfileCurvatures {
    pub fn max_h2(&self) -> f64 {
        self.nodes.iter().map(|c| c.h * c.h).fold(0.0, f64::max)
    }

    pub fn max_a2(&self) -> f64 {
        self.nodes.iter().map(|c| c.norm_a2).fold(0.0, f64::max)
    }
}

fn unit(v: &P3) -> P3 {
    scale(v, 1.0 / norm(v))
}

/// Tangent, normal and profile curvature at p from the circle through (a, p, b).
pub fn circle_frame(a: &P3, p: &P3, b: &P3, rho: f64) -> Option<(P3, P3, f64)> {
    let mr = cross(&sub(b, p), &sub(a, p));
    let mn = norm(&mr);
    if !(mn > 0.0) {
        return None;
    }
    let m = scale(&mr, 1.0 / mn);
    let c = dot(p, &m);
    let a2 = rho * rho - c * c;
    let mut t = unit(&cross(&m, p));
    if dot(&t, &sub(b, a)) < 0.0 {
        t = scale(&t, -1.0);
    }
    let nu = cross(&unit(p), &t);
    let kappa = -c * dot(&m, &nu) / a2;
    Some((t, nu, kappa))
}

pub fn frames(profile: &ProfileCurve) -> Result<Vec<NodeFrame>, CurvatureError> {
    let n = profile.nodes.len();
    let closed = profile.is_closed();
    (0..n)
        .map(|i| {
            let (a, b) = profile.neighbors(i);
            let p = profile.nodes[i];
            let (t, nu, kappa) = circle_frame(&a, &p, &b, profile.rho).ok_or(CurvatureError::Spacing(i))?;
            let axis = !closed && (i == 0 || i == n - 1);
            let (lambda_rot, w) = if axis { (kappa, 0.0) } else { (nu[2] / p[2], t[2] / p[2]) };
            if !(kappa.is_finite() && lambda_rot.is_finite()) {
                return Err(CurvatureError::NonFinite(i));
            }
            Ok(NodeFrame { tangent: t, normal: nu, kappa, lambda_rot, w })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// First and second derivatives on a nonuniform grid. `seg[i]` joins node i and
/// i+1 (wrapping for closed curves). Open-curve ends use reflection with the given parity.
pub fn derivatives(f: &[f64], seg: &[f64], closed: bool, parity: Parity) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let sgn = if parity == Parity::Even { 1.0 } else { -1.0 };
    for i in 0..n {
        let (h1, h2, fm, fp) = if closed {
            (seg[(i + n - 1) % n], seg[i], f[(i + n - 1) % n], f[(i + 1) % n])
        } else if i == 0 {
            (seg[0], seg[0], sgn * f[1], f[1])
        } else if i == n - 1 {
            (seg[n - 2], seg[n - 2], f[n - 2], sgn * f[n - 2])
        } else {
            (seg[i - 1], seg[i], f[i - 1], f[i + 1])
        };
        let fc = if !closed && (i == 0 || i == n - 1) && parity == Parity::Odd { 0.0 } else { f[i] };
        let den = h1 * h2 * (h1 + h2);
        d1[i] = (h1 * h1 * fp - h2 * h2 * fm + (h2 * h2 - h1 * h1) * fc) / den;
        d2[i] = 2.0 * (h1 * fp - (h1 + h2) * fc + h2 * fm) / den;
    }
    if !closed {
        match parity {
            Parity::Even => {
                d1[0] = 0.0;
                d1[n - 1] = 0.0;
            }
            Parity::Odd => {
                d2[0] = 0.0;
                d2[n - 1] = 0.0;
            }
        }
    }
    (d1, d2)
}

/// Curvatures, gradients and Hessian norms at every node.
pub fn profile_curvatures(profile: &ProfileCurve, n: usize) -> Result<ProfileCurvatures, CurvatureError> {
    let fr = frames(profile)?;
    let m = fr.len();
    let closed = profile.is_closed();
    let seg = profile.segments();
    let nf = n as f64;
    let axis = |i: usize| !closed && (i == 0 || i == m - 1);
    let kappa: Vec<f64> = fr.iter().map(|f| f.kappa).collect();
    let lam: Vec<f64> = fr.iter().map(|f| f.lambda_rot).collect();
    let mu: Vec<f64> = (0..m).map(|i| if axis(i) { 0.0 } else { fr[i].w * (kappa[i] - lam[i]) }).collect();
    let (dk, ddk) = derivatives(&kappa, &seg, closed, Parity::Even);
    let (dmu, _) = derivatives(&mu, &seg, closed, Parity::Odd);
    let (dlam, _) = derivatives(&lam, &seg, closed, Parity::Even);
    let mut codazzi_residual: f64 = 0.0;
    let nodes = (0..m)
        .map(|i| {
            let (l, k) = (lam[i], kappa[i]);
            let h = (nf - 1.0) * l + k;
            let norm_a2 = (nf - 1.0) * l * l + k * k;
            let (wa, wb) = if axis(i) {
                // w dkappa -> kappa'', w mu -> mu' as the axis is approached
                (ddk[i] - 2.0 * dmu[i], dmu[i])
            } else {
                codazzi_residual = codazzi_residual.max((dlam[i] - mu[i]).abs() / mu[i].abs().max(1.0));
                (fr[i].w * (dk[i] - 2.0 * mu[i]), fr[i].w * mu[i])
            };
            let grad_a2 = dk[i] * dk[i] + 3.0 * (nf - 1.0) * mu[i] * mu[i];
            let grad_h = (dk[i] + (nf - 1.0) * mu[i]).abs();
            let hess_a2 = ddk[i] * ddk[i] + 3.0 * (nf - 1.0) * dmu[i] * dmu[i] + 3.0 * (nf - 1.0) * (wa * wa + (nf + 1.0) * wb * wb);
            NodeCurvature { lambda_rot: l, kappa_prof: k, h, norm_a2, mu: mu[i], dkappa: dk[i], grad_h, grad_a2, hess_a2 }
        })
        .collect();
    let rho = profile.rho;
    let pinch = (0..m).filter(|&i| !axis(i)).find(|&i| profile.nodes[i][2] < 1e-6 * rho);
    Ok(ProfileCurvatures { nodes, frames: fr, xi: profile.xi(), pinch, codazzi_residual })
}

/// Laplace-Beltrami of an SO(n)-invariant function: f'' + (n-1) w f', and n f'' on the axis.
pub fn laplacian(f: &[f64], profile: &ProfileCurve, frames: &[NodeFrame], n: usize) -> Vec<f64> {
    let (d1, d2) = derivatives(f, &profile.segments(), profile.is_closed(), Parity::Even);
    let m = f.len();
    (0..m)
        .map(|i| {
            if !profile.is_closed() && (i == 0 || i == m - 1) {
                n as f64 * d2[i]
            } else {
                d2[i] + (n as f64 - 1.0) * frames[i].w * d1[i]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{product_sphere_curvatures, ProductSphereState};
    use crate::profile::{equator, geodesic_sphere, tube};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn geodesic_sphere_is_umbilic() {
        for &(rho, d) in &[(1.0, FRAC_PI_4), (0.5, 0.3), (2.0, 2.5)] {
            let g = geodesic_sphere(d, 301, rho).unwrap();
            let c = profile_curvatures(&g, 4).unwrap();
            let expect = (d / rho).cos() / (d / rho).sin() / rho;
            for nc in &c.nodes {
                assert_relative_eq!(nc.lambda_rot, expect, epsilon = 1e-8 / rho);
                assert_relative_eq!(nc.kappa_prof, expect, epsilon = 1e-8 / rho);
                assert_relative_eq!(nc.h, 4.0 * expect, epsilon = 1e-7 / rho);
                assert!(nc.grad_a2 < 1e-10 / rho.powi(4));
            }
        }
    }

    #[test]
    fn tube_matches_product_sphere() {
        for &u in &[0.2, 0.7, 1.3] {
            let t = tube(u, 200, 1.0).unwrap();
            let c = profile_curvatures(&t, 4).unwrap();
            let pc = product_sphere_curvatures(&ProductSphereState::new(4, 1, u).unwrap(), 1.0).unwrap();
            for nc in &c.nodes {
                let mine = nc.principal(4);
                for (a, b) in mine.as_slice().iter().zip(pc.as_slice()) {
                    assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
                }
                assert!(nc.grad_a2 < 1e-12 && nc.hess_a2 < 1e-12);
            }
        }
    }

    #[test]
    fn equator_is_flat() {
        let c = profile_curvatures(&equator(101, 1.0).unwrap(), 4).unwrap();
        assert!(c.nodes.iter().all(|nc| nc.h.abs() < 1e-12 && nc.norm_a2 < 1e-24));
    }

    #[test]
    fn derivative_stencils_exact_on_quadratics() {
        // nonuniform grid, f = 1 + 2x + 3x^2
        let x = [0.0, 0.1, 0.25, 0.3, 0.5];
        let f: Vec<f64> = x.iter().map(|x| 1.0 + 2.0 * x + 3.0 * x * x).collect();
        let seg: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let (d1, d2) = derivatives(&f, &seg, false, Parity::Even);
        for i in 1..4 {
            assert_relative_eq!(d1[i], 2.0 + 6.0 * x[i], epsilon = 1e-12);
            assert_relative_eq!(d2[i], 6.0, epsilon = 1e-10);
        }
        let (o1, _) = derivatives(&[0.0, 0.1, 0.2], &[0.1, 0.1], false, Parity::Odd);
        assert_relative_eq!(o1[0], 1.0, epsilon = 1e-14);
    }
}
