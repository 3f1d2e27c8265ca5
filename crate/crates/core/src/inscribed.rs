//! Inscribed and exscribed curvatures of an embedded SO(n)-invariant hypersurface.
//!
//! For p, q on orbits of profile nodes with relative orbit angle chi, the chord
//! ratio 2<p-q, nu>/|p-q|^2 is a Moebius function of cos chi, so its extremes
//! over the orbit of q sit at chi = 0 or pi.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::ProfileCurvatures;
use crate::profile::ProfileCurve;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InscribedError {
    #[error("profile is not embedded: segments {0} and {1} cross")]
    NotEmbedded(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordCurvatures {
    pub k_in: f64,
    pub k_ex: f64,
}

fn chord_ratio(p: &[f64; 3], nu: &[f64; 3], q: &[f64; 3], c: f64) -> Option<f64> {
    let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
    let d2 = dx * dx + dy * dy + p[2] * p[2] + q[2] * q[2] - 2.0 * p[2] * q[2] * c;
    if !(d2 > 0.0) {
        return None;
    }
    let num = dx * nu[0] + dy * nu[1] + nu[2] * (p[2] - q[2] * c);
    Some(2.0 * num / d2)
}

pub fn inscribed_exscribed(profile: &ProfileCurve, curv: &ProfileCurvatures) -> Result<Vec<ChordCurvatures>, InscribedError> {
    if let Some((i, j)) = profile.self_intersection() {
        return Err(InscribedError::NotEmbedded(i, j));
    }
    let nodes = &profile.nodes;
    Ok((0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let p = nodes[i];
            let nu = curv.frames[i].normal;
            let nc = &curv.nodes[i];
            let mut k_in = nc.lambda_rot.max(nc.kappa_prof);
            let mut k_ex = nc.lambda_rot.min(nc.kappa_prof);
            for (j, q) in nodes.iter().enumerate() {
                for c in [1.0, -1.0] {
                    if j == i && c == 1.0 {
                        continue;
                    }
                    if let Some(r) = chord_ratio(&p, &nu, q, c) {
                        k_in = k_in.max(r);
                        k_ex = k_ex.min(r);
                    }
                }
            }
            ChordCurvatures { k_in, k_ex }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::profile_curvatures;
    use crate::profile::{dumbbell, equator, geodesic_sphere, DumbbellShape};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn sphere_and_equator() {
        let g = geodesic_sphere(FRAC_PI_4, 201, 1.0).unwrap();
        let c = profile_curvatures(&g, 4).unwrap();
        for k in inscribed_exscribed(&g, &c).unwrap() {
            assert!((k.k_in - 1.0).abs() < 1e-8 && (k.k_ex - 1.0).abs() < 1e-8, "{k:?}");
        }
        let e = equator(101, 1.0).unwrap();
        let c = profile_curvatures(&e, 4).unwrap();
        for k in inscribed_exscribed(&e, &c).unwrap() {
            assert!(k.k_in.abs() < 1e-10 && k.k_ex.abs() < 1e-10);
        }
    }

    #[test]
    fn bounds_principal_curvatures() {
        let d = dumbbell(DumbbellShape { half_length: 0.8, neck_radius: 0.06, bulb_radius: 0.16 }, 300, 1.0).unwrap();
        let c = profile_curvatures(&d, 4).unwrap();
        let k = inscribed_exscribed(&d, &c).unwrap();
        for (kk, nc) in k.iter().zip(&c.nodes) {
            let pc = nc.principal(4);
            assert!(kk.k_in >= pc.max() && kk.k_ex <= pc.min());
            assert!(kk.k_in >= nc.h / 4.0 && kk.k_ex <= nc.h / 4.0);
        }
    }

    #[test]
    fn dense_orbit_scan_agrees() {
        let d = dumbbell(DumbbellShape { half_length: 0.8, neck_radius: 0.06, bulb_radius: 0.16 }, 120, 1.0).unwrap();
        let c = profile_curvatures(&d, 4).unwrap();
        let k = inscribed_exscribed(&d, &c).unwrap();
        for i in [10, 40, 60, 90] {
            let p = d.nodes[i];
            let nu = c.frames[i].normal;
            let mut hi = f64::MIN;
            for (j, q) in d.nodes.iter().enumerate() {
                for s in 0..=64 {
                    let chi = std::f64::consts::PI * s as f64 / 64.0;
                    if j == i && s == 0 {
                        continue;
                    }
                    if let Some(r) = chord_ratio(&p, &nu, q, chi.cos()) {
                        hi = hi.max(r);
                    }
                }
            }
            assert!(hi <= k[i].k_in + 1e-12);
        }
    }
}
