//! A-priori estimates as measured ratios along a flow.
//!
//! Estimates of the form "there is a constant C" are checked as boundedness or
//! non-growth of the measured sup, never against an invented value of C.

use serde::{Deserialize, Serialize};

use crate::curvature::ProfileCurvatures;
use crate::exact::{flow_product_sphere, product_sphere_h_a2, ModelError, ProductSphereState, StepControl};
use crate::flow::History;
use crate::geometry::{cylindrical_deficit_hq, f_sigma_eta_hq, noncollapse_f_hq, quadratic_margin_hq, strict_margin_hq, DerivedConstants, FlowParams};
use crate::inscribed::ChordCurvatures;
use crate::profile::dist;

/// (t, H, |A|^2) samples of a homogeneous solution.
pub type HomogeneousSample = (f64, f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousResidual {
    pub t: f64,
    /// |dH/dt - (|A|^2+nK)H| / ((|A|^2+nK)|H|), or the absolute residual when H is at roundoff level.
    pub h: f64,
    /// Same for |A|^2 against 2|A|^2(|A|^2+nK) - 4nK(|A|^2 - H^2/n).
    pub a2: f64,
}

/// Weights of the first derivative at `x0` on the stencil `xs` (Fornberg's recursion).
fn first_derivative_weights(xs: &[f64], x0: f64) -> Vec<f64> {
    let m = xs.len();
    let mut c = vec![[0.0f64; 2]; m];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..m {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] *= c4 / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Five-point finite-difference residuals of the H and |A|^2 equations; Laplacian and
/// gradient terms vanish by homogeneity. Stencils may be nonuniform.
pub fn evolution_residual(samples: &[HomogeneousSample], n: usize, kc: f64) -> Result<Vec<HomogeneousResidual>, ModelError> {
    if samples.len() < 5 {
        return Err(ModelError::EmptyInterval);
    }
    let nf = n as f64;
    Ok(samples
        .windows(5)
        .map(|w| {
            let (t1, h1, a1) = w[2];
            let ts: Vec<f64> = w.iter().map(|s| s.0).collect();
            let c = first_derivative_weights(&ts, t1);
            let dh: f64 = c.iter().zip(w).map(|(c, s)| c * s.1).sum();
            let da: f64 = c.iter().zip(w).map(|(c, s)| c * s.2).sum();
            let rh = (a1 + nf * kc) * h1;
            let ra = 2.0 * a1 * (a1 + nf * kc) - 4.0 * nf * kc * (a1 - h1 * h1 / nf);
            // relative unless the quantity itself is at roundoff level
            let floor = 1e-10 * (a1 + nf * kc).powf(1.5);
            let rel = |r: f64, s: f64| if s.abs() > floor { r / s.abs() } else { r };
            HomogeneousResidual { t: t1, h: rel((dh - rh).abs(), rh), a2: rel((da - ra).abs(), ra) }
        })
        .collect())
}

/// Samples along a product-sphere trajectory at a fixed step dt (RK4).
pub fn product_sphere_samples(state: &ProductSphereState, t_end: f64, dt: f64, kc: f64) -> Result<Vec<HomogeneousSample>, ModelError> {
    let ctl = StepControl { dt_k: dt * kc, record_every: 1 };
    let tr = flow_product_sphere(state, t_end, kc, &ctl)?;
    tr.states
        .iter()
        .map(|s| product_sphere_h_a2(s, kc).map(|(h, a2)| (s.t, h, a2)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub sup: f64,
    pub t_sup: f64,
    pub fitted: Option<f64>,
    pub violated: bool,
    pub detail: String,
}

/// (t, value, era) with era incremented at each surgery.
pub type EraSample = (f64, f64, u32);

fn sup_of(series: &[EraSample]) -> (f64, f64) {
    series.iter().fold((f64::NEG_INFINITY, 0.0), |acc, &(t, v, _)| if v > acc.0 { (v, t) } else { acc })
}

/// Per-era sups of (deficit - eta H^2) e^(2 delta K t)/K; violated iff a later era's sup
/// exceeds the previous one by more than 1%.
pub fn cylindrical_estimate_check(series: &[EraSample]) -> CheckResult {
    let (sup, t_sup) = sup_of(series);
    let mut eras: Vec<(u32, f64)> = Vec::new();
    for &(_, v, e) in series {
        match eras.last_mut() {
            Some((le, lv)) if *le == e => *lv = lv.max(v),
            _ => eras.push((e, v)),
        }
    }
    let bad = eras.windows(2).find(|w| w[1].1 > w[0].1 + 0.01 * w[0].1.abs().max(1e-12));
    CheckResult {
        name: "cylindrical".into(),
        sup,
        t_sup,
        fitted: Some(sup),
        violated: bad.is_some(),
        detail: match bad {
            Some(w) => format!("era {} sup {:.6e} exceeds era {} sup {:.6e}", w[1].0, w[1].1, w[0].0, w[0].1),
            None => format!("{} era(s), per-era sups {:?}", eras.len(), eras.iter().map(|e| e.1).collect::<Vec<_>>()),
        },
    }
}

/// Within each era the running max of f_+ may not rise by more than `slack` (relative).
pub fn fplus_monotone_check(series: &[EraSample], slack: f64) -> CheckResult {
    let (sup, t_sup) = sup_of(series);
    let mut first_bad = None;
    let mut prev: Option<(u32, f64)> = None;
    for &(t, v, e) in series {
        if let Some((pe, pv)) = prev {
            if pe == e && v > pv * (1.0 + slack) + 1e-300 && v > pv + 1e-14 * pv.abs().max(1.0) {
                first_bad.get_or_insert((t, pv, v));
            }
        }
        prev = Some((e, v));
    }
    CheckResult {
        name: "fplus_monotone".into(),
        sup,
        t_sup,
        fitted: None,
        violated: first_bad.is_some(),
        detail: match first_bad {
            Some((t, a, b)) => format!("f+ rose from {a:.6e} to {b:.6e} at t = {t:.6e}"),
            None => "non-increasing between surgeries".into(),
        },
    }
}

/// Constants of the class-C interior estimates: (Lambda_0, lambda_0).
/// Lambda_0/2 = Theta/(n-2+alpha) + 2(2-alpha) bounds max|A|^2/K at t = 0 through the pinching.
pub fn interior_constants(n: usize, alpha: f64, theta: f64) -> (f64, f64) {
    let big = 2.0 * (theta / (n as f64 - 2.0 + alpha) + 2.0 * (2.0 - alpha));
    let small = (1.0 + n as f64 / (n as f64 + big)).ln() / (2.0 * n as f64);
    (big, small)
}

/// (t, max |grad A|^2, max |grad^2 A|^2) samples.
pub type DerivSample = (f64, f64, f64);

/// Lambda-hat_m = sup over t <= lambda_0/K of t^m |grad^m A|^2 / K for m = 1, 2.
pub fn bernstein_check(samples: &[DerivSample], lambda0: f64, kc: f64) -> [CheckResult; 2] {
    let window: Vec<&DerivSample> = samples.iter().filter(|s| s.0 <= lambda0 / kc).collect();
    let mk = |m: i32, name: &str| {
        let (sup, t_sup) = window.iter().fold((0.0f64, 0.0), |acc, &&(t, g1, g2)| {
            let v = t.powi(m) * if m == 1 { g1 } else { g2 } / kc;
            if v > acc.0 {
                (v, t)
            } else {
                acc
            }
        });
        CheckResult {
            name: name.into(),
            sup,
            t_sup,
            fitted: Some(sup),
            violated: !sup.is_finite(),
            detail: format!("{} samples in [0, {:.4e}]", window.len(), lambda0 / kc),
        }
    };
    [mk(1, "bernstein_1"), mk(2, "bernstein_2")]
}

/// (t, max kbar/F, min kunder/F).
pub type ChordSample = (f64, f64, f64);

/// Both bounds C + (mu - C) e^(-4Kt) with relative slack.
pub fn noncollapse_check(samples: &[ChordSample], c: f64, mu: f64, kc: f64, slack: f64) -> CheckResult {
    let mut worst = f64::NEG_INFINITY;
    let mut t_w = 0.0;
    let mut first_bad = None;
    for &(t, hi, lo) in samples {
        let bound = c + (mu - c) * (-4.0 * kc * t).exp();
        let r = hi.max(-lo) / bound;
        if r > worst {
            worst = r;
            t_w = t;
        }
        if r > 1.0 + slack && first_bad.is_none() {
            first_bad = Some((t, hi, lo, bound));
        }
    }
    CheckResult {
        name: "noncollapsing".into(),
        sup: worst,
        t_sup: t_w,
        fitted: Some(mu),
        violated: first_bad.is_some(),
        detail: match first_bad {
            Some((t, hi, lo, b)) => format!("t = {t:.6e}: kbar/F = {hi:.6}, kunder/F = {lo:.6}, bound {b:.6}"),
            None => format!("max ratio to bound {worst:.6} (mu = {mu:.6}, C = {c:.6})"),
        },
    }
}

/// Ratio sequence after burn-in may not exceed twice its first post-burn-in value.
pub fn non_divergence_check(name: &str, series: &[(f64, f64)], burn_in: f64) -> CheckResult {
    let after: Vec<&(f64, f64)> = series.iter().filter(|s| s.0 >= burn_in).collect();
    let (sup, t_sup) = series.iter().fold((0.0f64, 0.0), |a, &(t, v)| if v > a.0 { (v, t) } else { a });
    let (violated, detail) = match after.first() {
        Some(&&(t0, v0)) => {
            let peak = after.iter().map(|s| s.1).fold(0.0, f64::max);
            (peak > 2.0 * v0 && peak > 1e-12, format!("first post-burn-in value {v0:.6e} at t = {t0:.6e}, later max {peak:.6e}"))
        }
        None => (false, "no samples after burn-in".into()),
    };
    CheckResult { name: name.into(), sup, t_sup, fitted: Some(sup), violated, detail }
}

/// c-sharp: sup of |grad H|/H^2 where H >= h_sharp sqrt(K).
pub fn c_sharp(curv: &ProfileCurvatures, h_sharp: f64, kc: f64) -> f64 {
    curv.nodes
        .iter()
        .filter(|c| c.h >= h_sharp * kc.sqrt())
        .map(|c| c.grad_h / (c.h * c.h))
        .fold(0.0, f64::max)
}

/// min over nodes of |grad A|^2 / (3/(n+2) |grad H|^2); infinite when grad H vanishes everywhere.
pub fn kato_ratio(curv: &ProfileCurvatures, n: usize) -> f64 {
    let k = 3.0 / (n as f64 + 2.0);
    curv.nodes
        .iter()
        .filter(|c| c.grad_h * c.grad_h > 1e-300)
        .map(|c| c.grad_a2 / (k * c.grad_h * c.grad_h))
        .fold(f64::INFINITY, f64::min)
}

/// Fitted constants for G_eta and G_0, each kept strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GConstants {
    pub c_beta: f64,
    pub c_0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientRatios {
    pub grad: f64,
    pub hess: f64,
    pub g_ratio: f64,
}

/// (sup |grad A|^2/(H^4+K^2), sup |grad^2 A|^2/(H^6+K^3), sup |grad A|^2/(G_beta G_0)).
pub fn gradient_hessian_ratios(curv: &ProfileCurvatures, n: usize, kc: f64, t: f64, dc: &DerivedConstants, g: &GConstants) -> GradientRatios {
    let nf = n as f64;
    let mut out = GradientRatios { grad: 0.0, hess: 0.0, g_ratio: 0.0 };
    for c in &curv.nodes {
        let h2 = c.h * c.h;
        out.grad = out.grad.max(c.grad_a2 / (h2 * h2 + kc * kc));
        out.hess = out.hess.max(c.hess_a2 / (h2 * h2 * h2 + kc * kc * kc));
        let gb = 2.0 * g.c_beta * kc * (-2.0 * dc.delta * kc * t).exp() + (dc.beta + 1.0 / (nf - 1.0)) * h2 - c.norm_a2;
        let g0 = 2.0 * g.c_0 * kc + 3.0 / (nf + 2.0) * h2 - c.norm_a2;
        out.g_ratio = out.g_ratio.max(c.grad_a2 / (gb * g0));
    }
    out
}

/// Lower bounds the G constants must exceed at this state.
pub fn g_constant_demand(curv: &ProfileCurvatures, n: usize, kc: f64, t: f64, dc: &DerivedConstants) -> GConstants {
    let nf = n as f64;
    let mut d = GConstants { c_beta: 0.0, c_0: 0.0 };
    for c in &curv.nodes {
        let h2 = c.h * c.h;
        d.c_beta = d.c_beta.max((c.norm_a2 - (dc.beta + 1.0 / (nf - 1.0)) * h2) * (2.0 * dc.delta * kc * t).exp() / kc);
        d.c_0 = d.c_0.max((c.norm_a2 - 3.0 / (nf + 2.0) * h2) / kc);
    }
    d
}

/// Curvature comparability on intrinsic parabolic cylinders of radius 1/(10 c H(p,t)):
/// returns the worst max(H(q,s)/H(p,t), H(p,t)/H(q,s)); the bound is 10.
pub fn comparability_scan(history: &History, c_sharp: f64, h_sharp: f64, kc: f64) -> (f64, usize) {
    if !(c_sharp > 0.0) {
        return (1.0, 0);
    }
    let frames: Vec<_> = history.frames.iter().collect();
    let mut worst: f64 = 1.0;
    let mut checked = 0usize;
    for (fi, f) in frames.iter().enumerate() {
        for node in f.nodes.iter().filter(|x| x.h >= h_sharp * kc.sqrt()) {
            let r = 1.0 / (10.0 * c_sharp * node.h);
            checked += 1;
            for g in frames[..=fi].iter().rev().take_while(|g| g.t > f.t - r * r) {
                let j = g
                    .nodes
                    .iter()
                    .enumerate()
                    .min_by(|a, b| dist(&a.1.p, &node.p).partial_cmp(&dist(&b.1.p, &node.p)).unwrap())
                    .map(|(j, _)| j)
                    .unwrap();
                let xi0 = g.nodes[j].xi;
                for q in g.nodes.iter().filter(|q| (q.xi - xi0).abs() <= r) {
                    let ratio = if q.h > 0.0 { (q.h / node.h).max(node.h / q.h) } else { f64::INFINITY };
                    worst = worst.max(ratio);
                }
            }
        }
    }
    (worst, checked)
}

/// Pointwise scalars of one sampled state across all live components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseSummary {
    pub max_h2: f64,
    pub max_a2: f64,
    /// min over nodes of -(strict margin)/K; positive when strictly pinched.
    pub min_margin_strict: f64,
    /// max over nodes of the alpha-margin Q_alpha/K; negative when the pinching is preserved.
    pub max_q_alpha: f64,
    pub max_cyl_ratio: f64,
    pub fplus_max: f64,
    pub max_grad_a2: f64,
    pub max_hess_a2: f64,
    pub kato: f64,
}

pub fn pointwise_summary(curvs: &[&ProfileCurvatures], params: &FlowParams, dc: &DerivedConstants, t: f64) -> PointwiseSummary {
    let (n, kc) = (params.n, params.k);
    let mut s = PointwiseSummary {
        max_h2: 0.0,
        max_a2: 0.0,
        min_margin_strict: f64::INFINITY,
        max_q_alpha: f64::NEG_INFINITY,
        max_cyl_ratio: f64::NEG_INFINITY,
        fplus_max: 0.0,
        max_grad_a2: 0.0,
        max_hess_a2: 0.0,
        kato: f64::INFINITY,
    };
    let growth = (2.0 * dc.delta * kc * t).exp();
    for curv in curvs {
        for c in &curv.nodes {
            let h2 = c.h * c.h;
            s.max_h2 = s.max_h2.max(h2);
            s.max_a2 = s.max_a2.max(c.norm_a2);
            s.min_margin_strict = s.min_margin_strict.min(-strict_margin_hq(n, c.h, c.norm_a2, kc) / kc);
            s.max_q_alpha = s.max_q_alpha.max(quadratic_margin_hq(n, c.h, c.norm_a2, kc, params.alpha) / kc);
            s.max_cyl_ratio = s.max_cyl_ratio.max((cylindrical_deficit_hq(n, c.h, c.norm_a2) - params.eta * h2) * growth / kc);
            let f = f_sigma_eta_hq(n, c.h, c.norm_a2, t, params, dc);
            s.fplus_max = s.fplus_max.max(f.f_plus);
            s.max_grad_a2 = s.max_grad_a2.max(c.grad_a2);
            s.max_hess_a2 = s.max_hess_a2.max(c.hess_a2);
        }
        s.kato = s.kato.min(kato_ratio(curv, n));
    }
    s
}

/// (max kbar/F, min kunder/F) over nodes; None if F is undefined somewhere.
pub fn chord_over_f(curv: &ProfileCurvatures, chords: &[ChordCurvatures], n: usize, kc: f64) -> Option<(f64, f64)> {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (c, k) in curv.nodes.iter().zip(chords) {
        let f = noncollapse_f_hq(n, c.h, c.norm_a2, kc).ok()?;
        hi = hi.max(k.k_in / f);
        lo = lo.min(k.k_ex / f);
    }
    Some((hi, lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{geodesic_sphere_closed_form, geodesic_sphere_curvatures, minimal_clifford_angle};
    use crate::geometry::{mean_curvature, second_form_norm_sq};

    #[test]
    fn stencil_weights() {
        let w = first_derivative_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 0.0);
        for (a, b) in w.iter().zip([1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let xs = [0.0, 0.3, 0.35, 0.9, 1.0];
        let w = first_derivative_weights(&xs, 0.35);
        let d: f64 = w.iter().zip(&xs).map(|(w, x)| w * (x * x * x * x - 2.0 * x)).sum();
        assert!((d - (4.0 * 0.35f64.powi(3) - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_residuals() {
        let s = ProductSphereState::new(4, 1, 0.6).unwrap();
        let samples = product_sphere_samples(&s, 0.02, 1e-4, 1.0).unwrap();
        let r = evolution_residual(&samples, 4, 1.0).unwrap();
        assert!(r.iter().all(|x| x.h < 1e-5 && x.a2 < 1e-5), "{:?}", r.iter().map(|x| x.h).fold(0.0, f64::max));
        let u = minimal_clifford_angle(4, 2);
        let c = product_sphere_samples(&ProductSphereState::new(4, 2, u).unwrap(), 0.01, 1e-4, 1.0).unwrap();
        let r = evolution_residual(&c, 4, 1.0).unwrap();
        assert!(r.iter().all(|x| x.h < 1e-10), "{:?}", &r[..3]);
        let g: Vec<HomogeneousSample> = (0..50)
            .map(|i| {
                let t = i as f64 * 1e-4;
                let d = geodesic_sphere_closed_form(1.0, t, 4, 1.0).unwrap();
                let pc = geodesic_sphere_curvatures(4, d, 1.0);
                (t, mean_curvature(&pc), second_form_norm_sq(&pc))
            })
            .collect();
        assert!(evolution_residual(&g, 4, 1.0).unwrap().iter().all(|x| x.h < 1e-5));
    }

    #[test]
    fn era_checks() {
        let s = vec![(0.0, 1.0, 0), (0.1, 0.9, 0), (0.2, 0.95, 1), (0.3, 0.5, 1)];
        assert!(!cylindrical_estimate_check(&s).violated);
        assert!(!fplus_monotone_check(&s, 0.01).violated);
        let bad = vec![(0.0, 1.0, 0), (0.1, 1.2, 0)];
        assert!(fplus_monotone_check(&bad, 0.01).violated);
        let grow = vec![(0.0, 1.0, 0), (0.2, 1.5, 1)];
        assert!(cylindrical_estimate_check(&grow).violated);
    }

    #[test]
    fn interior_constant_values() {
        let (big, small) = interior_constants(4, 0.5, 3000.0);
        assert!((big - 2.0 * (3000.0 / 2.5 + 3.0)).abs() < 1e-9);
        assert!(((2.0 * 4.0 * small).exp() - (1.0 + 4.0 / (4.0 + big))).abs() < 1e-12);
    }
}
