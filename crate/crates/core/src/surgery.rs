//! Neck detection, surgery on neck middle thirds, and topology bookkeeping.
//!
//! Caps are built in Fermi coordinates (X along the axis, R = distance to it)
//! about the axis foot of each cut node: R^2 = R_c^2 psi(s), s = X/l, with psi a
//! quartic matching R, R', R'' at the cut and psi(1) = 0, psi'(1) = -2, so the
//! tip is smooth with radius R_c/tau for l = tau R_c.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{profile_curvatures, CurvatureError, ProfileCurvatures};
use crate::flow::{Frame, FlowState};
use crate::geometry::{f_sigma_eta_hq, strict_margin_hq, DerivedConstants, FlowParams};
use crate::profile::{area, dist, exp_axis, log_axis, ProfileCurve, ProfileError, Topology, P3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurgeryError {
    #[error("neck H = {h} outside trigger band [{lo}, {hi}]")]
    Band { h: f64, lo: f64, hi: f64 },
    #[error("surgery verification failed after {attempts} attempts: {reason}")]
    Retries { attempts: usize, reason: String },
    #[error("invalid component: {0}")]
    InvalidComponent(String),
    #[error("no history frames in the quality window")]
    NoWindow,
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurgeryParams {
    pub epsilon: f64,
    pub k_neck: usize,
    #[serde(rename = "L")]
    pub neck_length: f64,
    /// Cap length in units of the cut radius.
    pub tau: f64,
    /// Bound on |kappa| R_c over the cap.
    #[serde(rename = "B")]
    pub b_cap: f64,
    /// Surgery scale, a length.
    pub r_surg: f64,
    pub eta_sharp: f64,
    pub h_sharp: f64,
    #[serde(rename = "Theta1")]
    pub theta1: f64,
    #[serde(rename = "Theta2")]
    pub theta2: f64,
    #[serde(rename = "Theta3")]
    pub theta3: f64,
    /// Duration factor of the surgery-free window, theta/H^2.
    pub theta_nd2: f64,
    /// Whether neck quality must pass before surgery; otherwise it is only reported.
    pub quality_gate: bool,
    pub max_retries: usize,
}

impl SurgeryParams {
    pub fn defaults(n: usize, kc: f64) -> Self {
        let nf = n as f64;
        let r_surg = 0.03 / kc.sqrt();
        let h_sharp = 20.0 * nf;
        let theta1 = (4.0 * h_sharp * h_sharp).max((nf - 1.0).powi(2) / (50.0 * r_surg * r_surg * kc));
        Self {
            epsilon: 0.01,
            k_neck: 2,
            neck_length: 10.0,
            tau: 1.0,
            b_cap: 4.0,
            r_surg,
            eta_sharp: 0.1 / nf,
            h_sharp,
            theta1,
            theta2: 4.0 * theta1,
            theta3: 16.0 * theta1,
            theta_nd2: 1e4 * (nf - 1.0).powi(2),
            quality_gate: false,
            max_retries: 3,
        }
    }

    pub fn violations(&self, n: usize, kc: f64) -> Vec<String> {
        let mut v = Vec::new();
        let nf = n as f64;
        if !(self.epsilon > 0.0 && self.epsilon <= 0.01) {
            v.push(format!("epsilon = {} must lie in (0, 1/100]", self.epsilon));
        }
        if !(self.neck_length >= 10.0) {
            v.push(format!("L = {} must be at least 10", self.neck_length));
        }
        if !(self.theta1 < self.theta2 && self.theta2 < self.theta3) {
            v.push(format!("need Theta1 < Theta2 < Theta3, got {}, {}, {}", self.theta1, self.theta2, self.theta3));
        }
        if !(self.r_surg > 0.0) {
            v.push(format!("r_surg = {} must be positive", self.r_surg));
        } else if (nf - 1.0).powi(2) / (100.0 * self.r_surg * self.r_surg) > self.theta1 * kc {
            v.push(format!(
                "trigger band: (n-1)^2/(100 r_surg^2) = {} exceeds Theta1 K = {}",
                (nf - 1.0).powi(2) / (100.0 * self.r_surg * self.r_surg),
                self.theta1 * kc
            ));
        }
        if !(self.tau > 0.0 && self.b_cap > 0.0) {
            v.push("tau and B must be positive".into());
        }
        if !(self.eta_sharp > 0.0 && self.eta_sharp < 1.0 / nf) {
            v.push(format!("eta_sharp = {} must lie in (0, 1/n)", self.eta_sharp));
        }
        if !(self.h_sharp > 0.0 && self.theta_nd2 > 0.0) {
            v.push("h_sharp and theta must be positive".into());
        }
        v
    }

    /// (n-1)/(10 r) <= H <= 10(n-1)/r.
    pub fn band(&self, n: usize) -> (f64, f64) {
        let m = n as f64 - 1.0;
        (m / (10.0 * self.r_surg), 10.0 * m / self.r_surg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckQuality {
    /// Lambda_{r0,k,eps} r0^(k+1) for k = 0..=2; acceptance needs each <= eps.
    pub normalized: Vec<f64>,
    pub accepted: bool,
    pub partial_window: bool,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckRegion {
    pub start: usize,
    /// Inclusive; for closed loops the interval may wrap (end < start).
    pub end: usize,
    pub center: usize,
    pub h_center: f64,
    pub r0: f64,
    pub quality: NeckQuality,
    pub surgery_free: bool,
    pub covers_component: bool,
}

fn sorted_principal(n: usize, lambda_rot: f64, kappa: f64) -> Vec<f64> {
    let mut v = vec![lambda_rot; n - 1];
    v.push(kappa);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn lambda0_integrand(n: usize, lambda_rot: f64, kappa: f64) -> f64 {
    let v = sorted_principal(n, lambda_rot, kappa);
    let top = v[n - 1];
    (v[0] * v[0] + v[1..].iter().map(|l| (top - l).powi(2)).sum::<f64>()).sqrt()
}

/// Discrete maxima over the arclength ball B(p, r0/eps) and times (t0 - 1e4 r0^2, t0],
/// truncated at `window_floor` (run start or last surgery).
pub fn neck_quality<'a>(frames: impl Iterator<Item = &'a Frame>, p: &P3, t0: f64, r0: f64, eps: f64, n: usize, window_floor: f64) -> Result<NeckQuality, SurgeryError> {
    let t_lo = t0 - 1e4 * r0 * r0;
    let partial = window_floor > t_lo;
    let mut lam = [0.0f64; 3];
    let mut used = 0;
    for f in frames.filter(|f| f.t > t_lo && f.t >= window_floor && f.t <= t0) {
        used += 1;
        let j = (0..f.nodes.len())
            .min_by(|&a, &b| dist(&f.nodes[a].p, p).partial_cmp(&dist(&f.nodes[b].p, p)).unwrap())
            .unwrap();
        let xi0 = f.nodes[j].xi;
        for q in f.nodes.iter().filter(|q| (q.xi - xi0).abs() <= r0 / eps) {
            lam[0] = lam[0].max(lambda0_integrand(n, q.lambda_rot, q.kappa));
            lam[1] = lam[1].max(q.grad_a2.sqrt());
            lam[2] = lam[2].max(q.hess_a2.sqrt());
        }
    }
    if used == 0 {
        return Err(SurgeryError::NoWindow);
    }
    let normalized: Vec<f64> = lam.iter().enumerate().map(|(k, l)| l * r0.powi(k as i32 + 1)).collect();
    let accepted = normalized.iter().all(|x| *x <= eps);
    Ok(NeckQuality { normalized, accepted, partial_window: partial, frames: used })
}

fn nd1(c: &crate::curvature::NodeCurvature, n: usize, params: &SurgeryParams, kc: f64) -> bool {
    let l1 = sorted_principal(n, c.lambda_rot, c.kappa_prof)[0];
    c.h >= params.h_sharp * kc.sqrt() && l1 / c.h <= params.eta_sharp
}

/// Maximal runs of ND1 nodes with their quality and surgery-free status.
/// `last_surgery` is the time this component was last modified, if ever.
pub fn detect_necks(state: &FlowState, params: &SurgeryParams, last_surgery: Option<f64>) -> Result<Vec<NeckRegion>, SurgeryError> {
    let n = state.n;
    let kc = state.kc();
    let m = state.curv.nodes.len();
    let flags: Vec<bool> = state.curv.nodes.iter().map(|c| nd1(c, n, params, kc)).collect();
    let closed = state.profile.is_closed();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    if flags.iter().all(|f| *f) {
        runs.push((0, m - 1));
    } else {
        // start scanning after a non-flagged node so that closed runs do not split at 0
        let first = if closed { flags.iter().position(|f| !f).unwrap() } else { 0 };
        let mut i = 0;
        while i < m {
            let k = (first + i) % m;
            if flags[k] && (!closed || i < m) {
                let s = k;
                let mut len = 0;
                while i < m && flags[(first + i) % m] {
                    len += 1;
                    i += 1;
                }
                runs.push((s, (s + len - 1) % m));
            } else {
                i += 1;
            }
        }
    }
    let current = Frame::capture(state.t, &state.profile, &state.curv);
    let floor = last_surgery.unwrap_or(0.0);
    let mut out = Vec::new();
    for (s, e) in runs {
        let len = if e >= s { e - s + 1 } else { e + m - s + 1 };
        let idx = |i: usize| (s + i) % m;
        let center = (0..len).map(idx).max_by(|&a, &b| state.curv.nodes[a].h.partial_cmp(&state.curv.nodes[b].h).unwrap()).unwrap();
        let h0 = state.curv.nodes[center].h;
        let r0 = (n as f64 - 1.0) / h0;
        let quality = neck_quality(state.history.frames.iter().chain(std::iter::once(&current)), &state.profile.nodes[center], state.t, r0, params.epsilon, n, floor)?;
        let surgery_free = last_surgery.map_or(true, |ts| state.t - ts >= params.theta_nd2 / (h0 * h0));
        out.push(NeckRegion { start: s, end: e, center, h_center: h0, r0, quality, surgery_free, covers_component: len == m });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyTag {
    Sphere,
    #[serde(rename = "S1xSnm1")]
    S1xSnm1,
}

pub fn classify_component(profile: &ProfileCurve) -> Result<TopologyTag, SurgeryError> {
    match profile.topology {
        Topology::OpenArc => {
            let last = profile.nodes.len() - 1;
            if profile.nodes[0][2] != 0.0 || profile.nodes[last][2] != 0.0 {
                return Err(SurgeryError::InvalidComponent("open arc with an endpoint off the axis".into()));
            }
            Ok(TopologyTag::Sphere)
        }
        Topology::ClosedLoop => {
            if profile.nodes.iter().any(|p| p[2] <= 0.0) {
                return Err(SurgeryError::InvalidComponent("closed loop meets the axis".into()));
            }
            Ok(TopologyTag::S1xSnm1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeryEvent {
    pub t: f64,
    pub component: usize,
    pub neck: NeckRegion,
    pub band: (f64, f64),
    pub cut: (usize, usize),
    pub attempts: usize,
    /// Why earlier attempts were rejected.
    pub rejected: Vec<String>,
    pub area_before: f64,
    pub area_after: f64,
    pub area_removed: f64,
    pub fplus_before: f64,
    pub fplus_after: f64,
    pub caps_fplus_zero: bool,
    /// min over cap nodes of -(strict margin)/K.
    pub cap_min_margin: f64,
    pub max_h2_after_over_k: f64,
    pub cap_bending: f64,
    pub created: Vec<TopologyTag>,
}

#[derive(Debug, Clone, Copy)]
struct CutJet {
    base: P3,
    axial: P3,
    r: f64,
    dr: f64,
    ddr: f64,
    spacing: f64,
}

/// Fermi frame at the axis foot of node j with X increasing toward node `toward`,
/// and a least-squares quadratic R(X) through the five nodes around j.
fn cut_jet(nodes: &[P3], j: usize, toward: &P3, rho: f64) -> CutJet {
    let p = nodes[j];
    let h = (p[0] * p[0] + p[1] * p[1]).sqrt();
    let base = [rho * p[0] / h, rho * p[1] / h, 0.0];
    let mut axial = [-p[1] / h, p[0] / h, 0.0];
    if log_axis(&base, &axial, toward, rho).0 < 0.0 {
        axial = [-axial[0], -axial[1], 0.0];
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for q in &nodes[j - 2..=j + 2] {
        let (x, r) = log_axis(&base, &axial, q, rho);
        let row = Vector3::new(1.0, x, x * x);
        ata += row * row.transpose();
        atb += row * r;
    }
    let c = ata.lu().solve(&atb).expect("distinct nodes");
    CutJet { base, axial, r: log_axis(&base, &axial, &p, rho).1, dr: c[1], ddr: 2.0 * c[2], spacing: dist(&nodes[j], &nodes[j + 1]) }
}

/// Cap nodes from the cut (excluded) to the axis tip (included).
fn cap_nodes(jet: &CutJet, tau: f64, rho: f64) -> Result<Vec<P3>, String> {
    let ell = tau * jet.r;
    let p0 = 2.0 * jet.dr * ell / jet.r;
    let q0 = 2.0 * ((jet.dr * ell).powi(2) + jet.r * jet.ddr * ell * ell) / (jet.r * jet.r);
    let a = -1.0 - p0 - 0.5 * q0;
    let b = -2.0 - p0 - q0;
    let c4 = b - 3.0 * a;
    let c3 = a - c4;
    let psi = |s: f64| 1.0 + p0 * s + 0.5 * q0 * s * s + c3 * s.powi(3) + c4 * s.powi(4);
    let dpsi = |s: f64| p0 + q0 * s + 3.0 * c3 * s * s + 4.0 * c4 * s.powi(3);
    let fine = 4000;
    let mut pts = Vec::with_capacity(fine + 1);
    for k in 0..=fine {
        let u = k as f64 / fine as f64;
        let s = 1.0 - (1.0 - u) * (1.0 - u);
        let v = if k == fine { 0.0 } else { psi(s) };
        if k > 0 && k < fine && !(v > 0.0 && dpsi(s) < 0.0) {
            return Err(format!("cap profile not monotone at s = {s:.4}"));
        }
        pts.push(exp_axis(&jet.base, &jet.axial, ell * s, jet.r * v.max(0.0).sqrt(), rho));
    }
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + dist(&w[0], &w[1]));
    }
    let total = *cum.last().unwrap();
    let count = (total / jet.spacing).round().max(2.0) as usize;
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    for i in 1..=count {
        let target = total * i as f64 / count as f64;
        if i == count {
            let mut tip = *pts.last().unwrap();
            tip[2] = 0.0;
            out.push(tip);
            break;
        }
        while cum[k + 1] < target {
            k += 1;
        }
        let f = (target - cum[k]) / (cum[k + 1] - cum[k]);
        let q = [0, 1, 2].map(|d| pts[k][d] + f * (pts[k + 1][d] - pts[k][d]));
        out.push(crate::profile::project(&q, rho));
    }
    Ok(out)
}

fn fplus_max(curv: &ProfileCurvatures, idx: impl Iterator<Item = usize>, n: usize, t: f64, params: &FlowParams, dc: &DerivedConstants) -> f64 {
    idx.map(|i| f_sigma_eta_hq(n, curv.nodes[i].h, curv.nodes[i].norm_a2, t, params, dc).f_plus).fold(0.0, f64::max)
}

/// Cuts the neck's middle third and glues two caps. Retries widen the cut by a tenth of
/// the neck on each side. Returns the new components in order along the profile.
pub fn perform_surgery(
    state: &FlowState,
    neck: &NeckRegion,
    sp: &SurgeryParams,
    fp: &FlowParams,
    dc: &DerivedConstants,
) -> Result<(Vec<ProfileCurve>, SurgeryEvent), SurgeryError> {
    let n = state.n;
    let kc = state.kc();
    let rho = state.rho();
    let (lo, hi) = sp.band(n);
    if !(neck.h_center >= lo && neck.h_center <= hi) {
        return Err(SurgeryError::Band { h: neck.h_center, lo, hi });
    }
    if neck.covers_component {
        return Err(SurgeryError::InvalidComponent("neck covers the whole component".into()));
    }
    let closed = state.profile.is_closed();
    let m = state.profile.nodes.len();
    // rotate loops so the neck interval starts at node 0
    let shift = if closed { neck.start } else { 0 };
    let nodes: Vec<P3> = (0..m).map(|i| state.profile.nodes[(i + shift) % m]).collect();
    let curv = if closed { profile_curvatures(&ProfileCurve { nodes: nodes.clone(), topology: Topology::ClosedLoop, rho }, n)? } else { state.curv.clone() };
    let (s, e) = if closed { (0, (neck.end + m - neck.start) % m) } else { (neck.start, neck.end) };
    let len = e - s;
    let area_before = area(&state.profile, n);
    let mut rejected: Vec<String> = Vec::new();
    for attempt in 0..=sp.max_retries {
        let widen = attempt * len / 10;
        let ja = (s + len / 3).saturating_sub(widen).max(s.max(2));
        let jb = (e - len / 3 + widen).min(e).min(m - 3);
        if jb < ja + 2 {
            rejected.push("neck too short to cut".into());
            break;
        }
        let ja_jet = cut_jet(&nodes, ja, &nodes[jb], rho);
        let jb_jet = cut_jet(&nodes, jb, &nodes[ja], rho);
        let (cap_a, cap_b) = match (cap_nodes(&ja_jet, sp.tau, rho), cap_nodes(&jb_jet, sp.tau, rho)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(r), _) | (_, Err(r)) => {
                rejected.push(r);
                continue;
            }
        };
        let mut pieces: Vec<(Vec<P3>, std::ops::Range<usize>)> = Vec::new();
        let rev_b: Vec<P3> = cap_b.iter().rev().cloned().collect();
        if closed {
            let mut v = rev_b.clone();
            v.extend_from_slice(&nodes[jb..]);
            v.extend_from_slice(&nodes[..=ja]);
            let start_cap = v.len();
            v.extend_from_slice(&cap_a);
            let r = start_cap..v.len();
            pieces.push((v, r));
        } else {
            let mut left = nodes[..=ja].to_vec();
            let start_cap = left.len();
            left.extend_from_slice(&cap_a);
            let r = start_cap..left.len();
            pieces.push((left, r));
            let mut right = rev_b.clone();
            right.extend_from_slice(&nodes[jb..]);
            pieces.push((right, 0..cap_b.len()));
        }
        let fplus_before = fplus_max(&curv, ja + 1..jb, n, state.t, fp, dc);
        let mut profiles = Vec::new();
        let mut fplus_after: f64 = 0.0;
        let mut cap_min_margin = f64::INFINITY;
        let mut max_h2: f64 = 0.0;
        let mut bending: f64 = 0.0;
        let mut area_after = 0.0;
        let mut failed = None;
        for (v, caps) in pieces {
            let prof = ProfileCurve::new(v, Topology::OpenArc, rho)?;
            if let Some((i, j)) = prof.self_intersection() {
                failed = Some(format!("cap crosses profile at segments {i}, {j}"));
                break;
            }
            let c = profile_curvatures(&prof, n)?;
            fplus_after = fplus_after.max(fplus_max(&c, caps.clone(), n, state.t, fp, dc));
            for i in caps.clone() {
                let nc = &c.nodes[i];
                cap_min_margin = cap_min_margin.min(-strict_margin_hq(n, nc.h, nc.norm_a2, kc) / kc);
                let rc = if caps.start == 0 { jb_jet.r } else { ja_jet.r };
                bending = bending.max(nc.kappa_prof.abs() * rc);
            }
            max_h2 = max_h2.max(c.max_h2());
            area_after += area(&prof, n);
            profiles.push(prof);
        }
        if let Some(r) = failed {
            rejected.push(r);
            continue;
        }
        let checks = [
            (fplus_after <= fplus_before, format!("f+ rose on modified region: {fplus_before:e} -> {fplus_after:e}")),
            (cap_min_margin > 0.0, format!("cap not strictly pinched: margin {cap_min_margin}")),
            (area_after < area_before, format!("area did not decrease: {area_before} -> {area_after}")),
            (max_h2 <= sp.theta2 * kc, format!("max H^2/K = {} exceeds Theta2", max_h2 / kc)),
            (bending <= sp.b_cap, format!("cap bending {bending} exceeds B")),
        ];
        if let Some((_, r)) = checks.iter().find(|c| !c.0) {
            rejected.push(r.clone());
            continue;
        }
        let created = profiles.iter().map(classify_component).collect::<Result<Vec<_>, _>>()?;
        let event = SurgeryEvent {
            t: state.t,
            component: 0,
            neck: neck.clone(),
            band: (lo, hi),
            cut: ((ja + shift) % m, (jb + shift) % m),
            attempts: attempt + 1,
            rejected,
            area_before,
            area_after,
            area_removed: area_before - area_after,
            fplus_before,
            fplus_after,
            caps_fplus_zero: fplus_after == 0.0,
            cap_min_margin,
            max_h2_after_over_k: max_h2 / kc,
            cap_bending: bending,
            created,
        };
        return Ok((profiles, event));
    }
    Err(SurgeryError::Retries { attempts: rejected.len(), reason: rejected.join("; ") })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discard {
    pub t: f64,
    pub component: usize,
    pub tag: TopologyTag,
    pub covered_by_neck: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyLedger {
    pub initial: usize,
    /// Components added by surgeries beyond the one they replace.
    pub splits: usize,
    pub discards: Vec<Discard>,
    pub live: usize,
    /// Surgeries that opened a loop plus discarded S^1 x S^(n-1) components.
    pub connected_sum: usize,
}

impl TopologyLedger {
    pub fn new(initial: usize) -> Self {
        Self { initial, splits: 0, discards: Vec::new(), live: initial, connected_sum: 0 }
    }

    pub fn record_surgery(&mut self, was_loop: bool, created: usize) {
        self.splits += created - 1;
        self.live += created - 1;
        if was_loop {
            self.connected_sum += 1;
        }
    }

    pub fn record_discard(&mut self, d: Discard) {
        if d.tag == TopologyTag::S1xSnm1 {
            self.connected_sum += 1;
        }
        self.live -= 1;
        self.discards.push(d);
    }

    pub fn reconciles(&self) -> bool {
        self.initial + self.splits == self.live + self.discards.len()
    }

    pub fn classification(&self, n: usize) -> String {
        match self.connected_sum {
            0 => format!("S^{n}"),
            1 => format!("S^1xS^{}", n - 1),
            k => format!("#{k}(S^1xS^{})", n - 1),
        }
    }
}
