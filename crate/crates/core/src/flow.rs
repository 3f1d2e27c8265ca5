//! Explicit Heun stepping of the profile curve under mean curvature flow.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

use crate::curvature::{laplacian, profile_curvatures, CurvatureError, ProfileCurvatures};
use crate::profile::{area, project, regrid, ProfileCurve, P3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("CFL violated: dt = {dt:e} exceeds {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("non-finite state at t = {t}, node {node}: {dump}")]
    NonFinite { t: f64, node: usize, dump: String },
    #[error("profile crossed the axis at node {0}")]
    AxisCrossing(usize),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error("need at least {need} history frames, have {have}")]
    History { need: usize, have: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameNode {
    pub p: P3,
    pub xi: f64,
    pub h: f64,
    pub lambda_rot: f64,
    pub kappa: f64,
    pub grad_a2: f64,
    pub hess_a2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub nodes: Vec<FrameNode>,
}

impl Frame {
    pub fn capture(t: f64, profile: &ProfileCurve, curv: &ProfileCurvatures) -> Self {
        let nodes = profile
            .nodes
            .iter()
            .zip(&curv.nodes)
            .zip(&curv.xi)
            .map(|((p, c), xi)| FrameNode {
                p: *p,
                xi: *xi,
                h: c.h,
                lambda_rot: c.lambda_rot,
                kappa: c.kappa_prof,
                grad_a2: c.grad_a2,
                hess_a2: c.hess_a2,
            })
            .collect();
        Frame { t, nodes }
    }
}

/// Thinned record of past curvature data; when full, every other frame is dropped
/// and the stride doubles, so the whole run stays covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub frames: VecDeque<Frame>,
    pub stride: u64,
    pub cap: usize,
}

impl History {
    pub fn new(stride: u64, cap: usize) -> Self {
        Self { frames: VecDeque::new(), stride: stride.max(1), cap: cap.max(4) }
    }

    pub fn record(&mut self, t: f64, profile: &ProfileCurve, curv: &ProfileCurvatures) {
        if let Some(last) = self.frames.back() {
            if t <= last.t {
                return;
            }
        }
        self.frames.push_back(Frame::capture(t, profile, curv));
        if self.frames.len() > self.cap {
            let kept: VecDeque<Frame> = self
                .frames
                .drain(..)
                .enumerate()
                .filter(|(i, _)| i % 2 == 0)
                .map(|(_, f)| f)
                .collect();
            self.frames = kept;
            self.stride *= 2;
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn earliest(&self) -> Option<f64> {
        self.frames.front().map(|f| f.t)
    }
}

/// H and |A|^2 per node before the latest step, for time derivatives along normal paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviousStep {
    pub t: f64,
    pub h: Vec<f64>,
    pub norm_a2: Vec<f64>,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub profile: ProfileCurve,
    pub t: f64,
    pub n: usize,
    pub h_min: f64,
    pub steps: u64,
    pub history: History,
    pub curv: ProfileCurvatures,
    pub previous: Option<PreviousStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdeStepControl {
    /// dt = dt_factor * h^2 with h the smallest segment.
    pub dt_factor: f64,
    /// Hard limit: dt <= c_cfl * h^2.
    pub c_cfl: f64,
    pub history_stride: u64,
    pub history_cap: usize,
}

impl Default for PdeStepControl {
    fn default() -> Self {
        Self { dt_factor: 0.1, c_cfl: 0.2, history_stride: 20, history_cap: 256 }
    }
}

impl FlowState {
    pub fn new(profile: ProfileCurve, n: usize, ctl: &PdeStepControl) -> Result<Self, FlowError> {
        let segs = profile.segments();
        let h_min = profile.arclength() / segs.len() as f64;
        Self::with_spacing(profile, n, 0.0, h_min, History::new(ctl.history_stride, ctl.history_cap))
    }

    pub fn with_spacing(profile: ProfileCurve, n: usize, t: f64, h_min: f64, mut history: History) -> Result<Self, FlowError> {
        let curv = profile_curvatures(&profile, n)?;
        history.record(t, &profile, &curv);
        Ok(Self { profile, t, n, h_min, steps: 0, history, curv, previous: None })
    }

    pub fn rho(&self) -> f64 {
        self.profile.rho
    }

    pub fn kc(&self) -> f64 {
        1.0 / (self.profile.rho * self.profile.rho)
    }

    pub fn area(&self) -> f64 {
        area(&self.profile, self.n)
    }

    pub fn stable_dt(&self, ctl: &PdeStepControl) -> f64 {
        let h = self.profile.min_spacing();
        ctl.dt_factor.min(ctl.c_cfl) * h * h
    }

    pub fn needs_regrid(&self) -> bool {
        let segs = self.profile.segments();
        let mean = self.profile.arclength() / segs.len() as f64;
        self.profile.spacing_ratio() > 1.5 || mean < self.h_min * (1.0 - 1e-9) || mean > 2.0 * self.h_min
    }

    pub fn regrid(&mut self) -> Result<(), FlowError> {
        self.profile = regrid(&self.profile, self.h_min, None);
        self.curv = profile_curvatures(&self.profile, self.n)?;
        self.previous = None;
        Ok(())
    }
}

fn velocity(profile: &ProfileCurve, curv: &ProfileCurvatures) -> Vec<P3> {
    curv.frames
        .iter()
        .zip(&curv.nodes)
        .map(|(f, c)| [-c.h * f.normal[0], -c.h * f.normal[1], -c.h * f.normal[2]])
        .take(profile.nodes.len())
        .collect()
}

fn advance(profile: &ProfileCurve, v: &[P3], dt: f64, t: f64) -> Result<ProfileCurve, FlowError> {
    let m = profile.nodes.len();
    let closed = profile.is_closed();
    let mut nodes = Vec::with_capacity(m);
    for (i, (p, vi)) in profile.nodes.iter().zip(v).enumerate() {
        let mut q = project(&[p[0] + dt * vi[0], p[1] + dt * vi[1], p[2] + dt * vi[2]], profile.rho);
        if !q.iter().all(|c| c.is_finite()) {
            let dump = format!("p = {p:?}, v = {vi:?}, dt = {dt:e}");
            return Err(FlowError::NonFinite { t, node: i, dump });
        }
        if !closed && (i == 0 || i == m - 1) {
            q[2] = 0.0;
            q = project(&q, profile.rho);
        } else if q[2] <= 0.0 {
            return Err(FlowError::AxisCrossing(i));
        }
        nodes.push(q);
    }
    Ok(ProfileCurve { nodes, topology: profile.topology, rho: profile.rho })
}

/// One Heun step of length dt; nodes move along -H nu and are projected back to the orbit sphere.
pub fn mcf_step(state: &mut FlowState, dt: f64, ctl: &PdeStepControl) -> Result<(), FlowError> {
    let h = state.profile.min_spacing();
    let limit = ctl.c_cfl * h * h;
    if dt > limit {
        return Err(FlowError::Cfl { dt, limit });
    }
    let v0 = velocity(&state.profile, &state.curv);
    let pred = advance(&state.profile, &v0, dt, state.t)?;
    let c1 = profile_curvatures(&pred, state.n)?;
    let v1 = velocity(&pred, &c1);
    let vm: Vec<P3> = v0
        .iter()
        .zip(&v1)
        .map(|(a, b)| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])])
        .collect();
    let next = advance(&state.profile, &vm, dt, state.t)?;
    let curv = profile_curvatures(&next, state.n)?;
    if let Some(i) = curv.nodes.iter().position(|c| !(c.h.is_finite() && c.grad_a2.is_finite() && c.hess_a2.is_finite())) {
        let dump = format!("node {:?} curvature {:?}", next.nodes[i], curv.nodes[i]);
        return Err(FlowError::NonFinite { t: state.t + dt, node: i, dump });
    }
    state.previous = Some(PreviousStep {
        t: state.t,
        h: state.curv.nodes.iter().map(|c| c.h).collect(),
        norm_a2: state.curv.nodes.iter().map(|c| c.norm_a2).collect(),
        area: state.area(),
    });
    state.profile = next;
    state.curv = curv;
    state.t += dt;
    state.steps += 1;
    if state.steps % state.history.stride == 0 {
        state.history.record(state.t, &state.profile, &state.curv);
    }
    Ok(())
}

/// Residuals of the H and |A|^2 evolution equations between the previous and current step,
/// with right-hand sides averaged over the two time levels. Relative to the largest term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResidual {
    pub t: f64,
    pub h_residual: f64,
    pub a2_residual: f64,
}

pub fn step_evolution_residual(state: &FlowState, prev_lap: (&[f64], &[f64]), prev_grad_a2: &[f64]) -> Result<EvolutionResidual, FlowError> {
    let prev = state.previous.as_ref().ok_or(FlowError::History { need: 2, have: 1 })?;
    let n = state.n as f64;
    let kc = state.kc();
    let hs: Vec<f64> = state.curv.nodes.iter().map(|c| c.h).collect();
    let a2s: Vec<f64> = state.curv.nodes.iter().map(|c| c.norm_a2).collect();
    let lap_h = laplacian(&hs, &state.profile, &state.curv.frames, state.n);
    let lap_a2 = laplacian(&a2s, &state.profile, &state.curv.frames, state.n);
    let dt = state.t - prev.t;
    let (mut rh, mut ra, mut sh, mut sa) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..hs.len() {
        let rhs_h = |h: f64, a2: f64, lap: f64| lap + (a2 + n * kc) * h;
        let rhs_a = |h: f64, a2: f64, lap: f64, g: f64| lap - 2.0 * g + 2.0 * a2 * (a2 + n * kc) - 4.0 * n * kc * (a2 - h * h / n);
        let dh = (hs[i] - prev.h[i]) / dt;
        let da = (a2s[i] - prev.norm_a2[i]) / dt;
        let fh = 0.5 * (rhs_h(hs[i], a2s[i], lap_h[i]) + rhs_h(prev.h[i], prev.norm_a2[i], prev_lap.0[i]));
        let fa = 0.5
            * (rhs_a(hs[i], a2s[i], lap_a2[i], state.curv.nodes[i].grad_a2)
                + rhs_a(prev.h[i], prev.norm_a2[i], prev_lap.1[i], prev_grad_a2[i]));
        rh = rh.max((dh - fh).abs());
        ra = ra.max((da - fa).abs());
        sh = sh.max(dh.abs().max(fh.abs()));
        sa = sa.max(da.abs().max(fa.abs()));
    }
    let rel = |r: f64, s: f64| if s > 0.0 { r / s } else { r };
    Ok(EvolutionResidual { t: state.t, h_residual: rel(rh, sh), a2_residual: rel(ra, sa) })
}

/// Laplacians of H and |A|^2 and |grad A|^2 at the current state, for a later residual.
pub fn residual_inputs(state: &FlowState) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hs: Vec<f64> = state.curv.nodes.iter().map(|c| c.h).collect();
    let a2s: Vec<f64> = state.curv.nodes.iter().map(|c| c.norm_a2).collect();
    (
        laplacian(&hs, &state.profile, &state.curv.frames, state.n),
        laplacian(&a2s, &state.profile, &state.curv.frames, state.n),
        state.curv.nodes.iter().map(|c| c.grad_a2).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{flow_product_sphere, geodesic_sphere_closed_form, geodesic_sphere_extinction_time, ProductSphereState, StepControl};
    use crate::profile::{equator, geodesic_sphere, tube};
    use std::f64::consts::FRAC_PI_3;

    fn run_to(state: &mut FlowState, t_end: f64, ctl: &PdeStepControl) {
        while state.t < t_end {
            if state.needs_regrid() {
                state.regrid().unwrap();
            }
            let dt = state.stable_dt(ctl).min(t_end - state.t);
            mcf_step(state, dt, ctl).unwrap();
        }
    }

    fn mean_angle_from_pole(p: &ProfileCurve) -> f64 {
        let s: f64 = p.nodes.iter().map(|q| (q[0] / p.rho).clamp(-1.0, 1.0).acos()).sum();
        s / p.nodes.len() as f64 * p.rho
    }

    #[test]
    fn shrinking_sphere_short_run() {
        let ctl = PdeStepControl::default();
        let mut st = FlowState::new(geodesic_sphere(FRAC_PI_3, 101, 1.0).unwrap(), 4, &ctl).unwrap();
        let te = geodesic_sphere_extinction_time(FRAC_PI_3, 4, 1.0);
        run_to(&mut st, 0.5 * te, &ctl);
        let d = mean_angle_from_pole(&st.profile);
        let exact = geodesic_sphere_closed_form(FRAC_PI_3, st.t, 4, 1.0).unwrap();
        assert!((d.cos() - exact.cos()).abs() < 1e-3 * exact.cos(), "{d} {exact}");
    }

    #[test]
    fn equator_is_stationary() {
        let ctl = PdeStepControl::default();
        let e = equator(81, 1.0).unwrap();
        let mut st = FlowState::new(e.clone(), 4, &ctl).unwrap();
        run_to(&mut st, 0.05, &ctl);
        for (a, b) in st.profile.nodes.iter().zip(&e.nodes) {
            assert!(crate::profile::dist(a, b) < 1e-8 * 0.05);
        }
    }

    #[test]
    fn tube_follows_ode() {
        let ctl = PdeStepControl::default();
        let u0 = 0.5;
        let mut st = FlowState::new(tube(u0, 120, 1.0).unwrap(), 4, &ctl).unwrap();
        run_to(&mut st, 0.02, &ctl);
        let tr = flow_product_sphere(&ProductSphereState::new(4, 1, u0).unwrap(), 0.02, 1.0, &StepControl::default()).unwrap();
        let u_ode = tr.states.last().unwrap().u;
        let u_pde = (st.profile.nodes[0][2] / st.rho()).asin();
        assert!((u_pde - u_ode).abs() < 1e-3 * u_ode, "{u_pde} {u_ode}");
    }

    #[test]
    fn history_thins() {
        let ctl = PdeStepControl { history_stride: 1, history_cap: 8, ..Default::default() };
        let mut st = FlowState::new(geodesic_sphere(1.0, 41, 1.0).unwrap(), 4, &ctl).unwrap();
        for _ in 0..40 {
            let dt = st.stable_dt(&ctl);
            mcf_step(&mut st, dt, &ctl).unwrap();
        }
        assert!(st.history.len() <= 8);
        assert!(st.history.frames.iter().zip(st.history.frames.iter().skip(1)).all(|(a, b)| a.t < b.t));
        assert_eq!(st.history.earliest(), Some(0.0));
        let bad = st.stable_dt(&ctl) * 10.0;
        assert!(matches!(mcf_step(&mut st, bad, &ctl), Err(FlowError::Cfl { .. })));
    }
}
