//! The surgically modified flow: evolve, stop at Theta3, cut necks, discard
//! recognized components, and classify.

use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

use crate::config::{RunConfig, Scenario};
use crate::estimates::{
    bernstein_check, c_sharp, chord_over_f, comparability_scan, cylindrical_estimate_check, fplus_monotone_check, g_constant_demand,
    gradient_hessian_ratios, interior_constants, non_divergence_check, noncollapse_check, pointwise_summary, CheckResult, GConstants,
};
use crate::exact::{flow_product_sphere, product_sphere_curvatures, ProductSphereState, StepControl};
use crate::flow::{mcf_step, FlowError, FlowState, History};
use crate::geometry::{f_sigma_eta, mean_curvature, quadratic_margin, second_form_norm_sq, strict_margin, DerivedConstants};
use crate::inscribed::inscribed_exscribed;
use crate::profile::unit_sphere_volume;
use crate::surgery::{classify_component, detect_necks, perform_surgery, Discard, SurgeryEvent, SurgeryParams, TopologyLedger, TopologyTag};

/// max |A|^2/K below which a component counts as totally geodesic.
pub const MINIMAL_TOL: f64 = 1e-3;
/// Orbit radius (units of 1/sqrt(K)) below which a pinch without an actionable neck stops the run.
pub const PINCH_Z: f64 = 1e-3;
/// Duration (units of 1/K) of the long-time branch.
pub const LONG_TIME: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    TerminatedByClassification,
    ConvergedToMinimal,
    UnresolvedSingularity,
    BudgetExhausted,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("initial data not in the surgery class: {}", .0.join("; "))]
    NotInClass(Vec<String>),
}

/// One monitor sample; every field is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// K t
    pub t: f64,
    pub max_h2_over_k: f64,
    pub min_margin_strict: f64,
    pub max_q_alpha: f64,
    pub max_cyl_deficit_ratio: f64,
    pub max_grad_a_ratio: f64,
    pub max_hess_a_ratio: f64,
    pub g_ratio: f64,
    /// NaN where chord curvatures are not monitored.
    pub max_kbar_over_f: f64,
    pub min_kunder_over_f: f64,
    pub area_times_kpow: f64,
    /// max f_+ divided by K^sigma.
    pub fplus_max: f64,
    pub kato_min: f64,
    pub max_a2_over_k: f64,
    /// t |grad A|^2 / K and t^2 |grad^2 A|^2 / K.
    pub bernstein1: f64,
    pub bernstein2: f64,
    pub components: usize,
    pub era: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCheck {
    pub max_q_alpha_over_k: f64,
    pub area_over_v: f64,
    pub max_h2_over_k: f64,
    pub bound_over_k: f64,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub big_lambda0: f64,
    pub lambda0: f64,
    pub noncollapse_c: f64,
    pub noncollapse_mu: Option<f64>,
    pub c_sharp: f64,
    pub comparability_worst: f64,
    pub comparability_checked: usize,
    pub g_constants: GConstants,
    pub kato_min: f64,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub status: RunStatus,
    pub classification: Option<String>,
    pub initial_class: ClassCheck,
    pub events: Vec<SurgeryEvent>,
    pub post_surgery_class: Vec<ClassCheck>,
    pub ledger: TopologyLedger,
    pub estimates: EstimateReport,
    pub surgery_bound: Option<f64>,
    pub diagnostics: Vec<String>,
    pub invariant_violations: Vec<String>,
    pub steps: u64,
    pub t_final_k: f64,
    #[serde(skip)]
    pub series: Vec<Sample>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

struct Component {
    id: usize,
    state: FlowState,
    last_surgery: Option<f64>,
    covered: bool,
}

struct Monitor {
    samples: Vec<Sample>,
    g: GConstants,
    c_sharp: f64,
    h_sharp: f64,
    chord_failures: Vec<String>,
}

impl Monitor {
    fn new(h_sharp: f64) -> Self {
        Self { samples: Vec::new(), g: GConstants { c_beta: 1.0, c_0: 1.0 }, c_sharp: 0.0, h_sharp, chord_failures: Vec::new() }
    }

    fn sample(&mut self, cfg: &RunConfig, dc: &DerivedConstants, comps: &[Component], t: f64, era: u32) {
        let fp = &cfg.flow;
        let kc = fp.k;
        let curvs: Vec<_> = comps.iter().map(|c| &c.state.curv).collect();
        let pw = pointwise_summary(&curvs, fp, dc, t);
        let mut grad = (0.0f64, 0.0f64, 0.0f64);
        for c in &curvs {
            let d = g_constant_demand(c, fp.n, kc, t, dc);
            self.g.c_beta = self.g.c_beta.max(d.c_beta + 1.0);
            self.g.c_0 = self.g.c_0.max(d.c_0 + 1.0);
        }
        for c in &curvs {
            let r = gradient_hessian_ratios(c, fp.n, kc, t, dc, &self.g);
            grad = (grad.0.max(r.grad), grad.1.max(r.hess), grad.2.max(r.g_ratio));
            self.c_sharp = self.c_sharp.max(c_sharp(c, self.h_sharp, kc));
        }
        let (mut hi, mut lo) = (f64::NAN, f64::NAN);
        if cfg.monitors.chords && !comps.is_empty() {
            let (mut h, mut l) = (f64::NEG_INFINITY, f64::INFINITY);
            for c in comps {
                match inscribed_exscribed(&c.state.profile, &c.state.curv) {
                    Ok(ch) => match chord_over_f(&c.state.curv, &ch, fp.n, kc) {
                        Some((a, b)) => {
                            h = h.max(a);
                            l = l.min(b);
                        }
                        None => self.chord_failures.push(format!("F undefined (not strictly pinched) at Kt = {}", t * kc)),
                    },
                    Err(e) => self.chord_failures.push(format!("Kt = {}: {e}", t * kc)),
                }
            }
            if h.is_finite() {
                hi = h;
                lo = l;
            }
        }
        let area: f64 = comps.iter().map(|c| c.state.area()).sum();
        self.samples.push(Sample {
            t: t * kc,
            max_h2_over_k: pw.max_h2 / kc,
            min_margin_strict: pw.min_margin_strict,
            max_q_alpha: pw.max_q_alpha,
            max_cyl_deficit_ratio: pw.max_cyl_ratio,
            max_grad_a_ratio: grad.0,
            max_hess_a_ratio: grad.1,
            g_ratio: grad.2,
            max_kbar_over_f: hi,
            min_kunder_over_f: lo,
            area_times_kpow: area * kc.powf(fp.n as f64 / 2.0),
            fplus_max: pw.fplus_max / kc.powf(fp.sigma),
            kato_min: pw.kato,
            max_a2_over_k: pw.max_a2 / kc,
            bernstein1: t * pw.max_grad_a2 / kc,
            bernstein2: t * t * pw.max_hess_a2 / kc,
            components: comps.len(),
            era,
        });
    }
}

fn class_check(cfg: &RunConfig, comps: &[&FlowState], bound: f64) -> ClassCheck {
    let fp = &cfg.flow;
    let kc = fp.k;
    let mut q: f64 = f64::NEG_INFINITY;
    let mut h2: f64 = 0.0;
    let mut area = 0.0;
    for s in comps {
        for c in &s.curv.nodes {
            q = q.max(crate::geometry::quadratic_margin_hq(fp.n, c.h, c.norm_a2, kc, fp.alpha) / kc);
        }
        h2 = h2.max(s.curv.max_h2() / kc);
        area += s.area();
    }
    let area_over_v = area * kc.powf(fp.n as f64 / 2.0) / fp.v;
    let mut violations = Vec::new();
    if !(q < 0.0) {
        violations.push(format!("pinching margin: max Q_alpha/K = {q}"));
    }
    if area_over_v > 1.0 {
        violations.push(format!("area bound: area K^(n/2)/V = {area_over_v}"));
    }
    if h2 > bound {
        violations.push(format!("curvature bound: max H^2/K = {h2} > {bound}"));
    }
    ClassCheck { max_q_alpha_over_k: q, area_over_v, max_h2_over_k: h2, bound_over_k: bound, violations }
}

/// An interior local minimum of the orbit radius below PINCH_Z; nodes next to the axis
/// are excluded since z vanishes there by construction.
pub fn pinch_node(p: &crate::profile::ProfileCurve) -> Option<usize> {
    let m = p.nodes.len();
    let z = |i: usize| p.nodes[i % m][2];
    let range = if p.is_closed() { 0..m } else { 2..m.saturating_sub(2) };
    range.into_iter().find(|&i| {
        let (a, b) = ((i + m - 1) % m, i + 1);
        z(i) < PINCH_Z * p.rho && z(i) <= z(a) && z(i) <= z(b)
    })
}

/// Termination per the classification definition: evaluated at stops, every live
/// component must carry a certain tag; an empty set has terminated.
pub fn termination_check(live: &[&crate::profile::ProfileCurve], at_stop: bool) -> Option<RunStatus> {
    if live.is_empty() {
        return Some(RunStatus::TerminatedByClassification);
    }
    if at_stop && live.iter().all(|p| classify_component(p).is_ok()) {
        return Some(RunStatus::TerminatedByClassification);
    }
    None
}

fn finish_estimates(cfg: &RunConfig, dc: &DerivedConstants, mon: &Monitor, histories: &[History], report: &mut RunReport) {
    let fp = &cfg.flow;
    let kc = fp.k;
    let s = &mon.samples;
    let (big, small) = interior_constants(fp.n, fp.alpha, fp.theta);
    let era_series = |f: &dyn Fn(&Sample) -> f64| s.iter().map(|x| (x.t, f(x), x.era)).collect::<Vec<_>>();
    let mut checks = vec![
        cylindrical_estimate_check(&era_series(&|x| x.max_cyl_deficit_ratio)),
        fplus_monotone_check(&era_series(&|x| x.fplus_max), 0.01),
    ];
    let deriv: Vec<_> = s.iter().map(|x| (x.t, x.bernstein1 / x.t.max(f64::MIN_POSITIVE), x.bernstein2 / (x.t * x.t).max(f64::MIN_POSITIVE))).collect();
    checks.extend(bernstein_check(&deriv, small, 1.0));
    let grad: Vec<_> = s.iter().map(|x| (x.t, x.max_grad_a_ratio)).collect();
    let hess: Vec<_> = s.iter().map(|x| (x.t, x.max_hess_a_ratio)).collect();
    let gr: Vec<_> = s.iter().map(|x| (x.t, x.g_ratio)).collect();
    checks.push(non_divergence_check("gradient_ratio", &grad, small));
    checks.push(non_divergence_check("hessian_ratio", &hess, small));
    let mut g = non_divergence_check("g_ratio", &gr, small);
    g.violated = g.violated || !s.iter().all(|x| x.g_ratio.is_finite() && x.g_ratio >= 0.0);
    checks.push(g);
    let pinch = s.iter().find(|x| !(x.max_q_alpha < 0.0));
    checks.push(CheckResult {
        name: "pinching_preserved".into(),
        sup: s.iter().map(|x| x.max_q_alpha).fold(f64::NEG_INFINITY, f64::max),
        t_sup: 0.0,
        fitted: None,
        violated: pinch.is_some(),
        detail: pinch.map_or("max Q_alpha/K < 0 at every sample".into(), |x| format!("Q_alpha/K = {} at Kt = {}", x.max_q_alpha, x.t)),
    });
    let kato_min = s.iter().map(|x| x.kato_min).fold(f64::INFINITY, f64::min);
    checks.push(CheckResult {
        name: "kato".into(),
        sup: kato_min,
        t_sup: 0.0,
        fitted: None,
        violated: kato_min < 1.0 - 1e-6,
        detail: "min over nodes of |grad A|^2 / (3/(n+2) |grad H|^2)".into(),
    });
    let chords: Vec<_> = s.iter().filter(|x| x.max_kbar_over_f.is_finite()).map(|x| (x.t, x.max_kbar_over_f, x.min_kunder_over_f)).collect();
    let mut mu = None;
    if let Some(first) = chords.first() {
        let m = dc.c_noncollapse.max(first.1).max(-first.2);
        mu = Some(m);
        let mut c = noncollapse_check(&chords, dc.c_noncollapse, m, 1.0, 0.05);
        if !mon.chord_failures.is_empty() {
            c.violated = true;
            c.detail = format!("{}; {}", c.detail, mon.chord_failures.join("; "));
        }
        checks.push(c);
    }
    let (mut worst, mut checked) = (1.0f64, 0usize);
    if cfg.monitors.comparability {
        for h in histories {
            let (w, c) = comparability_scan(h, mon.c_sharp, mon.h_sharp, kc);
            worst = worst.max(w);
            checked += c;
        }
        checks.push(CheckResult {
            name: "comparability".into(),
            sup: worst,
            t_sup: 0.0,
            fitted: Some(mon.c_sharp),
            violated: worst > 10.0,
            detail: format!("{checked} centers with H >= h_sharp sqrt(K)"),
        });
    }
    for c in &checks {
        if c.violated {
            report.invariant_violations.push(format!("{}: {}", c.name, c.detail));
        }
    }
    report.estimates = EstimateReport {
        big_lambda0: big,
        lambda0: small,
        noncollapse_c: dc.c_noncollapse,
        noncollapse_mu: mu,
        c_sharp: mon.c_sharp,
        comparability_worst: worst,
        comparability_checked: checked,
        g_constants: mon.g,
        kato_min,
        checks,
    };
}

fn empty_report(cfg: &RunConfig, initial_class: ClassCheck) -> RunReport {
    RunReport {
        config: cfg.clone(),
        status: RunStatus::BudgetExhausted,
        classification: None,
        initial_class,
        events: Vec::new(),
        post_surgery_class: Vec::new(),
        ledger: TopologyLedger::new(1),
        estimates: EstimateReport {
            big_lambda0: 0.0,
            lambda0: 0.0,
            noncollapse_c: 0.0,
            noncollapse_mu: None,
            c_sharp: 0.0,
            comparability_worst: 1.0,
            comparability_checked: 0,
            g_constants: GConstants { c_beta: 0.0, c_0: 0.0 },
            kato_min: f64::INFINITY,
            checks: Vec::new(),
        },
        surgery_bound: None,
        diagnostics: Vec::new(),
        invariant_violations: Vec::new(),
        steps: 0,
        t_final_k: 0.0,
        series: Vec::new(),
        wall_clock: Duration::ZERO,
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(RunError::Config(v.join("; ")));
    }
    let dc = cfg.flow.validate().map_err(|e| RunError::Config(e.to_string()))?;
    match cfg.scenario {
        Scenario::ProductSphere { k, u0 } => run_product_sphere(cfg, &dc, k, u0),
        _ => run_profile(cfg, &dc),
    }
}

fn run_profile(cfg: &RunConfig, dc: &DerivedConstants) -> Result<RunReport, RunError> {
    let clock = Instant::now();
    let fp = cfg.flow;
    let (n, kc) = (fp.n, fp.k);
    let sp = cfg.surgery_params();
    let profile = cfg.initial_profile().map_err(|e| RunError::Config(e.to_string()))?;
    let first = FlowState::new(profile, n, &cfg.step).map_err(|e| RunError::Config(e.to_string()))?;
    let initial_class = class_check(cfg, &[&first], fp.theta);
    if !initial_class.violations.is_empty() {
        return Err(RunError::NotInClass(initial_class.violations));
    }
    let mut report = empty_report(cfg, initial_class);
    let area0 = first.area();
    let mut comps = vec![Component { id: 0, state: first, last_surgery: None, covered: false }];
    let mut next_id = 1;
    let mut mon = Monitor::new(sp.h_sharp);
    let mut archived: Vec<History> = Vec::new();
    let mut era = 0u32;
    let mut t = 0.0;
    let mut steps = 0u64;
    let t_max = cfg.t_max();
    let mut calm_since = Some(0.0);
    mon.sample(cfg, dc, &comps, t, era);
    let status = 'outer: loop {
        if comps.is_empty() {
            break RunStatus::TerminatedByClassification;
        }
        if t >= t_max * (1.0 - 1e-12) || steps >= cfg.max_steps {
            break RunStatus::BudgetExhausted;
        }
        for c in comps.iter_mut() {
            if c.state.needs_regrid() {
                if let Err(e) = c.state.regrid() {
                    report.diagnostics.push(format!("regrid of component {}: {e}", c.id));
                    break 'outer RunStatus::UnresolvedSingularity;
                }
                if let Some((i, j)) = c.state.profile.self_intersection() {
                    report.invariant_violations.push(format!("component {} self-intersects (segments {i}, {j}) at Kt = {}", c.id, t * kc));
                    break 'outer RunStatus::UnresolvedSingularity;
                }
            }
        }
        let mut dt = comps.iter().map(|c| c.state.stable_dt(&cfg.step)).fold(f64::INFINITY, f64::min);
        if t + dt > t_max {
            dt = t_max - t;
        }
        for c in comps.iter_mut() {
            if let Err(e) = mcf_step(&mut c.state, dt, &cfg.step) {
                report.diagnostics.push(format!("component {} at Kt = {}: {e}", c.id, t * kc));
                let fatal = matches!(e, FlowError::Cfl { .. });
                if fatal {
                    report.invariant_violations.push(e.to_string());
                }
                break 'outer RunStatus::UnresolvedSingularity;
            }
        }
        t = comps[0].state.t;
        steps += 1;
        if steps % cfg.monitors.sample_stride == 0 {
            mon.sample(cfg, dc, &comps, t, era);
        }
        let max_h2 = comps.iter().map(|c| c.state.curv.max_h2()).fold(0.0, f64::max);
        let pinched = |c: &Component| pinch_node(&c.state.profile).is_some();
        if max_h2 >= sp.theta3 * kc || comps.iter().any(pinched) {
            if mon.samples.last().map(|s| s.t) != Some(t * kc) {
                mon.sample(cfg, dc, &comps, t, era);
            }
            let mut replaced: Vec<Component> = Vec::new();
            for mut c in std::mem::take(&mut comps) {
                let necks = match detect_necks(&c.state, &sp, c.last_surgery) {
                    Ok(x) => x,
                    Err(e) => {
                        report.diagnostics.push(format!("neck detection on component {}: {e}", c.id));
                        Vec::new()
                    }
                };
                if necks.iter().any(|nk| nk.covers_component) {
                    c.covered = true;
                }
                let candidate = necks
                    .iter()
                    .filter(|nk| !nk.covers_component && nk.h_center * nk.h_center >= sp.theta1 * kc)
                    .filter(|nk| nk.surgery_free && (nk.quality.accepted || !sp.quality_gate))
                    .max_by(|a, b| a.h_center.partial_cmp(&b.h_center).unwrap());
                let Some(neck) = candidate else {
                    replaced.push(c);
                    continue;
                };
                match perform_surgery(&c.state, neck, &sp, &fp, dc) {
                    Ok((pieces, mut ev)) => {
                        ev.component = c.id;
                        report.ledger.record_surgery(c.state.profile.is_closed(), pieces.len());
                        archived.push(c.state.history.clone());
                        for p in pieces {
                            let hist = History::new(cfg.step.history_stride, cfg.step.history_cap);
                            match FlowState::with_spacing(p, n, t, c.state.h_min, hist) {
                                Ok(s) => {
                                    replaced.push(Component { id: next_id, state: s, last_surgery: Some(t), covered: false });
                                    next_id += 1;
                                }
                                Err(e) => {
                                    report.diagnostics.push(format!("post-surgery state: {e}"));
                                    break 'outer RunStatus::UnresolvedSingularity;
                                }
                            }
                        }
                        report.events.push(ev);
                    }
                    Err(e) => {
                        report.diagnostics.push(format!("surgery on component {} at Kt = {}: {e}", c.id, t * kc));
                        replaced.push(c);
                    }
                }
            }
            if !report.events.is_empty() && report.events.last().unwrap().t == t {
                era += 1;
                let live: Vec<&FlowState> = replaced.iter().map(|c| &c.state).collect();
                let cc = class_check(cfg, &live, sp.theta2);
                report.invariant_violations.extend(cc.violations.iter().map(|v| format!("post-surgery class at Kt = {}: {v}", t * kc)));
                report.post_surgery_class.push(cc);
            }
            for c in replaced {
                let covered = c.covered;
                let hot = c.state.curv.max_h2() >= sp.theta1 * kc;
                match classify_component(&c.state.profile) {
                    Ok(tag) if covered || hot => {
                        archived.push(c.state.history.clone());
                        report.ledger.record_discard(Discard { t, component: c.id, tag, covered_by_neck: covered });
                    }
                    _ => comps.push(c),
                }
            }
            mon.sample(cfg, dc, &comps, t, era);
            let live: Vec<_> = comps.iter().map(|c| &c.state.profile).collect();
            if let Some(st) = termination_check(&live, true) {
                break st;
            }
            if comps.iter().any(|c| c.state.curv.max_h2() >= sp.theta3 * kc || pinched(c)) {
                report.diagnostics.push(format!("curvature above Theta3 or a pinch without an actionable neck at Kt = {}", t * kc));
                break RunStatus::UnresolvedSingularity;
            }
        }
        // long-time branch
        let max_h2 = comps.iter().map(|c| c.state.curv.max_h2()).fold(0.0, f64::max);
        if max_h2 >= sp.theta1 * kc {
            calm_since = None;
        } else if calm_since.is_none() {
            calm_since = Some(t);
        }
        if steps % cfg.monitors.sample_stride == 0 {
            let a2 = comps.iter().map(|c| c.state.curv.max_a2()).fold(0.0, f64::max);
            if let Some(t0) = calm_since {
                if (t - t0) * kc >= LONG_TIME && a2 / kc <= MINIMAL_TOL {
                    break RunStatus::ConvergedToMinimal;
                }
            }
        }
    };
    if mon.samples.last().map(|s| s.t) != Some(t * kc) {
        mon.sample(cfg, dc, &comps, t, era);
    }
    report.status = status;
    report.steps = steps;
    report.t_final_k = t * kc;
    if status == RunStatus::TerminatedByClassification {
        let loops = comps.iter().filter(|c| c.state.profile.is_closed()).count();
        let mut l = report.ledger.clone();
        l.connected_sum += loops;
        report.classification = Some(l.classification(n));
    }
    if !report.ledger.reconciles() || report.ledger.live != comps.len() {
        report.invariant_violations.push(format!("ledger does not reconcile: {:?} with {} live", report.ledger, comps.len()));
    }
    if !report.events.is_empty() {
        let min_dec = report.events.iter().map(|e| e.area_removed).fold(f64::INFINITY, f64::min);
        let bound = area0 / min_dec;
        report.surgery_bound = Some(bound);
        for e in &report.events {
            if !(e.area_removed > 0.0) {
                report.invariant_violations.push(format!("surgery at Kt = {} did not decrease area", e.t * kc));
            }
            if !(e.neck.h_center >= e.band.0 && e.neck.h_center <= e.band.1) {
                report.invariant_violations.push(format!("surgery at Kt = {} outside trigger band", e.t * kc));
            }
        }
        if report.events.len() as f64 > bound {
            report.invariant_violations.push(format!("{} surgeries exceed the area bound {bound}", report.events.len()));
        }
    }
    for c in &comps {
        archived.push(c.state.history.clone());
    }
    finish_estimates(cfg, dc, &mon, &archived, &mut report);
    report.series = mon.samples;
    report.wall_clock = clock.elapsed();
    Ok(report)
}

fn run_product_sphere(cfg: &RunConfig, dc: &DerivedConstants, k: usize, u0: f64) -> Result<RunReport, RunError> {
    let clock = Instant::now();
    let fp = cfg.flow;
    let (n, kc) = (fp.n, fp.k);
    let sp: SurgeryParams = cfg.surgery_params();
    let s0 = ProductSphereState::new(n, k, u0).map_err(|e| RunError::Config(e.to_string()))?;
    let area = |s: &ProductSphereState| {
        let (r, q) = s.radii(kc);
        unit_sphere_volume(k) * r.powi(k as i32) * unit_sphere_volume(n - k) * q.powi((n - k) as i32)
    };
    let pc0 = product_sphere_curvatures(&s0, kc).map_err(|e| RunError::Config(e.to_string()))?;
    let h0 = mean_curvature(&pc0);
    let mut violations = Vec::new();
    let q0 = quadratic_margin(&pc0, kc, fp.alpha) / kc;
    if !(q0 < 0.0) {
        violations.push(format!("pinching margin: Q_alpha/K = {q0}"));
    }
    if area(&s0) * kc.powf(n as f64 / 2.0) > fp.v {
        violations.push("area bound".into());
    }
    if h0 * h0 > fp.theta * kc {
        violations.push("curvature bound".into());
    }
    let initial_class = ClassCheck {
        max_q_alpha_over_k: q0,
        area_over_v: area(&s0) * kc.powf(n as f64 / 2.0) / fp.v,
        max_h2_over_k: h0 * h0 / kc,
        bound_over_k: fp.theta,
        violations: violations.clone(),
    };
    if !violations.is_empty() {
        return Err(RunError::NotInClass(violations));
    }
    let mut report = empty_report(cfg, initial_class);
    let tr = flow_product_sphere(&s0, cfg.t_max(), kc, &StepControl { dt_k: cfg.ode_dt_k, record_every: 1 })
        .map_err(|e| RunError::Config(e.to_string()))?;
    let mut samples = Vec::new();
    let mut status = RunStatus::BudgetExhausted;
    for (i, s) in tr.states.iter().enumerate() {
        let pc = product_sphere_curvatures(s, kc).expect("interior angle");
        let h = mean_curvature(&pc);
        let a2 = second_form_norm_sq(&pc);
        let hot = h * h >= sp.theta3 * kc;
        if i as u64 % cfg.monitors.sample_stride == 0 || i + 1 == tr.states.len() || hot {
            let f = f_sigma_eta(&pc, s.t, &fp, dc);
            samples.push(Sample {
                t: s.t * kc,
                max_h2_over_k: h * h / kc,
                min_margin_strict: -strict_margin(&pc, kc) / kc,
                max_q_alpha: quadratic_margin(&pc, kc, fp.alpha) / kc,
                max_cyl_deficit_ratio: (crate::geometry::cylindrical_deficit(&pc) - fp.eta * h * h) * (2.0 * dc.delta * kc * s.t).exp() / kc,
                max_grad_a_ratio: 0.0,
                max_hess_a_ratio: 0.0,
                g_ratio: 0.0,
                max_kbar_over_f: f64::NAN,
                min_kunder_over_f: f64::NAN,
                area_times_kpow: area(s) * kc.powf(n as f64 / 2.0),
                fplus_max: f.f_plus / kc.powf(fp.sigma),
                kato_min: f64::INFINITY,
                max_a2_over_k: a2 / kc,
                bernstein1: 0.0,
                bernstein2: 0.0,
                components: 1,
                era: 0,
            });
        }
        if hot {
            let l1 = pc.min();
            let necklike = h >= sp.h_sharp * kc.sqrt() && l1 / h <= sp.eta_sharp;
            if necklike && (k == 1 || k == n - 1) {
                report.ledger.record_discard(Discard { t: s.t, component: 0, tag: TopologyTag::S1xSnm1, covered_by_neck: true });
                status = RunStatus::TerminatedByClassification;
            } else {
                report.diagnostics.push(format!("S^{k} x S^{} reached Theta3 without a recognizable neck", n - k));
                status = RunStatus::UnresolvedSingularity;
            }
            report.t_final_k = s.t * kc;
            break;
        }
        report.t_final_k = s.t * kc;
    }
    if status == RunStatus::BudgetExhausted && tr.collapse.is_some() {
        report.diagnostics.push(format!("factor collapse {:?} before reaching Theta3", tr.collapse));
        status = RunStatus::UnresolvedSingularity;
    }
    report.status = status;
    report.steps = tr.states.len() as u64 - 1;
    if status == RunStatus::TerminatedByClassification {
        report.classification = Some(report.ledger.classification(n));
    }
    let mon = Monitor { samples, g: GConstants { c_beta: 0.0, c_0: 0.0 }, c_sharp: 0.0, h_sharp: sp.h_sharp, chord_failures: Vec::new() };
    let cfg_no_cmp = RunConfig { monitors: crate::config::Monitors { comparability: false, ..cfg.monitors }, ..cfg.clone() };
    finish_estimates(&cfg_no_cmp, dc, &mon, &[], &mut report);
    report.series = mon.samples;
    report.wall_clock = clock.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn cfg(scenario: &str, extra: &str) -> RunConfig {
        parse_config(&format!(
            r#"{{"scenario": {scenario}, "n": 4, "K": 1.0, "alpha": 0.5, "V": 100.0, "Theta": 3000.0, "eta": 0.05, "sigma": 0.5 {extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn termination_rules() {
        assert_eq!(termination_check(&[], false), Some(RunStatus::TerminatedByClassification));
        let s = crate::profile::geodesic_sphere(0.5, 40, 1.0).unwrap();
        assert_eq!(termination_check(&[&s], true), Some(RunStatus::TerminatedByClassification));
        assert_eq!(termination_check(&[&s, &s], false), None);
    }

    #[test]
    fn pinch_needs_interior_minimum() {
        let mut s = crate::profile::geodesic_sphere(0.01, 401, 1.0).unwrap();
        assert_eq!(pinch_node(&s), None);
        s.nodes[200][2] = 1e-4;
        assert_eq!(pinch_node(&s), Some(200));
    }

    #[test]
    fn equator_converges() {
        let r = run(&cfg(r#"{"type": "equator", "nodes": 41}"#, r#", "t_max": 6.0, "monitors": {"sample_stride": 200}"#)).unwrap();
        assert_eq!(r.status, RunStatus::ConvergedToMinimal);
        assert!(r.series.iter().all(|s| s.max_a2_over_k < 1e-20));
    }

    #[test]
    fn thin_tube_is_discarded_whole() {
        let r = run(&cfg(r#"{"type": "product_sphere", "k": 1, "u0": 0.3}"#, "")).unwrap();
        assert_eq!(r.status, RunStatus::TerminatedByClassification, "{:?}", r.diagnostics);
        assert_eq!(r.classification.as_deref(), Some("S^1xS^3"));
        assert!(r.events.is_empty());
    }
}
