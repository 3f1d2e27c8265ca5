//! Profile curves in the orbit 2-sphere {x^2+y^2+z^2 = 1/K, z >= 0} and
//! the initial-data generators.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub type P3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile needs at least {0} nodes")]
    TooFewNodes(usize),
    #[error("node {0} is off the orbit sphere or below the axis")]
    OffSphere(usize),
    #[error("open-arc endpoint {0} is not on the axis")]
    Endpoint(usize),
    #[error("degenerate spacing at node {0}")]
    Spacing(usize),
    #[error("profile is not embedded: segments {0} and {1} cross")]
    SelfIntersection(usize, usize),
    #[error("table parse error on line {0}: {1}")]
    Table(usize, String),
    #[error("invalid generator parameter: {0}")]
    Generator(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Both endpoints on the axis z = 0; the hypersurface is an n-sphere.
    OpenArc,
    /// Never meets the axis; the hypersurface is S^1 x S^(n-1).
    ClosedLoop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub nodes: Vec<P3>,
    pub topology: Topology,
    pub rho: f64,
}

pub fn dot(a: &P3, b: &P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &P3, b: &P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn sub(a: &P3, b: &P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn norm(a: &P3) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &P3, b: &P3) -> f64 {
    norm(&sub(a, b))
}

pub fn scale(a: &P3, c: f64) -> P3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

/// Radial projection onto the orbit sphere of radius rho.
pub fn project(p: &P3, rho: f64) -> P3 {
    scale(p, rho / norm(p))
}

/// Mirror image across the axis plane z = 0.
pub fn ghost(p: &P3) -> P3 {
    [p[0], p[1], -p[2]]
}

impl ProfileCurve {
    pub fn new(nodes: Vec<P3>, topology: Topology, rho: f64) -> Result<Self, ProfileError> {
        let c = Self { nodes, topology, rho };
        c.validate()?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.topology == Topology::ClosedLoop
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let min = if self.is_closed() { 4 } else { 3 };
        if self.nodes.len() < min {
            return Err(ProfileError::TooFewNodes(min));
        }
        for (i, p) in self.nodes.iter().enumerate() {
            if (dot(p, p) - self.rho * self.rho).abs() > 1e-10 * self.rho * self.rho || p[2] < 0.0 || !p.iter().all(|c| c.is_finite()) {
                return Err(ProfileError::OffSphere(i));
            }
        }
        if !self.is_closed() {
            let last = self.nodes.len() - 1;
            for i in [0, last] {
                if self.nodes[i][2] != 0.0 {
                    return Err(ProfileError::Endpoint(i));
                }
            }
        } else if self.nodes.iter().any(|p| p[2] <= 0.0) {
            return Err(ProfileError::OffSphere(self.nodes.iter().position(|p| p[2] <= 0.0).unwrap()));
        }
        for (i, s) in self.segments().iter().enumerate() {
            if !(*s > 1e-14 * self.rho) {
                return Err(ProfileError::Spacing(i));
            }
        }
        Ok(())
    }

    /// Segment chord lengths; a closed loop includes the closing segment.
    pub fn segments(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let m = if self.is_closed() { n } else { n - 1 };
        (0..m).map(|i| dist(&self.nodes[i], &self.nodes[(i + 1) % n])).collect()
    }

    pub fn arclength(&self) -> f64 {
        self.segments().iter().sum()
    }

    /// Cumulative chord length at each node.
    pub fn xi(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut acc = 0.0;
        out.push(0.0);
        for s in self.segments().iter().take(self.nodes.len() - 1) {
            acc += s;
            out.push(acc);
        }
        out
    }

    /// Length with each chord replaced by the arc of the mean osculating circle of its end nodes.
    pub fn curve_length(&self) -> f64 {
        let n = self.nodes.len();
        let inv_r: Vec<f64> = (0..n)
            .map(|i| {
                let (a, b) = self.neighbors(i);
                let p = self.nodes[i];
                let (u, v) = (sub(&a, &p), sub(&b, &p));
                2.0 * norm(&cross(&u, &v)) / (norm(&u) * norm(&v) * dist(&a, &b))
            })
            .collect();
        self.segments()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = 0.5 * (inv_r[i] + inv_r[(i + 1) % n]);
                let x = 0.5 * c * k;
                if x < 1e-8 {
                    *c
                } else {
                    2.0 * x.min(1.0).asin() / k
                }
            })
            .sum()
    }

    pub fn spacing_ratio(&self) -> f64 {
        let s = self.segments();
        let mx = s.iter().cloned().fold(0.0, f64::max);
        let mn = s.iter().cloned().fold(f64::INFINITY, f64::min);
        mx / mn
    }

    pub fn min_spacing(&self) -> f64 {
        self.segments().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Neighbors (prev, next) of node i, with axis reflection ghosts at open-arc ends.
    pub fn neighbors(&self, i: usize) -> (P3, P3) {
        let n = self.nodes.len();
        if self.is_closed() {
            (self.nodes[(i + n - 1) % n], self.nodes[(i + 1) % n])
        } else if i == 0 {
            (ghost(&self.nodes[1]), self.nodes[1])
        } else if i == n - 1 {
            (self.nodes[n - 2], ghost(&self.nodes[n - 2]))
        } else {
            (self.nodes[i - 1], self.nodes[i + 1])
        }
    }

    /// Smallest z over nodes that are not axis endpoints.
    pub fn min_interior_z(&self) -> f64 {
        let n = self.nodes.len();
        let range = if self.is_closed() { 0..n } else { 1..n - 1 };
        self.nodes[range].iter().map(|p| p[2]).fold(f64::INFINITY, f64::min)
    }

    /// Segment-pair crossing test on great-circle arcs; the first crossing found.
    pub fn self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.nodes.len();
        let m = if self.is_closed() { n } else { n - 1 };
        let seg = |i: usize| (self.nodes[i], self.nodes[(i + 1) % n]);
        let bbox: Vec<(P3, P3)> = (0..m)
            .map(|i| {
                let (a, b) = seg(i);
                let lo = [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])];
                let hi = [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])];
                (lo, hi)
            })
            .collect();
        for i in 0..m {
            for j in i + 2..m {
                if self.is_closed() && i == 0 && j == m - 1 {
                    continue;
                }
                let (l1, h1) = bbox[i];
                let (l2, h2) = bbox[j];
                if (0..3).any(|c| l1[c] > h2[c] || l2[c] > h1[c]) {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if arcs_cross(&a, &b, &c, &d) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Same curve rescaled to orbit radius rho * c (lengths scale by c).
    pub fn scaled(&self, c: f64) -> Self {
        Self { nodes: self.nodes.iter().map(|p| scale(p, c)).collect(), topology: self.topology, rho: self.rho * c }
    }

    pub fn from_table(text: &str, topology: Topology, rho: f64) -> Result<Self, ProfileError> {
        let mut nodes = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = t.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if cols.len() != 4 {
                return Err(ProfileError::Table(ln + 1, format!("expected 4 columns (xi x y z), got {}", cols.len())));
            }
            let mut v = [0.0; 4];
            for (k, c) in cols.iter().enumerate() {
                v[k] = c.parse().map_err(|e| ProfileError::Table(ln + 1, format!("{e}")))?;
            }
            nodes.push(project(&[v[1], v[2], v[3].max(0.0)], rho));
        }
        if topology == Topology::OpenArc && nodes.len() >= 2 {
            let last = nodes.len() - 1;
            nodes[0][2] = 0.0;
            nodes[last][2] = 0.0;
            nodes[0] = project(&nodes[0], rho);
            nodes[last] = project(&nodes[last], rho);
        }
        Self::new(nodes, topology, rho)
    }
}

fn arcs_cross(a: &P3, b: &P3, c: &P3, d: &P3) -> bool {
    let n1 = cross(a, b);
    let n2 = cross(c, d);
    let l = cross(&n1, &n2);
    if norm(&l) == 0.0 {
        return false;
    }
    for s in [1.0, -1.0] {
        let p = scale(&l, s);
        let on = |u: &P3, v: &P3, nn: &P3| dot(&cross(u, &p), nn) >= 0.0 && dot(&cross(&p, v), nn) >= 0.0;
        if on(a, b, &n1) && on(c, d, &n2) {
            return true;
        }
    }
    false
}

/// Samples a parametrized curve f: [0, 1] -> orbit sphere at `count` nodes equally
/// spaced in chord length (closed curves: f(1) = f(0), count distinct nodes).
pub fn sample_by_arclength<F: Fn(f64) -> P3>(f: F, count: usize, closed: bool) -> Vec<P3> {
    let fine = 64 * count.max(16);
    let pts: Vec<P3> = (0..=fine).map(|i| f(i as f64 / fine as f64)).collect();
    let mut cum = vec![0.0; fine + 1];
    for i in 1..=fine {
        cum[i] = cum[i - 1] + dist(&pts[i], &pts[i - 1]);
    }
    let total = cum[fine];
    let segs = if closed { count } else { count - 1 };
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let target = total * k as f64 / segs as f64;
        while j + 1 < fine && cum[j + 1] < target {
            j += 1;
        }
        let w = ((target - cum[j]) / (cum[j + 1] - cum[j])).clamp(0.0, 1.0);
        let s = (j as f64 + w) / fine as f64;
        out.push(f(s));
    }
    if !closed {
        out[count - 1] = f(1.0);
    }
    out
}

fn finish_open(mut nodes: Vec<P3>, rho: f64) -> ProfileCurve {
    let last = nodes.len() - 1;
    for i in [0, last] {
        nodes[i][2] = 0.0;
        nodes[i] = project(&nodes[i], rho);
    }
    for p in nodes.iter_mut() {
        *p = project(p, rho);
    }
    ProfileCurve { nodes, topology: Topology::OpenArc, rho }
}

/// Geodesic sphere of radius d about the pole (rho, 0, 0).
pub fn geodesic_sphere(d: f64, count: usize, rho: f64) -> Result<ProfileCurve, ProfileError> {
    let a = d / rho;
    if !(a > 0.0 && a < PI) || count < 3 {
        return Err(ProfileError::Generator(format!("geodesic sphere radius {d} with {count} nodes")));
    }
    let nodes: Vec<P3> = (0..count)
        .map(|i| {
            let th = PI * (1.0 - i as f64 / (count - 1) as f64);
            [rho * a.cos(), rho * a.sin() * th.cos(), rho * a.sin() * th.sin()]
        })
        .collect();
    Ok(finish_open(nodes, rho))
}

/// Totally geodesic equator x = 0.
pub fn equator(count: usize, rho: f64) -> Result<ProfileCurve, ProfileError> {
    let mut c = geodesic_sphere(0.5 * PI * rho, count, rho)?;
    for p in c.nodes.iter_mut() {
        p[0] = 0.0;
        *p = project(p, rho);
    }
    Ok(c)
}

/// Equator tilted by phi(theta) = amplitude * cos(mode * theta) out of the plane x = 0.
/// Odd modes keep the point symmetry (x, y) -> (-x, -y).
pub fn perturbed_equator(amplitude: f64, mode: u32, count: usize, rho: f64) -> Result<ProfileCurve, ProfileError> {
    if !(amplitude.abs() < 0.5) || count < 3 {
        return Err(ProfileError::Generator(format!("equator perturbation amplitude {amplitude}")));
    }
    let f = |s: f64| {
        let th = PI * (1.0 - s);
        let phi = amplitude * (mode as f64 * th).cos();
        [rho * phi.sin(), rho * phi.cos() * th.cos(), rho * phi.cos() * th.sin()]
    };
    Ok(finish_open(sample_by_arclength(f, count, false), rho))
}

/// The S^1 x S^(n-1) tube: the parallel z = rho sin u, counterclockwise seen from +z.
pub fn tube(u: f64, count: usize, rho: f64) -> Result<ProfileCurve, ProfileError> {
    if !(u > 0.0 && u < 0.5 * PI) || count < 4 {
        return Err(ProfileError::Generator(format!("tube angle {u}")));
    }
    let nodes = (0..count)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / count as f64;
            [rho * u.cos() * th.cos(), rho * u.cos() * th.sin(), rho * u.sin()]
        })
        .collect();
    Ok(ProfileCurve { nodes, topology: Topology::ClosedLoop, rho })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DumbbellShape {
    /// Half length along the axis, in tangent-space units (length).
    pub half_length: f64,
    pub neck_radius: f64,
    pub bulb_radius: f64,
}

impl DumbbellShape {
    /// (c, w) in R(X)^2 = c (l^2 - X^2)(w^2 + X^2)/l^2.
    pub fn coefficients(&self) -> Result<(f64, f64), ProfileError> {
        let (l, rn, rb) = (self.half_length, self.neck_radius, self.bulb_radius);
        if !(l > 0.0 && rn > 0.0 && rb > rn) {
            return Err(ProfileError::Generator("dumbbell needs 0 < neck_radius < bulb_radius, half_length > 0".into()));
        }
        let beta = rb / rn;
        let w = l * (beta - (beta * beta - 1.0).sqrt());
        Ok(((rn / w).powi(2), w))
    }

    /// Euclidean profile radius at axial coordinate X in (-l, l).
    pub fn radius(&self, x: f64) -> f64 {
        let (c, w) = self.coefficients().unwrap();
        let l = self.half_length;
        (c * (l * l - x * x) * (w * w + x * x) / (l * l)).max(0.0).sqrt()
    }
}

/// Exponential map at the axis point base (|base| = rho, base_z = 0) of the
/// tangent-plane point (X along `axial`, R along the orbit direction).
pub fn exp_axis(base: &P3, axial: &P3, x: f64, r: f64, rho: f64) -> P3 {
    let s = (x * x + r * r).sqrt();
    if s == 0.0 {
        return *base;
    }
    let (c, sn) = ((s / rho).cos(), (s / rho).sin());
    let k = rho * sn / s;
    [c * base[0] + k * x * axial[0], c * base[1] + k * x * axial[1], k * r]
}

/// Inverse of `exp_axis`: (X, R) for an orbit-space point q.
pub fn log_axis(base: &P3, axial: &P3, q: &P3, rho: f64) -> (f64, f64) {
    let c = (dot(q, base) / (rho * rho)).clamp(-1.0, 1.0);
    let ang = c.acos();
    let xa = dot(q, axial);
    let r = q[2];
    let sn = (xa * xa + r * r).sqrt();
    if sn == 0.0 {
        return (0.0, 0.0);
    }
    let f = rho * ang / sn;
    (xa * f, r * f)
}

/// Dumbbell profile as a function of s in [0, 1]; X = -l cos(pi s) about the pole (rho, 0, 0).
pub fn dumbbell_curve(shape: DumbbellShape, rho: f64) -> impl Fn(f64) -> P3 {
    move |s: f64| {
        let x = -shape.half_length * (PI * s).cos();
        let r = shape.radius(x);
        exp_axis(&[rho, 0.0, 0.0], &[0.0, 1.0, 0.0], x, r, rho)
    }
}

pub fn dumbbell(shape: DumbbellShape, count: usize, rho: f64) -> Result<ProfileCurve, ProfileError> {
    shape.coefficients()?;
    if shape.half_length >= 0.5 * PI * rho {
        return Err(ProfileError::Generator("dumbbell longer than a quarter great circle".into()));
    }
    Ok(finish_open(sample_by_arclength(dumbbell_curve(shape, rho), count, false), rho))
}

/// Volume of the unit (m)-sphere, 2 pi^((m+1)/2) / Gamma((m+1)/2).
pub fn unit_sphere_volume(m: usize) -> f64 {
    // |S^0| = 2, |S^1| = 2 pi, |S^m| = 2 pi/(m-1) |S^(m-2)|
    let mut v = if m % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut k = if m % 2 == 0 { 0 } else { 1 };
    while k < m {
        k += 2;
        v *= 2.0 * PI / (k as f64 - 1.0);
    }
    v
}

/// Area of the hypersurface: |S^(n-1)| times the trapezoid integral of z^(n-1) over chord length.
pub fn area(profile: &ProfileCurve, n: usize) -> f64 {
    let m = profile.nodes.len();
    let segs = profile.segments();
    let f = |p: &P3| p[2].powi(n as i32 - 1);
    let s: f64 = segs
        .iter()
        .enumerate()
        .map(|(i, h)| 0.5 * h * (f(&profile.nodes[i]) + f(&profile.nodes[(i + 1) % m])))
        .sum();
    unit_sphere_volume(n - 1) * s
}

/// Points (x, y, z w) in R^(n+2) for each node and each orbit sample w in S^(n-1).
pub fn embed_profile(profile: &ProfileCurve, orbit_samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(profile.nodes.len() * orbit_samples.len());
    for p in &profile.nodes {
        for w in orbit_samples {
            let mut v = Vec::with_capacity(w.len() + 2);
            v.push(p[0]);
            v.push(p[1]);
            v.extend(w.iter().map(|c| p[2] * c));
            out.push(v);
        }
    }
    out
}

/// Piecewise cubic Hermite resampling at uniform chord length.
/// `segments` = number of output segments; None keeps spacing in [h_min, 2 h_min].
pub fn regrid(profile: &ProfileCurve, h_min: f64, segments: Option<usize>) -> ProfileCurve {
    let n = profile.nodes.len();
    let closed = profile.is_closed();
    let xi = profile.xi();
    let total = profile.arclength();
    let m_old = if closed { n } else { n - 1 };
    let min_segs = if closed { 8 } else { 4 };
    let m = segments.unwrap_or_else(|| {
        let mean = total / m_old as f64;
        if mean >= h_min && mean <= 2.0 * h_min {
            m_old
        } else {
            ((total / h_min).floor() as usize).max(min_segs)
        }
    });
    let tangents: Vec<P3> = (0..n)
        .map(|i| {
            let (a, b) = profile.neighbors(i);
            let p = profile.nodes[i];
            let (h1, h2) = (dist(&p, &a), dist(&b, &p));
            let d = h1 * h2 * (h1 + h2);
            let mut t = [0.0; 3];
            for c in 0..3 {
                t[c] = (h1 * h1 * (b[c] - p[c]) + h2 * h2 * (p[c] - a[c])) / d;
            }
            t
        })
        .collect();
    let knot = |k: usize| if k == n { total } else { xi[k] };
    let count = if closed { m } else { m + 1 };
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let s = total * k as f64 / m as f64;
        while j + 1 < m_old && knot(j + 1) <= s {
            j += 1;
        }
        let (s0, s1) = (knot(j), knot(j + 1));
        let h = s1 - s0;
        let u = ((s - s0) / h).clamp(0.0, 1.0);
        let (p0, p1) = (profile.nodes[j], profile.nodes[(j + 1) % n]);
        let (t0, t1) = (tangents[j], tangents[(j + 1) % n]);
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let mut q = [0.0; 3];
        for c in 0..3 {
            q[c] = h00 * p0[c] + h10 * h * t0[c] + h01 * p1[c] + h11 * h * t1[c];
        }
        q[2] = q[2].max(0.0);
        out.push(project(&q, profile.rho));
    }
    if closed {
        ProfileCurve { nodes: out, topology: Topology::ClosedLoop, rho: profile.rho }
    } else {
        out[0] = profile.nodes[0];
        out[m] = profile.nodes[n - 1];
        ProfileCurve { nodes: out, topology: Topology::OpenArc, rho: profile.rho }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generators_are_valid() {
        let rho = 1.0;
        for c in [
            geodesic_sphere(1.0, 101, rho).unwrap(),
            equator(101, rho).unwrap(),
            perturbed_equator(0.1, 3, 101, rho).unwrap(),
            tube(0.3, 100, rho).unwrap(),
            dumbbell(DumbbellShape { half_length: 0.8, neck_radius: 0.06, bulb_radius: 0.16 }, 200, rho).unwrap(),
        ] {
            c.validate().unwrap();
            assert!(c.self_intersection().is_none());
            assert!(c.spacing_ratio() < 1.01, "{}", c.spacing_ratio());
        }
    }

    #[test]
    fn dumbbell_shape_parameters() {
        let s = DumbbellShape { half_length: 0.8, neck_radius: 0.06, bulb_radius: 0.16 };
        assert_relative_eq!(s.radius(0.0), 0.06, epsilon = 1e-14);
        let (c, w) = s.coefficients().unwrap();
        let xm = ((0.64 - w * w) / 2.0).sqrt();
        assert_relative_eq!(s.radius(xm), 0.16, epsilon = 1e-12);
        assert!(c < 0.2);
    }

    #[test]
    fn exp_log_roundtrip() {
        let base = [0.0, -2.0, 0.0];
        let ax = [1.0, 0.0, 0.0];
        for &(x, r) in &[(0.3, 0.2), (-0.5, 0.01), (0.0, 0.4)] {
            let q = exp_axis(&base, &ax, x, r, 2.0);
            assert_relative_eq!(norm(&q), 2.0, epsilon = 1e-14);
            let (x2, r2) = log_axis(&base, &ax, &q, 2.0);
            assert_relative_eq!(x2, x, epsilon = 1e-12);
            assert_relative_eq!(r2, r, epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_volumes() {
        assert_relative_eq!(unit_sphere_volume(1), 2.0 * PI, epsilon = 1e-15);
        assert_relative_eq!(unit_sphere_volume(2), 4.0 * PI, epsilon = 1e-15);
        assert_relative_eq!(unit_sphere_volume(3), 2.0 * PI * PI, epsilon = 1e-15);
        assert_relative_eq!(unit_sphere_volume(4), 8.0 * PI * PI / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn areas() {
        let e = equator(801, 1.0).unwrap();
        assert_relative_eq!(area(&e, 4), 8.0 * PI * PI / 3.0, max_relative = 1e-4);
        let d = 0.9;
        let g = geodesic_sphere(d, 801, 1.0).unwrap();
        assert_relative_eq!(area(&g, 4), d.sin().powi(4) * 8.0 * PI * PI / 3.0, max_relative = 1e-4);
        let g2 = geodesic_sphere(2.0 * d, 801, 2.0).unwrap();
        assert_relative_eq!(area(&g2, 4), 16.0 * area(&g, 4), max_relative = 1e-12);
    }

    #[test]
    fn embedding_points() {
        let g = geodesic_sphere(0.7, 11, 0.5).unwrap();
        let om = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.6, 0.8]];
        let pts = embed_profile(&g, &om);
        for p in &pts {
            assert_relative_eq!(p.iter().map(|c| c * c).sum::<f64>().sqrt(), 0.5, epsilon = 1e-14);
        }
        assert_eq!(pts[0], pts[1]);
        let e = embed_profile(&equator(5, 1.0).unwrap(), &om);
        assert!(e.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn regrid_properties() {
        let g = geodesic_sphere(1.0, 201, 1.0).unwrap();
        let h = g.arclength() / 200.0;
        let r = regrid(&g, h, None);
        assert_eq!(r.len(), g.len());
        for (a, b) in r.nodes.iter().zip(&g.nodes) {
            assert!(dist(a, b) < 1e-10);
        }
        let d = dumbbell(DumbbellShape { half_length: 0.8, neck_radius: 0.06, bulb_radius: 0.16 }, 400, 1.0).unwrap();
        // distort spacing, then regrid back
        let mut nodes = d.nodes.clone();
        for i in 1..nodes.len() - 1 {
            if i % 2 == 0 {
                let a = nodes[i];
                let b = nodes[i + 1];
                nodes[i] = project(&[0.7 * a[0] + 0.3 * b[0], 0.7 * a[1] + 0.3 * b[1], 0.7 * a[2] + 0.3 * b[2]], 1.0);
            }
        }
        let distorted = ProfileCurve::new(nodes, Topology::OpenArc, 1.0).unwrap();
        let hr = distorted.arclength() / 399.0;
        let back = regrid(&distorted, hr, None);
        back.validate().unwrap();
        assert!(back.spacing_ratio() <= 1.01);
        assert!((back.curve_length() - distorted.curve_length()).abs() < 1e-6 * distorted.curve_length());
        let t = tube(0.4, 64, 1.0).unwrap();
        let tr = regrid(&t, t.arclength() / 64.0 * 0.4, None);
        assert!(tr.len() == 160 && tr.spacing_ratio() < 1.01);
    }

    #[test]
    fn crossing_detected() {
        let nodes = vec![[0.0, -1.0, 0.0], project(&[0.2, 0.3, 0.9], 1.0), project(&[-0.2, 0.3, 0.9], 1.0), project(&[0.2, -0.3, 0.9], 1.0), [0.0, 1.0, 0.0]];
        let c = ProfileCurve::new(nodes, Topology::OpenArc, 1.0).unwrap();
        assert!(c.self_intersection().is_some());
    }

    #[test]
    fn table_roundtrip() {
        let g = geodesic_sphere(1.0, 9, 1.0).unwrap();
        let xi = g.xi();
        let text: String = g.nodes.iter().zip(&xi).map(|(p, s)| format!("{s} {} {} {}\n", p[0], p[1], p[2])).collect();
        let back = ProfileCurve::from_table(&text, Topology::OpenArc, 1.0).unwrap();
        for (a, b) in back.nodes.iter().zip(&g.nodes) {
            assert!(dist(a, b) < 1e-12);
        }
        assert!(matches!(ProfileCurve::from_table("1 2 3\n", Topology::OpenArc, 1.0), Err(ProfileError::Table(1, _))));
    }
}
