//! Finite-difference embedding oracle.
//!
//! Works on an explicit chart X: R^n -> S^(n+1)_K in R^(n+2) and computes
//! the second fundamental form, |grad A|^2 and |Hess A|^2 by full tensor
//! contraction with Christoffel symbols. Shares no code with the profile
//! discretization it is used to validate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Value, first and second chart derivatives of an embedding at a point.
pub struct Jet {
    pub x: DVector<f64>,
    pub d1: Vec<DVector<f64>>,
    pub d2: Vec<Vec<DVector<f64>>>,
}

pub trait Embedding {
    /// Intrinsic dimension n.
    fn dim(&self) -> usize;
    fn jet(&self, u: &[f64]) -> Jet;
    /// Any vector with positive inner product with the chosen unit normal.
    fn orientation(&self, u: &[f64]) -> DVector<f64>;
}

/// Jets by central differences of a point map.
pub struct FdEmbedding<F, O> {
    pub n: usize,
    pub map: F,
    pub orient: O,
    pub step: f64,
}

fn fd_weights6(h: f64) -> [(f64, f64); 6] {
    [(-3.0 * h, -1.0 / 60.0), (-2.0 * h, 3.0 / 20.0), (-h, -0.75), (h, 0.75), (2.0 * h, -3.0 / 20.0), (3.0 * h, 1.0 / 60.0)]
}

impl<F, O> Embedding for FdEmbedding<F, O>
where
    F: Fn(&[f64]) -> DVector<f64>,
    O: Fn(&[f64]) -> DVector<f64>,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, u: &[f64]) -> Jet {
        let n = self.n;
        let h = self.step;
        let x = (self.map)(u);
        let shifted = |i: usize, a: f64, j: usize, b: f64| {
            let mut v = u.to_vec();
            v[i] += a;
            v[j] += b;
            (self.map)(&v)
        };
        let d = |i: usize| {
            let mut acc = DVector::zeros(x.len());
            for (o, w) in fd_weights6(h) {
                acc += shifted(i, o, i, 0.0) * w;
            }
            acc / h
        };
        let d1: Vec<_> = (0..n).map(d).collect();
        let mut d2 = vec![vec![DVector::zeros(x.len()); n]; n];
        let c2 = [(-3.0, 1.0 / 90.0), (-2.0, -3.0 / 20.0), (-1.0, 1.5), (0.0, -49.0 / 18.0), (1.0, 1.5), (2.0, -3.0 / 20.0), (3.0, 1.0 / 90.0)];
        for i in 0..n {
            let mut acc = DVector::zeros(x.len());
            for (o, w) in c2 {
                acc += shifted(i, o * h, i, 0.0) * w;
            }
            d2[i][i] = acc / (h * h);
            for j in 0..i {
                let mut acc = DVector::zeros(x.len());
                for (oi, wi) in fd_weights6(h) {
                    for (oj, wj) in fd_weights6(h) {
                        acc += shifted(i, oi, j, oj) * (wi * wj);
                    }
                }
                d2[i][j] = acc / (h * h);
                d2[j][i] = d2[i][j].clone();
            }
        }
        Jet { x, d1, d2 }
    }

    fn orientation(&self, u: &[f64]) -> DVector<f64> {
        (self.orient)(u)
    }
}

/// Profile curve in orbit space with analytic first and second derivatives
/// in its own parameter s.
pub trait CurveJet {
    fn eval(&self, s: f64) -> [[f64; 3]; 3];
}

/// Curve jets by sixth-order central differences of a point map.
pub struct FdCurve<F> {
    pub map: F,
    pub step: f64,
}

impl<F: Fn(f64) -> [f64; 3]> CurveJet for FdCurve<F> {
    fn eval(&self, s: f64) -> [[f64; 3]; 3] {
        let h = self.step;
        let p = (self.map)(s);
        let mut d1 = [0.0; 3];
        let mut d2 = [0.0; 3];
        let c2 = [(-3.0, 1.0 / 90.0), (-2.0, -3.0 / 20.0), (-1.0, 1.5), (1.0, 1.5), (2.0, -3.0 / 20.0), (3.0, 1.0 / 90.0)];
        for (o, w) in fd_weights6(h) {
            let q = (self.map)(s + o);
            for c in 0..3 {
                d1[c] += w * q[c] / h;
            }
        }
        for (o, w) in c2 {
            let q = (self.map)(s + o * h);
            for c in 0..3 {
                d2[c] += w * q[c] / (h * h);
            }
        }
        for c in 0..3 {
            d2[c] -= 49.0 / 18.0 * p[c] / (h * h);
        }
        [p, d1, d2]
    }
}

/// SO(n)-invariant hypersurface {(x(s), y(s), z(s) w) : w in S^(n-1)} in the chart
/// w = (1, v)/|(1, v)|. `orient_sign` picks the normal: +1 for the one with
/// positive inner product with (p/|p|) x p'.
pub struct RotationalEmbedding<C> {
    pub n: usize,
    pub curve: C,
    pub orient_sign: f64,
}

fn omega_jet(v: &[f64]) -> (DVector<f64>, Vec<DVector<f64>>, Vec<Vec<DVector<f64>>>) {
    let m = v.len() + 1;
    let mut q = DVector::zeros(m);
    q[0] = 1.0;
    for (i, vi) in v.iter().enumerate() {
        q[i + 1] = *vi;
    }
    let nn = q.norm();
    let w = &q / nn;
    let n3 = nn.powi(3);
    let n5 = nn.powi(5);
    let mut d1 = Vec::new();
    for j in 0..v.len() {
        let mut e = DVector::zeros(m);
        e[j + 1] = 1.0;
        d1.push(&e / nn - &q * (v[j] / n3));
    }
    let mut d2 = vec![vec![DVector::zeros(m); v.len()]; v.len()];
    for i in 0..v.len() {
        for j in 0..v.len() {
            let mut ei = DVector::zeros(m);
            ei[i + 1] = 1.0;
            let mut ej = DVector::zeros(m);
            ej[j + 1] = 1.0;
            let dij = if i == j { 1.0 } else { 0.0 };
            d2[i][j] = -&ej * (v[i] / n3) - &ei * (v[j] / n3) - &q * (dij / n3) + &q * (3.0 * v[i] * v[j] / n5);
        }
    }
    (w, d1, d2)
}

impl<C: CurveJet> Embedding for RotationalEmbedding<C> {
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, u: &[f64]) -> Jet {
        let n = self.n;
        let [p, p1, p2] = self.curve.eval(u[0]);
        let (w, w1, w2) = omega_jet(&u[1..]);
        let lift = |a: f64, b: f64, c: f64, om: &DVector<f64>| {
            let mut out = DVector::zeros(n + 2);
            out[0] = a;
            out[1] = b;
            for k in 0..n {
                out[2 + k] = c * om[k];
            }
            out
        };
        let x = lift(p[0], p[1], p[2], &w);
        let mut d1 = vec![lift(p1[0], p1[1], p1[2], &w)];
        for j in 0..n - 1 {
            d1.push(lift(0.0, 0.0, p[2], &w1[j]));
        }
        let mut d2 = vec![vec![DVector::zeros(n + 2); n]; n];
        d2[0][0] = lift(p2[0], p2[1], p2[2], &w);
        for j in 0..n - 1 {
            d2[0][j + 1] = lift(0.0, 0.0, p1[2], &w1[j]);
            d2[j + 1][0] = d2[0][j + 1].clone();
            for i in 0..n - 1 {
                d2[i + 1][j + 1] = lift(0.0, 0.0, p[2], &w2[i][j]);
            }
        }
        Jet { x, d1, d2 }
    }

    fn orientation(&self, u: &[f64]) -> DVector<f64> {
        let [p, p1, _] = self.curve.eval(u[0]);
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let c = [
            (p[1] * p1[2] - p[2] * p1[1]) / r,
            (p[2] * p1[0] - p[0] * p1[2]) / r,
            (p[0] * p1[1] - p[1] * p1[0]) / r,
        ];
        let (w, _, _) = omega_jet(&u[1..]);
        let mut out = DVector::zeros(self.n + 2);
        out[0] = c[0] * self.orient_sign;
        out[1] = c[1] * self.orient_sign;
        for k in 0..self.n {
            out[2 + k] = c[2] * w[k] * self.orient_sign;
        }
        out
    }
}

/// Unit normal within the sphere: orthogonal to X and to all chart tangents.
pub fn unit_normal(jet: &Jet, orient: &DVector<f64>) -> DVector<f64> {
    let dim = jet.x.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let push = |v: &DVector<f64>, basis: &mut Vec<DVector<f64>>| -> Option<DVector<f64>> {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in basis.iter() {
                let c = w.dot(b);
                w -= b * c;
            }
        }
        let nw = w.norm();
        if nw > 1e-8 * v.norm().max(1e-300) {
            let u = w / nw;
            basis.push(u.clone());
            Some(u)
        } else {
            None
        }
    };
    push(&jet.x, &mut basis);
    for d in &jet.d1 {
        push(d, &mut basis);
    }
    let mut cand = orient.clone();
    let mut nu = push(&cand, &mut basis);
    let mut k = 0;
    while nu.is_none() && k < dim {
        cand = DVector::zeros(dim);
        cand[k] = 1.0;
        nu = push(&cand, &mut basis);
        k += 1;
    }
    let nu = nu.expect("normal exists");
    if nu.dot(orient) < 0.0 {
        -nu
    } else {
        nu
    }
}

/// Metric and second fundamental form h_ij = -<X_ij, nu> at a chart point.
pub fn metric_and_second_form<E: Embedding>(e: &E, u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = e.dim();
    let jet = e.jet(u);
    let nu = unit_normal(&jet, &e.orientation(u));
    let g = DMatrix::from_fn(n, n, |i, j| jet.d1[i].dot(&jet.d1[j]));
    let h = DMatrix::from_fn(n, n, |i, j| -jet.d2[i][j].dot(&nu));
    (g, h)
}

/// Ascending principal curvatures at a chart point.
pub fn principal_curvatures<E: Embedding>(e: &E, u: &[f64]) -> Vec<f64> {
    let (g, h) = metric_and_second_form(e, u);
    let l = g.cholesky().expect("metric positive definite").l();
    let li = l.clone().try_inverse().unwrap();
    let s = &li * h * li.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Derivative of a matrix field along chart direction k, fourth-order central differences.
fn dmat<F: Fn(&[f64]) -> DMatrix<f64>>(f: &F, u: &[f64], k: usize, d: f64) -> DMatrix<f64> {
    let at = |o: f64| {
        let mut v = u.to_vec();
        v[k] += o;
        f(&v)
    };
    (at(-2.0 * d) - at(2.0 * d) + (at(d) - at(-d)) * 8.0) / (12.0 * d)
}

/// Christoffel symbols gamma[m][(i, j)] from the metric and its derivatives.
fn christoffel(g: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = g.nrows();
    let gi = g.clone().try_inverse().unwrap();
    (0..n)
        .map(|m| {
            DMatrix::from_fn(n, n, |i, j| {
                0.5 * (0..n).map(|l| gi[(m, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])).sum::<f64>()
            })
        })
        .collect()
}

/// Flattened 3-tensor T[k][i][j] = nabla_k h_ij.
type T3 = Vec<DMatrix<f64>>;

fn grad_h<E: Embedding>(e: &E, u: &[f64], d: f64) -> (DMatrix<f64>, DMatrix<f64>, Vec<DMatrix<f64>>, T3) {
    let n = e.dim();
    let gf = |v: &[f64]| metric_and_second_form(e, v).0;
    let hf = |v: &[f64]| metric_and_second_form(e, v).1;
    let (g, h) = metric_and_second_form(e, u);
    let dg: Vec<_> = (0..n).map(|k| dmat(&gf, u, k, d)).collect();
    let dh: Vec<_> = (0..n).map(|k| dmat(&hf, u, k, d)).collect();
    let gam = christoffel(&g, &dg);
    let t: T3 = (0..n)
        .map(|k| {
            DMatrix::from_fn(n, n, |i, j| {
                dh[k][(i, j)]
                    - (0..n).map(|m| gam[m][(k, i)] * h[(m, j)] + gam[m][(k, j)] * h[(i, m)]).sum::<f64>()
            })
        })
        .collect();
    (g, h, gam, t)
}

/// |A|^2, |grad A|^2 at a chart point.
pub fn grad_a_sq<E: Embedding>(e: &E, u: &[f64], d: f64) -> (f64, f64) {
    let n = e.dim();
    let (g, h, _, t) = grad_h(e, u, d);
    let gi = g.try_inverse().unwrap();
    let a2 = (&gi * &h * &gi * &h).trace();
    let mut s = 0.0;
    for k in 0..n {
        for a in 0..n {
            let m = &gi * &t[a] * &gi;
            s += gi[(k, a)] * (&t[k].transpose() * m).trace();
        }
    }
    (a2, s)
}

/// |grad H|^2 at a chart point.
pub fn grad_h_sq<E: Embedding>(e: &E, u: &[f64], d: f64) -> f64 {
    let n = e.dim();
    let (g, _, _, t) = grad_h(e, u, d);
    let gi = g.try_inverse().unwrap();
    let dh: Vec<f64> = (0..n).map(|k| (&gi * &t[k]).trace()).collect();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += gi[(a, b)] * dh[a] * dh[b];
        }
    }
    s
}

/// |Hess A|^2 at a chart point: outer differences of nabla h with step `d_outer`.
pub fn hess_a_sq<E: Embedding>(e: &E, u: &[f64], d_inner: f64, d_outer: f64) -> f64 {
    let n = e.dim();
    let (g, _, gam, t) = grad_h(e, u, d_inner);
    let gi = g.try_inverse().unwrap();
    let t_at = |l: usize, o: f64| {
        let mut v = u.to_vec();
        v[l] += o;
        grad_h(e, &v, d_inner).3
    };
    // dt[l][k] = d_l (nabla_k h)
    let mut dt: Vec<Vec<DMatrix<f64>>> = Vec::new();
    for l in 0..n {
        let (m2, m1, p1, p2) = (t_at(l, -2.0 * d_outer), t_at(l, -d_outer), t_at(l, d_outer), t_at(l, 2.0 * d_outer));
        dt.push(
            (0..n)
                .map(|k| (&m2[k] - &p2[k] + (&p1[k] - &m1[k]) * 8.0) / (12.0 * d_outer))
                .collect(),
        );
    }
    // q[l][k][i][j] = nabla_l nabla_k h_ij
    let idx = |l: usize, k: usize, i: usize, j: usize| ((l * n + k) * n + i) * n + j;
    let mut q = vec![0.0; n * n * n * n];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = dt[l][k][(i, j)];
                    for m in 0..n {
                        v -= gam[m][(l, k)] * t[m][(i, j)]
                            + gam[m][(l, i)] * t[k][(m, j)]
                            + gam[m][(l, j)] * t[k][(i, m)];
                    }
                    q[idx(l, k, i, j)] = v;
                }
            }
        }
    }
    // raise all indices, then contract
    let mut r = q.clone();
    for slot in 0..4 {
        let mut out = vec![0.0; r.len()];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut ids = [l, k, i, j];
                        let mut acc = 0.0;
                        let orig = ids[slot];
                        for m in 0..n {
                            ids[slot] = m;
                            acc += gi[(orig, m)] * r[idx(ids[0], ids[1], ids[2], ids[3])];
                        }
                        out[idx(l, k, i, j)] = acc;
                    }
                }
            }
        }
        r = out;
    }
    q.iter().zip(&r).map(|(a, b)| a * b).sum()
}

/// Product sphere S^k(rho cos u) x S^(n-k)(rho sin u) in chart coordinates
/// (v1 in R^k, v2 in R^(n-k)); `u` is the extra last coordinate of the map.
pub fn product_sphere_point(n: usize, k: usize, kc: f64, u: f64, v: &[f64]) -> DVector<f64> {
    let rho = 1.0 / kc.sqrt();
    let (w1, _, _) = omega_jet(&v[..k]);
    let (w2, _, _) = omega_jet(&v[k..n]);
    let mut out = DVector::zeros(n + 2);
    for i in 0..=k {
        out[i] = rho * u.cos() * w1[i];
    }
    for i in 0..=(n - k) {
        out[k + 1 + i] = rho * u.sin() * w2[i];
    }
    out
}

/// Oracle principal curvatures for the product sphere at chart origin, with the
/// normal oriented towards increasing u.
pub fn product_sphere_oracle(n: usize, k: usize, kc: f64, u: f64) -> Vec<f64> {
    let rho = 1.0 / kc.sqrt();
    let e = FdEmbedding {
        n,
        map: move |v: &[f64]| product_sphere_point(n, k, kc, u, v),
        orient: move |v: &[f64]| {
            let du = 1e-6;
            (product_sphere_point(n, k, kc, u + du, v) - product_sphere_point(n, k, kc, u - du, v)) / (2.0 * du)
        },
        step: 1e-3 * rho,
    };
    principal_curvatures(&e, &vec![0.0; n])
}
