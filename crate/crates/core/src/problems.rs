//! Registry of the verification problems: two scalar transport problems and
//! two flow problems with manufactured exact solutions (the forcing terms
//! are hand-derived closed forms), plus the lid-driven cavity. Also hosts
//! the L2 error functional and the convergence-order reduction.

use std::f64::consts::PI;

use crate::cd::CdProblem;
use crate::error::{Error, Result};
use crate::ns::NsProblem;
use crate::quadrature::triangle_error_norm;
use crate::space::FeSpace;

/// Identifiers of the built-in problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemId {
    /// Transport of e^{2 pi t} sin(2 pi x) sin(2 pi y) by b = (1, -1),
    /// eps = 1e-8, c = 1.
    CdExample1,
    /// Transport of t^2 cos(x y^2) by b = (2, -1), eps = 1e-8, c = 1.
    CdExample2,
    /// Flow with polynomial vortex velocity and p = (x^2 - y^2) cos t.
    NsExample3 { re: f64 },
    /// Flow with u = (t^3 y^2, t^2 x), exactly representable in the
    /// quadratic/linear pair: all error is temporal.
    NsExample4 { re: f64 },
    /// Lid-driven cavity at the given Reynolds number.
    Cavity { re: f64 },
}

pub enum Problem {
    Cd(CdProblem),
    Ns(NsProblem),
}

pub fn make_problem(id: ProblemId) -> Problem {
    match id {
        ProblemId::CdExample1 => Problem::Cd(cd_example1()),
        ProblemId::CdExample2 => Problem::Cd(cd_example2()),
        ProblemId::NsExample3 { re } => Problem::Ns(ns_example3(re)),
        ProblemId::NsExample4 { re } => Problem::Ns(ns_example4(re)),
        ProblemId::Cavity { re } => Problem::Ns(cavity(re)),
    }
}

/// Like `make_problem`, with an overridden diffusion coefficient for the
/// transport problems (their forcing terms are regenerated accordingly).
/// Flow problems ignore the override.
pub fn make_problem_with_eps(id: ProblemId, eps: Option<f64>) -> Problem {
    match (id, eps) {
        (ProblemId::CdExample1, Some(e)) => Problem::Cd(cd_example1_with_eps(e)),
        (ProblemId::CdExample2, Some(e)) => Problem::Cd(cd_example2_with_eps(e)),
        (id, _) => make_problem(id),
    }
}

pub fn cd_example1() -> CdProblem {
    cd_example1_with_eps(1e-8)
}

/// The first transport problem with a configurable diffusion coefficient;
/// the forcing term is regenerated so the exact solution still holds.
pub fn cd_example1_with_eps(eps: f64) -> CdProblem {
    let u = |x: f64, y: f64, t: f64| (2.0 * PI * t).exp() * (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
    CdProblem {
        b: Box::new(|_, _, _| [1.0, -1.0]),
        div_b: Box::new(|_, _, _| 0.0),
        eps,
        c: Box::new(|_, _, _| 1.0),
        f: None,
        g: Box::new(move |x, y, t| {
            let e = (2.0 * PI * t).exp();
            let (sx, cx) = (2.0 * PI * x).sin_cos();
            let (sy, cy) = (2.0 * PI * y).sin_cos();
            // u_t + b . grad u + c u - eps lap u
            let u = e * sx * sy;
            let ut = 2.0 * PI * u;
            let ux = 2.0 * PI * e * cx * sy;
            let uy = 2.0 * PI * e * sx * cy;
            let lap = -8.0 * PI * PI * u;
            ut + (ux - uy) + u - eps * lap
        }),
        u_b: Box::new(u),
        u_0: Box::new(move |x, y, _| u(x, y, 0.0)),
        exact: Some(Box::new(u)),
        b_time_independent: true,
        coeffs_time_independent: true,
    }
}

pub fn cd_example2() -> CdProblem {
    cd_example2_with_eps(1e-8)
}

pub fn cd_example2_with_eps(eps: f64) -> CdProblem {
    let u = |x: f64, y: f64, t: f64| t * t * (x * y * y).cos();
    CdProblem {
        b: Box::new(|_, _, _| [2.0, -1.0]),
        div_b: Box::new(|_, _, _| 0.0),
        eps,
        c: Box::new(|_, _, _| 1.0),
        f: None,
        g: Box::new(move |x, y, t| {
            let w = x * y * y;
            let (sw, cw) = w.sin_cos();
            let t2 = t * t;
            let ut = 2.0 * t * cw;
            let ux = -t2 * y * y * sw;
            let uy = -2.0 * t2 * x * y * sw;
            let uxx = -t2 * y.powi(4) * cw;
            let uyy = -t2 * (2.0 * x * sw + 4.0 * x * x * y * y * cw);
            ut + (2.0 * ux - uy) + t2 * cw - eps * (uxx + uyy)
        }),
        u_b: Box::new(u),
        u_0: Box::new(move |x, y, _| u(x, y, 0.0)),
        exact: Some(Box::new(u)),
        b_time_independent: true,
        coeffs_time_independent: true,
    }
}

// One-dimensional factor polynomials of the vortex velocity field and
// their derivatives: u1 = 10 a(x) b(y) cos t, u2 = -10 c(x) d(y) cos t.
mod vortex {
    pub fn a(x: f64) -> f64 {
        x * x * (x - 1.0) * (x - 1.0)
    }
    pub fn da(x: f64) -> f64 {
        2.0 * x * (x - 1.0) * (2.0 * x - 1.0)
    }
    pub fn dda(x: f64) -> f64 {
        12.0 * x * x - 12.0 * x + 2.0
    }
    pub fn c(x: f64) -> f64 {
        x * (x - 1.0) * (2.0 * x - 1.0)
    }
    pub fn dc(x: f64) -> f64 {
        6.0 * x * x - 6.0 * x + 1.0
    }
    pub fn ddc(x: f64) -> f64 {
        12.0 * x - 6.0
    }
    pub fn b(y: f64) -> f64 {
        y * (y - 1.0) * (2.0 * y - 1.0)
    }
    pub fn db(y: f64) -> f64 {
        6.0 * y * y - 6.0 * y + 1.0
    }
    pub fn ddb(y: f64) -> f64 {
        12.0 * y - 6.0
    }
    pub fn d(y: f64) -> f64 {
        y * y * (y - 1.0) * (y - 1.0)
    }
    pub fn dd(y: f64) -> f64 {
        2.0 * y * (y - 1.0) * (2.0 * y - 1.0)
    }
    pub fn ddd(y: f64) -> f64 {
        12.0 * y * y - 12.0 * y + 2.0
    }
}

pub fn ns_example3(re: f64) -> NsProblem {
    use vortex::*;
    let vel = |x: f64, y: f64, t: f64| {
        let tau = t.cos();
        [10.0 * a(x) * b(y) * tau, -10.0 * c(x) * d(y) * tau]
    };
    let pres = |x: f64, y: f64, t: f64| (x * x - y * y) * t.cos();
    NsProblem {
        re,
        g: Box::new(move |x, y, t| {
            let tau = t.cos();
            let dtau = -t.sin();
            let (av, dav, ddav) = (a(x), da(x), dda(x));
            let (bv, dbv, ddbv) = (b(y), db(y), ddb(y));
            let (cv, dcv, ddcv) = (c(x), dc(x), ddc(x));
            let (dv, ddv_, dddv) = (d(y), dd(y), ddd(y));
            let u1 = 10.0 * av * bv * tau;
            let u2 = -10.0 * cv * dv * tau;
            let u1t = 10.0 * av * bv * dtau;
            let u2t = -10.0 * cv * dv * dtau;
            let u1x = 10.0 * dav * bv * tau;
            let u1y = 10.0 * av * dbv * tau;
            let u2x = -10.0 * dcv * dv * tau;
            let u2y = -10.0 * cv * ddv_ * tau;
            let lap1 = 10.0 * (ddav * bv + av * ddbv) * tau;
            let lap2 = -10.0 * (ddcv * dv + cv * dddv) * tau;
            let conv1 = u1 * u1x + u2 * u1y;
            let conv2 = u1 * u2x + u2 * u2y;
            let px = 2.0 * x * tau;
            let py = -2.0 * y * tau;
            [
                u1t + conv1 - lap1 / re + px,
                u2t + conv2 - lap2 / re + py,
            ]
        }),
        u_b: Box::new(vel),
        u_0: Box::new(move |x, y, _| vel(x, y, 0.0)),
        exact_velocity: Some(Box::new(vel)),
        exact_pressure: Some(Box::new(pres)),
        ub_time_independent: false,
    }
}

pub fn ns_example4(re: f64) -> NsProblem {
    let vel = |x: f64, y: f64, t: f64| [t.powi(3) * y * y, t * t * x];
    let pres = |x: f64, y: f64, t: f64| t * x + y - (t + 1.0) / 2.0;
    NsProblem {
        re,
        g: Box::new(move |x, y, t| {
            let t2 = t * t;
            let t3 = t2 * t;
            let t5 = t2 * t3;
            [
                3.0 * t2 * y * y + 2.0 * t5 * x * y - 2.0 * t3 / re + t,
                2.0 * t * x + t5 * y * y + 1.0,
            ]
        }),
        u_b: Box::new(vel),
        u_0: Box::new(move |x, y, _| vel(x, y, 0.0)),
        exact_velocity: Some(Box::new(vel)),
        exact_pressure: Some(Box::new(pres)),
        ub_time_independent: false,
    }
}

/// Lid-driven cavity: unit tangential velocity on the top wall (corner
/// nodes take the lid value), no-slip elsewhere, zero body force.
pub fn cavity(re: f64) -> NsProblem {
    NsProblem {
        re,
        g: Box::new(|_, _, _| [0.0, 0.0]),
        u_b: Box::new(|_, y, _| if y == 1.0 { [1.0, 0.0] } else { [0.0, 0.0] }),
        u_0: Box::new(|_, _, _| [0.0, 0.0]),
        exact_velocity: None,
        exact_pressure: None,
        ub_time_independent: true,
    }
}

/// L2 norm of (field - exact(., t)) over the domain, by high-order element
/// quadrature (degree 8, covering twice the squared-polynomial degree of
/// both P1 and P2 fields).
pub fn l2_error<F>(field: &[f64], space: &FeSpace, exact: F, t: f64) -> f64
where
    F: Fn(f64, f64, f64) -> f64,
{
    assert_eq!(space.components, 1);
    let rule = triangle_error_norm();
    let mut total = 0.0;
    for k in 0..space.mesh.n_triangles() {
        let nodes = space.cell_nodes(k);
        let scale = 2.0 * space.geom(k).area;
        for (q, &l) in rule.points.iter().enumerate() {
            let (s, nl) = space.shape(l);
            let mut uh = 0.0;
            for i in 0..nl {
                uh += field[nodes[i]] * s[i];
            }
            let v = space.mesh.triangle_vertices(k);
            let x = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let y = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            let d = uh - exact(x, y, t);
            total += scale * rule.weights[q] * d * d;
        }
    }
    total.sqrt()
}

/// L2 norm of a vector-field error: root of the summed componentwise
/// squares.
pub fn l2_error_vector<F>(field: &[f64], space: &FeSpace, exact: F, t: f64) -> f64
where
    F: Fn(f64, f64, f64) -> [f64; 2],
{
    assert_eq!(space.components, 2);
    let rule = triangle_error_norm();
    let mut total = 0.0;
    for k in 0..space.mesh.n_triangles() {
        let nodes = space.cell_nodes(k);
        let scale = 2.0 * space.geom(k).area;
        for (q, &l) in rule.points.iter().enumerate() {
            let (s, nl) = space.shape(l);
            let mut uh = [0.0f64; 2];
            for i in 0..nl {
                for c in 0..2 {
                    uh[c] += field[2 * nodes[i] + c] * s[i];
                }
            }
            let v = space.mesh.triangle_vertices(k);
            let x = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let y = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            let e = exact(x, y, t);
            let d0 = uh[0] - e[0];
            let d1 = uh[1] - e[1];
            total += scale * rule.weights[q] * (d0 * d0 + d1 * d1);
        }
    }
    total.sqrt()
}

/// L2 norm of an analytic scalar function over the unit square, on the
/// mesh's quadrature (used for relative errors).
pub fn l2_norm_exact<F>(space: &FeSpace, exact: F, t: f64) -> f64
where
    F: Fn(f64, f64, f64) -> f64,
{
    let rule = triangle_error_norm();
    let mut total = 0.0;
    for k in 0..space.mesh.n_triangles() {
        let scale = 2.0 * space.geom(k).area;
        for (q, &l) in rule.points.iter().enumerate() {
            let v = space.mesh.triangle_vertices(k);
            let x = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let y = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            let e = exact(x, y, t);
            total += scale * rule.weights[q] * e * e;
        }
    }
    total.sqrt()
}

pub fn l2_norm_exact_vector<F>(space: &FeSpace, exact: F, t: f64) -> f64
where
    F: Fn(f64, f64, f64) -> [f64; 2],
{
    let rule = triangle_error_norm();
    let mut total = 0.0;
    for k in 0..space.mesh.n_triangles() {
        let scale = 2.0 * space.geom(k).area;
        for (q, &l) in rule.points.iter().enumerate() {
            let v = space.mesh.triangle_vertices(k);
            let x = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let y = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            let e = exact(x, y, t);
            total += scale * rule.weights[q] * (e[0] * e[0] + e[1] * e[1]);
        }
    }
    total.sqrt()
}

/// Observed orders log2(e_{k-1} / e_k) for a halving resolution ladder.
pub fn convergence_order(errors: &[(f64, f64)]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::invalid("need at least two rungs to compute orders"));
    }
    for &(_, e) in errors {
        if e <= 0.0 {
            return Err(Error::invalid(format!("non-positive error {e}")));
        }
    }
    Ok(errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).log2())
        .collect())
}
