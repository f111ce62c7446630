//! Quadrature rules on the reference triangle and on edges.
//!
//! Triangle rules store barycentric points and weights that sum to the
//! reference area 1/2, so an integral over a physical element K is
//! `sum_q (2 |K| w_q) f(x_q)`; assembly folds the `2 |K|` factor into the
//! weight once per element.

use crate::error::{Error, Result};

/// Symmetric quadrature rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates (l0, l1, l2) of each point.
    pub points: Vec<[f64; 3]>,
    /// Reference-area weights; they sum to 1/2.
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn from_orbits(exact_degree: usize, orbits: &[Orbit]) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for orbit in orbits {
            match *orbit {
                Orbit::Three(a, w) => {
                    let b = 1.0 - 2.0 * a;
                    for p in [[b, a, a], [a, b, a], [a, a, b]] {
                        points.push(p);
                        weights.push(w * 0.5);
                    }
                }
                Orbit::Six(a, b, w) => {
                    let c = 1.0 - a - b;
                    for p in [
                        [c, a, b],
                        [c, b, a],
                        [a, c, b],
                        [b, c, a],
                        [a, b, c],
                        [b, a, c],
                    ] {
                        points.push(p);
                        weights.push(w * 0.5);
                    }
                }
            }
        }
        QuadratureRule {
            points,
            weights,
            exact_degree,
        }
    }
}

enum Orbit {
    /// Three permutations of (1-2a, a, a).
    Three(f64, f64),
    /// Six permutations of (1-a-b, a, b).
    Six(f64, f64, f64),
}

/// 6-point rule, exact through degree 4. Used for linear-element forms.
pub fn triangle_degree4() -> QuadratureRule {
    QuadratureRule::from_orbits(
        4,
        &[
            Orbit::Three(0.445948490915965, 0.223381589678011),
            Orbit::Three(0.091576213509771, 0.109951743655322),
        ],
    )
}

/// 12-point rule, exact through degree 6. Used for quadratic elements and
/// the Taylor-Hood forms.
pub fn triangle_degree6() -> QuadratureRule {
    QuadratureRule::from_orbits(
        6,
        &[
            Orbit::Three(0.063089014491502, 0.050844906370207),
            Orbit::Three(0.249286745170910, 0.116786275726379),
            Orbit::Six(0.310352451033785, 0.053145049844816, 0.082851075618374),
        ],
    )
}

/// Collapsed tensor-Gauss (Duffy) rule with `n`x`n` points, exact for all
/// polynomials of total degree <= 2n - 2. Built from 1D Gauss-Legendre
/// nodes, so it needs no tabulated triangle data; used for error norms and
/// as an independent cross-check of the tabulated rules.
pub fn triangle_duffy(n: usize) -> QuadratureRule {
    let (nodes, weights) = gauss_legendre_01(n);
    let mut points = Vec::with_capacity(n * n);
    let mut wts = Vec::with_capacity(n * n);
    for (i, &u) in nodes.iter().enumerate() {
        for (j, &v) in nodes.iter().enumerate() {
            // (u, v) in [0,1]^2 -> (x, y) = (u(1-v), v), Jacobian 1-v.
            let x = u * (1.0 - v);
            let y = v;
            points.push([1.0 - x - y, x, y]);
            wts.push(weights[i] * weights[j] * (1.0 - v));
        }
    }
    QuadratureRule {
        points,
        weights: wts,
        exact_degree: 2 * n - 2,
    }
}

/// Rule for L2 error norms: degree 14, comfortably above the 2*(2*degree)
/// floor quadratic fields need, so norm truncation stays near rounding.
pub fn triangle_error_norm() -> QuadratureRule {
    triangle_duffy(8)
}

/// 3-point Gauss rule on [0, 1]: (position, weight) pairs, exact through
/// degree 5. Used for boundary line integrals.
pub fn edge_gauss3() -> [(f64, f64); 3] {
    let s = (0.6f64).sqrt(); // sqrt(3/5)
    [
        (0.5 * (1.0 - s), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 * (1.0 + s), 5.0 / 18.0),
    ]
}

/// Gauss-Legendre nodes and weights on [0, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Initial guess (Chebyshev-like) on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1]; nodes come out in decreasing x.
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
pub fn reference_monomial_integral(a: u32, b: u32) -> f64 {
    let mut val = 1.0f64;
    // a! b! / (a+b+2)! computed as a running product to avoid overflow.
    for k in 1..=(a + b + 2) {
        val /= k as f64;
    }
    for k in 1..=a {
        val *= k as f64;
    }
    for k in 1..=b {
        val *= k as f64;
    }
    val
}

/// Check that a rule integrates every monomial up to its stated degree.
pub fn verify_exactness(rule: &QuadratureRule, rel_tol: f64) -> Result<()> {
    for deg in 0..=rule.exact_degree as u32 {
        for a in 0..=deg {
            let b = deg - a;
            let mut approx = 0.0;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let (x, y) = (p[1], p[2]);
                approx += w * x.powi(a as i32) * y.powi(b as i32);
            }
            let exact = reference_monomial_integral(a, b);
            if (approx - exact).abs() > rel_tol * exact.abs() {
                return Err(Error::invalid(format!(
                    "quadrature rule (degree {}) misintegrates x^{} y^{}: {} vs {}",
                    rule.exact_degree, a, b, approx, exact
                )));
            }
        }
    }
    Ok(())
}
