//! Quadrature on the reference triangle and the reference edge.
//!
//! Rules are tensorized Gauss–Legendre points pushed through the collapsed
//! (Duffy) map of the unit square onto the triangle. This construction keeps
//! every weight positive and every node strictly inside the element at any
//! exactness order, which matters here: the weighted bilinear forms contain
//! `1/r` factors that must stay finite on triangles touching the rotation
//! axis, and right-hand sides may blow up as `r → 0`.
//!
//! # Reference elements
//!
//! * Triangle: `T̂ = {(x, y) : x ≥ 0, y ≥ 0, x + y ≤ 1}`, measure `1/2`.
//! * Edge: the unit interval `[0, 1]`, measure `1`.
//!
//! Rules are memoized per order in a process-wide cache, so repeated lookups
//! are cheap and safe to share across threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Point2;
use thiserror::Error;

/// Largest supported polynomial exactness order.
pub const MAX_ORDER: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature order {0} outside supported range 1..={MAX_ORDER}")]
    OrderOutOfRange(usize),
    #[error("degenerate element: measure {0:e} is not strictly positive")]
    DegenerateElement(f64),
}

/// Quadrature rule on the reference triangle.
///
/// Invariants, enforced by construction and re-checked in the property suite:
/// all weights are positive and sum to the reference area `1/2`; all nodes
/// have strictly positive barycentric coordinates; every bivariate monomial
/// of total degree ≤ `exactness_order` is integrated to relative accuracy
/// better than `1e-12`.
#[derive(Debug, Clone)]
pub struct QuadRule {
    /// Nodes in reference coordinates `(x, y)`, all strictly interior.
    pub points: Vec<[f64; 2]>,
    /// Positive weights summing to `1/2`.
    pub weights: Vec<f64>,
    /// Guaranteed polynomial exactness degree.
    pub exactness_order: usize,
}

/// Quadrature rule on the reference edge `[0, 1]`.
#[derive(Debug, Clone)]
pub struct EdgeQuadRule {
    /// Nodes in `(0, 1)`, strictly interior.
    pub points: Vec<f64>,
    /// Positive weights summing to `1`.
    pub weights: Vec<f64>,
    /// Guaranteed polynomial exactness degree.
    pub exactness_order: usize,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are the roots of the Legendre polynomial `P_m`, found by Newton
/// iteration on the three-term recurrence; the rule is exact for polynomials
/// of degree `2m - 1`.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Tricomi-style initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_m and its derivative via the recurrence
            // k·P_k = (2k-1)·x·P_{k-1} - (k-1)·P_{k-2}.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre(m);
    let nodes = nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
    let weights = weights.iter().map(|w| 0.5 * w).collect();
    (nodes, weights)
}

/// Returns the rule on the reference triangle exact for all polynomials of
/// total degree ≤ `order`.
///
/// The collapsed map is `x = u(1 - v)`, `y = v` with Jacobian `1 - v`; a
/// monomial `x^a y^b` with `a + b ≤ order` pulls back to a tensor polynomial
/// of degree `a ≤ order` in `u` and `a + b + 1 ≤ order + 1` in `v`, so
/// `m = ⌈(order + 2)/2⌉` Gauss points per direction suffice.
pub fn triangle_rule(order: usize) -> Result<Arc<QuadRule>, QuadratureError> {
    if order == 0 || order > MAX_ORDER {
        return Err(QuadratureError::OrderOutOfRange(order));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    let rule = cache.entry(order).or_insert_with(|| {
        let m = (order + 2).div_ceil(2);
        let (gu, gwu) = gauss_legendre_unit(m);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (v, wv) in gu.iter().zip(&gwu) {
            for (u, wu) in gu.iter().zip(&gwu) {
                points.push([u * (1.0 - v), *v]);
                weights.push(wu * wv * (1.0 - v));
            }
        }
        Arc::new(QuadRule {
            points,
            weights,
            exactness_order: order,
        })
    });
    Ok(Arc::clone(rule))
}

/// Returns the rule on `[0, 1]` exact for all polynomials of degree ≤ `order`.
pub fn edge_rule(order: usize) -> Result<Arc<EdgeQuadRule>, QuadratureError> {
    if order == 0 || order > MAX_ORDER {
        return Err(QuadratureError::OrderOutOfRange(order));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<EdgeQuadRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    let rule = cache.entry(order).or_insert_with(|| {
        let m = (order + 1).div_ceil(2);
        let (points, weights) = gauss_legendre_unit(m);
        Arc::new(EdgeQuadRule {
            points,
            weights,
            exactness_order: order,
        })
    });
    Ok(Arc::clone(rule))
}

impl QuadRule {
    /// Pushes the rule forward to the physical triangle `(p0, p1, p2)`.
    ///
    /// Physical weights sum to the triangle area.
    pub fn map_to_triangle(
        &self,
        p0: Point2<f64>,
        p1: Point2<f64>,
        p2: Point2<f64>,
    ) -> Result<(Vec<Point2<f64>>, Vec<f64>), QuadratureError> {
        let e1 = p1 - p0;
        let e2 = p2 - p0;
        let det = e1.x * e2.y - e1.y * e2.x;
        if det <= 0.0 {
            return Err(QuadratureError::DegenerateElement(det));
        }
        let points = self
            .points
            .iter()
            .map(|&[x, y]| p0 + e1 * x + e2 * y)
            .collect();
        let weights = self.weights.iter().map(|w| w * det).collect();
        Ok((points, weights))
    }
}

impl EdgeQuadRule {
    /// Pushes the rule forward to the physical segment from `a` to `b`.
    ///
    /// Physical weights sum to the segment length.
    pub fn map_to_segment(
        &self,
        a: Point2<f64>,
        b: Point2<f64>,
    ) -> Result<(Vec<Point2<f64>>, Vec<f64>), QuadratureError> {
        let len = (b - a).norm();
        if len <= 0.0 {
            return Err(QuadratureError::DegenerateElement(len));
        }
        let points = self.points.iter().map(|&s| a + (b - a) * s).collect();
        let weights = self.weights.iter().map(|w| w * len).collect();
        Ok((points, weights))
    }
}

/// Exact reference values for monomial integrals, used as the oracle the
/// quadrature rules are validated against.
pub mod oracle {
    use num::bigint::BigInt;
    use num::rational::BigRational;
    use num::ToPrimitive;

    fn factorial(n: usize) -> BigInt {
        let mut acc = BigInt::from(1);
        for k in 2..=n {
            acc *= BigInt::from(k);
        }
        acc
    }

    /// `∫_{T̂} x^a y^b dx dy = a! b! / (a + b + 2)!` on the reference triangle.
    pub fn triangle_monomial_integral(a: usize, b: usize) -> f64 {
        let num = factorial(a) * factorial(b);
        let den = factorial(a + b + 2);
        BigRational::new(num, den).to_f64().unwrap()
    }

    /// `∫_0^1 s^a ds = 1 / (a + 1)`.
    pub fn edge_monomial_integral(a: usize) -> f64 {
        1.0 / (a as f64 + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn integrate_monomial(rule: &QuadRule, a: usize, b: usize) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&[x, y], w)| w * x.powi(a as i32) * y.powi(b as i32))
            .sum()
    }

    #[test]
    fn rejects_orders_outside_range() {
        assert!(matches!(
            triangle_rule(0),
            Err(QuadratureError::OrderOutOfRange(0))
        ));
        assert!(matches!(
            triangle_rule(51),
            Err(QuadratureError::OrderOutOfRange(51))
        ));
        assert!(edge_rule(0).is_err());
        assert!(edge_rule(51).is_err());
    }

    #[test]
    fn constant_integrates_to_reference_area() {
        let rule = triangle_rule(1).unwrap();
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn weights_positive_and_nodes_strictly_interior() {
        for order in [1, 2, 3, 4, 7, 10, 20, 35, 50] {
            let rule = triangle_rule(order).unwrap();
            for (&[x, y], &w) in rule.points.iter().zip(&rule.weights) {
                assert!(w > 0.0, "order {order}: weight {w} not positive");
                let l0 = 1.0 - x - y;
                assert!(
                    x > 0.0 && y > 0.0 && l0 > 0.0,
                    "order {order}: node ({x}, {y}) not strictly interior"
                );
            }
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, 0.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn cubic_monomial_matches_exact_value() {
        let rule = triangle_rule(3).unwrap();
        assert_relative_eq!(
            integrate_monomial(&rule, 2, 1),
            1.0 / 60.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn order_fifty_matches_factorial_oracle() {
        let rule = triangle_rule(50).unwrap();
        let exact = oracle::triangle_monomial_integral(25, 25);
        assert_relative_eq!(integrate_monomial(&rule, 25, 25), exact, max_relative = 1e-12);
    }

    #[test]
    fn monomial_exactness_sweep_against_oracle() {
        for order in [1, 2, 3, 4, 5, 8, 10, 13, 20, 50] {
            let rule = triangle_rule(order).unwrap();
            for a in 0..=order {
                for b in 0..=(order - a) {
                    let exact = oracle::triangle_monomial_integral(a, b);
                    let approx = integrate_monomial(&rule, a, b);
                    assert!(
                        (approx - exact).abs() <= 1e-12 * exact.abs(),
                        "order {order}, x^{a} y^{b}: got {approx:e}, want {exact:e}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_rule_low_order_values() {
        let r1 = edge_rule(1).unwrap();
        let m1: f64 = r1.points.iter().zip(&r1.weights).map(|(s, w)| w * s).sum();
        assert_relative_eq!(m1, 0.5, max_relative = 1e-14);

        let r3 = edge_rule(3).unwrap();
        let m3: f64 = r3
            .points
            .iter()
            .zip(&r3.weights)
            .map(|(s, w)| w * s.powi(3))
            .sum();
        assert_relative_eq!(m3, 0.25, max_relative = 1e-14);

        let r9 = edge_rule(9).unwrap();
        let m9: f64 = r9
            .points
            .iter()
            .zip(&r9.weights)
            .map(|(s, w)| w * s.powi(9))
            .sum();
        assert_relative_eq!(m9, 0.1, epsilon = 1e-14);
    }

    #[test]
    fn edge_rule_exactness_sweep() {
        for order in 1..=50 {
            let rule = edge_rule(order).unwrap();
            for a in 0..=order {
                let exact = oracle::edge_monomial_integral(a);
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(s, w)| w * s.powi(a as i32))
                    .sum();
                assert!(
                    (approx - exact).abs() <= 1e-12 * exact,
                    "order {order}, s^{a}: got {approx:e}, want {exact:e}"
                );
            }
        }
    }

    #[test]
    fn identity_map_preserves_rule() {
        let rule = triangle_rule(4).unwrap();
        let (points, weights) = rule
            .map_to_triangle(
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            )
            .unwrap();
        for (p, &[x, y]) in points.iter().zip(&rule.points) {
            assert_relative_eq!(p.x, x, epsilon = 1e-15);
            assert_relative_eq!(p.y, y, epsilon = 1e-15);
        }
        let total: f64 = weights.iter().sum();
        assert_relative_eq!(total, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn physical_weights_sum_to_area_and_length() {
        let rule = triangle_rule(2).unwrap();
        let (_, weights) = rule
            .map_to_triangle(
                Point2::new(0.2, 0.1),
                Point2::new(1.7, 0.3),
                Point2::new(0.5, 2.1),
            )
            .unwrap();
        let area = 0.5 * ((1.7 - 0.2) * (2.1 - 0.1) - (0.3 - 0.1) * (0.5 - 0.2));
        let total: f64 = weights.iter().sum();
        assert_relative_eq!(total, area, max_relative = 1e-14);

        let erule = edge_rule(2).unwrap();
        let (_, ew) = erule
            .map_to_segment(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0))
            .unwrap();
        let elen: f64 = ew.iter().sum();
        assert_relative_eq!(elen, 5.0, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_elements_are_rejected() {
        let rule = triangle_rule(2).unwrap();
        let p = Point2::new(0.0, 0.0);
        assert!(matches!(
            rule.map_to_triangle(p, Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)),
            Err(QuadratureError::DegenerateElement(_))
        ));
        let erule = edge_rule(2).unwrap();
        assert!(erule.map_to_segment(p, p).is_err());
    }

    #[test]
    fn rules_are_deterministic() {
        let a = triangle_rule(10).unwrap();
        let b = triangle_rule(10).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.weights, b.weights);
    }
}
