//! Gauss quadrature on the unit segment and the reference triangle.
//!
//! Segment rules live on `[0, 1]`, triangle rules on the reference triangle
//! with vertices `(0,0)`, `(1,0)`, `(0,1)`. Reference weights therefore sum
//! to 1 (segment) and 1/2 (triangle). Mapped iteration scales weights by the
//! physical edge length resp. twice the physical triangle area, so mapped
//! weights sum to the measure of the physical domain.

use crate::vec2;
use crate::{CfoError, Point, Result};

/// Gauss rule on the unit segment `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SegmentRule {
    points: Vec<f64>,
    weights: Vec<f64>,
    degree: usize,
}

/// Quadrature rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    points: Vec<Point>,
    weights: Vec<f64>,
    degree: usize,
}

/// Gauss-Legendre rule with `order` points on `[0, 1]`; exact through
/// polynomial degree `2*order - 1`. Supported orders: 2, 3, 5.
pub fn segment_rule(order: usize) -> Result<SegmentRule> {
    // Nodes/weights are the classical closed forms on [-1, 1], mapped by
    // x -> (1 + x)/2, w -> w/2.
    let (points, weights) = match order {
        2 => {
            let d = 0.5 / f64::sqrt(3.0);
            (vec![0.5 - d, 0.5 + d], vec![0.5, 0.5])
        }
        3 => {
            let d = 0.5 * f64::sqrt(0.6);
            (
                vec![0.5 - d, 0.5, 0.5 + d],
                vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            )
        }
        5 => {
            let a = f64::sqrt(5.0 - 2.0 * f64::sqrt(10.0 / 7.0)) / 3.0;
            let b = f64::sqrt(5.0 + 2.0 * f64::sqrt(10.0 / 7.0)) / 3.0;
            let wa = (322.0 + 13.0 * f64::sqrt(70.0)) / 900.0;
            let wb = (322.0 - 13.0 * f64::sqrt(70.0)) / 900.0;
            let w0 = 128.0 / 225.0;
            (
                vec![
                    0.5 * (1.0 - b),
                    0.5 * (1.0 - a),
                    0.5,
                    0.5 * (1.0 + a),
                    0.5 * (1.0 + b),
                ],
                vec![0.5 * wb, 0.5 * wa, 0.5 * w0, 0.5 * wa, 0.5 * wb],
            )
        }
        other => {
            return Err(CfoError::UnsupportedRule {
                kind: "segment",
                requested: other,
            })
        }
    };
    Ok(SegmentRule {
        points,
        weights,
        degree: 2 * order - 1,
    })
}

/// Symmetric triangle rule exact through polynomial `degree`. Supported
/// degrees: 2 (3 points), 4 (6 points), 5 (7 points).
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    let (points, weights): (Vec<Point>, Vec<f64>) = match degree {
        2 => {
            let a = 1.0 / 6.0;
            let b = 2.0 / 3.0;
            (vec![[a, a], [b, a], [a, b]], vec![a, a, a])
        }
        4 => {
            // Two symmetric orbits; weights below are normalized to sum to 1
            // and scaled by the reference area 1/2 when stored.
            let a1 = 0.445_948_490_915_965;
            let w1 = 0.223_381_589_678_011;
            let a2 = 0.091_576_213_509_771;
            let w2 = 0.109_951_743_655_322;
            let mut points = Vec::with_capacity(6);
            let mut weights = Vec::with_capacity(6);
            for (a, w) in [(a1, w1), (a2, w2)] {
                let b = 1.0 - 2.0 * a;
                points.extend_from_slice(&[[a, a], [b, a], [a, b]]);
                weights.extend_from_slice(&[0.5 * w, 0.5 * w, 0.5 * w]);
            }
            (points, weights)
        }
        5 => {
            let s15 = f64::sqrt(15.0);
            let a1 = (6.0 - s15) / 21.0;
            let w1 = (155.0 - s15) / 1200.0;
            let a2 = (6.0 + s15) / 21.0;
            let w2 = (155.0 + s15) / 1200.0;
            let third = 1.0 / 3.0;
            let mut points = vec![[third, third]];
            let mut weights = vec![0.5 * (9.0 / 40.0)];
            for (a, w) in [(a1, w1), (a2, w2)] {
                let b = 1.0 - 2.0 * a;
                points.extend_from_slice(&[[a, a], [b, a], [a, b]]);
                weights.extend_from_slice(&[0.5 * w, 0.5 * w, 0.5 * w]);
            }
            (points, weights)
        }
        other => {
            return Err(CfoError::UnsupportedRule {
                kind: "triangle",
                requested: other,
            })
        }
    };
    Ok(TriangleRule {
        points,
        weights,
        degree,
    })
}

impl SegmentRule {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Visit the rule mapped to the segment `a -> b`; weights carry the
    /// physical length, so they sum to `|b - a|`.
    pub fn for_each_mapped(&self, a: Point, b: Point, mut visit: impl FnMut(Point, f64)) {
        let len = vec2::norm(vec2::sub(b, a));
        for (&t, &w) in self.points.iter().zip(&self.weights) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            visit(x, w * len);
        }
    }

    /// Integrate `f` along the segment `a -> b`.
    pub fn integrate_mapped(&self, a: Point, b: Point, f: impl Fn(Point) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_mapped(a, b, |x, w| acc += w * f(x));
        acc
    }
}

impl TriangleRule {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Visit the rule mapped to the triangle `(p0, p1, p2)`; weights carry
    /// the affine Jacobian, so they sum to the physical area.
    pub fn for_each_mapped(
        &self,
        p0: Point,
        p1: Point,
        p2: Point,
        mut visit: impl FnMut(Point, f64),
    ) {
        let e1 = vec2::sub(p1, p0);
        let e2 = vec2::sub(p2, p0);
        // Weights are defined on the reference triangle of area 1/2; the map
        // scales areas by |jac|.
        let jac = vec2::cross(e1, e2).abs();
        for (&[r, s], &w) in self.points.iter().zip(&self.weights) {
            let x = [
                p0[0] + r * e1[0] + s * e2[0],
                p0[1] + r * e1[1] + s * e2[1],
            ];
            visit(x, w * jac);
        }
    }

    /// Integrate `f` over the triangle `(p0, p1, p2)`.
    pub fn integrate_mapped(
        &self,
        p0: Point,
        p1: Point,
        p2: Point,
        f: impl Fn(Point) -> f64,
    ) -> f64 {
        let mut acc = 0.0;
        self.for_each_mapped(p0, p1, p2, |x, w| acc += w * f(x));
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    /// Exact integral of `x^k` over `[0, 1]`.
    fn segment_monomial_exact(k: usize) -> f64 {
        1.0 / (k as f64 + 1.0)
    }

    /// Exact integral of `x^i y^j` over the reference triangle, via
    /// `i! j! / (i + j + 2)!`.
    fn triangle_monomial_exact(i: usize, j: usize) -> f64 {
        let mut v = 1.0;
        // i! j! / (i+j+2)! computed as a product of ratios to stay exact in
        // f64 for the small exponents used here.
        for k in 1..=(i + j + 2) {
            v /= k as f64;
        }
        for k in 1..=i {
            v *= k as f64;
        }
        for k in 1..=j {
            v *= k as f64;
        }
        v
    }

    #[test]
    fn unsupported_rules_are_rejected() {
        assert!(matches!(
            segment_rule(4),
            Err(CfoError::UnsupportedRule { requested: 4, .. })
        ));
        assert!(matches!(
            triangle_rule(3),
            Err(CfoError::UnsupportedRule { requested: 3, .. })
        ));
    }

    #[test]
    fn segment_weights_sum_to_one_and_are_positive() {
        for order in [2, 3, 5] {
            let rule = segment_rule(order).unwrap();
            assert_eq!(rule.points().len(), order);
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-15, "order {order}: sum {sum}");
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            assert!(rule
                .points()
                .iter()
                .all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn triangle_weights_sum_to_area_and_are_positive() {
        for degree in [2, 4, 5] {
            let rule = triangle_rule(degree).unwrap();
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 0.5).abs() < 1e-15, "degree {degree}: sum {sum}");
            assert!(rule.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn segment_rules_integrate_reference_monomials_exactly() {
        for order in [2usize, 3, 5] {
            let rule = segment_rule(order).unwrap();
            for k in 0..=rule.degree() {
                let got: f64 = rule
                    .points()
                    .iter()
                    .zip(rule.weights())
                    .map(|(&x, &w)| w * x.powi(k as i32))
                    .sum();
                let want = segment_monomial_exact(k);
                assert!(
                    rel_close(got, want, 1e-14),
                    "order {order}, x^{k}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn triangle_rules_integrate_reference_monomials_exactly() {
        for degree in [2usize, 4, 5] {
            let rule = triangle_rule(degree).unwrap();
            for i in 0..=degree {
                for j in 0..=(degree - i) {
                    let got: f64 = rule
                        .points()
                        .iter()
                        .zip(rule.weights())
                        .map(|(&[x, y], &w)| w * x.powi(i as i32) * y.powi(j as i32))
                        .sum();
                    let want = triangle_monomial_exact(i, j);
                    assert!(
                        rel_close(got, want, 1e-14),
                        "degree {degree}, x^{i} y^{j}: {got} vs {want}"
                    );
                }
            }
        }
    }

    /// Frozen spot values: `x^2 y^2` integrates to 1/180 (degree-4 rule) and
    /// `x^5` to 1/42 (degree-5 rule) over the reference triangle.
    #[test]
    fn triangle_rule_spot_values() {
        let deg4 = triangle_rule(4).unwrap();
        let got: f64 = deg4
            .points()
            .iter()
            .zip(deg4.weights())
            .map(|(&[x, y], &w)| w * x * x * y * y)
            .sum();
        assert!(rel_close(got, 1.0 / 180.0, 1e-14), "x^2 y^2: {got}");

        let deg5 = triangle_rule(5).unwrap();
        let got: f64 = deg5
            .points()
            .iter()
            .zip(deg5.weights())
            .map(|(&[x, _], &w)| w * x.powi(5))
            .sum();
        assert!(rel_close(got, 1.0 / 42.0, 1e-14), "x^5: {got}");
    }

    /// Integral of `x^i y^j` along the segment `a -> b` (with respect to arc
    /// length), evaluated by expanding the parameterized integrand into a 1-D
    /// polynomial in `t` and integrating term by term. Independent of any
    /// Gauss weights.
    fn segment_monomial_oracle(a: [f64; 2], b: [f64; 2], i: usize, j: usize) -> f64 {
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        // Coefficients of (a + t d)^k via binomial expansion.
        let expand = |a0: f64, d: f64, k: usize| -> Vec<f64> {
            let mut c = vec![0.0; k + 1];
            let mut binom = 1.0;
            for m in 0..=k {
                // binom = C(k, m)
                c[m] = binom * a0.powi((k - m) as i32) * d.powi(m as i32);
                binom = binom * (k - m) as f64 / (m + 1) as f64;
            }
            c
        };
        let cx = expand(a[0], b[0] - a[0], i);
        let cy = expand(a[1], b[1] - a[1], j);
        let mut total = 0.0;
        for (mx, &vx) in cx.iter().enumerate() {
            for (my, &vy) in cy.iter().enumerate() {
                total += vx * vy / (mx + my + 1) as f64;
            }
        }
        total * len
    }

    /// Integral of `x^i y^j` over the triangle `(p0, p1, p2)` via the
    /// divergence theorem: the area integral equals the boundary integral of
    /// `x^(i+1) y^j / (i+1) * n_x`, which reduces to segment monomial
    /// integrals handled by `segment_monomial_oracle`.
    fn triangle_monomial_oracle(p: [[f64; 2]; 3], i: usize, j: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..3 {
            let a = p[k];
            let b = p[(k + 1) % 3];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            if len == 0.0 {
                continue;
            }
            // Outward normal x-component for CCW traversal.
            let nx = (b[1] - a[1]) / len;
            total += nx * segment_monomial_oracle(a, b, i + 1, j) / (i + 1) as f64;
        }
        total
    }

    proptest! {
        #[test]
        fn mapped_segment_rules_are_polynomially_exact(
            order in prop::sample::select(vec![2usize, 3, 5]),
            ax in -2.0..2.0f64, ay in -2.0..2.0f64,
            bx in -2.0..2.0f64, by in -2.0..2.0f64,
            i in 0usize..4, j in 0usize..4,
        ) {
            let a = [ax, ay];
            let b = [bx, by];
            prop_assume!(vec2::norm(vec2::sub(b, a)) > 1e-3);
            let rule = segment_rule(order).unwrap();
            prop_assume!(i + j <= rule.degree());
            let got = rule.integrate_mapped(a, b, |[x, y]| {
                x.powi(i as i32) * y.powi(j as i32)
            });
            let want = segment_monomial_oracle(a, b, i, j);
            prop_assert!(
                rel_close(got, want, 1e-12),
                "order {} x^{} y^{}: {} vs {}", order, i, j, got, want
            );
        }

        #[test]
        fn mapped_triangle_rules_are_polynomially_exact(
            degree in prop::sample::select(vec![2usize, 4, 5]),
            x0 in -2.0..2.0f64, y0 in -2.0..2.0f64,
            x1 in -2.0..2.0f64, y1 in -2.0..2.0f64,
            x2 in -2.0..2.0f64, y2 in -2.0..2.0f64,
            i in 0usize..6, j in 0usize..6,
        ) {
            let mut p = [[x0, y0], [x1, y1], [x2, y2]];
            let two_area = vec2::cross(vec2::sub(p[1], p[0]), vec2::sub(p[2], p[0]));
            prop_assume!(two_area.abs() > 1e-2);
            if two_area < 0.0 {
                p.swap(1, 2); // orient counterclockwise
            }
            let i = i.min(degree);
            let j = j.min(degree - i);
            let rule = triangle_rule(degree).unwrap();
            let got = rule.integrate_mapped(p[0], p[1], p[2], |[x, y]| {
                x.powi(i as i32) * y.powi(j as i32)
            });
            let want = triangle_monomial_oracle(p, i, j);
            prop_assert!(
                rel_close(got, want, 1e-12),
                "degree {} x^{} y^{}: {} vs {}", degree, i, j, got, want
            );
        }
    }
}
