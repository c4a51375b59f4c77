//! Gauss–Legendre rules on segments and collapsed-product rules on triangles.

use crate::error::{Error, Result};
use crate::Point;

pub const MAX_DEGREE: usize = 10;

/// Gauss–Legendre nodes and weights on [-1, 1] with `n` points (exact to degree 2n-1).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess followed by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn check_degree(degree: usize) -> Result<()> {
    if (1..=MAX_DEGREE).contains(&degree) {
        Ok(())
    } else {
        Err(Error::QuadratureDegree(degree))
    }
}

/// Rule on the unit interval [0, 1], exact to `degree`. Weights sum to 1.
pub fn unit_interval_rule(degree: usize) -> Result<Vec<(f64, f64)>> {
    check_degree(degree)?;
    let n = degree / 2 + 1;
    Ok(gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect())
}

/// Points and weights on the segment `a`–`b`; weights sum to its length.
pub fn segment_rule(a: Point, b: Point, degree: usize) -> Result<Vec<(Point, f64)>> {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    Ok(unit_interval_rule(degree)?
        .into_iter()
        .map(|(t, w)| ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], w * len))
        .collect())
}

/// Barycentric points `(l0, l1, l2)` and weights on the reference triangle, weights summing to 1.
///
/// Degrees 1 and 2 use the centroid and edge-midpoint rules; higher degrees use a
/// Gauss–Legendre product rule collapsed onto the triangle.
pub fn reference_triangle_rule(degree: usize) -> Result<Vec<([f64; 3], f64)>> {
    check_degree(degree)?;
    let rule = match degree {
        1 => vec![([1.0 / 3.0; 3], 1.0)],
        2 => vec![
            ([0.5, 0.5, 0.0], 1.0 / 3.0),
            ([0.0, 0.5, 0.5], 1.0 / 3.0),
            ([0.5, 0.0, 0.5], 1.0 / 3.0),
        ],
        _ => {
            // x = u (1 - v), y = v with Jacobian (1 - v): one extra degree in v.
            let n = (degree + 2).div_ceil(2);
            let gl: Vec<(f64, f64)> = gauss_legendre(n)
                .into_iter()
                .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                .collect();
            let mut out = Vec::with_capacity(n * n);
            for &(v, wv) in &gl {
                for &(u, wu) in &gl {
                    let x = u * (1.0 - v);
                    let y = v;
                    // reference area is 1/2, normalize weights to sum to 1
                    out.push(([1.0 - x - y, x, y], 2.0 * wu * wv * (1.0 - v)));
                }
            }
            out
        }
    };
    Ok(rule)
}

/// Points and weights on the triangle with corners `p`; weights sum to its area.
pub fn triangle_rule(p: [Point; 3], degree: usize) -> Result<Vec<(Point, f64)>> {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
    Ok(reference_triangle_rule(degree)?
        .into_iter()
        .map(|(l, w)| {
            let x = l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0];
            let y = l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1];
            ([x, y], w * area)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn midpoint_rule_on_unit_segment() {
        let r = segment_rule([0.0, 0.0], [1.0, 0.0], 1).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].0[0] - 0.5).abs() < 1e-15);
        assert!((r[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_degrees_rejected() {
        assert!(matches!(segment_rule([0.0, 0.0], [1.0, 0.0], 0), Err(Error::QuadratureDegree(0))));
        assert!(matches!(reference_triangle_rule(11), Err(Error::QuadratureDegree(11))));
    }

    #[test]
    fn interval_monomials_exact() {
        for degree in 1..=MAX_DEGREE {
            let rule = unit_interval_rule(degree).unwrap();
            for k in 0..=degree {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((q - exact).abs() <= 1e-13 * exact, "deg {degree} k {k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn reference_triangle_weights_sum_to_area() {
        let r = triangle_rule([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 2).unwrap();
        let s: f64 = r.iter().map(|(_, w)| w).sum();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_monomials_exact() {
        // ∫_T x^a y^b = a! b! / (a + b + 2)! on the unit right triangle
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for degree in 1..=MAX_DEGREE {
            let rule = triangle_rule(tri, degree).unwrap();
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let q: f64 = rule.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                    let exact = factorial(a as u32) * factorial(b as u32) / factorial((a + b + 2) as u32);
                    assert!((q - exact).abs() <= 1e-13 * exact, "deg {degree} x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn composite_sin_squared_on_segment() {
        let pi = std::f64::consts::PI;
        let n = 32;
        let mut total = 0.0;
        for k in 0..n {
            let a = [pi * k as f64 / n as f64, 0.0];
            let b = [pi * (k + 1) as f64 / n as f64, 0.0];
            total += segment_rule(a, b, 9).unwrap().iter().map(|(p, w)| w * p[0].sin().powi(2)).sum::<f64>();
        }
        assert!((total - pi / 2.0).abs() < 1e-10);
    }
}
