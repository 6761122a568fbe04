//! Quadrature rules on triangles, in barycentric coordinates with weights summing to one.

/// A rule `sum_q w_q f(x_q)` approximating the mean value over a triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    /// Barycentric coordinates of the nodes.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl TriangleRule {
    /// Cheapest available rule exact for polynomials of the given degree.
    ///
    /// Degree 5 uses the classical symmetric 7-point rule; higher degrees use a
    /// collapsed (Duffy) tensor product of Gauss-Legendre rules.
    pub fn with_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => Self {
                points: vec![[1.0 / 3.0; 3]],
                weights: vec![1.0],
                degree: 1,
            },
            2 => Self {
                points: vec![
                    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
                ],
                weights: vec![1.0 / 3.0; 3],
                degree: 2,
            },
            3..=5 => Self::seven_point(),
            _ => Self::collapsed_gauss(degree.div_ceil(2) + 1),
        }
    }

    fn seven_point() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = (9.0 + 2.0 * s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = (9.0 - 2.0 * s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        Self {
            points: vec![
                [1.0 / 3.0; 3],
                [b1, a1, a1],
                [a1, b1, a1],
                [a1, a1, b1],
                [b2, a2, a2],
                [a2, b2, a2],
                [a2, a2, b2],
            ],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
            degree: 5,
        }
    }

    /// `n x n` Gauss-Legendre points mapped from the square; exact to degree `2n - 2`.
    fn collapsed_gauss(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut w = Vec::with_capacity(n * n);
        for (&s, &ws) in nodes.iter().zip(&weights) {
            for (&t, &wt) in nodes.iter().zip(&weights) {
                // (s, t) in [0,1]^2 -> (x, y) = (s, (1 - s) t), Jacobian (1 - s)
                let x = s;
                let y = (1.0 - s) * t;
                points.push([1.0 - x - y, x, y]);
                // reference triangle area 1/2 normalises the mean
                w.push(2.0 * ws * wt * (1.0 - s));
            }
        }
        Self {
            points,
            weights: w,
            degree: 2 * n - 2,
        }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Mean of x^a y^b over the reference triangle: a! b! / (a + b + 2)! / (1/2).
    fn exact_mean(a: u32, b: u32) -> f64 {
        2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn rules_integrate_monomials_exactly() {
        for requested in [1, 2, 5, 7, 9, 12] {
            let rule = TriangleRule::with_degree(requested);
            assert!(rule.degree >= requested);
            for a in 0..=rule.degree as u32 {
                for b in 0..=(rule.degree as u32 - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    let e = exact_mean(a, b);
                    assert!((q - e).abs() <= 1e-14, "degree {requested}: x^{a} y^{b}: {q} vs {e}");
                }
            }
        }
    }

    #[test]
    fn seven_point_rule_is_not_exact_for_degree_six() {
        let rule = TriangleRule::with_degree(5);
        assert_eq!(rule.points.len(), 7);
        let q: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[1].powi(6))
            .sum();
        assert!((q - exact_mean(6, 0)).abs() > 1e-6);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_one() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(x.iter().all(|&t| t > 0.0 && t < 1.0));
        }
    }
}
