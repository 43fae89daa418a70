//! Finite-difference and interpolation kernels on cell-centered grids.
//!
//! Grid functions live at `x_i = (i + 1/2) h`. Values at `x < 0` are supplied
//! by even or odd reflection, which is how the axis (nut or bolt) enters every
//! stencil. Central stencils are fourth order; the last two nodes fall back to
//! one-sided fourth-order formulas.

/// Reflection behaviour of a grid function across the axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Smallest grid the fourth-order stencils accept.
pub const MIN_NODES: usize = 6;

/// Value at index `i`, reflecting negative indices through the axis.
#[inline]
pub fn ghost(f: &[f64], i: isize, parity: Parity) -> f64 {
    if i >= 0 {
        f[i as usize]
    } else {
        parity.sign() * f[(-i - 1) as usize]
    }
}

/// First derivative at node `i`.
#[inline]
pub fn d1_at(f: &[f64], h: f64, parity: Parity, i: usize) -> f64 {
    let n = f.len();
    if i + 2 < n {
        let k = i as isize;
        let g = |j: isize| ghost(f, k + j, parity);
        (g(-2) - 8.0 * g(-1) + 8.0 * g(1) - g(2)) / (12.0 * h)
    } else if i + 1 < n {
        (3.0 * f[i + 1] + 10.0 * f[i] - 18.0 * f[i - 1] + 6.0 * f[i - 2] - f[i - 3]) / (12.0 * h)
    } else {
        (25.0 * f[i] - 48.0 * f[i - 1] + 36.0 * f[i - 2] - 16.0 * f[i - 3] + 3.0 * f[i - 4])
            / (12.0 * h)
    }
}

/// Second derivative at node `i`.
#[inline]
pub fn d2_at(f: &[f64], h: f64, parity: Parity, i: usize) -> f64 {
    let n = f.len();
    let h2 = 12.0 * h * h;
    if i + 2 < n {
        let k = i as isize;
        let g = |j: isize| ghost(f, k + j, parity);
        (-g(-2) + 16.0 * g(-1) - 30.0 * g(0) + 16.0 * g(1) - g(2)) / h2
    } else if i + 1 < n {
        (10.0 * f[i + 1] - 15.0 * f[i] - 4.0 * f[i - 1] + 14.0 * f[i - 2] - 6.0 * f[i - 3]
            + f[i - 4])
            / h2
    } else {
        (45.0 * f[i] - 154.0 * f[i - 1] + 214.0 * f[i - 2] - 156.0 * f[i - 3] + 61.0 * f[i - 4]
            - 10.0 * f[i - 5])
            / h2
    }
}

pub fn d1(f: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    (0..f.len()).map(|i| d1_at(f, h, parity, i)).collect()
}

pub fn d2(f: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    (0..f.len()).map(|i| d2_at(f, h, parity, i)).collect()
}

/// Value at the axis of an even function sampled at the first three cell
/// centers (exact for polynomials in x^2 of degree two).
pub fn even_axis_value(f: &[f64]) -> f64 {
    1.171875 * f[0] - 0.1953125 * f[1] + 0.0234375 * f[2]
}

/// Cumulative integral `F(x_i) = \int_0^{x_i} g` of an even integrand.
pub fn cumulative_even(g: &[f64], h: f64) -> Vec<f64> {
    let n = g.len();
    let mut out = Vec::with_capacity(n);
    // Integral over [0, h/2] of the even quadratic-in-x^2 interpolant.
    let first = h * (g[0] / 2.0 - (g[1] - g[0]) / 24.0);
    out.push(first);
    for i in 0..n - 1 {
        let k = i as isize;
        let seg = if i + 2 < n {
            h * (-ghost(g, k - 1, Parity::Even) + 13.0 * g[i] + 13.0 * g[i + 1] - g[i + 2]) / 24.0
        } else {
            h * (ghost(g, k - 2, Parity::Even) - 5.0 * ghost(g, k - 1, Parity::Even)
                + 19.0 * g[i]
                + 9.0 * g[i + 1])
                / 24.0
        };
        out.push(out[i] + seg);
    }
    out
}

/// Finite-difference weights for derivatives 0..=m at `x0` from nodes `xs`
/// (Fornberg's recursion). `w[k][j]` multiplies `f(xs[j])` for the k-th
/// derivative.
pub fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Piecewise-polynomial interpolation of a grid function given at increasing
/// abscissae `xs > 0`, using `width` nearest nodes and parity reflection
/// through `x = 0`.
#[derive(Clone, Debug)]
pub struct ParityInterp<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    parity: Parity,
    width: usize,
}

impl<'a> ParityInterp<'a> {
    pub fn new(xs: &'a [f64], ys: &'a [f64], parity: Parity, width: usize) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(width >= 2 && xs.len() >= width);
        Self { xs, ys, parity, width }
    }

    fn node(&self, j: isize) -> (f64, f64) {
        if j >= 0 {
            (self.xs[j as usize], self.ys[j as usize])
        } else {
            let k = (-j - 1) as usize;
            (-self.xs[k], self.parity.sign() * self.ys[k])
        }
    }

    fn stencil(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.xs.len() as isize;
        let w = self.width as isize;
        // Index of the first node strictly greater than x.
        let above = self.xs.partition_point(|&v| v <= x) as isize;
        let mut start = above - w / 2;
        if start + w > n {
            start = n - w;
        }
        if start < -w / 2 {
            start = -w / 2;
        }
        (start..start + w).map(|j| self.node(j)).unzip()
    }

    /// Value and first two derivatives at `x`.
    pub fn eval_derivs(&self, x: f64) -> [f64; 3] {
        let ax = x.abs();
        let (px, py) = self.stencil(ax);
        let w = fornberg(ax, &px, 2);
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = w[k].iter().zip(&py).map(|(a, b)| a * b).sum();
        }
        if x < 0.0 {
            let s = self.parity.sign();
            out = [s * out[0], -s * out[1], s * out[2]];
        }
        out
    }

    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        let (px, py) = self.stencil(ax);
        let v = lagrange(&px, &py, ax);
        if x < 0.0 {
            self.parity.sign() * v
        } else {
            v
        }
    }
}

/// Lagrange interpolation through the given points.
pub fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut total = 0.0;
    for (j, (&xj, &yj)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != j {
                l *= (x - xk) / (xj - xk);
            }
        }
        total += yj * l;
    }
    total
}

/// Cubic Hermite interpolation on `[x0, x1]` from values and slopes.
#[inline]
pub fn hermite(x0: f64, x1: f64, f0: f64, f1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * f1
        + (t3 - t2) * h * d1
}

/// Derivative of [`hermite`] with respect to `x`.
#[inline]
pub fn hermite_slope(x0: f64, x1: f64, f0: f64, f1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * f0 + (-6.0 * t2 + 6.0 * t) * f1) / h
        + (3.0 * t2 - 4.0 * t + 1.0) * d0
        + (3.0 * t2 - 2.0 * t) * d1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| (i as f64 + 0.5) * h).collect()
    }

    #[test]
    fn derivatives_exact_on_quartics_with_parity() {
        let h = 0.1;
        let x = grid(12, h);
        // Odd quartic-free polynomial: x + 2x^3 is odd, exact for d1 (degree <= 4).
        let f: Vec<f64> = x.iter().map(|&v| v + 2.0 * v.powi(3)).collect();
        let d = d1(&f, h, Parity::Odd);
        let dd = d2(&f, h, Parity::Odd);
        for (i, &v) in x.iter().enumerate() {
            assert!((d[i] - (1.0 + 6.0 * v * v)).abs() < 1e-10, "d1 at {i}");
            assert!((dd[i] - 12.0 * v).abs() < 1e-9, "d2 at {i}");
        }
        let g: Vec<f64> = x.iter().map(|&v| 3.0 - v * v + 0.5 * v.powi(4)).collect();
        let d = d1(&g, h, Parity::Even);
        let dd = d2(&g, h, Parity::Even);
        for (i, &v) in x.iter().enumerate() {
            assert!((d[i] - (-2.0 * v + 2.0 * v.powi(3))).abs() < 1e-10);
            assert!((dd[i] - (-2.0 + 6.0 * v * v)).abs() < 1e-9);
        }
    }

    #[test]
    fn one_sided_second_derivative_exact_on_quintic() {
        let h = 0.2;
        let x = grid(10, h);
        let f: Vec<f64> = x.iter().map(|&v| v.powi(5) - v.powi(2)).collect();
        let n = x.len();
        for i in [n - 2, n - 1] {
            let exact = 20.0 * x[i].powi(3) - 2.0;
            assert!((d2_at(&f, h, Parity::Odd, i) - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn even_axis_value_exact_for_quadratic_in_square() {
        let h = 0.3;
        let x = grid(3, h);
        let f: Vec<f64> = x.iter().map(|&v| 2.0 + v * v - 4.0 * v.powi(4)).collect();
        assert!((even_axis_value(&f) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn cumulative_even_integrates_polynomials() {
        let h = 0.05;
        let x = grid(40, h);
        let g: Vec<f64> = x.iter().map(|&v| 1.0 + 3.0 * v * v).collect();
        let s = cumulative_even(&g, h);
        for (i, &v) in x.iter().enumerate() {
            assert!((s[i] - (v + v.powi(3))).abs() < 1e-12, "node {i}: {} vs {}", s[i], v + v.powi(3));
        }
    }

    #[test]
    fn fornberg_reproduces_central_weights() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg(0.0, &xs, 2);
        let expect1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        let expect2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - expect1[j]).abs() < 1e-14);
            assert!((w[2][j] - expect2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn parity_interp_reflects_through_axis() {
        let x: Vec<f64> = grid(8, 0.25);
        let y: Vec<f64> = x.iter().map(|&v| v.powi(3)).collect();
        let it = ParityInterp::new(&x, &y, Parity::Odd, 4);
        assert!((it.eval(0.1) - 0.001).abs() < 1e-12);
        assert!((it.eval(-0.1) + 0.001).abs() < 1e-12);
        let d = it.eval_derivs(0.3);
        assert!((d[1] - 0.27).abs() < 1e-12 && (d[2] - 1.8).abs() < 1e-11);
    }

    #[test]
    fn hermite_is_exact_for_cubics() {
        let f = |x: f64| 2.0 * x.powi(3) - x + 1.0;
        let df = |x: f64| 6.0 * x * x - 1.0;
        let v = hermite(0.5, 1.5, f(0.5), f(1.5), df(0.5), df(1.5), 1.1);
        assert!((v - f(1.1)).abs() < 1e-13);
        let s = hermite_slope(0.5, 1.5, f(0.5), f(1.5), df(0.5), df(1.5), 1.1);
        assert!((s - df(1.1)).abs() < 1e-12);
    }
}
