//! Finite difference stencils on uniform one-dimensional lattices.
//!
//! Weights come from Fornberg's recursion, so any derivative order and any
//! (possibly one-sided) window can be generated on demand. Periodic lattices
//! use one centered window everywhere; bounded lattices shift the window
//! inward near the ends while keeping its width.

/// Fornberg's algorithm: weights for derivatives `0..=m` at `z` from the
/// nodes `x`. Returns `w[d][k]`, the weight of `f(x[k])` in the `d`-th
/// derivative.
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
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

/// Stencil width giving accuracy `order` for a centered `deriv`-th derivative.
pub fn centered_width(deriv: usize, order: usize) -> usize {
    2 * ((deriv + 1) / 2) - 1 + order
}

#[derive(Debug, Clone)]
struct Row {
    start: isize,
    set: usize,
}

/// Derivative operator of fixed order on a uniform lattice.
#[derive(Debug, Clone)]
pub struct LineDerivative {
    n: usize,
    periodic: bool,
    rows: Vec<Row>,
    sets: Vec<Vec<f64>>,
}

impl LineDerivative {
    pub fn new(n: usize, spacing: f64, deriv: usize, order: usize, periodic: bool) -> Self {
        assert!(deriv >= 1 && order >= 2 && order % 2 == 0);
        let width = centered_width(deriv, order);
        assert!(n >= width, "lattice too small for stencil");
        let radius = (width / 2) as isize;
        let scale = spacing.powi(deriv as i32);
        let weights_for = |offsets: &[f64]| -> Vec<f64> {
            fornberg_weights(0.0, offsets, deriv)[deriv]
                .iter()
                .map(|w| w / scale)
                .collect()
        };
        let centered: Vec<f64> = (-radius..=radius).map(|k| k as f64).collect();
        let mut sets = vec![weights_for(&centered)];
        let mut rows = Vec::with_capacity(n);
        for i in 0..n as isize {
            if periodic {
                rows.push(Row { start: i - radius, set: 0 });
                continue;
            }
            let start = (i - radius).clamp(0, n as isize - width as isize);
            if start == i - radius {
                rows.push(Row { start, set: 0 });
            } else {
                let offsets: Vec<f64> = (0..width as isize).map(|k| (start + k - i) as f64).collect();
                sets.push(weights_for(&offsets));
                rows.push(Row { start, set: sets.len() - 1 });
            }
        }
        LineDerivative { n, periodic, rows, sets }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Apply along a strided line: element `k` of the line is `data[offset + k*stride]`.
    #[inline]
    pub fn apply_at(&self, i: usize, data: &[f64], offset: usize, stride: usize) -> f64 {
        let row = &self.rows[i];
        let w = &self.sets[row.set];
        let n = self.n as isize;
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            let mut idx = row.start + k as isize;
            if self.periodic {
                idx = idx.rem_euclid(n);
            }
            acc += wk * data[offset + idx as usize * stride];
        }
        acc
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.apply_at(i, f, 0, 1)).collect()
    }
}

/// Trapezoid weights on a uniform lattice (periodic: all equal).
pub fn trapezoid_weights(n: usize, spacing: f64, periodic: bool) -> Vec<f64> {
    let mut w = vec![spacing; n];
    if !periodic && n > 1 {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_fourth_order() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &x, 2);
        let d1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for k in 0..5 {
            assert!((w[1][k] - d1[k]).abs() < 1e-14);
            assert!((w[2][k] - d2[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn third_derivative_width_seven() {
        assert_eq!(centered_width(3, 4), 7);
        let x: Vec<f64> = (-3..=3).map(|k| k as f64).collect();
        let w = fornberg_weights(0.0, &x, 3);
        let expect = [1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0];
        for k in 0..7 {
            assert!((w[3][k] - expect[k] / 8.0).abs() < 1e-13);
        }
    }

    #[test]
    fn bounded_stencils_exact_on_quartics() {
        let n = 21;
        let h = 0.1;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(4)).collect();
        for d in 1..=3 {
            let op = LineDerivative::new(n, h, d, 4, false);
            let df = op.apply(&f);
            for (i, v) in df.iter().enumerate() {
                let x = i as f64 * h;
                let exact = match d {
                    1 => 4.0 * x.powi(3),
                    2 => 12.0 * x * x,
                    _ => 24.0 * x,
                };
                assert!((v - exact).abs() < 1e-8, "d={d} i={i}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn periodic_fourth_order_convergence() {
        let err = |n: usize| {
            let h = std::f64::consts::TAU / n as f64;
            let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
            let op = LineDerivative::new(n, h, 2, 4, true);
            op.apply(&f)
                .iter()
                .enumerate()
                .map(|(i, v)| (v + (i as f64 * h).sin()).abs())
                .fold(0.0, f64::max)
        };
        let rate = (err(32) / err(64)).log2();
        assert!(rate > 3.8, "rate {rate}");
    }
}
