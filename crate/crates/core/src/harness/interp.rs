//! Interpolation between `L¹` and `C^m` on Euclidean balls, and its weighted
//! form on cylinder grids.

use serde::Serialize;

use crate::cylinder::{CylinderGrid, Region, N_DIM};
use crate::error::{LabError, Result};
use crate::stencil::LineDerivative;

const ORDER: usize = 6;
const MAX_M: usize = 6;

/// `a_{m,j,n} = (m - j)/(m + n)`.
pub fn interpolation_exponent(m: usize, j: usize, n: usize) -> f64 {
    (m as f64 - j as f64) / (m + n) as f64
}

/// Samples of a function on the cube `[-r, r]^n` (`n` = 1 or 2), row-major
/// with the first coordinate slowest.
#[derive(Debug, Clone)]
pub struct BallFunction {
    pub n: usize,
    pub r: f64,
    pub pts: usize,
    pub h: f64,
    pub values: Vec<f64>,
}

impl BallFunction {
    pub fn sample(n: usize, r: f64, pts: usize, f: impl Fn(&[f64]) -> f64) -> Result<BallFunction> {
        if n != 1 && n != 2 {
            return Err(LabError::InvalidInput(format!("ball dimension must be 1 or 2, got {n}")));
        }
        if pts < 33 || pts % 2 == 0 || !(r > 0.0) {
            return Err(LabError::InvalidInput("need odd pts >= 33 and r > 0".into()));
        }
        let h = 2.0 * r / (pts - 1) as f64;
        let c = |i: usize| -r + i as f64 * h;
        let values = if n == 1 {
            (0..pts).map(|i| f(&[c(i)])).collect()
        } else {
            let mut v = Vec::with_capacity(pts * pts);
            for i in 0..pts {
                for k in 0..pts {
                    v.push(f(&[c(i), c(k)]));
                }
            }
            v
        };
        Ok(BallFunction { n, r, pts, h, values })
    }

    fn coord(&self, i: usize) -> f64 {
        -self.r + i as f64 * self.h
    }

    fn in_ball(&self, idx: usize) -> bool {
        let r2 = if self.n == 1 {
            self.coord(idx).powi(2)
        } else {
            self.coord(idx / self.pts).powi(2) + self.coord(idx % self.pts).powi(2)
        };
        r2 <= self.r * self.r * (1.0 + 1e-12)
    }

    fn along(&self, f: &[f64], axis: usize, k: usize) -> Vec<f64> {
        if k == 0 {
            return f.to_vec();
        }
        let d = LineDerivative::new(self.pts, self.h, k, ORDER, false);
        let p = self.pts;
        if self.n == 1 {
            return d.apply(f);
        }
        let mut out = vec![0.0; f.len()];
        for a in 0..p {
            for b in 0..p {
                out[a * p + b] = if axis == 0 {
                    d.apply_at(a, f, b, p)
                } else {
                    d.apply_at(b, f, a * p, 1)
                };
            }
        }
        out
    }

    /// `|∇^j u|` at every sample, the norm taken over the full symmetric
    /// tensor.
    pub fn grad_norm(&self, j: usize) -> Vec<f64> {
        if j == 0 {
            return self.values.iter().map(|v| v.abs()).collect();
        }
        if self.n == 1 {
            return self.along(&self.values, 0, j).iter().map(|v| v.abs()).collect();
        }
        let mut sq = vec![0.0; self.values.len()];
        let mut binom = 1.0;
        for a in 0..=j {
            let d = self.along(&self.along(&self.values, 0, a), 1, j - a);
            for (s, v) in sq.iter_mut().zip(&d) {
                *s += binom * v * v;
            }
            binom = binom * (j - a) as f64 / (a + 1) as f64;
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    pub fn sup_on_ball(&self, f: &[f64]) -> f64 {
        f.iter()
            .enumerate()
            .filter(|(i, _)| self.in_ball(*i))
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    pub fn l1_on_ball(&self, f: &[f64]) -> f64 {
        let cell = self.h.powi(self.n as i32);
        f.iter()
            .enumerate()
            .filter(|(i, _)| self.in_ball(*i))
            .map(|(_, v)| v.abs() * cell)
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InterpolationPoint {
    pub m: usize,
    pub j: usize,
    pub n: usize,
    pub exponent: f64,
    /// Sweep parameter (frequency or ε); 0 when not part of a sweep.
    pub parameter: f64,
    pub lhs: f64,
    pub rhs_terms: Vec<(String, f64)>,
    pub rhs: f64,
    pub ratio: f64,
}

/// `r^j ‖∇^j u‖_∞` against
/// `r^{-n} ‖u‖_{L¹} + r^j ‖u‖_{L¹}^a ‖∇^m u‖_∞^{1-a}`, all on `B_r`.
pub fn interpolation_check(u: &BallFunction, m: usize, j: usize) -> Result<InterpolationPoint> {
    if j > m {
        return Err(LabError::InvalidInput(format!("j = {j} exceeds m = {m}")));
    }
    if m > MAX_M {
        return Err(LabError::InvalidInput(format!("m = {m} above the supported {MAX_M}")));
    }
    let a = interpolation_exponent(m, j, u.n);
    let r = u.r;
    let lhs = r.powi(j as i32) * u.sup_on_ball(&u.grad_norm(j));
    let l1 = u.l1_on_ball(&u.values);
    let top = u.sup_on_ball(&u.grad_norm(m));
    let t1 = r.powi(-(u.n as i32)) * l1;
    let t2 = r.powi(j as i32) * l1.powf(a) * top.powf(1.0 - a);
    let rhs = t1 + t2;
    Ok(InterpolationPoint {
        m,
        j,
        n: u.n,
        exponent: a,
        parameter: 0.0,
        lhs,
        rhs_terms: vec![("l1".into(), t1), ("l1^a*top^(1-a)".into(), t2)],
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY },
    })
}

/// Bump `exp(1 - 1/(1 - t²))` on `|t| < 1`.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencySweep {
    pub points: Vec<InterpolationPoint>,
    pub max_ratio: f64,
    /// Largest ratio over the ratio at the lowest frequency.
    pub growth: f64,
    /// Log-log slope of the ratio over the three highest frequencies.
    pub tail_slope: f64,
    /// High-frequency slope for `sin(ωy)`: `j - m(1 - a)`.
    pub predicted_slope: f64,
    /// Finite ratios that do not increase at high frequency.
    pub bounded: bool,
}

/// `u = sin(ω y) bump(|x|/r)` over a list of frequencies; the last
/// coordinate plays the role of `y`.
pub fn frequency_sweep(n: usize, r: f64, m: usize, j: usize, omegas: &[f64]) -> Result<FrequencySweep> {
    if omegas.is_empty() || omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidInput("frequencies must be increasing".into()));
    }
    let mut points = Vec::new();
    for &w in omegas {
        // about 20 samples per unit of ω r keeps the 6th-order stencils accurate
        let mut pts = ((20.0 * w * r).ceil() as usize).max(401);
        if pts % 2 == 0 {
            pts += 1;
        }
        let f = BallFunction::sample(n, r, pts, |x| {
            let rad = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            (w * x[x.len() - 1]).sin() * bump(rad / r)
        })?;
        let mut p = interpolation_check(&f, m, j)?;
        p.parameter = w;
        points.push(p);
    }
    let max_ratio = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let growth = match points.first() {
        Some(p) if p.ratio > 0.0 => max_ratio / p.ratio,
        _ => 1.0,
    };
    let tail = &points[points.len().saturating_sub(3)..];
    let tail_slope = super::loglog_slope(
        &tail.iter().map(|p| p.parameter).collect::<Vec<_>>(),
        &tail.iter().map(|p| p.ratio).collect::<Vec<_>>(),
    );
    let a = interpolation_exponent(m, j, n);
    Ok(FrequencySweep {
        bounded: max_ratio.is_finite() && !(tail_slope > 0.05),
        points,
        max_ratio,
        growth,
        tail_slope,
        predicted_slope: j as f64 - m as f64 * (1.0 - a),
    })
}

/// `‖u‖_{W^{j,p}_ρ(B_{R-1})}` against `‖u‖_{L^p_ρ(B_R)}^{a_{m,j,n}}` for a
/// grid function with several components.
pub fn weighted_interpolation(
    grid: &CylinderGrid,
    comps: &[&[f64]],
    m: usize,
    j: usize,
    p: u32,
    r: f64,
) -> Result<InterpolationPoint> {
    if j > m {
        return Err(LabError::InvalidInput(format!("j = {j} exceeds m = {m}")));
    }
    let a = interpolation_exponent(m, j, N_DIM);
    let lhs = grid.weighted_norm(comps, j, p, Region::Ball(r - 1.0))?.value;
    let base = grid.weighted_norm(comps, 0, p, Region::Ball(r))?.value;
    let rhs = base.powf(a);
    Ok(InterpolationPoint {
        m,
        j,
        n: N_DIM,
        exponent: a,
        parameter: 0.0,
        lhs,
        rhs_terms: vec![("lp_ball^a".into(), rhs)],
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_values() {
        assert_eq!(interpolation_exponent(4, 2, 2), 1.0 / 3.0);
        assert_eq!(interpolation_exponent(50, 2, 2), 48.0 / 52.0);
        assert_eq!(interpolation_exponent(3, 3, 1), 0.0);
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let f = BallFunction::sample(2, 1.0, 65, |_| 3.0).unwrap();
        let p = interpolation_check(&f, 4, 2).unwrap();
        assert!(p.lhs < 1e-9);
        assert!(p.rhs > 0.0);
    }

    #[test]
    fn j_above_m_rejected() {
        let f = BallFunction::sample(1, 1.0, 65, |x| x[0]).unwrap();
        assert!(interpolation_check(&f, 2, 3).is_err());
    }

    #[test]
    fn second_derivative_of_quadratic() {
        // u = x² + x y: |∇²u|² = 2² + 2·1² = 6
        let f = BallFunction::sample(2, 1.0, 65, |x| x[0] * x[0] + x[0] * x[1]).unwrap();
        let g = f.grad_norm(2);
        assert!((g[32 * 65 + 32] - 6f64.sqrt()).abs() < 1e-8);
    }
}
