//! Product grids on `Γ̊ × R` inside `R^N` (N = 3 or 4) with the Gaussian
//! weight `ρ = (4π)^{-1} exp(-|x|²/4)` of a surface, weighted norms, the drift
//! Laplacian and the Gaussian area.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::NormalField;
use crate::jet::{dot, Jet, V4};
use crate::profile::ProfileCurve;
use crate::stencil::{trapezoid_weights, LineDerivative};

/// Dimension of the cylinder surface; the weight is `(4π)^{-N_DIM/2} e^{-|x|²/4}`.
pub const N_DIM: usize = 2;

/// Stencil order used for every spatial derivative.
pub const STENCIL_ORDER: usize = 4;

/// Axial truncation below which the tail bound is flagged in reports.
pub const TAIL_FLAG_BELOW: f64 = 8.0;

/// Multi-indices `(σ-order, y-order)` of a scalar 3-jet, in storage order.
pub const JET_INDEX: [(usize, usize); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

#[inline]
pub fn ji(a: usize, b: usize) -> usize {
    match (a, b) {
        (0, 0) => 0,
        (1, 0) => 1,
        (0, 1) => 2,
        (2, 0) => 3,
        (1, 1) => 4,
        (0, 2) => 5,
        (3, 0) => 6,
        (2, 1) => 7,
        (1, 2) => 8,
        (0, 3) => 9,
        _ => panic!("jet index ({a},{b}) out of range"),
    }
}

/// All partial derivatives up to order three of a grid function.
#[derive(Debug, Clone)]
pub struct ScalarJets {
    pub d: [Vec<f64>; 10],
}

impl ScalarJets {
    #[inline]
    pub fn at(&self, node: usize) -> [f64; 10] {
        std::array::from_fn(|k| self.d[k][node])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "radius", rename_all = "kebab-case")]
pub enum Region {
    Entire,
    Ball(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormResult {
    pub value: f64,
    pub k: usize,
    pub p: u32,
    pub region: Region,
    pub tail_bound: f64,
}

/// Geometry of one base node, read off the profile.
#[derive(Debug, Clone, Copy)]
pub struct NodeInfo {
    pub i: usize,
    pub j: usize,
    pub sigma: f64,
    pub y: f64,
    pub x: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct CylinderGrid {
    pub profile: ProfileCurve,
    pub y: Vec<f64>,
    pub y_max: f64,
    pub ambient_dim: usize,
    pub ns: usize,
    pub ny: usize,
    pub hs: f64,
    pub hy: f64,
    /// ρ at each node.
    pub rho: Vec<f64>,
    /// Quadrature weight (area element) at each node, without ρ.
    pub area: Vec<f64>,
    /// Bound on the Gaussian mass beyond `|y| > y_max`.
    pub tail_bound: f64,
    pub tail_flagged: bool,
    ds: [LineDerivative; 3],
    dy: [LineDerivative; 3],
}

/// Build the product grid. Node `(i, j)` sits at `(x̊(σ_i), y_j, 0)` and is
/// stored at flat index `i * ny + j`.
pub fn build_grid(
    profile: ProfileCurve,
    y_max: f64,
    axial_count: usize,
    ambient_dim: usize,
) -> Result<CylinderGrid> {
    if ambient_dim != 3 && ambient_dim != 4 {
        return Err(LabError::InvalidInput(format!(
            "ambient dimension must be 3 or 4, got {ambient_dim}"
        )));
    }
    if axial_count < 33 || axial_count % 2 == 0 {
        return Err(LabError::InvalidInput(format!(
            "axial_count must be odd and >= 33, got {axial_count}"
        )));
    }
    if !(y_max > 0.0) {
        return Err(LabError::InvalidInput("axial half-length must be positive".into()));
    }
    if profile.len() < 16 {
        return Err(LabError::InvalidInput("profile has too few nodes".into()));
    }
    let ns = profile.len();
    let ny = axial_count;
    let hs = profile.spacing();
    let hy = 2.0 * y_max / (ny - 1) as f64;
    let y: Vec<f64> = (0..ny).map(|j| -y_max + j as f64 * hy).collect();
    let wy = trapezoid_weights(ny, hy, false);
    let mut rho = Vec::with_capacity(ns * ny);
    let mut area = Vec::with_capacity(ns * ny);
    for p in &profile.points {
        let r2 = p[0] * p[0] + p[1] * p[1];
        for j in 0..ny {
            rho.push(gaussian_weight(r2 + y[j] * y[j]));
            area.push(hs * wy[j]);
        }
    }
    let tail_bound = profile_mass(&profile) * axial_tail(y_max);
    let ds = std::array::from_fn(|k| LineDerivative::new(ns, hs, k + 1, STENCIL_ORDER, true));
    let dy = std::array::from_fn(|k| LineDerivative::new(ny, hy, k + 1, STENCIL_ORDER, false));
    Ok(CylinderGrid {
        profile,
        y,
        y_max,
        ambient_dim,
        ns,
        ny,
        hs,
        hy,
        rho,
        area,
        tail_bound,
        tail_flagged: y_max < TAIL_FLAG_BELOW,
        ds,
        dy,
    })
}

/// `(4π)^{-1} e^{-r²/4}`.
#[inline]
pub fn gaussian_weight(r2: f64) -> f64 {
    (-r2 / 4.0).exp() / (4.0 * PI)
}

/// `∫ (4π)^{-1/2} e^{-|x̊|²/4} dσ` along the profile.
fn profile_mass(profile: &ProfileCurve) -> f64 {
    let h = profile.spacing();
    profile
        .points
        .iter()
        .map(|p| h * (-(p[0] * p[0] + p[1] * p[1]) / 4.0).exp())
        .sum::<f64>()
        / (4.0 * PI).sqrt()
}

/// Bound for `∫_{|y|>Y} (4π)^{-1/2} e^{-y²/4} dy`.
pub fn axial_tail(y_max: f64) -> f64 {
    2.0 / (4.0 * PI).sqrt() * (2.0 / y_max) * (-y_max * y_max / 4.0).exp()
}

/// Gaussian area of the round cylinder of radius `r` over `R`.
pub fn round_cylinder_area(r: f64) -> f64 {
    2.0 * PI * r * (-r * r / 4.0).exp() * 2.0 * PI.sqrt() / (4.0 * PI)
}

/// Smooth cutoff in `t`: 1 for `|t| <= radius - 1`, 0 for `|t| >= radius`.
pub fn cutoff(t: f64, radius: f64) -> f64 {
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let s = radius - t.abs();
    if s >= 1.0 {
        return 1.0;
    }
    if s <= 0.0 {
        return 0.0;
    }
    psi(s) / (psi(s) + psi(1.0 - s))
}

impl CylinderGrid {
    #[inline]
    pub fn len(&self) -> usize {
        self.ns * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node / self.ny, node % self.ny)
    }

    pub fn node(&self, node: usize) -> NodeInfo {
        let (i, j) = self.ij(node);
        let p = &self.profile;
        NodeInfo {
            i,
            j,
            sigma: p.sigma[i],
            y: self.y[j],
            x: p.points[i],
            tangent: p.tangent[i],
            normal: p.normal[i],
            kappa: p.kappa[i],
        }
    }

    #[inline]
    pub fn position(&self, node: usize) -> V4 {
        let (i, j) = self.ij(node);
        let x = self.profile.points[i];
        [x[0], x[1], self.y[j], 0.0]
    }

    #[inline]
    pub fn radius_sq(&self, node: usize) -> f64 {
        let p = self.position(node);
        dot(&p, &p)
    }

    /// `<x> = sqrt(1 + |x|²)` at each node.
    pub fn bracket_x(&self, node: usize) -> f64 {
        (1.0 + self.radius_sq(node)).sqrt()
    }

    /// Weighted quadrature weight `ρ dA` of a node.
    #[inline]
    pub fn weight(&self, node: usize) -> f64 {
        self.rho[node] * self.area[node]
    }

    pub fn in_region(&self, node: usize, region: Region) -> bool {
        match region {
            Region::Entire => true,
            Region::Ball(r) => self.radius_sq(node) <= r * r,
        }
    }

    /// `∫ f ρ` over the grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().enumerate().map(|(n, v)| v * self.weight(n)).sum()
    }

    pub fn integrate_region(&self, f: &[f64], region: Region) -> f64 {
        f.iter()
            .enumerate()
            .filter(|(n, _)| self.in_region(*n, region))
            .map(|(n, v)| v * self.weight(n))
            .sum()
    }

    /// Tabulate a function of the base node.
    pub fn tabulate(&self, f: impl Fn(&NodeInfo) -> f64) -> Vec<f64> {
        (0..self.len()).map(|n| f(&self.node(n))).collect()
    }

    /// σ-derivative of order `k` (1..=3).
    pub fn d_sigma(&self, f: &[f64], k: usize) -> Vec<f64> {
        let op = &self.ds[k - 1];
        let mut out = vec![0.0; self.len()];
        for j in 0..self.ny {
            for i in 0..self.ns {
                out[self.idx(i, j)] = op.apply_at(i, f, j, self.ny);
            }
        }
        out
    }

    /// y-derivative of order `k` (1..=3).
    pub fn d_y(&self, f: &[f64], k: usize) -> Vec<f64> {
        let op = &self.dy[k - 1];
        let mut out = vec![0.0; self.len()];
        for i in 0..self.ns {
            let off = i * self.ny;
            for j in 0..self.ny {
                out[off + j] = op.apply_at(j, f, off, 1);
            }
        }
        out
    }

    /// All derivatives up to third order.
    pub fn jets(&self, f: &[f64]) -> ScalarJets {
        let fy = self.d_y(f, 1);
        let fyy = self.d_y(f, 2);
        ScalarJets {
            d: [
                f.to_vec(),
                self.d_sigma(f, 1),
                fy.clone(),
                self.d_sigma(f, 2),
                self.d_sigma(&fy, 1),
                fyy.clone(),
                self.d_sigma(f, 3),
                self.d_sigma(&fy, 2),
                self.d_sigma(&fyy, 1),
                self.d_y(f, 3),
            ],
        }
    }

    /// `𝓛f = Δf - <x^T, ∇f>/2`. On the cylinder `x^T = <x̊,T> ∂σ + y ∂y`.
    pub fn drift_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let fs = self.d_sigma(f, 1);
        let fss = self.d_sigma(f, 2);
        let fy = self.d_y(f, 1);
        let fyy = self.d_y(f, 2);
        let a = self.profile.radial_speed();
        (0..self.len())
            .map(|n| {
                let (i, j) = self.ij(n);
                fss[n] + fyy[n] - 0.5 * (a[i] * fs[n] + self.y[j] * fy[n])
            })
            .collect()
    }

    /// `(∫ (Σ_{j<=k} |∇^j f|)^p ρ)^{1/p}` over a region, where `f` may have
    /// several components (the tensor norm is taken over all of them).
    pub fn weighted_norm(
        &self,
        comps: &[&[f64]],
        k: usize,
        p: u32,
        region: Region,
    ) -> Result<WeightedNormResult> {
        if k > 3 || !(1..=3).contains(&p) {
            return Err(LabError::UnsupportedNorm { k, p });
        }
        let pointwise = self.pointwise_sobolev(comps, k);
        let integrand: Vec<f64> = pointwise.iter().map(|v| v.powi(p as i32)).collect();
        let value = self.integrate_region(&integrand, region).powf(1.0 / p as f64);
        Ok(WeightedNormResult {
            value,
            k,
            p,
            region,
            tail_bound: self.tail_bound,
        })
    }

    /// `Σ_{j<=k} |∇^j f|` at every node.
    pub fn pointwise_sobolev(&self, comps: &[&[f64]], k: usize) -> Vec<f64> {
        // multiplicity of each multi-index in the full symmetric tensor
        const MULT: [f64; 10] = [1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 3.0, 3.0, 1.0];
        let order = |m: usize| JET_INDEX[m].0 + JET_INDEX[m].1;
        let jets: Vec<ScalarJets> = comps.iter().map(|c| self.jets(c)).collect();
        (0..self.len())
            .map(|n| {
                let mut levels = [0.0f64; 4];
                for jet in &jets {
                    for (m, &mult) in MULT.iter().enumerate() {
                        let v = jet.d[m][n];
                        levels[order(m)] += mult * v * v;
                    }
                }
                levels[..=k].iter().map(|s| s.sqrt()).sum()
            })
            .collect()
    }

    /// `sup_x` of the same pointwise quantity.
    pub fn sup_sobolev(&self, comps: &[&[f64]], k: usize) -> f64 {
        self.pointwise_sobolev(comps, k)
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Base 3-jet of the immersion at a node.
    pub fn base_jet(&self, node: usize) -> Jet {
        let (i, j) = self.ij(node);
        let p = &self.profile;
        let t = p.tangent[i];
        let nv = p.normal[i];
        let k = p.kappa[i];
        let kd = p.kappa_dot[i];
        let mut jet = Jet::zero();
        jet.x = [p.points[i][0], p.points[i][1], self.y[j], 0.0];
        jet.d1[0] = [t[0], t[1], 0.0, 0.0];
        jet.d1[1] = [0.0, 0.0, 1.0, 0.0];
        jet.d2[0][0] = [-k * nv[0], -k * nv[1], 0.0, 0.0];
        jet.d3[0][0][0] = [
            -kd * nv[0] - k * k * t[0],
            -kd * nv[1] - k * k * t[1],
            0.0,
            0.0,
        ];
        jet
    }

    /// Text snapshot of a normal field: one line `sigma y u u_z` per node.
    pub fn export_field(&self, field: &NormalField) -> String {
        let mut out = String::new();
        writeln!(out, "# shrinker-lab field").unwrap();
        writeln!(out, "version = 1").unwrap();
        writeln!(out, "sigma_nodes = {}", self.ns).unwrap();
        writeln!(out, "axial_nodes = {}", self.ny).unwrap();
        writeln!(out, "y_max = {:.16e}", self.y_max).unwrap();
        writeln!(out, "ambient_dim = {}", self.ambient_dim).unwrap();
        match field.support_radius {
            Some(r) => writeln!(out, "support_radius = {r:.16e}").unwrap(),
            None => writeln!(out, "support_radius = none").unwrap(),
        }
        writeln!(out, "# sigma y u u_z").unwrap();
        for n in 0..self.len() {
            let info = self.node(n);
            writeln!(
                out,
                "{:.16e} {:.16e} {:.16e} {:.16e}",
                info.sigma,
                info.y,
                field.u[n],
                field.uz.as_ref().map_or(0.0, |w| w[n])
            )
            .unwrap();
        }
        out
    }

    /// Text snapshot of the grid itself: one line `sigma y x1 x2 rho area`.
    pub fn export_grid(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# shrinker-lab grid").unwrap();
        writeln!(out, "version = 1").unwrap();
        writeln!(out, "sigma_nodes = {}", self.ns).unwrap();
        writeln!(out, "axial_nodes = {}", self.ny).unwrap();
        writeln!(out, "y_max = {:.16e}", self.y_max).unwrap();
        writeln!(out, "ambient_dim = {}", self.ambient_dim).unwrap();
        writeln!(out, "tail_bound = {:.16e}", self.tail_bound).unwrap();
        writeln!(out, "tail_flagged = {}", self.tail_flagged).unwrap();
        writeln!(out, "# sigma y x1 x2 rho area").unwrap();
        for n in 0..self.len() {
            let info = self.node(n);
            writeln!(
                out,
                "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                info.sigma, info.y, info.x[0], info.x[1], self.rho[n], self.area[n]
            )
            .unwrap();
        }
        out
    }
}

/// Gaussian area `F(Γ_U) = ∫ ρ(X + U) dA_U`, pulled back to the base grid.
/// `None` gives the area of the base cylinder.
pub fn gaussian_area(grid: &CylinderGrid, field: Option<&NormalField>) -> Result<f64> {
    let jets = field.map(|f| f.jets(grid));
    let mut total = 0.0;
    for n in 0..grid.len() {
        let mut jet = grid.base_jet(n);
        if let Some(fj) = &jets {
            jet.add_scaled(&fj.ambient_jet(grid, n), 1.0);
        }
        let g00 = dot(&jet.d1[0], &jet.d1[0]);
        let g01 = dot(&jet.d1[0], &jet.d1[1]);
        let g11 = dot(&jet.d1[1], &jet.d1[1]);
        let det = g00 * g11 - g01 * g01;
        if !(det > 1e-12) {
            return Err(LabError::DegenerateMetric { node: n, det });
        }
        total += gaussian_weight(dot(&jet.x, &jet.x)) * det.sqrt() * grid.area[n];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileCurve;

    fn round_grid(ny: usize, y_max: f64) -> CylinderGrid {
        build_grid(ProfileCurve::circle(2f64.sqrt(), 128), y_max, ny, 3).unwrap()
    }

    #[test]
    fn positions_on_round_cylinder() {
        let g = round_grid(65, 12.0);
        for n in [0, 17, 4000, g.len() - 1] {
            let y = g.node(n).y;
            assert!((g.radius_sq(n) - 2.0 - y * y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = ProfileCurve::circle(2f64.sqrt(), 64);
        assert!(build_grid(c.clone(), 12.0, 64, 3).is_err());
        assert!(build_grid(c.clone(), 12.0, 31, 3).is_err());
        assert!(build_grid(c, 12.0, 65, 5).is_err());
    }

    #[test]
    fn short_axis_is_flagged() {
        let g = round_grid(65, 4.0);
        assert!(g.tail_flagged);
        assert!(g.tail_bound > 1e-3 && g.tail_bound < 1e-1);
        assert!(!round_grid(65, 12.0).tail_flagged);
    }

    #[test]
    fn area_of_round_cylinder() {
        let g = round_grid(257, 12.0);
        let f = gaussian_area(&g, None).unwrap();
        assert!((f - (2.0 * PI / 1f64.exp()).sqrt()).abs() < 1e-12);
        assert!((round_cylinder_area(2f64.sqrt()) - f).abs() < 1e-12);
    }

    #[test]
    fn drift_laplacian_examples() {
        let g = round_grid(129, 12.0);
        let f = g.tabulate(|p| p.y * p.y - 2.0);
        let lf = g.drift_laplacian(&f);
        let lin = g.drift_laplacian(&g.tabulate(|p| p.y));
        let one = g.drift_laplacian(&vec![1.0; g.len()]);
        for n in 0..g.len() {
            assert!((lf[n] + f[n]).abs() < 1e-9);
            assert!((lin[n] + 0.5 * g.node(n).y).abs() < 1e-11);
            assert!(one[n].abs() < 1e-11);
        }
    }

    #[test]
    fn cutoff_is_smooth_step() {
        assert_eq!(cutoff(0.0, 6.0), 1.0);
        assert_eq!(cutoff(5.0, 6.0), 1.0);
        assert_eq!(cutoff(-6.0, 6.0), 0.0);
        assert!((cutoff(5.5, 6.0) - 0.5).abs() < 1e-15);
        assert!(cutoff(5.2, 6.0) > cutoff(5.8, 6.0));
    }

    #[test]
    fn norm_rejects_unsupported() {
        let g = round_grid(65, 12.0);
        let f = vec![0.0; g.len()];
        assert!(matches!(
            g.weighted_norm(&[&f], 4, 2, Region::Entire),
            Err(LabError::UnsupportedNorm { .. })
        ));
        assert!(g.weighted_norm(&[&f], 1, 4, Region::Entire).is_err());
        assert_eq!(g.weighted_norm(&[&f], 2, 2, Region::Entire).unwrap().value, 0.0);
    }
}
