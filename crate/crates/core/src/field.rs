//! Normal vector fields `U = u N + u_z ∂z` on a cylinder grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cylinder::{cutoff, ji, CylinderGrid, NodeInfo, ScalarJets};
use crate::error::{LabError, Result};
use crate::jet::{axpy, Jet, V4, ZERO};

#[derive(Debug, Clone)]
pub struct NormalField {
    pub u: Vec<f64>,
    /// Component along the trivial direction `∂z` (ambient dimension 4 only).
    pub uz: Option<Vec<f64>>,
    /// Axial radius of the support; `None` for fields that are not cut off.
    pub support_radius: Option<f64>,
    pub c2_norm: f64,
    pub c3_norm: f64,
}

/// Derivative jets of both components of a field.
#[derive(Debug, Clone)]
pub struct FieldJets {
    pub u: ScalarJets,
    pub uz: Option<ScalarJets>,
}

const BINOM: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0],
    [1.0, 3.0, 3.0, 1.0],
];

/// `d^k N / dσ^k` for `k = 0..=3` at a profile node, as ambient vectors.
pub fn normal_derivatives(grid: &CylinderGrid, i: usize) -> [V4; 4] {
    let p = &grid.profile;
    let t = p.tangent[i];
    let n = p.normal[i];
    let k = p.kappa[i];
    let kd = p.kappa_dot[i];
    let kdd = p.kappa_ddot[i];
    let lift = |ct: f64, cn: f64| [ct * t[0] + cn * n[0], ct * t[1] + cn * n[1], 0.0, 0.0];
    [
        lift(0.0, 1.0),
        lift(k, 0.0),
        lift(kd, -k * k),
        lift(kdd - k * k * k, -3.0 * k * kd),
    ]
}

impl FieldJets {
    /// 3-jet of the ambient vector field `u N + u_z e_4` at a node.
    pub fn ambient_jet(&self, grid: &CylinderGrid, node: usize) -> Jet {
        let (i, _) = grid.ij(node);
        let nd = normal_derivatives(grid, i);
        let uj = self.u.at(node);
        let wj = self.uz.as_ref().map(|w| w.at(node));
        Jet::from_multi(|a, b| {
            let mut v = ZERO;
            for a2 in 0..=a {
                axpy(&mut v, BINOM[a][a2] * uj[ji(a2, b)], &nd[a - a2]);
            }
            if let Some(w) = &wj {
                v[3] += w[ji(a, b)];
            }
            v
        })
    }

    /// Raw jet entries of `(u, u_z)` at a node.
    pub fn scalars(&self, node: usize) -> ([f64; 10], [f64; 10]) {
        (
            self.u.at(node),
            self.uz.as_ref().map_or([0.0; 10], |w| w.at(node)),
        )
    }
}

impl NormalField {
    pub fn new(
        grid: &CylinderGrid,
        u: Vec<f64>,
        uz: Option<Vec<f64>>,
        support_radius: Option<f64>,
    ) -> Result<NormalField> {
        if u.len() != grid.len() || uz.as_ref().is_some_and(|w| w.len() != grid.len()) {
            return Err(LabError::InvalidInput("field size does not match grid".into()));
        }
        if uz.is_some() && grid.ambient_dim < 4 {
            return Err(LabError::InvalidInput(
                "z-components need ambient dimension 4".into(),
            ));
        }
        if let Some(r) = support_radius {
            for n in 0..grid.len() {
                let y = grid.node(n).y;
                let w = uz.as_ref().map_or(0.0, |w| w[n]);
                if y.abs() >= r && (u[n] != 0.0 || w != 0.0) {
                    return Err(LabError::SupportViolation(format!(
                        "field nonzero at y = {y} beyond support radius {r}"
                    )));
                }
            }
        }
        let mut f = NormalField {
            u,
            uz,
            support_radius,
            c2_norm: 0.0,
            c3_norm: 0.0,
        };
        f.refresh_norms(grid);
        Ok(f)
    }

    pub fn zero(grid: &CylinderGrid) -> NormalField {
        NormalField {
            u: vec![0.0; grid.len()],
            uz: None,
            support_radius: Some(0.0),
            c2_norm: 0.0,
            c3_norm: 0.0,
        }
    }

    /// Tabulate `(u, u_z)` from base-node data.
    pub fn from_fn(
        grid: &CylinderGrid,
        f: impl Fn(&NodeInfo) -> (f64, f64),
        with_z: bool,
        support_radius: Option<f64>,
    ) -> Result<NormalField> {
        let vals: Vec<(f64, f64)> = (0..grid.len()).map(|n| f(&grid.node(n))).collect();
        let u = vals.iter().map(|v| v.0).collect();
        let uz = with_z.then(|| vals.iter().map(|v| v.1).collect());
        NormalField::new(grid, u, uz, support_radius)
    }

    fn refresh_norms(&mut self, grid: &CylinderGrid) {
        let mut comps: Vec<&[f64]> = vec![&self.u];
        if let Some(w) = &self.uz {
            comps.push(w);
        }
        let p3 = grid.pointwise_sobolev(&comps, 3);
        let p2 = grid.pointwise_sobolev(&comps, 2);
        self.c2_norm = p2.into_iter().fold(0.0, f64::max);
        self.c3_norm = p3.into_iter().fold(0.0, f64::max);
    }

    pub fn has_z(&self) -> bool {
        self.uz.is_some()
    }

    pub fn components(&self) -> Vec<&[f64]> {
        let mut c: Vec<&[f64]> = vec![&self.u];
        if let Some(w) = &self.uz {
            c.push(w);
        }
        c
    }

    pub fn jets(&self, grid: &CylinderGrid) -> FieldJets {
        FieldJets {
            u: grid.jets(&self.u),
            uz: self.uz.as_ref().map(|w| grid.jets(w)),
        }
    }

    /// Multiply by a constant; sup norms scale exactly.
    pub fn scaled(&self, s: f64) -> NormalField {
        NormalField {
            u: self.u.iter().map(|v| s * v).collect(),
            uz: self.uz.as_ref().map(|w| w.iter().map(|v| s * v).collect()),
            support_radius: self.support_radius,
            c2_norm: s.abs() * self.c2_norm,
            c3_norm: s.abs() * self.c3_norm,
        }
    }

    /// `Σ c_k F_k`.
    pub fn combination(grid: &CylinderGrid, terms: &[(f64, &NormalField)]) -> Result<NormalField> {
        let mut u = vec![0.0; grid.len()];
        let mut uz: Option<Vec<f64>> = None;
        let mut support: Option<f64> = Some(0.0);
        for (c, f) in terms {
            for (a, b) in u.iter_mut().zip(&f.u) {
                *a += c * b;
            }
            if let Some(w) = &f.uz {
                let acc = uz.get_or_insert_with(|| vec![0.0; grid.len()]);
                for (a, b) in acc.iter_mut().zip(w) {
                    *a += c * b;
                }
            }
            support = match (support, f.support_radius) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
        }
        NormalField::new(grid, u, uz, support)
    }

    /// Multiply by the smooth axial cutoff ending at `radius`.
    pub fn cut(&self, grid: &CylinderGrid, radius: f64) -> Result<NormalField> {
        let chi: Vec<f64> = (0..grid.len()).map(|n| cutoff(grid.node(n).y, radius)).collect();
        let u = self.u.iter().zip(&chi).map(|(a, c)| a * c).collect();
        let uz = self
            .uz
            .as_ref()
            .map(|w| w.iter().zip(&chi).map(|(a, c)| a * c).collect());
        let support = Some(self.support_radius.map_or(radius, |r| r.min(radius)));
        NormalField::new(grid, u, uz, support)
    }

    /// Random smooth field: low Fourier modes in σ times low powers of `y`,
    /// cut off at `support_radius`.
    pub fn random_smooth(
        grid: &CylinderGrid,
        seed: u64,
        support_radius: f64,
        with_z: bool,
    ) -> Result<NormalField> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        const MODES: usize = 3;
        const DEGREE: usize = 3;
        let coef = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..(2 * MODES + 1) * (DEGREE + 1))
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect()
        };
        let cu = coef(&mut rng);
        let cz = coef(&mut rng);
        let length = grid.profile.length;
        let eval = |c: &[f64], p: &NodeInfo| {
            let t = std::f64::consts::TAU * p.sigma / length;
            let yv = p.y / 3.0;
            let mut s = 0.0;
            let mut k = 0;
            for m in 0..=2 * MODES {
                let trig = match m {
                    0 => 1.0,
                    m if m % 2 == 1 => ((m / 2 + 1) as f64 * t).cos(),
                    m => ((m / 2) as f64 * t).sin(),
                };
                let mut yp = 1.0;
                for _ in 0..=DEGREE {
                    s += c[k] * trig * yp;
                    yp *= yv;
                    k += 1;
                }
            }
            s * cutoff(p.y, support_radius)
        };
        let z = with_z && grid.ambient_dim == 4;
        NormalField::from_fn(
            grid,
            |p| (eval(&cu, p), if z { eval(&cz, p) } else { 0.0 }),
            z,
            Some(support_radius),
        )
    }

    /// Rescale so that `|U|_{C^2}` equals `target`.
    pub fn normalized_c2(&self, target: f64) -> Result<NormalField> {
        if !(self.c2_norm > 0.0) {
            return Err(LabError::InvalidInput("cannot normalize a zero field".into()));
        }
        Ok(self.scaled(target / self.c2_norm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::build_grid;
    use crate::profile::ProfileCurve;

    fn grid4() -> CylinderGrid {
        build_grid(ProfileCurve::circle(2f64.sqrt(), 64), 12.0, 97, 4).unwrap()
    }

    #[test]
    fn support_is_enforced() {
        let g = grid4();
        let bad = NormalField::from_fn(&g, |p| (p.y, 0.0), false, Some(6.0));
        assert!(matches!(bad, Err(LabError::SupportViolation(_))));
        let good = NormalField::from_fn(&g, |p| (p.y * cutoff(p.y, 6.0), 0.0), false, Some(6.0));
        assert!(good.is_ok());
    }

    #[test]
    fn z_needs_four_dimensions() {
        let g = build_grid(ProfileCurve::circle(2f64.sqrt(), 64), 12.0, 97, 3).unwrap();
        assert!(NormalField::from_fn(&g, |_| (0.0, 1.0), true, None).is_err());
    }

    #[test]
    fn random_fields_are_deterministic() {
        let g = grid4();
        let a = NormalField::random_smooth(&g, 7, 6.0, true).unwrap();
        let b = NormalField::random_smooth(&g, 7, 6.0, true).unwrap();
        let c = NormalField::random_smooth(&g, 8, 6.0, true).unwrap();
        assert_eq!(a.u, b.u);
        assert_ne!(a.u, c.u);
        assert!(a.c2_norm > 0.0 && a.c3_norm >= a.c2_norm);
    }

    #[test]
    fn constant_normal_field_jet() {
        let g = grid4();
        let f = NormalField::from_fn(&g, |_| (1.0, 0.0), false, None).unwrap();
        let jets = f.jets(&g);
        let n = g.idx(5, 40);
        let jet = jets.ambient_jet(&g, n);
        let nd = normal_derivatives(&g, 5);
        for k in 0..4 {
            assert!((jet.d1[0][k] - nd[1][k]).abs() < 1e-12);
        }
    }
}
