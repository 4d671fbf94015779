//! Jacobi fields of the cylinder, the Jacobi operator and Gaussian `L²`
//! projections onto the kernel.
//!
//! On `Γ̊ × R` with the parallel normal frame `{N, ∂z}` the operator
//! `L = 𝓛 + 1/2 + Σ <·, A_kl> A_kl` acts componentwise:
//! `L(u N + w ∂z) = (𝓛u + u/2 + κ² u) N + (𝓛w + w/2) ∂z`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cylinder::{CylinderGrid, Region};
use crate::error::{LabError, Result};
use crate::field::NormalField;
use crate::graphgeom::csv_err;

/// Largest Gram condition number accepted.
pub const MAX_GRAM_CONDITION: f64 = 1e8;

/// Relative `L²` size below which a candidate field counts as zero.
pub const PRUNE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelPart {
    K0,
    K1,
}

#[derive(Debug, Clone)]
pub struct BasisField {
    pub name: String,
    pub part: KernelPart,
    pub field: NormalField,
}

#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub fields: Vec<BasisField>,
    pub gram: DMatrix<f64>,
    pub gram_condition: f64,
    /// Candidates dropped because they vanish on this profile.
    pub pruned: Vec<String>,
}

/// `<U, V>_ρ = ∫ (u v + u_z v_z) ρ`.
pub fn inner(grid: &CylinderGrid, a: &NormalField, b: &NormalField) -> f64 {
    let mut s = 0.0;
    for n in 0..grid.len() {
        let mut v = a.u[n] * b.u[n];
        if let (Some(x), Some(y)) = (&a.uz, &b.uz) {
            v += x[n] * y[n];
        }
        s += v * grid.weight(n);
    }
    s
}

pub fn l2_norm(grid: &CylinderGrid, a: &NormalField) -> f64 {
    inner(grid, a, a).sqrt()
}

/// `‖U‖_{L²(B_r)}`.
pub fn l2_norm_ball(grid: &CylinderGrid, a: &NormalField, r: f64) -> f64 {
    let sq: Vec<f64> = (0..grid.len())
        .map(|n| a.u[n].powi(2) + a.uz.as_ref().map_or(0.0, |w| w[n].powi(2)))
        .collect();
    grid.integrate_region(&sq, Region::Ball(r)).sqrt()
}

/// `‖U‖_{W^{2,2}}`.
pub fn w22_norm(grid: &CylinderGrid, a: &NormalField) -> f64 {
    grid.weighted_norm(&a.components(), 2, 2, Region::Entire)
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
}

fn candidates(grid: &CylinderGrid) -> Result<Vec<BasisField>> {
    let mut out = Vec::new();
    let mut push = |name: &str, part, f: NormalField| {
        out.push(BasisField {
            name: name.to_string(),
            part,
            field: f,
        })
    };
    let z = grid.ambient_dim == 4;
    push(
        "rotation-x1x2",
        KernelPart::K0,
        NormalField::from_fn(grid, |p| (p.x[0] * p.normal[1] - p.x[1] * p.normal[0], 0.0), z, None)?,
    );
    push(
        "y-dx1",
        KernelPart::K0,
        NormalField::from_fn(grid, |p| (p.y * p.normal[0], 0.0), z, None)?,
    );
    push(
        "y-dx2",
        KernelPart::K0,
        NormalField::from_fn(grid, |p| (p.y * p.normal[1], 0.0), z, None)?,
    );
    if z {
        push("x1-dz", KernelPart::K0, NormalField::from_fn(grid, |p| (0.0, p.x[0]), true, None)?);
        push("x2-dz", KernelPart::K0, NormalField::from_fn(grid, |p| (0.0, p.x[1]), true, None)?);
        push("y-dz", KernelPart::K0, NormalField::from_fn(grid, |p| (0.0, p.y), true, None)?);
    }
    push(
        "yy-H",
        KernelPart::K1,
        NormalField::from_fn(grid, |p| ((p.y * p.y - 2.0) * p.kappa, 0.0), z, None)?,
    );
    Ok(out)
}

/// Symmetric eigenvalue condition number.
fn condition(gram: &DMatrix<f64>) -> f64 {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn assemble(grid: &CylinderGrid, fields: Vec<BasisField>, pruned: Vec<String>) -> Result<KernelBasis> {
    let m = fields.len();
    let mut gram = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v = inner(grid, &fields[a].field, &fields[b].field);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let cond = condition(&gram);
    if !(cond <= MAX_GRAM_CONDITION) {
        return Err(LabError::IllConditionedGram { cond });
    }
    Ok(KernelBasis {
        fields,
        gram,
        gram_condition: cond,
        pruned,
    })
}

/// Spanning fields of the kernel on the grid (not cut off).
pub fn build_kernel_basis(grid: &CylinderGrid) -> Result<KernelBasis> {
    let all = candidates(grid)?;
    let scale = all
        .iter()
        .map(|b| l2_norm(grid, &b.field))
        .fold(0.0, f64::max);
    let mut fields = Vec::new();
    let mut pruned = Vec::new();
    for b in all {
        if l2_norm(grid, &b.field) <= PRUNE_TOLERANCE * scale {
            pruned.push(b.name);
        } else {
            fields.push(b);
        }
    }
    assemble(grid, fields, pruned)
}

impl KernelBasis {
    pub fn k0(&self) -> impl Iterator<Item = &BasisField> {
        self.fields.iter().filter(|b| b.part == KernelPart::K0)
    }

    pub fn k1(&self) -> impl Iterator<Item = &BasisField> {
        self.fields.iter().filter(|b| b.part == KernelPart::K1)
    }

    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    /// The same basis multiplied by the axial cutoff ending at `radius`.
    pub fn cut(&self, grid: &CylinderGrid, radius: f64) -> Result<KernelBasis> {
        let fields = self
            .fields
            .iter()
            .map(|b| {
                Ok(BasisField {
                    name: b.name.clone(),
                    part: b.part,
                    field: b.field.cut(grid, radius)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        assemble(grid, fields, self.pruned.clone())
    }

    /// Largest `|<J0, J1>| / (‖J0‖‖J1‖)` between the two parts.
    pub fn k0_k1_overlap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, fa) in self.fields.iter().enumerate() {
            for (b, fb) in self.fields.iter().enumerate() {
                if fa.part == KernelPart::K0 && fb.part == KernelPart::K1 {
                    let c = self.gram[(a, b)] / (self.gram[(a, a)] * self.gram[(b, b)]).sqrt();
                    worst = worst.max(c.abs());
                }
            }
        }
        worst
    }

    /// Coefficients of the `L²_ρ` projection of `u` onto the span.
    pub fn coefficients(&self, grid: &CylinderGrid, u: &NormalField) -> Result<DVector<f64>> {
        let rhs = DVector::from_iterator(
            self.dim(),
            self.fields.iter().map(|b| inner(grid, &b.field, u)),
        );
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or(LabError::IllConditionedGram {
                cond: self.gram_condition,
            })?;
        Ok(chol.solve(&rhs))
    }

    /// CSV table: name, part, L² norm, kernel residual.
    pub fn to_csv(&self, grid: &CylinderGrid) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "part", "l2_norm", "residual"]).map_err(csv_err)?;
        for b in &self.fields {
            let res = kernel_residual(grid, &b.field);
            w.write_record([
                b.name.clone(),
                format!("{:?}", b.part),
                format!("{:.16e}", l2_norm(grid, &b.field)),
                format!("{:.16e}", res),
            ])
            .map_err(csv_err)?;
        }
        for name in &self.pruned {
            w.write_record([name.as_str(), "pruned", "0", "0"]).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }
}

/// `L U` on the base cylinder.
pub fn jacobi_operator(grid: &CylinderGrid, u: &NormalField) -> NormalField {
    let lu = grid.drift_laplacian(&u.u);
    let out_u: Vec<f64> = (0..grid.len())
        .map(|n| {
            let k = grid.profile.kappa[grid.ij(n).0];
            lu[n] + (0.5 + k * k) * u.u[n]
        })
        .collect();
    let out_z = u.uz.as_ref().map(|w| {
        let lw = grid.drift_laplacian(w);
        lw.iter().zip(w).map(|(a, b)| a + 0.5 * b).collect::<Vec<f64>>()
    });
    NormalField {
        u: out_u,
        uz: out_z,
        // the stencil widens the support by a few nodes
        support_radius: None,
        c2_norm: f64::NAN,
        c3_norm: f64::NAN,
    }
}

/// `‖L J‖_{L²} / ‖J‖_{L²}`.
pub fn kernel_residual(grid: &CylinderGrid, j: &NormalField) -> f64 {
    l2_norm(grid, &jacobi_operator(grid, j)) / l2_norm(grid, j)
}

#[derive(Debug, Clone, Serialize)]
pub struct PartNorms {
    pub l2: f64,
    pub w22: f64,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub u0: NormalField,
    pub jprime: NormalField,
    pub h: NormalField,
    pub coefficients: Vec<(String, f64)>,
    pub u0_norms: PartNorms,
    pub jprime_norms: PartNorms,
    pub h_norms: PartNorms,
    /// Largest of `|<U0,J'>|, |<U0,h>|, |<J',h>|` divided by `‖U‖²`.
    pub orthogonality_defect: f64,
    /// `L²_ρ` mass of the kernel part outside the field's support, relative
    /// to the full basis field; the cost of cutting the basis.
    pub tail: f64,
}

/// `U = U0 + J' + h` with `U0 ∈ K0`, `J' ∈ K1` (projections against the basis
/// cut to the support of `U`) and `h` the remainder.
pub fn project_decompose(
    grid: &CylinderGrid,
    u: &NormalField,
    basis: &KernelBasis,
) -> Result<DecompositionResult> {
    let (cut_basis, tail) = match u.support_radius {
        Some(r) if r < grid.y_max => {
            let cut = basis.cut(grid, r)?;
            let mut tail: f64 = 0.0;
            for (a, b) in basis.fields.iter().zip(&cut.fields) {
                let full = l2_norm(grid, &a.field);
                let kept = l2_norm(grid, &b.field);
                tail = tail.max(((full * full - kept * kept).max(0.0)).sqrt() / full);
            }
            (cut, tail)
        }
        _ => (basis.clone(), 0.0),
    };
    let coef = cut_basis.coefficients(grid, u)?;
    let zero = NormalField::zero(grid);
    let mut k0_terms: Vec<(f64, &NormalField)> = vec![(0.0, &zero)];
    let mut k1_terms: Vec<(f64, &NormalField)> = vec![(0.0, &zero)];
    let mut coefficients = Vec::new();
    for (c, b) in coef.iter().zip(&cut_basis.fields) {
        coefficients.push((b.name.clone(), *c));
        match b.part {
            KernelPart::K0 => k0_terms.push((*c, &b.field)),
            KernelPart::K1 => k1_terms.push((*c, &b.field)),
        }
    }
    let u0 = NormalField::combination(grid, &k0_terms)?;
    let jprime = NormalField::combination(grid, &k1_terms)?;
    let h = NormalField::combination(grid, &[(1.0, u), (-1.0, &u0), (-1.0, &jprime)])?;
    let norms = |f: &NormalField| PartNorms {
        l2: l2_norm(grid, f),
        w22: w22_norm(grid, f),
    };
    let usq = inner(grid, u, u).max(f64::MIN_POSITIVE);
    let orthogonality_defect = [
        inner(grid, &u0, &jprime),
        inner(grid, &u0, &h),
        inner(grid, &jprime, &h),
    ]
    .iter()
    .fold(0.0f64, |m, v| m.max(v.abs()))
        / usq;
    Ok(DecompositionResult {
        u0_norms: norms(&u0),
        jprime_norms: norms(&jprime),
        h_norms: norms(&h),
        u0,
        jprime,
        h,
        coefficients,
        orthogonality_defect,
        tail,
    })
}

impl DecompositionResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "coefficient"]).map_err(csv_err)?;
        for (n, c) in &self.coefficients {
            w.write_record([n.clone(), format!("{c:.16e}")]).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }
}

/// Measured growth constants of a Jacobi field relative to its mass near the
/// profile: `|J| <= C0 <x>² m`, `|∇J| + |∇²J| <= C1 <x>² m` and
/// `|∇²J(·, ∂y)| <= C2 <x> m` with `m = ‖J‖_{L²(B_{r0})}`, `r0 = diam + 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthConstants {
    pub r0: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn growth_constants(grid: &CylinderGrid, j: &NormalField) -> GrowthConstants {
    let r0 = grid.profile.diameter() + 1.0;
    let m = l2_norm_ball(grid, j, r0);
    let ju = grid.jets(&j.u);
    let jz = j.uz.as_ref().map(|w| grid.jets(w));
    let (mut c0, mut c1, mut c2) = (0.0f64, 0.0f64, 0.0f64);
    for n in 0..grid.len() {
        let br = grid.bracket_x(n);
        let mut s = [0.0f64; 3];
        let mut mixed = 0.0;
        for jet in std::iter::once(&ju).chain(jz.as_ref()) {
            let d = jet.at(n);
            s[0] += d[0] * d[0];
            s[1] += d[1] * d[1] + d[2] * d[2];
            s[2] += d[3] * d[3] + 2.0 * d[4] * d[4] + d[5] * d[5];
            mixed += d[4] * d[4] + d[5] * d[5];
        }
        c0 = c0.max(s[0].sqrt() / (br * br * m));
        c1 = c1.max((s[1].sqrt() + s[2].sqrt()) / (br * br * m));
        c2 = c2.max(mixed.sqrt() / (br * m));
    }
    GrowthConstants { r0, c0, c1, c2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::build_grid;
    use crate::profile::ProfileCurve;

    fn round(dim: usize) -> CylinderGrid {
        build_grid(ProfileCurve::circle(2f64.sqrt(), 128), 12.0, 129, dim).unwrap()
    }

    #[test]
    fn round_basis_dimensions() {
        let b3 = build_kernel_basis(&round(3)).unwrap();
        assert_eq!(b3.k0().count(), 2);
        assert_eq!(b3.k1().count(), 1);
        assert_eq!(b3.pruned, vec!["rotation-x1x2".to_string()]);
        let b4 = build_kernel_basis(&round(4)).unwrap();
        assert_eq!(b4.k0().count(), 5);
        assert!(b4.k0_k1_overlap() < 1e-12);
    }

    #[test]
    fn mean_curvature_is_eigenfield() {
        let g = round(3);
        let h = NormalField::from_fn(&g, |p| (p.kappa, 0.0), false, None).unwrap();
        let lh = jacobi_operator(&g, &h);
        for n in 0..g.len() {
            assert!((lh.u[n] - h.u[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_round_trip() {
        let g = round(4);
        let basis = build_kernel_basis(&g).unwrap();
        let coef = [0.3, -1.2, 0.5, 2.0, -0.7, 0.25];
        let terms: Vec<(f64, &NormalField)> =
            coef.iter().zip(&basis.fields).map(|(c, b)| (*c, &b.field)).collect();
        let u = NormalField::combination(&g, &terms).unwrap();
        let got = basis.coefficients(&g, &u).unwrap();
        for (a, b) in got.iter().zip(coef) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_normal_has_no_k0_part() {
        let g = round(3);
        let basis = build_kernel_basis(&g).unwrap();
        let u = NormalField::from_fn(&g, |_| (0.01, 0.0), false, None).unwrap();
        let d = project_decompose(&g, &u, &basis).unwrap();
        assert!(d.u0_norms.l2 < 1e-14);
        assert!(d.h_norms.l2 > 1e-3);
        let lu = jacobi_operator(&g, &u);
        assert!((lu.u[500] - 0.01).abs() < 1e-12);
    }
}
