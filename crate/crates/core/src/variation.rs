//! Variations of geometric quantities along `s ↦ Γ_{sU}`.
//!
//! Two routes are kept side by side: closed-form first variations at `s = 0`
//! assembled from the base geometry and the jets of `U`, and centered finite
//! differences in `s` of the same pointwise quantities with one Richardson
//! level. Both use identical spatial jets, so their gap measures only the
//! `s`-truncation error and any error in the formulas themselves.
//!
//! The analytic formulas assume the base is a cylinder in arclength
//! coordinates: `g = δ`, vanishing Christoffel symbols, and the parallel
//! normal frame `{N, ∂z}`, so `∇⊥(u N + w ∂z) = ∇u N + ∇w ∂z`.

use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::{ji, CylinderGrid};
use crate::error::{LabError, Result};
use crate::field::{FieldJets, NormalField};
use crate::graphgeom::{csv_err, map_graph};
use crate::jacobi::{inner, KernelBasis, KernelPart};
use crate::jet::{axpy, dot, norm3_sq, scale, LocalGeometry, Sym2, Sym3, V4, ZERO};

/// Default `s`-step.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// Pointwise `|∇⊥τ|²`.
    GradTauSq,
    /// `∫ |∇⊥τ|² ρ`.
    GradTauSqIntegral,
    /// Pointwise `P`.
    P,
    /// `∫ |P| ρ`.
    AbsPIntegral,
    /// Ambient components of `φ`.
    Phi,
    /// `g_00, g_01, g_11`.
    Metric,
    /// Ambient components of `A_00, A_01, A_11`.
    SecondFundamental,
    HNorm,
    /// Gaussian area of the graph.
    Area,
}

impl std::str::FromStr for Quantity {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "grad-tau-sq" => Quantity::GradTauSq,
            "grad-tau-sq-integral" => Quantity::GradTauSqIntegral,
            "p" => Quantity::P,
            "abs-p-integral" => Quantity::AbsPIntegral,
            "phi" => Quantity::Phi,
            "metric" => Quantity::Metric,
            "second-fundamental" => Quantity::SecondFundamental,
            "h-norm" => Quantity::HNorm,
            "area" => Quantity::Area,
            other => return Err(LabError::InvalidInput(format!("unknown quantity '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeEstimate {
    /// Richardson-extrapolated derivative, flattened over nodes and components.
    pub value: Vec<f64>,
    pub order: u8,
    pub step: f64,
    /// `max |R - D(h/2)|`.
    pub richardson_error: f64,
    /// Convergence order observed from the raw differences at h, h/2, h/4.
    pub observed_order: f64,
    pub fd_scheme: String,
}

impl DerivativeEstimate {
    pub fn max_abs(&self) -> f64 {
        self.value.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sample a flattened pointwise quantity at the given values of `s`.
fn sample(
    grid: &CylinderGrid,
    jets: &FieldJets,
    s: f64,
    f: &(impl Fn(&LocalGeometry) -> Vec<f64> + Sync),
) -> Result<Vec<f64>> {
    let per_node = map_graph(grid, Some(jets), s, 0.0, |_, g| f(g))?;
    Ok(per_node.into_iter().flatten().collect())
}

/// Centered differences at `h, h/2, h/4` and one Richardson level.
fn richardson(
    samples: &dyn Fn(f64) -> Result<Vec<f64>>,
    order: u8,
    step: f64,
) -> Result<DerivativeEstimate> {
    let floor = if order == 1 { 1e-6 } else { 1e-4 };
    if step < floor {
        return Err(LabError::StepUnderflow { step });
    }
    let zero = if order == 2 { Some(samples(0.0)?) } else { None };
    let diff = |h: f64| -> Result<Vec<f64>> {
        let p = samples(h)?;
        let m = samples(-h)?;
        Ok(match &zero {
            None => p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            Some(z) => p
                .iter()
                .zip(&m)
                .zip(z)
                .map(|((a, b), c)| (a - 2.0 * c + b) / (h * h))
                .collect(),
        })
    };
    let d1 = diff(step)?;
    let d2 = diff(step / 2.0)?;
    let d4 = diff(step / 4.0)?;
    let value: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let richardson_error = value
        .iter()
        .zip(&d2)
        .fold(0.0f64, |m, (r, b)| m.max((r - b).abs()));
    let gap12 = d1.iter().zip(&d2).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let gap24 = d2.iter().zip(&d4).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let observed_order = if gap24 > 0.0 { (gap12 / gap24).log2() } else { f64::NAN };
    Ok(DerivativeEstimate {
        value,
        order,
        step,
        richardson_error,
        observed_order,
        fd_scheme: format!(
            "centered {}-point, steps h, h/2, h/4, Richardson on (h, h/2)",
            if order == 1 { 2 } else { 3 }
        ),
    })
}

fn check_regularity(u: &NormalField, step: f64, eps2: f64) -> Result<()> {
    if step * u.c2_norm > eps2 {
        return Err(LabError::GraphRegularity {
            norm: step * u.c2_norm,
            limit: eps2,
        });
    }
    Ok(())
}

/// Derivative in `s` of a named quantity along `Γ_{sU}` at `s = 0`.
pub fn numeric_s_derivative(
    q: Quantity,
    grid: &CylinderGrid,
    u: &NormalField,
    order: u8,
    step: f64,
) -> Result<DerivativeEstimate> {
    if order != 1 && order != 2 {
        return Err(LabError::InvalidInput("derivative order must be 1 or 2".into()));
    }
    check_regularity(u, step, 0.05)?;
    let jets = u.jets(grid);
    let pointwise = |f: fn(&LocalGeometry) -> Vec<f64>| {
        let jets = &jets;
        move |s: f64| sample(grid, jets, s, &f)
    };
    let integral = |f: fn(&LocalGeometry) -> f64| {
        let jets = &jets;
        move |s: f64| {
            let vals = map_graph(grid, Some(jets), s, 0.0, |_, g| f(g))?;
            Ok(vec![grid.integrate(&vals)])
        }
    };
    match q {
        Quantity::GradTauSq => richardson(&pointwise(|g| vec![g.grad_tau_sq]), order, step),
        Quantity::P => richardson(&pointwise(|g| vec![g.p]), order, step),
        Quantity::Phi => richardson(&pointwise(|g| g.phi.to_vec()), order, step),
        Quantity::Metric => {
            richardson(&pointwise(|g| vec![g.g[0][0], g.g[0][1], g.g[1][1]]), order, step)
        }
        Quantity::SecondFundamental => richardson(
            &pointwise(|g| [g.a[0][0], g.a[0][1], g.a[1][1]].concat()),
            order,
            step,
        ),
        Quantity::HNorm => richardson(&pointwise(|g| vec![g.h_norm]), order, step),
        Quantity::GradTauSqIntegral => richardson(&integral(|g| g.grad_tau_sq), order, step),
        Quantity::AbsPIntegral => richardson(&integral(|g| g.p.abs()), order, step),
        Quantity::Area => {
            let f = |s: f64| -> Result<Vec<f64>> {
                let vals = map_graph(grid, Some(&jets), s, 0.0, |node, g| {
                    crate::cylinder::gaussian_weight(dot(&g.x, &g.x)) * g.det_g.sqrt() * grid.area[node]
                })?;
                Ok(vec![vals.iter().sum()])
            };
            richardson(&f, order, step)
        }
    }
}

/// First variations at one node.
#[derive(Debug, Clone)]
pub struct NodeVariation {
    /// `Π_s` as a 4x4 matrix.
    pub pi_s: [[f64; 4]; 4],
    pub g_s: Sym2<f64>,
    pub a_s: Sym2<V4>,
    pub h_norm_s: f64,
    pub n_s: V4,
    /// `∇_l |H|_s`.
    pub grad_h_norm_s: [f64; 2],
    /// `∇⊥_l (A_ij)_s` stored `[l][i][j]`.
    pub grad_a_s: Sym3<V4>,
    /// `(∇⊥τ)_s` including the variation of the connection.
    pub grad_tau_s: Sym3<V4>,
    /// `(∇⊥τ)_s` from the normal-projection terms alone, without the
    /// `-(Γ^m_{li})_s τ_mj - (Γ^m_{lj})_s τ_im` correction.
    pub grad_tau_s_projection_only: Sym3<V4>,
}

#[derive(Debug, Clone)]
pub struct FirstVariationSet {
    pub nodes: Vec<NodeVariation>,
}

/// Normal vector `a N + b ∂z` from the base normal.
#[inline]
fn nvec(n: &V4, a: f64, b: f64) -> V4 {
    [a * n[0], a * n[1], a * n[2], a * n[3] + b]
}

fn node_variation(base: &LocalGeometry, uj: &[f64; 10], wj: &[f64; 10]) -> NodeVariation {
    let n = &base.n;
    let gi = &base.ginv;
    let xa = &base.xa;
    let a = &base.a;
    let hn = base.h_norm;
    let d = |k: usize| nvec(n, uj[k], wj[k]);
    let v = d(0);
    let dv = [d(ji(1, 0)), d(ji(0, 1))];
    let cnt = |idx: &[usize]| {
        let ny: usize = idx.iter().sum();
        ji(idx.len() - ny, ny)
    };
    let ddv = |i: usize, j: usize| d(cnt(&[i, j]));
    let dddv = |i: usize, j: usize, l: usize| d(cnt(&[i, j, l]));
    let mut av = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            av[i][j] = dot(&a[i][j], &v);
        }
    }
    // Π_s(W) = -Π(∇_{W^T} V) - X_j g^{ij} <Π ∇_{X_i} V, W>
    let mut pi_s = [[0.0; 4]; 4];
    for k in 0..4 {
        let mut w = ZERO;
        w[k] = 1.0;
        let mut out = ZERO;
        for p in 0..2 {
            for q in 0..2 {
                axpy(&mut out, -gi[p][q] * dot(&xa[q], &w), &dv[p]);
                axpy(&mut out, -gi[p][q] * dot(&dv[p], &w), &xa[q]);
            }
        }
        for r in 0..4 {
            pi_s[r][k] = out[r];
        }
    }
    let mut g_s = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g_s[i][j] = -2.0 * av[i][j];
        }
    }
    // (A_ij)_s = -X_l <∇⊥_l V, A_ij> + (∇⊥∇⊥V)_ij - A^V_il A_jl
    let mut a_s = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut out = ddv(i, j);
            for l in 0..2 {
                for m in 0..2 {
                    axpy(&mut out, -gi[l][m] * dot(&dv[m], &a[i][j]), &xa[l]);
                    axpy(&mut out, -gi[l][m] * av[i][l], &a[j][m]);
                }
            }
            a_s[i][j] = out;
        }
    }
    // |H|_s = -<N, Δ⊥V + A^V_ij A_ij>
    let mut lap_v = ZERO;
    let mut ava = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            axpy(&mut lap_v, gi[i][j], &ddv(i, j));
            for p in 0..2 {
                for q in 0..2 {
                    axpy(&mut ava, gi[i][p] * gi[j][q] * av[i][j], &a[p][q]);
                }
            }
        }
    }
    let inner_term = [lap_v[0] + ava[0], lap_v[1] + ava[1], lap_v[2] + ava[2], lap_v[3] + ava[3]];
    let h_norm_s = -dot(n, &inner_term);
    // H_s = -(g^ij)_s A_ij - g^ij (A_ij)_s, then N_s = (H_s - |H|_s N)/|H|
    let mut h_s = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            let mut ginv_s = 0.0;
            for l in 0..2 {
                for m in 0..2 {
                    ginv_s += 2.0 * gi[i][l] * av[l][m] * gi[m][j];
                }
            }
            axpy(&mut h_s, -ginv_s, &a[i][j]);
            axpy(&mut h_s, -gi[i][j], &a_s[i][j]);
        }
    }
    let mut n_s = h_s;
    axpy(&mut n_s, -h_norm_s, n);
    let n_s = scale(1.0 / hn, &n_s);
    // ∇⊥N on the base
    let mut grad_n = [ZERO; 2];
    for l in 0..2 {
        let mut t = base.grad_h[l];
        axpy(&mut t, -base.grad_h_norm[l], n);
        grad_n[l] = scale(1.0 / hn, &t);
    }
    let an = |i: usize, j: usize| dot(&a[i][j], n);
    // ∇|H|_s
    let mut grad_h_norm_s = [0.0; 2];
    for l in 0..2 {
        let mut lap_dv = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                axpy(&mut lap_dv, gi[i][j], &dddv(i, j, l));
            }
        }
        let mut val = -dot(&grad_n[l], &inner_term) - dot(n, &lap_dv);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        let c = gi[i][p] * gi[j][q];
                        if c == 0.0 {
                            continue;
                        }
                        val -= c
                            * an(i, j)
                            * (dot(&base.grad_a[l][p][q], &v) + dot(&a[p][q], &dv[l]));
                        val -= c * av[i][j] * dot(n, &base.grad_a[l][p][q]);
                    }
                }
            }
        }
        grad_h_norm_s[l] = val;
    }
    // ∇⊥_l (A_ij)_s
    let mut grad_a_s = [[[ZERO; 2]; 2]; 2];
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut out = dddv(i, j, l);
                for m in 0..2 {
                    for k in 0..2 {
                        let c = gi[m][k];
                        if c == 0.0 {
                            continue;
                        }
                        axpy(&mut out, -c * dot(&dv[k], &a[i][j]), &a[m][l]);
                        axpy(&mut out, -c * dot(&base.grad_a[l][i][m], &v), &a[j][k]);
                        axpy(&mut out, -c * dot(&a[i][m], &dv[l]), &a[j][k]);
                        axpy(&mut out, -c * av[i][m], &base.grad_a[l][j][k]);
                    }
                }
                grad_a_s[l][i][j] = out;
            }
        }
    }
    // (∇⊥τ)_s = Π_s(∇τ) + Π∇(τ_s) - (Γ_s)·τ
    let tau = &base.tau;
    let mut proj_only = [[[ZERO; 2]; 2]; 2];
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut out = ZERO;
                for m in 0..2 {
                    for k in 0..2 {
                        axpy(&mut out, gi[m][k] * dot(&a[i][j], &a[l][m]) / hn, &dv[k]);
                    }
                }
                let mut inner_v = a_s[i][j];
                axpy(&mut inner_v, -h_norm_s, &tau[i][j]);
                let inner_v = base.project(&inner_v);
                axpy(&mut out, -base.grad_h_norm[l] / (hn * hn), &inner_v);
                axpy(&mut out, 1.0 / hn, &grad_a_s[l][i][j]);
                axpy(&mut out, -grad_h_norm_s[l] / hn, &tau[i][j]);
                proj_only[l][i][j] = out;
            }
        }
    }
    // ∇_c (g_ab)_s = -2 (<∇⊥_c A_ab, V> + <A_ab, ∇⊥_c V>)
    let mut dgs = [[[0.0; 2]; 2]; 2];
    for c in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                dgs[c][i][j] = -2.0 * (dot(&base.grad_a[c][i][j], &v) + dot(&a[i][j], &dv[c]));
            }
        }
    }
    let mut gamma_s = [[[0.0; 2]; 2]; 2];
    for m in 0..2 {
        for l in 0..2 {
            for i in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += 0.5 * gi[m][k] * (dgs[l][i][k] + dgs[i][l][k] - dgs[k][l][i]);
                }
                gamma_s[m][l][i] = s;
            }
        }
    }
    let mut grad_tau_s = proj_only;
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for m in 0..2 {
                    axpy(&mut grad_tau_s[l][i][j], -gamma_s[m][l][i], &tau[m][j]);
                    axpy(&mut grad_tau_s[l][i][j], -gamma_s[m][l][j], &tau[i][m]);
                }
            }
        }
    }
    NodeVariation {
        pi_s,
        g_s,
        a_s,
        h_norm_s,
        n_s,
        grad_h_norm_s,
        grad_a_s,
        grad_tau_s,
        grad_tau_s_projection_only: proj_only,
    }
}

fn base_geometry(grid: &CylinderGrid, node: usize) -> LocalGeometry {
    LocalGeometry::from_jet(&grid.base_jet(node)).expect("base cylinder metric is the identity")
}

/// Closed-form first variations at every node.
pub fn analytic_first_variations(grid: &CylinderGrid, u: &NormalField) -> Result<FirstVariationSet> {
    let jets = u.jets(grid);
    analytic_from_jets(grid, &jets)
}

fn analytic_from_jets(grid: &CylinderGrid, jets: &FieldJets) -> Result<FirstVariationSet> {
    let threshold = 0.1 * grid.profile.kappa_range().0;
    let nodes: Vec<Result<NodeVariation>> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let base = base_geometry(grid, node);
            if base.h_norm < threshold {
                return Err(LabError::MeanCurvatureVanishes {
                    node,
                    value: base.h_norm,
                    threshold,
                });
            }
            let (uj, wj) = jets.scalars(node);
            Ok(node_variation(&base, &uj, &wj))
        })
        .collect();
    Ok(FirstVariationSet {
        nodes: nodes.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// `(∇⊥τ)_s` at every node.
pub fn grad_tau_first_variation(grid: &CylinderGrid, u: &NormalField) -> Result<Vec<Sym3<V4>>> {
    Ok(analytic_first_variations(grid, u)?
        .nodes
        .into_iter()
        .map(|n| n.grad_tau_s)
        .collect())
}

/// Blocks of the flattened comparison layout.
pub const BLOCKS: [(&str, usize); 8] = [
    ("pi_s", 16),
    ("g_s", 4),
    ("a_s", 16),
    ("h_norm_s", 1),
    ("n_s", 4),
    ("grad_h_norm_s", 2),
    ("grad_a_s", 32),
    ("grad_tau_s", 32),
];

fn flat3(t: &Sym3<V4>, out: &mut Vec<f64>) {
    for l in t {
        for i in l {
            for j in i {
                out.extend_from_slice(j);
            }
        }
    }
}

fn flatten_analytic(v: &NodeVariation, grad_tau: &Sym3<V4>) -> Vec<f64> {
    let mut out = Vec::with_capacity(107);
    for r in &v.pi_s {
        out.extend_from_slice(r);
    }
    out.extend(v.g_s.iter().flatten());
    for i in &v.a_s {
        for j in i {
            out.extend_from_slice(j);
        }
    }
    out.push(v.h_norm_s);
    out.extend_from_slice(&v.n_s);
    out.extend_from_slice(&v.grad_h_norm_s);
    flat3(&v.grad_a_s, &mut out);
    flat3(grad_tau, &mut out);
    out
}

fn flatten_numeric(g: &LocalGeometry, base: &LocalGeometry) -> Vec<f64> {
    let mut out = Vec::with_capacity(107);
    for r in &g.projector() {
        out.extend_from_slice(r);
    }
    out.extend(g.g.iter().flatten());
    for i in &g.a {
        for j in i {
            out.extend_from_slice(j);
        }
    }
    out.push(g.h_norm);
    out.extend_from_slice(&g.n);
    out.extend_from_slice(&g.grad_h_norm);
    // Π₀ ∂_l A_ij(s): the s-derivative of this is ∇⊥_l (A_ij)_s on the base
    let mut pa = [[[ZERO; 2]; 2]; 2];
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                pa[l][i][j] = base.project(&g.d_a[l][i][j]);
            }
        }
    }
    flat3(&pa, &mut out);
    flat3(&g.grad_tau, &mut out);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub max_analytic: f64,
    pub max_numeric: f64,
    pub max_gap: f64,
    pub relative_gap: f64,
    pub richardson_error: f64,
}

/// Compare every closed-form first variation with its finite difference
/// oracle. The last row compares the projection-only assembly of
/// `(∇⊥τ)_s` against the same oracle and is a diagnostic, not a check.
pub fn compare_first_variations(
    grid: &CylinderGrid,
    u: &NormalField,
    step: f64,
) -> Result<Vec<ComparisonRow>> {
    check_regularity(u, step, 0.05)?;
    let jets = u.jets(grid);
    let analytic = analytic_from_jets(grid, &jets)?;
    let base: Vec<LocalGeometry> = (0..grid.len())
        .into_par_iter()
        .map(|n| base_geometry(grid, n))
        .collect();
    let samples = |s: f64| -> Result<Vec<f64>> {
        let per = map_graph(grid, Some(&jets), s, 0.0, |node, g| flatten_numeric(g, &base[node]))?;
        Ok(per.into_iter().flatten().collect())
    };
    let est = richardson(&samples, 1, step)?;
    let width: usize = BLOCKS.iter().map(|b| b.1).sum();
    let mut an_full = Vec::with_capacity(width * grid.len());
    let mut an_proj = Vec::with_capacity(width * grid.len());
    for v in &analytic.nodes {
        an_full.extend(flatten_analytic(v, &v.grad_tau_s));
        an_proj.extend(flatten_analytic(v, &v.grad_tau_s_projection_only));
    }
    let mut rows = Vec::new();
    let mut offset = 0;
    for (bi, (name, size)) in BLOCKS.iter().enumerate() {
        let row = |label: String, an: &[f64]| {
            let (mut ma, mut mn, mut gap, mut err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for node in 0..grid.len() {
                for k in offset..offset + size {
                    let idx = node * width + k;
                    ma = ma.max(an[idx].abs());
                    mn = mn.max(est.value[idx].abs());
                    gap = gap.max((an[idx] - est.value[idx]).abs());
                    err = err.max(est.richardson_error);
                }
            }
            ComparisonRow {
                quantity: label,
                max_analytic: ma,
                max_numeric: mn,
                max_gap: gap,
                relative_gap: if mn > 0.0 { gap / mn } else { gap },
                richardson_error: err,
            }
        };
        rows.push(row(name.to_string(), &an_full));
        if bi == BLOCKS.len() - 1 {
            rows.push(row("grad_tau_s (projection terms only)".into(), &an_proj));
        }
        offset += size;
    }
    Ok(rows)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "max_analytic", "max_numeric", "max_gap", "relative_gap", "richardson_error"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            format!("{:.6e}", r.max_analytic),
            format!("{:.6e}", r.max_numeric),
            format!("{:.6e}", r.max_gap),
            format!("{:.6e}", r.relative_gap),
            format!("{:.6e}", r.richardson_error),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondVariationResult {
    /// `∫ 2 |(∇⊥τ)_s|² ρ` from the closed-form first variation.
    pub value: f64,
    /// `∫ (|∇⊥τ|²)_ss ρ` by finite differences in `s`.
    pub numeric_value: f64,
    pub numeric_error: f64,
    pub l2_sq: f64,
    pub ratio: f64,
    pub numeric_ratio: f64,
}

/// Relative distance of `u` from the span of the `K1` basis fields.
pub fn distance_from_k1(grid: &CylinderGrid, u: &NormalField, basis: &KernelBasis) -> Result<f64> {
    let k1: Vec<&NormalField> = basis
        .fields
        .iter()
        .filter(|b| b.part == KernelPart::K1)
        .map(|b| &b.field)
        .collect();
    let m = k1.len();
    let mut gram = nalgebra::DMatrix::zeros(m, m);
    let mut rhs = nalgebra::DVector::zeros(m);
    for a in 0..m {
        rhs[a] = inner(grid, k1[a], u);
        for b in 0..m {
            gram[(a, b)] = inner(grid, k1[a], k1[b]);
        }
    }
    let coef = gram
        .cholesky()
        .ok_or(LabError::IllConditionedGram { cond: f64::INFINITY })?
        .solve(&rhs);
    let terms: Vec<(f64, &NormalField)> = std::iter::once((1.0, u))
        .chain(coef.iter().zip(&k1).map(|(c, f)| (-c, *f)))
        .collect();
    let rest = NormalField::combination(grid, &terms)?;
    let un = inner(grid, u, u).sqrt();
    Ok(if un > 0.0 { inner(grid, &rest, &rest).sqrt() / un } else { 0.0 })
}

/// `‖D²T(J', J')‖_{L¹}` for `J'` in the span of `K1`, with the ratio to
/// `‖J'‖²_{L²}`. Fields outside `K1` are rejected.
pub fn second_variation_t_l1(
    grid: &CylinderGrid,
    jprime: &NormalField,
    basis: &KernelBasis,
) -> Result<SecondVariationResult> {
    let l2_sq = inner(grid, jprime, jprime);
    if l2_sq == 0.0 {
        return Ok(SecondVariationResult {
            value: 0.0,
            numeric_value: 0.0,
            numeric_error: 0.0,
            l2_sq: 0.0,
            ratio: 0.0,
            numeric_ratio: 0.0,
        });
    }
    let dist = distance_from_k1(grid, jprime, basis)?;
    if dist > 1e-8 {
        return Err(LabError::NotInKernel(format!(
            "field is at relative distance {dist:e} from K1"
        )));
    }
    let jets = jprime.jets(grid);
    let analytic = analytic_from_jets(grid, &jets)?;
    let pointwise: Vec<f64> = analytic
        .nodes
        .iter()
        .map(|v| 2.0 * norm3_sq(&[[1.0, 0.0], [0.0, 1.0]], &v.grad_tau_s))
        .collect();
    let value = grid.integrate(&pointwise);
    // second route: finite differences of the integral itself; scale the
    // field so the graph stays regular
    let s_scale = (0.05 / jprime.c2_norm.max(1e-300)).min(1.0);
    let step = DEFAULT_STEP * 10.0;
    let scaled = jprime.scaled(s_scale);
    let est = numeric_s_derivative(Quantity::GradTauSqIntegral, grid, &scaled, 2, step)?;
    let numeric_value = est.value[0] / (s_scale * s_scale);
    Ok(SecondVariationResult {
        value,
        numeric_value,
        numeric_error: est.richardson_error / (s_scale * s_scale),
        l2_sq,
        ratio: value / l2_sq,
        numeric_ratio: numeric_value / l2_sq,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PVariation {
    /// Pointwise `∂_s P` at `s = 0`.
    pub first: DerivativeEstimate,
    /// Pointwise `∂²_s P` at `s = 0`.
    pub second: DerivativeEstimate,
    /// `‖∂_s P‖_{L¹}`.
    pub first_l1: f64,
    /// `‖∂²_s P‖_{L¹}`.
    pub second_l1: f64,
    /// Richardson errors mapped to `L¹`.
    pub first_l1_error: f64,
    pub second_l1_error: f64,
    /// `‖V‖²_{L²}`.
    pub v_l2_sq: f64,
}

/// Finite difference checks of `DP` and `D²P(V, V)` on the base cylinder.
pub fn p_variation_checks(grid: &CylinderGrid, v: &NormalField, step: f64) -> Result<PVariation> {
    let first = numeric_s_derivative(Quantity::P, grid, v, 1, step)?;
    let second = numeric_s_derivative(Quantity::P, grid, v, 2, step)?;
    let l1 = |x: &[f64]| grid.integrate(&x.iter().map(|a| a.abs()).collect::<Vec<_>>());
    let mass = grid.integrate(&vec![1.0; grid.len()]);
    Ok(PVariation {
        first_l1: l1(&first.value),
        second_l1: l1(&second.value),
        first_l1_error: first.richardson_error * mass,
        second_l1_error: second.richardson_error * mass,
        v_l2_sq: inner(grid, v, v),
        first,
        second,
    })
}

/// `max |(∇⊥τ)_s(analytic) - (∇⊥τ)_s(numeric)|`, relative, for a field.
pub fn grad_tau_gap(grid: &CylinderGrid, u: &NormalField, step: f64) -> Result<f64> {
    let rows = compare_first_variations(grid, u, step)?;
    Ok(rows
        .iter()
        .find(|r| r.quantity == "grad_tau_s")
        .map(|r| r.relative_gap)
        .unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::{build_grid, cutoff};
    use crate::jacobi::build_kernel_basis;
    use crate::profile::ProfileCurve;

    fn round(ns: usize, ny: usize, dim: usize) -> CylinderGrid {
        build_grid(ProfileCurve::circle(2f64.sqrt(), ns), 12.0, ny, dim).unwrap()
    }

    #[test]
    fn metric_variation_is_minus_two_av() {
        let g = round(64, 65, 4);
        let u = NormalField::random_smooth(&g, 3, 6.0, true).unwrap().normalized_c2(1.0).unwrap();
        let est = numeric_s_derivative(Quantity::Metric, &g, &u, 1, 1e-3).unwrap();
        let an = analytic_first_variations(&g, &u).unwrap();
        for (n, v) in an.nodes.iter().enumerate().step_by(37) {
            assert!((est.value[3 * n] - v.g_s[0][0]).abs() < 1e-9);
            assert!((est.value[3 * n + 1] - v.g_s[0][1]).abs() < 1e-9);
        }
    }

    #[test]
    fn round_h_norm_variation() {
        // |H|_s = -Δu - u/2 on the round cylinder
        let g = round(64, 65, 3);
        let u = NormalField::from_fn(
            &g,
            |p| ((p.sigma).cos() * p.y * cutoff(p.y, 6.0), 0.0),
            false,
            Some(6.0),
        )
        .unwrap();
        let an = analytic_first_variations(&g, &u).unwrap();
        let uss = g.d_sigma(&u.u, 2);
        let uyy = g.d_y(&u.u, 2);
        for (n, v) in an.nodes.iter().enumerate() {
            let expect = -uss[n] - uyy[n] - 0.5 * u.u[n];
            assert!((v.h_norm_s - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn second_variation_guard() {
        let g = round(32, 65, 3);
        let basis = build_kernel_basis(&g).unwrap();
        let bad = NormalField::from_fn(&g, |p| (p.y, 0.0), false, None).unwrap();
        assert!(matches!(
            second_variation_t_l1(&g, &bad, &basis),
            Err(LabError::NotInKernel(_))
        ));
        let zero = NormalField::zero(&g);
        assert_eq!(second_variation_t_l1(&g, &zero, &basis).unwrap().value, 0.0);
    }

    #[test]
    fn step_underflow() {
        let g = round(32, 33, 3);
        let u = NormalField::zero(&g);
        assert!(matches!(
            numeric_s_derivative(Quantity::P, &g, &u, 1, 1e-9),
            Err(LabError::StepUnderflow { .. })
        ));
    }
}
