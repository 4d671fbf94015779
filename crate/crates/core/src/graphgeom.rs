//! Pointwise geometry of normal graphs `Γ_U = {X + U}` over a cylinder grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::{CylinderGrid, Region, WeightedNormResult};
use crate::error::{LabError, Result};
use crate::field::{FieldJets, NormalField};
use crate::jet::{axpy, dot, norm, scale, JetFailure, LocalGeometry, Sym2, Sym3, V4, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryOptions {
    /// Lower bound for `|H|`; `None` means one tenth of the smallest
    /// profile curvature.
    pub h_threshold: Option<f64>,
    /// Graph regularity threshold on `|U|_{C^2}`.
    pub eps2: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions {
            h_threshold: None,
            eps2: 0.05,
        }
    }
}

impl GeometryOptions {
    pub fn threshold(&self, grid: &CylinderGrid) -> f64 {
        self.h_threshold
            .unwrap_or_else(|| 0.1 * grid.profile.kappa_range().0)
    }
}

/// Stored per-node quantities of a graph.
#[derive(Debug, Clone)]
pub struct NodeGeometry {
    pub xa: [V4; 2],
    pub g: Sym2<f64>,
    pub ginv: Sym2<f64>,
    pub a: Sym2<V4>,
    pub h: V4,
    pub h_norm: f64,
    pub n: V4,
    pub grad_h: [V4; 2],
    pub x_tangent: [f64; 2],
    pub phi: V4,
    pub tau: Sym2<V4>,
    pub grad_tau: Sym3<V4>,
    pub grad_tau_sq: f64,
    pub a2: Sym2<f64>,
    pub a_sq: f64,
    pub p: f64,
}

impl From<&LocalGeometry> for NodeGeometry {
    fn from(l: &LocalGeometry) -> Self {
        NodeGeometry {
            xa: l.xa,
            g: l.g,
            ginv: l.ginv,
            a: l.a,
            h: l.h,
            h_norm: l.h_norm,
            n: l.n,
            grad_h: l.grad_h,
            x_tangent: l.x_tangent_coords(),
            phi: l.phi,
            tau: l.tau,
            grad_tau: l.grad_tau,
            grad_tau_sq: l.grad_tau_sq,
            a2: l.a2,
            a_sq: l.a_sq,
            p: l.p,
        }
    }
}

impl NodeGeometry {
    pub fn project(&self, v: &V4) -> V4 {
        let b = [dot(&self.xa[0], v), dot(&self.xa[1], v)];
        let mut out = *v;
        for a in 0..2 {
            let c = self.ginv[a][0] * b[0] + self.ginv[a][1] * b[1];
            axpy(&mut out, -c, &self.xa[a]);
        }
        out
    }

    /// Orthonormal basis of the normal space by Gram-Schmidt of the ambient
    /// basis against the tangent plane.
    pub fn normal_frame(&self, ambient_dim: usize) -> Vec<V4> {
        let mut frame: Vec<V4> = Vec::new();
        for k in 0..ambient_dim {
            let mut e = ZERO;
            e[k] = 1.0;
            let mut v = self.project(&e);
            for f in &frame {
                let c = dot(&v, f);
                axpy(&mut v, -c, f);
            }
            let len = norm(&v);
            if len > 1e-8 {
                frame.push(scale(1.0 / len, &v));
            }
            if frame.len() == ambient_dim - 2 {
                break;
            }
        }
        frame
    }
}

#[derive(Debug, Clone)]
pub struct GeometryState {
    pub nodes: Vec<NodeGeometry>,
    pub h_threshold: f64,
}

/// Evaluate a pointwise function of the local geometry of `Γ_{sU}` at every
/// node. Failures are reported at the lowest failing node index.
pub fn map_graph<T: Send>(
    grid: &CylinderGrid,
    jets: Option<&FieldJets>,
    s: f64,
    h_threshold: f64,
    f: impl Fn(usize, &LocalGeometry) -> T + Sync,
) -> Result<Vec<T>> {
    let results: Vec<std::result::Result<T, LabError>> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let mut jet = grid.base_jet(node);
            if let Some(fj) = jets {
                jet.add_scaled(&fj.ambient_jet(grid, node), s);
            }
            match LocalGeometry::from_jet(&jet) {
                Err(JetFailure::Metric(det)) => Err(LabError::DegenerateMetric { node, det }),
                Ok(geo) if geo.h_norm < h_threshold => Err(LabError::MeanCurvatureVanishes {
                    node,
                    value: geo.h_norm,
                    threshold: h_threshold,
                }),
                Ok(geo) => Ok(f(node, &geo)),
            }
        })
        .collect();
    results.into_iter().collect()
}

/// All pointwise geometric quantities of `Γ_U`.
pub fn evaluate_geometry(
    grid: &CylinderGrid,
    field: &NormalField,
    opts: &GeometryOptions,
) -> Result<GeometryState> {
    if field.c2_norm > opts.eps2 {
        return Err(LabError::GraphRegularity {
            norm: field.c2_norm,
            limit: opts.eps2,
        });
    }
    let threshold = opts.threshold(grid);
    let jets = field.jets(grid);
    let nodes = map_graph(grid, Some(&jets), 1.0, threshold, |_, g| NodeGeometry::from(g))?;
    Ok(GeometryState {
        nodes,
        h_threshold: threshold,
    })
}

/// The quantity `P` at every node.
pub fn compute_p(state: &GeometryState) -> Vec<f64> {
    state.nodes.iter().map(|n| n.p).collect()
}

/// `‖|∇⊥τ|²‖_{L¹}` over a region.
pub fn grad_tau_norm(state: &GeometryState, grid: &CylinderGrid, region: Region) -> WeightedNormResult {
    let f: Vec<f64> = state.nodes.iter().map(|n| n.grad_tau_sq).collect();
    WeightedNormResult {
        value: grid.integrate_region(&f, region),
        k: 0,
        p: 1,
        region,
        tail_bound: grid.tail_bound,
    }
}

impl GeometryState {
    /// Ambient components of `φ` as four grid functions.
    pub fn phi_components(&self) -> [Vec<f64>; 4] {
        std::array::from_fn(|k| self.nodes.iter().map(|n| n.phi[k]).collect())
    }

    /// `max |∇⊥_i H + A(x^T, X_i)/2 + ∇⊥_i φ|` with `∇⊥φ = Π ∂φ` taken by
    /// finite differences of `φ` on the grid. Nodes within `margin` of the
    /// axial ends are skipped.
    pub fn grad_h_identity_defect(&self, grid: &CylinderGrid, margin: usize) -> f64 {
        let comps = self.phi_components();
        let ds: Vec<Vec<f64>> = comps.iter().map(|c| grid.d_sigma(c, 1)).collect();
        let dy: Vec<Vec<f64>> = comps.iter().map(|c| grid.d_y(c, 1)).collect();
        let mut worst: f64 = 0.0;
        for (node, ng) in self.nodes.iter().enumerate() {
            let (_, j) = grid.ij(node);
            if j < margin || j + margin >= grid.ny {
                continue;
            }
            for i in 0..2 {
                let raw: V4 = std::array::from_fn(|k| if i == 0 { ds[k][node] } else { dy[k][node] });
                let mut v = ng.project(&raw);
                for k in 0..4 {
                    v[k] += ng.grad_h[i][k];
                }
                for b in 0..2 {
                    axpy(&mut v, 0.5 * ng.x_tangent[b], &ng.a[b][i]);
                }
                worst = worst.max(norm(&v));
            }
        }
        worst
    }

    /// Per-node CSV: indices, metric, `|A|²`, `|H|`, `φ`, `P`.
    pub fn to_csv(&self, grid: &CylinderGrid) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "i", "j", "sigma", "y", "g00", "g01", "g11", "a_sq", "h_norm", "phi1", "phi2", "phi3",
            "phi4", "grad_tau_sq", "p",
        ])
        .map_err(csv_err)?;
        for (node, n) in self.nodes.iter().enumerate() {
            let info = grid.node(node);
            let row = [
                info.i.to_string(),
                info.j.to_string(),
                format!("{:.16e}", info.sigma),
                format!("{:.16e}", info.y),
                format!("{:.16e}", n.g[0][0]),
                format!("{:.16e}", n.g[0][1]),
                format!("{:.16e}", n.g[1][1]),
                format!("{:.16e}", n.a_sq),
                format!("{:.16e}", n.h_norm),
                format!("{:.16e}", n.phi[0]),
                format!("{:.16e}", n.phi[1]),
                format!("{:.16e}", n.phi[2]),
                format!("{:.16e}", n.phi[3]),
                format!("{:.16e}", n.grad_tau_sq),
                format!("{:.16e}", n.p),
            ];
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> LabError {
    LabError::InvalidInput(format!("csv: {e}"))
}
