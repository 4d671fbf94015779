//! Pointwise geometry of a parametrized surface in `R^4` from the 3-jet of
//! its immersion at a point.
//!
//! Everything downstream (graph geometry, numeric variations, P) goes through
//! [`LocalGeometry::from_jet`], so the only discretization error lives in the
//! jets themselves. Index conventions: coordinates `a, b, c ∈ {0, 1}` are
//! `(σ, y)`; lower-index contractions use `g^{ab}`; `A_ab = Π X_ab` and
//! `H = -g^{ab} A_ab`.

pub type V4 = [f64; 4];
pub type Sym2<T> = [[T; 2]; 2];
pub type Sym3<T> = [[[T; 2]; 2]; 2];

#[inline]
pub fn dot(a: &V4, b: &V4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[inline]
pub fn axpy(y: &mut V4, a: f64, x: &V4) {
    for k in 0..4 {
        y[k] += a * x[k];
    }
}

#[inline]
pub fn scale(a: f64, x: &V4) -> V4 {
    [a * x[0], a * x[1], a * x[2], a * x[3]]
}

#[inline]
pub fn sub(a: &V4, b: &V4) -> V4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

#[inline]
pub fn add(a: &V4, b: &V4) -> V4 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

#[inline]
pub fn norm(a: &V4) -> f64 {
    dot(a, a).sqrt()
}

pub const ZERO: V4 = [0.0; 4];

/// Position and all coordinate derivatives up to order three. Higher
/// derivative arrays are stored fully (symmetric entries duplicated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub x: V4,
    pub d1: [V4; 2],
    pub d2: Sym2<V4>,
    pub d3: Sym3<V4>,
}

impl Jet {
    pub fn zero() -> Self {
        Jet {
            x: ZERO,
            d1: [ZERO; 2],
            d2: [[ZERO; 2]; 2],
            d3: [[[ZERO; 2]; 2]; 2],
        }
    }

    /// Fill the fully symmetric arrays from `(σ-order, y-order)` entries.
    pub fn from_multi(get: impl Fn(usize, usize) -> V4) -> Self {
        let mut j = Jet::zero();
        j.x = get(0, 0);
        for a in 0..2 {
            j.d1[a] = get(1 - a, a);
            for b in 0..2 {
                let ny = a + b;
                j.d2[a][b] = get(2 - ny, ny);
                for c in 0..2 {
                    let ny = a + b + c;
                    j.d3[a][b][c] = get(3 - ny, ny);
                }
            }
        }
        j
    }

    pub fn add_scaled(&mut self, other: &Jet, s: f64) {
        axpy(&mut self.x, s, &other.x);
        for a in 0..2 {
            axpy(&mut self.d1[a], s, &other.d1[a]);
            for b in 0..2 {
                axpy(&mut self.d2[a][b], s, &other.d2[a][b]);
                for c in 0..2 {
                    axpy(&mut self.d3[a][b][c], s, &other.d3[a][b][c]);
                }
            }
        }
    }

    pub fn scaled_sum(&self, other: &Jet, s: f64) -> Jet {
        let mut j = *self;
        j.add_scaled(other, s);
        j
    }
}

/// Every pointwise quantity of the surface at one point.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub x: V4,
    pub xa: [V4; 2],
    pub g: Sym2<f64>,
    pub det_g: f64,
    pub ginv: Sym2<f64>,
    /// `∂_c g_ab` stored as `[c][a][b]`.
    pub dg: Sym3<f64>,
    /// `Γ^d_ab` stored as `[d][a][b]`.
    pub gamma: Sym3<f64>,
    pub a: Sym2<V4>,
    /// `∇⊥_c A_ab` stored as `[c][a][b]`.
    pub grad_a: Sym3<V4>,
    /// Coordinate derivative `∂_c A_ab` of the ambient vector, `[c][a][b]`.
    pub d_a: Sym3<V4>,
    pub h: V4,
    pub h_norm: f64,
    pub n: V4,
    /// `∇⊥_c H`.
    pub grad_h: [V4; 2],
    /// `∂_c |H|`.
    pub grad_h_norm: [f64; 2],
    pub x_tangent: V4,
    pub x_normal: V4,
    pub phi: V4,
    pub tau: Sym2<V4>,
    /// `∇⊥_c τ_ab` stored as `[c][a][b]`.
    pub grad_tau: Sym3<V4>,
    pub grad_tau_sq: f64,
    pub a_sq: f64,
    pub a2: Sym2<f64>,
    pub a2_sq: f64,
    pub p: f64,
}

impl LocalGeometry {
    /// Normal projection `Π v = v - X_a g^{ab} <X_b, v>`.
    #[inline]
    pub fn project(&self, v: &V4) -> V4 {
        project_with(&self.xa, &self.ginv, v)
    }

    /// `Π` as a 4x4 matrix acting on column vectors.
    pub fn projector(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for k in 0..4 {
            let mut e = ZERO;
            e[k] = 1.0;
            let pe = self.project(&e);
            for r in 0..4 {
                m[r][k] = pe[r];
            }
        }
        m
    }

    /// `∇⊥_i H + A(x^T, X_i)/2 + ∇⊥_i φ`, given `∇⊥φ` from elsewhere.
    pub fn grad_h_identity_defect(&self, grad_phi: &[V4; 2]) -> f64 {
        let xt = self.x_tangent_coords();
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            let mut v = add(&self.grad_h[i], &grad_phi[i]);
            for b in 0..2 {
                axpy(&mut v, 0.5 * xt[b], &self.a[b][i]);
            }
            worst = worst.max(norm(&v));
        }
        worst
    }

    /// Coordinates `ξ^a` with `x^T = ξ^a X_a`.
    pub fn x_tangent_coords(&self) -> [f64; 2] {
        let b = [dot(&self.xa[0], &self.x), dot(&self.xa[1], &self.x)];
        [
            self.ginv[0][0] * b[0] + self.ginv[0][1] * b[1],
            self.ginv[1][0] * b[0] + self.ginv[1][1] * b[1],
        ]
    }

    /// Fully contracted squared norm of a normal-valued 3-tensor.
    pub fn norm3_sq(&self, t: &Sym3<V4>) -> f64 {
        norm3_sq(&self.ginv, t)
    }
}

#[inline]
fn project_with(xa: &[V4; 2], ginv: &Sym2<f64>, v: &V4) -> V4 {
    let b = [dot(&xa[0], v), dot(&xa[1], v)];
    let mut out = *v;
    for a in 0..2 {
        let c = ginv[a][0] * b[0] + ginv[a][1] * b[1];
        axpy(&mut out, -c, &xa[a]);
    }
    out
}

/// `g^{aa'} g^{bb'} g^{cc'} <t_cab, t_c'a'b'>`.
pub fn norm3_sq(ginv: &Sym2<f64>, t: &Sym3<V4>) -> f64 {
    let mut s = 0.0;
    for c in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                for c2 in 0..2 {
                    for a2 in 0..2 {
                        for b2 in 0..2 {
                            let w = ginv[c][c2] * ginv[a][a2] * ginv[b][b2];
                            if w != 0.0 {
                                s += w * dot(&t[c][a][b], &t[c2][a2][b2]);
                            }
                        }
                    }
                }
            }
        }
    }
    s
}

/// Failure modes of a pointwise evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetFailure {
    Metric(f64),
}

impl LocalGeometry {
    pub fn from_jet(jet: &Jet) -> std::result::Result<LocalGeometry, JetFailure> {
        let xa = jet.d1;
        let xab = &jet.d2;
        let xabc = &jet.d3;
        let mut g = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                g[a][b] = dot(&xa[a], &xa[b]);
            }
        }
        let det_g = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if !(det_g > 1e-12) || !(g[0][0] > 0.0) {
            return Err(JetFailure::Metric(det_g));
        }
        let ginv = [
            [g[1][1] / det_g, -g[0][1] / det_g],
            [-g[1][0] / det_g, g[0][0] / det_g],
        ];
        let mut dg = [[[0.0; 2]; 2]; 2];
        let mut gamma = [[[0.0; 2]; 2]; 2];
        // <X_e, X_ab>, indexed [e][a][b]
        let mut xe_xab = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    dg[c][a][b] = dot(&xab[a][c], &xa[b]) + dot(&xa[a], &xab[b][c]);
                    xe_xab[c][a][b] = dot(&xa[c], &xab[a][b]);
                }
            }
        }
        for d in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    gamma[d][a][b] = ginv[d][0] * xe_xab[0][a][b] + ginv[d][1] * xe_xab[1][a][b];
                }
            }
        }
        let proj = |v: &V4| project_with(&xa, &ginv, v);
        let mut a = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] = proj(&xab[i][j]);
            }
        }
        // ∇⊥_c A_ab = Π X_abc - Γ^d_ab A_dc - Γ^d_ca A_db - Γ^d_cb A_ad
        let mut grad_a = [[[ZERO; 2]; 2]; 2];
        for c in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = proj(&xabc[i][j][c]);
                    for d in 0..2 {
                        axpy(&mut v, -gamma[d][i][j], &a[d][c]);
                        axpy(&mut v, -gamma[d][c][i], &a[d][j]);
                        axpy(&mut v, -gamma[d][c][j], &a[i][d]);
                    }
                    grad_a[c][i][j] = v;
                }
            }
        }
        // raw ∂_c A_ab = X_abc - X_dc Γ^d_ab - X_d ∂_c Γ^d_ab
        let mut dginv = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for d in 0..2 {
                for e in 0..2 {
                    let mut s = 0.0;
                    for m in 0..2 {
                        for k in 0..2 {
                            s -= ginv[d][m] * dg[c][m][k] * ginv[k][e];
                        }
                    }
                    dginv[c][d][e] = s;
                }
            }
        }
        let mut d_a = [[[ZERO; 2]; 2]; 2];
        for c in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = xabc[i][j][c];
                    for d in 0..2 {
                        axpy(&mut v, -gamma[d][i][j], &xab[d][c]);
                        let mut dgam = 0.0;
                        for e in 0..2 {
                            let de = dot(&xab[e][c], &xab[i][j]) + dot(&xa[e], &xabc[i][j][c]);
                            dgam += dginv[c][d][e] * xe_xab[e][i][j] + ginv[d][e] * de;
                        }
                        axpy(&mut v, -dgam, &xa[d]);
                    }
                    d_a[c][i][j] = v;
                }
            }
        }
        let mut h = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                axpy(&mut h, -ginv[i][j], &a[i][j]);
            }
        }
        let h_norm = norm(&h);
        let n = if h_norm > 0.0 { scale(1.0 / h_norm, &h) } else { ZERO };
        let mut grad_h = [ZERO; 2];
        let mut grad_h_norm = [0.0; 2];
        for c in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    axpy(&mut grad_h[c], -ginv[i][j], &grad_a[c][i][j]);
                }
            }
            grad_h_norm[c] = dot(&n, &grad_h[c]);
        }
        let x_normal = proj(&jet.x);
        let x_tangent = sub(&jet.x, &x_normal);
        let phi = sub(&scale(0.5, &x_normal), &h);
        let inv_h = 1.0 / h_norm;
        let mut tau = [[ZERO; 2]; 2];
        let mut grad_tau = [[[ZERO; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                tau[i][j] = scale(inv_h, &a[i][j]);
            }
        }
        for c in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = scale(inv_h, &grad_a[c][i][j]);
                    axpy(&mut v, -grad_h_norm[c] * inv_h * inv_h, &a[i][j]);
                    grad_tau[c][i][j] = v;
                }
            }
        }
        let grad_tau_sq = norm3_sq(&ginv, &grad_tau);

        // orthonormal tangent frame e_i = X_a E_ai from the Cholesky factor of g
        let l00 = g[0][0].sqrt();
        let l10 = g[1][0] / l00;
        let l11 = (g[1][1] - l10 * l10).sqrt();
        let e_mat = [[1.0 / l00, -l10 / (l00 * l11)], [0.0, 1.0 / l11]];
        let mut ah = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut v = ZERO;
                for p in 0..2 {
                    for q in 0..2 {
                        let w = e_mat[p][i] * e_mat[q][j];
                        if w != 0.0 {
                            axpy(&mut v, w, &a[p][q]);
                        }
                    }
                }
                ah[i][j] = v;
            }
        }
        let mut a_sq = 0.0;
        let mut an_sq = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                a_sq += dot(&ah[i][j], &ah[i][j]);
                an_sq += dot(&ah[i][j], &n).powi(2);
            }
        }
        let mut a2h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                a2h[i][j] = (0..2).map(|m| dot(&ah[i][m], &ah[m][j])).sum();
            }
        }
        let a2_sq: f64 = a2h.iter().flatten().map(|v| v * v).sum();
        let mut quartic = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    for m in 0..2 {
                        quartic += 2.0 * dot(&ah[j][l], &ah[i][m]) * dot(&ah[l][m], &ah[i][j])
                            - dot(&ah[i][j], &ah[m][l]).powi(2);
                    }
                }
            }
        }
        // A(x^T, e_j) in the orthonormal frame
        let xt_frame = [
            dot(&x_tangent, &scale(e_mat[0][0], &xa[0])),
            dot(&x_tangent, &add(&scale(e_mat[0][1], &xa[0]), &scale(e_mat[1][1], &xa[1]))),
        ];
        let mut axt_sq = 0.0;
        let mut axt_n_sq = 0.0;
        for j in 0..2 {
            let mut v = ZERO;
            for i in 0..2 {
                axpy(&mut v, xt_frame[i], &ah[i][j]);
            }
            axt_sq += dot(&v, &v);
            axt_n_sq += dot(&v, &n).powi(2);
        }
        let p = a_sq * an_sq - 2.0 * a2_sq
            + quartic
            + a_sq / (4.0 * h_norm * h_norm) * (axt_n_sq - axt_sq);
        // (A²)_ab in coordinates
        let mut a2 = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for m in 0..2 {
                    for k in 0..2 {
                        s += ginv[m][k] * dot(&a[i][m], &a[k][j]);
                    }
                }
                a2[i][j] = s;
            }
        }
        Ok(LocalGeometry {
            x: jet.x,
            xa,
            g,
            det_g,
            ginv,
            dg,
            gamma,
            a,
            grad_a,
            d_a,
            h,
            h_norm,
            n,
            grad_h,
            grad_h_norm,
            x_tangent,
            x_normal,
            phi,
            tau,
            grad_tau,
            grad_tau_sq,
            a_sq,
            a2,
            a2_sq,
            p,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Round cylinder of radius r in R^4 at angle t, height y.
    fn cylinder_jet(r: f64, t: f64, y: f64) -> Jet {
        // arclength coordinate σ = r t
        let (s, c) = t.sin_cos();
        let mut j = Jet::zero();
        j.x = [r * c, r * s, y, 0.0];
        j.d1[0] = [-s, c, 0.0, 0.0];
        j.d1[1] = [0.0, 0.0, 1.0, 0.0];
        j.d2[0][0] = [-c / r, -s / r, 0.0, 0.0];
        j.d3[0][0][0] = [s / (r * r), -c / (r * r), 0.0, 0.0];
        j
    }

    #[test]
    fn round_cylinder_quantities() {
        let r = 2f64.sqrt();
        let geo = LocalGeometry::from_jet(&cylinder_jet(r, 0.7, 1.3)).unwrap();
        assert!((geo.h_norm - 1.0 / r).abs() < 1e-15);
        // H points away from the axis
        assert!(dot(&geo.h, &[0.7f64.cos(), 0.7f64.sin(), 0.0, 0.0]) > 0.0);
        assert!(norm(&geo.phi) < 1e-15);
        assert!(geo.grad_tau_sq < 1e-28);
        assert!(geo.p.abs() < 1e-15);
        assert!((geo.a_sq - 0.5).abs() < 1e-15);
    }

    #[test]
    fn other_radius_has_phi() {
        let r = 1.7;
        let geo = LocalGeometry::from_jet(&cylinder_jet(r, 0.2, 0.0)).unwrap();
        assert!((dot(&geo.phi, &geo.n) - (r / 2.0 - 1.0 / r)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_metric_rejected() {
        let mut j = cylinder_jet(1.0, 0.0, 0.0);
        j.d1[1] = j.d1[0];
        assert!(LocalGeometry::from_jet(&j).is_err());
    }

    #[test]
    fn from_multi_fills_symmetric_entries() {
        let j = Jet::from_multi(|a, b| [a as f64, b as f64, 0.0, 0.0]);
        assert_eq!(j.d2[0][1], [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(j.d3[1][0][1], [1.0, 2.0, 0.0, 0.0]);
        assert_eq!(j.d3[0][0][0], [3.0, 0.0, 0.0, 0.0]);
    }
}
