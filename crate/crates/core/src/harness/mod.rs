//! Both sides of the entire-graph estimates and the Lojasiewicz inequalities,
//! measured on one-parameter families `U = εW`.
//!
//! The constants in these inequalities are not explicit, so nothing here
//! compares against an invented `C`. Each report carries the implied
//! constant `lhs / rhs` along the ε-ladder and a stability verdict.

pub mod interp;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::{build_grid, gaussian_area, CylinderGrid, Region};
use crate::error::{LabError, Result};
use crate::field::NormalField;
use crate::graphgeom::{csv_err, evaluate_geometry, GeometryOptions, GeometryState};
use crate::jacobi::{
    build_kernel_basis, inner, l2_norm, l2_norm_ball, project_decompose, KernelBasis, KernelPart,
};
use crate::profile::{round_profile, solve_abresch_langer, ProfileKind, ProfileSpec, RoundProfile};

pub use interp::{
    interpolation_check, interpolation_exponent, weighted_interpolation, BallFunction,
    InterpolationPoint,
};

/// Schema version of [`InequalityReport`] JSON.
pub const REPORT_FORMAT_VERSION: u32 = 1;
/// Schema version of the configuration file.
pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Largest allowed growth of the running implied constant over the ladder.
pub const STABILITY_FACTOR: f64 = 3.0;
/// A left-hand side below this multiple of its natural scale is treated as 0.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylinderSpec {
    pub profile: ProfileKind,
    pub profile_nodes: usize,
    pub axial_nodes: usize,
    pub y_max: f64,
    pub ambient_dim: usize,
    /// Solver tolerance for Abresch-Langer profiles.
    pub tolerance: f64,
}

impl Default for CylinderSpec {
    fn default() -> Self {
        CylinderSpec {
            profile: ProfileKind::Round { k: 1 },
            profile_nodes: 256,
            axial_nodes: 257,
            y_max: 12.0,
            ambient_dim: 4,
            tolerance: 1e-10,
        }
    }
}

impl CylinderSpec {
    pub fn build(&self) -> Result<CylinderGrid> {
        let curve = match self.profile {
            ProfileKind::Round { k } => match round_profile(k, self.profile_nodes)? {
                RoundProfile::Curve(c) => c,
                RoundProfile::Symbolic(_) => {
                    return Err(LabError::InvalidInput(format!(
                        "round profile k = {k} has no grid realization; only k = 1 does"
                    )))
                }
            },
            ProfileKind::AbreschLanger { .. } => solve_abresch_langer(
                &ProfileSpec {
                    kind: self.profile,
                    tolerance: self.tolerance,
                },
                self.profile_nodes,
            )?,
        };
        build_grid(curve, self.y_max, self.axial_nodes, self.ambient_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Sum of the cut-off `K0` basis fields (including the `∂z` fields in
    /// ambient dimension 4).
    PureK0,
    /// The cut-off field `(y² - 2)H`.
    PureK1,
    /// A random smooth field with its kernel part removed.
    Orthogonal,
    /// `W_K0 + W_K1 + 2 W_orth`, renormalized.
    Mixed,
}

impl FamilyKind {
    pub fn label(&self) -> &'static str {
        match self {
            FamilyKind::PureK0 => "pure-k0",
            FamilyKind::PureK1 => "pure-k1",
            FamilyKind::Orthogonal => "orthogonal",
            FamilyKind::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySpec {
    pub kinds: Vec<FamilyKind>,
    pub eps_ladder: Vec<f64>,
    pub support_radius: f64,
    pub seed: u64,
    /// `|W|_{C²}` of every family shape.
    pub c2_target: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            kinds: vec![
                FamilyKind::PureK0,
                FamilyKind::PureK1,
                FamilyKind::Orthogonal,
                FamilyKind::Mixed,
            ],
            eps_ladder: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            support_radius: 6.0,
            seed: 1,
            c2_target: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cylinder: CylinderSpec,
    pub family: FamilySpec,
    /// Exponent parameter in `(0, 1]`; the power of `‖φ‖` is `6/(3 + κ)`.
    pub kappa_exponent: f64,
    /// Entropy bound, recorded only.
    pub lambda0: f64,
    /// Curvature bounds `|∇^j A| <= C_j`, recorded only.
    pub c_j: Vec<f64>,
    /// Ball radius for localized norms.
    pub r: f64,
    /// Derivative count in the interpolation exponent.
    pub l: u32,
    /// Graph regularity threshold on `|U|_{C²}`.
    pub eps2: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cylinder: CylinderSpec::default(),
            family: FamilySpec::default(),
            kappa_exponent: 1.0,
            lambda0: 2.0,
            c_j: Vec::new(),
            r: 12.0,
            l: 50,
            eps2: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidInput(m));
        if !(self.kappa_exponent > 0.0 && self.kappa_exponent <= 1.0) {
            return bad(format!("kappa_exponent {} not in (0, 1]", self.kappa_exponent));
        }
        let ladder = &self.family.eps_ladder;
        if ladder.is_empty() || ladder.iter().any(|e| !(*e > 0.0)) {
            return bad("eps_ladder must be nonempty and positive".into());
        }
        if ladder.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps_ladder must be strictly decreasing".into());
        }
        if self.family.kinds.is_empty() {
            return bad("at least one family kind is required".into());
        }
        if !(self.family.c2_target > 0.0) || !(self.eps2 > 0.0) {
            return bad("c2_target and eps2 must be positive".into());
        }
        if ladder[0] * self.family.c2_target > self.eps2 * (1.0 + 1e-12) {
            return bad(format!(
                "largest member has |U|_C2 = {} above eps2 = {}",
                ladder[0] * self.family.c2_target,
                self.eps2
            ));
        }
        if self.l < 3 {
            return bad("l must be at least 3".into());
        }
        if !(self.r > 6.0) {
            return bad("R must exceed 6".into());
        }
        if !(self.family.support_radius > 1.0 && self.family.support_radius < self.cylinder.y_max) {
            return bad("support_radius must lie in (1, y_max)".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| LabError::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn exponents(&self) -> LojasiewiczExponents {
        LojasiewiczExponents::new(self.l, crate::cylinder::N_DIM as u32, self.r)
    }

    /// `6 / (3 + κ)`.
    pub fn phi_power(&self) -> f64 {
        6.0 / (3.0 + self.kappa_exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LojasiewiczExponents {
    pub l: u32,
    pub n: u32,
    /// `a_{l,2,n} = (l - 2)/(l + n)`.
    pub a_l: f64,
    pub r: f64,
    pub delta_r: f64,
    pub delta_r_minus_5: f64,
    pub delta_r_minus_6: f64,
}

/// `δ_R = R^n e^{-R²/4}`.
pub fn delta_r(r: f64, n: u32) -> f64 {
    r.powi(n as i32) * (-r * r / 4.0).exp()
}

impl LojasiewiczExponents {
    pub fn new(l: u32, n: u32, r: f64) -> Self {
        LojasiewiczExponents {
            l,
            n,
            a_l: interpolation_exponent(l as usize, 2, n as usize),
            r,
            delta_r: delta_r(r, n),
            delta_r_minus_5: delta_r(r - 5.0, n),
            delta_r_minus_6: delta_r(r - 6.0, n),
        }
    }
}

/// Every norm the reports need, measured once per family member.
#[derive(Debug, Clone, Serialize)]
pub struct MemberMeasures {
    pub eps: f64,
    pub c2: f64,
    pub c3: f64,
    pub u_l2: f64,
    pub u_l2_ball: f64,
    pub u_w23: f64,
    pub u0_l2: f64,
    pub jprime_l2: f64,
    pub h_l2: f64,
    pub h_w22: f64,
    /// `∫ <x>⁶ |U|_2³ ρ`.
    pub weighted_cubic: f64,
    pub phi_l1: f64,
    pub phi_l2: f64,
    pub phi_w12: f64,
    pub phi_w21: f64,
    pub phi_l1_ball: f64,
    pub phi_l2_ball: f64,
    /// `‖|∇⊥τ|²‖_{L¹}`.
    pub grad_tau_l1: f64,
    pub p_l1: f64,
    /// `F(Γ_U) - F(Γ)`.
    pub delta_f: f64,
}

/// Measure a single field.
pub fn measure(
    grid: &CylinderGrid,
    basis: &KernelBasis,
    u: &NormalField,
    eps: f64,
    config: &ExperimentConfig,
    base_area: f64,
) -> Result<MemberMeasures> {
    let opts = GeometryOptions {
        h_threshold: None,
        eps2: config.eps2 * (1.0 + 1e-12),
    };
    let state: GeometryState = evaluate_geometry(grid, u, &opts)?;
    let dec = project_decompose(grid, u, basis)?;
    let comps = u.components();
    let u2 = grid.pointwise_sobolev(&comps, 2);
    let cubic: Vec<f64> = (0..grid.len())
        .map(|n| grid.bracket_x(n).powi(6) * u2[n].powi(3))
        .collect();
    let phi = state.phi_components();
    let phi_refs: Vec<&[f64]> = phi.iter().map(|c| c.as_slice()).collect();
    let phi_norm = |k: usize, p: u32, region: Region| -> Result<f64> {
        Ok(grid.weighted_norm(&phi_refs, k, p, region)?.value)
    };
    let gts: Vec<f64> = state.nodes.iter().map(|n| n.grad_tau_sq).collect();
    let pabs: Vec<f64> = state.nodes.iter().map(|n| n.p.abs()).collect();
    let ball = Region::Ball(config.r);
    Ok(MemberMeasures {
        eps,
        c2: u.c2_norm,
        c3: u.c3_norm,
        u_l2: l2_norm(grid, u),
        u_l2_ball: l2_norm_ball(grid, u, config.r),
        u_w23: grid.weighted_norm(&comps, 2, 3, Region::Entire)?.value,
        u0_l2: dec.u0_norms.l2,
        jprime_l2: dec.jprime_norms.l2,
        h_l2: dec.h_norms.l2,
        h_w22: dec.h_norms.w22,
        weighted_cubic: grid.integrate(&cubic),
        phi_l1: phi_norm(0, 1, Region::Entire)?,
        phi_l2: phi_norm(0, 2, Region::Entire)?,
        phi_w12: phi_norm(1, 2, Region::Entire)?,
        phi_w21: phi_norm(2, 1, Region::Entire)?,
        phi_l1_ball: phi_norm(0, 1, ball)?,
        phi_l2_ball: phi_norm(0, 2, ball)?,
        grad_tau_l1: grid.integrate(&gts),
        p_l1: grid.integrate(&pabs),
        delta_f: gaussian_area(grid, Some(u))? - base_area,
    })
}

/// Grid, kernel basis and the family shapes `W`.
pub struct Harness {
    pub config: ExperimentConfig,
    pub grid: CylinderGrid,
    pub basis: KernelBasis,
    pub shapes: Vec<(FamilyKind, NormalField)>,
    pub base_area: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySweep {
    pub kind: FamilyKind,
    pub members: Vec<MemberMeasures>,
    /// Gaussian mass beyond the axial end of the grid.
    pub tail_bound: f64,
}

impl Harness {
    pub fn new(config: ExperimentConfig) -> Result<Harness> {
        config.validate()?;
        let grid = config.cylinder.build()?;
        let basis = build_kernel_basis(&grid)?;
        let shapes = config
            .family
            .kinds
            .iter()
            .map(|k| Ok((*k, family_shape(&grid, &basis, &config.family, *k)?)))
            .collect::<Result<Vec<_>>>()?;
        let base_area = gaussian_area(&grid, None)?;
        Ok(Harness {
            config,
            grid,
            basis,
            shapes,
            base_area,
        })
    }

    /// Measure every member of every family. Members run in parallel; the
    /// output order is fixed by the configuration.
    pub fn sweep(&self) -> Result<Vec<FamilySweep>> {
        let jobs: Vec<(usize, f64)> = (0..self.shapes.len())
            .flat_map(|f| self.config.family.eps_ladder.iter().map(move |e| (f, *e)))
            .collect();
        let measured: Vec<Result<MemberMeasures>> = jobs
            .par_iter()
            .map(|(f, eps)| {
                let u = self.shapes[*f].1.scaled(*eps);
                measure(&self.grid, &self.basis, &u, *eps, &self.config, self.base_area)
            })
            .collect();
        let mut measured = measured.into_iter();
        let mut out = Vec::new();
        for (kind, _) in &self.shapes {
            let members = (0..self.config.family.eps_ladder.len())
                .map(|_| measured.next().expect("one result per job"))
                .collect::<Result<Vec<_>>>()?;
            out.push(FamilySweep {
                kind: *kind,
                members,
                tail_bound: self.grid.tail_bound,
            });
        }
        Ok(out)
    }

    /// All inequality reports over a finished sweep.
    pub fn all_reports(&self, sweeps: &[FamilySweep]) -> Result<Vec<InequalityReport>> {
        for (kind, w) in &self.shapes {
            self.check_support(w).map_err(|e| match e {
                LabError::SupportViolation(m) => {
                    LabError::SupportViolation(format!("{} family: {m}", kind.label()))
                }
                other => other,
            })?;
        }
        let mut out = Vec::new();
        out.extend(check_ord1(&self.config, sweeps));
        out.extend(check_entire_tau_phi(&self.config, sweeps));
        out.extend(check_dtau_p(&self.config, sweeps));
        out.extend(check_p_est(&self.config, sweeps));
        out.extend(check_entire_est(&self.config, sweeps));
        out.extend(check_lojasiewicz_first(&self.config, sweeps));
        out.extend(check_lojasiewicz_gradient(&self.config, sweeps)?);
        Ok(out)
    }

    /// The Lojasiewicz conclusions take `V` supported in `B_{R-5}`.
    pub fn check_support(&self, v: &NormalField) -> Result<()> {
        let limit = self.config.r - 5.0;
        for n in 0..self.grid.len() {
            let nonzero = v.u[n] != 0.0 || v.uz.as_ref().is_some_and(|w| w[n] != 0.0);
            if nonzero && self.grid.radius_sq(n) >= limit * limit {
                return Err(LabError::SupportViolation(format!(
                    "field nonzero at |x| = {:.4} outside B_(R-5) = B_{limit}",
                    self.grid.radius_sq(n).sqrt()
                )));
            }
        }
        Ok(())
    }

    /// Both Lojasiewicz conclusions for one explicit field `V`, as
    /// single-member reports.
    pub fn lojasiewicz_for_field(&self, v: &NormalField) -> Result<Vec<InequalityReport>> {
        self.check_support(v)?;
        let sweep = [FamilySweep {
            kind: FamilyKind::Mixed,
            members: vec![self.measure_field(v)?],
            tail_bound: self.grid.tail_bound,
        }];
        let mut out = check_lojasiewicz_first(&self.config, &sweep);
        out.extend(check_lojasiewicz_gradient(&self.config, &sweep)?);
        for r in &mut out {
            r.family = "explicit".into();
        }
        Ok(out)
    }

    /// Measure a single explicit field `V` (not scaled).
    pub fn measure_field(&self, v: &NormalField) -> Result<MemberMeasures> {
        measure(&self.grid, &self.basis, v, 1.0, &self.config, self.base_area)
    }

    /// Cutoff estimate `‖φ_V‖^s_{L^s} <= ‖φ‖^s_{L^s(B_R)} + C(s) δ_{R-5}`
    /// for `V` the truncation to `B_{R-5}` of a field `W` with wider support.
    /// Returns the measured `C(s)` for `s = 1, 2`.
    pub fn cutoff_constants(&self, w: &NormalField) -> Result<CutoffReport> {
        let r5 = self.config.r - 5.0;
        let rmax = self.grid.profile.max_radius();
        if r5 <= rmax + 1.0 {
            return Err(LabError::InvalidInput("R - 5 is inside the profile".into()));
        }
        let axial = (r5 * r5 - rmax * rmax).sqrt();
        let v = w.cut(&self.grid, axial)?;
        let opts = GeometryOptions {
            h_threshold: None,
            eps2: self.config.eps2 * (1.0 + 1e-12),
        };
        let phi_of = |f: &NormalField| -> Result<[Vec<f64>; 4]> {
            Ok(evaluate_geometry(&self.grid, f, &opts)?.phi_components())
        };
        let pw = phi_of(w)?;
        let pv = phi_of(&v)?;
        let refs = |a: &[Vec<f64>; 4]| -> Vec<Vec<f64>> { a.to_vec() };
        let norm = |c: &Vec<Vec<f64>>, p: u32, region: Region| -> Result<f64> {
            let r: Vec<&[f64]> = c.iter().map(|v| v.as_slice()).collect();
            Ok(self.grid.weighted_norm(&r, 0, p, region)?.value)
        };
        let (cw, cv) = (refs(&pw), refs(&pv));
        let delta = self.config.exponents().delta_r_minus_5;
        let mut constants = Vec::new();
        for s in [1u32, 2] {
            let lhs = norm(&cv, s, Region::Entire)?.powi(s as i32);
            let rhs = norm(&cw, s, Region::Ball(self.config.r))?.powi(s as i32);
            constants.push((s, lhs, rhs, (lhs - rhs) / delta));
        }
        Ok(CutoffReport {
            axial_radius: axial,
            delta_r_minus_5: delta,
            rows: constants,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffReport {
    pub axial_radius: f64,
    pub delta_r_minus_5: f64,
    /// `(s, ‖φ_V‖^s, ‖φ‖^s_{L^s(B_R)}, C(s))`.
    pub rows: Vec<(u32, f64, f64, f64)>,
}

fn normalize(f: NormalField, target: f64) -> Result<NormalField> {
    f.normalized_c2(target)
}

/// Family shape `W` with `|W|_{C²} = c2_target`.
pub fn family_shape(
    grid: &CylinderGrid,
    basis: &KernelBasis,
    spec: &FamilySpec,
    kind: FamilyKind,
) -> Result<NormalField> {
    let r = spec.support_radius;
    let first = |part: KernelPart| -> Result<NormalField> {
        let parts: Vec<NormalField> = basis
            .fields
            .iter()
            .filter(|b| b.part == part)
            .map(|b| b.field.normalized_c2(1.0))
            .collect::<Result<_>>()?;
        if parts.is_empty() {
            return Err(LabError::InvalidInput(format!("kernel basis has no {part:?} field")));
        }
        let terms: Vec<(f64, &NormalField)> = parts.iter().map(|f| (1.0, f)).collect();
        NormalField::combination(grid, &terms)?.cut(grid, r)
    };
    let orth = || -> Result<NormalField> {
        let raw = NormalField::random_smooth(grid, spec.seed, r, grid.ambient_dim == 4)?;
        Ok(project_decompose(grid, &raw, basis)?.h)
    };
    let t = spec.c2_target;
    match kind {
        FamilyKind::PureK0 => normalize(first(KernelPart::K0)?, t),
        FamilyKind::PureK1 => normalize(first(KernelPart::K1)?, t),
        FamilyKind::Orthogonal => normalize(orth()?, t),
        FamilyKind::Mixed => {
            let a = normalize(first(KernelPart::K0)?, 1.0)?;
            let b = normalize(first(KernelPart::K1)?, 1.0)?;
            let c = normalize(orth()?, 1.0)?;
            normalize(NormalField::combination(grid, &[(1.0, &a), (1.0, &b), (2.0, &c)])?, t)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `sup` of the ratio over this and all larger ε.
    pub running_sup: f64,
    /// Left side is at the roundoff floor; its ratio is taken as 0.
    pub at_floor: bool,
    /// Largest right-hand term.
    pub dominant: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stability {
    /// Running implied constant at the smallest ε over the one at the largest.
    pub growth: f64,
    /// `max ratio / min ratio` over members off the floor.
    pub raw_spread: f64,
    pub finite: bool,
    pub stable: bool,
    /// Every member is at the floor (the inequality holds trivially).
    pub trivial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub family: String,
    /// Values at the largest ε.
    pub lhs: f64,
    pub rhs_terms: BTreeMap<String, f64>,
    pub implied_constant: f64,
    pub sweep: Vec<SweepPoint>,
    /// Least-squares log-log slopes of the left side and of each right term.
    pub slopes: BTreeMap<String, f64>,
    pub stability: Stability,
    pub tail_bound: f64,
    pub notes: Vec<String>,
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// One inequality evaluated on one family member: left side, its natural
/// scale (for the floor test), and named right-hand terms.
struct Sides {
    lhs: f64,
    scale: f64,
    terms: Vec<(&'static str, f64)>,
}

fn build_report(
    name: &str,
    family: &FamilySweep,
    notes: Vec<String>,
    sides: impl Fn(&MemberMeasures) -> Sides,
) -> InequalityReport {
    let evaluated: Vec<(f64, Sides)> = family.members.iter().map(|m| (m.eps, sides(m))).collect();
    let mut sweep = Vec::new();
    let mut running: f64 = 0.0;
    for (eps, s) in &evaluated {
        let rhs: f64 = s.terms.iter().map(|t| t.1).sum();
        let at_floor = s.lhs.abs() <= ROUNDOFF_FLOOR * s.scale.abs();
        let ratio = if at_floor {
            0.0
        } else if rhs > 0.0 {
            s.lhs / rhs
        } else {
            f64::INFINITY
        };
        running = running.max(ratio);
        let dominant = s
            .terms
            .iter()
            .fold(("", f64::NEG_INFINITY), |a, t| if t.1 > a.1 { (t.0, t.1) } else { a })
            .0
            .to_string();
        sweep.push(SweepPoint {
            eps: *eps,
            lhs: s.lhs,
            rhs,
            ratio,
            running_sup: running,
            at_floor,
            dominant,
        });
    }
    let eps: Vec<f64> = sweep.iter().map(|p| p.eps).collect();
    let mut slopes = BTreeMap::new();
    let lhs_vals: Vec<f64> = sweep
        .iter()
        .map(|p| if p.at_floor { 0.0 } else { p.lhs })
        .collect();
    slopes.insert("lhs".to_string(), loglog_slope(&eps, &lhs_vals));
    for (k, (term, _)) in evaluated[0].1.terms.iter().enumerate() {
        let vals: Vec<f64> = evaluated.iter().map(|e| e.1.terms[k].1).collect();
        slopes.insert(term.to_string(), loglog_slope(&eps, &vals));
    }
    let live: Vec<f64> = sweep.iter().filter(|p| !p.at_floor).map(|p| p.ratio).collect();
    let finite = sweep.iter().all(|p| p.ratio.is_finite() && p.lhs.is_finite() && p.rhs.is_finite());
    let trivial = live.is_empty();
    let first_live = sweep.iter().find(|p| !p.at_floor).map(|p| p.running_sup);
    let growth = match first_live {
        Some(f) if f > 0.0 => running / f,
        _ => 1.0,
    };
    let raw_spread = if live.is_empty() {
        1.0
    } else {
        let mx = live.iter().cloned().fold(0.0, f64::max);
        let mn = live.iter().cloned().fold(f64::INFINITY, f64::min);
        if mn > 0.0 { mx / mn } else { f64::INFINITY }
    };
    let first = &evaluated[0];
    let first_rhs: f64 = first.1.terms.iter().map(|t| t.1).sum();
    InequalityReport {
        name: name.to_string(),
        family: family.kind.label().to_string(),
        lhs: first.1.lhs,
        rhs_terms: first.1.terms.iter().map(|t| (t.0.to_string(), t.1)).collect(),
        implied_constant: if first_rhs > 0.0 { first.1.lhs / first_rhs } else { 0.0 },
        stability: Stability {
            growth,
            raw_spread,
            finite,
            stable: finite && growth < STABILITY_FACTOR,
            trivial,
        },
        sweep,
        slopes,
        tail_bound: family.tail_bound,
        notes,
    }
}

/// First-order estimates from the expansion of `φ`:
/// `‖h‖²_{W^{2,2}} <= C(‖φ‖² + ‖U‖⁴)` and
/// `∫<x>⁶|U|_2³ρ <= C(‖φ‖^{6/(3+κ)} + ‖U‖³)`.
pub fn check_ord1(config: &ExperimentConfig, sweeps: &[FamilySweep]) -> Vec<InequalityReport> {
    let pw = config.phi_power();
    let mut out = Vec::new();
    for f in sweeps {
        out.push(build_report("ord1-h", f, vec![], |m| Sides {
            lhs: m.h_w22.powi(2),
            scale: m.u_l2.powi(2) + m.c2.powi(2),
            terms: vec![("phi_l2^2", m.phi_l2.powi(2)), ("u_l2^4", m.u_l2.powi(4))],
        }));
        out.push(build_report("ord1-cubic", f, vec![], |m| Sides {
            lhs: m.weighted_cubic,
            scale: m.c2.powi(3),
            terms: vec![("phi_l2^(6/(3+k))", m.phi_l2.powf(pw)), ("u_l2^3", m.u_l2.powi(3))],
        }));
    }
    out
}

/// `‖U‖² <= C(‖U0‖² + ‖|∇⊥τ|²‖_{L¹} + ‖φ‖^{6/(3+κ)})`.
pub fn check_entire_tau_phi(config: &ExperimentConfig, sweeps: &[FamilySweep]) -> Vec<InequalityReport> {
    let pw = config.phi_power();
    sweeps
        .iter()
        .map(|f| {
            build_report("entire-tau-phi", f, vec![], |m| Sides {
                lhs: m.u_l2.powi(2),
                scale: m.c2.powi(2),
                terms: vec![
                    ("u0_l2^2", m.u0_l2.powi(2)),
                    ("grad_tau_sq_l1", m.grad_tau_l1),
                    ("phi_l2^(6/(3+k))", m.phi_l2.powf(pw)),
                ],
            })
        })
        .collect()
}

/// `‖|∇⊥τ|²‖_{L¹} <= C(‖P‖_{L¹} + ‖φ‖_{W^{2,1}} + ‖φ‖²_{W^{1,2}})`, with the
/// measured `‖U‖_{C³}` recorded next to the constant.
pub fn check_dtau_p(_config: &ExperimentConfig, sweeps: &[FamilySweep]) -> Vec<InequalityReport> {
    sweeps
        .iter()
        .map(|f| {
            let notes = f
                .members
                .iter()
                .map(|m| format!("eps {:.1e}: |U|_C3 = {:.4e}", m.eps, m.c3))
                .collect();
            build_report("dtau-p", f, notes, |m| Sides {
                lhs: m.grad_tau_l1,
                scale: m.c2.powi(2),
                terms: vec![
                    ("p_l1", m.p_l1),
                    ("phi_w21", m.phi_w21),
                    ("phi_w12^2", m.phi_w12.powi(2)),
                ],
            })
        })
        .collect()
}

/// `‖P‖_{L¹} <= C(‖U‖³ + ‖φ‖^{6/(3+κ)} + ‖U‖‖φ‖ + ‖φ‖²_{W^{1,2}})`.
pub fn check_p_est(config: &ExperimentConfig, sweeps: &[FamilySweep]) -> Vec<InequalityReport> {
    let pw = config.phi_power();
    sweeps
        .iter()
        .map(|f| {
            build_report("p-est", f, vec![], |m| Sides {
                lhs: m.p_l1,
                // P is quartic in A, so its roundoff floor is absolute
                scale: 1.0,
                terms: vec![
                    ("u_l2^3", m.u_l2.powi(3)),
                    ("phi_l2^(6/(3+k))", m.phi_l2.powf(pw)),
                    ("u_l2*phi_l2", m.u_l2 * m.phi_l2),
                    ("phi_w12^2", m.phi_w12.powi(2)),
                ],
            })
        })
        .collect()
}

/// `‖U‖² <= C(‖U0‖² + ‖φ‖_{W^{2,1}} + ‖φ‖²_{W^{1,2}} + ‖φ‖^{6/(3+κ)})`.
pub fn check_entire_est(config: &ExperimentConfig, sweeps: &[FamilySweep]) -> Vec<InequalityReport> {
    let pw = config.phi_power();
    sweeps
        .iter()
        .map(|f| {
            let m_c3 = f.members.iter().map(|m| m.c3).fold(0.0, f64::max);
            build_report(
                "entire-est",
                f,
                vec![format!("M = max |U|_C3 = {m_c3:.4e}")],
                |m| Sides {
                    lhs: m.u_l2.powi(2),
                    scale: m.c2.powi(2),
                    terms: vec![
                        ("u0_l2^2", m.u0_l2.powi(2)),
                        ("phi_w21", m.phi_w21),
                        ("phi_w12^2", m.phi_w12.powi(2)),
                        ("phi_l2^(6/(3+k))", m.phi_l2.powf(pw)),
                    ],
                },
            )
        })
        .collect()
}

/// Conclusion of the first Lojasiewicz inequality at fixed `V` (each family
/// member in turn):
/// `‖V‖² <= C(‖φ‖^{a}_{L¹(B_R)} + ‖φ‖^{2a}_{L²(B_R)} + δ_{R-5}^{a})`.
/// The size hypothesis `‖U‖²_{L²(B_R)} <= e^{-R²/8}` is flagged, not enforced.
pub fn check_lojasiewicz_first(config: &ExperimentConfig, sweeps: &[FamilySweep]) -> Vec<InequalityReport> {
    let ex = config.exponents();
    let a = ex.a_l;
    let bound = (-config.r * config.r / 8.0).exp();
    sweeps
        .iter()
        .map(|f| {
            let notes = f
                .members
                .iter()
                .map(|m| {
                    format!(
                        "eps {:.1e}: size hypothesis |U|^2_L2(B_R) = {:.3e} {} e^(-R^2/8) = {:.3e}",
                        m.eps,
                        m.u_l2_ball.powi(2),
                        if m.u_l2_ball.powi(2) <= bound { "<=" } else { ">" },
                        bound
                    )
                })
                .collect();
            build_report("lojasiewicz-first", f, notes, |m| Sides {
                lhs: m.u_l2.powi(2),
                scale: m.c2.powi(2),
                terms: vec![
                    ("phi_l1_ball^a", m.phi_l1_ball.powf(a)),
                    ("phi_l2_ball^(2a)", m.phi_l2_ball.powf(2.0 * a)),
                    ("delta_(R-5)^a", ex.delta_r_minus_5.powf(a)),
                ],
            })
        })
        .collect()
}

/// Second Lojasiewicz inequality at fixed `V`: the intermediate bound
/// `|ΔF| <= C(‖φ_V‖^{3/2} + ‖V‖³)` and the conclusion
/// `|ΔF| <= C(‖φ‖^{3a/2} + δ_{R-6})`. Requires `a_l > 2/3`.
pub fn check_lojasiewicz_gradient(
    config: &ExperimentConfig,
    sweeps: &[FamilySweep],
) -> Result<Vec<InequalityReport>> {
    let ex = config.exponents();
    if ex.a_l <= 2.0 / 3.0 {
        return Err(LabError::InvalidInput(format!(
            "a_l = {} must exceed 2/3; increase l",
            ex.a_l
        )));
    }
    let a = ex.a_l;
    let mut out = Vec::new();
    for f in sweeps {
        out.push(build_report("lojasiewicz-gradient-intermediate", f, vec![], |m| {
            Sides {
                lhs: m.delta_f.abs(),
                scale: 1e-3 * m.c2.powi(2),
                terms: vec![("phi_l2^(3/2)", m.phi_l2.powf(1.5)), ("u_l2^3", m.u_l2.powi(3))],
            }
        }));
        out.push(build_report("lojasiewicz-gradient", f, vec![], |m| Sides {
            lhs: m.delta_f.abs(),
            scale: 1e-3 * m.c2.powi(2),
            terms: vec![
                ("phi_l2^(3a/2)", m.phi_l2.powf(1.5 * a)),
                ("delta_(R-6)", ex.delta_r_minus_6),
            ],
        }));
    }
    Ok(out)
}

/// Slopes of the main measured quantities against ε for each family.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub family: String,
    pub slopes: BTreeMap<String, f64>,
}

pub fn scaling_slopes(sweeps: &[FamilySweep]) -> Vec<ScalingReport> {
    sweeps
        .iter()
        .map(|f| {
            let eps: Vec<f64> = f.members.iter().map(|m| m.eps).collect();
            let mut slopes = BTreeMap::new();
            let mut add = |name: &str, get: fn(&MemberMeasures) -> f64| {
                let v: Vec<f64> = f.members.iter().map(get).collect();
                slopes.insert(name.to_string(), loglog_slope(&eps, &v));
            };
            add("u_l2", |m| m.u_l2);
            add("h_w22^2", |m| m.h_w22.powi(2));
            add("phi_l2", |m| m.phi_l2);
            add("grad_tau_sq_l1", |m| m.grad_tau_l1);
            add("p_l1", |m| m.p_l1);
            add("abs_delta_f", |m| m.delta_f.abs());
            ScalingReport {
                family: f.kind.label().to_string(),
                slopes,
            }
        })
        .collect()
}

/// Exact targets of the second-variation constant.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantReport {
    pub label: String,
    /// `2/k³` for round profiles, `4 B₂` for Abresch-Langer curves.
    pub target: f64,
    /// `true` when the target is a lower bound rather than an equality.
    pub lower_bound: bool,
    pub measured: Option<f64>,
    pub measured_numeric: Option<f64>,
    pub b2: Option<f64>,
}

/// `2/k³` for the round sphere `S^k`.
pub fn round_constant(k: u32) -> f64 {
    2.0 / (k as f64).powi(3)
}

/// Targets for a profile, with the measured ratio when a grid is available.
pub fn constant_report(spec: &CylinderSpec) -> Result<ConstantReport> {
    use crate::variation::second_variation_t_l1;
    let measure_on = |grid: &CylinderGrid| -> Result<(f64, f64)> {
        let basis = build_kernel_basis(grid)?;
        let j = basis
            .fields
            .iter()
            .find(|b| b.part == KernelPart::K1)
            .ok_or_else(|| LabError::InvalidInput("no K1 field".into()))?;
        let sv = second_variation_t_l1(grid, &j.field, &basis)?;
        Ok((sv.ratio, sv.numeric_ratio))
    };
    match spec.profile {
        ProfileKind::Round { k } => {
            let target = round_constant(k);
            let measured = if k == 1 { Some(measure_on(&spec.build()?)?) } else { None };
            Ok(ConstantReport {
                label: format!("round k={k}"),
                target,
                lower_bound: false,
                measured: measured.map(|m| m.0),
                measured_numeric: measured.map(|m| m.1),
                b2: (k == 1).then_some(0.5),
            })
        }
        ProfileKind::AbreschLanger { p, q } => {
            let grid = spec.build()?;
            let b2 = crate::profile::compute_b2(&grid.profile)?;
            let (m, mn) = measure_on(&grid)?;
            Ok(ConstantReport {
                label: format!("abresch-langer p={p} q={q}"),
                target: 4.0 * b2,
                lower_bound: true,
                measured: Some(m),
                measured_numeric: Some(mn),
                b2: Some(b2),
            })
        }
    }
}

impl InequalityReport {
    /// Aligned-column text table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let verdict = if self.stability.trivial {
            "trivial"
        } else if self.stability.stable {
            "stable"
        } else {
            "UNSTABLE"
        };
        let _ = writeln!(
            s,
            "{} [{}]  C = {:.4e}  growth = {:.3}  {}",
            self.name, self.family, self.implied_constant, self.stability.growth, verdict
        );
        let _ = writeln!(
            s,
            "  {:>10} {:>12} {:>12} {:>12} {:>12}  {}",
            "eps", "lhs", "rhs", "ratio", "running", "dominant"
        );
        for p in &self.sweep {
            let _ = writeln!(
                s,
                "  {:>10.3e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}  {}{}",
                p.eps,
                p.lhs,
                p.rhs,
                p.ratio,
                p.running_sup,
                p.dominant,
                if p.at_floor { " (floor)" } else { "" }
            );
        }
        let slopes: Vec<String> = self.slopes.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
        let _ = writeln!(s, "  slopes: {}", slopes.join(" "));
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }
}

/// One CSV row per sweep point of every report.
pub fn sweep_csv(reports: &[InequalityReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["inequality", "family", "eps", "lhs", "rhs", "ratio", "running_sup", "at_floor", "dominant"])
        .map_err(csv_err)?;
    for r in reports {
        for p in &r.sweep {
            w.write_record([
                r.name.clone(),
                r.family.clone(),
                format!("{:.6e}", p.eps),
                format!("{:.16e}", p.lhs),
                format!("{:.16e}", p.rhs),
                format!("{:.16e}", p.ratio),
                format!("{:.16e}", p.running_sup),
                p.at_floor.to_string(),
                p.dominant.clone(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| LabError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

/// `‖U‖²_{L²}` relative to its `K`-part; small helper for callers building
/// their own fields.
pub fn kernel_fraction(grid: &CylinderGrid, basis: &KernelBasis, u: &NormalField) -> Result<f64> {
    let dec = project_decompose(grid, u, basis)?;
    let total = inner(grid, u, u);
    Ok(if total > 0.0 {
        (dec.u0_norms.l2.powi(2) + dec.jprime_norms.l2.powi(2)) / total
    } else {
        0.0
    })
}
