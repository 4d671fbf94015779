//! Closed planar shrinker profiles: the round circle of radius sqrt 2 and the
//! Abresch-Langer curves, obtained by shooting.
//!
//! Conventions. Curves run counterclockwise with unit tangent
//! `T = (cos θ, sin θ)` and principal normal `N = (sin θ, -cos θ)`, so that
//! `dT/dσ = -κ N` and `dN/dσ = κ T` with `κ > 0`. With these signs the mean
//! curvature vector of the cylinder is `H = κ N` (pointing away from the
//! curvature centre) and the shrinker equation reads `κ = <x, N>/2`.
//!
//! Along a shrinker curve `κ' = κ <x,T>/2`, hence `κ exp(-|x|²/4)` is
//! conserved, and the tangent angle obeys `κ_θθ + κ = 1/(2κ)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::stencil::LineDerivative;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProfileKind {
    Round { k: u32 },
    AbreschLanger { p: u32, q: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    /// Target for the shrinker residual and the closure defect.
    pub tolerance: f64,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl ProfileSpec {
    pub fn abresch_langer(p: u32, q: u32, tolerance: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::AbreschLanger { p, q },
            tolerance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(LabError::InvalidInput("tolerance must be positive".into()));
        }
        match self.kind {
            ProfileKind::Round { k } if k == 0 => {
                Err(LabError::InvalidInput("round profile needs k >= 1".into()))
            }
            ProfileKind::Round { .. } => Ok(()),
            ProfileKind::AbreschLanger { p, q } => {
                if p == 0 || q == 0 || gcd(p, q) != 1 {
                    return Err(LabError::NoSuchCurve { p, q });
                }
                let ratio = p as f64 / q as f64;
                // endpoints excluded: 1/2 is the line limit, 1/sqrt 2 the circle
                if ratio <= 0.5 || ratio >= FRAC_1_SQRT_2 {
                    return Err(LabError::NoSuchCurve { p, q });
                }
                Ok(())
            }
        }
    }
}

/// Closed-form data of the round sphere `S^k` of radius `sqrt(2k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundData {
    pub k: u32,
    pub radius: f64,
    pub mean_curvature: f64,
    pub second_fundamental_sq: f64,
}

impl RoundData {
    pub fn new(k: u32) -> Self {
        let kf = k as f64;
        RoundData {
            k,
            radius: (2.0 * kf).sqrt(),
            mean_curvature: (kf / 2.0).sqrt(),
            second_fundamental_sq: 0.5,
        }
    }
}

/// Where a sampled curve came from; enough to resample it at another size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CurveSource {
    Circle { radius: f64 },
    AbreschLanger {
        p: u32,
        q: u32,
        kappa_max: f64,
        length: f64,
        tolerance: f64,
    },
}

/// A closed planar curve sampled at uniform arclength.
#[derive(Debug, Clone)]
pub struct ProfileCurve {
    pub source: CurveSource,
    pub sigma: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub tangent: Vec<[f64; 2]>,
    pub normal: Vec<[f64; 2]>,
    pub kappa: Vec<f64>,
    /// dκ/dσ and d²κ/dσ², from the curve ODE at each node.
    pub kappa_dot: Vec<f64>,
    pub kappa_ddot: Vec<f64>,
    pub length: f64,
    pub rotation_index: u32,
    /// Max defect between the state after one full period and the start.
    pub closure_defect: f64,
}

pub enum RoundProfile {
    Curve(ProfileCurve),
    Symbolic(RoundData),
}

/// Round profile: a sampled circle of radius sqrt 2 for `k = 1`, closed-form
/// data otherwise.
pub fn round_profile(k: u32, nodes: usize) -> Result<RoundProfile> {
    if k == 0 {
        return Err(LabError::InvalidInput("round profile needs k >= 1".into()));
    }
    if k > 1 {
        return Ok(RoundProfile::Symbolic(RoundData::new(k)));
    }
    if nodes < 16 {
        return Err(LabError::InvalidInput("need at least 16 nodes".into()));
    }
    Ok(RoundProfile::Curve(ProfileCurve::circle(2f64.sqrt(), nodes)))
}

#[inline]
fn frame(theta: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = theta.sin_cos();
    ([c, s], [s, -c])
}

/// Derivatives of κ from the planar state, valid for any curve integrated
/// with `κ' = κ<x,T>/2`.
#[inline]
fn kappa_derivs(x: [f64; 2], t: [f64; 2], n: [f64; 2], kappa: f64) -> (f64, f64) {
    let a = x[0] * t[0] + x[1] * t[1];
    let xn = x[0] * n[0] + x[1] * n[1];
    let kd = kappa * a / 2.0;
    let kdd = kd * a / 2.0 + kappa * (1.0 - kappa * xn) / 2.0;
    (kd, kdd)
}

type State = [f64; 4];

#[inline]
fn rhs(s: &State) -> State {
    let (sn, cs) = s[2].sin_cos();
    [cs, sn, s[3], s[3] * (s[0] * cs + s[1] * sn) / 2.0]
}

#[inline]
fn rk4_step(s: &State, h: f64) -> State {
    let add = |a: &State, b: &State, c: f64| -> State {
        [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]]
    };
    let k1 = rhs(s);
    let k2 = rhs(&add(s, &k1, h / 2.0));
    let k3 = rhs(&add(s, &k2, h / 2.0));
    let k4 = rhs(&add(s, &k3, h));
    let mut out = *s;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[inline]
fn radial_speed(s: &State) -> f64 {
    let (sn, cs) = s[2].sin_cos();
    s[0] * cs + s[1] * sn
}

fn start_state(kappa_max: f64) -> State {
    // point of maximal curvature on the negative x2-axis, moving right
    [0.0, -2.0 * kappa_max, 0.0, kappa_max]
}

/// Integration step matched to a residual tolerance.
pub(crate) fn step_for_tolerance(tol: f64) -> f64 {
    (0.1 * tol.powf(0.25)).clamp(1e-4, 1e-2)
}

/// Turning angle and arclength from the curvature maximum to the following
/// minimum (half an oscillation of κ).
pub fn half_oscillation(kappa_max: f64, step: f64) -> Result<(f64, f64)> {
    let mut s = start_state(kappa_max);
    let mut sigma = 0.0;
    // generous bound: the half length is finite for every admissible kappa_max
    let max_steps = (400.0 / step) as usize;
    for _ in 0..max_steps {
        let next = rk4_step(&s, step);
        if radial_speed(&next) >= 0.0 && sigma > 0.0 {
            // bisect the sub-step where <x,T> returns to zero
            let (mut lo, mut hi) = (0.0, step);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if radial_speed(&rk4_step(&s, mid)) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let end = rk4_step(&s, 0.5 * (lo + hi));
            return Ok((end[2], sigma + 0.5 * (lo + hi)));
        }
        s = next;
        sigma += step;
    }
    Err(LabError::NoConvergence(format!(
        "no curvature minimum found for kappa_max = {kappa_max}"
    )))
}

impl ProfileCurve {
    /// Circle of the given radius centred at the origin.
    pub fn circle(radius: f64, nodes: usize) -> Self {
        let length = TAU * radius;
        let h = length / nodes as f64;
        let mut c = ProfileCurve::empty(CurveSource::Circle { radius }, length, 1, nodes);
        for i in 0..nodes {
            let sigma = i as f64 * h;
            let (sn, cs) = (sigma / radius).sin_cos();
            c.sigma.push(sigma);
            c.points.push([radius * cs, radius * sn]);
            c.tangent.push([-sn, cs]);
            c.normal.push([cs, sn]);
            c.kappa.push(1.0 / radius);
            c.kappa_dot.push(0.0);
            c.kappa_ddot.push(0.0);
        }
        c
    }

    fn empty(source: CurveSource, length: f64, rotation_index: u32, nodes: usize) -> Self {
        ProfileCurve {
            source,
            sigma: Vec::with_capacity(nodes),
            points: Vec::with_capacity(nodes),
            tangent: Vec::with_capacity(nodes),
            normal: Vec::with_capacity(nodes),
            kappa: Vec::with_capacity(nodes),
            kappa_dot: Vec::with_capacity(nodes),
            kappa_ddot: Vec::with_capacity(nodes),
            length,
            rotation_index,
            closure_defect: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.len() as f64
    }

    /// Resample the same curve at another node count.
    pub fn resample(&self, nodes: usize) -> Result<ProfileCurve> {
        match self.source {
            CurveSource::Circle { radius } => Ok(ProfileCurve::circle(radius, nodes)),
            CurveSource::AbreschLanger {
                p,
                q,
                kappa_max,
                length,
                tolerance,
            } => integrate_closed(p, q, kappa_max, length, tolerance, nodes),
        }
    }

    /// `κ exp(-|x|²/4)` at each node.
    pub fn conserved_quantity(&self) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.kappa)
            .map(|(x, k)| k * (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp())
            .collect()
    }

    /// Relative spread `(max - min)/mean` of the conserved quantity.
    pub fn conserved_spread(&self) -> f64 {
        let c = self.conserved_quantity();
        let max = c.iter().cloned().fold(f64::MIN, f64::max);
        let min = c.iter().cloned().fold(f64::MAX, f64::min);
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        (max - min) / mean
    }

    /// `<x, T>` at each node, the tangential part of the position.
    pub fn radial_speed(&self) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.tangent)
            .map(|(x, t)| x[0] * t[0] + x[1] * t[1])
            .collect()
    }

    /// Max over nodes of `|κ'' - <x,T>κ'/2 + κ³ - κ/2|` with κ', κ''
    /// taken by periodic finite differences of the sampled curvature.
    pub fn jacobi_identity_residual(&self, order: usize) -> f64 {
        let n = self.len();
        let h = self.spacing();
        let d1 = LineDerivative::new(n, h, 1, order, true).apply(&self.kappa);
        let d2 = LineDerivative::new(n, h, 2, order, true).apply(&self.kappa);
        let a = self.radial_speed();
        (0..n)
            .map(|i| {
                let k = self.kappa[i];
                (d2[i] - a[i] * d1[i] / 2.0 + k * k * k - k / 2.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.points {
            for b in &self.points {
                d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        d
    }

    pub fn max_radius(&self) -> f64 {
        self.points
            .iter()
            .map(|x| (x[0] * x[0] + x[1] * x[1]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn kappa_range(&self) -> (f64, f64) {
        let min = self.kappa.iter().cloned().fold(f64::MAX, f64::min);
        let max = self.kappa.iter().cloned().fold(f64::MIN, f64::max);
        (min, max)
    }

    pub fn kind(&self) -> ProfileKind {
        match self.source {
            CurveSource::Circle { .. } => ProfileKind::Round { k: 1 },
            CurveSource::AbreschLanger { p, q, .. } => ProfileKind::AbreschLanger { p, q },
        }
    }
}

fn integrate_closed(
    p: u32,
    q: u32,
    kappa_max: f64,
    length: f64,
    tolerance: f64,
    nodes: usize,
) -> Result<ProfileCurve> {
    if nodes < 16 {
        return Err(LabError::InvalidInput("need at least 16 nodes".into()));
    }
    let h_out = length / nodes as f64;
    let substeps = (h_out / step_for_tolerance(tolerance)).ceil().max(1.0) as usize;
    let h = h_out / substeps as f64;
    let source = CurveSource::AbreschLanger {
        p,
        q,
        kappa_max,
        length,
        tolerance,
    };
    let mut c = ProfileCurve::empty(source, length, p, nodes);
    let s0 = start_state(kappa_max);
    let mut s = s0;
    for i in 0..nodes {
        let (t, n) = frame(s[2]);
        let x = [s[0], s[1]];
        let (kd, kdd) = kappa_derivs(x, t, n, s[3]);
        c.sigma.push(i as f64 * h_out);
        c.points.push(x);
        c.tangent.push(t);
        c.normal.push(n);
        c.kappa.push(s[3]);
        c.kappa_dot.push(kd);
        c.kappa_ddot.push(kdd);
        for _ in 0..substeps {
            s = rk4_step(&s, h);
        }
    }
    c.closure_defect = (s[0] - s0[0])
        .abs()
        .max((s[1] - s0[1]).abs())
        .max((s[2] - s0[2] - TAU * p as f64).abs())
        .max((s[3] - s0[3]).abs());
    Ok(c)
}

/// Closure defect after one full period integrated with a fixed step.
pub fn closure_defect_with_step(curve: &ProfileCurve, step: f64) -> Option<f64> {
    let CurveSource::AbreschLanger {
        p,
        kappa_max,
        length,
        ..
    } = curve.source
    else {
        return None;
    };
    let n = (length / step).round() as usize;
    let h = length / n as f64;
    let s0 = start_state(kappa_max);
    let mut s = s0;
    for _ in 0..n {
        s = rk4_step(&s, h);
    }
    Some(
        (s[0] - s0[0])
            .abs()
            .max((s[1] - s0[1]).abs())
            .max((s[2] - s0[2] - TAU * p as f64).abs())
            .max((s[3] - s0[3]).abs()),
    )
}

/// Shoot for the Abresch-Langer curve with rotation index `p` and `q`-fold
/// symmetry, sampled at `nodes` points of uniform arclength.
///
/// The half-oscillation turning angle decreases monotonically from
/// `π/sqrt 2` (near-circular) to `π/2` (large amplitude) as `κ_max` grows;
/// bisection on `κ_max` matches it to `π p/q`.
pub fn solve_abresch_langer(spec: &ProfileSpec, nodes: usize) -> Result<ProfileCurve> {
    spec.validate()?;
    let ProfileKind::AbreschLanger { p, q } = spec.kind else {
        return Err(LabError::InvalidInput("expected an Abresch-Langer spec".into()));
    };
    let target = PI * p as f64 / q as f64;
    let step = step_for_tolerance(spec.tolerance);
    let turn = |k: f64| half_oscillation(k, step).map(|(t, _)| t);

    let mut lo = FRAC_1_SQRT_2 * (1.0 + 1e-6);
    if turn(lo)? < target {
        return Err(LabError::NoConvergence(
            "target turning angle too close to the circle limit".into(),
        ));
    }
    let mut hi = 1.0;
    while turn(hi)? > target {
        lo = hi;
        hi *= 1.5;
        if hi > 12.0 {
            return Err(LabError::NoConvergence(
                "curvature maximum bracket exceeded 12".into(),
            ));
        }
    }
    let mut iterations = 0;
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if turn(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(LabError::NoConvergence("bisection budget exhausted".into()));
        }
    }
    let kappa_max = 0.5 * (lo + hi);
    let (theta, half_len) = half_oscillation(kappa_max, step)?;
    if (theta - target).abs() > spec.tolerance {
        return Err(LabError::NoConvergence(format!(
            "turning angle mismatch {:e}",
            (theta - target).abs()
        )));
    }
    let length = 2.0 * q as f64 * half_len;
    let curve = integrate_closed(p, q, kappa_max, length, spec.tolerance, nodes)?;
    let residual = shrinker_residual(&curve);
    if residual > spec.tolerance || curve.closure_defect > 10.0 * spec.tolerance {
        return Err(LabError::NoConvergence(format!(
            "residual {residual:e}, closure defect {:e}",
            curve.closure_defect
        )));
    }
    Ok(curve)
}

/// Max over nodes of `|κ - <x, N>/2|`.
pub fn shrinker_residual(curve: &ProfileCurve) -> f64 {
    curve
        .points
        .iter()
        .zip(&curve.normal)
        .zip(&curve.kappa)
        .map(|((x, n), k)| (k - (x[0] * n[0] + x[1] * n[1]) / 2.0).abs())
        .fold(0.0, f64::max)
}

/// Gaussian density of the plane restricted to the curve, `(4π)^{-1} e^{-|x|²/4}`.
fn rho2(x: &[f64; 2]) -> f64 {
    (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp() / (4.0 * PI)
}

/// `B_2 = ∫ κ⁴ ρ₂ / ∫ κ² ρ₂` along the curve.
pub fn compute_b2(curve: &ProfileCurve) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, k) in curve.points.iter().zip(&curve.kappa) {
        let w = rho2(x);
        num += k.powi(4) * w;
        den += k * k * w;
    }
    if !(den > 0.0) {
        return Err(LabError::InvalidInput("curvature vanishes identically".into()));
    }
    Ok(num / den)
}

pub const PROFILE_FORMAT_VERSION: u32 = 1;

/// Plain-text export: a `key = value` header followed by one line per node
/// (`sigma x1 x2 kappa`) at 17 significant digits.
pub fn export_curve(curve: &ProfileCurve) -> String {
    let mut out = String::new();
    writeln!(out, "# shrinker-lab profile").unwrap();
    writeln!(out, "version = {PROFILE_FORMAT_VERSION}").unwrap();
    match curve.source {
        CurveSource::Circle { radius } => {
            writeln!(out, "kind = circle").unwrap();
            writeln!(out, "p = 1\nq = 1").unwrap();
            writeln!(out, "radius = {radius:.16e}").unwrap();
        }
        CurveSource::AbreschLanger {
            p,
            q,
            kappa_max,
            tolerance,
            ..
        } => {
            writeln!(out, "kind = abresch-langer").unwrap();
            writeln!(out, "p = {p}\nq = {q}").unwrap();
            writeln!(out, "kappa_max = {kappa_max:.16e}").unwrap();
            writeln!(out, "tolerance = {tolerance:.16e}").unwrap();
        }
    }
    writeln!(out, "length = {:.16e}", curve.length).unwrap();
    writeln!(out, "nodes = {}", curve.len()).unwrap();
    writeln!(out, "# sigma x1 x2 kappa").unwrap();
    for i in 0..curve.len() {
        let x = curve.points[i];
        writeln!(
            out,
            "{:.16e} {:.16e} {:.16e} {:.16e}",
            curve.sigma[i], x[0], x[1], curve.kappa[i]
        )
        .unwrap();
    }
    out
}

/// Parse a curve record. The frame and curvature derivatives are regenerated
/// from the header; the body is checked against them.
pub fn import_curve(text: &str) -> Result<ProfileCurve> {
    let mut header = std::collections::HashMap::new();
    let mut body = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            header.insert(k.trim().to_string(), v.trim().to_string());
        } else {
            let vals: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| LabError::Parse(format!("body line '{line}': {e}")))?;
            if vals.len() != 4 {
                return Err(LabError::Parse(format!("expected 4 columns: '{line}'")));
            }
            body.push([vals[0], vals[1], vals[2], vals[3]]);
        }
    }
    let get = |k: &str| -> Result<&String> {
        header
            .get(k)
            .ok_or_else(|| LabError::Parse(format!("missing header field '{k}'")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse::<f64>()
            .map_err(|e| LabError::Parse(format!("{k}: {e}")))
    };
    let version = num("version")? as u32;
    if version != PROFILE_FORMAT_VERSION {
        return Err(LabError::Parse(format!("unsupported version {version}")));
    }
    let nodes = num("nodes")? as usize;
    if body.len() != nodes {
        return Err(LabError::Parse(format!(
            "header says {nodes} nodes, body has {}",
            body.len()
        )));
    }
    let curve = match get("kind")?.as_str() {
        "circle" => ProfileCurve::circle(num("radius")?, nodes),
        "abresch-langer" => integrate_closed(
            num("p")? as u32,
            num("q")? as u32,
            num("kappa_max")?,
            num("length")?,
            num("tolerance")?,
            nodes,
        )?,
        other => return Err(LabError::Parse(format!("unknown kind '{other}'"))),
    };
    for (i, row) in body.iter().enumerate() {
        let x = curve.points[i];
        let gap = (row[0] - curve.sigma[i])
            .abs()
            .max((row[1] - x[0]).abs())
            .max((row[2] - x[1]).abs())
            .max((row[3] - curve.kappa[i]).abs());
        if gap > 1e-9 {
            return Err(LabError::Parse(format!(
                "node {i} disagrees with regenerated curve by {gap:e}"
            )));
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_k1_is_circle_radius_sqrt2() {
        let RoundProfile::Curve(c) = round_profile(1, 256).unwrap() else {
            panic!("expected curve")
        };
        assert!((c.max_radius() - 2f64.sqrt()).abs() < 1e-14);
        assert!((c.kappa[17] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(shrinker_residual(&c) < 1e-15);
    }

    #[test]
    fn round_k2_symbolic() {
        let RoundProfile::Symbolic(d) = round_profile(2, 0).unwrap() else {
            panic!("expected symbolic data")
        };
        assert_eq!(d.radius, 2.0);
        assert_eq!(d.mean_curvature, 1.0);
        assert_eq!(d.second_fundamental_sq, 0.5);
    }

    #[test]
    fn round_rejects_k0_and_few_nodes() {
        assert!(round_profile(0, 64).is_err());
        assert!(round_profile(1, 8).is_err());
    }

    #[test]
    fn unit_circle_residual_is_half() {
        let c = ProfileCurve::circle(1.0, 64);
        assert!((shrinker_residual(&c) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn inadmissible_ratios_rejected() {
        for (p, q) in [(3, 4), (1, 2), (2, 4), (5, 7), (1, 3)] {
            let err = solve_abresch_langer(&ProfileSpec::abresch_langer(p, q, 1e-8), 64);
            assert!(matches!(err, Err(LabError::NoSuchCurve { .. })), "({p},{q})");
        }
    }

    #[test]
    fn circle_b2_is_half() {
        let c = ProfileCurve::circle(2f64.sqrt(), 128);
        assert!((compute_b2(&c).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn b2_needs_no_residual() {
        let c = ProfileCurve::circle(1.0, 64);
        assert!((compute_b2(&c).unwrap() - 1.0).abs() < 1e-14);
    }
}
