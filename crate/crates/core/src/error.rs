use thiserror::Error;

/// Errors raised by the numerical modules.
///
/// The variant name is what the command line reports when a run aborts.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("no Abresch-Langer curve with rotation data p={p}, q={q}: p/q must lie strictly inside (1/2, 1/sqrt 2) with gcd(p,q)=1")]
    NoSuchCurve { p: u32, q: u32 },

    #[error("shooting did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate metric at node {node} (det g = {det:e})")]
    DegenerateMetric { node: usize, det: f64 },

    #[error("mean curvature vanishes at node {node}: |H| = {value:e} below threshold {threshold:e}")]
    MeanCurvatureVanishes {
        node: usize,
        value: f64,
        threshold: f64,
    },

    #[error("graph regularity violated: |U|_C2 = {norm:e} exceeds {limit:e}")]
    GraphRegularity { norm: f64, limit: f64 },

    #[error("ill-conditioned Gram matrix (condition number {cond:e})")]
    IllConditionedGram { cond: f64 },

    #[error("unsupported norm: derivative order {k}, exponent {p}")]
    UnsupportedNorm { k: usize, p: u32 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("field outside the required space: {0}")]
    NotInKernel(String),

    #[error("finite difference step {step:e} below roundoff floor")]
    StepUnderflow { step: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// Short variant name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            LabError::NoSuchCurve { .. } => "NoSuchCurve",
            LabError::NoConvergence(_) => "NoConvergence",
            LabError::InvalidInput(_) => "InvalidInput",
            LabError::DegenerateMetric { .. } => "DegenerateMetric",
            LabError::MeanCurvatureVanishes { .. } => "MeanCurvatureVanishes",
            LabError::GraphRegularity { .. } => "GraphRegularity",
            LabError::IllConditionedGram { .. } => "IllConditionedGram",
            LabError::UnsupportedNorm { .. } => "UnsupportedNorm",
            LabError::SupportViolation(_) => "SupportViolation",
            LabError::NotInKernel(_) => "NotInKernel",
            LabError::StepUnderflow { .. } => "StepUnderflow",
            LabError::Parse(_) => "Parse",
            LabError::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
