use thiserror::Error;

/// Errors from the polynomial algebra layer.
#[derive(Debug, Error)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polynomial is not harmonic (mass outside degree {expected})")]
    NotHarmonic { expected: u32 },
    #[error("delta {0} outside the open interval (0, 1/4)")]
    DeltaOutOfRange(f64),
    #[error("weighted degree {got} of a composition monomial exceeds the bound {bound}")]
    WeightedDegreeExceeded { got: u32, bound: u32 },
    #[error("malformed polynomial JSON: {0}")]
    Serde(String),
}

/// Errors from super non-singularity testing and decomposition.
#[derive(Debug, Error)]
pub enum SnptError {
    #[error("polynomial {index} is not normalized (L2 norm {norm})")]
    NotNormalized { index: usize, norm: f64 },
    #[error("jacobian probe needs m <= dim, got m={m}, dim={dim}")]
    RankDeficientSetup { m: usize, dim: usize },
    #[error("polynomial is not pure harmonic of a single degree")]
    NotPureHarmonic,
    #[error("initial set already yields a violation certificate at the input level (k={k}, est_prob={est_prob})")]
    NotSufficientlyNonSingular { k: u32, est_prob: f64 },
    #[error("rewrite coefficient {name} = {value} exceeds its bound {bound}")]
    CoefficientBlowup {
        name: &'static str,
        value: f64,
        bound: f64,
    },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Errors from region sampling and partitioning.
#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("acceptance rate {rate:.3e} below floor {floor:.3e}; region is effectively empty")]
    AcceptanceTooLow { rate: f64, floor: f64 },
    #[error("decomposition failed: {0}")]
    DecompositionFailed(String),
    #[error("no cells passed the selection thresholds")]
    NoCellsKept,
    #[error(transparent)]
    Snpt(#[from] SnptError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Errors from the robust perceptron stack.
#[derive(Debug, Error)]
pub enum PerceptronError {
    #[error("whitening produced a degenerate direction (eigenvalue {0:.3e} below 1e-10)")]
    IllConditioned(f64),
    #[error("spectral filter removed more than half of the total weight")]
    FilterDiverged,
    #[error(
        "no norm decrease for {0} consecutive iterations while the disagreement band stayed heavy"
    )]
    NoProgress(usize),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Errors from the decision-list learner.
#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("every corruption-rate guess failed validation in this region")]
    AllGuessesFailed,
    #[error(transparent)]
    Perceptron(#[from] PerceptronError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}
