use thiserror::Error;

/// Errors produced by the recoloring engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("dimension mismatch: {name} is {actual_width}x{actual_height}, expected {expected_width}x{expected_height}")]
    DimensionMismatch {
        name: String,
        actual_width: usize,
        actual_height: usize,
        expected_width: usize,
        expected_height: usize,
    },

    #[error("overlapping regions: {count} pixel(s) shared ({})", format_pairs(.pairs))]
    OverlappingRegions {
        count: usize,
        /// Labels of every pair of regions that share at least one pixel.
        pairs: Vec<(String, String)>,
    },

    #[error("no correspondences")]
    NoCorrespondences,

    #[error("unknown target image '{0}'")]
    UnknownTarget(String),

    #[error("empty index set")]
    EmptyIndexSet,

    #[error("k = {k} out of range 1..={max}")]
    NeighborCountOutOfRange { k: usize, max: usize },

    #[error("beta = {0} out of range (0, 1]")]
    BetaOutOfRange(f64),

    #[error("degenerate color cloud")]
    DegenerateColorCloud,

    #[error("unconstrained system")]
    Unconstrained,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a} & {b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// Attach the name of the pipeline stage that produced this error.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with any stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
