use thiserror::Error;

/// Errors produced by the association library.
#[derive(Debug, Error)]
pub enum Error {
    /// Indices or dimensions of two related objects disagree.
    #[error("structural mismatch: {0}")]
    Structure(String),

    /// A configuration value is out of its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("location ({u}, {v}) lies outside the {width}x{height} score map")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },

    /// A training pair class or calibration set lacks positives or negatives.
    #[error("degenerate classes for {pair}: {positives} positive / {negatives} negative samples")]
    DegenerateClass {
        pair: String,
        positives: usize,
        negatives: usize,
    },

    #[error("pairwise model has no classifier for {0}")]
    ModelIncomplete(String),

    #[error("instance too large: {size} exceeds the cap of {cap} ({what})")]
    InstanceTooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    /// File format tag is unknown or carries an unsupported major version.
    #[error("unsupported format: expected {expected}, found {found}")]
    Format { expected: String, found: String },

    #[error("feature schema mismatch: model was trained with schema {found}, this build uses {expected}")]
    SchemaMismatch { expected: String, found: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks a `"<name>/<major>"` format tag against the expected name and major.
pub fn check_version(found: &str, name: &str, major: u32) -> Result<()> {
    let expected = format!("{name}/{major}");
    let ok = match found.split_once('/') {
        Some((n, v)) => {
            n == name
                && v.split('.')
                    .next()
                    .and_then(|m| m.parse::<u32>().ok())
                    .is_some_and(|m| m == major)
        }
        None => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Format {
            expected,
            found: found.to_string(),
        })
    }
}
