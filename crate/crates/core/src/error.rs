use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("tensor is not positive definite (eigenvalues in [{min_eigenvalue:e}, {max_eigenvalue:e}])")]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("geodesic parameter t = {t} lies outside its domain [0, {t_max})")]
    OutOfDomain { t: f64, t_max: f64 },

    #[error(
        "endpoint is not in the image of the exponential map: tr(k_T^2) = {traceless_norm_sq} >= {threshold}"
    )]
    NotInExpImage {
        traceless_norm_sq: f64,
        threshold: f64,
    },
}

impl GeoError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GeoError::InvalidInput(msg.into())
    }
}

pub type Result<T, E = GeoError> = std::result::Result<T, E>;
