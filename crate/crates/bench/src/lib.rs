//! Fixtures shared by the benchmark targets.

use gaheights::{CompactificationModel, Complex64};

pub fn model(id: &str) -> CompactificationModel {
    CompactificationModel::catalog(id).expect("catalog model")
}

/// Exponent vector `sλ` for a real `s`.
pub fn along(model: &CompactificationModel, s: f64) -> Vec<Complex64> {
    gaheights::density::along_lambda(model, Complex64::new(s, 0.0))
}
