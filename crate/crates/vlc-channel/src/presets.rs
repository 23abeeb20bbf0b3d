//! Built-in reference models: the published 12-term I₁ and I₂ polynomial
//! fits, usable for prediction, mapping, and synthetic data without refitting.

use crate::basis::{enumerate_terms, ModelFamily, OrderSpec};
use crate::glm::{ErrorFamily, FittedModel};

/// Published 12-term I₁ model: inverse-gain polynomial in (α, β²) with
/// orders (4, 4, 0), fitted under a Gamma error family.
pub fn i1_reference() -> FittedModel {
    let orders = OrderSpec::new(4, 4, 0).expect("preset orders are valid");
    let terms = enumerate_terms(ModelFamily::I1, &orders).expect("preset basis is valid");
    let coefficients = vec![
        0.088395, 1.8365, 0.53823, 14.718, 6.3874, 0.92338, 46.406, 26.178, -7.8413, 52.665,
        39.219, -1.3364,
    ];
    debug_assert_eq!(terms.len(), coefficients.len());
    FittedModel {
        family: ModelFamily::I1,
        orders,
        error_family: ErrorFamily::Gamma,
        terms,
        coefficients,
        diagnostics: None,
        provenance: None,
    }
}

/// Published 12-term I₂ model: log-gain polynomial in (α, β², d) with
/// orders (3, 2, 1), fitted under a Poisson error family.
pub fn i2_reference() -> FittedModel {
    let orders = OrderSpec::new(3, 2, 1).expect("preset orders are valid");
    let terms = enumerate_terms(ModelFamily::I2, &orders).expect("preset basis is valid");
    let coefficients = vec![
        6.1107, 20.436, -9.8384, -0.09868, 47.629, -12.142, -1.0858, -0.08044, 52.16, 13.944,
        -1.4756, 0.90893,
    ];
    debug_assert_eq!(terms.len(), coefficients.len());
    FittedModel {
        family: ModelFamily::I2,
        orders,
        error_family: ErrorFamily::Poisson,
        terms,
        coefficients,
        diagnostics: None,
        provenance: None,
    }
}

// ---------------------------------------------------------------------------
