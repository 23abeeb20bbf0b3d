//! Truncated monomial bases in (α, β², d) and design-matrix assembly.
//!
//! Azimuthal symmetry of the lamp restricts β to even powers, so a basis term
//! is the exponent triple (a, b, c) of α^a · β^(2b) · d^c. The truncation rule
//! caps each exponent by its per-variable order and the total degree by the
//! largest of the three orders; it reproduces the published term counts of
//! every tabulated configuration and both canonical 12-term polynomials.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::MeasurementRecord;
use crate::error::{Error, Result};
use crate::geometry::{to_spherical, LampPose, SphericalCoord};

/// Structural family of an intensity model.
///
/// `I1` and `I2` keep an explicit 1/d² free-space factor outside the fitted
/// surface (`I1` additionally excludes d from the basis); `I3` absorbs all
/// distance dependence into the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    /// f(α, β)/d² — no d terms in the basis.
    I1,
    /// f(α, β, d)/d².
    I2,
    /// f(α, β, d) — no explicit free-space factor.
    I3,
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelFamily::I1 => "i1",
            ModelFamily::I2 => "i2",
            ModelFamily::I3 => "i3",
        })
    }
}

/// Per-variable polynomial orders of a basis.
///
/// `p` caps the α power, `beta_max` the β power (even, so the β² exponent is
/// capped by `beta_max/2`), `r` the d power. `r` must be 0 for `I1` and 1–9
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderSpec {
    pub p: u32,
    pub beta_max: u32,
    pub r: u32,
}

impl OrderSpec {
    /// Validates ranges: p ∈ 1–9, beta_max even in 2–8, r ∈ 0–9.
    pub fn new(p: u32, beta_max: u32, r: u32) -> Result<Self> {
        if !(1..=9).contains(&p) {
            return Err(Error::Domain(format!("alpha order p = {p} outside 1..=9")));
        }
        if beta_max % 2 != 0 {
            return Err(Error::Domain(format!(
                "beta order {beta_max} must be even (azimuthal symmetry admits only even powers)"
            )));
        }
        if !(2..=8).contains(&beta_max) {
            return Err(Error::Domain(format!(
                "beta order {beta_max} outside 2..=8"
            )));
        }
        if r > 9 {
            return Err(Error::Domain(format!("d order r = {r} outside 0..=9")));
        }
        Ok(OrderSpec { p, beta_max, r })
    }

    /// Cap on the β² exponent.
    pub fn q(&self) -> u32 {
        self.beta_max / 2
    }
}

/// Exponents of one monomial α^a · β^(2b) · d^c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisTerm {
    pub a: u32,
    pub b: u32,
    pub c: u32,
}

impl BasisTerm {
    /// Total degree a + b + c used by the graded canonical ordering.
    pub fn degree(&self) -> u32 {
        self.a + self.b + self.c
    }

    /// Evaluates the monomial at a coordinate.
    pub fn eval(&self, coord: &SphericalCoord) -> f64 {
        let beta2 = coord.beta * coord.beta;
        coord.alpha.powi(self.a as i32) * beta2.powi(self.b as i32) * coord.d.powi(self.c as i32)
    }
}

/// Enumerates the basis for a family and order spec in canonical order.
///
/// Kept are all (a, b, c) with a ≤ p, b ≤ beta_max/2, c ≤ r and
/// a + b + c ≤ max(p, beta_max/2, r); for `I1` the basis has no d terms
/// (c ≡ 0, r must be 0). Canonical order is graded by total degree a+b+c,
/// ties broken by descending (a, b, c), which lists α before β² before d —
/// the order the 12-term model forms are conventionally written in. The
/// leading term is always the constant (0, 0, 0).
pub fn enumerate_terms(family: ModelFamily, orders: &OrderSpec) -> Result<Vec<BasisTerm>> {
    // Re-validate: OrderSpec is a plain struct and may not have come through new().
    let orders = OrderSpec::new(orders.p, orders.beta_max, orders.r)?;
    match family {
        ModelFamily::I1 if orders.r != 0 => {
            return Err(Error::Domain(format!(
                "family i1 admits no d terms; r = {} must be 0",
                orders.r
            )));
        }
        ModelFamily::I2 | ModelFamily::I3 if orders.r == 0 => {
            return Err(Error::Domain(format!(
                "family {family} requires a d order in 1..=9, got r = 0"
            )));
        }
        _ => {}
    }
    let (p, q, r) = (orders.p, orders.q(), orders.r);
    let cap = p.max(q).max(r);
    let mut terms = Vec::new();
    for degree in 0..=cap {
        let mut level = Vec::new();
        for a in 0..=p.min(degree) {
            for b in 0..=q.min(degree - a) {
                let c = degree - a - b;
                if c <= r {
                    level.push(BasisTerm { a, b, c });
                }
            }
        }
        level.sort_by(|s, t| (t.a, t.b, t.c).cmp(&(s.a, s.b, s.c)));
        terms.extend(level);
    }
    Ok(terms)
}

/// Assembles the design matrix: entry (i, j) = α_i^a_j · β_i^(2 b_j) · d_i^c_j.
pub fn design_matrix(coords: &[SphericalCoord], terms: &[BasisTerm]) -> Result<DMatrix<f64>> {
    if coords.is_empty() || terms.is_empty() {
        return Err(Error::Domain(
            "design matrix needs at least one coordinate and one term".into(),
        ));
    }
    for (i, c) in coords.iter().enumerate() {
        if !(c.alpha.is_finite() && c.beta.is_finite() && c.d.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite coordinate in row {i}: (alpha={}, beta={}, d={})",
                c.alpha, c.beta, c.d
            )));
        }
    }
    Ok(DMatrix::from_fn(coords.len(), terms.len(), |i, j| {
        terms[j].eval(&coords[i])
    }))
}

/// Builds the GLM response: y_i = ΔH_i · d_i² for `I1`/`I2` (the families with
/// an explicit 1/d² factor), y_i = ΔH_i for `I3`. Gains must be positive.
pub fn response_vector(
    records: &[MeasurementRecord],
    lamp: &LampPose,
    family: ModelFamily,
) -> Result<DVector<f64>> {
    let mut y = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if !(rec.delta_h > 0.0) {
            return Err(Error::Domain(format!(
                "record {i} has nonpositive gain {} (positive responses required)",
                rec.delta_h
            )));
        }
        let v = match family {
            ModelFamily::I1 | ModelFamily::I2 => {
                let d = to_spherical(&rec.point, lamp)?.d;
                rec.delta_h * d * d
            }
            ModelFamily::I3 => rec.delta_h,
        };
        y.push(v);
    }
    Ok(DVector::from_vec(y))
}

// ---------------------------------------------------------------------------
