//! Generalized linear model fitting by iteratively reweighted least squares,
//! prediction, k-fold cross-validation, and order sweeps.
//!
//! Each structural family pairs with a link: `I1` and `I2` responses are
//! ΔH·d² modeled through inverse (Gamma) or log (Poisson) links, `I3` models
//! ΔH directly through the identity (Normal) link — though any error family
//! may be fit to any structural family. The solver works on a column-scaled
//! design, takes damped increment steps with compensated linear algebra, and
//! evaluates deviances in cancellation-free form so convergence can be driven
//! to machine level even on responses spanning many decades.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::basis::{
    design_matrix, enumerate_terms, response_vector, BasisTerm, ModelFamily, OrderSpec,
};
use crate::dataset::MeasurementRecord;
use crate::error::{Error, Result};
use crate::geometry::{to_spherical, GridPoint, LampPose, SphericalCoord};
use crate::models::{percent_error, rmse};

/// Default fold count for cross-validation.
pub const DEFAULT_CV_FOLDS: usize = 5;

/// Error distribution and its canonical-for-this-toolkit link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorFamily {
    /// Identity link, least-squares fit.
    Normal,
    /// Log link.
    Poisson,
    /// Inverse link (η = 1/μ, η > 0 required).
    Gamma,
}

impl std::fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorFamily::Normal => "normal",
            ErrorFamily::Poisson => "poisson",
            ErrorFamily::Gamma => "gamma",
        })
    }
}

/// Solver knobs; the defaults drive well-posed problems to machine precision.
#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions {
    /// Relative coefficient-change threshold declaring convergence.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions { tol: 1e-10, max_iter: 100 }
    }
}

/// Raw solver output in the original (unscaled) column basis.
#[derive(Debug, Clone)]
pub struct IrlsFit {
    pub coefficients: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Family deviance at the returned coefficients (RSS for Normal).
    pub deviance: f64,
}

/// Fit-quality summary in gain (ΔH) space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub deviance: f64,
    /// Mean absolute relative error, percent.
    pub percent_error: f64,
    pub rmse: f64,
}

/// Where a model came from: dataset identity and fitting configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    /// Hash of the resolved run configuration that produced the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// A fitted intensity surface: basis, coefficients, and family metadata.
///
/// Serializes to a self-describing JSON document; loading re-derives the
/// basis from the stored orders and rejects files whose term list or
/// coefficient vector is inconsistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: ModelFamily,
    pub orders: OrderSpec,
    pub error_family: ErrorFamily,
    pub terms: Vec<BasisTerm>,
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl FittedModel {
    /// Predicted gain ΔH at a spherical coordinate.
    pub fn predict(&self, coord: &SphericalCoord) -> Result<f64> {
        predict_gain(
            self.family,
            self.error_family,
            &self.terms,
            &self.coefficients,
            coord,
        )
    }

    /// Predicted gain ΔH at a grid point under a lamp pose.
    pub fn eval_point(&self, point: &GridPoint, lamp: &LampPose) -> Result<f64> {
        self.predict(&to_spherical(point, lamp)?)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.validate()?;
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("model serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let model: FittedModel = serde_json::from_str(&text).map_err(|e| {
            Error::Data(format!("model file {}: {e}", path.display()))
        })?;
        model.validate()?;
        Ok(model)
    }

    /// Structural consistency: the stored basis must be exactly the canonical
    /// enumeration of the stored orders, with one finite coefficient per term.
    pub fn validate(&self) -> Result<()> {
        let expected = enumerate_terms(self.family, &self.orders)?;
        if self.terms != expected {
            return Err(Error::Data(format!(
                "model term list does not match the canonical {}-term basis for orders ({}, {}, {})",
                expected.len(),
                self.orders.p,
                self.orders.beta_max,
                self.orders.r
            )));
        }
        if self.coefficients.len() != self.terms.len() {
            return Err(Error::Data(format!(
                "{} coefficients for {} basis terms",
                self.coefficients.len(),
                self.terms.len()
            )));
        }
        if let Some(bad) = self.coefficients.iter().find(|c| !c.is_finite()) {
            return Err(Error::Data(format!("non-finite coefficient {bad}")));
        }
        Ok(())
    }
}

/// Largest linear-predictor magnitude passed to exp(); beyond it the log-link
/// inverse saturates so squared prediction errors stay representable.
const LOG_LINK_ETA_CAP: f64 = 350.0;

/// Evaluates a fitted surface at one coordinate and maps it back to gain.
fn predict_gain(
    family: ModelFamily,
    error_family: ErrorFamily,
    terms: &[BasisTerm],
    coefficients: &[f64],
    coord: &SphericalCoord,
) -> Result<f64> {
    if terms.len() != coefficients.len() {
        return Err(Error::Data(format!(
            "{} coefficients for {} terms",
            coefficients.len(),
            terms.len()
        )));
    }
    let values: Vec<f64> = terms.iter().map(|t| t.eval(coord)).collect();
    let eta = dot2(&values, coefficients);
    let mu = match error_family {
        ErrorFamily::Normal => eta,
        ErrorFamily::Poisson => eta.clamp(-LOG_LINK_ETA_CAP, LOG_LINK_ETA_CAP).exp(),
        ErrorFamily::Gamma => {
            if !(eta > 0.0) {
                return Err(Error::Numerical(format!(
                    "singular prediction: inverse-link predictor {eta} is not positive at \
                     (alpha={}, beta={}, d={})",
                    coord.alpha, coord.beta, coord.d
                )));
            }
            1.0 / eta
        }
    };
    Ok(match family {
        ModelFamily::I1 | ModelFamily::I2 => mu / (coord.d * coord.d),
        ModelFamily::I3 => mu,
    })
}

/// Compensated dot product (products via fused multiply-add, errors carried
/// through a running compensation term).
fn dot2(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let p = a * b;
        let p_err = a.mul_add(b, -p);
        let t = sum + p;
        let swap = t - sum;
        let s_err = (sum - (t - swap)) + (p - swap);
        sum = t;
        comp += p_err + s_err;
    }
    sum + comp
}

/// Compensated (Neumaier) summation.
fn sum2(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Row-wise compensated linear predictor η = X·b.
fn linear_predictor(x: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = x.ncols();
    let mut row = vec![0.0; m];
    DVector::from_fn(x.nrows(), |i, _| {
        for (j, r) in row.iter_mut().enumerate() {
            *r = x[(i, j)];
        }
        dot2(&row, b.as_slice())
    })
}

struct LinkState {
    deviance: f64,
    /// Working residual on the link scale; `None` when η left the family
    /// domain (deviance infinite).
    residual: Option<DVector<f64>>,
}

/// Linear predictor, deviance, and working residual at coefficients `b`,
/// using cancellation-free forms so deviance comparisons stay meaningful
/// arbitrarily close to the optimum.
fn link_state(
    xs: &DMatrix<f64>,
    b: &DVector<f64>,
    y: &DVector<f64>,
    log_y: Option<&DVector<f64>>,
    family: ErrorFamily,
) -> LinkState {
    let eta = linear_predictor(xs, b);
    match family {
        ErrorFamily::Poisson => {
            if eta.max() > 700.0 {
                return LinkState { deviance: f64::INFINITY, residual: None };
            }
            let log_y = log_y.expect("poisson state requires log responses");
            let n = y.len();
            let mut r = DVector::zeros(n);
            let mut dev_terms = Vec::with_capacity(n);
            for i in 0..n {
                let u = log_y[i] - eta[i];
                r[i] = u.exp_m1(); // (y − μ)/μ
                dev_terms.push(y[i] * u + y[i] * (-u).exp_m1());
            }
            LinkState { deviance: 2.0 * sum2(dev_terms), residual: Some(r) }
        }
        ErrorFamily::Gamma => {
            if eta.min() <= 0.0 {
                return LinkState { deviance: f64::INFINITY, residual: None };
            }
            let n = y.len();
            let mut r = DVector::zeros(n);
            let mut dev_terms = Vec::with_capacity(n);
            for i in 0..n {
                let t1 = y[i].mul_add(eta[i], -1.0); // y·η − 1, exactly rounded
                r[i] = -t1 * eta[i]; // −(y − μ)/μ²
                dev_terms.push(t1 - t1.ln_1p());
            }
            LinkState { deviance: 2.0 * sum2(dev_terms), residual: Some(r) }
        }
        ErrorFamily::Normal => {
            let r = y - &eta;
            let deviance = r.norm_squared();
            LinkState { deviance, residual: Some(r) }
        }
    }
}

/// Least-squares solve min‖A·x − rhs‖ by QR, falling back to SVD when the
/// triangular factor is numerically singular.
fn least_squares(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let m = a.ncols();
    let qr = a.clone().qr();
    let mut qtb = rhs.clone();
    qr.q_tr_mul(&mut qtb);
    let top = DVector::from_iterator(m, qtb.iter().take(m).copied());
    if let Some(x) = qr.r().solve_upper_triangular(&top) {
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    a.clone()
        .svd(true, true)
        .solve(rhs, 1e-14)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))
}

/// Scales each row i of `x` by `sw[i]`.
fn scale_rows(x: &DMatrix<f64>, sw: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * sw[i])
}

/// Rejects rank-deficient designs, naming the dependent columns (the ones a
/// column-pivoted QR defers past the numerical rank). The tolerance is the
/// standard max(n, m)·ε relative cutoff, so merely ill-conditioned designs
/// are left to the solver rather than refused.
fn check_rank(xs: &DMatrix<f64>) -> Result<()> {
    let (n, m) = xs.shape();
    let tol = n.max(m) as f64 * f64::EPSILON;
    let qr = xs.clone().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..m)
        .take_while(|&i| r[(i, i)].abs() > tol * lead)
        .count();
    if rank == m {
        return Ok(());
    }
    let mut idx = DMatrix::<usize>::from_fn(1, m, |_, j| j);
    qr.p().permute_columns(&mut idx);
    let offending: Vec<String> = (rank..m).map(|k| idx[(0, k)].to_string()).collect();
    Err(Error::Numerical(format!(
        "design matrix is rank deficient (rank {rank} of {m}); dependent columns: {}",
        offending.join(", ")
    )))
}

/// Fits a GLM by iteratively reweighted least squares.
///
/// Columns are scaled to unit max magnitude before solving. The first
/// iteration solves the classic working response from the floor start
/// μ₀ = max(y, 1e-8·max y); subsequent iterations solve for a coefficient
/// increment from compensated working residuals and damp the step until the
/// deviance stops increasing (tiny relative steps are accepted outright, and
/// steps leaving the family domain are rejected through their infinite
/// deviance). Normal/identity reduces to a single least-squares solve.
pub fn irls_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    family: ErrorFamily,
    opts: &IrlsOptions,
) -> Result<IrlsFit> {
    let (n, m) = x.shape();
    if n == 0 || m == 0 {
        return Err(Error::Data("empty design matrix".into()));
    }
    if y.len() != n {
        return Err(Error::Data(format!(
            "{} responses for {n} design rows",
            y.len()
        )));
    }
    if n < m {
        // Degenerate rank deficiency: classified with the other unsolvable
        // designs rather than as malformed input.
        return Err(Error::Numerical(format!(
            "underdetermined fit: {n} rows for {m} columns"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite design entry".into()));
    }
    if let Some(i) = (0..n).find(|&i| !y[i].is_finite()) {
        return Err(Error::Data(format!("non-finite response at row {i}")));
    }
    if matches!(family, ErrorFamily::Poisson | ErrorFamily::Gamma) {
        if let Some(i) = (0..n).find(|&i| y[i] <= 0.0) {
            return Err(Error::Domain(format!(
                "{family} responses must be positive; row {i} is {}",
                y[i]
            )));
        }
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Domain("solver tolerance and iteration cap must be positive".into()));
    }

    // Column scaling to unit max magnitude.
    let s = DVector::from_fn(m, |j, _| {
        let v = x.column(j).abs().max();
        if v > 0.0 { v } else { 1.0 }
    });
    let xs = DMatrix::from_fn(n, m, |i, j| x[(i, j)] / s[j]);
    check_rank(&xs)?;

    let unscale = |b: &DVector<f64>| DVector::from_fn(m, |j, _| b[j] / s[j]);

    if family == ErrorFamily::Normal {
        let b = least_squares(&xs, y)?;
        let state = link_state(&xs, &b, y, None, family);
        return Ok(IrlsFit {
            coefficients: unscale(&b),
            iterations: 1,
            converged: true,
            deviance: state.deviance,
        });
    }

    let log_y = (family == ErrorFamily::Poisson).then(|| y.map(f64::ln));
    let y_max = y.max();
    let mut mu = y.map(|v| v.max(1e-8 * y_max));
    let weights = |mu: &DVector<f64>| -> DVector<f64> {
        match family {
            ErrorFamily::Poisson => mu.clone(),
            ErrorFamily::Gamma => mu.component_mul(mu),
            ErrorFamily::Normal => unreachable!(),
        }
    };
    let update_mu = |b: &DVector<f64>| -> DVector<f64> {
        let eta = linear_predictor(&xs, b);
        match family {
            ErrorFamily::Poisson => eta.map(|e| e.clamp(-745.0, 700.0).exp()),
            ErrorFamily::Gamma => eta.map(|e| 1.0 / e.max(1e-300)),
            ErrorFamily::Normal => unreachable!(),
        }
    };

    // Iteration 1: classic weighted working response from the floor start,
    // halved toward zero while the deviance is infinite.
    let w = weights(&mu);
    let w_max = w.max();
    let sw = w.map(|v| (v / w_max).sqrt());
    let a = scale_rows(&xs, &sw);
    let z = match family {
        ErrorFamily::Poisson => {
            DVector::from_fn(n, |i, _| mu[i].ln() + (y[i] - mu[i]) / mu[i])
        }
        ErrorFamily::Gamma => {
            DVector::from_fn(n, |i, _| 1.0 / mu[i] - (y[i] - mu[i]) / (mu[i] * mu[i]))
        }
        ErrorFamily::Normal => unreachable!(),
    };
    let mut b = least_squares(&a, &z.component_mul(&sw))?;
    let mut state = link_state(&xs, &b, y, log_y.as_ref(), family);
    for _ in 0..60 {
        if state.deviance.is_finite() {
            break;
        }
        b *= 0.5;
        state = link_state(&xs, &b, y, log_y.as_ref(), family);
    }
    let mut iterations = 1;
    let mut converged = false;
    mu = update_mu(&b);

    // Increment iterations with deviance-guarded step halving.
    for it in 2..=opts.max_iter {
        iterations = it;
        let w = weights(&mu);
        let w_max = w.max();
        let sw = w.map(|v| (v / w_max).sqrt());
        let a = scale_rows(&xs, &sw);
        let state = link_state(&xs, &b, y, log_y.as_ref(), family);
        let Some(residual) = state.residual else {
            return Err(Error::Numerical(
                "solver left the family domain and could not recover".into(),
            ));
        };
        let db = least_squares(&a, &residual.component_mul(&sw))?;
        let rel_step = db.norm() / b.norm().max(1e-300);
        let slack = 1e-9 * (1.0 + state.deviance.abs());
        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..60 {
            let cand = &b + &db * t;
            let cand_state = link_state(&xs, &cand, y, log_y.as_ref(), family);
            if cand_state.deviance.is_finite()
                && (cand_state.deviance <= state.deviance + slack || rel_step * t < 1e-8)
            {
                accepted = Some(cand);
                break;
            }
            t /= 2.0;
        }
        let Some(acc) = accepted else {
            break; // fully damped step still rejected: report non-convergence
        };
        let rel = (&acc - &b).norm() / acc.norm().max(1e-300);
        b = acc;
        if rel < opts.tol {
            converged = true;
            break;
        }
        mu = update_mu(&b);
    }

    let deviance = link_state(&xs, &b, y, log_y.as_ref(), family).deviance;
    Ok(IrlsFit { coefficients: unscale(&b), iterations, converged, deviance })
}

/// Gain-space predictions for a record set.
fn predict_records(
    family: ModelFamily,
    error_family: ErrorFamily,
    terms: &[BasisTerm],
    coefficients: &[f64],
    records: &[MeasurementRecord],
    lamp: &LampPose,
) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|rec| {
            let coord = to_spherical(&rec.point, lamp)?;
            predict_gain(family, error_family, terms, coefficients, &coord)
        })
        .collect()
}

/// Fits one configuration to a record set and summarizes fit quality in gain
/// space. Provenance is left empty for the caller to fill.
pub fn fit(
    records: &[MeasurementRecord],
    lamp: &LampPose,
    family: ModelFamily,
    orders: &OrderSpec,
    error_family: ErrorFamily,
) -> Result<FittedModel> {
    let terms = enumerate_terms(family, orders)?;
    let coords: Vec<SphericalCoord> = records
        .iter()
        .map(|r| to_spherical(&r.point, lamp))
        .collect::<Result<_>>()?;
    let x = design_matrix(&coords, &terms)?;
    let y = response_vector(records, lamp, family)?;
    let solved = irls_fit(&x, &y, error_family, &IrlsOptions::default())?;
    let coefficients: Vec<f64> = solved.coefficients.iter().copied().collect();

    let predictions = predict_records(family, error_family, &terms, &coefficients, records, lamp)?;
    let actual: Vec<f64> = records.iter().map(|r| r.delta_h).collect();
    let diagnostics = FitDiagnostics {
        iterations: solved.iterations,
        converged: solved.converged,
        deviance: solved.deviance,
        percent_error: percent_error(&predictions, &actual)?,
        rmse: rmse(&predictions, &actual)?,
    };
    Ok(FittedModel {
        family,
        orders: *orders,
        error_family,
        terms,
        coefficients,
        diagnostics: Some(diagnostics),
        provenance: None,
    })
}

/// Cross-validation summary; errors are gain-space and fold-averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// Mean absolute relative error (percent) of each fold's held-out points.
    pub fold_errors: Vec<f64>,
    /// Mean of the fold errors, percent.
    pub percent_error: f64,
    /// Mean of the per-fold RMSE values.
    pub rmse: f64,
    pub folds: usize,
    pub seed: u64,
    /// True when every fold's solver run converged.
    pub all_converged: bool,
    /// Set when folds are thin relative to the basis size.
    pub warning: Option<String>,
}

/// k-fold cross-validation of one configuration.
///
/// Records are shuffled once with a stream seeded by `seed`, split into k
/// near-equal folds (the first n mod k folds get the extra record), and each
/// fold is scored against a fit on its complement. The same seed always
/// produces the same folds for a given record count.
pub fn kfold_cv(
    records: &[MeasurementRecord],
    lamp: &LampPose,
    family: ModelFamily,
    orders: &OrderSpec,
    error_family: ErrorFamily,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    let n = records.len();
    if k < 2 {
        return Err(Error::Domain(format!("cross-validation needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::Data(format!("{n} records cannot fill {k} folds")));
    }
    let terms = enumerate_terms(family, orders)?;
    let min_train = n - n.div_ceil(k);
    if min_train < terms.len() {
        return Err(Error::Data(format!(
            "fold training size {min_train} cannot identify {} terms",
            terms.len()
        )));
    }
    let warning = (min_train < 2 * terms.len()).then(|| {
        format!(
            "thin folds: {min_train} training rows for {} terms",
            terms.len()
        )
    });

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;

    let mut fold_errors = Vec::with_capacity(k);
    let mut fold_rmse = Vec::with_capacity(k);
    let mut all_converged = true;
    let mut start = 0usize;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let test_idx = &idx[start..start + size];
        start += size;
        let train: Vec<MeasurementRecord> = idx
            .iter()
            .filter(|i| !test_idx.contains(i))
            .map(|&i| records[i].clone())
            .collect();
        let test: Vec<MeasurementRecord> = test_idx.iter().map(|&i| records[i].clone()).collect();

        let coords: Vec<SphericalCoord> = train
            .iter()
            .map(|r| to_spherical(&r.point, lamp))
            .collect::<Result<_>>()?;
        let x = design_matrix(&coords, &terms)?;
        let y = response_vector(&train, lamp, family)?;
        let solved = irls_fit(&x, &y, error_family, &IrlsOptions::default())?;
        all_converged &= solved.converged;
        let coefficients: Vec<f64> = solved.coefficients.iter().copied().collect();

        let predictions =
            predict_records(family, error_family, &terms, &coefficients, &test, lamp)?;
        let actual: Vec<f64> = test.iter().map(|r| r.delta_h).collect();
        fold_errors.push(percent_error(&predictions, &actual)?);
        fold_rmse.push(rmse(&predictions, &actual)?);
    }
    let percent = fold_errors.iter().sum::<f64>() / k as f64;
    let mean_rmse = fold_rmse.iter().sum::<f64>() / k as f64;
    Ok(CvResult {
        fold_errors,
        percent_error: percent,
        rmse: mean_rmse,
        folds: k,
        seed,
        all_converged,
        warning,
    })
}

/// One order configuration's cross-validated score within a sweep. Configs
/// that cannot be fit (too few rows for the basis, solver failure) keep their
/// identity but carry empty score fields and a note saying why.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub family: ModelFamily,
    pub error_family: ErrorFamily,
    pub p: u32,
    pub beta_max: u32,
    pub r: u32,
    pub n_terms: usize,
    pub cv_percent_error: Option<f64>,
    pub cv_rmse: Option<f64>,
    /// Whole-dataset refit error, the optimistic in-sample counterpart.
    pub train_percent_error: Option<f64>,
    pub train_rmse: Option<f64>,
    pub converged: Option<bool>,
    pub note: Option<String>,
}

/// Sweep output: every configuration in enumeration order, plus the indices
/// of the accuracy frontier (rows achieving a new lowest cross-validated
/// error as term count grows).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub frontier: Vec<usize>,
}

/// Cross-validates every order configuration of a family pair: p ∈ 1–9,
/// beta_max ∈ {2, 4, 6, 8}, and d order 0 (for `I1`) or 1–9 (otherwise) —
/// 36 configurations for `I1`, 324 for `I2`/`I3`. Configurations run in
/// parallel; the row order and every score are independent of thread timing.
pub fn sweep(
    records: &[MeasurementRecord],
    lamp: &LampPose,
    family: ModelFamily,
    error_family: ErrorFamily,
    k: usize,
    seed: u64,
) -> Result<SweepResult> {
    if k < 2 {
        return Err(Error::Domain(format!("cross-validation needs k >= 2, got {k}")));
    }
    if records.len() < k {
        return Err(Error::Data(format!(
            "{} records cannot fill {k} folds",
            records.len()
        )));
    }
    let mut configs = Vec::new();
    for p in 1..=9u32 {
        for beta_max in [2u32, 4, 6, 8] {
            match family {
                ModelFamily::I1 => configs.push((p, beta_max, 0u32)),
                ModelFamily::I2 | ModelFamily::I3 => {
                    configs.extend((1..=9u32).map(|r| (p, beta_max, r)));
                }
            }
        }
    }

    let rows: Vec<SweepRow> = configs
        .par_iter()
        .map(|&(p, beta_max, r)| {
            let orders = OrderSpec { p, beta_max, r };
            let n_terms = enumerate_terms(family, &orders)
                .map(|t| t.len())
                .unwrap_or(0);
            let mut row = SweepRow {
                family,
                error_family,
                p,
                beta_max,
                r,
                n_terms,
                cv_percent_error: None,
                cv_rmse: None,
                train_percent_error: None,
                train_rmse: None,
                converged: None,
                note: None,
            };
            match kfold_cv(records, lamp, family, &orders, error_family, k, seed) {
                Ok(cv) => {
                    row.cv_percent_error = Some(cv.percent_error);
                    row.cv_rmse = Some(cv.rmse);
                    row.converged = Some(cv.all_converged);
                    row.note = cv.warning;
                    // In-sample counterpart from a whole-dataset refit.
                    match fit(records, lamp, family, &orders, error_family) {
                        Ok(model) => {
                            let diag = model.diagnostics.expect("fit always fills diagnostics");
                            row.train_percent_error = Some(diag.percent_error);
                            row.train_rmse = Some(diag.rmse);
                            row.converged = Some(cv.all_converged && diag.converged);
                        }
                        Err(e) => row.note = Some(format!("refit: {e}")),
                    }
                }
                Err(e) => row.note = Some(e.to_string()),
            }
            row
        })
        .collect();

    // Frontier: prefix minima of cross-validated error over ascending basis
    // size (ties in size resolved by enumeration order).
    let mut order: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].cv_percent_error.is_some())
        .collect();
    order.sort_by_key(|&i| (rows[i].n_terms, i));
    let mut frontier = Vec::new();
    let mut best = f64::INFINITY;
    for i in order {
        let e = rows[i].cv_percent_error.unwrap();
        if e.is_finite() && e < best {
            best = e;
            frontier.push(i);
        }
    }
    Ok(SweepResult { rows, frontier })
}

// ---------------------------------------------------------------------------
