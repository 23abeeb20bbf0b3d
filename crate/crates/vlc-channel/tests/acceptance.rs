//! Release gate: nine checks covering basis combinatorics, solver
//! correctness against independent oracles, coefficient recovery, baseline
//! ordering, waveform gain extraction, link-budget calibration, receiver
//! geometry, and the full order-sweep budget. Each criterion prints one
//! PASS/FAIL line; the test fails if any criterion fails or overruns its
//! time budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Normal, Poisson as PoissonDist};

use vlc_channel::basis::{enumerate_terms, ModelFamily, OrderSpec};
use vlc_channel::dataset::{self, measurement_grid, MeasurementRecord};
use vlc_channel::geometry::{to_spherical, GridPoint, LampPose, REFERENCE_POINT};
use vlc_channel::glm::{self, irls_fit, ErrorFamily, IrlsOptions};
use vlc_channel::models::{self, LambertianModel, PointModel};
use vlc_channel::perf::{ber, fov_check, fov_crossover, q_function, FovParams};
use vlc_channel::presets;
use vlc_channel::signal::{
    self, SymbolSequence, DEFAULT_BAND_THRESHOLD, DEFAULT_F_MAX, DEFAULT_HIGHPASS_CUTOFF,
    DEFAULT_LOWPASS_CUTOFF, DEFAULT_PULSE_DURATION, DEFAULT_SAMPLE_RATE,
};

// ---------------------------------------------------------------------------
// Gate harness

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        println!(); // detach the first criterion line from the harness prefix
        Gate { failures: Vec::new() }
    }

    fn check(&mut self, number: usize, name: &str, budget_s: Option<f64>, body: impl FnOnce()) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(body));
        let secs = start.elapsed().as_secs_f64();
        let mut problems = Vec::new();
        if let Err(panic) = outcome {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            problems.push(msg);
        }
        if let Some(budget) = budget_s {
            if secs > budget {
                problems.push(format!("runtime {secs:.1}s exceeds the {budget:.0}s budget"));
            }
        }
        if problems.is_empty() {
            println!("criterion {number} ({name}): PASS ({secs:.1}s)");
        } else {
            println!("criterion {number} ({name}): FAIL ({secs:.1}s)");
            for p in &problems {
                println!("    {p}");
            }
            self.failures.push(format!("criterion {number} ({name}): {}", problems.join("; ")));
        }
    }
}

/// The built-in 12-term coefficient sets, duplicated literally so the gate
/// does not depend on the presets module being right.
const I1_COEFFS: [f64; 12] = [
    0.088395, 1.8365, 0.53823, 14.718, 6.3874, 0.92338, 46.406, 26.178, -7.8413, 52.665,
    39.219, -1.3364,
];
const I2_COEFFS: [f64; 12] = [
    6.1107, 20.436, -9.8384, -0.09868, 47.629, -12.142, -1.0858, -0.08044, 52.16, 13.944,
    -1.4756, 0.90893,
];
/// Monomial exponents (a, b, c) for alpha^a (beta^2)^b d^c, in model order.
const I1_MONOMIALS: [(u32, u32, u32); 12] = [
    (0, 0, 0), (1, 0, 0), (0, 1, 0), (2, 0, 0), (1, 1, 0), (0, 2, 0),
    (3, 0, 0), (2, 1, 0), (1, 2, 0), (4, 0, 0), (3, 1, 0), (2, 2, 0),
];
const I2_MONOMIALS: [(u32, u32, u32); 12] = [
    (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (2, 0, 0), (1, 1, 0),
    (1, 0, 1), (0, 1, 1), (3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 1, 1),
];

fn monomial_sum(coeffs: &[f64], monomials: &[(u32, u32, u32)], alpha: f64, beta: f64, d: f64) -> f64 {
    coeffs
        .iter()
        .zip(monomials)
        .map(|(&b, &(i, j, k))| {
            b * alpha.powi(i as i32) * (beta * beta).powi(j as i32) * d.powi(k as i32)
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Criterion 1: basis combinatorics

fn term_counts() {
    let i1_rows: [(u32, u32, usize); 8] = [
        (8, 6, 30), (6, 8, 25), (6, 6, 22), (4, 6, 14),
        (4, 4, 12), (2, 6, 9), (2, 4, 6), (2, 2, 5),
    ];
    for (p, beta_max, want) in i1_rows {
        let terms = enumerate_terms(ModelFamily::I1, &OrderSpec { p, beta_max, r: 0 })
            .expect("valid orders");
        assert_eq!(terms.len(), want, "I1 orders ({p}, {beta_max}) must give {want} terms");
    }

    let i2_rows: [(u32, u32, u32, usize); 8] = [
        (8, 8, 2, 90), (7, 6, 2, 66), (6, 4, 4, 60), (5, 6, 3, 48),
        (6, 6, 1, 40), (5, 2, 1, 20), (3, 2, 1, 12), (1, 2, 1, 4),
    ];
    for (p, beta_max, r, want) in i2_rows {
        let terms = enumerate_terms(ModelFamily::I2, &OrderSpec { p, beta_max, r })
            .expect("valid orders");
        assert_eq!(
            terms.len(),
            want,
            "I2 orders ({p}, {beta_max}, {r}) must give {want} terms"
        );
    }

    // The two 12-term bases, monomial by monomial in model order.
    let i1 = enumerate_terms(ModelFamily::I1, &OrderSpec { p: 4, beta_max: 4, r: 0 }).unwrap();
    let got: Vec<(u32, u32, u32)> = i1.iter().map(|t| (t.a, t.b, t.c)).collect();
    assert_eq!(got, I1_MONOMIALS.to_vec(), "I1 12-term basis");

    let i2 = enumerate_terms(ModelFamily::I2, &OrderSpec { p: 3, beta_max: 2, r: 1 }).unwrap();
    let got: Vec<(u32, u32, u32)> = i2.iter().map(|t| (t.a, t.b, t.c)).collect();
    assert_eq!(got, I2_MONOMIALS.to_vec(), "I2 12-term basis");
}

// ---------------------------------------------------------------------------
// Criterion 2: solver oracles

/// Closed-form least squares through the normal equations; Gaussian designs
/// are well-conditioned, so the squared condition number is harmless here.
fn closed_form_ls(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xt = x.transpose();
    (&xt * x)
        .cholesky()
        .expect("normal equations are SPD")
        .solve(&(xt * y))
}

fn poisson_loglik(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let eta = x * b;
    (0..y.len()).map(|i| y[i] * eta[i] - eta[i].exp()).sum()
}

/// Inverse-link parameterization: eta = 1/mu must stay positive.
fn gamma_loglik(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let eta = x * b;
    let mut ll = 0.0;
    for i in 0..y.len() {
        if eta[i] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += -y[i] * eta[i] + eta[i].ln();
    }
    ll
}

fn solver_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
    let std_normal: Normal<f64> = Normal::new(0.0, 1.0).unwrap();

    // Normal family: IRLS must agree with closed-form least squares.
    for instance in 0..100 {
        let m = rng.random_range(1..=30usize);
        let n = rng.random_range(m + 10..=200usize);
        let x: DMatrix<f64> = DMatrix::from_fn(n, m, |_, j| {
            if j == 0 { 1.0 } else { std_normal.sample(&mut rng) }
        });
        let b_true: DVector<f64> = DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0));
        let y = &x * &b_true
            + DVector::from_fn(n, |_, _| 0.5 * std_normal.sample(&mut rng));

        let fit = irls_fit(&x, &y, ErrorFamily::Normal, &IrlsOptions::default())
            .unwrap_or_else(|e| panic!("normal instance {instance}: {e}"));
        let oracle = closed_form_ls(&x, &y);
        let rel = (&fit.coefficients - &oracle).norm() / oracle.norm().max(1e-300);
        assert!(
            rel <= 1e-8,
            "normal instance {instance} (n={n}, m={m}): relative gap {rel:.3e}"
        );
    }

    // Poisson and Gamma: canonical score equations plus a brute-force
    // likelihood search that must not beat IRLS by more than 1e-6.
    for instance in 0..20 {
        let family = if instance % 2 == 0 { ErrorFamily::Poisson } else { ErrorFamily::Gamma };
        let m = rng.random_range(1..=4usize);
        let n = rng.random_range((3 * m).max(8)..=30usize);
        let x: DMatrix<f64> = DMatrix::from_fn(n, m, |_, j| {
            if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) }
        });
        let b_true: DVector<f64> = DVector::from_fn(m, |j, _| {
            if j == 0 {
                match family {
                    ErrorFamily::Poisson => rng.random_range(0.5..1.5),
                    _ => rng.random_range(1.0..2.0),
                }
            } else {
                rng.random_range(-0.3..0.3)
            }
        });
        let eta = &x * &b_true;
        let y = DVector::from_fn(n, |i, _| match family {
            ErrorFamily::Poisson => {
                let draw: f64 = PoissonDist::new(eta[i].exp()).unwrap().sample(&mut rng);
                draw.max(1.0)
            }
            ErrorFamily::Gamma => {
                let mu = 1.0 / eta[i];
                let draw: f64 = GammaDist::new(5.0, mu / 5.0).unwrap().sample(&mut rng);
                draw.max(1e-6)
            }
            ErrorFamily::Normal => unreachable!(),
        });

        let fit = irls_fit(&x, &y, family, &IrlsOptions::default())
            .unwrap_or_else(|e| panic!("{family} instance {instance}: {e}"));
        assert!(fit.converged, "{family} instance {instance} did not converge");
        let b_hat = &fit.coefficients;

        // Canonical-link score: X^T (y - mu) = 0 at the optimum.
        let eta_hat = &x * b_hat;
        let mu_hat = DVector::from_fn(n, |i, _| match family {
            ErrorFamily::Poisson => eta_hat[i].exp(),
            ErrorFamily::Gamma => 1.0 / eta_hat[i],
            ErrorFamily::Normal => unreachable!(),
        });
        let score = x.transpose() * (&y - &mu_hat);
        let worst = score.amax();
        assert!(
            worst <= 1e-6 * y.norm(),
            "{family} instance {instance}: score residual {worst:.3e} vs bound {:.3e}",
            1e-6 * y.norm()
        );

        // Brute force: random and coordinate perturbations around the
        // solution, plus fresh draws from the generation box.
        let loglik = |b: &DVector<f64>| match family {
            ErrorFamily::Poisson => poisson_loglik(&x, &y, b),
            ErrorFamily::Gamma => gamma_loglik(&x, &y, b),
            ErrorFamily::Normal => unreachable!(),
        };
        let ll_hat = loglik(b_hat);
        assert!(ll_hat.is_finite());
        let mut best = f64::NEG_INFINITY;
        for scale in [1e-5, 1e-4, 1e-3, 1e-2, 1e-1] {
            for _ in 0..120 {
                let cand = DVector::from_fn(m, |j, _| {
                    b_hat[j] + scale * (b_hat[j].abs() + 0.1) * std_normal.sample(&mut rng)
                });
                best = best.max(loglik(&cand));
            }
        }
        for _ in 0..200 {
            let cand = DVector::from_fn(m, |j, _| {
                if j == 0 { rng.random_range(-1.0..3.0) } else { rng.random_range(-1.0..1.0) }
            });
            best = best.max(loglik(&cand));
        }
        for j in 0..m {
            for step in [-1e-3, -1e-5, 1e-5, 1e-3] {
                let mut cand = b_hat.clone();
                cand[j] += step * (b_hat[j].abs() + 0.1);
                best = best.max(loglik(&cand));
            }
        }
        assert!(
            ll_hat >= best - 1e-6,
            "{family} instance {instance}: search found {best:.9}, solver {ll_hat:.9}"
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: coefficient roundtrip

fn coefficient_roundtrip() {
    let lamp = LampPose::default();
    let grid = measurement_grid();
    let sph = to_spherical(&REFERENCE_POINT, &lamp).unwrap();
    let (alpha, beta, d) = (sph.alpha, sph.beta, sph.d);

    // I2/Poisson: log-link synthesis renormalized to gain 1 at the reference
    // shifts only the intercept, by the log of the reference gain.
    {
        let eta_ref = monomial_sum(&I2_COEFFS, &I2_MONOMIALS, alpha, beta, d);
        let gain_ref = eta_ref.exp() / (d * d);
        let mut expected = I2_COEFFS.to_vec();
        expected[0] -= gain_ref.ln();

        let ds = dataset::synthesize(
            &presets::i2_reference(),
            &grid,
            lamp,
            REFERENCE_POINT,
            0.0,
            0,
        )
        .unwrap();
        let fit = glm::fit(
            ds.records(),
            &lamp,
            ModelFamily::I2,
            &OrderSpec { p: 3, beta_max: 2, r: 1 },
            ErrorFamily::Poisson,
        )
        .unwrap();
        assert_eq!(fit.coefficients.len(), 12);
        for (k, (&got, &want)) in fit.coefficients.iter().zip(&expected).enumerate() {
            let rel = (got - want).abs() / want.abs();
            assert!(rel <= 1e-6, "I2 coefficient {k}: got {got}, want {want} (rel {rel:.3e})");
        }
    }

    // I1/Gamma: inverse-link renormalization scales every coefficient by the
    // reference gain.
    {
        let f_ref = monomial_sum(&I1_COEFFS, &I1_MONOMIALS, alpha, beta, d);
        let gain_ref = 1.0 / (f_ref * d * d);
        let expected: Vec<f64> = I1_COEFFS.iter().map(|b| b * gain_ref).collect();

        let ds = dataset::synthesize(
            &presets::i1_reference(),
            &grid,
            lamp,
            REFERENCE_POINT,
            0.0,
            0,
        )
        .unwrap();
        let fit = glm::fit(
            ds.records(),
            &lamp,
            ModelFamily::I1,
            &OrderSpec { p: 4, beta_max: 4, r: 0 },
            ErrorFamily::Gamma,
        )
        .unwrap();
        assert_eq!(fit.coefficients.len(), 12);
        for (k, (&got, &want)) in fit.coefficients.iter().zip(&expected).enumerate() {
            let rel = (got - want).abs() / want.abs();
            assert!(rel <= 1e-6, "I1 coefficient {k}: got {got}, want {want} (rel {rel:.3e})");
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: baseline ordering

fn lambertian_is_worse_than_12_term_fits() {
    let lamp = LampPose::default();
    let grid = measurement_grid();
    let generator = presets::i2_reference();
    let mut wins = 0;
    for seed in 0..10u64 {
        let ds = dataset::synthesize(&generator, &grid, lamp, REFERENCE_POINT, 5.0, seed).unwrap();
        let records = ds.records();
        let actual: Vec<f64> = records.iter().map(|r| r.delta_h).collect();

        let fit_i2 = glm::fit(
            records,
            &lamp,
            ModelFamily::I2,
            &OrderSpec { p: 3, beta_max: 2, r: 1 },
            ErrorFamily::Poisson,
        )
        .unwrap();
        let fit_i1 = glm::fit(
            records,
            &lamp,
            ModelFamily::I1,
            &OrderSpec { p: 4, beta_max: 4, r: 0 },
            ErrorFamily::Gamma,
        )
        .unwrap();
        let lam = models::lambertian_fit(records, &lamp, (1.0, 100.0)).unwrap();
        let lam_rmse = models::rmse(
            &models::predict_all(&lam, records, &lamp).unwrap(),
            &actual,
        )
        .unwrap();

        let rmse_i2 = fit_i2.diagnostics.as_ref().unwrap().rmse;
        let rmse_i1 = fit_i1.diagnostics.as_ref().unwrap().rmse;
        if lam_rmse > rmse_i2 && lam_rmse > rmse_i1 {
            wins += 1;
        }
    }
    assert!(wins >= 9, "monomial fits beat the one-lobe baseline in only {wins}/10 seeds");
}

// ---------------------------------------------------------------------------
// Criterion 5: pipeline gain recovery

fn pipeline_gain_recovery() {
    let tx = signal::synthesize_tx(
        1.0,
        DEFAULT_PULSE_DURATION,
        10,
        DEFAULT_SAMPLE_RATE,
        &SymbolSequence::default(),
    )
    .unwrap();
    let lp = Some(DEFAULT_LOWPASS_CUTOFF);
    let hp = Some(DEFAULT_HIGHPASS_CUTOFF);

    let reference = signal::bin(
        &signal::simulate_rx(&tx, 1.0, lp, hp, 0.0, 0).unwrap(),
        DEFAULT_F_MAX,
    )
    .unwrap();
    let bin_len = (DEFAULT_SAMPLE_RATE / reference.sample_rate).round();
    assert_eq!(bin_len, 250.0, "250 MHz / 500 kHz binning is 250 samples per bin");
    let ref_spectrum = signal::spectrum(&reference).unwrap();

    for gain in [1.0, 0.1778, 0.01] {
        // Per-sample noise sized for 20 dB SNR after binning.
        let clean = signal::bin(
            &signal::simulate_rx(&tx, gain, lp, hp, 0.0, 0).unwrap(),
            DEFAULT_F_MAX,
        )
        .unwrap();
        let power =
            clean.samples.iter().map(|v| v * v).sum::<f64>() / clean.samples.len() as f64;
        let sigma = (power / 100.0).sqrt() * bin_len.sqrt();

        for seed in 0..20 {
            let rx = signal::simulate_rx(&tx, gain, lp, hp, sigma, seed).unwrap();
            let binned = signal::bin(&rx, DEFAULT_F_MAX).unwrap();
            let est = signal::delta_h(
                &signal::spectrum(&binned).unwrap(),
                &ref_spectrum,
                DEFAULT_BAND_THRESHOLD,
            )
            .unwrap();
            let rel = (est / gain - 1.0).abs();
            assert!(
                rel < 0.01,
                "gain {gain} seed {seed}: estimate {est} off by {:.3}%",
                rel * 100.0
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 6: error-probability calibration

/// erf by Maclaurin series, sound for small arguments.
fn erf_series(t: f64) -> f64 {
    let mut term = t;
    let mut sum = t;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= -t * t / k as f64;
        let add = term / (2 * k + 1) as f64;
        sum += add;
        if add.abs() < 1e-20 * sum.abs().max(1e-300) || k > 200 {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// erfc by Lentz continued fraction, sound for large arguments.
fn erfc_continued_fraction(t: f64) -> f64 {
    // erfc(t) = exp(-t^2)/sqrt(pi) * 1/(t + (1/2)/(t + 1/(t + (3/2)/(t + ...))))
    let tiny = 1e-300;
    let mut f = tiny;
    let mut c = f;
    let mut d = 0.0;
    for k in 0..300 {
        let (a, b) = if k == 0 { (1.0, t) } else { (k as f64 / 2.0, t) };
        d = b + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-t * t).exp() / std::f64::consts::PI.sqrt() * f
}

fn q_oracle(x: f64) -> f64 {
    let t = x / std::f64::consts::SQRT_2;
    if t < 2.0 {
        0.5 * (1.0 - erf_series(t))
    } else {
        0.5 * erfc_continued_fraction(t)
    }
}

fn error_probability_calibration() {
    // Tail probability against the oracle over the calibrated range.
    let mut k = 0;
    while k <= 800 {
        let x = k as f64 * 0.01;
        let gap = (q_function(x) - q_oracle(x)).abs();
        assert!(gap <= 1e-12, "Q({x}): gap {gap:.3e}");
        k += 1;
    }

    // The SNR whose error probability is 1e-3, found on the oracle alone,
    // rounds to the published 9.5495 and feeds back through ber() within
    // 1e-5 relative.
    let (mut lo, mut hi) = (9.0f64, 10.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if q_oracle(mid.sqrt()) > 1e-3 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let snr_star = 0.5 * (lo + hi);
    assert_eq!(
        (snr_star * 1e4).round() / 1e4,
        9.5495,
        "threshold SNR {snr_star} must round to 9.5495"
    );
    let p = ber(snr_star).unwrap();
    let rel = (p - 1e-3).abs() / 1e-3;
    assert!(rel <= 1e-5, "ber({snr_star}) = {p}, off 1e-3 by {rel:.3e} relative");
}

// ---------------------------------------------------------------------------
// Criterion 7: receiver geometry

fn receiver_geometry() {
    for &height in &[0.75, 1.0, 1.35] {
        // Reflection exclusion holds through 35 m, checked on a fine scan.
        let mut d = 0.5;
        while d <= 35.0 {
            let check = fov_check(&FovParams::new(height, d)).unwrap();
            assert!(
                check.reflection_excluded,
                "height {height} m, distance {d} m: reflection inside the field of view"
            );
            d += 0.1;
        }
        let crossover = fov_crossover(&FovParams::new(height, 1.0)).unwrap();
        assert!(
            (50.0..=70.0).contains(&crossover),
            "height {height} m: crossover {crossover} m outside [50, 70]"
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 8: sweep budget and determinism

fn sweep_budget_and_determinism() {
    let lamp = LampPose::default();
    let generator = LambertianModel { i0: 1.0, nu: 22.0 };
    let ds = dataset::synthesize(&generator, &measurement_grid(), lamp, REFERENCE_POINT, 5.0, 17)
        .unwrap();

    let mut scored_total = 0usize;
    for family in [ModelFamily::I1, ModelFamily::I2, ModelFamily::I3] {
        for error_family in [ErrorFamily::Normal, ErrorFamily::Poisson, ErrorFamily::Gamma] {
            let result = glm::sweep(ds.records(), &lamp, family, error_family, 5, 7).unwrap();
            let want = if family == ModelFamily::I1 { 36 } else { 324 };
            assert_eq!(result.rows.len(), want, "{family}/{error_family} row count");
            scored_total += result
                .rows
                .iter()
                .filter(|r| r.cv_percent_error.is_some())
                .count();
        }
    }
    assert!(scored_total > 0, "no configuration scored at all");

    // Same seed, same rows, bit for bit.
    let a = glm::sweep(ds.records(), &lamp, ModelFamily::I2, ErrorFamily::Poisson, 5, 7).unwrap();
    let b = glm::sweep(ds.records(), &lamp, ModelFamily::I2, ErrorFamily::Poisson, 5, 7).unwrap();
    assert_eq!(a.rows, b.rows, "sweep must be deterministic for a fixed seed");
    assert_eq!(a.frontier, b.frontier);
}

// ---------------------------------------------------------------------------
// Criterion 9: order overfitting

fn order_overfitting() {
    let lamp = LampPose::default();
    let generator = presets::i2_reference();

    // The three-height measurement lattice cannot identify the 185-term
    // maximal basis (its design collapses numerically), so each seed draws
    // fresh positions across the same region instead.
    let noise: Normal<f64> = Normal::new(0.0, 0.05).unwrap();
    let mut wins = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records: Vec<MeasurementRecord> = (0..1000)
            .map(|_| {
                let p = GridPoint::new(
                    rng.random_range(3.0..30.0),
                    rng.random_range(0.75..5.75),
                    rng.random_range(0.75..1.35),
                );
                let predicted = generator.eval(&p, &lamp).unwrap();
                let gain = (predicted * (1.0 + noise.sample(&mut rng))).max(predicted * 1e-6);
                MeasurementRecord::new(p, gain)
            })
            .collect();

        let small = glm::kfold_cv(
            &records,
            &lamp,
            ModelFamily::I2,
            &OrderSpec { p: 3, beta_max: 2, r: 1 },
            ErrorFamily::Poisson,
            5,
            seed,
        )
        .unwrap();
        let big = glm::kfold_cv(
            &records,
            &lamp,
            ModelFamily::I2,
            &OrderSpec { p: 9, beta_max: 8, r: 9 },
            ErrorFamily::Poisson,
            5,
            seed,
        )
        .unwrap();
        if big.percent_error > small.percent_error {
            wins += 1;
        }
    }
    assert!(wins >= 18, "maximal orders out-validated the generating orders in {}/20 seeds", 20 - wins);
}

// ---------------------------------------------------------------------------

#[test]
fn release_gate() {
    let mut gate = Gate::new();
    gate.check(1, "term counts", Some(1.0), term_counts);
    gate.check(2, "solver oracles", Some(30.0), solver_oracles);
    gate.check(3, "coefficient roundtrip", Some(5.0), coefficient_roundtrip);
    gate.check(4, "baseline ordering", Some(30.0), lambertian_is_worse_than_12_term_fits);
    gate.check(5, "pipeline gain recovery", Some(60.0), pipeline_gain_recovery);
    gate.check(6, "error-probability calibration", None, error_probability_calibration);
    gate.check(7, "receiver geometry", Some(1.0), receiver_geometry);
    gate.check(8, "sweep budget and determinism", Some(300.0), sweep_budget_and_determinism);
    gate.check(9, "order overfitting", None, order_overfitting);
    assert!(
        gate.failures.is_empty(),
        "release gate failed:\n{}",
        gate.failures.join("\n")
    );
}
