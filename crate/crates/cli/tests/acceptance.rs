//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with --nocapture to see them).

use std::path::Path;
use std::process::Command;

use sensilogit_core::ca::correspondence_analysis;
use sensilogit_core::design::{generate_bibd, validate_bibd};
use sensilogit_core::inference::{chisq_association, lrt};
use sensilogit_core::math;
use sensilogit_core::mixed::{fit_mixed, marginal_loglik, profile_ci_sigma, MixedFitOptions};
use sensilogit_core::model::{
    category_probs, cumulative_probs, design_row, fit_fixed, gradient_fixed, loglik_fixed,
    Convergence, EncodedData, FitOptions, FitStatus, FittedModel, ModelSpec, OddsStructure,
    ParamVector,
};
use sensilogit_core::predict::population_averaged_probs;
use sensilogit_core::quad::QuadratureRule;
use sensilogit_core::rng::Stream;
use sensilogit_core::simulate::{
    concordance_study, simulate_dataset, true_model, ScenarioSpec, StudyOptions,
};
use sensilogit_core::special::normal_pdf;

fn pass(criterion: usize, what: &str) {
    println!("[criterion {criterion:02}] PASS: {what}");
}

fn sim_encoded(pattern: &str, n: usize, seed: u64) -> EncodedData {
    let ds = simulate_dataset(&ScenarioSpec::new(pattern, n, 1, seed), 0).unwrap();
    EncodedData::encode_default(&ds).unwrap()
}

fn random_params(spec: &ModelSpec, stream: &mut Stream) -> ParamVector {
    let mut flat = vec![0.0; spec.n_params()];
    // ordered cutpoints with random spread
    let mut cut = -2.5 + stream.uniform();
    for k in 0..spec.n_cuts() {
        flat[k] = cut;
        cut += 0.5 + 1.5 * stream.uniform();
    }
    for v in flat.iter_mut().skip(spec.n_cuts()) {
        *v = 3.0 * (stream.uniform() - 0.5);
    }
    if spec.random_intercept {
        let last = flat.len() - 1;
        flat[last] = 0.5 * (stream.uniform() - 0.5);
    }
    spec.unpack(&flat).unwrap()
}

// --- 1: analytic gradient vs central finite differences ---------------

#[test]
fn criterion_01_gradient_correctness() {
    let start = std::time::Instant::now();
    let mut worst = 0.0f64;
    for pair in 0..50u64 {
        let spec = ModelSpec {
            j: 5,
            n_formulations: 3,
            n_attributes: 2,
            include_formulation: true,
            include_attribute: true,
            formulation_odds: if pair % 2 == 0 {
                OddsStructure::Proportional
            } else {
                OddsStructure::NonProportional
            },
            attribute_odds: OddsStructure::Proportional,
            random_intercept: false,
        };
        let data = sim_encoded("F1<F2<F3", 10, 1000 + pair);
        let mut stream = Stream::derive(77, &[pair]);
        let params = random_params(&spec, &mut stream);
        let flat = spec.pack(&params);
        let analytic = gradient_fixed(&spec, &params, &data).unwrap();
        for i in 0..flat.len() {
            let h = 1e-6;
            let mut x = flat.clone();
            x[i] += h;
            let fp = loglik_fixed(&spec, &spec.unpack(&x).unwrap(), &data).unwrap();
            x[i] = flat[i] - h;
            let fm = loglik_fixed(&spec, &spec.unpack(&x).unwrap(), &data).unwrap();
            let numeric = (fp - fm) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-6, "max relative gradient error {worst}");
    assert!(start.elapsed().as_secs() < 10, "gradient check too slow");
    pass(1, &format!("analytic gradient, max relative error {worst:.2e} over 50 pairs"));
}

// --- 2: adaptive quadrature vs trapezoid oracle -----------------------

#[test]
fn criterion_02_quadrature_correctness() {
    let rule = QuadratureRule::gauss_hermite(15, true);
    let mut worst = 0.0f64;
    for case in 0..20u64 {
        let scenario = ScenarioSpec::new("F2<F1<F3", 1, 1, 500 + case);
        let ds = simulate_dataset(&scenario, 0).unwrap();
        let data = EncodedData::encode_default(&ds).unwrap();
        let (spec, _) = true_model(&scenario).unwrap();
        let mut stream = Stream::derive(91, &[case]);
        let mut params = random_params(&spec, &mut stream);
        let sigma = 0.3 + 1.7 * stream.uniform();
        params.log_sigma_u = Some(math::ln(sigma));

        let got = marginal_loglik(&spec, &params, &data, &rule).unwrap();

        // 1e5-point trapezoid over +-10 sigma
        let n_grid = 100_000usize;
        let lo = -10.0 * sigma;
        let h = -2.0 * lo / n_grid as f64;
        let integrand = |u: f64| -> f64 {
            let mut cond = 0.0;
            for (i, row) in data.design.rows.iter().enumerate() {
                let cp = category_probs(&spec, &params, row, u).unwrap();
                cond += cp.probs[data.responses[i] - 1].ln();
            }
            cond.exp() * normal_pdf(u, 0.0, sigma)
        };
        let mut s = 0.5 * (integrand(lo) + integrand(-lo));
        for k in 1..n_grid {
            s += integrand(lo + k as f64 * h);
        }
        worst = worst.max((got - (s * h).ln()).abs());
    }
    assert!(worst < 1e-8, "max quadrature error {worst}");

    // sigma -> 0 limit collapses to the fixed likelihood
    let scenario = ScenarioSpec::new("F1=F2=F3", 8, 1, 3);
    let ds = simulate_dataset(&scenario, 0).unwrap();
    let data = EncodedData::encode_default(&ds).unwrap();
    let (spec, mut params) = true_model(&scenario).unwrap();
    params.log_sigma_u = Some(-20.0);
    let mixed = marginal_loglik(&spec, &params, &data, &rule).unwrap();
    let fspec = ModelSpec {
        random_intercept: false,
        ..spec
    };
    let fparams = ParamVector {
        log_sigma_u: None,
        ..params
    };
    let fixed = loglik_fixed(&fspec, &fparams, &data).unwrap();
    assert!((mixed - fixed).abs() < 1e-6, "sigma->0 gap {}", mixed - fixed);
    pass(2, &format!("adaptive quadrature vs trapezoid oracle, max error {worst:.2e}"));
}

// --- 3: nesting, LRT sign and additivity, chi-square oracle -----------

fn chi2_sf_oracle(x: f64, df: f64) -> f64 {
    fn density(t: f64, df: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let a = df / 2.0;
        (a * (0.5f64).ln() + (a - 1.0) * t.ln() - t / 2.0 - libm_lgamma(a)).exp()
    }
    // Lanczos-free lgamma via Stirling series is overkill here; use the
    // product form for half-integer df, which covers every test case
    fn libm_lgamma(a: f64) -> f64 {
        // a is df/2 with df integer: either an integer or half-integer
        let mut acc = 0.0f64;
        let mut v = a;
        while v > 1.0 + 1e-9 {
            v -= 1.0;
            acc += v.ln();
        }
        // ln Gamma(1) = 0, ln Gamma(1/2) = ln sqrt(pi)
        if (v - 1.0).abs() < 1e-12 {
            acc
        } else {
            acc + 0.5 * std::f64::consts::PI.ln()
        }
    }
    let n = 400_000usize;
    let hi = x + 400.0;
    let h = (hi - x) / n as f64;
    let mut s = density(x, df) + density(hi, df);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * density(x + i as f64 * h, df);
    }
    s * h / 3.0
}

#[test]
fn criterion_03_nesting_and_lrt() {
    let data = sim_encoded("F3<F1<F2", 40, 8);
    let opts = FitOptions::default();
    let base = ModelSpec {
        j: 5,
        n_formulations: 3,
        n_attributes: 2,
        include_formulation: false,
        include_attribute: false,
        formulation_odds: OddsStructure::Proportional,
        attribute_odds: OddsStructure::Proportional,
        random_intercept: false,
    };
    let spec_f = ModelSpec {
        include_formulation: true,
        ..base
    };
    let spec_fa = ModelSpec {
        include_attribute: true,
        ..spec_f
    };
    let fit0 = fit_fixed(&base, &data, &opts).unwrap();
    let fit1 = fit_fixed(&spec_f, &data, &opts).unwrap();
    let fit2 = fit_fixed(&spec_fa, &data, &opts).unwrap();
    assert!(fit0.converged() && fit1.converged() && fit2.converged());

    let t01 = lrt(&fit0, &fit1).unwrap();
    let t12 = lrt(&fit1, &fit2).unwrap();
    let t02 = lrt(&fit0, &fit2).unwrap();
    assert!(t01.statistic >= 0.0 && t12.statistic >= 0.0 && t02.statistic >= 0.0);
    let gap = (t01.statistic + t12.statistic - t02.statistic).abs();
    assert!(gap < 1e-6, "additivity gap {gap}");
    assert_eq!(t01.df + t12.df, t02.df);

    let mut worst = 0.0f64;
    for &(x, df) in &[
        (t01.statistic, t01.df as f64),
        (t12.statistic, t12.df as f64),
        (t02.statistic, t02.df as f64),
        (3.841458820694124, 1.0),
        (10.0, 4.0),
        (25.0, 7.0),
    ] {
        let oracle = chi2_sf_oracle(x, df);
        let got = sensilogit_core::special::chi2_sf(x, df);
        worst = worst.max((got - oracle).abs());
    }
    assert!(worst < 1e-10, "chi-square tail error {worst}");
    pass(3, &format!(
        "LRT non-negative, additive (gap {gap:.2e}); chi-square tails within {worst:.2e}"
    ));
}

// --- published coefficients -------------------------------------------

// cut rows are indexed 0..4 for the four internal cutpoints; beverage
// formulations 2..13 and attributes body, flavour, sweetness, overall
// impression (aroma is the reference level)
const PUB_ALPHA: [f64; 4] = [-1.92, 0.04, 2.02, 4.29];
const PUB_BETA: [[f64; 4]; 12] = [
    [-1.36, -0.84, -1.08, -0.97],
    [-0.61, -0.75, -1.05, -0.94],
    [-1.22, -1.84, -1.94, -1.66],
    [-0.50, -0.92, -0.99, -0.87],
    [-1.78, -1.96, -2.25, -2.44],
    [-0.21, 0.03, 0.24, -0.61],
    [-1.75, -1.58, -1.84, -1.23],
    [-1.60, -1.45, -1.65, -1.27],
    [-2.28, -1.16, -1.26, -0.87],
    [-1.93, -1.65, -1.75, -1.17],
    [-3.28, -1.80, -1.88, -0.91],
    [-2.31, -2.00, -2.09, -1.91],
];
const PUB_DELTA: [[f64; 4]; 4] = [
    [-0.05, -0.26, 0.81, 0.35],
    [-0.12, -0.41, -0.38, -0.72],
    [0.15, -0.42, -0.52, -0.84],
    [0.81, 0.23, -0.03, -0.19],
];

fn published_model(sigma: f64) -> FittedModel {
    let spec = ModelSpec {
        j: 5,
        n_formulations: 13,
        n_attributes: 5,
        include_formulation: true,
        include_attribute: true,
        formulation_odds: OddsStructure::NonProportional,
        attribute_odds: OddsStructure::NonProportional,
        random_intercept: true,
    };
    // rows per cut, columns per non-reference level
    let beta: Vec<Vec<f64>> = (0..4)
        .map(|cut| PUB_BETA.iter().map(|t| t[cut]).collect())
        .collect();
    let delta: Vec<Vec<f64>> = (0..4)
        .map(|cut| PUB_DELTA.iter().map(|l| l[cut]).collect())
        .collect();
    let params = ParamVector {
        alpha: PUB_ALPHA.to_vec(),
        beta,
        delta,
        log_sigma_u: Some(math::ln(sigma)),
    };
    FittedModel {
        spec,
        params,
        loglik: f64::NAN,
        vcov: None,
        n_obs: 0,
        convergence: Convergence {
            iterations: 0,
            grad_norm: 0.0,
            status: FitStatus::Converged,
        },
        warnings: Vec::new(),
        data_fingerprint: 0,
        formulation_ref: 1,
        attribute_ref: 5,
    }
}

// --- 4: worked-example plug-in ----------------------------------------

#[test]
fn criterion_04_worked_example() {
    let fit = published_model(1.89);
    // P(Y <= 3 | F4, body, u = 0): second internal cutpoint
    let row = design_row(&fit.spec, 1, 5, 4, 1);
    let theta = cumulative_probs(&fit.spec, &fit.params, &row, 0.0).unwrap();
    let expected = 1.0 / (1.0 + (-(0.04 - 1.84 - 0.26) as f64).exp());
    assert!((theta[1] - expected).abs() < 1e-12);
    assert!(
        (theta[1] - 0.1131).abs() <= 0.0005,
        "P(Y<=3|F4,body) = {}",
        theta[1]
    );
    pass(4, &format!("plug-in probability {:.4} within 0.1131 +/- 0.0005", theta[1]));
}

// --- 5: published prediction-table ranks ------------------------------

const TABLE3_P_GE4: [[f64; 13]; 5] = [
    // body, flavour, sweetness, overall impression, aroma
    [0.11, 0.28, 0.27, 0.48, 0.26, 0.56, 0.09, 0.46, 0.41, 0.32, 0.43, 0.46, 0.52],
    [0.31, 0.57, 0.55, 0.75, 0.54, 0.80, 0.26, 0.73, 0.69, 0.61, 0.71, 0.74, 0.78],
    [0.33, 0.60, 0.59, 0.78, 0.58, 0.83, 0.29, 0.76, 0.73, 0.64, 0.75, 0.77, 0.80],
    [0.23, 0.48, 0.47, 0.68, 0.45, 0.74, 0.19, 0.66, 0.62, 0.52, 0.64, 0.67, 0.72],
    [0.23, 0.47, 0.46, 0.67, 0.44, 0.74, 0.19, 0.65, 0.61, 0.51, 0.63, 0.67, 0.71],
];

fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma).powi(2);
        vb += (rb[i] - mb).powi(2);
    }
    num / (va * vb).sqrt()
}

#[test]
fn criterion_05_prediction_table_ranks() {
    let fit = published_model(1.89);
    let mut scores = [[0.0f64; 13]; 5];
    for a in 1..=5usize {
        for t in 1..=13usize {
            let cp = population_averaged_probs(&fit, t, a, 41).unwrap();
            scores[a - 1][t - 1] = cp.probs[3] + cp.probs[4];
        }
    }
    let mut min_rho = 1.0f64;
    for a in 0..5 {
        let rho = spearman(&scores[a], &TABLE3_P_GE4[a]);
        min_rho = min_rho.min(rho);
        assert!(rho >= 0.90, "attribute {a}: Spearman {rho}");
    }
    // attribute-mean ranking
    let mean: Vec<f64> = (0..13)
        .map(|t| (0..5).map(|a| scores[a][t]).sum::<f64>() / 5.0)
        .collect();
    let mut order: Vec<usize> = (0..13).collect();
    order.sort_by(|&a, &b| mean[b].partial_cmp(&mean[a]).unwrap());
    let mut top3: Vec<usize> = order[..3].iter().map(|&t| t + 1).collect();
    top3.sort_unstable();
    assert_eq!(top3, vec![4, 6, 13], "top-3 set");
    assert_eq!(order[12] + 1, 7, "least accepted");
    pass(5, &format!(
        "Table ranks reproduced, min Spearman {min_rho:.4}, top-3 {{F4, F6, F13}}, worst F7"
    ));
}

// --- 6: block design validation and generation ------------------------

#[test]
fn criterion_06_bibd() {
    let start = std::time::Instant::now();
    let params = validate_bibd(13, 130, 4, 40).unwrap();
    assert_eq!(params.lambda, 10);
    let layout = generate_bibd(7, 3, 1, 50_000_000).unwrap();
    layout.verify().unwrap();
    assert_eq!(layout.params.b, 7);
    assert!(start.elapsed().as_secs() < 5);
    pass(6, "BIBD (13,130,4,40) admits lambda=10; generated (7,3) verified");
}

// --- 7: simulation concordance study ----------------------------------

#[test]
fn criterion_07_concordance_study() {
    let start = std::time::Instant::now();
    let scenarios = [
        ScenarioSpec::new("F1<F3<F2", 90, 200, 42),
        ScenarioSpec::new("F1=F2=F3", 90, 200, 42),
    ];
    let report = concordance_study(&scenarios, &StudyOptions::default()).unwrap();
    let strict = &report.scenarios[0];
    let ties = &report.scenarios[1];
    assert!(
        strict.unified.rate() >= 0.95,
        "strict-order unified rate {}",
        strict.unified.rate()
    );
    assert!(
        ties.unified.rate() >= 0.70 && ties.unified.rate() <= 0.95,
        "all-equal unified rate {}",
        ties.unified.rate()
    );
    for s in &report.scenarios {
        for (name, attr) in [("A", &s.attribute_a), ("B", &s.attribute_b)] {
            let diff = (s.unified.rate() - attr.rate()).abs();
            assert!(
                diff <= 0.15,
                "{}: unified vs attribute {name} differ by {diff}",
                s.pattern
            );
        }
    }
    let mins = start.elapsed().as_secs() / 60;
    assert!(mins < 20, "study took {mins} minutes");
    pass(7, &format!(
        "concordance: strict {:.3}, all-equal {:.3}, per-attribute within 0.15",
        strict.unified.rate(),
        ties.unified.rate()
    ));
}

// --- 8: parameter recovery --------------------------------------------

#[test]
fn criterion_08_parameter_recovery() {
    let scenario = ScenarioSpec {
        sigma_u: 1.5,
        ..ScenarioSpec::new("F1<F3<F2", 300, 1, 20260826)
    };
    let ds = simulate_dataset(&scenario, 0).unwrap();
    let data = EncodedData::encode_default(&ds).unwrap();
    let (spec, truth) = true_model(&scenario).unwrap();
    let opts = MixedFitOptions {
        quad_order: 11,
        ..MixedFitOptions::default()
    };
    let fit = fit_mixed(&spec, &data, &opts).unwrap();
    assert!(fit.converged());
    let est = fit.flat_estimates();
    let se = fit.standard_errors().unwrap();
    let tru = spec.pack(&truth);
    let names = spec.param_names();
    for i in 0..est.len() {
        assert!(
            (est[i] - tru[i]).abs() <= 3.0 * se[i],
            "{}: estimate {} vs truth {} (se {})",
            names[i],
            est[i],
            tru[i],
            se[i]
        );
    }
    let ci = profile_ci_sigma(&fit, &data, 0.95, &opts).unwrap();
    assert!(
        ci.lower <= 1.5 && 1.5 <= ci.upper,
        "profile CI [{}, {}] misses 1.5",
        ci.lower,
        ci.upper
    );
    pass(8, &format!(
        "all parameters within 3 SE; sigma CI [{:.3}, {:.3}] covers 1.5",
        ci.lower, ci.upper
    ));
}

// --- 9: correspondence-analysis identity ------------------------------

#[test]
fn criterion_09_ca_identity() {
    let mut stream = Stream::derive(314159, &[]);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let t = 2 + (stream.uniform() * 5.0) as usize;
        let j = 2 + (stream.uniform() * 5.0) as usize;
        let table: Vec<Vec<u64>> = (0..t)
            .map(|_| (0..j).map(|_| 1 + (stream.uniform() * 30.0) as u64).collect())
            .collect();
        let n: u64 = table.iter().flatten().sum();
        let ca = correspondence_analysis(&table).unwrap();
        let chi = chisq_association(&table).unwrap();
        worst = worst.max((ca.total_inertia * n as f64 - chi.statistic).abs());
    }
    assert!(worst < 1e-8, "max identity error {worst}");
    let degenerate = vec![vec![5u64, 10, 15], vec![10, 20, 30]];
    let ca = correspondence_analysis(&degenerate).unwrap();
    assert!(ca.total_inertia < 1e-12);
    pass(9, &format!("inertia identity within {worst:.2e}; proportional table inert"));
}

// --- 10: byte-identical artifacts on re-run ---------------------------

fn write_dataset_csv(path: &Path) {
    let ds = simulate_dataset(&ScenarioSpec::new("F2<F1<F3", 25, 1, 99), 0).unwrap();
    let mut csv = String::from("panellist,formulation,attribute,response\n");
    for o in ds.observations() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            ds.panellist_ids()[o.panellist],
            ds.formulation_names()[o.formulation - 1],
            ds.attribute_names()[o.attribute - 1],
            o.response,
        ));
    }
    std::fs::write(path, csv).unwrap();
}

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_sensilogit"))
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "cli failed: {args:?}");
}

fn assert_identical(a: &Path, b: &Path, names: &[&str]) {
    for name in names {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert!(x == y, "{name} differs between identical runs");
    }
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_dataset_csv(&root.join("data.csv"));
    let fit_cfg = root.join("fit.json");
    std::fs::write(
        &fit_cfg,
        format!(
            "{{\"data\": {:?}, \"scale\": 5, \"options\": {{\"quad_order\": 9, \"profile_points\": 3}}}}",
            root.join("data.csv").to_str().unwrap()
        ),
    )
    .unwrap();
    let sim_cfg = root.join("sim.json");
    std::fs::write(
        &sim_cfg,
        "{\"scenarios\": [{\"pattern\": \"F1<F2<F3\", \"n_panellists\": 15, \"replicates\": 3}], \"seed\": 9}",
    )
    .unwrap();

    for out in ["fit1", "fit2"] {
        run_cli(&[
            "fit",
            "--config",
            fit_cfg.to_str().unwrap(),
            "--out",
            root.join(out).to_str().unwrap(),
        ]);
    }
    assert_identical(
        &root.join("fit1"),
        &root.join("fit2"),
        &["fit.json", "tests.json", "predictions.csv", "profile.csv", "summary.txt"],
    );
    for out in ["sim1", "sim2"] {
        run_cli(&[
            "simulate",
            "--config",
            sim_cfg.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            root.join(out).to_str().unwrap(),
        ]);
    }
    assert_identical(
        &root.join("sim1"),
        &root.join("sim2"),
        &["concordance.csv", "concordance.json", "summary.txt"],
    );
    pass(10, "fit and simulate artifacts byte-identical across re-runs");
}
