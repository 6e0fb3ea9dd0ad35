//! Scenario-driven simulation of ordinal responses from a true mixed
//! cumulative-logit model and the concordance study comparing the
//! unified model against per-attribute fits.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetBuilder, DatasetError, HedonicScale, OrdinalDataset};
use crate::math;
use crate::mixed::{fit_mixed, MixedFitOptions};
use crate::model::{
    category_probs, design_row, EncodedData, FittedModel, ModelError, ModelSpec, OddsStructure,
    ParamVector,
};
use crate::rng::Stream;
use crate::special;

/// A true-parameter scenario: an ordering pattern over formulations
/// (worst to best, "<" strict, "=" tie), complete-block design with two
/// attributes and a 5-category scale.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScenarioSpec {
    /// e.g. "F3<F1<F2" or "F1=F2=F3"
    pub pattern: String,
    /// panellists per replicate
    pub n_panellists: usize,
    /// true random-intercept scale
    pub sigma_u: f64,
    /// logit-scale gap between adjacent strict groups
    pub gap: f64,
    /// true cutpoints (J - 1 of them)
    pub alpha: Vec<f64>,
    /// true shift of attribute B relative to A on the logit scale
    pub attribute_shift: f64,
    pub replicates: usize,
    pub master_seed: u64,
}

impl ScenarioSpec {
    /// Default calibration: gap 1.5, sigma_u 1.0, cutpoints
    /// (-2, -0.7, 0.7, 2), attribute shift 0.5. The gap is sized so
    /// that at N = 90 the per-attribute models detect strict orders
    /// almost as reliably as the unified model.
    pub fn new(pattern: &str, n_panellists: usize, replicates: usize, master_seed: u64) -> Self {
        ScenarioSpec {
            pattern: pattern.to_string(),
            n_panellists,
            sigma_u: 1.0,
            gap: 1.5,
            alpha: vec![-2.0, -0.7, 0.7, 2.0],
            attribute_shift: 0.5,
            replicates,
            master_seed,
        }
    }

    pub fn n_formulations(&self) -> usize {
        parse_pattern(&self.pattern).map(|g| g.iter().map(Vec::len).sum()).unwrap_or(0)
    }

    /// The pattern with each tie group sorted by formulation index,
    /// used as the canonical comparison target.
    pub fn canonical_pattern(&self) -> Result<String, SimulateError> {
        Ok(format_groups(&parse_pattern(&self.pattern)?))
    }
}

/// Parse "F3<F1=F2" into groups of formulation indices ordered worst to
/// best. Each formulation F1..Ft must appear exactly once.
pub fn parse_pattern(pattern: &str) -> Result<Vec<Vec<usize>>, SimulateError> {
    let bad = |why: &str| SimulateError::BadPattern {
        pattern: pattern.to_string(),
        reason: String::from(why),
    };
    let mut groups = Vec::new();
    let mut seen = Vec::new();
    for group in pattern.split('<') {
        let mut members = Vec::new();
        for tok in group.split('=') {
            let tok = tok.trim();
            let idx: usize = tok
                .strip_prefix('F')
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| bad("expected tokens like F1, F2, ..."))?;
            if idx == 0 {
                return Err(bad("formulation indices start at 1"));
            }
            if seen.contains(&idx) {
                return Err(bad("formulation referenced twice"));
            }
            seen.push(idx);
            members.push(idx);
        }
        if members.is_empty() {
            return Err(bad("empty group"));
        }
        members.sort_unstable();
        groups.push(members);
    }
    let t = seen.len();
    if (1..=t).any(|f| !seen.contains(&f)) {
        return Err(bad("formulations must be exactly F1..Ft"));
    }
    Ok(groups)
}

fn format_groups(groups: &[Vec<usize>]) -> String {
    let parts: Vec<String> = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|f| format!("F{f}"))
                .collect::<Vec<_>>()
                .join("=")
        })
        .collect();
    parts.join("<")
}

/// The model spec and true parameters implied by a scenario, matching
/// the default encoding (formulation reference F1, attribute reference
/// the last level).
pub fn true_model(scenario: &ScenarioSpec) -> Result<(ModelSpec, ParamVector), SimulateError> {
    let groups = parse_pattern(&scenario.pattern)?;
    let t: usize = groups.iter().map(Vec::len).sum();
    let j = scenario.alpha.len() + 1;
    if j < 2 {
        return Err(SimulateError::BadScenario {
            reason: String::from("need at least one cutpoint"),
        });
    }
    if scenario.sigma_u < 0.0 || scenario.gap < 0.0 {
        return Err(SimulateError::BadScenario {
            reason: String::from("sigma_u and gap must be non-negative"),
        });
    }
    if scenario.alpha.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimulateError::BadScenario {
            reason: String::from("cutpoints must be strictly increasing"),
        });
    }
    let spec = ModelSpec {
        j,
        n_formulations: t,
        n_attributes: 2,
        include_formulation: true,
        include_attribute: true,
        formulation_odds: OddsStructure::Proportional,
        attribute_odds: OddsStructure::Proportional,
        random_intercept: true,
    };

    // Acceptance score of each formulation: group rank times the gap
    // (worst group scores 0). A higher score must lower the cumulative
    // logits, so beta is the negated score recentred on F1.
    let mut score = vec![0.0; t + 1];
    for (rank, group) in groups.iter().enumerate() {
        for &f in group {
            score[f] = rank as f64 * scenario.gap;
        }
    }
    let beta: Vec<f64> = (2..=t).map(|f| score[1] - score[f]).collect();
    // attribute reference is the last level (B); attribute A's column
    // carries the negated B shift
    let delta = vec![scenario.attribute_shift];
    let params = ParamVector {
        alpha: scenario.alpha.clone(),
        beta: vec![beta],
        delta: vec![delta],
        log_sigma_u: Some(if scenario.sigma_u > 0.0 {
            math::ln(scenario.sigma_u)
        } else {
            -690.0
        }),
    };
    Ok((spec, params))
}

/// Generate one complete-block replicate: every panellist rates every
/// (formulation, attribute) cell. Streams are derived from
/// (master_seed, replicate_index, panellist), so replicates and
/// panellists are independent of execution order.
pub fn simulate_dataset(
    scenario: &ScenarioSpec,
    replicate_index: usize,
) -> Result<OrdinalDataset, SimulateError> {
    let (spec, params) = true_model(scenario)?;
    if scenario.n_panellists == 0 {
        return Err(SimulateError::BadScenario {
            reason: String::from("need at least one panellist"),
        });
    }
    let t = spec.n_formulations;
    let scale = HedonicScale::numeric(spec.j);
    let mut builder = DatasetBuilder::new(scale)
        .with_formulation_order((1..=t).map(|f| format!("F{f}")).collect())
        .with_attribute_order(vec![String::from("A"), String::from("B")]);
    for p in 0..scenario.n_panellists {
        let mut stream = Stream::derive(scenario.master_seed, &[replicate_index as u64, p as u64]);
        let u = scenario.sigma_u * stream.standard_normal();
        let pid = format!("P{}", p + 1);
        for f in 1..=t {
            for a in 1..=2usize {
                let row = design_row(&spec, 1, 2, f, a);
                let cp = category_probs(&spec, &params, &row, u)
                    .map_err(SimulateError::Model)?;
                let y = stream.categorical(&cp.probs) + 1;
                let attr = if a == 1 { "A" } else { "B" };
                builder
                    .push(&pid, &format!("F{f}"), attr, y)
                    .map_err(SimulateError::Dataset)?;
            }
        }
    }
    builder.build().map_err(SimulateError::Dataset)
}

/// Ordering string implied by a proportional-odds fit: pairwise Wald
/// tests on formulation slope contrasts decide ties; the point
/// estimates order the groups. Formulations are sorted by acceptance
/// (negated slope), then adjacent ones are merged into a tie group when
/// they are pairwise non-significant against every member of the group.
pub fn infer_order(fit: &FittedModel, alpha_level: f64) -> Result<String, SimulateError> {
    let spec = &fit.spec;
    if !spec.include_formulation || spec.beta_rows() != 1 {
        return Err(SimulateError::BadScenario {
            reason: String::from("ordering needs a proportional formulation term"),
        });
    }
    let vcov = fit
        .vcov
        .as_ref()
        .ok_or(SimulateError::VcovUnavailable)?;
    let t = spec.n_formulations;
    let fref = fit.formulation_ref;
    // slope of each formulation (reference at 0) and its flat index in
    // the packed parameter vector, or None for the reference
    let mut beta = vec![0.0; t + 1];
    let mut flat_idx: Vec<Option<usize>> = vec![None; t + 1];
    let mut pos = 0;
    for f in 1..=t {
        if f == fref {
            continue;
        }
        beta[f] = fit.params.beta[0][pos];
        flat_idx[f] = Some(spec.n_cuts() + pos);
        pos += 1;
    }

    let pair_nonsig = |a: usize, b: usize| -> bool {
        let d = beta[a] - beta[b];
        let var = |f: usize| flat_idx[f].map_or(0.0, |i| vcov[(i, i)]);
        let cov = match (flat_idx[a], flat_idx[b]) {
            (Some(i), Some(k)) => vcov[(i, k)],
            _ => 0.0,
        };
        let v = var(a) + var(b) - 2.0 * cov;
        if v <= 0.0 {
            return math::abs(d) < 1e-12;
        }
        let z = d / math::sqrt(v);
        special::normal_two_sided_p(z) >= alpha_level
    };

    // worst first: acceptance is -beta, so ascending acceptance means
    // descending beta
    let mut order: Vec<usize> = (1..=t).collect();
    order.sort_by(|&a, &b| {
        beta[b]
            .partial_cmp(&beta[a])
            .expect("finite slopes")
            .then(a.cmp(&b))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for f in order {
        let joins = groups
            .last()
            .map_or(false, |g| g.iter().all(|&m| pair_nonsig(m, f)));
        if joins {
            groups.last_mut().expect("non-empty").push(f);
        } else {
            groups.push(vec![f]);
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    Ok(format_groups(&groups))
}

/// Concordance tallies for one model variant within a scenario.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ModelConcordance {
    pub matches: usize,
    /// replicates where the fit failed or did not converge
    pub failures: usize,
    pub used: usize,
}

impl ModelConcordance {
    /// matches over converged replicates (0 when none converged)
    pub fn rate(&self) -> f64 {
        if self.used == 0 {
            0.0
        } else {
            self.matches as f64 / self.used as f64
        }
    }

    /// sensitivity view: failures counted as discordant
    pub fn rate_with_failures(&self) -> f64 {
        let total = self.used + self.failures;
        if total == 0 {
            0.0
        } else {
            self.matches as f64 / total as f64
        }
    }
}

/// Inferred orderings for one replicate; None marks a failed or
/// non-converged fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ReplicateDetail {
    pub replicate: usize,
    pub unified: Option<String>,
    pub attribute_a: Option<String>,
    pub attribute_b: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScenarioResult {
    pub pattern: String,
    pub replicates: usize,
    pub unified: ModelConcordance,
    pub attribute_a: ModelConcordance,
    pub attribute_b: ModelConcordance,
    pub detail: Vec<ReplicateDetail>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ConcordanceReport {
    pub scenarios: Vec<ScenarioResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub mixed: MixedFitOptions,
    pub alpha_level: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            // order 9 keeps the study inside its runtime budget without
            // visible loss against higher orders on these models
            mixed: MixedFitOptions {
                quad_order: 9,
                ..MixedFitOptions::default()
            },
            alpha_level: 0.05,
        }
    }
}

fn fit_and_compare(
    spec: &ModelSpec,
    data: &EncodedData,
    target: &str,
    opts: &StudyOptions,
    tally: &mut ModelConcordance,
) -> Option<String> {
    let order = fit_mixed(spec, data, &opts.mixed)
        .ok()
        .filter(|fit| fit.converged())
        .and_then(|fit| infer_order(&fit, opts.alpha_level).ok());
    match &order {
        Some(o) => {
            tally.used += 1;
            if o == target {
                tally.matches += 1;
            }
        }
        None => tally.failures += 1,
    }
    order
}

/// Run every scenario: per replicate, simulate, fit the unified mixed
/// model and the two per-attribute mixed models, and compare each
/// inferred ordering with the scenario's pattern.
pub fn concordance_study(
    scenarios: &[ScenarioSpec],
    opts: &StudyOptions,
) -> Result<ConcordanceReport, SimulateError> {
    let mut results = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let target = scenario.canonical_pattern()?;
        let (unified_spec, _) = true_model(scenario)?;
        let attr_spec = ModelSpec {
            n_attributes: 1,
            include_attribute: false,
            ..unified_spec
        };
        let mut unified = ModelConcordance::default();
        let mut attribute_a = ModelConcordance::default();
        let mut attribute_b = ModelConcordance::default();
        let mut detail = Vec::with_capacity(scenario.replicates);
        for rep in 0..scenario.replicates {
            let ds = simulate_dataset(scenario, rep)?;
            let data = EncodedData::encode_default(&ds).map_err(SimulateError::Dataset)?;
            let u = fit_and_compare(&unified_spec, &data, &target, opts, &mut unified);
            let mut per_attr = [const { None }; 2];
            for (a, tally) in [(1usize, &mut attribute_a), (2, &mut attribute_b)] {
                let sub = ds.filter_attribute(a).map_err(SimulateError::Dataset)?;
                let sub_data =
                    EncodedData::encode_default(&sub).map_err(SimulateError::Dataset)?;
                per_attr[a - 1] = fit_and_compare(&attr_spec, &sub_data, &target, opts, tally);
            }
            let [da, db] = per_attr;
            detail.push(ReplicateDetail {
                replicate: rep,
                unified: u,
                attribute_a: da,
                attribute_b: db,
            });
        }
        results.push(ScenarioResult {
            pattern: target,
            replicates: scenario.replicates,
            unified,
            attribute_a,
            attribute_b,
            detail,
        });
    }
    Ok(ConcordanceReport { scenarios: results })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimulateError {
    BadPattern { pattern: String, reason: String },
    BadScenario { reason: String },
    VcovUnavailable,
    Dataset(DatasetError),
    Model(ModelError),
}

impl core::fmt::Display for SimulateError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        use SimulateError::*;
        match self {
            BadPattern { pattern, reason } => write!(f, "bad pattern {pattern:?}: {reason}"),
            BadScenario { reason } => write!(f, "bad scenario: {reason}"),
            VcovUnavailable => write!(f, "covariance matrix unavailable; cannot infer ordering"),
            Dataset(e) => write!(f, "{e}"),
            Model(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimulateError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_roundtrip_and_canonicalisation() {
        let g = parse_pattern("F3<F1=F2").unwrap();
        assert_eq!(g, vec![vec![3], vec![1, 2]]);
        assert_eq!(format_groups(&g), "F3<F1=F2");
        let s = ScenarioSpec::new("F2=F1<F3", 10, 1, 1);
        assert_eq!(s.canonical_pattern().unwrap(), "F1=F2<F3");
    }

    #[test]
    fn pattern_rejects_duplicates_and_gaps() {
        assert!(parse_pattern("F1<F1").is_err());
        assert!(parse_pattern("F1<F3").is_err());
        assert!(parse_pattern("").is_err());
        assert!(parse_pattern("F0<F1").is_err());
        assert!(parse_pattern("x<F1").is_err());
    }

    #[test]
    fn true_model_respects_pattern() {
        let s = ScenarioSpec::new("F3<F1<F2", 10, 1, 1);
        let (spec, p) = true_model(&s).unwrap();
        assert_eq!(spec.n_formulations, 3);
        // acceptance scores scale with the default gap of 1.5:
        // F3=0, F1=1.5, F2=3 -> beta (vs F1): F2=-1.5, F3=+1.5
        assert_eq!(p.beta[0], vec![-1.5, 1.5]);
        let tie = ScenarioSpec::new("F1=F2=F3", 10, 1, 1);
        let (_, pt) = true_model(&tie).unwrap();
        assert_eq!(pt.beta[0], vec![0.0, 0.0]);
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = ScenarioSpec::new("F1<F2<F3", 5, 2, 42);
        let a = simulate_dataset(&s, 1).unwrap();
        let b = simulate_dataset(&s, 1).unwrap();
        assert_eq!(a.observations(), b.observations());
        let c = simulate_dataset(&s, 0).unwrap();
        assert_ne!(a.observations(), c.observations());
    }

    #[test]
    fn null_scenario_frequencies_near_uniform() {
        // sigma_u 0, no effects, cutpoints at uniform quintiles
        let q = |p: f64| math::ln(p / (1.0 - p));
        let s = ScenarioSpec {
            sigma_u: 0.0,
            gap: 0.0,
            attribute_shift: 0.0,
            alpha: vec![q(0.2), q(0.4), q(0.6), q(0.8)],
            ..ScenarioSpec::new("F1=F2=F3", 300, 1, 7)
        };
        let ds = simulate_dataset(&s, 0).unwrap();
        let n = ds.observations().len() as f64;
        let mut freq = [0.0; 5];
        for o in ds.observations() {
            freq[o.response - 1] += 1.0 / n;
        }
        for f in freq {
            assert!((f - 0.2).abs() < 0.03, "frequency {f} too far from 0.2");
        }
    }

    #[test]
    fn strong_effects_order_sample_means() {
        let s = ScenarioSpec {
            gap: 2.0,
            ..ScenarioSpec::new("F3<F1<F2", 60, 1, 11)
        };
        let ds = simulate_dataset(&s, 0).unwrap();
        let mut sum = [0.0; 4];
        let mut cnt = [0.0; 4];
        for o in ds.observations() {
            sum[o.formulation] += o.response as f64;
            cnt[o.formulation] += 1.0;
        }
        let mean = |f: usize| sum[f] / cnt[f];
        assert!(mean(3) < mean(1) && mean(1) < mean(2));
    }

    #[test]
    fn empty_study_has_no_rates() {
        let s = ScenarioSpec::new("F1<F2<F3", 10, 0, 1);
        let report = concordance_study(&[s], &StudyOptions::default()).unwrap();
        assert_eq!(report.scenarios[0].unified.used, 0);
        assert_eq!(report.scenarios[0].unified.rate(), 0.0);
        assert_eq!(report.scenarios[0].unified.rate_with_failures(), 0.0);
    }
}
