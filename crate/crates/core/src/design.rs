//! Balanced incomplete block designs: parameter validation, backtracking
//! generation, and panellist serving schedules.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// Design parameters (t treatments, b blocks of size h, r replications,
/// pair concurrence lambda).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BibdParams {
    pub t: usize,
    pub b: usize,
    pub h: usize,
    pub r: usize,
    pub lambda: usize,
}

/// Check the four necessary conditions and derive lambda.
pub fn validate_bibd(t: usize, b: usize, h: usize, r: usize) -> Result<BibdParams, DesignError> {
    if t == 0 || b == 0 || h == 0 || r == 0 {
        return Err(DesignError::NonPositive);
    }
    let mut violations = Vec::new();
    if r * t != h * b {
        violations.push(ConditionViolation::CountMismatch {
            rt: r * t,
            hb: h * b,
        });
    }
    let lambda_num = r * (h - 1);
    let lambda = if t > 1 && lambda_num % (t - 1) == 0 {
        lambda_num / (t - 1)
    } else {
        violations.push(ConditionViolation::NonIntegerLambda {
            numerator: lambda_num,
            denominator: t - 1,
        });
        0
    };
    if lambda > 0 && r <= lambda && h < t {
        violations.push(ConditionViolation::ReplicationNotAboveLambda { r, lambda });
    }
    if b < t {
        violations.push(ConditionViolation::FewerBlocksThanTreatments { b, t });
    }
    if violations.is_empty() {
        Ok(BibdParams { t, b, h, r, lambda })
    } else {
        Err(DesignError::ConditionsViolated(violations))
    }
}

/// Block-to-treatment assignment satisfying the BIBD invariants.
/// Treatments are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BibdLayout {
    pub params: BibdParams,
    pub blocks: Vec<Vec<usize>>,
}

impl BibdLayout {
    /// Exhaustive replication and pair-concurrence check.
    pub fn verify(&self) -> Result<(), DesignError> {
        let t = self.params.t;
        let mut reps = vec![0usize; t];
        let mut pairs = vec![vec![0usize; t]; t];
        for block in &self.blocks {
            for (i, &a) in block.iter().enumerate() {
                reps[a - 1] += 1;
                for &b in &block[i + 1..] {
                    pairs[a - 1][b - 1] += 1;
                    pairs[b - 1][a - 1] += 1;
                }
            }
        }
        for (i, &c) in reps.iter().enumerate() {
            if c != self.params.r {
                return Err(DesignError::ReplicationOff {
                    treatment: i + 1,
                    count: c,
                    expected: self.params.r,
                });
            }
        }
        for i in 0..t {
            for j in (i + 1)..t {
                if pairs[i][j] != self.params.lambda {
                    return Err(DesignError::ConcurrenceOff {
                        pair: (i + 1, j + 1),
                        count: pairs[i][j],
                        expected: self.params.lambda,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Generate a BIBD for (t, h) by backtracking over the smallest feasible
/// (b, r, lambda), then repeat the base design `multiplier` times.
///
/// The block-set structure is deterministic (lexicographic search); the
/// seed only enters downstream serving orders.
pub fn generate_bibd(
    t: usize,
    h: usize,
    multiplier: usize,
    node_budget: u64,
) -> Result<BibdLayout, DesignError> {
    if h == 0 || t == 0 || h > t || multiplier == 0 {
        return Err(DesignError::NonPositive);
    }
    // smallest lambda making both r and b integral
    let base = (1..=t * t)
        .find_map(|lambda| {
            let rn = lambda * (t - 1);
            if rn % (h - 1).max(1) != 0 {
                return None;
            }
            let r = if h == 1 { lambda } else { rn / (h - 1) };
            if r * t % h != 0 {
                return None;
            }
            let b = r * t / h;
            if b < t {
                return None;
            }
            Some(BibdParams { t, b, h, r, lambda })
        })
        .ok_or(DesignError::NoDesignFound)?;

    let mut budget = node_budget;
    let blocks = search_blocks(&base, &mut budget).ok_or(DesignError::NoDesignFound)?;

    let params = BibdParams {
        b: base.b * multiplier,
        r: base.r * multiplier,
        lambda: base.lambda * multiplier,
        ..base
    };
    let mut all = Vec::with_capacity(params.b);
    for _ in 0..multiplier {
        all.extend(blocks.iter().cloned());
    }
    let layout = BibdLayout { params, blocks: all };
    layout.verify()?;
    Ok(layout)
}

fn search_blocks(p: &BibdParams, budget: &mut u64) -> Option<Vec<Vec<usize>>> {
    let candidates = combinations(p.t, p.h);
    let mut reps = vec![0usize; p.t];
    let mut pairs = vec![vec![0usize; p.t]; p.t];
    let mut chosen: Vec<usize> = Vec::with_capacity(p.b);
    if backtrack(p, &candidates, &mut reps, &mut pairs, &mut chosen, 0, budget) {
        Some(chosen.iter().map(|&i| candidates[i].clone()).collect())
    } else {
        None
    }
}

fn backtrack(
    p: &BibdParams,
    candidates: &[Vec<usize>],
    reps: &mut [usize],
    pairs: &mut [Vec<usize>],
    chosen: &mut Vec<usize>,
    start: usize,
    budget: &mut u64,
) -> bool {
    if chosen.len() == p.b {
        return reps.iter().all(|&c| c == p.r);
    }
    if *budget == 0 {
        return false;
    }
    let remaining = p.b - chosen.len();
    if candidates.len() - start < remaining {
        return false;
    }
    // blocks may repeat (multi-set designs), so the next block index is
    // allowed to equal the current one
    for idx in start..candidates.len() {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let block = &candidates[idx];
        if !feasible(p, block, reps, pairs) {
            continue;
        }
        apply(block, reps, pairs, true);
        chosen.push(idx);
        if backtrack(p, candidates, reps, pairs, chosen, idx, budget) {
            return true;
        }
        chosen.pop();
        apply(block, reps, pairs, false);
    }
    false
}

fn feasible(p: &BibdParams, block: &[usize], reps: &[usize], pairs: &[Vec<usize>]) -> bool {
    for (i, &a) in block.iter().enumerate() {
        if reps[a - 1] + 1 > p.r {
            return false;
        }
        for &b in &block[i + 1..] {
            if pairs[a - 1][b - 1] + 1 > p.lambda {
                return false;
            }
        }
    }
    true
}

fn apply(block: &[usize], reps: &mut [usize], pairs: &mut [Vec<usize>], add: bool) {
    for (i, &a) in block.iter().enumerate() {
        if add {
            reps[a - 1] += 1;
        } else {
            reps[a - 1] -= 1;
        }
        for &b in &block[i + 1..] {
            if add {
                pairs[a - 1][b - 1] += 1;
                pairs[b - 1][a - 1] += 1;
            } else {
                pairs[a - 1][b - 1] -= 1;
                pairs[b - 1][a - 1] -= 1;
            }
        }
    }
}

fn combinations(t: usize, h: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(h);
    fn rec(start: usize, t: usize, h: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == h {
            out.push(cur.clone());
            return;
        }
        for v in start..=t {
            cur.push(v);
            rec(v + 1, t, h, cur, out);
            cur.pop();
        }
    }
    rec(1, t, h, &mut cur, &mut out);
    out
}

/// One panellist's tasting sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ServingAssignment {
    pub panellist: usize,
    pub block: usize,
    /// treatments in the order served
    pub order: Vec<usize>,
}

/// Assign panellists to blocks (cyclically when N is a multiple of b)
/// with a seeded random within-block serving order.
pub fn assign_panellists(
    layout: &BibdLayout,
    n_panellists: usize,
    seed: u64,
) -> Result<Vec<ServingAssignment>, DesignError> {
    let b = layout.blocks.len();
    if n_panellists == 0 || n_panellists % b != 0 {
        return Err(DesignError::PanellistCountNotMultiple {
            n: n_panellists,
            b,
        });
    }
    let mut schedule = Vec::with_capacity(n_panellists);
    for p in 0..n_panellists {
        let block = p % b;
        let mut order = layout.blocks[block].clone();
        Stream::derive(seed, &[p as u64]).shuffle(&mut order);
        schedule.push(ServingAssignment {
            panellist: p,
            block,
            order,
        });
    }
    Ok(schedule)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConditionViolation {
    CountMismatch { rt: usize, hb: usize },
    NonIntegerLambda { numerator: usize, denominator: usize },
    ReplicationNotAboveLambda { r: usize, lambda: usize },
    FewerBlocksThanTreatments { b: usize, t: usize },
}

impl core::fmt::Display for ConditionViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        use ConditionViolation::*;
        match self {
            CountMismatch { rt, hb } => write!(f, "rt != hb ({rt} != {hb})"),
            NonIntegerLambda { numerator, denominator } => {
                write!(f, "lambda = {numerator}/{denominator} is not an integer")
            }
            ReplicationNotAboveLambda { r, lambda } => write!(f, "r <= lambda ({r} <= {lambda})"),
            FewerBlocksThanTreatments { b, t } => write!(f, "b < t ({b} < {t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignError {
    NonPositive,
    ConditionsViolated(Vec<ConditionViolation>),
    NoDesignFound,
    ReplicationOff { treatment: usize, count: usize, expected: usize },
    ConcurrenceOff { pair: (usize, usize), count: usize, expected: usize },
    PanellistCountNotMultiple { n: usize, b: usize },
}

impl core::fmt::Display for DesignError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        use DesignError::*;
        match self {
            NonPositive => write!(f, "design parameters must be positive"),
            ConditionsViolated(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| alloc::format!("{v}")).collect();
                write!(f, "BIBD conditions violated: {}", parts.join("; "))
            }
            NoDesignFound => write!(f, "no design found within the search budget"),
            ReplicationOff { treatment, count, expected } => write!(
                f,
                "treatment {treatment} appears in {count} blocks, expected {expected}"
            ),
            ConcurrenceOff { pair, count, expected } => write!(
                f,
                "pair ({}, {}) co-occurs {count} times, expected {expected}",
                pair.0, pair.1
            ),
            PanellistCountNotMultiple { n, b } => {
                write!(f, "panellist count {n} is not a multiple of the block count {b}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DesignError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beverage_design_validates() {
        let p = validate_bibd(13, 130, 4, 40).unwrap();
        assert_eq!(p.lambda, 10);
    }

    #[test]
    fn complete_block_degenerate_case() {
        let p = validate_bibd(3, 3, 3, 3).unwrap();
        assert_eq!(p.lambda, 3);
    }

    #[test]
    fn count_mismatch_named() {
        let err = validate_bibd(13, 100, 4, 40).unwrap_err();
        match err {
            DesignError::ConditionsViolated(vs) => {
                assert!(vs
                    .iter()
                    .any(|v| matches!(v, ConditionViolation::CountMismatch { rt: 520, hb: 400 })));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn all_pairs_design_for_t3_h2() {
        let layout = generate_bibd(3, 2, 1, 1_000_000).unwrap();
        assert_eq!(layout.params.b, 3);
        assert_eq!(layout.params.lambda, 1);
        assert_eq!(
            layout.blocks,
            alloc::vec![alloc::vec![1, 2], alloc::vec![1, 3], alloc::vec![2, 3]]
        );
    }

    #[test]
    fn fano_plane_design() {
        let layout = generate_bibd(7, 3, 1, 10_000_000).unwrap();
        assert_eq!(layout.params.b, 7);
        assert_eq!(layout.params.r, 3);
        assert_eq!(layout.params.lambda, 1);
        layout.verify().unwrap();
    }

    #[test]
    fn beverage_design_with_multiplier() {
        let layout = generate_bibd(13, 4, 10, 50_000_000).unwrap();
        assert_eq!(layout.params.b, 130);
        assert_eq!(layout.params.r, 40);
        assert_eq!(layout.params.lambda, 10);
        layout.verify().unwrap();
    }

    #[test]
    fn schedule_bijection_and_determinism() {
        let layout = generate_bibd(7, 3, 1, 10_000_000).unwrap();
        let s1 = assign_panellists(&layout, 7, 99).unwrap();
        let s2 = assign_panellists(&layout, 7, 99).unwrap();
        assert_eq!(s1, s2);
        for (i, a) in s1.iter().enumerate() {
            assert_eq!(a.block, i);
            let mut sorted = a.order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, layout.blocks[i]);
        }
        // double coverage
        let s = assign_panellists(&layout, 14, 99).unwrap();
        let mut usage = [0usize; 7];
        for a in &s {
            usage[a.block] += 1;
        }
        assert!(usage.iter().all(|&u| u == 2));
    }

    #[test]
    fn schedule_rejects_non_multiple() {
        let layout = generate_bibd(3, 2, 1, 1000).unwrap();
        assert!(assign_panellists(&layout, 4, 0).is_err());
    }
}
