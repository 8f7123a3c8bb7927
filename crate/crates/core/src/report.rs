//! Deterministic run reports and the randomized verification suites behind
//! the command-line front end.
//!
//! A report echoes the command, embeds the seed and a SHA-256 hash of every
//! input artifact, and carries one status line per check.  Wall-clock
//! timings are deliberately absent: replaying a run with the same inputs
//! and seed must reproduce the report byte for byte.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::arith::{rat, Rational, Scalar};
use crate::conformal::ScaleSpec;
use crate::error::{Error, Result};
use crate::killing;
use crate::prolong::{self, sha256_json};
use crate::solve;
use crate::tensor::WeightedTensorField;
use crate::tractor::{d_identities_check, CheckStatus, IdentityOutcome};

/// Machine-readable summary of one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// The subcommand and its principal arguments, echoed verbatim.
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// SHA-256 hashes of the canonical JSON of every input artifact.
    pub inputs: BTreeMap<String, String>,
    pub checks: Vec<IdentityOutcome>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// True exactly when no check failed.
    pub ok: bool,
    /// Computed artifact (basis report, prolongation record, verdict, …).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
    /// Path the payload was written to, when `--out` was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
}

impl RunReport {
    pub fn new(command: impl Into<String>) -> RunReport {
        RunReport {
            command: command.into(),
            n: None,
            seed: None,
            inputs: BTreeMap::new(),
            checks: Vec::new(),
            passed: 0,
            failed: 0,
            skipped: 0,
            ok: true,
            payload: None,
            artifact: None,
        }
    }

    /// Record an input artifact under `name` by hashing its canonical JSON.
    pub fn add_input<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.inputs.insert(name.into(), sha256_json(value)?);
        Ok(())
    }

    pub fn push_check(&mut self, check: IdentityOutcome) {
        match check.status {
            CheckStatus::Pass => self.passed += 1,
            CheckStatus::Fail => {
                self.failed += 1;
                self.ok = false;
            }
            CheckStatus::Skipped => self.skipped += 1,
        }
        self.checks.push(check);
    }

    pub fn push_checks<I: IntoIterator<Item = IdentityOutcome>>(&mut self, checks: I) {
        for c in checks {
            self.push_check(c);
        }
    }

    pub fn set_payload<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.payload = Some(serde_json::to_value(value)?);
        Ok(())
    }

    /// Process exit code: 0 iff every check passed.
    pub fn exit_code(&self) -> i32 {
        if self.ok {
            0
        } else {
            1
        }
    }

    /// Human-readable rendering: a header, one line per check, a summary.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command));
        if let Some(n) = self.n {
            out.push_str(&format!("n: {n}\n"));
        }
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed: {seed}\n"));
        }
        for (name, hash) in &self.inputs {
            out.push_str(&format!("input {name}: sha256 {hash}\n"));
        }
        for check in &self.checks {
            let tag = match check.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "SKIP",
            };
            out.push_str(&format!("{tag} {} — {}\n", check.name, check.detail));
        }
        out.push_str(&format!(
            "result: {} passed, {} failed, {} skipped\n",
            self.passed, self.failed, self.skipped
        ));
        if let Some(path) = &self.artifact {
            out.push_str(&format!("artifact: {path}\n"));
        }
        out
    }
}

// ---------------------------------------------------------------------
// Verification suites
// ---------------------------------------------------------------------

/// Which suites a `verify` run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteSelect {
    Identities,
    Prolongation,
    Scales,
    All,
}

impl SuiteSelect {
    pub fn parse(s: &str) -> Result<SuiteSelect> {
        match s {
            "identities" => Ok(SuiteSelect::Identities),
            "prolongation" => Ok(SuiteSelect::Prolongation),
            "scales" => Ok(SuiteSelect::Scales),
            "all" => Ok(SuiteSelect::All),
            other => Err(Error::Parse(format!(
                "unknown suite {other:?}; expected identities, prolongation, scales, or all"
            ))),
        }
    }
}

/// Seeded small-integer combination of basis elements, never all zero.
fn seeded_combination<R: Rng>(
    rng: &mut R,
    basis: &[WeightedTensorField],
) -> Result<WeightedTensorField> {
    let mut acc: Option<WeightedTensorField> = None;
    let mut all_zero = true;
    for b in basis {
        let c: i64 = rng.random_range(-3..=3);
        if c == 0 {
            continue;
        }
        all_zero = false;
        let term = b.scale_rat(&rat(c));
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term)?,
        });
    }
    match (acc, all_zero) {
        (Some(a), false) => Ok(a),
        _ => Ok(basis[0].clone()),
    }
}

/// Seeded curved splittings with polynomial potentials of degree ≤ 2.
fn seeded_splittings(n: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<ScaleSpec>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut u = Scalar::zero(n);
        for a in 0..n {
            let lin: i64 = rng.random_range(-2..=2);
            if lin != 0 {
                u = &u + &Scalar::var(n, a).scale(&rat(lin));
            }
            for b in a..n {
                let quad: i64 = rng.random_range(-1..=1);
                if quad != 0 {
                    u = &u + &(&Scalar::var(n, a) * &Scalar::var(n, b)).scale(&rat(quad));
                }
            }
        }
        if u.is_zero() {
            continue;
        }
        out.push(ScaleSpec::from_potential(&u)?);
    }
    Ok(out)
}

/// Randomized identity suite of the tractor operators (wrapper that keeps
/// all suites callable through one entry point).
pub fn identity_suite(n: usize, trials: usize, seed: u64) -> Result<Vec<IdentityOutcome>> {
    d_identities_check(n, trials, seed)
}

/// Prolongation invariants on seeded conformal Killing forms and tensors:
/// shapes, parallelism, round-trips, and independence of the splitting used
/// to compute the prolongation.
pub fn prolongation_suite(n: usize, seed: u64) -> Result<Vec<IdentityOutcome>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let flat = ScaleSpec::reference(n);
    let vectors = solve::ckv_basis(n, 2)?;
    let vector_basis = vectors
        .basis
        .tensors()
        .ok_or_else(|| Error::InternalInconsistency("vector basis must hold tensors".into()))?
        .to_vec();
    let tensors = solve::ckt_basis(n, 4)?;
    let tensor_basis = tensors
        .basis
        .tensors()
        .ok_or_else(|| Error::InternalInconsistency("tensor basis must hold tensors".into()))?
        .to_vec();
    let splittings = seeded_splittings(n, 3, &mut rng)?;

    let vector_samples: Vec<WeightedTensorField> = (0..4)
        .map(|_| seeded_combination(&mut rng, &vector_basis))
        .collect::<Result<_>>()?;
    let tensor_samples: Vec<WeightedTensorField> = (0..3)
        .map(|_| seeded_combination(&mut rng, &tensor_basis))
        .collect::<Result<_>>()?;

    let mut outcomes = Vec::new();

    // Rank 1: the derivative tractor of the half prolongation is skew and
    // parallel, and the top slot recovers the input.
    {
        let mut cases = 0;
        let mut failures = 0;
        for k in &vector_samples {
            let half = prolong::half_prolong_vector(k, &flat)?;
            let full = prolong::full_prolong_vector(&half)?;
            cases += 1;
            let skew = full.add(&full.permute_tractor(&[1, 0])?)?.is_zero();
            if !(skew && full.is_parallel() && prolong::top_slot_vector(&half)? == *k) {
                failures += 1;
            }
        }
        outcomes.push(IdentityOutcome::from_counts(
            "vector_prolongation_is_skew_parallel_and_recovers_the_input",
            cases,
            failures,
            0,
        ));
    }

    // Rank 1: computing the half prolongation in a curved splitting and
    // converting back agrees with the flat computation.
    {
        let mut cases = 0;
        let mut failures = 0;
        for k in &vector_samples {
            let reference = prolong::half_prolong_vector(k, &flat)?;
            for spec in &splittings {
                cases += 1;
                if !prolong::is_ck_vector(k, spec)? {
                    failures += 1;
                    continue;
                }
                let curved = prolong::half_prolong_vector(k, spec)?;
                if curved.change_splitting(&flat)? != reference {
                    failures += 1;
                }
            }
        }
        outcomes.push(IdentityOutcome::from_counts(
            "vector_half_prolongation_is_splitting_invariant",
            cases,
            failures,
            0,
        ));
    }

    // Rank 2: shape of the half prolongation (symmetric, trace-free against
    // the tractor metric, zero bottom row), plus top-slot recovery.
    {
        let mut cases = 0;
        let mut failures = 0;
        for k in &tensor_samples {
            let half = prolong::half_prolong_tensor(k, &flat)?;
            cases += 1;
            let symmetric = half == half.permute_tractor(&[1, 0])?;
            let trace = half.contract_tractor(0, 1)?;
            let mut first_row_zero = true;
            for b in 0..n + 2 {
                if !half.get(&[0, b], &[]).is_zero() {
                    first_row_zero = false;
                }
            }
            if !(symmetric
                && trace.is_zero()
                && first_row_zero
                && prolong::top_slot_pair(&half)? == *k)
            {
                failures += 1;
            }
        }
        outcomes.push(IdentityOutcome::from_counts(
            "tensor_half_prolongation_has_the_expected_slot_structure",
            cases,
            failures,
            0,
        ));
    }

    // Rank 2: the full prolongation is parallel and round-trips through the
    // half form and through the algebraic Weyl form.
    {
        let mut cases = 0;
        let mut failures = 0;
        for k in &tensor_samples {
            let half = prolong::half_prolong_tensor(k, &flat)?;
            let full = prolong::full_prolong_tensor(&half)?;
            cases += 1;
            let w = prolong::to_weyl(&full)?;
            if !(full.is_parallel()
                && prolong::half_from_full(&full)? == half
                && prolong::is_weyl_symmetric(&w)?
                && prolong::from_weyl(&w)? == full)
            {
                failures += 1;
            }
        }
        outcomes.push(IdentityOutcome::from_counts(
            "tensor_full_prolongation_is_parallel_and_round_trips",
            cases,
            failures,
            0,
        ));
    }

    // Rank 2: splitting invariance of predicate and half prolongation.
    {
        let mut cases = 0;
        let mut failures = 0;
        for k in &tensor_samples {
            let reference = prolong::half_prolong_tensor(k, &flat)?;
            for spec in &splittings {
                cases += 1;
                if !prolong::is_ck_tensor(k, spec)? {
                    failures += 1;
                    continue;
                }
                let curved = prolong::half_prolong_tensor(k, spec)?;
                if curved.change_splitting(&flat)? != reference {
                    failures += 1;
                }
            }
        }
        outcomes.push(IdentityOutcome::from_counts(
            "tensor_half_prolongation_is_splitting_invariant",
            cases,
            failures,
            0,
        ));
    }

    Ok(outcomes)
}

/// Killing-scale suite over the curved Einstein scale σ = 1 + |x|²: the
/// four scale criteria agree, strong scales have trivial potentials, and
/// the Einstein constructions return exact Killing objects.
pub fn scales_suite(n: usize, seed: u64) -> Result<Vec<IdentityOutcome>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sphere = ScaleSpec::from_sigma(Scalar::from_poly(
        crate::arith::parse_poly("1 + |x|^2", n).expect("fixed Einstein scale"),
    ))?;
    let flat = ScaleSpec::reference(n);
    let tensors = solve::ckt_basis(n, 4)?;
    let tensor_basis = tensors.basis.tensors().unwrap().to_vec();

    // A handful of structured samples plus seeded combinations.
    let mut samples: Vec<WeightedTensorField> = Vec::new();
    let unit = |dir: usize| {
        let mut k = WeightedTensorField::zeros(n, vec![crate::tensor::Variance::Co], 2);
        *k.get_mut(&[dir]) = Scalar::one(n);
        k
    };
    let dil = {
        let mut k = WeightedTensorField::zeros(n, vec![crate::tensor::Variance::Co], 2);
        for a in 0..n {
            *k.get_mut(&[a]) = Scalar::var(n, a);
        }
        k
    };
    let rot = |i: usize, j: usize| {
        let mut k = WeightedTensorField::zeros(n, vec![crate::tensor::Variance::Co], 2);
        *k.get_mut(&[i]) = -&Scalar::var(n, j);
        *k.get_mut(&[j]) = Scalar::var(n, i);
        k
    };
    let sym2 = |u: &WeightedTensorField, v: &WeightedTensorField| -> Result<WeightedTensorField> {
        u.tensor_product(v).symmetrize(&[0, 1])?.tracefree_sym2()
    };
    samples.push(sym2(&unit(0), &unit(0))?);
    samples.push(sym2(&unit(0), &unit(1))?);
    samples.push(sym2(&dil, &dil)?);
    samples.push(sym2(&rot(0, 1), &rot(0, 1))?);
    // Strong samples need isometries of the curved scale with constant
    // inner products, so that the symmetric product is trace-free already:
    // on the 3-sphere, a left-invariant frame (averaged translation plus a
    // rotation); in higher dimension, rotations in disjoint planes.
    if n == 3 {
        let xi1 = killing::new_killing_vector(&unit(0), &sphere)?.sub(&rot(1, 2))?;
        let xi2 = killing::new_killing_vector(&unit(1), &sphere)?.add(&rot(0, 2))?;
        samples.push(sym2(&xi1, &xi1)?);
        samples.push(sym2(&xi1, &xi2)?);
    } else {
        samples.push(sym2(&rot(0, 1), &rot(2, 3))?);
    }
    samples.push(seeded_combination(&mut rng, &tensor_basis)?);

    let mut outcomes = Vec::new();

    // Pairwise agreement of the scale criteria.
    {
        let mut cases = 0;
        let mut failures = 0;
        for k in &samples {
            cases += 1;
            let ks = killing::ks_test_tensor(k, &sphere)?.passed();
            // The two tractor-identity criteria assert agreement with the
            // divergence criterion internally and would error on mismatch.
            let k4 = killing::einstein_ks_test_k4(k, &sphere)?;
            let kappa = killing::einstein_ks_kappa(k, &sphere)?.passed();
            if ks != k4 || ks != kappa {
                failures += 1;
            }
        }
        outcomes.push(IdentityOutcome::from_counts(
            "killing_scale_criteria_agree_pairwise",
            cases,
            failures,
            0,
        ));
    }

    // Strong Killing scales need no trace adjustment: λ = 0, κ constant.
    {
        let mut cases = 0;
        let mut failures = 0;
        for k in &samples {
            let strong = killing::sks_test_tensor(k, &sphere)?;
            if !strong.passed() {
                continue;
            }
            cases += 1;
            let ks = killing::ks_test_tensor(k, &sphere)?;
            let lambda_zero = ks
                .lambda
                .as_ref()
                .map(WeightedTensorField::is_zero)
                .unwrap_or(false);
            let kappa_const = killing::einstein_ks_kappa(k, &sphere)?
                .kappa
                .map(|f| f.get(&[]).constant_value().is_some())
                .unwrap_or(false);
            if !(lambda_zero && kappa_const) {
                failures += 1;
            }
        }
        outcomes.push(IdentityOutcome::from_counts(
            "strong_killing_scales_have_trivial_potentials",
            cases,
            failures,
            0,
        ));
    }

    // Einstein constructions return exact Killing objects.
    {
        let mut cases = 0;
        let mut failures = 0;
        for dir in 0..n.min(2) {
            cases += 1;
            let averaged = killing::new_killing_vector(&unit(dir), &sphere)?;
            if !killing::killing_scale_test_vector(&averaged, &sphere)? {
                failures += 1;
            }
        }
        cases += 1;
        let averaged = killing::new_killing_vector(&dil, &sphere)?;
        if !killing::killing_scale_test_vector(&averaged, &sphere)? {
            failures += 1;
        }
        cases += 1;
        let transferred = killing::new_killing_tensor(&sym2(&unit(0), &unit(0))?, &sphere)?;
        if transferred.is_zero()
            || !sphere
                .covderiv(&transferred)
                .symmetrize(&[0, 1, 2])?
                .is_zero()
        {
            failures += 1;
        }
        outcomes.push(IdentityOutcome::from_counts(
            "einstein_constructions_yield_exact_killing_objects",
            cases,
            failures,
            0,
        ));
    }

    // Pointwise annihilator dimension of a parallel prolongation is
    // independent of the sample point.
    {
        let mut cases = 0;
        let mut failures = 0;
        let k = sym2(&unit(0), &unit(0))?;
        let full =
            prolong::full_prolong_tensor(&prolong::half_prolong_tensor(&k, &flat)?)?;
        let origin: Vec<Rational> = vec![rat(0); n];
        let (base_dim, basis) = killing::nullity(&full, &origin)?;
        for _ in 0..3 {
            cases += 1;
            let point: Vec<Rational> = (0..n).map(|_| rat(rng.random_range(-5..=5))).collect();
            if killing::nullity(&full, &point)?.0 != base_dim {
                failures += 1;
            }
        }
        cases += 1;
        if base_dim == 0 || basis.len() != base_dim {
            failures += 1;
        }
        outcomes.push(IdentityOutcome::from_counts(
            "parallel_annihilator_dimension_is_point_independent",
            cases,
            failures,
            0,
        ));
    }

    Ok(outcomes)
}

/// Run the selected suites, one seed for all.  A full run executes the
/// suites in parallel workers; assembly order stays fixed, so the report is
/// deterministic regardless of scheduling.
pub fn verify_suites(
    n: usize,
    suite: SuiteSelect,
    trials: usize,
    seed: u64,
) -> Result<Vec<IdentityOutcome>> {
    if suite == SuiteSelect::All {
        let (ids, (pro, sca)) = rayon::join(
            || identity_suite(n, trials, seed),
            || rayon::join(|| prolongation_suite(n, seed), || scales_suite(n, seed)),
        );
        let mut checks = ids?;
        checks.extend(pro?);
        checks.extend(sca?);
        return Ok(checks);
    }
    match suite {
        SuiteSelect::Identities => identity_suite(n, trials, seed),
        SuiteSelect::Prolongation => prolongation_suite(n, seed),
        SuiteSelect::Scales => scales_suite(n, seed),
        SuiteSelect::All => unreachable!("handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_count_statuses_and_render_one_line_per_check() {
        let mut report = RunReport::new("verify --suite identities");
        report.n = Some(3);
        report.seed = Some(7);
        report.push_check(IdentityOutcome::from_counts("alpha", 4, 0, 0));
        report.push_check(IdentityOutcome::from_counts("beta", 0, 0, 0));
        report.push_check(IdentityOutcome::from_counts("gamma", 5, 2, 0));
        assert_eq!((report.passed, report.failed, report.skipped), (1, 1, 1));
        assert!(!report.ok);
        assert_eq!(report.exit_code(), 1);
        let text = report.render_text();
        assert!(text.contains("PASS alpha"));
        assert!(text.contains("SKIP beta"));
        assert!(text.contains("FAIL gamma"));
        assert!(text.contains("result: 1 passed, 1 failed, 1 skipped"));
    }

    #[test]
    fn reports_round_trip_through_json() {
        let mut report = RunReport::new("einstein-dim");
        report.n = Some(3);
        report
            .add_input("sigma", &"1 + |x|^2".to_string())
            .unwrap();
        report.push_check(IdentityOutcome::from_counts("dimension", 1, 0, 0));
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn suites_are_deterministic_given_the_seed() {
        let a = verify_suites(3, SuiteSelect::Prolongation, 4, 11).unwrap();
        let b = verify_suites(3, SuiteSelect::Prolongation, 4, 11).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = verify_suites(3, SuiteSelect::Prolongation, 4, 12).unwrap();
        assert!(!c.is_empty());
    }

    #[test]
    fn prolongation_suite_passes_on_the_flat_background() {
        for check in prolongation_suite(3, 5).unwrap() {
            assert_eq!(check.status, CheckStatus::Pass, "{}: {}", check.name, check.detail);
        }
    }

    #[test]
    fn scales_suite_passes_and_exercises_both_verdicts() {
        let checks = scales_suite(3, 5).unwrap();
        for check in &checks {
            assert_eq!(check.status, CheckStatus::Pass, "{}: {}", check.name, check.detail);
        }
        assert!(checks.iter().any(|c| c.name.contains("criteria_agree")));
    }

    #[test]
    fn suite_selection_parses_and_rejects_unknown_names() {
        assert_eq!(SuiteSelect::parse("all").unwrap(), SuiteSelect::All);
        assert_eq!(
            SuiteSelect::parse("scales").unwrap(),
            SuiteSelect::Scales
        );
        assert!(matches!(
            SuiteSelect::parse("everything"),
            Err(Error::Parse(_))
        ));
    }
}
