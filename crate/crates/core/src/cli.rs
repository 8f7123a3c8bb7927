//! Command-line front end: verification suites, basis computations,
//! prolongations, Killing-scale tests, and the Einstein constructions,
//! emitting deterministic reports in JSON or text.
//!
//! Exit codes are a stable contract: 0 when every check passed, 1 when a
//! check failed or a mathematical precondition was violated, 2 on usage,
//! schema, or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::arith::{parse_poly, Scalar};
use crate::conformal::ScaleSpec;
use crate::error::{Error, Result};
use crate::killing::{self, VerdictKind};
use crate::prolong::{self, ProlongationLevel};
use crate::report::{verify_suites, RunReport, SuiteSelect};
use crate::solve;
use crate::tensor::WeightedTensorField;
use crate::tractor::{CheckStatus, IdentityOutcome};

#[derive(Parser)]
#[command(
    name = "tractorlab",
    version,
    about = "Exact conformal tractor calculus on flat space: verification \
             suites, Killing bases, prolongations, and scale tests"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the computed artifact (basis, record, verdict, …) to this
    /// path as JSON; the report itself is written when there is no
    /// separate artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seeded verification suites.
    Verify {
        /// Background dimension (at least 3).
        #[arg(long)]
        n: usize,
        /// Which suites to run: identities, prolongation, scales, or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Number of randomized trials per identity.
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Seed controlling every randomized input of the run.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute an exact basis of conformal Killing 1-forms or 2-tensors.
    CktBasis {
        #[arg(long)]
        n: usize,
        /// Tensor rank of the basis: 1 or 2.
        #[arg(long, default_value_t = 2)]
        rank: u8,
        /// Polynomial degree bound of the coefficient ansatz.
        #[arg(long)]
        degree: Option<u32>,
    },
    /// Prolong a conformal Killing form or tensor read from JSON.
    Prolong {
        /// Path to the input field (weighted tensor JSON).
        #[arg(long)]
        input: PathBuf,
        /// Prolongation level: half, full, or weyl.
        #[arg(long, default_value = "half")]
        level: String,
        /// Scale to compute in: a JSON file or an inline polynomial;
        /// defaults to the flat reference scale.
        #[arg(long)]
        sigma: Option<String>,
    },
    /// Test whether a scale is a (strong) Killing scale of the input.
    CheckScale {
        /// Path to the conformal Killing form or tensor (JSON).
        #[arg(long)]
        input: PathBuf,
        /// Scale: a JSON file or an inline polynomial such as "1 + |x|^2".
        #[arg(long)]
        sigma: String,
        /// Criterion: sks, ks, or einstein-ks.
        #[arg(long)]
        mode: String,
    },
    /// Dimension of the space of Einstein-compatible algebraic Weyl
    /// tensors for the given scale.
    EinsteinDim {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        sigma: String,
    },
    /// Average a conformal Killing object into an exact Killing object of
    /// an Einstein scale.
    NewKilling {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sigma: String,
        /// Expected tensor rank of the input: 1 or 2.
        #[arg(long, default_value_t = 1)]
        rank: u8,
    },
}

/// Entry point used by the binary: parse, run, print, exit code.
pub fn main() -> i32 {
    configure_threads();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Text => print!("{}", report.render_text()),
                Format::Json => match serde_json::to_string_pretty(&report) {
                    Ok(json) => println!("{json}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return 2;
                    }
                },
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

/// Cap the worker pool from TRACTORLAB_THREADS (suites run in parallel;
/// report assembly stays serialized and deterministic).
fn configure_threads() {
    if let Ok(raw) = std::env::var("TRACTORLAB_THREADS") {
        if let Ok(threads) = raw.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
}

fn load_field(path: &Path) -> Result<WeightedTensorField> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// A scale argument is either a path to ScaleSpec JSON or an inline
/// polynomial in x1..xn.
fn load_scale(arg: &str, n: usize) -> Result<ScaleSpec> {
    let path = Path::new(arg);
    if path.exists() {
        let spec: ScaleSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
        if spec.n() != n {
            return Err(Error::NvarsMismatch {
                expected: n,
                got: spec.n(),
            });
        }
        return Ok(spec);
    }
    let sigma = Scalar::from_poly(parse_poly(arg, n)?);
    ScaleSpec::from_sigma(sigma)
}

fn check_line(name: &str, pass: bool, detail: String) -> IdentityOutcome {
    IdentityOutcome {
        name: name.into(),
        status: if pass {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        cases: 1,
        skipped: 0,
        detail,
    }
}

fn run(cli: &Cli) -> Result<RunReport> {
    let mut report = match &cli.command {
        Command::Verify {
            n,
            suite,
            trials,
            seed,
        } => cmd_verify(*n, suite, *trials, *seed)?,
        Command::CktBasis { n, rank, degree } => cmd_basis(*n, *rank, *degree)?,
        Command::Prolong {
            input,
            level,
            sigma,
        } => cmd_prolong(input, level, sigma.as_deref())?,
        Command::CheckScale { input, sigma, mode } => cmd_check_scale(input, sigma, mode)?,
        Command::EinsteinDim { n, sigma } => cmd_einstein_dim(*n, sigma)?,
        Command::NewKilling { input, sigma, rank } => cmd_new_killing(input, sigma, *rank)?,
    };
    if let Some(path) = &cli.out {
        let artifact = match &report.payload {
            Some(payload) => serde_json::to_string_pretty(payload)?,
            None => serde_json::to_string_pretty(&report)?,
        };
        fs::write(path, artifact + "\n")?;
        report.artifact = Some(path.display().to_string());
    }
    Ok(report)
}

fn cmd_verify(n: usize, suite: &str, trials: usize, seed: u64) -> Result<RunReport> {
    let select = SuiteSelect::parse(suite)?;
    let mut report = RunReport::new(format!("verify --suite {suite}"));
    report.n = Some(n);
    report.seed = Some(seed);
    report.push_checks(verify_suites(n, select, trials, seed)?);
    Ok(report)
}

fn cmd_basis(n: usize, rank: u8, degree: Option<u32>) -> Result<RunReport> {
    let basis = match rank {
        1 => solve::ckv_basis(n, degree.unwrap_or(2))?,
        2 => solve::ckt_basis(n, degree.unwrap_or(4))?,
        other => {
            return Err(Error::Schema(format!(
                "basis rank must be 1 or 2, got {other}"
            )));
        }
    };
    let expected = match rank {
        1 => (n + 1) * (n + 2) / 2,
        _ => {
            let big = n + 2;
            big * big * (big * big - 1) / 12 - big * (big + 1) / 2
        }
    };
    let mut report = RunReport::new(format!("ckt-basis --rank {rank}"));
    report.n = Some(n);
    report.push_check(check_line(
        "basis_dimension_matches_the_closed_formula",
        basis.dimension == expected,
        format!(
            "{}: dimension {} (expected {expected}), matrix {}x{}, rank {}",
            basis.label, basis.dimension, basis.matrix_rows, basis.matrix_cols, basis.rank
        ),
    ));
    report.set_payload(&basis)?;
    Ok(report)
}

fn cmd_prolong(input: &Path, level: &str, sigma: Option<&str>) -> Result<RunReport> {
    let level = ProlongationLevel::parse(level)?;
    let k = load_field(input)?;
    let scale = match sigma {
        Some(arg) => load_scale(arg, k.n())?,
        None => ScaleSpec::reference(k.n()),
    };
    let record = prolong::prolongation_record(&k, &scale, level)?;
    let mut report = RunReport::new(format!("prolong --level {level:?}").to_lowercase());
    report.n = Some(k.n());
    report.add_input("k", &k)?;
    report.add_input("scale", &scale)?;
    report.push_check(check_line(
        "half_prolongation_recovers_the_input",
        match record.rank {
            1 => prolong::top_slot_vector(&record.half)? == k,
            _ => prolong::top_slot_pair(&record.half)? == k,
        },
        "top slot of the half prolongation equals the input".into(),
    ));
    if let Some(full) = &record.full {
        report.push_check(check_line(
            "full_prolongation_is_parallel",
            full.is_parallel(),
            "the full prolongation is parallel for the tractor connection".into(),
        ));
    }
    if let (Some(full), Some(weyl)) = (&record.full, &record.weyl) {
        report.push_check(check_line(
            "weyl_form_round_trips",
            prolong::is_weyl_symmetric(weyl)? && prolong::from_weyl(weyl)? == *full,
            "the algebraic Weyl form has the curvature symmetries and inverts".into(),
        ));
    }
    report.set_payload(&record)?;
    Ok(report)
}

fn cmd_check_scale(input: &Path, sigma: &str, mode: &str) -> Result<RunReport> {
    let k = load_field(input)?;
    let scale = load_scale(sigma, k.n())?;
    let mut report = RunReport::new(format!("check-scale --mode {mode}"));
    report.n = Some(k.n());
    report.add_input("k", &k)?;
    report.add_input("scale", &scale)?;
    if k.rank() == 1 {
        let pass = killing::killing_scale_test_vector(&k, &scale)?;
        report.push_check(check_line(
            "scale_is_a_killing_scale_of_the_one_form",
            pass,
            if pass {
                "the scale tractor annihilates the half prolongation".into()
            } else {
                "the scale tractor contraction is nonzero".into()
            },
        ));
        report.set_payload(&serde_json::json!({ "killing_scale": pass }))?;
        return Ok(report);
    }
    let verdict = match mode {
        "sks" => killing::sks_test_tensor(&k, &scale)?,
        "ks" => killing::ks_test_tensor(&k, &scale)?,
        "einstein-ks" => killing::einstein_ks_kappa(&k, &scale)?,
        other => {
            return Err(Error::Parse(format!(
                "unknown mode {other:?}; expected sks, ks, or einstein-ks"
            )));
        }
    };
    let kind = format!("{:?}", verdict.kind).to_lowercase();
    report.push_check(IdentityOutcome {
        name: "killing_scale_verdict".into(),
        status: if verdict.passed() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        cases: 1,
        skipped: 0,
        detail: format!("verdict: {kind}"),
    });
    if mode == "einstein-ks" {
        let agree = killing::einstein_ks_test_k4(&k, &scale)?;
        report.push_check(check_line(
            "einstein_criteria_agree",
            agree == verdict.passed(),
            "curvature-form and potential-form criteria give one answer".into(),
        ));
    }
    report.set_payload(&verdict)?;
    Ok(report)
}

fn cmd_einstein_dim(n: usize, sigma: &str) -> Result<RunReport> {
    let scale = load_scale(sigma, n)?;
    let basis = solve::einstein_compatible_dim(n, &scale)?;
    let expected = n * (n + 1) * (n + 1) * (n + 2) / 12 - 1;
    let iperp = solve::iperp_riemann_dim(n, &scale)?;
    let mut report = RunReport::new("einstein-dim".to_string());
    report.n = Some(n);
    report.add_input("scale", &scale)?;
    report.push_check(check_line(
        "compatible_dimension_matches_the_closed_formula",
        basis.dimension == expected,
        format!("dimension {} (expected {expected})", basis.dimension),
    ));
    report.push_check(check_line(
        "orthogonal_curvature_space_exceeds_by_the_pure_trace_line",
        iperp == basis.dimension + 1,
        format!("annihilated curvature space has dimension {iperp}"),
    ));
    report.set_payload(&basis)?;
    Ok(report)
}

fn cmd_new_killing(input: &Path, sigma: &str, rank: u8) -> Result<RunReport> {
    let k = load_field(input)?;
    if usize::from(rank) != k.rank() {
        return Err(Error::Schema(format!(
            "requested rank {rank} but the input has rank {}",
            k.rank()
        )));
    }
    let scale = load_scale(sigma, k.n())?;
    let mut report = RunReport::new(format!("new-killing --rank {rank}"));
    report.n = Some(k.n());
    report.add_input("k", &k)?;
    report.add_input("scale", &scale)?;
    let out = match rank {
        1 => killing::new_killing_vector(&k, &scale)?,
        2 => killing::new_killing_tensor(&k, &scale)?,
        other => {
            return Err(Error::Schema(format!(
                "rank must be 1 or 2, got {other}"
            )));
        }
    };
    let killing_ok = scale
        .covderiv(&out)
        .symmetrize(&(0..=out.rank()).collect::<Vec<_>>())?
        .is_zero();
    report.push_check(check_line(
        "output_satisfies_the_killing_equation",
        killing_ok,
        "the symmetrized covariant derivative vanishes exactly".into(),
    ));
    report.set_payload(&out)?;
    Ok(report)
}
