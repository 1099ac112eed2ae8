use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ncfr::io::{self, CertificateJson, KernelJson, PolyJson};
use ncfr::kernels::{self, ExtendTarget};
use ncfr::linalg;
use ncfr::repsys::{self, evaluate, trial_seed};
use ncfr::soscert::{self, CertifyOptions, CertifyOutcome, SolverOptions};
use ncfr::words::Word;
use ncfr::Error;
use serde::Serialize;

mod reproduce;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("NCFR_BUILD_HASH"), ")");

/// Exit codes: 0 success, 2 a mathematical negative (not psd, no
/// certificate, failed verification), 1 usage or I/O errors.
#[derive(Parser, Debug)]
#[command(name = "ncfr", version = VERSION, about = "Psd kernel completion and sums-of-squares certificates on words")]
struct Cli {
    /// Worker threads for sampling; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, env = "NCFR_SEED", default_value_t = 0)]
    seed: u64,

    /// Progress on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extend a psd partial kernel through successive shortlex words.
    Complete {
        #[arg(long = "in")]
        input: PathBuf,
        /// Number of successor steps.
        #[arg(long, group = "target")]
        steps: Option<usize>,
        /// Extend until this word is covered (comma-separated letters, `e` for empty).
        #[arg(long, value_parser = parse_word, group = "target")]
        to_word: Option<Word>,
        /// Extend until every word of this length is covered.
        #[arg(long, group = "target")]
        to_length: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for A = B*B with a Gram matrix, raising the Y degree up to a cap.
    Factor {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_ydeg: usize,
        /// Relative eigenvalue cutoff when factoring the Gram matrix.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// W degree of the factor; defaults to the W degree of the input.
        #[arg(long, value_parser = parse_word)]
        w_degree: Option<Word>,
        /// First Y degree to try; defaults to the Y degree of the input.
        #[arg(long)]
        min_ydeg: Option<usize>,
        #[arg(long, default_value_t = 50_000)]
        max_iter: usize,
        /// Pick the Gram matrix maximizing the constant block.
        #[arg(long)]
        extremal: bool,
        /// Representations in the post-solve spot check.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recheck a certificate against its polynomial.
    Verify {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        /// Bound on the coefficient residual of A − B*B.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Bound on the spectral norm of A(π) − B(π)*B(π).
        #[arg(long, default_value_t = 1e-6)]
        eval_tol: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 6)]
        max_dim: usize,
    },
    /// Least eigenvalue of A(π) over sampled representations.
    Sample {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Largest representation dimension.
        #[arg(long, default_value_t = 6)]
        dim: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a worked example and compare with its known values.
    Gallery {
        example: Example,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Example {
    Z3z2,
    Z3z3,
    Toeplitz2,
    Chsh,
    Separation,
}

fn parse_word(s: &str) -> std::result::Result<Word, String> {
    let s = s.trim();
    if s.is_empty() || s == "e" {
        return Ok(Word::empty());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| format!("bad letter {t:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Word::from_letters)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    io::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = io::to_json_string(value)?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct Failure<'a> {
    status: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_eig: Option<f64>,
}

fn negative(status: &str, message: String, min_eig: Option<f64>) -> Result<u8> {
    eprintln!("ncfr: {message}");
    emit(&Failure { status, message, min_eig }, None)?;
    Ok(2)
}

enum Target {
    Steps(usize),
    Extend(ExtendTarget),
}

fn complete(input: &Path, target: Target, max_steps: usize, tol: f64, out: Option<&Path>, verbose: bool) -> Result<u8> {
    let kernel = read_json::<KernelJson>(input)?.to_kernel()?;
    let (psd, min_eig) = kernels::is_psd(&kernel.assemble()?, tol)?;
    if !psd {
        return negative(
            "not_psd",
            format!("input kernel is not psd (minimum eigenvalue {min_eig:.3e})"),
            Some(min_eig),
        );
    }
    let target = match target {
        Target::Extend(t) => t,
        Target::Steps(n) => {
            let mut w = kernel.w_max().clone();
            for _ in 0..n {
                w = kernel.spec().successor(&w)?;
            }
            ExtendTarget::Word(w)
        }
    };
    let mut failure = None;
    let result = kernels::extend_to_with(&kernel, &target, max_steps, tol, |k| {
        if !verbose || failure.is_some() {
            return;
        }
        match k.assemble() {
            Ok(form) => {
                eprintln!("extended to {}: min eigenvalue {:.3e}", k.w_max(), linalg::min_eigenvalue(&form.matrix))
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    let extended = match result {
        Ok(k) => k,
        Err(Error::NotPsd { min_eig }) => {
            return negative(
                "not_psd",
                format!("extension lost positivity (minimum eigenvalue {min_eig:.3e})"),
                Some(min_eig),
            )
        }
        Err(e) => return Err(e.into()),
    };
    emit(&KernelJson::from_kernel(&extended), out)?;
    Ok(0)
}

// Largest ‖A(π) − B(π)*B(π)‖₂ over sampled representations.
fn sampled_residual(
    a: &soscert::NcPoly,
    b: &soscert::NcPoly,
    samples: usize,
    max_dim: usize,
    seed: u64,
) -> Result<f64> {
    use rayon::prelude::*;
    let worst = (0..samples)
        .into_par_iter()
        .map(|i| -> ncfr::Result<f64> {
            let rep = repsys::sample_representation(a.spec(), 1 + i % max_dim, trial_seed(seed, i as u64))?;
            let vb = evaluate(b, &rep)?;
            Ok(linalg::spectral_norm(&(evaluate(a, &rep)? - vb.adjoint() * vb)))
        })
        .collect::<ncfr::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(worst)
}

#[derive(Serialize)]
struct NotFoundJson {
    status: &'static str,
    levels: Vec<LevelJson>,
}

#[derive(Serialize)]
struct LevelJson {
    y_degree: usize,
    iterations: usize,
    psd_residual: f64,
    affine_residual: f64,
}

#[allow(clippy::too_many_arguments)]
fn factor(
    input: &Path,
    max_ydeg: usize,
    tol: f64,
    w_degree: Option<Word>,
    min_ydeg: Option<usize>,
    max_iter: usize,
    extremal: bool,
    samples: usize,
    seed: u64,
    out: Option<&Path>,
    verbose: bool,
) -> Result<u8> {
    let a = read_json::<PolyJson>(input)?.to_poly()?;
    let (w, m) = a.bidegree();
    let w = w_degree.unwrap_or(w);
    let start = min_ydeg.unwrap_or(m);
    let opts = CertifyOptions {
        max_m_prime: max_ydeg,
        rank_tol: tol,
        solver: SolverOptions { max_iter, extremal, ..Default::default() },
    };
    if verbose {
        eprintln!("searching W degree {w}, Y degrees {start}..={}", max_ydeg.max(start));
    }
    match soscert::certify_at(&a, &w, start, &opts)? {
        CertifyOutcome::Certified(cert) => {
            let spot = if samples > 0 { sampled_residual(&a, &cert.factor()?, samples, 6, seed)? } else { 0.0 };
            if verbose {
                eprintln!(
                    "certified at Y degree {}: residual {:.3e}, sampled residual {spot:.3e}",
                    cert.m_prime, cert.residual
                );
            }
            emit(&CertificateJson::from_certificate(&cert), out)?;
            if spot > 1e-6 {
                eprintln!("ncfr: sampled residual {spot:.3e} exceeds 1e-6");
                return Ok(2);
            }
            Ok(0)
        }
        CertifyOutcome::NotFound(levels) => {
            eprintln!("ncfr: no certificate up to Y degree {} (inconclusive)", max_ydeg.max(start));
            let levels = levels
                .into_iter()
                .map(|l| LevelJson {
                    y_degree: l.m_prime,
                    iterations: l.iterations,
                    psd_residual: l.psd_residual,
                    affine_residual: l.affine_residual,
                })
                .collect();
            emit(&NotFoundJson { status: "not_found", levels }, out)?;
            Ok(2)
        }
    }
}

#[derive(Serialize)]
struct VerifyJson {
    passed: bool,
    symbolic_residual: f64,
    sampled_residual: f64,
    samples: usize,
    seed: u64,
}

#[allow(clippy::too_many_arguments)]
fn verify(poly: &Path, cert: &Path, tol: f64, eval_tol: f64, samples: usize, max_dim: usize, seed: u64) -> Result<u8> {
    let a = read_json::<PolyJson>(poly)?.to_poly()?;
    let cert: CertificateJson = read_json(cert)?;
    if &cert.group != a.spec() {
        bail!("certificate and polynomial use different groups");
    }
    let b = cert.factor()?;
    let symbolic = soscert::symbolic_residual(&a, &b)?;
    let sampled = sampled_residual(&a, &b, samples, max_dim, seed)?;
    let passed = symbolic <= tol && sampled <= eval_tol;
    emit(&VerifyJson { passed, symbolic_residual: symbolic, sampled_residual: sampled, samples, seed }, None)?;
    Ok(if passed { 0 } else { 2 })
}

#[derive(Serialize)]
struct SampleJson {
    min_eig: f64,
    argmin_trial: usize,
    trials: usize,
    max_dim: usize,
    seed: u64,
    psd_on_samples: bool,
}

fn sample(poly: &Path, trials: usize, dim: usize, tol: f64, seed: u64, out: Option<&Path>) -> Result<u8> {
    let a = read_json::<PolyJson>(poly)?.to_poly()?;
    if !a.is_hermitian(1e-12) {
        bail!("polynomial is not Hermitian");
    }
    let bound = repsys::sampled_lower_bound(&a, trials, dim, seed)?;
    let psd = bound.min_eig >= -tol;
    emit(
        &SampleJson {
            min_eig: bound.min_eig,
            argmin_trial: bound.argmin_trial,
            trials,
            max_dim: dim,
            seed,
            psd_on_samples: psd,
        },
        out,
    )?;
    Ok(if psd { 0 } else { 2 })
}

fn gallery(example: Example, json: Option<&Path>, seed: u64) -> Result<u8> {
    let result = match example {
        Example::Z3z2 => reproduce::z3z2()?,
        Example::Z3z3 => reproduce::z3z3()?,
        Example::Toeplitz2 => reproduce::toeplitz2()?,
        Example::Chsh => reproduce::chsh(seed)?,
        Example::Separation => reproduce::separation(seed)?,
    };
    for c in &result.checks {
        eprintln!("{} {}: {:.6e} (expected {})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.expected);
    }
    emit(&result, json)?;
    Ok(if result.reproduced { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Complete { input, steps, to_word, to_length, max_steps, tol, out } => {
            let target = match (steps, to_word, to_length) {
                (Some(n), _, _) => Target::Steps(n),
                (_, Some(w), _) => Target::Extend(ExtendTarget::Word(w)),
                (_, _, Some(n)) => Target::Extend(ExtendTarget::Length(n)),
                _ => bail!("give --steps, --to-word or --to-length"),
            };
            complete(&input, target, max_steps, tol, out.as_deref(), cli.verbose)
        }
        Command::Factor { input, max_ydeg, tol, w_degree, min_ydeg, max_iter, extremal, samples, out } => factor(
            &input,
            max_ydeg,
            tol,
            w_degree,
            min_ydeg,
            max_iter,
            extremal,
            samples,
            seed,
            out.as_deref(),
            cli.verbose,
        ),
        Command::Verify { poly, cert, tol, eval_tol, samples, max_dim } => {
            verify(&poly, &cert, tol, eval_tol, samples, max_dim, seed)
        }
        Command::Sample { poly, trials, dim, tol, out } => sample(&poly, trials, dim, tol, seed, out.as_deref()),
        Command::Gallery { example, json } => gallery(example, json.as_deref(), seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ncfr: {e:#}");
            ExitCode::from(1)
        }
    }
}
