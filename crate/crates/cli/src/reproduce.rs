//! `ncfr gallery`: rerun an example and compare against its known values.

use anyhow::Result;
use ncfr::gallery::{self, Conclusion, CounterexampleReport, SeparationOptions, SeparationOutcome};
use ncfr::io::{ChshJson, CounterexampleJson, SeparationJson};
use ncfr::kernels::PartialKernel;
use ncfr::words::Word;
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub passed: bool,
}

fn near(name: &str, value: f64, target: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        value,
        expected: format!("{target:.16e} ± {tol:.0e}"),
        passed: (value - target).abs() <= tol,
    }
}

fn at_least(name: &str, value: f64, bound: f64) -> Check {
    Check { name: name.into(), value, expected: format!(">= {bound:.0e}"), passed: value >= bound }
}

fn at_most(name: &str, value: f64, bound: f64) -> Check {
    Check { name: name.into(), value, expected: format!("<= {bound:.0e}"), passed: value <= bound }
}

fn concludes_no_completion(r: &CounterexampleReport) -> Check {
    Check {
        name: format!("{} conclusion", r.name),
        value: r.forced_min_eig,
        expected: "no_psd_completion_exists".into(),
        passed: r.conclusion == Conclusion::NoPsdCompletionExists,
    }
}

#[derive(Serialize)]
pub struct GalleryOutput {
    pub example: String,
    pub reproduced: bool,
    pub checks: Vec<Check>,
    pub report: Value,
}

fn output(example: &str, checks: Vec<Check>, report: Value) -> GalleryOutput {
    GalleryOutput { example: example.into(), reproduced: checks.iter().all(|c| c.passed), checks, report }
}

pub fn z3z2() -> Result<GalleryOutput> {
    let r = gallery::z3z2_counterexample()?;
    let checks = vec![
        near("base min eigenvalue", r.base_min_eig, 0.0, 1e-10),
        near("forced determinant", r.forced_det, -25.0 / 27.0, 1e-12),
        concludes_no_completion(&r),
    ];
    Ok(output("z3z2", checks, serde_json::to_value(CounterexampleJson::from_report(&r))?))
}

pub fn z3z3() -> Result<GalleryOutput> {
    let r = gallery::z3z3_counterexample()?;
    let s = 0.5_f64.sqrt();
    let checks = vec![
        near("base min eigenvalue", r.base_min_eig, 0.0, 1e-10),
        near("forced determinant", r.forced_det, (1.0 + s).powi(2) * (1.0 - 2.0_f64.sqrt()), 1e-12),
        concludes_no_completion(&r),
    ];
    Ok(output("z3z3", checks, serde_json::to_value(CounterexampleJson::from_report(&r))?))
}

pub fn toeplitz2() -> Result<GalleryOutput> {
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for base in [7, 6] {
        let r = gallery::toeplitz2d_report(base)?;
        checks.push(at_least(&format!("{} base min eigenvalue", r.name), r.base_min_eig, -1e-12));
        checks.push(near(
            &format!("{} forced min eigenvalue", r.name),
            r.forced_min_eig,
            gallery::TOEPLITZ_FORCED_MIN_EIG,
            1e-12,
        ));
        checks.push(concludes_no_completion(&r));
        reports.push(CounterexampleJson::from_report(&r));
    }
    Ok(output("toeplitz2", checks, serde_json::to_value(reports)?))
}

pub fn chsh(seed: u64) -> Result<GalleryOutput> {
    let r = gallery::chsh_report(500, 8, seed)?;
    let checks = vec![
        at_most("certificate residual", r.certificate.residual, 1e-7),
        at_most("closed-form residual", r.closed_form_residual, 1e-14),
        near("closed-form Gram rank", r.closed_form_rank as f64, 2.0, 0.0),
        at_least("sampled min eigenvalue", r.sampled.min_eig, -1e-7),
        near("Tsirelson min eigenvalue", r.tsirelson_min_eig, 0.0, 1e-10),
    ];
    Ok(output("chsh", checks, serde_json::to_value(ChshJson::from_report(&r))?))
}

pub fn separation(seed: u64) -> Result<GalleryOutput> {
    let tau = gallery::z3z2_kernel()?;
    let level = Word::from_letters(vec![2]);
    let opts =
        SeparationOptions { seed, corroborate: Some((Word::from_letters(vec![1, 1]), 1e-3)), ..Default::default() };
    let found = gallery::separation_search(&tau, &level, &opts)?;
    let control =
        gallery::separation_search(&PartialKernel::delta(tau.spec().clone(), level.clone(), 1)?, &level, &opts)?;
    let mut checks = Vec::new();
    match &found {
        SeparationOutcome::Found(s) => {
            checks.push(at_most("pairing with tau", s.pairing, -opts.delta));
            checks.push(at_least("sampled min eigenvalue", s.sampled_min_eig, -1e-9));
            checks.push(at_least("representations checked", s.representations_checked as f64, 200.0));
        }
        SeparationOutcome::NotFound { best_pairing, .. } => checks.push(Check {
            name: "separator found".into(),
            value: best_pairing.unwrap_or(f64::NAN),
            expected: format!("pairing <= {:.0e}", -opts.delta),
            passed: false,
        }),
    }
    checks.push(Check {
        name: "delta-kernel control finds nothing".into(),
        value: match &control {
            SeparationOutcome::Found(s) => s.pairing,
            SeparationOutcome::NotFound { best_pairing, .. } => best_pairing.unwrap_or(f64::NAN),
        },
        expected: "not found".into(),
        passed: matches!(control, SeparationOutcome::NotFound { .. }),
    });
    let report = serde_json::json!({
        "tau": SeparationJson::from_outcome(&found),
        "delta_control": SeparationJson::from_outcome(&control),
    });
    Ok(output("separation", checks, report))
}
