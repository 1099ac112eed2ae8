use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ncfr::gallery;
use ncfr::io::{self, CertificateJson, KernelJson, PolyJson};
use ncfr::kernels;
use ncfr::words::{GroupSpec, Word};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn ncfr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncfr")).args(args).env_remove("NCFR_SEED").output().expect("spawn ncfr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn write<T: serde::Serialize>(dir: &TempDir, name: &str, value: &T) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, io::to_json_string(value).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_kernel(seed: u64) -> KernelJson {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = GroupSpec::free_semigroup(2);
    let k = kernels::random_psd_kernel(&spec, 1, &Word::from_letters(vec![2]), 2, 3, &mut rng).unwrap();
    KernelJson::from_kernel(&k)
}

#[test]
fn gallery_chsh_reproduces() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("chsh.json");
    let out = ncfr(&["gallery", "chsh", "--json", s(&json)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["reproduced"], Value::Bool(true));
    let cert: CertificateJson = serde_json::from_value(v["report"]["certificate"].clone()).unwrap();
    assert!(cert.residual <= 1e-7);
    assert_eq!(cert.y_degree, 1);
}

#[test]
fn every_gallery_example_reproduces() {
    for ex in ["z3z2", "z3z3", "toeplitz2", "separation"] {
        let out = ncfr(&["gallery", ex]);
        assert_eq!(code(&out), 0, "{ex}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout_json(&out)["reproduced"], Value::Bool(true), "{ex}");
    }
}

#[test]
fn complete_rejects_a_kernel_that_is_not_psd() {
    let dir = TempDir::new().unwrap();
    let mut kj = random_kernel(3);
    for e in &mut kj.entries {
        if e.den.is_empty() && e.num.is_empty() {
            e.re = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
            e.im = vec![vec![0.0; 2]; 2];
        }
    }
    let path = write(&dir, "bad.json", &kj);
    let out = ncfr(&["complete", "--in", s(&path), "--steps", "2"]);
    assert_eq!(code(&out), 2);
    let v = stdout_json(&out);
    assert_eq!(v["status"], "not_psd");
    assert!(v["min_eig"].as_f64().unwrap() < 0.0);
}

#[test]
fn complete_output_is_a_kernel_that_extends_the_input() {
    let dir = TempDir::new().unwrap();
    let input = random_kernel(11);
    let path = write(&dir, "k.json", &input);
    let ext = dir.path().join("ext.json");
    let out = ncfr(&["complete", "--in", s(&path), "--steps", "4", "--out", s(&ext)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&ext).unwrap();
    let back: KernelJson = io::from_json_str(&text).unwrap();
    assert_eq!(io::to_json_string(&back).unwrap(), text);
    let extended = back.to_kernel().unwrap();
    assert_eq!(extended.w_max(), &Word::from_letters(vec![2, 2]));
    let original = input.to_kernel().unwrap();
    assert_eq!(extended.restrict(original.w_max()).unwrap(), original);
    let (psd, _) = kernels::is_psd(&extended.assemble().unwrap(), 1e-8).unwrap();
    assert!(psd);
}

#[test]
fn factor_then_verify_and_tampering_is_caught() {
    let dir = TempDir::new().unwrap();
    let poly = write(&dir, "chsh.json", &PolyJson::from_poly(&gallery::chsh_target()));
    let cert = dir.path().join("cert.json");
    let out = ncfr(&["factor", "--in", s(&poly), "--max-ydeg", "2", "--out", s(&cert)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = ncfr(&["verify", "--poly", s(&poly), "--cert", s(&cert)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["passed"], Value::Bool(true));

    let mut cj: CertificateJson = io::from_json_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    cj.b_terms[0].re[0][0] += 1e-3;
    let tampered = write(&dir, "tampered.json", &cj);
    let out = ncfr(&["verify", "--poly", s(&poly), "--cert", s(&tampered)]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["passed"], Value::Bool(false));
}

#[test]
fn sample_flags_a_negative_polynomial() {
    let dir = TempDir::new().unwrap();
    let target = gallery::chsh_target();
    let shifted =
        target.sub(&ncfr::soscert::NcPoly::identity(target.spec().clone(), 1).scale(ncfr::linalg::cr(2.0))).unwrap();
    let ok = write(&dir, "ok.json", &PolyJson::from_poly(&target));
    let bad = write(&dir, "bad.json", &PolyJson::from_poly(&shifted));
    assert_eq!(code(&ncfr(&["sample", "--poly", s(&ok), "--trials", "100", "--dim", "4"])), 0);
    let out = ncfr(&["sample", "--poly", s(&bad), "--trials", "300", "--dim", "4"]);
    assert_eq!(code(&out), 2);
    assert!(stdout_json(&out)["min_eig"].as_f64().unwrap() < 0.0);
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let poly = write(&dir, "chsh.json", &PolyJson::from_poly(&gallery::chsh_target()));
    let run = |threads: &str| {
        ncfr(&["--threads", threads, "sample", "--poly", s(&poly), "--trials", "64", "--seed", "9"]).stdout
    };
    let first = run("1");
    assert_eq!(first, run("1"));
    assert_eq!(first, run("4"));
    let a = ncfr(&["factor", "--in", s(&poly), "--max-ydeg", "2"]).stdout;
    assert_eq!(a, ncfr(&["factor", "--in", s(&poly), "--max-ydeg", "2"]).stdout);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let poly = write(&dir, "chsh.json", &PolyJson::from_poly(&gallery::chsh_target()));
    let out = Command::new(env!("CARGO_BIN_EXE_ncfr"))
        .args(["sample", "--poly", s(&poly), "--trials", "8"])
        .env("NCFR_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(stdout_json(&out)["seed"], 77);
    let flag = ncfr(&["sample", "--poly", s(&poly), "--trials", "8", "--seed", "77"]);
    assert_eq!(out.stdout, flag.stdout);
}

#[test]
fn usage_and_schema_errors_exit_one() {
    assert_eq!(code(&ncfr(&["frobnicate"])), 1);
    assert_eq!(code(&ncfr(&["sample", "--no-such-flag"])), 1);

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"group": {"w": {"family": "free_product_cyclic", "rank": 2}}, "K": 1, "terms": [{"re": [[1.0]], "im": [[true]]}]}"#)
        .unwrap();
    let out = ncfr(&["sample", "--poly", s(&path)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("terms[0].im"));

    assert_eq!(code(&ncfr(&["sample", "--poly", s(&dir.path().join("missing.json"))])), 1);
}

#[test]
fn version_names_the_build() {
    let out = ncfr(&["--version"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(env!("CARGO_PKG_VERSION")));
    assert!(text.contains('('));
    assert_eq!(code(&ncfr(&["--help"])), 0);
}
