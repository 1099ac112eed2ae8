//! The worked examples: three partial kernels that are psd but have no psd
//! extension, the CHSH certificate, and a sampled separation search that
//! turns a non-extendable kernel into a positive polynomial that pairs
//! negatively with it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::PartialKernel;
use crate::linalg::{self, c, cr, CMat, C64};
use crate::repsys::{self, evaluate, trial_seed, Representation, SampleBound};
use crate::soscert::{self, certify_at, CertifyOptions, CertifyOutcome, GramCertificate, NcPoly};
use crate::words::{Element, GroupSpec, LeftFraction, Monomial, ProductElement, ProductSpec, Word};

/// Entries below this are treated as zero when deciding the conclusion.
pub const REPORT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    NoPsdCompletionExists,
    PsdCompletionExists,
}

/// Smallest eigenvalue of the full extension with every free entry set to `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub z: C64,
    pub min_eig: f64,
}

#[derive(Clone, Debug)]
pub struct CounterexampleReport {
    pub name: String,
    pub base_labels: Vec<String>,
    pub base_matrix: CMat,
    pub base_min_eig: f64,
    pub extended_labels: Vec<String>,
    /// Index values of the extension that the base does not determine.
    pub free_entries: Vec<String>,
    pub forced_labels: Vec<String>,
    pub forced_matrix: CMat,
    pub forced_det: f64,
    pub forced_min_eig: f64,
    pub z_scan: Vec<ScanPoint>,
    pub conclusion: Conclusion,
    /// The base as a kernel on left fractions, when it is one.
    pub kernel: Option<PartialKernel>,
}

/// `{0, ±1/2, ±1, ±i}`.
pub fn z_grid() -> Vec<C64> {
    vec![cr(0.0), cr(0.5), cr(-0.5), cr(1.0), cr(-1.0), c(0.0, 1.0), c(0.0, -1.0)]
}

// An index pattern: `keys[i][j]` names the value sitting at `(i, j)`.
struct Pattern<K> {
    labels: Vec<String>,
    keys: Vec<Vec<K>>,
}

impl<K: Ord + Clone + Display> Pattern<K> {
    fn matrix(&self, idx: &[usize], value: impl Fn(&K) -> Option<C64>) -> Result<CMat> {
        let mut m = CMat::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                let key = &self.keys[i][j];
                m[(a, b)] = value(key).ok_or_else(|| Error::MissingEntry(key.to_string()))?;
            }
        }
        Ok(m)
    }
}

fn analyze<K: Ord + Clone + Display>(
    name: &str,
    pattern: &Pattern<K>,
    base: usize,
    known: &BTreeMap<K, C64>,
    forced: &[usize],
) -> Result<CounterexampleReport> {
    let n = pattern.labels.len();
    let base_idx: Vec<usize> = (0..base).collect();
    let base_matrix = pattern.matrix(&base_idx, |k| known.get(k).copied())?;
    let forced_matrix = pattern
        .matrix(forced, |k| known.get(k).copied())
        .map_err(|e| Error::Inconsistent(format!("forced block touches a free entry: {e}")))?;

    // Each free key gets z and its transpose partner z̄; a key equal to its
    // own partner only takes Re z.
    let mut partner: BTreeMap<K, K> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if !known.contains_key(&pattern.keys[i][j]) {
                partner.insert(pattern.keys[i][j].clone(), pattern.keys[j][i].clone());
            }
        }
    }
    let free: BTreeSet<K> = partner.iter().map(|(k, p)| k.min(p).clone()).collect();
    let all: Vec<usize> = (0..n).collect();
    let z_scan = z_grid()
        .into_iter()
        .map(|z| -> Result<ScanPoint> {
            let m = pattern.matrix(&all, |k| {
                known.get(k).copied().or_else(|| {
                    let p = &partner[k];
                    Some(if k == p {
                        cr(z.re)
                    } else if free.contains(k) {
                        z
                    } else {
                        z.conj()
                    })
                })
            })?;
            Ok(ScanPoint { z, min_eig: linalg::min_eigenvalue(&m) })
        })
        .collect::<Result<_>>()?;

    let forced_min_eig = linalg::min_eigenvalue(&forced_matrix);
    Ok(CounterexampleReport {
        name: name.to_string(),
        base_labels: pattern.labels[..base].to_vec(),
        base_min_eig: linalg::min_eigenvalue(&base_matrix),
        base_matrix,
        extended_labels: pattern.labels.clone(),
        free_entries: free.iter().map(|k| k.to_string()).collect(),
        forced_labels: forced.iter().map(|&i| pattern.labels[i].clone()).collect(),
        forced_det: forced_matrix.determinant().re,
        forced_matrix,
        forced_min_eig,
        z_scan,
        conclusion: if forced_min_eig < -REPORT_TOL {
            Conclusion::NoPsdCompletionExists
        } else {
            Conclusion::PsdCompletionExists
        },
        kernel: None,
    })
}

/// Report for a scalar kernel on `Her W_{≤w}` of a group, extended one
/// shortlex step; `forced` lists the words spanning the forced block.
pub fn kernel_counterexample(name: &str, tau: &PartialKernel, forced: &[Word]) -> Result<CounterexampleReport> {
    if tau.k() != 1 || tau.g_order() != 1 {
        return Err(Error::Unsupported("counterexample reports take scalar kernels".into()));
    }
    let spec = tau.spec();
    let s = spec.successor(tau.w_max())?;
    let words = spec.enumerate_upto(&s)?;
    let keys = words
        .iter()
        .map(|u| words.iter().map(|v| spec.fraction(u, v)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let pattern = Pattern { labels: words.iter().map(Word::to_string).collect(), keys };
    let known: BTreeMap<LeftFraction, C64> = tau.entries().iter().map(|(f, v)| (f.clone(), v[0][(0, 0)])).collect();
    let forced_idx = forced
        .iter()
        .map(|w| {
            words.iter().position(|u| u == w).ok_or_else(|| Error::InvalidInput(format!("{w} is not in W_(<= {s})")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = analyze(name, &pattern, words.len() - 1, &known, &forced_idx)?;
    report.kernel = Some(tau.clone());
    Ok(report)
}

fn scalar_kernel(spec: GroupSpec, w_max: Word, values: &[(&[u32], f64)]) -> Result<PartialKernel> {
    let table: BTreeMap<Word, f64> =
        values.iter().map(|(l, v)| spec.reduce(l).map(|w| (w, *v))).collect::<Result<_>>()?;
    let domain = spec.left_fraction_set(&w_max)?;
    if let Some(f) = domain.iter().find(|f| !table.contains_key(&f.num)) {
        return Err(Error::MissingEntry(f.to_string()));
    }
    PartialKernel::from_fn(spec, 1, w_max, 1, |f, _| linalg::from_real_rows(&[vec![table[&f.num]]]))
}

fn word(letters: &[u32]) -> Word {
    Word::from_letters(letters.to_vec())
}

/// `τ` on `Her W_{≤x₂}` in `Z₃ * Z₂`.
pub fn z3z2_kernel() -> Result<PartialKernel> {
    let a = -2.0 / 3.0;
    scalar_kernel(
        GroupSpec::FreeProductCyclic { orders: vec![3, 2] },
        word(&[2]),
        &[(&[], 1.0), (&[1], a), (&[1, 1], a), (&[1, 1, 2], a), (&[2, 1], a), (&[2], 1.0)],
    )
}

pub fn z3z2_counterexample() -> Result<CounterexampleReport> {
    kernel_counterexample("z3z2", &z3z2_kernel()?, &[word(&[]), word(&[1]), word(&[1, 1])])
}

/// `τ` on `Her W_{≤x₂}` in `Z₃ * Z₃`, with the signs of the displayed matrix.
pub fn z3z3_kernel() -> Result<PartialKernel> {
    let s = 0.5_f64.sqrt();
    scalar_kernel(
        GroupSpec::FreeProductCyclic { orders: vec![3, 3] },
        word(&[2]),
        &[(&[], 1.0), (&[1], -s), (&[1, 1], -s), (&[2], -s), (&[2, 2], -s), (&[1, 1, 2], 0.0), (&[2, 2, 1], 0.0)],
    )
}

pub fn z3z3_counterexample() -> Result<CounterexampleReport> {
    kernel_counterexample("z3z3", &z3z3_kernel()?, &[word(&[]), word(&[1]), word(&[1, 1])])
}

/// Least eigenvalue of the forced lower 7×7 block of the Toeplitz example,
/// frozen from the eigensolve. The 6-monomial base forces the same block.
pub const TOEPLITZ_FORCED_MIN_EIG: f64 = -0.144_122_805_635_368_7;

/// Exponents of `1, α, β, α², αβ, β², α²β, αβ²`.
pub const TOEPLITZ_MONOMIALS: [[i64; 2]; 8] = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2], [2, 1], [1, 2]];

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Shift([i64; 2]);

impl Display for Shift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [a, b] = self.0;
        write!(f, "a^{a}b^{b}")
    }
}

fn toeplitz_label(e: [i64; 2]) -> String {
    let part = |name: &str, p: i64| match p {
        0 => String::new(),
        1 => name.to_string(),
        _ => format!("{name}^{p}"),
    };
    let s = format!("{}{}", part("a", e[0]), part("b", e[1]));
    if s.is_empty() {
        "1".into()
    } else {
        s
    }
}

/// The symbol `c` with `c(αβ) = c(β²) = 1/√2`, `c(0) = 1`, zero elsewhere.
pub fn toeplitz_symbol(d: [i64; 2]) -> f64 {
    let s = 0.5_f64.sqrt();
    match d {
        [0, 0] => 1.0,
        [1, 1] | [-1, -1] | [0, 2] | [0, -2] => s,
        _ => 0.0,
    }
}

/// Two-variable Toeplitz example; `base` is 7 or 6 monomials.
pub fn toeplitz2d_report(base: usize) -> Result<CounterexampleReport> {
    if !(1..=7).contains(&base) {
        return Err(Error::InvalidInput("the base uses between 1 and 7 monomials".into()));
    }
    let mono = TOEPLITZ_MONOMIALS;
    let keys = mono.iter().map(|u| mono.iter().map(|v| Shift([v[0] - u[0], v[1] - u[1]])).collect()).collect();
    let pattern = Pattern { labels: mono.iter().map(|&m| toeplitz_label(m)).collect(), keys };
    let mut known = BTreeMap::new();
    for u in &mono[..base] {
        for v in &mono[..base] {
            let d = [v[0] - u[0], v[1] - u[1]];
            known.insert(Shift(d), cr(toeplitz_symbol(d)));
        }
    }
    let forced: Vec<usize> = (1..mono.len()).collect();
    analyze(&format!("toeplitz2d_{base}"), &pattern, base, &known, &forced)
}

pub fn toeplitz2d_counterexample() -> Result<CounterexampleReport> {
    toeplitz2d_report(7)
}

/// `Z₂^{*2} × Z₂^{*2}`, the CHSH setting.
pub fn chsh_spec() -> ProductSpec {
    ProductSpec::new(GroupSpec::z2_free_product(2), Some(GroupSpec::z2_free_product(2))).expect("valid spec")
}

fn chsh_element(x: &[u32], y: &[u32]) -> ProductElement {
    ProductElement { w: LeftFraction::from_word(word(x)), y: Element::Word(word(y)) }
}

/// `x₁y₁ + x₁y₂ + x₂y₁ − x₂y₂`.
pub fn chsh_operator() -> NcPoly {
    let one = |v: f64| linalg::from_real_rows(&[vec![v]]);
    NcPoly::from_terms(
        chsh_spec(),
        1,
        1,
        [
            (chsh_element(&[1], &[1]), one(1.0)),
            (chsh_element(&[1], &[2]), one(1.0)),
            (chsh_element(&[2], &[1]), one(1.0)),
            (chsh_element(&[2], &[2]), one(-1.0)),
        ],
    )
    .expect("valid terms")
}

/// `2√2·e − CHSH`.
pub fn chsh_target() -> NcPoly {
    NcPoly::identity(chsh_spec(), 1).scale(cr(2.0 * 2.0_f64.sqrt())).sub(&chsh_operator()).expect("same spec")
}

/// The two-square factor `2^{-1/4}·[x₁ − (y₁+y₂)/√2 ; x₂ − (y₁−y₂)/√2]`.
pub fn chsh_closed_form_factor() -> NcPoly {
    let c0 = 2.0_f64.powf(-0.25);
    let h = c0 * 0.5_f64.sqrt();
    let col = |a: f64, b: f64| linalg::from_real_rows(&[vec![a], vec![b]]);
    let m = |x: &[u32], y: &[u32]| Monomial { w: word(x), y: Element::Word(word(y)) };
    NcPoly::from_monomials(
        chsh_spec(),
        2,
        1,
        [
            (m(&[1], &[]), col(c0, 0.0)),
            (m(&[2], &[]), col(0.0, c0)),
            (m(&[], &[1]), col(-h, -h)),
            (m(&[], &[2]), col(-h, h)),
        ],
    )
    .expect("valid terms")
}

/// Certificate for `2√2·e − CHSH` at bidegree `(x₂, 1)`.
pub fn chsh_certificate() -> Result<GramCertificate> {
    let opts = CertifyOptions { max_m_prime: 1, ..Default::default() };
    match certify_at(&chsh_target(), &word(&[2]), 1, &opts)? {
        CertifyOutcome::Certified(cert) => Ok(*cert),
        CertifyOutcome::NotFound(reports) => {
            Err(Error::Inconsistent(format!("no CHSH certificate at bidegree (x2, 1): {reports:?}")))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChshReport {
    pub certificate: GramCertificate,
    /// `‖(2√2·e − CHSH) − F*F‖` for the closed-form factor `F`.
    pub closed_form_residual: f64,
    /// Rank of the closed-form Gram matrix.
    pub closed_form_rank: usize,
    pub sampled: SampleBound,
    pub tsirelson_min_eig: f64,
}

/// Certificate plus the closed-form, sampled and Tsirelson cross-checks.
pub fn chsh_report(trials: usize, max_dim: usize, seed: u64) -> Result<ChshReport> {
    let certificate = chsh_certificate()?;
    let target = chsh_target();
    let closed = chsh_closed_form_factor();
    let closed_form_residual = soscert::symbolic_residual(&target, &closed)?;
    let monos = chsh_spec().monomials(&word(&[2]), 1)?;
    let bfrak = CMat::from_fn(2, monos.len(), |r, j| closed.coeff(&chsh_spec().monomial_element(&monos[j]))[(r, 0)]);
    let gram = bfrak.adjoint() * &bfrak;
    let lmax = linalg::max_eigenvalue(&gram);
    let closed_form_rank = linalg::eigenvalues(&gram).iter().filter(|&&v| v > 1e-12 * lmax).count();
    let sampled = repsys::sampled_lower_bound(&target, trials, max_dim, seed)?;
    let tsirelson_min_eig = linalg::min_eigenvalue(&evaluate(&target, &repsys::tsirelson_representation())?);
    Ok(ChshReport { certificate, closed_form_residual, closed_form_rank, sampled, tsirelson_min_eig })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationOptions {
    /// Required margin: the pairing with `τ` must be at most `−delta`.
    pub delta: f64,
    /// Representations in the cutting-plane pool at the start.
    pub samples: usize,
    /// Fresh representations each candidate must pass before it is accepted.
    pub validation: usize,
    pub max_dim: usize,
    pub seed: u64,
    pub max_rounds: usize,
    /// Box bound on the real and imaginary parts of each coefficient.
    pub coeff_bound: f64,
    /// Word at which to try a sums-of-squares certificate for `f + margin·e`.
    pub corroborate: Option<(Word, f64)>,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        SeparationOptions {
            delta: 0.1,
            samples: 200,
            validation: 200,
            max_dim: 6,
            seed: 0,
            max_rounds: 500,
            coeff_bound: 10.0,
            corroborate: None,
        }
    }
}

/// A positive-on-samples polynomial `f` with `f_e = 1` pairing negatively
/// with the kernel. Sample-based evidence, not a proof.
#[derive(Clone, Debug)]
pub struct Separator {
    pub poly: NcPoly,
    pub pairing: f64,
    /// Least eigenvalue of `f(π)` over the pool and the validation set.
    pub sampled_min_eig: f64,
    pub representations_checked: usize,
    pub rounds: usize,
    pub cuts: usize,
    /// Result of the optional certificate attempt for `f + margin·e`.
    pub corroborated: Option<bool>,
}

#[derive(Clone, Debug)]
pub enum SeparationOutcome {
    Found(Box<Separator>),
    /// The linear program cannot reach `−delta` (its best pairing is given,
    /// `None` when infeasible), or the round cap was hit.
    NotFound {
        best_pairing: Option<f64>,
        rounds: usize,
    },
}

// One real LP variable per free real parameter of a Hermitian `f`.
struct Param {
    fraction: LeftFraction,
    self_inverse: bool,
}

struct Sample {
    images: Vec<CMat>,
    identity_dim: usize,
}

fn sample_images(params: &[Param], rep: &Representation) -> Sample {
    Sample { images: params.iter().map(|p| rep.fraction_image(&p.fraction)).collect(), identity_dim: rep.dim }
}

// `f(π)` from the parameter vector.
fn assemble_f(params: &[Param], values: &[f64], s: &Sample) -> CMat {
    let mut m = linalg::identity(s.identity_dim);
    let mut vi = 0;
    for (p, img) in params.iter().zip(&s.images) {
        if p.self_inverse {
            m += img * cr(values[vi]);
            vi += 1;
        } else {
            let coeff = c(values[vi], values[vi + 1]);
            m += img * coeff + img.adjoint() * coeff.conj();
            vi += 2;
        }
    }
    m
}

// Linear form `v*f(π)v − 1` in the parameters.
fn cut_row(params: &[Param], s: &Sample, v: &CMat) -> Vec<f64> {
    let mut row = Vec::new();
    for (p, img) in params.iter().zip(&s.images) {
        let cv = (v.adjoint() * img * v)[(0, 0)];
        if p.self_inverse {
            row.push(cv.re);
        } else {
            row.push(2.0 * cv.re);
            row.push(-2.0 * cv.im);
        }
    }
    row
}

fn to_poly(spec: &ProductSpec, params: &[Param], values: &[f64]) -> Result<NcPoly> {
    let mut f = NcPoly::identity(spec.clone(), 1);
    let one = |z: C64| CMat::from_element(1, 1, z);
    let wspec = &spec.w;
    let mut vi = 0;
    for p in params {
        let el = |fr: LeftFraction| ProductElement { w: fr, y: spec.y_identity() };
        if p.self_inverse {
            f.add_term(el(p.fraction.clone()), one(cr(values[vi])))?;
            vi += 1;
        } else {
            let z = c(values[vi], values[vi + 1]);
            f.add_term(el(p.fraction.clone()), one(z))?;
            f.add_term(el(wspec.invert_fraction(&p.fraction)), one(z.conj()))?;
            vi += 2;
        }
    }
    Ok(f)
}

/// Pairing `Σ_u τ(u)·f_u` of a scalar kernel with a scalar polynomial.
pub fn pairing(tau: &PartialKernel, f: &NcPoly) -> Result<f64> {
    let mut total = C64::new(0.0, 0.0);
    for (g, a) in f.terms() {
        total += tau.entry(&g.w)?[0][(0, 0)] * a[(0, 0)];
    }
    Ok(total.re)
}

/// Searches for `f = f*` supported on `Her W_{≤level}` with `f_e = 1`,
/// `f(π) ⪰ 0` on every sampled representation, and pairing with `tau` at
/// most `−delta`. Cutting planes from sampled spectra feed a linear
/// program, and new samples are added until a fresh validation batch
/// raises no violation.
pub fn separation_search(tau: &PartialKernel, level: &Word, opts: &SeparationOptions) -> Result<SeparationOutcome> {
    let wspec = tau.spec().clone();
    if !wspec.is_group() {
        return Err(Error::Unsupported("separation needs a group W".into()));
    }
    if tau.k() != 1 || tau.g_order() != 1 {
        return Err(Error::Unsupported("separation takes scalar kernels".into()));
    }
    if level > tau.w_max() {
        return Err(Error::InvalidInput(format!("level {level} exceeds the kernel's top word {}", tau.w_max())));
    }
    let spec = ProductSpec::w_only(wspec.clone());
    let params: Vec<Param> = wspec
        .left_fraction_set(level)?
        .into_iter()
        .filter(|f| !f.is_identity())
        .filter_map(|f| {
            let inv = wspec.invert_fraction(&f);
            (f <= inv).then(|| Param { self_inverse: f == inv, fraction: f })
        })
        .collect();
    let nvars: usize = params.iter().map(|p| if p.self_inverse { 1 } else { 2 }).sum();

    let mut objective = Vec::with_capacity(nvars);
    for p in &params {
        let t = tau.entry(&p.fraction)?[0][(0, 0)];
        if p.self_inverse {
            objective.push(t.re);
        } else {
            objective.push(2.0 * t.re);
            objective.push(-2.0 * t.im);
        }
    }
    let tau_e = tau.entry(&LeftFraction::identity())?[0][(0, 0)].re;

    let draw = |salt: u64, i: usize| -> Result<Sample> {
        let rep = repsys::sample_representation(&spec, 1 + i % opts.max_dim, trial_seed(opts.seed ^ salt, i as u64))?;
        Ok(sample_images(&params, &rep))
    };
    let mut pool: Vec<Sample> = (0..opts.samples).map(|i| draw(0, i)).collect::<Result<_>>()?;
    let mut cuts: Vec<Vec<f64>> = Vec::new();
    let mut next_validation = 0usize;
    let mut validated: Vec<Sample> = Vec::new();
    let mut rounds = 0;

    loop {
        if rounds >= opts.max_rounds {
            return Ok(SeparationOutcome::NotFound { best_pairing: None, rounds });
        }
        rounds += 1;
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = objective.iter().map(|&o| lp.add_var(o, (-opts.coeff_bound, opts.coeff_bound))).collect();
        for row in &cuts {
            lp.add_constraint(vars.iter().zip(row).map(|(&v, &a)| (v, a)), ComparisonOp::Ge, -1.0);
        }
        let solution = match lp.solve() {
            Ok(out) => out.into_solution().map_err(|_| Error::Lp("linear program interrupted".into()))?,
            Err(microlp::Error::Infeasible) => return Ok(SeparationOutcome::NotFound { best_pairing: None, rounds }),
            Err(e) => return Err(Error::Lp(e.to_string())),
        };
        let values: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
        let best = tau_e + solution.objective();
        if best > -opts.delta {
            return Ok(SeparationOutcome::NotFound { best_pairing: Some(best), rounds });
        }

        let mut violated = 0;
        for s in &pool {
            let (vals, vecs) = linalg::hermitian_eigen(&assemble_f(&params, &values, s));
            for (i, &lam) in vals.iter().enumerate() {
                if lam < -1e-12 {
                    cuts.push(cut_row(&params, s, &vecs.columns(i, 1).into_owned()));
                    violated += 1;
                }
            }
        }
        if violated > 0 {
            continue;
        }
        // The pool is satisfied; try a fresh batch.
        let batch: Vec<Sample> =
            (next_validation..next_validation + opts.validation).map(|i| draw(0x5eed, i)).collect::<Result<_>>()?;
        next_validation += opts.validation;
        let (failing, passing): (Vec<Sample>, Vec<Sample>) =
            batch.into_iter().partition(|s| linalg::min_eigenvalue(&assemble_f(&params, &values, s)) < -1e-12);
        validated.extend(passing);
        if !failing.is_empty() {
            pool.extend(failing);
            continue;
        }

        // (f + t·e)/(1 + t) keeps f_e = 1 and absorbs round-off below zero.
        let floor = pool
            .iter()
            .chain(&validated)
            .map(|s| linalg::min_eigenvalue(&assemble_f(&params, &values, s)))
            .fold(0.0_f64, f64::min);
        let scaled: Vec<f64> = values.iter().map(|v| v / (1.0 - floor)).collect();
        let poly = to_poly(&spec, &params, &scaled)?;
        let pair = pairing(tau, &poly)?;
        if pair > -opts.delta {
            return Ok(SeparationOutcome::NotFound { best_pairing: Some(pair), rounds });
        }
        let sampled_min_eig = pool
            .iter()
            .chain(&validated)
            .map(|s| linalg::min_eigenvalue(&assemble_f(&params, &scaled, s)))
            .fold(f64::INFINITY, f64::min);
        let corroborated = match &opts.corroborate {
            None => None,
            Some((w, margin)) => {
                let shifted = poly.add(&NcPoly::identity(spec.clone(), 1).scale(cr(*margin)))?;
                let copts = CertifyOptions { max_m_prime: 0, ..Default::default() };
                Some(certify_at(&shifted, w, 0, &copts)?.certificate().is_some())
            }
        };
        return Ok(SeparationOutcome::Found(Box::new(Separator {
            poly,
            pairing: pair,
            sampled_min_eig,
            representations_checked: pool.len() + validated.len(),
            rounds,
            cuts: cuts.len(),
            corroborated,
        })));
    }
}

/// [`separation_search`] on the kernel carried by a report.
pub fn separation_search_report(
    report: &CounterexampleReport,
    level: &Word,
    opts: &SeparationOptions,
) -> Result<SeparationOutcome> {
    let tau = report
        .kernel
        .as_ref()
        .ok_or_else(|| Error::Unsupported(format!("report {} carries no kernel on left fractions", report.name)))?;
    separation_search(tau, level, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z3z2_numbers() {
        let r = z3z2_counterexample().unwrap();
        let a = -2.0 / 3.0;
        let expect = linalg::from_real_rows(&[vec![1.0, a, 1.0], vec![a, 1.0, a], vec![1.0, a, 1.0]]);
        assert!(linalg::max_abs(&(&r.base_matrix - expect)) < 1e-15);
        assert!(r.base_min_eig.abs() < 1e-10);
        // (1 − a)²(1 + 2a) at a = −2/3
        assert!((r.forced_det - (1.0 - a) * (1.0 - a) * (1.0 + 2.0 * a)).abs() < 1e-12);
        assert!((r.forced_det + 25.0 / 27.0).abs() < 1e-12);
        // the pair {x2x1^2, x1x2 = (x2x1^2)^-1}, listed by its smaller member
        assert_eq!(r.free_entries, vec!["x1x2".to_string()]);
        assert_eq!(r.conclusion, Conclusion::NoPsdCompletionExists);
        assert!(r.z_scan.iter().all(|p| p.min_eig < 0.0));
    }

    #[test]
    fn z3z3_numbers() {
        let r = z3z3_counterexample().unwrap();
        let s = 0.5_f64.sqrt();
        assert!(r.base_min_eig.abs() < 1e-10);
        assert!((r.forced_det - (1.0 + s).powi(2) * (1.0 - 2.0_f64.sqrt())).abs() < 1e-12);
        assert_eq!(r.conclusion, Conclusion::NoPsdCompletionExists);
    }

    #[test]
    fn toeplitz_forced_block_is_a_path_graph() {
        // The lower block is I + s·(adjacency of a path on 5 vertices) ⊕ I₂,
        // whose least eigenvalue is 1 − s·2cos(π/5) = 1 − s(1+√5)/2.
        let s = 0.5_f64.sqrt();
        let exact = 1.0 - s * (1.0 + 5.0_f64.sqrt()) / 2.0;
        for base in [7, 6] {
            let r = toeplitz2d_report(base).unwrap();
            assert!(r.base_min_eig >= -1e-12);
            assert!((r.forced_min_eig - exact).abs() < 1e-12, "{}", r.forced_min_eig);
            assert!((r.forced_min_eig - TOEPLITZ_FORCED_MIN_EIG).abs() < 1e-12);
            assert_eq!(r.conclusion, Conclusion::NoPsdCompletionExists);
        }
    }

    #[test]
    fn closed_form_chsh_identity() {
        let res = soscert::symbolic_residual(&chsh_target(), &chsh_closed_form_factor()).unwrap();
        assert!(res < 1e-14, "{res}");
    }

    #[test]
    fn chsh_checks() {
        let r = chsh_report(500, 8, 0).unwrap();
        assert!(r.certificate.residual <= 1e-7, "{}", r.certificate.residual);
        assert!(r.closed_form_residual <= 1e-14);
        assert_eq!(r.closed_form_rank, 2);
        assert!(r.sampled.min_eig >= -1e-7);
        assert!(r.tsirelson_min_eig.abs() <= 1e-10);
    }

    #[test]
    fn separation_on_z3z2_and_delta_control() {
        let tau = z3z2_kernel().unwrap();
        // separators such as e + x1 + x1^2 = q*q/3, q = e + x1 + x1^2, factor one word up
        let opts = SeparationOptions { corroborate: Some((word(&[1, 1]), 1e-3)), ..Default::default() };
        let out = separation_search(&tau, &word(&[2]), &opts).unwrap();
        let SeparationOutcome::Found(sep) = out else { panic!("{out:?}") };
        assert_eq!(sep.corroborated, Some(true));
        assert!(sep.pairing <= -0.1, "{}", sep.pairing);
        assert!(sep.sampled_min_eig >= -1e-9);
        assert!(sep.representations_checked >= 200);
        assert!(sep.poly.is_hermitian(0.0));
        let delta = PartialKernel::delta(tau.spec().clone(), word(&[2]), 1).unwrap();
        let out = separation_search(&delta, &word(&[2]), &SeparationOptions::default()).unwrap();
        assert!(matches!(out, SeparationOutcome::NotFound { .. }));
    }
}
