//! Unitary representations: sampling, evaluation of polynomials, the
//! Kolmogorov (GNS) model of a psd kernel and unitary dilation.
//!
//! Evaluation uses `π(u⁻¹v·γ) = (U^u)*·U^v·ρ(γ)` where `U^w` is the ordered
//! product of generator unitaries along `w`.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::PartialKernel;
use crate::linalg::{self, c, cr, CMat};
use crate::soscert::NcPoly;
use crate::words::{Element, GroupSpec, LeftFraction, ProductElement, ProductSpec, Word};

/// A representation of `W × Y` on `C^dim`.
#[derive(Clone, Debug)]
pub struct Representation {
    pub spec: ProductSpec,
    pub dim: usize,
    pub w_unitaries: Vec<CMat>,
    pub y_unitaries: Vec<CMat>,
}

/// splitmix64 finalizer, used to derive per-trial seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `index` of a run seeded with `seed`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

fn diag_conjugate(basis: &CMat, phases: &[crate::linalg::C64]) -> CMat {
    let mut scaled = basis.clone();
    for (j, &p) in phases.iter().enumerate() {
        for i in 0..basis.nrows() {
            scaled[(i, j)] *= p;
        }
    }
    scaled * basis.adjoint()
}

/// Random unitary of order dividing `m`: a Haar eigenbasis with random
/// `m`-th roots of unity as eigenvalues. For `m = 2` this is `I − 2P` with
/// `P` a random projection of uniformly distributed rank.
pub fn random_cyclic_unitary(m: usize, dim: usize, rng: &mut impl Rng) -> CMat {
    let basis = linalg::haar_unitary(dim, rng);
    let phases: Vec<_> = if m == 2 {
        let rank = rng.random_range(0..=dim);
        (0..dim).map(|i| cr(if i < rank { -1.0 } else { 1.0 })).collect()
    } else {
        (0..dim)
            .map(|_| {
                let k = rng.random_range(0..m) as f64;
                let t = 2.0 * std::f64::consts::PI * k / m as f64;
                c(t.cos(), t.sin())
            })
            .collect()
    };
    diag_conjugate(&basis, &phases)
}

/// Random generator images for one family on `C^dim`: Haar unitaries for
/// free generators, cyclic unitaries for cyclic factors, and commuting
/// unitaries with a shared Haar eigenbasis for free abelian groups.
pub fn random_generators(spec: &GroupSpec, dim: usize, rng: &mut impl Rng) -> Vec<CMat> {
    match spec {
        GroupSpec::FreeSemigroup { rank } => (0..*rank).map(|_| linalg::haar_unitary(dim, rng)).collect(),
        GroupSpec::FreeProductCyclic { orders } => {
            orders.iter().map(|&m| random_cyclic_unitary(m as usize, dim, rng)).collect()
        }
        GroupSpec::FreeAbelian { rank } => {
            let basis = linalg::haar_unitary(dim, rng);
            (0..*rank)
                .map(|_| {
                    let phases: Vec<_> = (0..dim)
                        .map(|_| {
                            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                            c(t.cos(), t.sin())
                        })
                        .collect();
                    diag_conjugate(&basis, &phases)
                })
                .collect()
        }
    }
}

/// Samples a representation on `C^dim`. With a nontrivial `Y` the space is
/// split as `C^{dw} ⊗ C^{dy}` with `dw·dy = dim` chosen at random, and the
/// generators act as `X ⊗ I` and `I ⊗ Y`.
pub fn sample_representation(spec: &ProductSpec, dim: usize, seed: u64) -> Result<Representation> {
    if dim == 0 {
        return Err(Error::InvalidInput("representation dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rep = match &spec.y {
        None => Representation {
            spec: spec.clone(),
            dim,
            w_unitaries: random_generators(&spec.w, dim, &mut rng),
            y_unitaries: Vec::new(),
        },
        Some(y) => {
            let divisors: Vec<usize> = (1..=dim).filter(|d| dim.is_multiple_of(*d)).collect();
            let dw = *divisors.choose(&mut rng).expect("1 divides dim");
            let dy = dim / dw;
            let iw = linalg::identity(dw);
            let iy = linalg::identity(dy);
            Representation {
                spec: spec.clone(),
                dim,
                w_unitaries: random_generators(&spec.w, dw, &mut rng).iter().map(|x| linalg::kron(x, &iy)).collect(),
                y_unitaries: random_generators(y, dy, &mut rng).iter().map(|u| linalg::kron(&iw, u)).collect(),
            }
        }
    };
    Ok(rep)
}

fn pauli_x() -> CMat {
    linalg::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])
}

fn pauli_z() -> CMat {
    linalg::from_real_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]])
}

/// The two-qubit representation of `Z₂^{*2} × Z₂^{*2}` attaining the
/// Tsirelson bound: `U₁ = σx⊗I`, `U₂ = σz⊗I`, `Y₁ = I⊗(σx+σz)/√2`,
/// `Y₂ = I⊗(σx−σz)/√2`.
pub fn tsirelson_representation() -> Representation {
    let i2 = linalg::identity(2);
    let s = cr(std::f64::consts::FRAC_1_SQRT_2);
    let (x, z) = (pauli_x(), pauli_z());
    Representation {
        spec: ProductSpec::new(GroupSpec::z2_free_product(2), Some(GroupSpec::z2_free_product(2))).expect("valid spec"),
        dim: 4,
        w_unitaries: vec![linalg::kron(&x, &i2), linalg::kron(&z, &i2)],
        y_unitaries: vec![linalg::kron(&i2, &((&x + &z) * s)), linalg::kron(&i2, &((&x - &z) * s))],
    }
}

impl Representation {
    /// `U^w`, the ordered product along `w`.
    pub fn word_image(&self, w: &Word) -> CMat {
        w.letters().iter().fold(linalg::identity(self.dim), |acc, &l| acc * &self.w_unitaries[l as usize - 1])
    }

    pub fn fraction_image(&self, f: &LeftFraction) -> CMat {
        self.word_image(&f.den).adjoint() * self.word_image(&f.num)
    }

    pub fn y_image(&self, a: &Element) -> CMat {
        let id = linalg::identity(self.dim);
        match a {
            Element::Word(w) => w.letters().iter().fold(id, |acc, &l| acc * &self.y_unitaries[l as usize - 1]),
            Element::Lattice(v) => v.iter().enumerate().fold(id, |acc, (i, &p)| {
                let base = if p < 0 { self.y_unitaries[i].adjoint() } else { self.y_unitaries[i].clone() };
                (0..p.unsigned_abs()).fold(acc, |m, _| m * &base)
            }),
        }
    }

    /// `π(α·γ)`.
    pub fn element_image(&self, g: &ProductElement) -> CMat {
        let w = self.fraction_image(&g.w);
        if self.spec.y.is_none() {
            w
        } else {
            w * self.y_image(&g.y)
        }
    }

    /// Re-verifies unitarity, the cyclic relations and commutation.
    pub fn check(&self, tol: f64) -> Result<()> {
        let all = self.w_unitaries.iter().chain(&self.y_unitaries);
        for u in all {
            let r = linalg::unitarity_residual(u).max(linalg::max_abs(&(u * u.adjoint() - linalg::identity(self.dim))));
            if r > tol {
                return Err(Error::NotIsometry { residual: r });
            }
        }
        let relation = |spec: &GroupSpec, gens: &[CMat]| -> Result<()> {
            if let GroupSpec::FreeProductCyclic { orders } = spec {
                for (u, &m) in gens.iter().zip(orders) {
                    let p = (0..m).fold(linalg::identity(self.dim), |acc, _| acc * u);
                    let r = linalg::max_abs(&(p - linalg::identity(self.dim)));
                    if r > tol {
                        return Err(Error::Inconsistent(format!("generator of order {m} fails U^{m} = I by {r:.3e}")));
                    }
                }
            }
            if let GroupSpec::FreeAbelian { .. } = spec {
                for a in gens {
                    for b in gens {
                        let r = linalg::max_abs(&(a * b - b * a));
                        if r > tol {
                            return Err(Error::Inconsistent(format!("abelian generators fail to commute by {r:.3e}")));
                        }
                    }
                }
            }
            Ok(())
        };
        relation(&self.spec.w, &self.w_unitaries)?;
        if let Some(y) = &self.spec.y {
            relation(y, &self.y_unitaries)?;
        }
        for u in &self.w_unitaries {
            for y in &self.y_unitaries {
                let r = linalg::max_abs(&(u * y - y * u));
                if r > tol {
                    return Err(Error::Inconsistent(format!("W and Y images fail to commute by {r:.3e}")));
                }
            }
        }
        Ok(())
    }
}

/// `A(π) = Σ_g A_g ⊗ π(g)`.
pub fn evaluate(poly: &NcPoly, rep: &Representation) -> Result<CMat> {
    if poly.spec() != &rep.spec {
        return Err(Error::SpecMismatch("polynomial and representation use different groups".into()));
    }
    let (r, c) = poly.shape();
    let mut out = CMat::zeros(r * rep.dim, c * rep.dim);
    for (g, coeff) in poly.terms() {
        out += linalg::kron(coeff, &rep.element_image(g));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBound {
    pub min_eig: f64,
    pub argmin_trial: usize,
}

/// Minimum of `λ_min(A(π))` over sampled representations; an upper bound on
/// the true infimum. Trial `i` uses dimension `1 + (i mod max_dim)` and seed
/// [`trial_seed`]`(seed, i)`.
pub fn sampled_lower_bound(poly: &NcPoly, trials: usize, max_dim: usize, seed: u64) -> Result<SampleBound> {
    sampled_lower_bound_with(poly, &[], trials, max_dim, seed)
}

/// As [`sampled_lower_bound`], with explicit representations occupying the
/// first trial indices.
pub fn sampled_lower_bound_with(
    poly: &NcPoly,
    explicit: &[Representation],
    trials: usize,
    max_dim: usize,
    seed: u64,
) -> Result<SampleBound> {
    if trials == 0 || max_dim == 0 {
        return Err(Error::InvalidInput("trials and dimension must be positive".into()));
    }
    let values: Vec<f64> = (0..trials.max(explicit.len()))
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let rep = match explicit.get(i) {
                Some(rep) => rep.clone(),
                None => sample_representation(poly.spec(), 1 + i % max_dim, trial_seed(seed, i as u64))?,
            };
            Ok(linalg::min_eigenvalue(&evaluate(poly, &rep)?))
        })
        .collect::<Result<_>>()?;
    let (argmin_trial, &min_eig) =
        values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("at least one trial");
    Ok(SampleBound { min_eig, argmin_trial })
}

/// `[[V, I − VV*], [0, V*]]`.
pub fn unitary_dilation(v: &CMat) -> Result<CMat> {
    if !v.is_square() {
        return Err(Error::InvalidInput("dilation needs a square matrix; embed the isometry first".into()));
    }
    let residual = linalg::unitarity_residual(v);
    if residual > 1e-10 {
        return Err(Error::NotIsometry { residual });
    }
    let n = v.nrows();
    let defect = linalg::identity(n) - v * v.adjoint();
    Ok(linalg::block_matrix(&[vec![v.clone(), defect], vec![CMat::zeros(n, n), v.adjoint()]]))
}

/// Kolmogorov model `p(α) ≈ Ŵ*·π̂(α)·Ŵ` of a psd kernel.
#[derive(Clone, Debug)]
pub struct GnsModel {
    pub spec: GroupSpec,
    pub level: usize,
    /// Dimension of the quotient space before dilation.
    pub dim: usize,
    pub isometries: Vec<CMat>,
    /// `‖Φ_{x_j D}*Φ_{x_j D} − Φ_D*Φ_D‖` over words `D` of length `< level`.
    pub isometry_residuals: Vec<f64>,
    pub unitaries: Vec<CMat>,
    pub embedding: CMat,
}

impl GnsModel {
    pub fn fraction_image(&self, f: &LeftFraction) -> CMat {
        let n = self.embedding.nrows();
        let image =
            |w: &Word| w.letters().iter().fold(linalg::identity(n), |acc, &l| acc * &self.unitaries[l as usize - 1]);
        image(&f.den).adjoint() * image(&f.num)
    }

    /// `Ŵ*·π̂(α)·Ŵ`.
    pub fn compress(&self, f: &LeftFraction) -> CMat {
        self.embedding.adjoint() * self.fraction_image(f) * &self.embedding
    }
}

/// Builds the Kolmogorov decomposition of a kernel defined on every word of
/// length at most `level`, the shift isometries `Φ_u ↦ Φ_{x_j u}` on words
/// of length `< level`, their unitary completions and dilations.
pub fn gns_from_kernel(kernel: &PartialKernel, level: usize) -> Result<GnsModel> {
    let spec = kernel.spec().clone();
    let z2 = spec.is_z2_product();
    if !(z2 || matches!(spec, GroupSpec::FreeSemigroup { .. })) {
        return Err(Error::Unsupported("GNS models are built for free semigroups and Z2 free products".into()));
    }
    if kernel.g_order() != 1 {
        return Err(Error::Unsupported("GNS models need kernels without a finite group part".into()));
    }
    if level == 0 {
        return Err(Error::InvalidInput("level must be at least 1".into()));
    }
    let top =
        spec.last_word_of_length(level).ok_or_else(|| Error::InvalidInput(format!("no words of length {level}")))?;
    if kernel.w_max() < &top {
        return Err(Error::InvalidInput(format!("kernel must be defined up to {top}")));
    }
    let k = kernel.k();
    let words = spec.words_upto_length(level);
    let form = kernel.assemble_on(&words)?;
    let (ok, min_eig) = crate::kernels::is_psd(&form, linalg::DEFAULT_PSD_TOL)?;
    if !ok {
        return Err(Error::NotPsd { min_eig });
    }

    let (vals, vecs) = linalg::hermitian_eigen(&form.matrix);
    let lmax = vals.iter().fold(0.0_f64, |a, &v| a.max(v));
    let cutoff = vals.len() as f64 * f64::EPSILON * lmax;
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cutoff).collect();
    let r = keep.len();
    // Φ = Λ^{1/2} Q*, so Φ*Φ = X on the retained spectrum
    let phi = CMat::from_fn(r, vals.len(), |i, j| vecs[(j, keep[i])].conj() * vals[keep[i]].sqrt());
    let pos = |w: &Word| words.iter().position(|x| x == w).expect("word in index");
    let cols = |ws: &[Word]| -> CMat {
        let mut m = CMat::zeros(r, ws.len() * k);
        for (i, w) in ws.iter().enumerate() {
            m.view_mut((0, i * k), (r, k)).copy_from(&phi.columns(pos(w) * k, k));
        }
        m
    };
    let inner: Vec<Word> = words.iter().filter(|w| w.len() < level).cloned().collect();
    let scale = 1.0 + linalg::max_abs(&form.matrix);

    let mut isometries = Vec::new();
    let mut residuals = Vec::new();
    for j in 1..=spec.rank() as u32 {
        let shift = |u: &Word| {
            let mut letters = vec![j];
            letters.extend_from_slice(u.letters());
            spec.reduce(&letters).expect("valid letters")
        };
        // the shift is defined on D and, for involutions, on x_j D too
        let mut domain = inner.clone();
        if z2 {
            for u in &inner {
                let v = shift(u);
                if !domain.contains(&v) {
                    domain.push(v);
                }
            }
        }
        let image: Vec<Word> = domain.iter().map(&shift).collect();
        let (src, dst) = (cols(&domain), cols(&image));
        let residual = linalg::max_abs(&(dst.adjoint() * &dst - src.adjoint() * &src));
        if residual > 1e-6 * scale {
            return Err(Error::NotIsometry { residual });
        }
        residuals.push(residual);
        let partial = &dst * linalg::pinv(&src);
        let v = if z2 {
            let proj = &src * linalg::pinv(&src);
            let inv = linalg::hermitian_part(&(partial + linalg::identity(r) - proj));
            polar_unitary(&inv)
        } else {
            polar_unitary(&partial)
        };
        isometries.push(v);
    }
    let unitaries = isometries.iter().map(unitary_dilation).collect::<Result<Vec<_>>>()?;
    let mut embedding = CMat::zeros(2 * r, k);
    embedding.view_mut((0, 0), (r, k)).copy_from(&phi.columns(pos(&Word::empty()) * k, k));
    Ok(GnsModel { spec, level, dim: r, isometries, isometry_residuals: residuals, unitaries, embedding })
}

// Unitary factor of the polar decomposition; for a partial isometry it
// agrees with the input on the initial space.
fn polar_unitary(m: &CMat) -> CMat {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}
