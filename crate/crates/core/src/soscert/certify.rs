use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::words::{GroupSpec, Monomial, ProductSpec, Word};

use super::dykstra::{solve_feasibility, Feasibility, SolverOptions};
use super::gram::gram_constraints;
use super::poly::{convolve_adjoint, NcPoly};

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOptions {
    /// Largest `Y` degree `M′` tried.
    pub max_m_prime: usize,
    /// Eigenvalues of `Z` below `rank_tol·λ_max` are dropped when factoring.
    pub rank_tol: f64,
    pub solver: SolverOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { max_m_prime: 6, rank_tol: 1e-8, solver: SolverOptions::default() }
    }
}

/// A psd Gram matrix for `A` and the factor read off from it.
#[derive(Clone, Debug)]
pub struct GramCertificate {
    pub spec: ProductSpec,
    pub w: Word,
    pub m_prime: usize,
    pub k: usize,
    pub monomials: Vec<Monomial>,
    pub z: CMat,
    /// `B_m` for each monomial, each `rank × k`.
    pub b_terms: Vec<(Monomial, CMat)>,
    pub rank: usize,
    pub gram_min_eig: f64,
    /// `max_α ‖A_α − (B*B)_α‖`, entrywise.
    pub residual: f64,
    pub affine_residual: f64,
    pub iterations: usize,
}

impl GramCertificate {
    /// The analytic factor `B = Σ_m B_m·m`.
    pub fn factor(&self) -> Result<NcPoly> {
        NcPoly::from_monomials(self.spec.clone(), self.rank, self.k, self.b_terms.iter().cloned())
    }
}

/// Solver state at one level `M′` that did not produce a certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelReport {
    pub m_prime: usize,
    pub iterations: usize,
    pub psd_residual: f64,
    pub affine_residual: f64,
}

#[derive(Clone, Debug)]
pub enum CertifyOutcome {
    Certified(Box<GramCertificate>),
    /// Nothing found up to the cap; inconclusive, not a proof.
    NotFound(Vec<LevelReport>),
}

impl CertifyOutcome {
    pub fn certificate(&self) -> Option<&GramCertificate> {
        match self {
            CertifyOutcome::Certified(c) => Some(c),
            CertifyOutcome::NotFound(_) => None,
        }
    }
}

/// Splits `Z = 𝔅*𝔅` by its spectrum and returns the column blocks `𝔅_m`.
pub fn factor_gram(z: &CMat, monomials: &[Monomial], k: usize, rank_tol: f64) -> Result<Vec<(Monomial, CMat)>> {
    if z.nrows() != monomials.len() * k {
        return Err(Error::InvalidInput("Gram size does not match the monomials".into()));
    }
    let (vals, _) = linalg::hermitian_eigen(z);
    let lmax = vals.iter().fold(0.0_f64, |a, &v| a.max(v));
    let lmin = vals.iter().fold(0.0_f64, |a, &v| a.min(v));
    if lmin < -1e3 * rank_tol * (1.0 + lmax) {
        return Err(Error::NotPsd { min_eig: lmin });
    }
    let bfrak = super::polish::low_rank_factor(z, rank_tol);
    Ok(monomials.iter().enumerate().map(|(i, m)| (m.clone(), bfrak.columns(i * k, k).into_owned())).collect())
}

/// `max_α ‖A_α − (B*B)_α‖` for an analytic `B`.
pub fn symbolic_residual(a: &NcPoly, b: &NcPoly) -> Result<f64> {
    Ok(a.max_coeff_diff(&convolve_adjoint(b)?))
}

fn ensure_hermitian(a: &NcPoly) -> Result<()> {
    let scale = 1.0 + a.terms().values().map(linalg::max_abs).fold(0.0, f64::max);
    let dev = a.hermitian_deviation();
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

fn attempt(
    a: &NcPoly,
    w: &Word,
    m_prime: usize,
    opts: &CertifyOptions,
) -> Result<std::result::Result<GramCertificate, LevelReport>> {
    let sys = gram_constraints(a, w, m_prime)?;
    let sol = match solve_feasibility(&sys, &opts.solver)? {
        Feasibility::Feasible(sol) => sol,
        Feasibility::Stalled(sol) => {
            return Ok(Err(LevelReport {
                m_prime,
                iterations: sol.iterations,
                psd_residual: sol.psd_residual,
                affine_residual: sol.affine_residual,
            }))
        }
    };
    let k = sys.k;
    let b_terms = factor_gram(&sol.z, &sys.monomials, k, opts.rank_tol)?;
    let rank = b_terms.first().map_or(0, |(_, b)| b.nrows());
    let cert = GramCertificate {
        spec: a.spec().clone(),
        w: w.clone(),
        m_prime,
        k,
        monomials: sys.monomials.clone(),
        gram_min_eig: linalg::min_eigenvalue(&sol.z),
        residual: 0.0,
        affine_residual: sol.affine_residual,
        iterations: sol.iterations,
        z: sol.z,
        b_terms,
        rank,
    };
    let residual = symbolic_residual(a, &cert.factor()?)?;
    Ok(Ok(GramCertificate { residual, ..cert }))
}

/// Tries `M′ = M, M + 1, …, max_m_prime` at the `W` degree of `A`.
pub fn certify(a: &NcPoly, opts: &CertifyOptions) -> Result<CertifyOutcome> {
    let (w, m) = a.bidegree();
    certify_at(a, &w, m, opts)
}

/// As [`certify`], with the `W` degree and the first `M′` given.
pub fn certify_at(a: &NcPoly, w: &Word, m_start: usize, opts: &CertifyOptions) -> Result<CertifyOutcome> {
    ensure_hermitian(a)?;
    let mut reports = Vec::new();
    for m_prime in m_start..=opts.max_m_prime.max(m_start) {
        match attempt(a, w, m_prime, opts)? {
            Ok(cert) => return Ok(CertifyOutcome::Certified(Box::new(cert))),
            Err(report) => reports.push(report),
        }
    }
    Ok(CertifyOutcome::NotFound(reports))
}

fn ensure_z2_only(a: &NcPoly) -> Result<()> {
    if !a.spec().w.is_z2_product() || a.spec().y.is_some() {
        return Err(Error::SpecMismatch("expected a polynomial over Z2^{*g} with trivial Y".into()));
    }
    Ok(())
}

/// Certificate for a psd polynomial on `Z₂^{*g}` at its own degree.
pub fn certify_z2_psd(a: &NcPoly, opts: &CertifyOptions) -> Result<CertifyOutcome> {
    ensure_z2_only(a)?;
    let (w, _) = a.bidegree();
    certify_z2_psd_at(a, &w, opts)
}

/// Certificate for a psd polynomial on `Z₂^{*g}` with factor degree `w`.
pub fn certify_z2_psd_at(a: &NcPoly, w: &Word, opts: &CertifyOptions) -> Result<CertifyOutcome> {
    ensure_z2_only(a)?;
    certify_at(a, w, 0, &CertifyOptions { max_m_prime: 0, ..opts.clone() })
}

/// Convenience: the group `Z₂^{*g}` without `Y`.
pub fn z2_spec(g: usize) -> ProductSpec {
    ProductSpec::w_only(GroupSpec::z2_free_product(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cr, from_real_rows};
    use crate::words::{Element, LeftFraction, ProductElement};

    fn w(letters: &[u32]) -> Word {
        Word::from_letters(letters.to_vec())
    }

    fn el(letters: &[u32]) -> ProductElement {
        ProductElement { w: LeftFraction::from_word(w(letters)), y: Element::trivial() }
    }

    #[test]
    fn identity_certifies_at_level_zero() {
        let a = NcPoly::identity(z2_spec(2), 1);
        let cert = certify(&a, &CertifyOptions::default()).unwrap();
        let cert = cert.certificate().unwrap();
        assert_eq!(cert.m_prime, 0);
        assert_eq!(cert.b_terms.len(), 1);
        assert!((cert.b_terms[0].1[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn z2_psd_examples() {
        let mut a = NcPoly::identity(z2_spec(2), 1).scale(cr(2.0));
        a.add_term(el(&[1, 2]), from_real_rows(&[vec![1.0]])).unwrap();
        a.add_term(el(&[2, 1]), from_real_rows(&[vec![1.0]])).unwrap();
        let out = certify_z2_psd(&a, &CertifyOptions::default()).unwrap();
        let cert = out.certificate().unwrap();
        assert_eq!(cert.w, w(&[2]));
        assert!(cert.residual <= 1e-8);

        let mut a = NcPoly::identity(z2_spec(1), 1);
        a.add_term(el(&[1]), from_real_rows(&[vec![-1.0]])).unwrap();
        let out = certify_z2_psd(&a, &CertifyOptions::default()).unwrap();
        let cert = out.certificate().unwrap();
        assert_eq!(cert.rank, 1);
        let b0 = cert.b_terms[0].1[(0, 0)];
        let b1 = cert.b_terms[1].1[(0, 0)];
        assert!((b0.norm() - 0.5f64.sqrt()).abs() < 1e-10);
        assert!((b0 + b1).norm() < 1e-10);

        let a = NcPoly::identity(z2_spec(2), 1).scale(cr(-1.0));
        let opts =
            CertifyOptions { solver: SolverOptions { max_iter: 500, ..Default::default() }, ..Default::default() };
        assert!(matches!(certify_z2_psd_at(&a, &w(&[2]), &opts).unwrap(), CertifyOutcome::NotFound(_)));
    }

    #[test]
    fn factor_gram_examples() {
        let monos: Vec<Monomial> = z2_spec(2).monomials(&w(&[2]), 0).unwrap();
        let b = factor_gram(&linalg::identity(3), &monos, 1, 1e-8).unwrap();
        assert_eq!(b[0].1.nrows(), 3);
        let ones = CMat::from_element(3, 3, cr(1.0));
        let b = factor_gram(&ones, &monos, 1, 1e-8).unwrap();
        assert_eq!(b[0].1.nrows(), 1);
        let bpoly = NcPoly::from_monomials(z2_spec(2), 1, 1, b).unwrap();
        let bb = convolve_adjoint(&bpoly).unwrap();
        // each coefficient counts the pairs in its coset: 3 at e, 2 at x1 and x2, 1 at x1x2 and x2x1
        let sys = crate::soscert::gram_constraints(&NcPoly::identity(z2_spec(2), 1), &w(&[2]), 0).unwrap();
        assert_eq!(bb.terms().len(), sys.cosets.len());
        for coset in &sys.cosets {
            assert!((bb.coeff(&coset.element)[(0, 0)] - cr(coset.pairs.len() as f64)).norm() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut a = NcPoly::identity(z2_spec(2), 1);
        a.add_term(el(&[1, 2]), from_real_rows(&[vec![1.0]])).unwrap();
        assert!(matches!(certify(&a, &CertifyOptions::default()), Err(Error::NotHermitian { .. })));
    }
}
