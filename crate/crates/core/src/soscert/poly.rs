use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::words::{Element, GroupSpec, Monomial, ProductElement, ProductSpec, Word};

/// A finitely supported function from `Her W × Y` to `rows × cols`
/// matrices, read as `Σ_g A_g·g`.
#[derive(Clone, Debug, PartialEq)]
pub struct NcPoly {
    spec: ProductSpec,
    rows: usize,
    cols: usize,
    terms: BTreeMap<ProductElement, CMat>,
}

impl NcPoly {
    pub fn zero(spec: ProductSpec, rows: usize, cols: usize) -> Self {
        NcPoly { spec, rows, cols, terms: BTreeMap::new() }
    }

    /// `I_k · e`.
    pub fn identity(spec: ProductSpec, k: usize) -> Self {
        let mut p = Self::zero(spec.clone(), k, k);
        p.terms.insert(spec.identity(), linalg::identity(k));
        p
    }

    pub fn from_terms(
        spec: ProductSpec,
        rows: usize,
        cols: usize,
        terms: impl IntoIterator<Item = (ProductElement, CMat)>,
    ) -> Result<Self> {
        let mut p = Self::zero(spec, rows, cols);
        for (g, a) in terms {
            p.add_term(g, a)?;
        }
        Ok(p)
    }

    /// Analytic polynomial `Σ_m B_m·m` over monomials.
    pub fn from_monomials(
        spec: ProductSpec,
        rows: usize,
        cols: usize,
        terms: impl IntoIterator<Item = (Monomial, CMat)>,
    ) -> Result<Self> {
        let s = spec.clone();
        Self::from_terms(spec, rows, cols, terms.into_iter().map(|(m, b)| (s.monomial_element(&m), b)))
    }

    pub fn spec(&self) -> &ProductSpec {
        &self.spec
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn terms(&self) -> &BTreeMap<ProductElement, CMat> {
        &self.terms
    }

    pub fn coeff(&self, g: &ProductElement) -> CMat {
        self.terms.get(g).cloned().unwrap_or_else(|| CMat::zeros(self.rows, self.cols))
    }

    /// Adds `a·g`, accumulating onto an existing coefficient.
    pub fn add_term(&mut self, g: ProductElement, a: CMat) -> Result<()> {
        if a.shape() != (self.rows, self.cols) {
            return Err(Error::InvalidInput(format!(
                "coefficient of {g} is {}x{}, expected {}x{}",
                a.nrows(),
                a.ncols(),
                self.rows,
                self.cols
            )));
        }
        self.spec.check_element(&g)?;
        match self.terms.get_mut(&g) {
            Some(existing) => *existing += a,
            None => {
                self.terms.insert(g, a);
            }
        }
        Ok(())
    }

    pub fn scale(&self, s: C64) -> Self {
        NcPoly { terms: self.terms.iter().map(|(g, a)| (g.clone(), a * s)).collect(), ..self.clone() }
    }

    fn ensure_compatible(&self, other: &NcPoly) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch("polynomials over different groups".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &NcPoly) -> Result<Self> {
        self.ensure_compatible(other)?;
        let mut out = self.clone();
        for (g, a) in &other.terms {
            out.add_term(g.clone(), a.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &NcPoly) -> Result<Self> {
        self.add(&other.scale(linalg::cr(-1.0)))
    }

    /// Convolution product `(Σ P_a a)(Σ Q_b b) = Σ P_a Q_b ab`.
    pub fn mul(&self, other: &NcPoly) -> Result<Self> {
        self.ensure_compatible(other)?;
        if self.cols != other.rows {
            return Err(Error::InvalidInput("coefficient shapes do not compose".into()));
        }
        let mut out = Self::zero(self.spec.clone(), self.rows, other.cols);
        for (a, p) in &self.terms {
            for (b, q) in &other.terms {
                out.add_term(self.spec.mul(a, b)?, p * q)?;
            }
        }
        Ok(out)
    }

    /// `Σ A_g* g⁻¹`.
    pub fn adjoint(&self) -> Self {
        NcPoly {
            spec: self.spec.clone(),
            rows: self.cols,
            cols: self.rows,
            terms: self.terms.iter().map(|(g, a)| (self.spec.inverse(g), a.adjoint())).collect(),
        }
    }

    /// Largest entrywise deviation between two polynomials' coefficients.
    pub fn max_coeff_diff(&self, other: &NcPoly) -> f64 {
        let mut worst = 0.0_f64;
        for g in self.terms.keys().chain(other.terms.keys()) {
            worst = worst.max(linalg::max_abs(&(self.coeff(g) - other.coeff(g))));
        }
        worst
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.max_coeff_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Drops coefficients with every entry at most `tol` in modulus.
    pub fn prune(&self, tol: f64) -> Self {
        NcPoly {
            terms: self
                .terms
                .iter()
                .filter(|(_, a)| linalg::max_abs(a) > tol)
                .map(|(g, a)| (g.clone(), a.clone()))
                .collect(),
            ..self.clone()
        }
    }

    /// Least `(w, M)` with support in `Her W_{≤w} × Her Y_{≤M}`.
    pub fn bidegree(&self) -> (Word, usize) {
        self.terms.keys().fold((Word::empty(), 0), |(w, m), g| {
            let (gw, gm) = self.spec.element_bidegree(g);
            (w.max(gw), m.max(gm))
        })
    }

    /// True when every term is a monomial `u·a` with `u ∈ W`, `a ∈ Y_{≥0}`.
    pub fn is_analytic(&self) -> bool {
        self.terms.keys().all(|g| {
            g.w.den.is_empty()
                && match &g.y {
                    Element::Lattice(v) => v.iter().all(|&p| p >= 0),
                    Element::Word(_) => true,
                }
        })
    }

    /// Support bound `(max W word, max Y length)` of an analytic polynomial.
    pub fn analytic_degree(&self) -> Result<(Word, usize)> {
        if !self.is_analytic() {
            return Err(Error::InvalidInput("polynomial is not analytic".into()));
        }
        let ylen = |a: &Element| match (&self.spec.y, a) {
            (Some(y), a) => y.element_length(a),
            (None, _) => 0,
        };
        Ok(self.terms.keys().fold((Word::empty(), 0), |(w, m), g| (w.max(g.w.num.clone()), m.max(ylen(&g.y)))))
    }

    /// The terms as monomials; fails for non-analytic polynomials.
    pub fn monomial_terms(&self) -> Result<Vec<(Monomial, CMat)>> {
        if !self.is_analytic() {
            return Err(Error::InvalidInput("polynomial is not analytic".into()));
        }
        Ok(self.terms.iter().map(|(g, a)| (Monomial { w: g.w.num.clone(), y: g.y.clone() }, a.clone())).collect())
    }
}

/// `B*B`, whose coefficient at `α` is `Σ_{v⁻¹u = α} B_v*·B_u`.
pub fn convolve_adjoint(b: &NcPoly) -> Result<NcPoly> {
    if !b.is_analytic() {
        return Err(Error::InvalidInput("convolve_adjoint expects an analytic polynomial".into()));
    }
    b.adjoint().mul(b)
}

/// A product spec with trivial `W` part (words of `W_{≤e}` only).
pub fn y_only(y: GroupSpec) -> ProductSpec {
    ProductSpec { w: GroupSpec::free_semigroup(1), y: Some(y) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real_rows;
    use crate::repsys::{evaluate, sample_representation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(letters: &[u32]) -> Word {
        Word::from_letters(letters.to_vec())
    }

    fn one(x: f64) -> CMat {
        from_real_rows(&[vec![x]])
    }

    #[test]
    fn adjoint_square_of_identity() {
        let spec = ProductSpec::w_only(GroupSpec::z2_free_product(2));
        let e = NcPoly::identity(spec, 1);
        assert_eq!(convolve_adjoint(&e).unwrap(), e);
    }

    #[test]
    fn x1_plus_y1_squared() {
        let spec = ProductSpec::new(GroupSpec::z2_free_product(1), Some(GroupSpec::z2_free_product(1))).unwrap();
        let x1 = Monomial { w: w(&[1]), y: Element::trivial() };
        let y1 = Monomial { w: Word::empty(), y: Element::Word(w(&[1])) };
        let b = NcPoly::from_monomials(spec.clone(), 1, 1, [(x1, one(1.0)), (y1, one(1.0))]).unwrap();
        let bb = convolve_adjoint(&b).unwrap();
        let x1y1 = spec.monomial_element(&Monomial { w: w(&[1]), y: Element::Word(w(&[1])) });
        let mut expect = NcPoly::identity(spec, 1).scale(linalg::cr(2.0));
        expect.add_term(x1y1, one(2.0)).unwrap();
        assert!(bb.max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn semigroup_bidegree_and_analytic() {
        let spec = ProductSpec::new(GroupSpec::free_semigroup(2), Some(GroupSpec::free_abelian(1))).unwrap();
        let m = Monomial { w: w(&[2, 1]), y: Element::Lattice(vec![2]) };
        let b = NcPoly::from_monomials(spec, 1, 1, [(m, one(1.0))]).unwrap();
        assert_eq!(b.analytic_degree().unwrap(), (w(&[2, 1]), 2));
        let bb = convolve_adjoint(&b).unwrap();
        assert!(bb.is_hermitian(0.0));
        assert_eq!(bb.bidegree(), (Word::empty(), 0));
        assert!(!b.adjoint().is_analytic());
    }

    #[test]
    fn random_convolution_matches_evaluation() {
        let spec = ProductSpec::new(GroupSpec::z2_free_product(2), Some(GroupSpec::free_abelian(1))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let monos = spec.monomials(&w(&[1, 2]), 2).unwrap();
        let b = NcPoly::from_monomials(
            spec.clone(),
            2,
            2,
            monos.into_iter().map(|m| (m, linalg::random_gaussian(2, 2, &mut rng))),
        )
        .unwrap();
        let bb = convolve_adjoint(&b).unwrap();
        for seed in 0..20 {
            let rep = sample_representation(&spec, 1 + seed as usize % 6, seed).unwrap();
            let vb = evaluate(&b, &rep).unwrap();
            let lhs = evaluate(&bb, &rep).unwrap();
            assert!(linalg::max_abs(&(lhs - vb.adjoint() * vb)) < 1e-9);
        }
    }
}
