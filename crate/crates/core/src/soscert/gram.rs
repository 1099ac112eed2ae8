use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::words::{Monomial, ProductElement, ProductSpec, Word};

use super::NcPoly;

/// Index pairs `(r, c)` of the Gram matrix sharing one fraction `r⁻¹c`,
/// and the coefficient their blocks must sum to.
#[derive(Clone, Debug)]
pub struct Coset {
    pub element: ProductElement,
    pub pairs: Vec<(usize, usize)>,
    pub target: CMat,
}

/// The affine constraints `Σ_{(r,c) ∈ C_α} Z_{r,c} = A_α` on a Gram matrix
/// `Z` with `k × k` blocks indexed by monomials.
#[derive(Clone, Debug)]
pub struct GramSystem {
    pub spec: ProductSpec,
    pub k: usize,
    pub monomials: Vec<Monomial>,
    pub cosets: Vec<Coset>,
    /// Coset of the inverse element, for each coset.
    pub inverse_of: Vec<usize>,
}

/// Builds the coset partition of `W_{≤w} × Y_{≤M′}` pairs and attaches the
/// coefficients of `a`.
pub fn gram_constraints(a: &NcPoly, w: &Word, m_prime: usize) -> Result<GramSystem> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::InvalidInput("Gram constraints need square coefficients".into()));
    }
    let k = rows;
    let spec = a.spec().clone();
    let monomials = spec.monomials(w, m_prime)?;
    let mut by_element: BTreeMap<ProductElement, Vec<(usize, usize)>> = BTreeMap::new();
    for (r, mr) in monomials.iter().enumerate() {
        for (c, mc) in monomials.iter().enumerate() {
            by_element.entry(spec.pair_fraction(mr, mc)).or_default().push((r, c));
        }
    }
    if let Some(outside) = a.terms().keys().find(|g| !by_element.contains_key(g)) {
        if linalg::max_abs(&a.coeff(outside)) > 0.0 {
            return Err(Error::InvalidInput(format!("term {outside} lies outside the bidegree ({w}, {m_prime})")));
        }
    }
    let cosets: Vec<Coset> = by_element
        .into_iter()
        .map(|(element, pairs)| {
            let target = a.coeff(&element);
            Coset { element, pairs, target }
        })
        .collect();
    let position: BTreeMap<&ProductElement, usize> = cosets.iter().enumerate().map(|(i, c)| (&c.element, i)).collect();
    let inverse_of = cosets.iter().map(|c| position[&spec.inverse(&c.element)]).collect();
    let sys = GramSystem { spec, k, monomials, cosets, inverse_of };
    sys.check_consistent()?;
    Ok(sys)
}

impl GramSystem {
    pub fn dim(&self) -> usize {
        self.monomials.len() * self.k
    }

    fn check_consistent(&self) -> Result<()> {
        for (i, c) in self.cosets.iter().enumerate() {
            let partner = &self.cosets[self.inverse_of[i]].target;
            let dev = linalg::max_abs(&(partner - c.target.adjoint()));
            if dev > 1e-12 * (1.0 + linalg::max_abs(&c.target)) {
                return Err(Error::Inconsistent(format!(
                    "coefficients of {} and its inverse are not adjoint (deviation {dev:.3e})",
                    c.element
                )));
            }
        }
        Ok(())
    }

    fn block(&self, z: &CMat, r: usize, c: usize) -> CMat {
        z.view((r * self.k, c * self.k), (self.k, self.k)).into_owned()
    }

    pub fn coset_sum(&self, z: &CMat, coset: &Coset) -> CMat {
        coset.pairs.iter().fold(CMat::zeros(self.k, self.k), |acc, &(r, c)| acc + self.block(z, r, c))
    }

    /// Largest entrywise deviation of a coset sum from its target.
    pub fn affine_residual(&self, z: &CMat) -> f64 {
        self.cosets.iter().map(|c| linalg::max_abs(&(self.coset_sum(z, c) - &c.target))).fold(0.0, f64::max)
    }

    /// Orthogonal projection onto the affine constraint set: spreads each
    /// coset's defect evenly over its pairs.
    pub fn project_affine(&self, z: &mut CMat) {
        let k = self.k;
        for c in &self.cosets {
            let defect = (&c.target - self.coset_sum(z, c)) * cr(1.0 / c.pairs.len() as f64);
            for &(r, col) in &c.pairs {
                let mut v = z.view_mut((r * k, col * k), (k, k));
                v += &defect;
            }
        }
    }

    /// The affine-feasible starting point `Z_{r,c} = A_α / |C_α|`.
    pub fn syndrome(&self) -> CMat {
        let mut z = CMat::zeros(self.dim(), self.dim());
        self.project_affine(&mut z);
        z
    }

    /// One coset from each pair `{α, α⁻¹}`.
    pub fn representatives(&self) -> Vec<usize> {
        (0..self.cosets.len()).filter(|&i| self.inverse_of[i] >= i).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{Element, GroupSpec};

    fn w(letters: &[u32]) -> Word {
        Word::from_letters(letters.to_vec())
    }

    #[test]
    fn identity_has_one_constraint() {
        let spec = ProductSpec::w_only(GroupSpec::z2_free_product(2));
        let sys = gram_constraints(&NcPoly::identity(spec, 1), &Word::empty(), 0).unwrap();
        assert_eq!(sys.cosets.len(), 1);
        assert_eq!(sys.cosets[0].pairs, vec![(0, 0)]);
    }

    #[test]
    fn z2_cosets() {
        let spec = ProductSpec::w_only(GroupSpec::z2_free_product(2));
        let sys = gram_constraints(&NcPoly::identity(spec.clone(), 1), &w(&[2]), 0).unwrap();
        assert_eq!(sys.monomials.len(), 3);
        let total: usize = sys.cosets.iter().map(|c| c.pairs.len()).sum();
        assert_eq!(total, 9);
        for c in &sys.cosets {
            let len = c.element.w.num.len();
            match len {
                0 => assert_eq!(c.pairs.len(), 3),
                2 => assert_eq!(c.pairs.len(), 1),
                _ => assert_eq!(c.pairs.len(), 2),
            }
        }
    }

    #[test]
    fn chsh_monomials() {
        let spec = ProductSpec::new(GroupSpec::z2_free_product(2), Some(GroupSpec::z2_free_product(2))).unwrap();
        let sys = gram_constraints(&NcPoly::identity(spec.clone(), 1), &w(&[2]), 1).unwrap();
        assert_eq!(sys.monomials.len(), 9);
        let x1y1 = ProductElement { w: crate::words::LeftFraction::from_word(w(&[1])), y: Element::Word(w(&[1])) };
        let c = sys.cosets.iter().find(|c| c.element == x1y1).unwrap();
        // (e, x1y1), (x1, y1), (y1, x1), (x1y1, e)
        let brute = sys
            .monomials
            .iter()
            .flat_map(|r| sys.monomials.iter().map(move |c| (r, c)))
            .filter(|(r, c)| {
                let wf = spec.w.fraction(&r.w, &c.w).unwrap();
                let yf = spec
                    .y
                    .as_ref()
                    .unwrap()
                    .mul_elements(&spec.y.as_ref().unwrap().inverse_element(&r.y).unwrap(), &c.y)
                    .unwrap();
                wf == x1y1.w && yf == x1y1.y
            })
            .count();
        assert_eq!(brute, 4);
        assert_eq!(c.pairs.len(), brute);
    }

    #[test]
    fn out_of_range_terms_are_rejected() {
        let spec = ProductSpec::w_only(GroupSpec::z2_free_product(2));
        let mut p = NcPoly::identity(spec.clone(), 1);
        p.add_term(
            ProductElement { w: crate::words::LeftFraction::from_word(w(&[1, 2, 1])), y: Element::trivial() },
            linalg::identity(1),
        )
        .unwrap();
        assert!(gram_constraints(&p, &w(&[2]), 0).is_err());
    }
}
