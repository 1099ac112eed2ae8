use crate::error::Result;
use crate::linalg::{self, CMat};

use super::gram::GramSystem;
use super::{ipm, polish};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative psd tolerance and target affine residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Run the low-rank polish after this many iterations, then at every
    /// doubling.
    pub polish_after: usize,
    /// Start from the maximizer of `tr(Z_{e,e})` instead of alternating
    /// projections.
    pub extremal: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 50_000, polish_after: 250, extremal: false }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub z: CMat,
    pub iterations: usize,
    /// `max(0, −λ_min(Z))`.
    pub psd_residual: f64,
    pub affine_residual: f64,
    pub polished: bool,
}

/// Result of a feasibility run. `Stalled` means the iteration cap was hit;
/// it is not a proof of infeasibility.
#[derive(Clone, Debug)]
pub enum Feasibility {
    Feasible(Solution),
    Stalled(Solution),
}

fn psd_ok(z: &CMat, tol: f64) -> (bool, f64) {
    linalg::psd_check(z, tol)
}

fn finish(sys: &GramSystem, mut z: CMat, iterations: usize, polished: bool) -> Solution {
    sys.project_affine(&mut z);
    let z = linalg::hermitian_part(&z);
    let lmin = linalg::min_eigenvalue(&z);
    Solution { affine_residual: sys.affine_residual(&z), psd_residual: (-lmin).max(0.0), z, iterations, polished }
}

fn try_polish(sys: &GramSystem, z: &CMat, opts: &SolverOptions, iterations: usize) -> Option<Solution> {
    let scale = 1.0 + sys.cosets.iter().map(|c| linalg::max_abs(&c.target)).fold(0.0, f64::max);
    let (zp, res) = polish::polish(sys, z, 1e-14 * scale)?;
    if res > opts.tol * scale {
        return None;
    }
    let sol = finish(sys, zp, iterations, true);
    psd_ok(&sol.z, opts.tol).0.then_some(sol)
}

/// Searches for `Z ⪰ 0` satisfying the Gram constraints with Dykstra's
/// alternating projections between the psd cone and the affine set,
/// periodically attempting a low-rank polish.
pub fn solve_feasibility(sys: &GramSystem, opts: &SolverOptions) -> Result<Feasibility> {
    if opts.extremal {
        let start = ipm::maximize_identity_block(sys, 200, 1e-10)?;
        if let Some(sol) = try_polish(sys, &start.z, opts, start.iterations) {
            return Ok(Feasibility::Feasible(sol));
        }
    }
    let mut x = sys.syndrome();
    let mut p = CMat::zeros(x.nrows(), x.ncols());
    let mut next_polish = opts.polish_after.max(1);
    for it in 1..=opts.max_iter {
        let (ok, _) = psd_ok(&x, opts.tol);
        if ok {
            return Ok(Feasibility::Feasible(finish(sys, x, it, false)));
        }
        if it == next_polish {
            next_polish *= 2;
            if let Some(sol) = try_polish(sys, &x, opts, it) {
                return Ok(Feasibility::Feasible(sol));
            }
        }
        let y = linalg::psd_projection(&(&x + &p));
        p = &x + &p - &y;
        x = y;
        sys.project_affine(&mut x);
    }
    if let Some(sol) = try_polish(sys, &x, opts, opts.max_iter) {
        return Ok(Feasibility::Feasible(sol));
    }
    Ok(Feasibility::Stalled(finish(sys, x, opts.max_iter, false)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cr;
    use crate::soscert::{gram_constraints, y_only, NcPoly};
    use crate::words::{Element, GroupSpec, ProductElement, Word};

    #[test]
    fn identity_is_immediate() {
        let spec = crate::words::ProductSpec::w_only(GroupSpec::z2_free_product(2));
        let sys = gram_constraints(&NcPoly::identity(spec, 1), &Word::empty(), 0).unwrap();
        match solve_feasibility(&sys, &SolverOptions::default()).unwrap() {
            Feasibility::Feasible(s) => {
                assert_eq!(s.iterations, 1);
                assert_eq!(s.z, linalg::identity(1));
            }
            Feasibility::Stalled(_) => panic!("stalled"),
        }
    }

    #[test]
    fn two_plus_cosine_is_feasible() {
        let spec = y_only(GroupSpec::free_abelian(1));
        let mut a = NcPoly::identity(spec, 1).scale(cr(2.0));
        for p in [1, -1] {
            a.add_term(ProductElement { w: Default::default(), y: Element::Lattice(vec![p]) }, linalg::identity(1))
                .unwrap();
        }
        let sys = gram_constraints(&a, &Word::empty(), 1).unwrap();
        let Feasibility::Feasible(s) = solve_feasibility(&sys, &SolverOptions::default()).unwrap() else {
            panic!("stalled");
        };
        assert!(s.affine_residual < 1e-13);
        assert!(linalg::min_eigenvalue(&s.z) >= -1e-9);
        let sums: Vec<f64> = sys.cosets.iter().map(|c| sys.coset_sum(&s.z, c)[(0, 0)].re).collect();
        assert!(sums.iter().any(|&v| (v - 2.0).abs() < 1e-13));
    }

    #[test]
    fn negative_constant_stalls() {
        let spec = crate::words::ProductSpec::w_only(GroupSpec::z2_free_product(2));
        let a = NcPoly::identity(spec, 1).scale(cr(-1.0));
        let sys = gram_constraints(&a, &Word::from_letters(vec![2]), 0).unwrap();
        let opts = SolverOptions { max_iter: 2000, ..Default::default() };
        assert!(matches!(solve_feasibility(&sys, &opts).unwrap(), Feasibility::Stalled(_)));
    }
}
