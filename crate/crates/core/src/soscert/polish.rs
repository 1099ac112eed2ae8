//! Gauss–Newton refinement of a low-rank Gram factor.
//!
//! Alternating projections converge slowly when every feasible Gram matrix
//! is singular, which is the typical situation at a tight bound. Writing
//! `Z = 𝔅*𝔅` with `𝔅` of small rank turns feasibility into the nonlinear
//! least-squares problem `Σ_{(r,c) ∈ C_α} 𝔅_r*𝔅_c = A_α`, solved here with
//! damped Gauss–Newton steps.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, c, CMat, C64};

use super::gram::GramSystem;

struct Residual {
    values: Vec<C64>,
    jacobian: Option<CMat>,
}

fn residual(sys: &GramSystem, reps: &[usize], b: &CMat, with_jacobian: bool) -> Residual {
    let (r, n) = b.shape();
    let k = sys.k;
    let rows = reps.len() * k * k;
    let mut values = vec![C64::new(0.0, 0.0); rows];
    let mut jac = with_jacobian.then(|| CMat::zeros(rows, 2 * r * n));
    let im = c(0.0, 1.0);
    for (ri, &ci) in reps.iter().enumerate() {
        let coset = &sys.cosets[ci];
        for p in 0..k {
            for q in 0..k {
                let row = (ri * k + p) * k + q;
                let mut v = -coset.target[(p, q)];
                for &(i, j) in &coset.pairs {
                    let (c1, c2) = (i * k + p, j * k + q);
                    for a in 0..r {
                        v += b[(a, c1)].conj() * b[(a, c2)];
                        if let Some(jm) = jac.as_mut() {
                            jm[(row, a * n + c1)] += b[(a, c2)];
                            jm[(row, r * n + a * n + c1)] += -im * b[(a, c2)];
                            jm[(row, a * n + c2)] += b[(a, c1)].conj();
                            jm[(row, r * n + a * n + c2)] += im * b[(a, c1)].conj();
                        }
                    }
                }
                values[row] = v;
            }
        }
    }
    Residual { values, jacobian: jac }
}

fn max_modulus(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn sum_squares(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Steps over which the squared residual must at least halve.
const WINDOW: usize = 100;

/// Refines `b` (rows = rank) with Levenberg–Marquardt steps until the coset
/// residual stops improving or drops below `tol`. Returns the factor and its
/// largest residual.
pub fn gauss_newton(sys: &GramSystem, b: CMat, max_iter: usize, tol: f64) -> (CMat, f64) {
    let reps = sys.representatives();
    let (r, n) = b.shape();
    let mut b = b;
    let mut res = residual(sys, &reps, &b, true);
    let mut mu: Option<f64> = None;
    let mut history = vec![sum_squares(&res.values)];
    for _ in 0..max_iter {
        if max_modulus(&res.values) <= tol {
            break;
        }
        let jc = res.jacobian.take().expect("jacobian requested");
        let m = jc.nrows();
        let jr = DMatrix::from_fn(2 * m, 2 * r * n, |i, j| if i < m { jc[(i, j)].re } else { jc[(i - m, j)].im });
        let rv = DVector::from_fn(2 * m, |i, _| if i < m { res.values[i].re } else { res.values[i - m].im });
        let jtj = jr.transpose() * &jr;
        let grad = jr.transpose() * &rv;
        let diag_max = jtj.diagonal().iter().fold(0.0_f64, |a, &v| a.max(v)).max(f64::MIN_POSITIVE);
        let mut lambda = mu.unwrap_or(1e-6 * diag_max);
        let before = sum_squares(&res.values);
        let mut accepted = None;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += lambda;
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let trial = CMat::from_fn(r, n, |a, col| b[(a, col)] + c(step[a * n + col], step[r * n + a * n + col]));
            let tr = residual(sys, &reps, &trial, false);
            if sum_squares(&tr.values) < before {
                accepted = Some(trial);
                lambda = (lambda / 10.0).max(1e-15 * diag_max);
                break;
            }
            lambda *= 10.0;
        }
        mu = Some(lambda);
        let Some(next) = accepted else {
            break;
        };
        b = next;
        res = residual(sys, &reps, &b, true);
        history.push(sum_squares(&res.values));
        if history.len() > WINDOW && history[history.len() - 1] > 0.5 * history[history.len() - 1 - WINDOW] {
            break;
        }
    }
    let worst = max_modulus(&res.values);
    (b, worst)
}

/// Low-rank factor of a psd-ish matrix: `√λ_i·q_i*` for eigenvalues above
/// `rel·λ_max`.
pub fn low_rank_factor(z: &CMat, rel: f64) -> CMat {
    let (vals, vecs) = linalg::hermitian_eigen(z);
    let lmax = vals.iter().fold(0.0_f64, |a, &v| a.max(v));
    let keep: Vec<usize> = (0..vals.len()).rev().filter(|&i| vals[i] > rel * lmax).collect();
    CMat::from_fn(keep.len(), z.nrows(), |a, j| vecs[(j, keep[a])].conj() * vals[keep[a]].sqrt())
}

/// Refines the leading `r` rows of the spectral factor of `z` for
/// `r = 1, 2, …` and returns the first (or best) Gram matrix `𝔅*𝔅` with its
/// coset residual. Starting at the right rank matters: an overparametrized
/// factor converges slowly toward a singular solution.
pub fn polish(sys: &GramSystem, z: &CMat, tol: f64) -> Option<(CMat, f64)> {
    let mut best: Option<(CMat, f64)> = None;
    let full = low_rank_factor(z, 0.0);
    for r in 1..=full.nrows() {
        let b0 = full.rows(0, r).into_owned();
        let (b, res) = gauss_newton(sys, b0, 2000, tol);
        if best.as_ref().is_none_or(|(_, r)| res < *r) {
            best = Some((b.adjoint() * &b, res));
        }
        if res <= tol {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soscert::{gram_constraints, NcPoly};
    use crate::words::{GroupSpec, LeftFraction, ProductElement, ProductSpec, Word};

    #[test]
    fn polishes_the_unique_rank_one_gram() {
        // e − x1 over Z2: the only feasible Gram is [[1/2, −1/2], [−1/2, 1/2]]
        let spec = ProductSpec::w_only(GroupSpec::z2_free_product(1));
        let mut a = NcPoly::identity(spec.clone(), 1);
        a.add_term(
            ProductElement { w: LeftFraction::from_word(Word::from_letters(vec![1])), y: spec.y_identity() },
            linalg::from_real_rows(&[vec![-1.0]]),
        )
        .unwrap();
        let sys = gram_constraints(&a, &Word::from_letters(vec![1]), 0).unwrap();
        let start = linalg::from_real_rows(&[vec![0.6, -0.4], vec![-0.4, 0.4]]);
        let (z, res) = polish(&sys, &start, 1e-14).unwrap();
        assert!(res <= 1e-14);
        // the feasible point is singular, so Z is only determined to about √res
        assert!((z[(0, 0)].re - 0.5).abs() < 1e-6);
        assert!((z[(0, 1)].re + 0.5).abs() < 1e-12);
    }
}
