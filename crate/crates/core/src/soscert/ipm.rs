//! Primal-dual interior-point method for
//! `max tr(Z_{e,e})` subject to the Gram constraints and `Z ⪰ 0`.
//!
//! Used to pick a distinguished point of the feasible set: in the
//! univariate case the maximizer is the Gram matrix of the outer factor.
//! Complex Hermitian HKM search direction with an infeasible start.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, C64};

use super::gram::GramSystem;

struct Constraint {
    matrix: CMat,
    rhs: f64,
}

// Re(w·Z[a, b]) = tr(M·Z) with M[b, a] = w/2 and M[a, b] = conj(w)/2.
fn add_entry(m: &mut CMat, a: usize, b: usize, w: C64) {
    m[(b, a)] += w * 0.5;
    m[(a, b)] += w.conj() * 0.5;
}

fn constraints(sys: &GramSystem) -> Vec<Constraint> {
    let n = sys.dim();
    let k = sys.k;
    let mut out = Vec::new();
    for ci in sys.representatives() {
        let coset = &sys.cosets[ci];
        let self_inverse = sys.inverse_of[ci] == ci;
        for p in 0..k {
            for q in 0..k {
                if self_inverse && q < p {
                    continue;
                }
                let parts: &[(C64, bool)] = if self_inverse && p == q {
                    &[(C64::new(1.0, 0.0), true)]
                } else {
                    &[(C64::new(1.0, 0.0), true), (C64::new(0.0, -1.0), false)]
                };
                for &(w, real) in parts {
                    let mut m = CMat::zeros(n, n);
                    for &(r, col) in &coset.pairs {
                        add_entry(&mut m, r * k + p, col * k + q, w);
                    }
                    let t = coset.target[(p, q)];
                    out.push(Constraint { matrix: m, rhs: if real { t.re } else { t.im } });
                }
            }
        }
    }
    out
}

fn apply(cons: &[Constraint], x: &CMat) -> DVector<f64> {
    DVector::from_iterator(cons.len(), cons.iter().map(|c| trace_product(&c.matrix, x)))
}

fn adjoint_apply(cons: &[Constraint], y: &DVector<f64>, n: usize) -> CMat {
    cons.iter().zip(y.iter()).fold(CMat::zeros(n, n), |acc, (c, &yi)| acc + &c.matrix * cr(yi))
}

// Re tr(A·B) for square matrices.
fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().cholesky().map(|ch| ch.inverse())
}

// Largest step in (0, 1] keeping `x + α·dx` positive definite, damped.
fn step_length(x: &CMat, dx: &CMat) -> f64 {
    let Some(ch) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = ch.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let t = &linv * dx * linv.adjoint();
    let lmin = linalg::min_eigenvalue(&t);
    if lmin >= 0.0 {
        1.0
    } else {
        (-0.95 / lmin).min(1.0)
    }
}

/// Outcome of the interior-point solve.
#[derive(Clone, Debug)]
pub struct IpmResult {
    pub z: CMat,
    pub iterations: usize,
    pub gap: f64,
    pub primal_residual: f64,
}

/// Maximizes `tr(Z_{e,e})` over the feasible Gram matrices. Assumes the
/// first monomial is the identity.
pub fn maximize_identity_block(sys: &GramSystem, max_iter: usize, tol: f64) -> Result<IpmResult> {
    let n = sys.dim();
    let k = sys.k;
    let cons = constraints(sys);
    let b = DVector::from_iterator(cons.len(), cons.iter().map(|c| c.rhs));
    let mut cost = CMat::zeros(n, n);
    for i in 0..k {
        cost[(i, i)] = cr(-1.0);
    }
    let bscale = 1.0 + b.amax();
    let mut x = linalg::identity(n);
    let mut s = linalg::identity(n);
    let mut y = DVector::zeros(cons.len());
    let mut sigma = 0.1;
    for it in 0..max_iter {
        let rp = &b - apply(&cons, &x);
        let rd = &cost - adjoint_apply(&cons, &y, n) - &s;
        let mu = trace_product(&x, &s) / n as f64;
        let pres = rp.amax();
        if pres <= tol * bscale && linalg::max_abs(&rd) <= tol && mu <= tol {
            return Ok(IpmResult { z: x, iterations: it, gap: mu, primal_residual: pres });
        }
        // past roundoff the slack can lose definiteness; keep the last iterate
        let Some(sinv) = inverse(&s) else {
            return Ok(IpmResult { z: x, iterations: it, gap: mu, primal_residual: pres });
        };
        let xg: Vec<CMat> = cons.iter().map(|c| &x * &c.matrix * &sinv).collect();
        let m = DMatrix::from_fn(cons.len(), cons.len(), |i, j| trace_product(&cons[i].matrix, &xg[j]));
        let centre = &sinv * cr(sigma * mu) - &x - linalg::hermitian_part(&(&x * &rd * &sinv));
        let rhs = &rp - apply(&cons, &centre);
        let dy = match m.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => m.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::Inconsistent(e.to_string()))?,
        };
        let ds = &rd - adjoint_apply(&cons, &dy, n);
        let dx = &sinv * cr(sigma * mu) - &x - linalg::hermitian_part(&(&x * &ds * &sinv));
        let ap = step_length(&x, &dx);
        let ad = step_length(&s, &ds);
        x = linalg::hermitian_part(&(&x + &dx * cr(ap)));
        s = linalg::hermitian_part(&(&s + &ds * cr(ad)));
        y += &dy * ad;
        sigma = if ap.min(ad) > 0.8 {
            0.05
        } else if ap.min(ad) > 0.4 {
            0.2
        } else {
            0.5
        };
    }
    let pres = (&b - apply(&cons, &x)).amax();
    let mu = trace_product(&x, &s) / n as f64;
    Ok(IpmResult { z: x, iterations: max_iter, gap: mu, primal_residual: pres })
}
