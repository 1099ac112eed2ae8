//! Dense complex linear algebra shared by every module.
//!
//! Everything here works on [`CMat`], a heap-allocated complex matrix. The
//! helpers wrap nalgebra's Hermitian eigensolver and add the handful
//! of operations the completion and certification code needs repeatedly:
//! pseudoinverses with a rank cutoff, psd tests with a scale-relative
//! tolerance, Kronecker products and Haar sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Default relative psd tolerance: `λ_min ≥ −tol·(1 + ‖M‖₂)`.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Builds a complex matrix from real row-major data.
pub fn from_real_rows(rows: &[Vec<f64>]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    CMat::from_fn(r, cols, |i, j| cr(rows[i][j]))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

/// Largest entrywise modulus of `m − m*`.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let vals = hermitian_eigen(&dilation(m)).0;
    vals[vals.len() - 1].max(0.0)
}

/// `[[0, M], [M*, 0]]`, whose eigenpairs are `±σ` with `[u; ±v]/√2` for
/// each singular triple `(σ, u, v)` of `M`. Singular values are taken from
/// here rather than from nalgebra's SVD, which can return factors that do
/// not reproduce a nearly rank-deficient input.
fn dilation(m: &CMat) -> CMat {
    let (r, c) = m.shape();
    let mut h = CMat::zeros(r + c, r + c);
    h.view_mut((0, r), (r, c)).copy_from(m);
    h.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    h
}

/// Eigendecomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (DVector<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), CMat::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigenvalues(m: &CMat) -> Vec<f64> {
    hermitian_eigen(m).0.iter().copied().collect()
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitian_eigen(m).0[0]
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let v = hermitian_eigen(m).0;
    v[v.len() - 1]
}

/// Scale-relative psd test. Returns `(is_psd, λ_min)`.
pub fn psd_check(m: &CMat, tol: f64) -> (bool, f64) {
    let lmin = min_eigenvalue(m);
    let scale = 1.0 + spectral_norm(m);
    (lmin >= -tol * scale, lmin)
}

/// Nearest psd matrix in Frobenius norm (negative eigenvalues clipped).
pub fn psd_projection(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = vals[j].max(0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Moore–Penrose pseudoinverse. Singular values below
/// `max(rows, cols)·ε·σ_max` are treated as zero.
pub fn pinv(m: &CMat) -> CMat {
    pinv_rcond(m, (m.nrows().max(m.ncols()) as f64) * f64::EPSILON)
}

/// Pseudoinverse with singular values below `rcond·σ_max` treated as zero.
pub fn pinv_rcond(m: &CMat, rcond: f64) -> CMat {
    let (r, cols) = m.shape();
    if r == 0 || cols == 0 {
        return CMat::zeros(cols, r);
    }
    let (vals, vecs) = hermitian_eigen(&dilation(m));
    let smax = vals[vals.len() - 1].max(0.0);
    let cutoff = rcond * smax;
    let mut out = CMat::zeros(cols, r);
    for (k, &s) in vals.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let w = vecs.column(k);
            // u = √2·w_top, v = √2·w_bottom
            out += w.rows(r, cols) * w.rows(0, r).adjoint() * cr(2.0 / s);
        }
    }
    out
}

/// Hermitian psd square root (negative eigenvalues clipped to zero).
pub fn psd_sqrt(m: &CMat) -> CMat {
    spectral_map(m, |x| x.max(0.0).sqrt())
}

/// Pseudoinverse square root of a psd matrix.
pub fn psd_pinv_sqrt(m: &CMat) -> CMat {
    let (vals, _) = hermitian_eigen(m);
    let lmax = vals.iter().fold(0.0_f64, |a, &v| a.max(v));
    let cutoff = (m.nrows() as f64) * f64::EPSILON * lmax;
    spectral_map(m, |x| if x > cutoff { 1.0 / x.sqrt() } else { 0.0 })
}

fn spectral_map(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = f(vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Largest entrywise modulus of `U*U − I`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - identity(n)))
}

pub fn random_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    })
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let g = random_gaussian(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { cr(1.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random `rows × cols` isometry (`rows ≥ cols`).
pub fn random_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    let u = haar_unitary(rows, rng);
    u.columns(0, cols).into_owned()
}

/// Builds a block matrix from a grid of equally sized blocks.
pub fn block_matrix(blocks: &[Vec<CMat>]) -> CMat {
    let row_sizes: Vec<usize> = blocks.iter().map(|r| r[0].nrows()).collect();
    let col_sizes: Vec<usize> = blocks[0].iter().map(CMat::ncols).collect();
    let mut out = CMat::zeros(row_sizes.iter().sum(), col_sizes.iter().sum());
    let mut r0 = 0;
    for (bi, row) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (bj, b) in row.iter().enumerate() {
            out.view_mut((r0, c0), (row_sizes[bi], col_sizes[bj])).copy_from(b);
            c0 += col_sizes[bj];
        }
        r0 += row_sizes[bi];
    }
    out
}

pub fn block(m: &CMat, bi: usize, bj: usize, size: usize) -> CMat {
    m.view((bi * size, bj * size), (size, size)).into_owned()
}

/// Principal submatrix on the given blocks (block size `size`).
pub fn principal_blocks(m: &CMat, idx: &[usize], size: usize) -> CMat {
    let n = idx.len() * size;
    CMat::from_fn(n, n, |i, j| m[(idx[i / size] * size + i % size, idx[j / size] * size + j % size)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pinv_of_rank_deficient_matrix() {
        let m = from_real_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let p = pinv(&m);
        assert!(max_abs(&(p.clone() - m.clone() * cr(0.25))) < 1e-14);
        assert!(max_abs(&(m.clone() * &p * &m - m)) < 1e-14);
    }

    // rank one, all entries ±1 up to roundoff, imaginary parts ~1e-17
    fn near_sign_pattern() -> CMat {
        let (a, b, d, t) = (1.0000000000000002, 1.0000000000000007, 1.0000000000000013, 2.862293735361732e-17);
        CMat::from_column_slice(
            4,
            4,
            &[
                c(a, 0.0),
                c(b, 0.0),
                c(-1.0, 0.0),
                c(-b, t),
                c(b, 0.0),
                c(a, 0.0),
                c(-b, -t),
                c(-d, 0.0),
                c(-1.0, 0.0),
                c(-b, t),
                c(a, 0.0),
                c(b, 0.0),
                c(-b, -t),
                c(-d, 0.0),
                c(b, 0.0),
                c(a, 0.0),
            ],
        )
    }

    #[test]
    fn pinv_and_norm_survive_roundoff_imaginary_parts() {
        let m = near_sign_pattern();
        assert!((spectral_norm(&m) - max_eigenvalue(&m)).abs() < 1e-12);
        assert!((spectral_norm(&m) - 4.0).abs() < 1e-12);
        let p = pinv_rcond(&m, 1e-10);
        assert!(max_abs(&(&m * &p * &m - &m)) < 1e-12);
        assert!(max_abs(&(&p * &m * &p - &p)) < 1e-12);
        let signs = from_real_rows(&[vec![1.0], vec![1.0], vec![-1.0], vec![-1.0]]);
        assert!(max_abs(&(p - &signs * signs.transpose() * cr(1.0 / 16.0))) < 1e-12);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..7 {
            let u = haar_unitary(n, &mut rng);
            assert!(unitarity_residual(&u) < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_sorted_ascending() {
        let m = from_real_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 0.5]]);
        assert_eq!(eigenvalues(&m), vec![-1.0, 0.5, 2.0]);
    }

    #[test]
    fn psd_projection_clips() {
        let m = from_real_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let p = psd_projection(&m);
        assert!(min_eigenvalue(&p) > -1e-14);
        assert!((max_eigenvalue(&p) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn sqrt_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_gaussian(4, 4, &mut rng);
        let p = g.adjoint() * &g;
        let s = psd_sqrt(&p);
        assert!(max_abs(&(s.clone() * &s - p)) < 1e-12);
    }
}
