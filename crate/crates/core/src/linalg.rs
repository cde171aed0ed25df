//! Dense complex linear algebra helpers shared by the fibrewise routines.
//!
//! Everything here works on hermitian (or general square) `DMatrix<Complex64>`
//! values of a single fibre; grid-level logic lives in [`crate::matfield`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type CMat = DMatrix<Complex64>;

/// Eigenvalues within this distance are treated as one cluster by the
/// scalar functional calculus; the function is applied to the cluster mean.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-10;

/// Spectral cutoff below which eigenvalues/singular values count as zero
/// when forming support projections, pseudo-inverses and polar parts.
pub const RANK_CUTOFF: f64 = 1e-9;

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Matrix unit `e_{ij}` (1-based indices) in `M_n`.
pub fn unit(n: usize, i: usize, j: usize) -> CMat {
    debug_assert!(i >= 1 && i <= n && j >= 1 && j <= n);
    let mut m = CMat::zeros(n, n);
    m[(i - 1, j - 1)] = Complex64::new(1.0, 0.0);
    m
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Power-of-two magnitude of the largest entry. Rescaling by it is exact in
/// floating point and moves matrices with uniformly tiny entries out of the
/// regime where the iterative eigensolver can fail to converge and emit
/// infinities (squaring 1e-16-sized residual matrices lands near the
/// subnormal range).
fn pow2_scale(m: &CMat) -> f64 {
    let maxabs = m
        .iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0f64, f64::max);
    if maxabs == 0.0 || !maxabs.is_finite() {
        1.0
    } else {
        maxabs.log2().ceil().exp2()
    }
}

/// Largest singular value, computed as the square root of the top
/// eigenvalue of `m*·m` after exact power-of-two rescaling. The spectrum is
/// recomputed with the in-crate Jacobi solver if the fast path emits
/// non-finite values (observed on rank-deficient Gram matrices).
pub fn opnorm(m: &CMat) -> f64 {
    if m.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return 0.0;
    }
    let s = pow2_scale(m);
    let scaled = m.map(|z| z.unscale(s));
    let gram = scaled.adjoint() * &scaled;
    let mut vals: Vec<f64> = gram.symmetric_eigenvalues().iter().cloned().collect();
    if !vals.iter().all(|x| x.is_finite()) {
        vals = jacobi_hermitian(&gram, false).0;
    }
    vals.iter().fold(0.0f64, |a, &b| a.max(b)).max(0.0).sqrt() * s
}

/// Operator-norm distance from `m` to its hermitian part.
pub fn hermitian_defect(m: &CMat) -> f64 {
    opnorm(&(m - m.adjoint()))
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending and the
/// eigenvector columns permuted to match.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let s = pow2_scale(m);
    let (raw_vals, raw_vecs) = jacobi_hermitian(&m.map(|z| z.unscale(s)), true);
    let n = raw_vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_vals[a].total_cmp(&raw_vals[b]));
    let vals: Vec<f64> = order.iter().map(|&i| raw_vals[i] * s).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &raw_vecs.column(src));
    }
    (vals, vecs)
}

/// Cyclic complex Jacobi eigensolver for hermitian matrices. The QL-based
/// solver in nalgebra returns orthonormal but non-diagonalizing bases on
/// matrices with degenerate spectrum (mixing of order 1e-2 between
/// eigenspaces separated by O(1) gaps has been observed on 72x72 fibres),
/// which is fatal for spectral calculus. Jacobi rotations drive the
/// off-diagonal mass itself to zero, so the returned basis diagonalizes
/// the input regardless of multiplicities. Matrices here are small enough
/// (at most a few hundred rows) that the extra sweeps are affordable.
fn jacobi_hermitian(m: &CMat, want_vecs: bool) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let mut a = m.clone();
    // exact hermitian symmetrization of the working copy
    for p in 0..n {
        a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
        for q in 0..p {
            let avg = (a[(q, p)] + a[(p, q)].conj()).scale(0.5);
            a[(q, p)] = avg;
            a[(p, q)] = avg.conj();
        }
    }
    let mut v = if want_vecs {
        identity(n)
    } else {
        CMat::zeros(0, 0)
    };
    let tol = 1e-15 * frobenius(&a).max(f64::MIN_POSITIVE);
    let skip = tol * 1e-2 / n.max(1) as f64;
    for _ in 0..40 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let beta = a[(p, q)];
                let babs = beta.norm();
                if babs <= skip {
                    continue;
                }
                let alpha = a[(p, p)].re;
                let gamma = a[(q, q)].re;
                // unitary G: identity outside rows/cols p,q, block
                // [[c, s], [-s·e^{-iθ}, c·e^{-iθ}]] with β = |β|e^{iθ};
                // G*AG zeroes the (p,q) pair and shifts the diagonal by ±t|β|
                let phase = beta.unscale(babs);
                let tau = (gamma - alpha) / (2.0 * babs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase.conj().scale(s); // s·e^{-iθ}
                let cp = phase.conj().scale(c); // c·e^{-iθ}
                // columns: col_p ← c·col_p − s·e^{-iθ}·col_q, col_q ← s·col_p + c·e^{-iθ}·col_q
                for r in 0..n {
                    let ap = a[(r, p)];
                    let aq = a[(r, q)];
                    a[(r, p)] = ap.scale(c) - aq * sp;
                    a[(r, q)] = ap.scale(s) + aq * cp;
                }
                if want_vecs {
                    for r in 0..n {
                        let vp = v[(r, p)];
                        let vq = v[(r, q)];
                        v[(r, p)] = vp.scale(c) - vq * sp;
                        v[(r, q)] = vp.scale(s) + vq * cp;
                    }
                }
                // rows: row_p ← c·row_p − s·e^{iθ}·row_q, row_q ← s·row_p + c·e^{iθ}·row_q
                let spc = sp.conj();
                let cpc = cp.conj();
                for k in 0..n {
                    let ap = a[(p, k)];
                    let aq = a[(q, k)];
                    a[(p, k)] = ap.scale(c) - aq * spc;
                    a[(q, k)] = ap.scale(s) + aq * cpc;
                }
                // pin the transformed 2x2 block to its exact closed form
                a[(p, p)] = Complex64::new(alpha - t * babs, 0.0);
                a[(q, q)] = Complex64::new(gamma + t * babs, 0.0);
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let vals = (0..n).map(|i| a[(i, i)].re).collect();
    (vals, v)
}

/// Sorted (ascending) eigenvalues of a hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let s = pow2_scale(m);
    let scaled = m.map(|z| z.unscale(s));
    let mut v: Vec<f64> = scaled.symmetric_eigenvalues().iter().cloned().collect();
    if !v.iter().all(|x| x.is_finite()) {
        v = jacobi_hermitian(&scaled, false).0;
    }
    for l in &mut v {
        *l *= s;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Group sorted eigenvalues into clusters of diameter ≤ `tol` (chained) and
/// return the cluster mean for each index.
pub(crate) fn cluster_means(sorted: &[f64], tol: f64) -> Vec<f64> {
    let mut means = vec![0.0; sorted.len()];
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] - sorted[end - 1] <= tol {
            end += 1;
        }
        let mean = sorted[start..end].iter().sum::<f64>() / (end - start) as f64;
        for m in &mut means[start..end] {
            *m = mean;
        }
        start = end;
    }
    means
}

/// Apply a scalar function to a hermitian matrix through its spectrum,
/// with eigenvalue clustering at `cluster_tol`.
pub fn hermitian_apply(m: &CMat, f: impl Fn(f64) -> f64, cluster_tol: f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let means = cluster_means(&vals, cluster_tol);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fv = Complex64::new(f(means[j]), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vecs.adjoint()
}

/// Smallest eigenvalue of a hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    let s = pow2_scale(m);
    let scaled = m.map(|z| z.unscale(s));
    let mut vals: Vec<f64> = scaled.symmetric_eigenvalues().iter().cloned().collect();
    if !vals.iter().all(|x| x.is_finite()) {
        vals = jacobi_hermitian(&scaled, false).0;
    }
    vals.iter().fold(f64::INFINITY, |a, &b| a.min(b)) * s
}

/// Positive-semidefinite square root; eigenvalues below zero are clamped.
pub fn sqrt_psd(m: &CMat) -> CMat {
    hermitian_apply(m, |l| l.max(0.0).sqrt(), EIGEN_CLUSTER_TOL)
}

/// Moore-Penrose inverse of a PSD matrix with spectral cutoff.
pub fn pinv_psd(m: &CMat, cutoff: f64) -> CMat {
    hermitian_apply(m, |l| if l > cutoff { 1.0 / l } else { 0.0 }, EIGEN_CLUSTER_TOL)
}

/// Support projection of a PSD matrix: spectral projection onto eigenvalues
/// above `cutoff`.
pub fn support_proj(m: &CMat, cutoff: f64) -> CMat {
    hermitian_apply(m, |l| if l > cutoff { 1.0 } else { 0.0 }, EIGEN_CLUSTER_TOL)
}

/// Polar partial isometry of `v`: singular directions with singular value
/// above `cutoff` are mapped isometrically, the rest to zero. Computed as
/// `v · (v*v)^{-1/2}` with the cutoff applied to singular values.
pub fn polar_partial_isometry(v: &CMat, cutoff: f64) -> CMat {
    let gram = v.adjoint() * v;
    let inv_abs = hermitian_apply(
        &gram,
        |l| {
            let sigma = l.max(0.0).sqrt();
            if sigma > cutoff {
                1.0 / sigma
            } else {
                0.0
            }
        },
        EIGEN_CLUSTER_TOL,
    );
    v * inv_abs
}

/// Random hermitian matrix with unit operator norm (GUE direction).
pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let norm = opnorm(&h);
    if norm == 0.0 {
        h
    } else {
        h / Complex64::new(norm, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn opnorm_of_diagonal() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(-2.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]));
        assert!((opnorm(&m) - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn kron_and_units() {
        let e12 = unit(2, 1, 2);
        let id3 = identity(3);
        let k = kron(&e12, &id3);
        assert_eq!(k.nrows(), 6);
        // (e12 ⊗ 1)[(0,k),(1,k)] = 1 with row-major pair index i·3+k
        for kk in 0..3 {
            assert_eq!(k[(kk, 3 + kk)], Complex64::new(1.0, 0.0));
        }
        assert_eq!(frobenius(&k), 3.0f64.sqrt());
    }

    #[test]
    fn hermitian_apply_matches_diagonal_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 8);
        let sq = hermitian_apply(&h, |l| l * l, EIGEN_CLUSTER_TOL);
        assert!(opnorm(&(&sq - &h * &h)) <= 1e-12);
    }

    #[test]
    fn sqrt_and_pinv_of_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_hermitian(&mut rng, 6);
        let psd = &h * &h;
        let s = sqrt_psd(&psd);
        assert!(opnorm(&(&s * &s - &psd)) <= 1e-12);
        let pinv = pinv_psd(&psd, RANK_CUTOFF);
        let proj = support_proj(&psd, RANK_CUTOFF);
        assert!(opnorm(&(&psd * &pinv - &proj)) <= 1e-10);
    }

    #[test]
    fn polar_part_is_partial_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = CMat::from_fn(5, 5, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let w = polar_partial_isometry(&a, RANK_CUTOFF);
        let p = w.adjoint() * &w;
        // p is a projection and w·p = w
        assert!(opnorm(&(&p * &p - &p)) <= 1e-10);
        assert!(opnorm(&(&w * &p - &w)) <= 1e-10);
        // and v = w·|v|
        let absa = sqrt_psd(&(a.adjoint() * &a));
        assert!(opnorm(&(&w * &absa - &a)) <= 1e-10);
    }

    #[test]
    fn clustering_collapses_near_degenerate_pairs() {
        let d = nalgebra::DVector::from_vec(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5 + 1e-12, 0.0),
        ]);
        let m = CMat::from_diagonal(&d);
        // a steep ramp around 0.5 would separate the two without clustering
        let out = hermitian_apply(&m, |l| if l > 0.5 { 1.0 } else { 0.0 }, EIGEN_CLUSTER_TOL);
        let vals = hermitian_eigenvalues(&out);
        assert!((vals[1] - vals[0]).abs() <= 1e-14, "cluster split: {vals:?}");
    }
}
