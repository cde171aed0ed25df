//! Matrix-valued functions on `[0,1]`, sampled on a uniform grid that always
//! contains both endpoints, together with the boundary conditions of
//! dimension-drop and Razak blocks.
//!
//! A [`MatFun`] is purely a list of fibres: no operation ever interpolates
//! between grid points, so residuals measure the stated identities at the
//! sampled fibres and nothing else. The companion grid-refinement check
//! (M vs 2M−1) quantifies sampling sensitivity separately.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, EIGEN_CLUSTER_TOL};
use crate::plfun::PLFunc;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Uniform sampling grid `t_j = j/(M−1)`, `0 ≤ j < M`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub samples: usize,
}

impl GridSpec {
    pub fn new(samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::Precondition(format!(
                "grid needs at least 2 samples, got {samples}"
            )));
        }
        Ok(GridSpec { samples })
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 / (self.samples - 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples).map(move |j| self.t(j))
    }

    /// The refined grid with doubled resolution (`M → 2M−1`); every point of
    /// the coarse grid is a point of the refined one.
    pub fn refine(&self) -> GridSpec {
        GridSpec {
            samples: 2 * self.samples - 1,
        }
    }

    /// Index of the last sample (t = 1).
    pub fn last(&self) -> usize {
        self.samples - 1
    }
}

/// Boundary conditions of the ambient continuous-field algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BlockSpec {
    /// No boundary condition: all of `C([0,1], M_dim)`.
    Full,
    /// Dimension-drop block: `f(0) ∈ M_p⊗1_q`, `f(1) ∈ 1_p⊗M_q`,
    /// with `p`, `q` coprime. Fibre dimension `p·q`.
    DimDrop { p: usize, q: usize },
    /// Razak block: `f(0) = a⊗1_m` and `f(1) = a⊗1_{m−1}` (embedded in the
    /// corner spanned by the first `m−1` basis vectors of the second
    /// factor) for one and the same `a ∈ M_n`. Fibre dimension `n·m`.
    Razak { n: usize, m: usize },
}

impl BlockSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            BlockSpec::Full => Ok(()),
            BlockSpec::DimDrop { p, q } => {
                if p < 2 || q < 2 {
                    return Err(Error::Precondition(format!(
                        "dimension-drop block needs p, q >= 2, got ({p}, {q})"
                    )));
                }
                if num_integer::gcd(p, q) != 1 {
                    return Err(Error::Precondition(format!(
                        "dimension-drop block needs coprime (p, q), got ({p}, {q})"
                    )));
                }
                if p * q != dim {
                    return Err(Error::Dimension(format!(
                        "fibre dimension {dim} does not match p·q = {}",
                        p * q
                    )));
                }
                Ok(())
            }
            BlockSpec::Razak { n, m } => {
                if n < 1 || m < 2 {
                    return Err(Error::Precondition(format!(
                        "Razak block needs n >= 1 and m >= 2, got ({n}, {m})"
                    )));
                }
                if n * m != dim {
                    return Err(Error::Dimension(format!(
                        "fibre dimension {dim} does not match n·m = {}",
                        n * m
                    )));
                }
                Ok(())
            }
        }
    }
}

/// A matrix-valued function on `[0,1]`, given by its fibres at the grid
/// points, with an ambient block recording the intended boundary behaviour.
#[derive(Clone, Debug, PartialEq)]
pub struct MatFun {
    pub grid: GridSpec,
    pub dim: usize,
    pub block: BlockSpec,
    samples: Vec<CMat>,
}

impl MatFun {
    pub fn from_samples(grid: GridSpec, block: BlockSpec, samples: Vec<CMat>) -> Result<Self> {
        if samples.len() != grid.samples {
            return Err(Error::GridMismatch {
                left: grid.samples,
                right: samples.len(),
            });
        }
        let dim = samples[0].nrows();
        for (j, s) in samples.iter().enumerate() {
            if s.nrows() != dim || s.ncols() != dim {
                return Err(Error::Dimension(format!(
                    "sample {j} is {}x{}, expected {dim}x{dim}",
                    s.nrows(),
                    s.ncols()
                )));
            }
        }
        block.validate(dim)?;
        Ok(MatFun {
            grid,
            dim,
            block,
            samples,
        })
    }

    pub fn from_fn(
        grid: GridSpec,
        block: BlockSpec,
        f: impl FnMut(f64) -> CMat,
    ) -> Result<Self> {
        let samples: Vec<CMat> = grid.points().map(f).collect();
        MatFun::from_samples(grid, block, samples)
    }

    pub fn constant(grid: GridSpec, block: BlockSpec, m: CMat) -> Result<Self> {
        MatFun::from_samples(grid, block, vec![m; grid.samples])
    }

    pub fn zero(grid: GridSpec, block: BlockSpec, dim: usize) -> Result<Self> {
        MatFun::constant(grid, block, CMat::zeros(dim, dim))
    }

    pub fn identity(grid: GridSpec, block: BlockSpec, dim: usize) -> Result<Self> {
        MatFun::constant(grid, block, CMat::identity(dim, dim))
    }

    pub fn fibre(&self, j: usize) -> &CMat {
        &self.samples[j]
    }

    pub fn fibres(&self) -> &[CMat] {
        &self.samples
    }

    fn check_compatible(&self, other: &MatFun) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.samples,
                right: other.grid.samples,
            });
        }
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "fibre dimensions {} and {} differ",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    fn zip(&self, other: &MatFun, op: impl Fn(&CMat, &CMat) -> CMat) -> Result<MatFun> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| op(a, b))
            .collect();
        MatFun::from_samples(self.grid, self.block, samples)
    }

    pub fn add(&self, other: &MatFun) -> Result<MatFun> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &MatFun) -> Result<MatFun> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &MatFun) -> Result<MatFun> {
        self.zip(other, |a, b| a * b)
    }

    pub fn adjoint(&self) -> MatFun {
        let samples = self.samples.iter().map(|a| a.adjoint()).collect();
        MatFun::from_samples(self.grid, self.block, samples).expect("shape preserved")
    }

    pub fn scale(&self, c: Complex64) -> MatFun {
        let samples = self.samples.iter().map(|a| a * c).collect();
        MatFun::from_samples(self.grid, self.block, samples).expect("shape preserved")
    }

    /// Multiply fibre `j` by the scalar `s(t_j)`.
    pub fn scale_pointwise(&self, s: impl Fn(f64) -> f64) -> MatFun {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, a)| a * Complex64::new(s(self.grid.t(j)), 0.0))
            .collect();
        MatFun::from_samples(self.grid, self.block, samples).expect("shape preserved")
    }

    pub fn map_fibres(&self, f: impl Fn(usize, &CMat) -> CMat) -> Result<MatFun> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, a)| f(j, a))
            .collect();
        MatFun::from_samples(self.grid, self.block, samples)
    }

    pub fn one_minus(&self) -> MatFun {
        let id = CMat::identity(self.dim, self.dim);
        let samples = self.samples.iter().map(|a| &id - a).collect();
        MatFun::from_samples(self.grid, self.block, samples).expect("shape preserved")
    }

    /// Sup over the grid of the fibre operator norm.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_with_t().0
    }

    /// Sup norm together with the grid point attaining it.
    pub fn sup_norm_with_t(&self) -> (f64, f64) {
        let mut best = (0.0f64, 0.0f64);
        for (j, s) in self.samples.iter().enumerate() {
            let n = linalg::opnorm(s);
            if n > best.0 {
                best = (n, self.grid.t(j));
            }
        }
        best
    }

    /// Per-fibre operator norms, for residual-curve export.
    pub fn norm_curve(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .enumerate()
            .map(|(j, s)| (self.grid.t(j), linalg::opnorm(s)))
            .collect()
    }

    pub fn sup_distance(&self, other: &MatFun) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.samples
            .iter()
            .map(linalg::hermitian_defect)
            .fold(0.0, f64::max)
    }

    /// Distance of the endpoint fibres to the block's boundary subspaces,
    /// via orthogonal projection in the Hilbert-Schmidt inner product,
    /// reported in operator norm. For a Razak block the projection is onto
    /// the joint subspace `{(a⊗1_m, a⊗1_{m−1}) : a ∈ M_n}`, so one and the
    /// same `a` serves both endpoints.
    pub fn membership_residual(&self) -> Result<f64> {
        match self.block {
            BlockSpec::Full => Ok(0.0),
            BlockSpec::DimDrop { p, q } => {
                let x0 = &self.samples[0];
                let x1 = &self.samples[self.grid.last()];
                let a0 = partial_trace_second(x0, p, q) / Complex64::new(q as f64, 0.0);
                let proj0 = linalg::kron(&a0, &linalg::identity(q));
                let a1 = partial_trace_first(x1, p, q) / Complex64::new(p as f64, 0.0);
                let proj1 = linalg::kron(&linalg::identity(p), &a1);
                Ok(linalg::opnorm(&(x0 - proj0)).max(linalg::opnorm(&(x1 - proj1))))
            }
            BlockSpec::Razak { n, m } => {
                let x0 = &self.samples[0];
                let x1 = &self.samples[self.grid.last()];
                // corner projection 1_{m−1}⊕0 in the second factor
                let mut corner = CMat::zeros(m, m);
                for k in 0..m - 1 {
                    corner[(k, k)] = Complex64::new(1.0, 0.0);
                }
                let tr0 = partial_trace_second(x0, n, m);
                let tr1 = partial_trace_second_masked(x1, n, m, m - 1);
                let a = (tr0 + tr1) / Complex64::new((2 * m - 1) as f64, 0.0);
                let p0 = linalg::kron(&a, &linalg::identity(m));
                let p1 = linalg::kron(&a, &corner);
                Ok(linalg::opnorm(&(x0 - p0)).max(linalg::opnorm(&(x1 - p1))))
            }
        }
    }

    /// Scalar functional calculus: apply the piecewise-linear `f` to each
    /// fibre of a self-adjoint `x` with spectrum in `[0,1]` (both checked to
    /// `tol`). Eigenvalues within [`EIGEN_CLUSTER_TOL`] are clustered and
    /// `f` is evaluated at the cluster mean.
    pub fn scalar_calc(&self, f: &PLFunc, tol: f64) -> Result<MatFun> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let t = self.grid.t(j);
                let defect = linalg::hermitian_defect(x);
                if defect > tol {
                    return Err(Error::NotSelfAdjoint { defect, t });
                }
                let (vals, vecs) = linalg::hermitian_eigen(x);
                if let Some(&lo) = vals.first() {
                    if lo < -tol {
                        return Err(Error::Spectrum { value: lo, t, tol });
                    }
                }
                if let Some(&hi) = vals.last() {
                    if hi > 1.0 + tol {
                        return Err(Error::Spectrum { value: hi, t, tol });
                    }
                }
                // reuse the decomposition rather than calling hermitian_apply
                let means = linalg::cluster_means(&vals, EIGEN_CLUSTER_TOL);
                let n = vals.len();
                let mut scaled = vecs.clone();
                for c in 0..n {
                    let fv = Complex64::new(f.eval_f64_clamped(means[c]), 0.0);
                    for r in 0..n {
                        scaled[(r, c)] *= fv;
                    }
                }
                Ok(scaled * vecs.adjoint())
            })
            .collect::<Result<Vec<_>>>()?;
        MatFun::from_samples(self.grid, self.block, samples)
    }

    /// Fibrewise PSD square root (self-adjointness and near-positivity
    /// checked to `tol`; eigenvalues in `[−tol, 0]` are clamped to 0).
    pub fn sqrt_psd(&self, tol: f64) -> Result<MatFun> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let t = self.grid.t(j);
                let defect = linalg::hermitian_defect(x);
                if defect > tol {
                    return Err(Error::NotSelfAdjoint { defect, t });
                }
                let lo = linalg::min_eigenvalue(x);
                if lo < -tol {
                    return Err(Error::Spectrum { value: lo, t, tol });
                }
                Ok(linalg::sqrt_psd(x))
            })
            .collect::<Result<Vec<_>>>()?;
        MatFun::from_samples(self.grid, self.block, samples)
    }
}

/// Partial trace over the second tensor factor: for `x ∈ M_p⊗M_q`,
/// `ptr(x)[i,j] = Σ_k x[(i,k),(j,k)]`.
pub fn partial_trace_second(x: &CMat, p: usize, q: usize) -> CMat {
    let mut out = CMat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..q {
                s += x[(i * q + k, j * q + k)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Partial trace over the second factor restricted to its first `upto`
/// basis vectors.
fn partial_trace_second_masked(x: &CMat, p: usize, q: usize, upto: usize) -> CMat {
    let mut out = CMat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..upto {
                s += x[(i * q + k, j * q + k)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Partial trace over the first tensor factor: `ptr(x)[k,l] = Σ_i x[(i,k),(i,l)]`.
pub fn partial_trace_first(x: &CMat, p: usize, q: usize) -> CMat {
    let mut out = CMat::zeros(q, q);
    for k in 0..q {
        for l in 0..q {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..p {
                s += x[(i * q + k, i * q + l)];
            }
            out[(k, l)] = s;
        }
    }
    out
}

/// The flip unitary on `C^q ⊗ C^q`: `F(ξ⊗η) = η⊗ξ`.
pub fn flip_matrix(q: usize) -> CMat {
    let mut f = CMat::zeros(q * q, q * q);
    for i in 0..q {
        for j in 0..q {
            f[(i * q + j, j * q + i)] = Complex64::new(1.0, 0.0);
        }
    }
    f
}

/// One fibre of the flip path: `u(t) = P_sym + e^{iπt}·P_asym` in `M_q⊗M_q`,
/// where `P_sym`, `P_asym` are the spectral projections of the flip.
/// `u(0) = 1` and conjugation by `u(1)` swaps the two tensor factors.
pub fn flip_unitary(q: usize, t: f64) -> CMat {
    let flip = flip_matrix(q);
    let id = linalg::identity(q * q);
    let p_sym = (&id + &flip) * Complex64::new(0.5, 0.0);
    let p_asym = (&id - &flip) * Complex64::new(0.5, 0.0);
    let phase = Complex64::new(0.0, std::f64::consts::PI * t).exp();
    p_sym + p_asym * phase
}

/// The flip path sampled on a grid.
pub fn flip_path(q: usize, grid: GridSpec) -> MatFun {
    MatFun::from_fn(grid, BlockSpec::Full, |t| flip_unitary(q, t)).expect("static construction")
}

// --- serialization -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MatFunWire {
    schema: u32,
    grid: GridSpec,
    dim: usize,
    block: BlockSpec,
    /// per grid point, row-major [re, im] pairs
    samples: Vec<Vec<[f64; 2]>>,
}

impl Serialize for MatFun {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let samples = self
            .samples
            .iter()
            .map(|m| {
                let mut row_major = Vec::with_capacity(self.dim * self.dim);
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        let z = m[(i, j)];
                        row_major.push([z.re, z.im]);
                    }
                }
                row_major
            })
            .collect();
        MatFunWire {
            schema: 1,
            grid: self.grid,
            dim: self.dim,
            block: self.block,
            samples,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MatFun {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = MatFunWire::deserialize(deserializer)?;
        if wire.schema != 1 {
            return Err(D::Error::custom(format!("unsupported schema {}", wire.schema)));
        }
        let dim = wire.dim;
        let samples = wire
            .samples
            .iter()
            .map(|flat| {
                if flat.len() != dim * dim {
                    return Err(D::Error::custom("sample length does not match dim^2"));
                }
                let mut m = CMat::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        let [re, im] = flat[i * dim + j];
                        m[(i, j)] = Complex64::new(re, im);
                    }
                }
                Ok(m)
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        MatFun::from_samples(wire.grid, wire.block, samples).map_err(D::Error::custom)
    }
}

impl MatFun {
    /// CSV rows `t_index,row,col,re,im` with a header line; float formatting
    /// uses Rust's shortest round-trip representation, so parsing the CSV
    /// reproduces the samples bit-exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_index,row,col,re,im\n");
        for (jt, m) in self.samples.iter().enumerate() {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let z = m[(i, j)];
                    out.push_str(&format!("{jt},{i},{j},{},{}\n", z.re, z.im));
                }
            }
        }
        out
    }

    pub fn from_csv(grid: GridSpec, block: BlockSpec, dim: usize, csv: &str) -> Result<Self> {
        let mut samples = vec![CMat::zeros(dim, dim); grid.samples];
        for (lineno, line) in csv.lines().enumerate() {
            if lineno == 0 {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Serialization(format!(
                    "csv line {lineno}: expected 5 columns"
                )));
            }
            let parse_idx = |s: &str| -> Result<usize> {
                s.parse()
                    .map_err(|e| Error::Serialization(format!("csv line {lineno}: {e}")))
            };
            let parse_f = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|e| Error::Serialization(format!("csv line {lineno}: {e}")))
            };
            let jt = parse_idx(cols[0])?;
            let i = parse_idx(cols[1])?;
            let j = parse_idx(cols[2])?;
            if jt >= grid.samples || i >= dim || j >= dim {
                return Err(Error::Serialization(format!(
                    "csv line {lineno}: index out of range"
                )));
            }
            samples[jt][(i, j)] = Complex64::new(parse_f(cols[3])?, parse_f(cols[4])?);
        }
        MatFun::from_samples(grid, block, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plfun::canon;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid65() -> GridSpec {
        GridSpec::new(65).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_points_and_refinement() {
        let g = GridSpec::new(129).unwrap();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(g.last()), 1.0);
        let r = g.refine();
        assert_eq!(r.samples, 257);
        // coarse points are refined points
        for j in 0..g.samples {
            assert_eq!(g.t(j), r.t(2 * j));
        }
        assert!(GridSpec::new(1).is_err());
    }

    #[test]
    fn block_validation() {
        assert!(BlockSpec::DimDrop { p: 2, q: 3 }.validate(6).is_ok());
        assert!(BlockSpec::DimDrop { p: 2, q: 4 }.validate(8).is_err());
        assert!(BlockSpec::DimDrop { p: 2, q: 3 }.validate(5).is_err());
        assert!(BlockSpec::Razak { n: 2, m: 3 }.validate(6).is_ok());
        assert!(BlockSpec::Razak { n: 2, m: 1 }.validate(2).is_err());
    }

    #[test]
    fn sup_norm_of_identity() {
        let x = MatFun::identity(grid65(), BlockSpec::DimDrop { p: 2, q: 3 }, 6).unwrap();
        assert_eq!(x.sup_norm(), 1.0);
        assert_eq!(x.membership_residual().unwrap(), 0.0);
    }

    #[test]
    fn cstar_identity_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let x = MatFun::from_fn(GridSpec::new(17).unwrap(), BlockSpec::Full, |t| {
                let m = CMat::from_fn(5, 5, |_, _| {
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                });
                m * c(1.0 + t)
            })
            .unwrap();
            let lhs = x.adjoint().mul(&x).unwrap().sup_norm();
            let rhs = x.sup_norm().powi(2);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }

    // Membership oracle built by hand: for the constant field e11⊗e11 in the
    // (2,3) dimension-drop block, the HS projections of the endpoint fibres
    // are (1/3)·e11⊗1_3 and (1/2)·1_2⊗e11, with defects of norm 2/3 and 1/2.
    #[test]
    fn membership_of_rank_one_constant_matches_hand_projection() {
        let e11 = linalg::unit(2, 1, 1);
        let e11q = linalg::unit(3, 1, 1);
        let x = linalg::kron(&e11, &e11q);
        let f = MatFun::constant(grid65(), BlockSpec::DimDrop { p: 2, q: 3 }, x.clone()).unwrap();

        let proj0 = linalg::kron(&e11, &linalg::identity(3)) * c(1.0 / 3.0);
        let proj1 = linalg::kron(&linalg::identity(2), &e11q) * c(0.5);
        let expect = linalg::opnorm(&(&x - proj0)).max(linalg::opnorm(&(&x - proj1)));
        assert!((expect - 2.0 / 3.0).abs() <= 1e-13);

        let got = f.membership_residual().unwrap();
        assert!((got - expect).abs() <= 1e-12, "got {got}, expect {expect}");
    }

    #[test]
    fn razak_membership_accepts_matched_endpoints_and_sees_mismatch() {
        let grid = grid65();
        let a = CMat::from_fn(2, 2, |i, j| c((1 + i * 2 + j) as f64));
        let id3 = linalg::identity(3);
        let mut corner = CMat::zeros(3, 3);
        corner[(0, 0)] = c(1.0);
        corner[(1, 1)] = c(1.0);

        let ok = MatFun::from_fn(grid, BlockSpec::Razak { n: 2, m: 3 }, |t| {
            linalg::kron(&a, &id3) * c(1.0 - t) + linalg::kron(&a, &corner) * c(t)
        })
        .unwrap();
        assert!(ok.membership_residual().unwrap() <= 1e-13);

        // endpoint matrices now disagree: x(0) = a⊗1, x(1) = 2a⊗corner
        let bad = MatFun::from_fn(grid, BlockSpec::Razak { n: 2, m: 3 }, |t| {
            linalg::kron(&a, &id3) * c(1.0 - t) + linalg::kron(&a, &corner) * c(2.0 * t)
        })
        .unwrap();
        // hand oracle: joint projection a* = (3a + 2·2a)/5 = (7/5)a
        let astar = &a * c(7.0 / 5.0);
        let r0 = linalg::opnorm(&(linalg::kron(&a, &id3) - linalg::kron(&astar, &id3)));
        let r1 = linalg::opnorm(&(linalg::kron(&(&a * c(2.0)), &corner) - linalg::kron(&astar, &corner)));
        let expect = r0.max(r1);
        let got = bad.membership_residual().unwrap();
        assert!((got - expect).abs() <= 1e-12);
        assert!(got > 0.1);
    }

    #[test]
    fn scalar_calc_identity_function_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = MatFun::from_fn(grid65(), BlockSpec::Full, |t| {
            let h = linalg::random_hermitian(&mut rng, 6);
            // spectrum in [0,1]
            (h + linalg::identity(6)) * c(0.5 * (0.2 + 0.8 * t))
        })
        .unwrap();
        let y = x.scalar_calc(&PLFunc::identity(), 1e-10).unwrap();
        assert!(x.sup_distance(&y).unwrap() <= 1e-13);
    }

    #[test]
    fn scalar_calc_on_projection_is_two_point() {
        let p = linalg::kron(&linalg::unit(2, 1, 1), &linalg::identity(3));
        let x = MatFun::constant(grid65(), BlockSpec::Full, p.clone()).unwrap();
        let y = x.scalar_calc(&canon::h(), 1e-10).unwrap();
        // h(1)·p + h(0)·(1−p) = p
        assert!(linalg::opnorm(&(y.fibre(0) - &p)) <= 1e-13);
    }

    #[test]
    fn scalar_calc_spectrum_eigenvalue_map() {
        // fibre eigenvalues {1 ×6, 1/2 ×2}; f maps 1/2 ↦ 1, so the image is 1
        let d: Vec<Complex64> = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5]
            .iter()
            .map(|&v| c(v))
            .collect();
        let x = MatFun::constant(
            grid65(),
            BlockSpec::Full,
            CMat::from_diagonal(&DVector::from_vec(d)),
        )
        .unwrap();
        let y = x.scalar_calc(&canon::f(), 1e-10).unwrap();
        let id = MatFun::identity(grid65(), BlockSpec::Full, 8).unwrap();
        assert!(y.sup_distance(&id).unwrap() <= 1e-13);
    }

    // Oracle: the scalar evaluation d(t(1−t)) computed through exact
    // piecewise-linear arithmetic, applied to the scalar field t(1−t)·1.
    #[test]
    fn scalar_calc_realizes_composite_profile_on_scalar_field() {
        let grid = GridSpec::new(257).unwrap();
        let x = MatFun::from_fn(grid, BlockSpec::Full, |t| {
            linalg::identity(2) * c(t * (1.0 - t))
        })
        .unwrap();
        let y = x.scalar_calc(&canon::d(), 1e-10).unwrap();
        let d = canon::d();
        for (j, t) in grid.points().enumerate() {
            let want = d.eval_f64_clamped(t * (1.0 - t));
            let got = y.fibre(j)[(0, 0)].re;
            assert!((got - want).abs() <= 1e-12, "t = {t}: {got} vs {want}");
            if (0.25..=0.75).contains(&t) {
                assert!((got - 1.0).abs() <= 1e-12, "not flat at t = {t}");
            }
        }
    }

    #[test]
    fn scalar_calc_rejects_bad_spectra() {
        let neg = MatFun::constant(
            grid65(),
            BlockSpec::Full,
            CMat::from_diagonal(&DVector::from_vec(vec![c(-0.1), c(0.5)])),
        )
        .unwrap();
        assert!(matches!(
            neg.scalar_calc(&canon::f(), 1e-8),
            Err(Error::Spectrum { .. })
        ));

        let mut nh = CMat::zeros(2, 2);
        nh[(0, 1)] = c(1.0);
        let nonherm = MatFun::constant(grid65(), BlockSpec::Full, nh).unwrap();
        assert!(matches!(
            nonherm.scalar_calc(&canon::f(), 1e-8),
            Err(Error::NotSelfAdjoint { .. })
        ));
    }

    #[test]
    fn scalar_calc_composition_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = MatFun::from_fn(GridSpec::new(33).unwrap(), BlockSpec::Full, |_| {
            let h = linalg::random_hermitian(&mut rng, 6);
            (h + linalg::identity(6)) * c(0.5)
        })
        .unwrap();
        let f = canon::f();
        let g = canon::g();
        let nested = x.scalar_calc(&g, 1e-10).unwrap().scalar_calc(&f, 1e-10).unwrap();
        let direct = x.scalar_calc(&f.compose(&g).unwrap(), 1e-10).unwrap();
        assert!(nested.sup_distance(&direct).unwrap() <= 1e-10);
    }

    #[test]
    fn flip_path_endpoints_and_unitarity() {
        let grid = GridSpec::new(129).unwrap();
        let u = flip_path(3, grid);
        assert!(linalg::opnorm(&(u.fibre(0) - &linalg::identity(9))) <= 1e-14);

        // unitary at every grid point
        let uu = u.adjoint().mul(&u).unwrap();
        let id = MatFun::identity(grid, BlockSpec::Full, 9).unwrap();
        assert!(uu.sup_distance(&id).unwrap() <= 1e-14);

        // conjugation by u(1) swaps the factors
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let last = u.fibre(grid.last());
        for _ in 0..50 {
            let a = linalg::random_hermitian(&mut rng, 3);
            let lhs = last * linalg::kron(&a, &linalg::identity(3)) * last.adjoint();
            let rhs = linalg::kron(&linalg::identity(3), &a);
            assert!(linalg::opnorm(&(lhs - rhs)) <= 1e-13);
        }

        // continuity: adjacent samples differ by at most π/(M−1) + slack
        let step = std::f64::consts::PI / (grid.samples - 1) as f64;
        for j in 0..grid.samples - 1 {
            let d = linalg::opnorm(&(u.fibre(j + 1) - u.fibre(j)));
            assert!(d <= step + 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = MatFun::from_fn(GridSpec::new(9).unwrap(), BlockSpec::DimDrop { p: 2, q: 3 }, |t| {
            linalg::random_hermitian(&mut rng, 6) * c(t.exp())
        })
        .unwrap();
        let js = serde_json::to_string(&x).unwrap();
        let back: MatFun = serde_json::from_str(&js).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = MatFun::from_fn(GridSpec::new(5).unwrap(), BlockSpec::Full, |_| {
            linalg::random_hermitian(&mut rng, 3) * c(std::f64::consts::E)
        })
        .unwrap();
        let csv = x.to_csv();
        let back = MatFun::from_csv(x.grid, x.block, x.dim, &csv).unwrap();
        assert_eq!(back, x);
    }
}
