//! Generator witnesses inside the building blocks: concrete pairs (φ, ψ)
//! realizing the coupled relations in a dimension-drop algebra Z(n, n+1)
//! and in a Razak block W(n, n+1), the commutation-style triple (φ, ψ, h),
//! and the fibrewise span check used as the numeric shadow of the
//! generation arguments.
//!
//! Every witness has closed-form fibre evaluators (usable at arbitrary
//! t ∈ [0,1], not only grid points); the grid-sampled constructors are thin
//! wrappers over them.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::matfield::{flip_unitary, BlockSpec, GridSpec, MatFun};
use crate::ordzero::{from_square_zero, OrderZeroMap};
use crate::plfun::PLFunc;
use crate::report::RelationReport;
use nalgebra::DVector;
use num_complex::Complex64;

/// Numerical tolerance used when constructors validate their own exact
/// identities (square-zero checks, PSD square roots). The constructions are
/// exact up to f64 rounding, so failures at this tolerance mean a bug.
pub const WITNESS_TOL: f64 = 1e-10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A coupled pair of order-zero maps on M_n and M_2 inside one block.
pub struct WitnessPair {
    pub phi: OrderZeroMap,
    pub psi: OrderZeroMap,
}

/// The commutation-presentation triple in Z(n, n+1).
pub struct Alt1Witness {
    pub phi: OrderZeroMap,
    pub psi: OrderZeroMap,
    pub h: MatFun,
}

/// Embed M_n⊗M_n into the upper-left corner of M_n⊗M_{n+1} (second tensor
/// factor indices 0..n−1 of n+1).
fn embed_corner(m: &CMat, n: usize) -> CMat {
    let big = n + 1;
    let mut out = CMat::zeros(n * big, n * big);
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                for l in 0..n {
                    out[(i * big + k, j * big + l)] = m[(i * n + k, j * n + l)];
                }
            }
        }
    }
    out
}

// --- dimension-drop witness ----------------------------------------------

/// `φ(a)(t) = u(t)(a⊗1_n)u(t)^* ⊕ (1−t)(a⊗e_{n+1,n+1})` in M_n⊗M_{n+1}.
pub fn z_phi_at(n: usize, a: &CMat, t: f64) -> CMat {
    let u = flip_unitary(n, t);
    let corner = &u * linalg::kron(a, &linalg::identity(n)) * u.adjoint();
    embed_corner(&corner, n) + linalg::kron(a, &linalg::unit(n + 1, n + 1, n + 1)) * c(1.0 - t)
}

/// `x_i(t) = u(t)(e_{1i}⊗1_n)u(t)^* ⊕ (1−t)^{1/2}(e_{1i}⊗e_{n+1,n+1})`.
pub fn z_x_at(n: usize, i: usize, t: f64) -> CMat {
    let u = flip_unitary(n, t);
    let corner = &u * linalg::kron(&linalg::unit(n, 1, i), &linalg::identity(n)) * u.adjoint();
    embed_corner(&corner, n)
        + linalg::kron(&linalg::unit(n, 1, i), &linalg::unit(n + 1, n + 1, n + 1))
            * c((1.0 - t).sqrt())
}

/// `v(t) = t^{1/2} Σ_j |f_j⊗e_{n+1}⟩⟨u(t)(e_1⊗f_j)|`: a square-zero
/// contraction with `vv^* = 1 − φ(1)` and `v^*v = t·u(t)(e_{11}⊗1_n)u(t)^*`.
pub fn z_v_at(n: usize, t: f64) -> CMat {
    let big = n + 1;
    let u = flip_unitary(n, t);
    let mut v = CMat::zeros(n * big, n * big);
    let root_t = t.sqrt();
    for j in 0..n {
        // u(t)(e_1⊗f_j) in C^n⊗C^n, embedded into C^n⊗C^{n+1}
        let mut src = DVector::<Complex64>::zeros(n * n);
        src[j] = c(1.0);
        let w = &u * src;
        let row = j * big + n; // f_j ⊗ e_{n+1}
        for i in 0..n {
            for k in 0..n {
                v[(row, i * big + k)] += c(root_t) * w[(i * n + k, 0)].conj();
            }
        }
    }
    v
}

/// Witness pair for the dimension-drop block Z(n, n+1): φ built on the flip
/// path, ψ the square-zero lift of `z_v_at`. The pair satisfies the coupled
/// relations `ψ(e_11) = 1 − φ(1)` and `ψ(e_22)φ(e_11) = ψ(e_22)` exactly at
/// every fibre.
pub fn z_witness(n: usize, grid: GridSpec) -> Result<WitnessPair> {
    if n < 2 {
        return Err(Error::Precondition(format!(
            "dimension-drop witness needs n >= 2, got {n}"
        )));
    }
    let block = BlockSpec::DimDrop { p: n, q: n + 1 };
    let row = (1..=n)
        .map(|i| MatFun::from_fn(grid, block, |t| z_x_at(n, i, t)))
        .collect::<Result<Vec<_>>>()?;
    let phi = OrderZeroMap::from_row(row)?;
    let v = MatFun::from_fn(grid, block, |t| z_v_at(n, t))?;
    let psi = from_square_zero(&v, WITNESS_TOL)?;
    Ok(WitnessPair { phi, psi })
}

// --- Razak (stably projectionless) witness --------------------------------

/// `φ(a)(t) = (a⊗1_n) ⊕ (1−t)(a⊗e_{n+1,n+1}) = a ⊗ diag(1,…,1,1−t)`.
pub fn w_phi_at(n: usize, a: &CMat, t: f64) -> CMat {
    let mut d = linalg::identity(n + 1);
    d[(n, n)] = c(1.0 - t);
    linalg::kron(a, &d)
}

/// `x_i(t) = e_{1i} ⊗ diag(1,…,1,(1−t)^{1/2})`.
pub fn w_x_at(n: usize, i: usize, t: f64) -> CMat {
    let mut d = linalg::identity(n + 1);
    d[(n, n)] = c((1.0 - t).sqrt());
    linalg::kron(&linalg::unit(n, 1, i), &d)
}

/// `v(t) = t^{1/2}(1−t)^{1/2} Σ_j e_{j1}⊗e_{n+1,j}`.
pub fn w_v_at(n: usize, t: f64) -> CMat {
    let mut v = CMat::zeros(n * (n + 1), n * (n + 1));
    let r = (t * (1.0 - t)).sqrt();
    for j in 1..=n {
        v += linalg::kron(&linalg::unit(n, j, 1), &linalg::unit(n + 1, n + 1, j)) * c(r);
    }
    v
}

/// Witness pair for the Razak block W(n, n+1), with `ψ(e_11) = φ(1)(1−φ(1))`
/// and `ψ(e_22)φ(e_11) = ψ(e_22)` exact at every fibre; additionally
/// `v·x_1 = v` holds exactly.
pub fn w_witness(n: usize, grid: GridSpec) -> Result<WitnessPair> {
    if n < 2 {
        return Err(Error::Precondition(format!(
            "Razak witness needs n >= 2, got {n}"
        )));
    }
    let block = BlockSpec::Razak { n, m: n + 1 };
    let row = (1..=n)
        .map(|i| MatFun::from_fn(grid, block, |t| w_x_at(n, i, t)))
        .collect::<Result<Vec<_>>>()?;
    let phi = OrderZeroMap::from_row(row)?;
    let v = MatFun::from_fn(grid, block, |t| w_v_at(n, t))?;
    let psi = from_square_zero(&v, WITNESS_TOL)?;
    Ok(WitnessPair { phi, psi })
}

/// The central element of the Razak witness:
/// `z = ψ(e_11) + Σ_i ψ_i(e_22)` with `ψ_i^{1/2}(e_12) = ψ^{1/2}(e_12)·φ^{1/2}(e_1i)`.
/// Reports the distance of `z(t)` to `t(1−t)·1` fibrewise (the scalar shape
/// that makes `z` central and pins the trace on the generated subalgebra).
pub fn w_center_check(n: usize, grid: GridSpec) -> Result<RelationReport> {
    let wit = w_witness(n, grid)?;
    let v = wit.psi.x(2); // ψ^{1/2}(e_12)
    let mut z = wit.psi.image(1, 1)?;
    for i in 1..=n {
        let vi = v.mul(wit.phi.x(i))?;
        let psi_i = from_square_zero(&vi, WITNESS_TOL)?;
        z = z.add(&psi_i.image(2, 2)?)?;
    }
    let dim = n * (n + 1);
    let want = MatFun::from_fn(grid, wit.phi.block(), |t| {
        linalg::identity(dim) * c(t * (1.0 - t))
    })?;
    let mut report = RelationReport::default();
    report.insert(
        "center_is_scalar_t_defect",
        crate::ordzero::difference_entry(&z, &want, 1e-10)?,
    );
    Ok(report)
}

// --- commutation-presentation witness -------------------------------------

/// Corner weight of φ: 1 on [0, 3/4], then a ramp down to 0 at t = 1.
fn alt1_corner_profile() -> PLFunc {
    PLFunc::from_int_pairs(&[((0, 1), (1, 1)), ((3, 4), (1, 1)), ((1, 1), (0, 1))])
        .expect("static profile")
}

/// Profile of h: 0 on [0, 1/2], ramp on [1/2, 3/4], then 1.
fn alt1_h_profile() -> PLFunc {
    PLFunc::from_int_pairs(&[
        ((0, 1), (0, 1)),
        ((1, 2), (0, 1)),
        ((3, 4), (1, 1)),
        ((1, 1), (1, 1)),
    ])
    .expect("static profile")
}

/// Weight of ψ^{1/2}(e_12): 0 on [0, 1/4], ramp on [1/4, 1/2], then 1.
fn alt1_v_profile() -> PLFunc {
    PLFunc::from_int_pairs(&[
        ((0, 1), (0, 1)),
        ((1, 4), (0, 1)),
        ((1, 2), (1, 1)),
        ((1, 1), (1, 1)),
    ])
    .expect("static profile")
}

/// `x_i(t) = u(t)(e_{1i}⊗1_n)u(t)^* ⊕ c(t)^{1/2}(e_{1i}⊗e_{n+1,n+1})` with
/// the corner weight `c` of [`alt1_corner_profile`].
pub fn alt1_x_at(n: usize, i: usize, t: f64) -> CMat {
    let u = flip_unitary(n, t);
    let corner = &u * linalg::kron(&linalg::unit(n, 1, i), &linalg::identity(n)) * u.adjoint();
    let cw = alt1_corner_profile().eval_f64_clamped(t);
    embed_corner(&corner, n)
        + linalg::kron(&linalg::unit(n, 1, i), &linalg::unit(n + 1, n + 1, n + 1)) * c(cw.sqrt())
}

/// `h(t) = η(t)·1_n⊗e_{n+1,n+1}` with the profile `η` of [`alt1_h_profile`].
pub fn alt1_h_at(n: usize, t: f64) -> CMat {
    let eta = alt1_h_profile().eval_f64_clamped(t);
    linalg::kron(
        &linalg::identity(n),
        &linalg::unit(n + 1, n + 1, n + 1),
    ) * c(eta)
}

/// `w(t) = ν(t)^{1/2} Σ_j |f_j⊗e_{n+1}⟩⟨u(t)(e_1⊗f_j)|` with the weight `ν`
/// of [`alt1_v_profile`]; same shape as [`z_v_at`] but supported where ν > 0.
pub fn alt1_w_at(n: usize, t: f64) -> CMat {
    let nu = alt1_v_profile().eval_f64_clamped(t);
    let big = n + 1;
    let u = flip_unitary(n, t);
    let mut v = CMat::zeros(n * big, n * big);
    let root = nu.sqrt();
    for j in 0..n {
        let mut src = DVector::<Complex64>::zeros(n * n);
        src[j] = c(1.0);
        let w = &u * src;
        let row = j * big + n;
        for i in 0..n {
            for k in 0..n {
                v[(row, i * big + k)] += c(root) * w[(i * n + k, 0)].conj();
            }
        }
    }
    v
}

/// Witness triple for the commutation presentation in Z(n, n+1): the three
/// profiles are staggered (ψ saturates by 1/2, h ramps on [1/2, 3/4], the
/// defect of φ only appears after 3/4) so that every relation holds exactly
/// fibrewise. Validates itself and refuses to return a failing triple.
pub fn alt1_witness(n: usize, grid: GridSpec) -> Result<Alt1Witness> {
    if n < 2 {
        return Err(Error::Precondition(format!(
            "commutation witness needs n >= 2, got {n}"
        )));
    }
    let block = BlockSpec::DimDrop { p: n, q: n + 1 };
    let row = (1..=n)
        .map(|i| MatFun::from_fn(grid, block, |t| alt1_x_at(n, i, t)))
        .collect::<Result<Vec<_>>>()?;
    let phi = OrderZeroMap::from_row(row)?;
    let w = MatFun::from_fn(grid, block, |t| alt1_w_at(n, t))?;
    let psi = from_square_zero(&w, WITNESS_TOL)?;
    let h = MatFun::from_fn(grid, block, |t| alt1_h_at(n, t))?;

    let report = crate::ordzero::validate_alt1(&phi, &psi, &h, 1e-9)?;
    if !report.all_pass() {
        return Err(Error::ConstructionInfeasible(format!(
            "commutation witness failed its own relations: {:?}",
            report.failing()
        )));
    }
    Ok(Alt1Witness { phi, psi, h })
}

// --- fibre span check ------------------------------------------------------

/// Dimension of the linear span of all words of length 1..=`max_word_len`
/// in the generator fibres at grid point `t` and their adjoints. A return
/// value equal to the squared fibre dimension means the generators span the
/// full fibre algebra at that point.
///
/// The subspace is grown one word length at a time: since the span of
/// `{w·g : w a word of length k}` equals the span of `{b·g : b basis}`,
/// only newly found directions need to be multiplied out again.
pub fn fibre_span_check(generators: &[MatFun], t: f64, max_word_len: usize) -> Result<usize> {
    if generators.is_empty() {
        return Err(Error::Precondition("no generators given".into()));
    }
    if max_word_len == 0 {
        return Ok(0);
    }
    let grid = generators[0].grid;
    let dim = generators[0].dim;
    for g in generators {
        if g.grid != grid {
            return Err(Error::GridMismatch {
                left: grid.samples,
                right: g.grid.samples,
            });
        }
        if g.dim != dim {
            return Err(Error::Dimension(format!(
                "generators have fibre dimensions {dim} and {}",
                g.dim
            )));
        }
    }
    let fibre = (0..grid.samples)
        .find(|&j| (grid.t(j) - t).abs() <= 1e-12)
        .ok_or_else(|| Error::Precondition(format!("t = {t} is not a grid point")))?;

    let mut letters: Vec<CMat> = generators.iter().map(|g| g.fibre(fibre).clone()).collect();
    let adjoints: Vec<CMat> = letters.iter().map(|m| m.adjoint()).collect();
    letters.extend(adjoints);

    // orthonormal basis of vectorized fibre matrices; a candidate counts as
    // a new direction when its component orthogonal to the basis exceeds
    // 1e-8 of its own norm (scale-free, so coefficient decay in long words
    // does not mask genuine directions)
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let add = |basis: &mut Vec<DVector<Complex64>>, m: &CMat| -> bool {
        let mut v = DVector::<Complex64>::from_iterator(dim * dim, m.iter().cloned());
        let norm = v.norm();
        if norm <= 1e-14 {
            return false;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let coeff = b.dotc(&v);
                v.axpy(-coeff, b, Complex64::new(1.0, 0.0));
            }
        }
        let res = v.norm();
        if res > 1e-8 * norm {
            basis.push(v / c(res));
            true
        } else {
            false
        }
    };

    let mut frontier: Vec<CMat> = Vec::new();
    for l in &letters {
        if add(&mut basis, l) {
            frontier.push(reshape(basis.last().unwrap(), dim));
        }
    }
    for _ in 1..max_word_len {
        let mut next = Vec::new();
        for b in &frontier {
            for l in &letters {
                let prod = b * l;
                if add(&mut basis, &prod) {
                    next.push(reshape(basis.last().unwrap(), dim));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(basis.len())
}

fn reshape(v: &DVector<Complex64>, dim: usize) -> CMat {
    CMat::from_iterator(dim, dim, v.iter().cloned())
}
