//! Connecting data of the inductive systems: the multiplicity-style
//! order-zero map `rho` from M_n into M_{n³}, the shift partial isometry
//! pairing its unit defect with a corner, the hatted generator pairs that
//! push witnesses one level down the tower, an eigenvalue fingerprint of
//! the fibrewise decomposition of the connecting step, and symbolic
//! multi-stage connector data.

use crate::blocks::{z_phi_at, z_witness};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::matfield::{BlockSpec, GridSpec, MatFun};
use crate::ordzero::{
    difference_entry, entry_from_curve, from_square_zero, oz_calc, validate_r, validate_r_hat,
    OrderZeroMap,
};
use crate::plfun::{canon, lambda_sequence, ConnectorSymbolic};
use crate::report::{RelationEntry, RelationReport};
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::ToPrimitive;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Eigenvalues of the hatted first image below this cutoff are treated as
/// zero when inverting its square root for the row reconstruction. The
/// genuine spectrum sits at rational values bounded well away from zero on
/// the grids in use; everything below the cutoff is eigensolver noise.
const HAT_SUPPORT_CUTOFF: f64 = 1e-10;

/// Tower levels `q(k) = p^(3^k)` and the choice of the single numerically
/// materialized stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TowerConfig {
    pub p: u64,
    pub numeric_step: usize,
}

impl TowerConfig {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 {
            return Err(Error::Precondition(format!(
                "tower base must be at least 2, got {p}"
            )));
        }
        Ok(TowerConfig { p, numeric_step: 2 })
    }

    /// `q(k) = p^(3^k)` as an exact big integer. Levels grow triple
    /// exponentially; `k` beyond 12 is refused rather than allocating
    /// megabyte-sized integers.
    pub fn level(&self, k: u32) -> Result<BigUint> {
        let exp = 3u64
            .checked_pow(k)
            .filter(|&e| e <= 600_000)
            .ok_or_else(|| Error::Resource(format!("tower level index {k} is out of range")))?;
        Ok(BigUint::from(self.p).pow(exp as u32))
    }

    pub fn levels(&self, count: u32) -> Result<Vec<BigUint>> {
        (0..count).map(|k| self.level(k)).collect()
    }
}

// --- the multiplicity map rho ---------------------------------------------

/// `ρ(a) = a⊗P_{n−1}⊗1_n + Σ_{i=1..n} (i/n)·a⊗e_nn⊗e_ii` in M_{n³}, with
/// `P_{n−1}` the projection onto the first n−1 basis vectors of the middle
/// factor.
pub fn rho_image(n: usize, a: &CMat) -> CMat {
    let mut p = CMat::zeros(n, n);
    for j in 0..n - 1 {
        p[(j, j)] = c(1.0);
    }
    let mut out = linalg::kron(&linalg::kron(a, &p), &linalg::identity(n));
    for i in 1..=n {
        out += linalg::kron(
            &linalg::kron(a, &linalg::unit(n, n, n)),
            &linalg::unit(n, i, i),
        ) * c(i as f64 / n as f64);
    }
    out
}

/// Canonical row of `ρ`: `r_i = (e_{1i}⊗1⊗1)·ρ(1)^{1/2}`, so that
/// `r_i^* r_j = ρ(e_ij)`.
pub fn rho_row(n: usize) -> Vec<CMat> {
    let mut p = CMat::zeros(n, n);
    for j in 0..n - 1 {
        p[(j, j)] = c(1.0);
    }
    (1..=n)
        .map(|i| {
            let e1i = linalg::unit(n, 1, i);
            let mut r = linalg::kron(&linalg::kron(&e1i, &p), &linalg::identity(n));
            for j in 1..=n {
                r += linalg::kron(
                    &linalg::kron(&e1i, &linalg::unit(n, n, n)),
                    &linalg::unit(n, j, j),
                ) * c((j as f64 / n as f64).sqrt());
            }
            r
        })
        .collect()
}

/// `ρ` as a constant-in-t order-zero map on the given grid (plain matrix
/// fibres, no boundary conditions).
pub fn rho(n: usize, grid: GridSpec) -> Result<OrderZeroMap> {
    if n < 2 {
        return Err(Error::Precondition(format!(
            "multiplicity map needs n >= 2, got {n}"
        )));
    }
    let row = rho_row(n)
        .into_iter()
        .map(|m| MatFun::constant(grid, BlockSpec::Full, m))
        .collect::<Result<Vec<_>>>()?;
    OrderZeroMap::from_row(row)
}

/// Partial isometry in M_{n³} moving the unit defect of `ρ` into a corner
/// of `ρ(e_11)`: `vv* = 1_n⊗e_nn⊗P_{n−1}` and
/// `v*v = e_11⊗P_{n−1}⊗1_n + e_11⊗e_nn⊗e_nn − e_11⊗e_11⊗e_11`,
/// both of rank n²−n. Initial and final bases are paired in lexicographic
/// order of the basis index triples, which makes the matrix reproducible;
/// the supports are disjoint, so `v² = 0` exactly.
pub fn v_matrix(n: usize) -> CMat {
    let d = n * n * n;
    let flat = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let mut v = CMat::zeros(d, d);
    let mut fin = Vec::with_capacity(n * n - n);
    for i in 0..n {
        for k in 0..n - 1 {
            fin.push(flat(i, n - 1, k));
        }
    }
    let mut init = Vec::with_capacity(n * n - n);
    for j in 0..n - 1 {
        for l in 0..n {
            if j == 0 && l == 0 {
                continue;
            }
            init.push(flat(0, j, l));
        }
    }
    init.push(flat(0, n - 1, n - 1));
    for (f, s) in fin.iter().zip(&init) {
        v[(*f, *s)] = c(1.0);
    }
    v
}

// --- hatted generator pairs -----------------------------------------------

/// The hatted witness pair one level down, together with the residual
/// report of the identities its construction is supposed to satisfy.
pub struct HatMaps {
    pub phi_hat: OrderZeroMap,
    pub psi_hat: OrderZeroMap,
    pub report: RelationReport,
}

/// Side of the base level recovered from the fibre size of the upper level:
/// the upper map must act on M_{n³} for some n ≥ 2.
fn cube_root_level(q_plus: usize) -> Result<usize> {
    let mut n = 2usize;
    while n * n * n < q_plus {
        n += 1;
    }
    if n * n * n != q_plus || q_plus < 8 {
        return Err(Error::Precondition(format!(
            "upper map must act on a perfect cube M_(n^3) with n >= 2, got M_{q_plus}"
        )));
    }
    Ok(n)
}

/// The materialized stage keeps dense fibres of dimension n³(n³+1); n = 3
/// is the largest side for which a dense eigendecomposition per fibre is
/// affordable (756), so larger stages are refused up front.
fn numeric_stage_guard(n: usize) -> Result<()> {
    if n > 3 {
        let dim = n * n * n * (n * n * n + 1);
        return Err(Error::Resource(format!(
            "numeric stage at side {n} needs {dim}-dimensional fibres; only sides 2 and 3 are materialized"
        )));
    }
    Ok(())
}

struct HatParts {
    n: usize,
    f_phi: OrderZeroMap,
    g_def: MatFun,
    h_def: MatFun,
    d_psi: OrderZeroMap,
}

fn hat_parts(phi_next: &OrderZeroMap, psi_next: &OrderZeroMap, tol: f64) -> Result<HatParts> {
    let n = cube_root_level(phi_next.n)?;
    numeric_stage_guard(n)?;
    if psi_next.n != 2 {
        return Err(Error::Precondition(format!(
            "corner map must act on M_2, got M_{}",
            psi_next.n
        )));
    }
    if phi_next.grid() != psi_next.grid() || phi_next.dim() != psi_next.dim() {
        return Err(Error::Precondition(
            "upper maps must live on a common grid and fibre size".into(),
        ));
    }
    let q_plus = phi_next.n;
    let defect = linalg::identity(q_plus) - rho_image(n, &linalg::identity(n));
    let g_def = {
        let g_phi = oz_calc(&canon::g(), phi_next, tol)?;
        g_phi.apply(&defect)?
    };
    let h_def = {
        let h_phi = oz_calc(&canon::h(), phi_next, tol)?;
        h_phi.apply(&defect)?
    };
    Ok(HatParts {
        n,
        f_phi: oz_calc(&canon::f(), phi_next, tol)?,
        g_def,
        h_def,
        d_psi: oz_calc(&canon::d(), psi_next, tol)?,
    })
}

/// Square root of a PSD field with kernel cleanup: eigenvalues at or below
/// the support cutoff map to zero instead of to their square roots. The
/// genuine spectra of the factors built here stay well above the cutoff on
/// the grids in use, so this only removes eigensolver rounding, which a
/// plain square root would amplify to the 1e-8 scale and smear across the
/// supports whose exact orthogonality the square-zero identities need.
fn supported_sqrt(m: &MatFun, tol: f64) -> Result<MatFun> {
    let grid = m.grid;
    let mut samples = Vec::with_capacity(grid.samples);
    for j in 0..grid.samples {
        let fib = m.fibre(j);
        let min = linalg::min_eigenvalue(fib);
        if min < -tol {
            return Err(Error::Spectrum {
                value: min,
                t: grid.t(j),
                tol,
            });
        }
        samples.push(linalg::hermitian_apply(
            fib,
            |l| if l > HAT_SUPPORT_CUTOFF { l.sqrt() } else { 0.0 },
            linalg::EIGEN_CLUSTER_TOL,
        ));
    }
    MatFun::from_samples(grid, m.block, samples)
}

/// Row of `φ̂ = f(φ₊)∘ρ` from the images of the first matrix-unit row:
/// `x̂_1 = φ̂(e_11)^{1/2}` and `x̂_i = x̂_1⁺·φ̂(e_1i)`. The left supports of
/// all `x̂_i` coincide with the support of `x̂_1`, so the pseudo-inverse
/// reconstruction is exact up to rounding.
fn hat_phi_row(f_phi: &OrderZeroMap, n: usize, tol: f64) -> Result<OrderZeroMap> {
    let e11 = f_phi.apply(&rho_image(n, &linalg::unit(n, 1, 1)))?;
    let x1 = supported_sqrt(&e11, tol)?;
    let inv_root = e11.map_fibres(|_, m| {
        linalg::hermitian_apply(
            m,
            |l| if l > HAT_SUPPORT_CUTOFF { l.sqrt().recip() } else { 0.0 },
            linalg::EIGEN_CLUSTER_TOL,
        )
    })?;
    let mut row = vec![x1];
    for i in 2..=n {
        let e1i = f_phi.apply(&rho_image(n, &linalg::unit(n, 1, i)))?;
        row.push(inv_root.mul(&e1i)?);
    }
    OrderZeroMap::from_row(row)
}

/// Push a witness pair for the coupled relations (defect form
/// `ψ(e_11) = 1 − φ(1)`) one level down: `φ̂ = f(φ₊)∘ρ` and
/// `ψ̂^{1/2}(e_12) = γ + δ` with
/// `γ = (1 − f(φ₊)(1) + g(φ₊)(1−ρ(1)))^{1/2}·d(ψ₊)(e_12)` and
/// `δ = h(φ₊)(1−ρ(1))^{1/2}·f(φ₊)(v)`.
///
/// The report carries the square-zero and cross-term norms of γ and δ (held
/// two orders tighter than `tol`), the closed forms of `γγ*` and `δδ*`, the
/// cone relations of the reconstructed `φ̂` row, and the coupled relations
/// of the output pair.
pub fn hat_maps_z(
    phi_next: &OrderZeroMap,
    psi_next: &OrderZeroMap,
    tol: f64,
) -> Result<HatMaps> {
    let pre = validate_r(phi_next, psi_next, tol)?;
    if !pre.all_pass() {
        return Err(Error::Precondition(format!(
            "input pair fails the coupled relations: {:?}",
            pre.failing()
        )));
    }
    let parts = hat_parts(phi_next, psi_next, tol)?;
    let tol_cross = tol * 1e-2;

    let scalar = parts.f_phi.unit_image().one_minus().add(&parts.g_def)?;
    let gamma = supported_sqrt(&scalar, tol)?.mul(&parts.d_psi.image(1, 2)?)?;
    let delta = supported_sqrt(&parts.h_def, tol)?
        .mul(&parts.f_phi.apply(&v_matrix(parts.n))?)?;
    let w = gamma.add(&delta)?;

    let mut report = RelationReport::default();
    report.insert(
        "sum_square_zero",
        entry_from_curve(w.mul(&w)?.norm_curve(), tol_cross),
    );
    report.insert(
        "cross_term_gamma_delta_star",
        entry_from_curve(gamma.mul(&delta.adjoint())?.norm_curve(), tol_cross),
    );
    report.insert(
        "cross_term_delta_gamma_star",
        entry_from_curve(delta.mul(&gamma.adjoint())?.norm_curve(), tol_cross),
    );
    report.insert(
        "delta_gram_matches_h_defect",
        difference_entry(&delta.mul(&delta.adjoint())?, &parts.h_def, tol)?,
    );
    report.insert(
        "gamma_gram_matches_complement",
        difference_entry(&gamma.mul(&gamma.adjoint())?, &scalar, tol)?,
    );

    let psi_hat = from_square_zero(&w, tol)?;
    let phi_hat = hat_phi_row(&parts.f_phi, parts.n, tol)?;
    report.merge("phi_hat_cone", phi_hat.validate(tol)?);
    report.merge("coupling", validate_r(&phi_hat, &psi_hat, tol)?);
    Ok(HatMaps {
        phi_hat,
        psi_hat,
        report,
    })
}

/// Push a witness pair for the parabola-coupled relations
/// (`ψ(e_11) = φ(1)(1−φ(1))`) one level down. Same shape as [`hat_maps_z`]
/// but with both legs gated by the prefactor `f(φ₊)(ρ(1))^{1/2}`:
/// `γ = f(φ₊)(ρ(1))^{1/2}·λ·d(ψ₊)(e_12)` and
/// `δ = f(φ₊)(ρ(1))^{1/2}·μ·f(φ₊)(v)` with
/// `λ = (1 − f(φ₊)(1) + g(φ₊)(1−ρ(1)))^{1/2}`, `μ = h(φ₊)(1−ρ(1))^{1/2}`.
///
/// The report additionally pins the two identities the argument leans on:
/// `d(ψ₊)(e_11)` equals the calculus of `s ↦ d(s(1−s))` applied to `φ₊(1)`,
/// and the defect product `f(φ₊)(ρ(1))(1−f(φ₊)(1))` is absorbed by
/// `d(ψ₊)(e_11)`; plus commutation of λ and μ with the prefactor.
pub fn hat_maps_w(
    phi_next: &OrderZeroMap,
    psi_next: &OrderZeroMap,
    tol: f64,
) -> Result<HatMaps> {
    let pre = validate_r_hat(phi_next, psi_next, tol)?;
    if !pre.all_pass() {
        return Err(Error::Precondition(format!(
            "input pair fails the coupled relations: {:?}",
            pre.failing()
        )));
    }
    let parts = hat_parts(phi_next, psi_next, tol)?;
    let tol_cross = tol * 1e-2;

    let rho_one = rho_image(parts.n, &linalg::identity(parts.n));
    let f_rho_one = parts.f_phi.apply(&rho_one)?;
    let prefactor = supported_sqrt(&f_rho_one, tol)?;
    let lambda = supported_sqrt(&parts.f_phi.unit_image().one_minus().add(&parts.g_def)?, tol)?;
    let mu = supported_sqrt(&parts.h_def, tol)?;
    let gamma = prefactor.mul(&lambda)?.mul(&parts.d_psi.image(1, 2)?)?;
    let delta = prefactor
        .mul(&mu)?
        .mul(&parts.f_phi.apply(&v_matrix(parts.n))?)?;
    let w = gamma.add(&delta)?;

    let mut report = RelationReport::default();
    report.insert(
        "sum_square_zero",
        entry_from_curve(w.mul(&w)?.norm_curve(), tol_cross),
    );
    report.insert(
        "cross_term_gamma_delta_star",
        entry_from_curve(gamma.mul(&delta.adjoint())?.norm_curve(), tol_cross),
    );
    report.insert(
        "cross_term_delta_gamma_star",
        entry_from_curve(delta.mul(&gamma.adjoint())?.norm_curve(), tol_cross),
    );
    report.insert(
        "lambda_commutes_with_prefactor",
        entry_from_curve(
            prefactor
                .mul(&lambda)?
                .sub(&lambda.mul(&prefactor)?)?
                .norm_curve(),
            tol_cross,
        ),
    );
    report.insert(
        "mu_commutes_with_prefactor",
        entry_from_curve(
            prefactor.mul(&mu)?.sub(&mu.mul(&prefactor)?)?.norm_curve(),
            tol_cross,
        ),
    );

    // d(ψ₊)(e_11) equals d(s(1−s)) evaluated on φ₊(1), the parabola form of
    // the first coupled relation pushed through the calculus
    let d_psi_e11 = parts.d_psi.image(1, 1)?;
    let unit = phi_next.unit_image();
    let parabola = unit.mul(&unit.one_minus())?;
    report.insert(
        "d_psi_e11_matches_d_of_unit_parabola",
        difference_entry(&d_psi_e11, &parabola.scalar_calc(&canon::d(), tol)?, tol_cross)?,
    );
    // f(φ₊)(ρ(1))(1−f(φ₊)(1)) lives where s ↦ f(s)−f(s)² of the unit sits,
    // and d(s(1−s)) is 1 there
    let defect_product = f_rho_one.mul(&parts.f_phi.unit_image().one_minus())?;
    report.insert(
        "defect_product_absorbed_by_d_psi_e11",
        difference_entry(&defect_product.mul(&d_psi_e11)?, &defect_product, tol)?,
    );

    let psi_hat = from_square_zero(&w, tol)?;
    let phi_hat = hat_phi_row(&parts.f_phi, parts.n, tol)?;
    report.merge("phi_hat_cone", phi_hat.validate(tol)?);
    report.merge("coupling", validate_r_hat(&phi_hat, &psi_hat, tol)?);
    Ok(HatMaps {
        phi_hat,
        psi_hat,
        report,
    })
}

// --- eigenvalue fingerprint ------------------------------------------------

/// One materialized connecting step for the dimension-drop tower: holds
/// `f(φ₊)` for the level-n³ witness and the symbolic one-step connector, and
/// compares the eigenvalues of `f(φ₊)(ρ(a))` at a fibre with the multiset
/// the connector predicts from the level-n generator images.
pub struct FingerprintStage {
    pub n: usize,
    f_phi: OrderZeroMap,
    connectors: ConnectorSymbolic,
}

impl FingerprintStage {
    pub fn new(n: usize, grid: GridSpec, tol: f64) -> Result<Self> {
        numeric_stage_guard(n)?;
        let wit = z_witness(n * n * n, grid)?;
        Ok(FingerprintStage {
            n,
            f_phi: oz_calc(&canon::f(), &wit.phi, tol)?,
            connectors: lambda_sequence(n as u64)?,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.f_phi.grid()
    }

    fn fibre_index(&self, t: f64) -> Result<usize> {
        let grid = self.f_phi.grid();
        (0..grid.samples)
            .find(|&j| (grid.t(j) - t).abs() <= 1e-12)
            .ok_or_else(|| Error::Precondition(format!("t = {t} is not a grid point")))
    }

    /// The connecting-step image `f(φ₊)(ρ(a))` at the fibre over `t`.
    pub fn image_at(&self, a: &CMat, t: f64) -> Result<CMat> {
        let j = self.fibre_index(t)?;
        self.f_phi.apply_at(&rho_image(self.n, a), j)
    }

    /// Eigenvalue multiset predicted by the symbolic connector: for each
    /// entry `F` with multiplicity m, the eigenvalues of the level-n image
    /// `φ(a)(F(t))`, m times.
    pub fn predicted_eigenvalues(&self, a: &CMat, t: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for e in &self.connectors.entries {
            let s = e.func.eval_f64(t);
            let vals = linalg::hermitian_eigenvalues(&z_phi_at(self.n, a, s));
            let m = e.multiplicity.to_usize().ok_or_else(|| {
                Error::Resource("connector multiplicity exceeds addressable size".into())
            })?;
            for _ in 0..m {
                out.extend_from_slice(&vals);
            }
        }
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    /// Compare computed and predicted eigenvalue multisets at `t`; the
    /// residual is the largest pointwise gap after sorting.
    pub fn check(&self, a: &CMat, t: f64, tol: f64) -> Result<RelationEntry> {
        if a.nrows() != self.n || a.ncols() != self.n {
            return Err(Error::Dimension(format!(
                "fingerprint input must be {0}x{0}",
                self.n
            )));
        }
        let defect = linalg::hermitian_defect(a);
        if defect > 1e-12 {
            return Err(Error::NotSelfAdjoint { defect, t });
        }
        let mut computed = linalg::hermitian_eigenvalues(&self.image_at(a, t)?);
        computed.sort_by(f64::total_cmp);
        let predicted = self.predicted_eigenvalues(a, t)?;
        if predicted.len() != computed.len() {
            return Err(Error::Dimension(format!(
                "connector bookkeeping predicts {} eigenvalues, fibre has {}",
                predicted.len(),
                computed.len()
            )));
        }
        let mismatch = computed
            .iter()
            .zip(&predicted)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        Ok(RelationEntry::new(mismatch, tol, Some(t)))
    }

    /// Scalar shadow of the decomposition: normalized trace of
    /// `f(φ₊)(ρ(1))` at `t` against the multiplicity-weighted average of
    /// normalized traces of the level-n unit image across connector entries.
    pub fn trace_shadow(&self, t: f64) -> Result<(f64, f64)> {
        let one = linalg::identity(self.n);
        let big = self.image_at(&one, t)?;
        let computed = big.trace().re / big.nrows() as f64;
        let mut weighted = 0.0;
        let mut total = 0.0;
        for e in &self.connectors.entries {
            let s = e.func.eval_f64(t);
            let small = z_phi_at(self.n, &one, s);
            let m = e.multiplicity.to_usize().ok_or_else(|| {
                Error::Resource("connector multiplicity exceeds addressable size".into())
            })? as f64;
            weighted += m * small.trace().re / small.nrows() as f64;
            total += m;
        }
        Ok((computed, weighted / total))
    }
}

/// Composite symbolic connector across `steps` stages starting at level `q`:
/// entries `F_1∘…∘F_steps` with `F_j` drawn from the one-step data at level
/// `q^(3^(j−1))`, multiplicities multiplied, constants absorbing whole inner
/// stages.
pub fn connector_symbolic(q: u64, steps: u32) -> Result<ConnectorSymbolic> {
    if steps == 0 {
        return Err(Error::Precondition("connector needs at least one stage".into()));
    }
    let mut acc = lambda_sequence(q)?;
    let mut level = q;
    for _ in 1..steps {
        level = level
            .checked_pow(3)
            .ok_or_else(|| Error::Resource("connector level exceeds u64 range".into()))?;
        acc = acc.compose_next(&lambda_sequence(level)?)?;
    }
    Ok(acc)
}
