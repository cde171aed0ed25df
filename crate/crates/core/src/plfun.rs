//! Piecewise-linear functions on `[0,1]` with exact rational breakpoints.
//!
//! These serve two roles: scalar symbols fed to the matrix functional
//! calculus (where only their float evaluation matters), and exact symbolic
//! objects whose composition laws, support relations and iterates are
//! decided in rational arithmetic with no tolerance at all.
//!
//! Products of piecewise-linear functions are not piecewise linear, so
//! product identities of the form `a·b = b` are decided by the support/unit
//! criterion: for positive `a`, `b` the identity holds exactly iff `a ≡ 1`
//! on the closure of the support of `b`. Both sides of that criterion are
//! computable from breakpoint data.

use crate::error::{Error, Result};
use crate::report::{RelationEntry, RelationReport};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeSet;

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// One breakpoint as integer fractions: `((x_num, x_den), (y_num, y_den))`.
pub type IntPair = ((i64, i64), (i64, i64));

/// A continuous piecewise-linear function on `[0,1]`.
///
/// Stored as breakpoints `(x, value)` with strictly increasing abscissas,
/// the first at 0 and the last at 1, normalised so that no interior
/// breakpoint is collinear with its neighbours. Two functions are equal as
/// functions iff their normalised breakpoint lists are equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PLFunc {
    points: Vec<(BigRational, BigRational)>,
}

impl std::fmt::Debug for PLFunc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PLFunc[")?;
        for (i, (x, y)) in self.points.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({x},{y})")?;
        }
        write!(f, "]")
    }
}

impl PLFunc {
    pub fn new(points: Vec<(BigRational, BigRational)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Breakpoints("no breakpoints".into()));
        }
        if !points[0].0.is_zero() {
            return Err(Error::Breakpoints(format!(
                "first abscissa must be 0, got {}",
                points[0].0
            )));
        }
        if points[points.len() - 1].0 != BigRational::one() {
            return Err(Error::Breakpoints(format!(
                "last abscissa must be 1, got {}",
                points[points.len() - 1].0
            )));
        }
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Breakpoints(format!(
                    "abscissas not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        let mut f = PLFunc { points };
        f.normalize();
        Ok(f)
    }

    /// Convenience constructor from `((x_num, x_den), (y_num, y_den))` pairs.
    pub fn from_int_pairs(pairs: &[IntPair]) -> Result<Self> {
        let pts = pairs
            .iter()
            .map(|&((xn, xd), (yn, yd))| {
                if xd == 0 || yd == 0 {
                    return Err(Error::Breakpoints("zero denominator".into()));
                }
                Ok((rat(xn, xd), rat(yn, yd)))
            })
            .collect::<Result<Vec<_>>>()?;
        PLFunc::new(pts)
    }

    pub fn constant(c: BigRational) -> Self {
        PLFunc {
            points: vec![(BigRational::zero(), c.clone()), (BigRational::one(), c)],
        }
    }

    pub fn identity() -> Self {
        PLFunc {
            points: vec![
                (BigRational::zero(), BigRational::zero()),
                (BigRational::one(), BigRational::one()),
            ],
        }
    }

    pub fn points(&self) -> &[(BigRational, BigRational)] {
        &self.points
    }

    /// Drop interior breakpoints lying exactly on the segment between their
    /// neighbours, so equal functions have equal breakpoint lists.
    fn normalize(&mut self) {
        let mut out: Vec<(BigRational, BigRational)> = Vec::with_capacity(self.points.len());
        for p in self.points.drain(..) {
            while out.len() >= 2 {
                let b = &out[out.len() - 1];
                let a = &out[out.len() - 2];
                // collinear iff (y_c-y_a)(x_b-x_a) == (y_b-y_a)(x_c-x_a)
                let lhs = (&p.1 - &a.1) * (&b.0 - &a.0);
                let rhs = (&b.1 - &a.1) * (&p.0 - &a.0);
                if lhs == rhs {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(p);
        }
        self.points = out;
    }

    pub fn eval(&self, t: &BigRational) -> Result<BigRational> {
        if t.is_negative() || t > &BigRational::one() {
            return Err(Error::Domain(format!("argument {t} outside [0,1]")));
        }
        // binary search for the segment containing t
        let idx = self.points.partition_point(|(x, _)| x <= t);
        if idx == self.points.len() {
            return Ok(self.points[idx - 1].1.clone());
        }
        let (x1, y1) = &self.points[idx];
        let (x0, y0) = &self.points[idx - 1];
        Ok(y0 + (y1 - y0) * (t - x0) / (x1 - x0))
    }

    pub fn eval_f64(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("argument {t} outside [0,1]")));
        }
        Ok(self.eval_f64_inner(t))
    }

    /// Float evaluation with arguments clamped into `[0,1]`; used by the
    /// matrix functional calculus after its own spectrum check.
    pub fn eval_f64_clamped(&self, t: f64) -> f64 {
        self.eval_f64_inner(t.clamp(0.0, 1.0))
    }

    fn eval_f64_inner(&self, t: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .map(|(x, y)| (x.to_f64().unwrap(), y.to_f64().unwrap()))
            .collect();
        let idx = pts.partition_point(|(x, _)| *x <= t);
        if idx == pts.len() {
            return pts[pts.len() - 1].1;
        }
        if idx == 0 {
            return pts[0].1;
        }
        let (x0, y0) = pts[idx - 1];
        let (x1, y1) = pts[idx];
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }

    /// `self ∘ inner`, exact. Fails if the range of `inner` leaves `[0,1]`.
    pub fn compose(&self, inner: &PLFunc) -> Result<PLFunc> {
        if inner.min_value().is_negative() || inner.max_value() > &BigRational::one() {
            return Err(Error::Domain(format!(
                "inner range [{}, {}] not contained in [0,1]",
                inner.min_value(),
                inner.max_value()
            )));
        }
        let mut xs: BTreeSet<BigRational> =
            inner.points.iter().map(|(x, _)| x.clone()).collect();
        for w in inner.points.windows(2) {
            let (x0, v0) = &w[0];
            let (x1, v1) = &w[1];
            if v0 == v1 {
                continue;
            }
            let (lo, hi) = if v0 < v1 { (v0, v1) } else { (v1, v0) };
            for (b, _) in &self.points {
                if b >= lo && b <= hi {
                    let x = x0 + (b - v0) * (x1 - x0) / (v1 - v0);
                    xs.insert(x);
                }
            }
        }
        let points = xs
            .into_iter()
            .map(|x| {
                let v = inner.eval(&x)?;
                let y = self.eval(&v)?;
                Ok((x, y))
            })
            .collect::<Result<Vec<_>>>()?;
        PLFunc::new(points)
    }

    pub fn add(&self, other: &PLFunc) -> PLFunc {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &PLFunc) -> PLFunc {
        self.combine(other, |a, b| a - b)
    }

    fn combine(
        &self,
        other: &PLFunc,
        op: impl Fn(&BigRational, &BigRational) -> BigRational,
    ) -> PLFunc {
        let xs: BTreeSet<BigRational> = self
            .points
            .iter()
            .chain(other.points.iter())
            .map(|(x, _)| x.clone())
            .collect();
        let points = xs
            .into_iter()
            .map(|x| {
                let a = self.eval(&x).expect("abscissa in domain");
                let b = other.eval(&x).expect("abscissa in domain");
                (x, op(&a, &b))
            })
            .collect();
        PLFunc::new(points).expect("combination preserves breakpoint validity")
    }

    pub fn scale(&self, c: &BigRational) -> PLFunc {
        let points = self
            .points
            .iter()
            .map(|(x, y)| (x.clone(), y * c))
            .collect();
        PLFunc::new(points).expect("scaling preserves breakpoint validity")
    }

    pub fn one_minus(&self) -> PLFunc {
        PLFunc::constant(BigRational::one()).sub(self)
    }

    /// `t ↦ self(1−t)`.
    pub fn reflect(&self) -> PLFunc {
        let mut points: Vec<(BigRational, BigRational)> = self
            .points
            .iter()
            .rev()
            .map(|(x, y)| (BigRational::one() - x, y.clone()))
            .collect();
        // reuse validation/normalization
        let pts = std::mem::take(&mut points);
        PLFunc::new(pts).expect("reflection preserves breakpoint validity")
    }

    pub fn min_value(&self) -> &BigRational {
        self.points.iter().map(|(_, y)| y).min().expect("nonempty")
    }

    pub fn max_value(&self) -> &BigRational {
        self.points.iter().map(|(_, y)| y).max().expect("nonempty")
    }

    pub fn is_constant(&self) -> bool {
        self.points.len() == 2 && self.points[0].1 == self.points[1].1
    }

    /// Does `self ≡ 1` hold pointwise on `[lo, hi]`?
    pub fn is_one_on(&self, lo: &BigRational, hi: &BigRational) -> bool {
        debug_assert!(lo <= hi);
        let one = BigRational::one();
        if self.eval(lo).map(|v| v != one).unwrap_or(true) {
            return false;
        }
        if self.eval(hi).map(|v| v != one).unwrap_or(true) {
            return false;
        }
        self.points
            .iter()
            .filter(|(x, _)| x > lo && x < hi)
            .all(|(_, y)| *y == one)
    }

    /// Closure of `{t : lo < self(t) < hi}` as a merged list of closed
    /// intervals. `None` bounds are unbounded.
    pub fn where_strictly_between(
        &self,
        lo: Option<&BigRational>,
        hi: Option<&BigRational>,
    ) -> Vec<(BigRational, BigRational)> {
        let mut open: Vec<(BigRational, BigRational)> = Vec::new();
        for w in self.points.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            // parameter range s ∈ [0,1] along the segment where constraints hold
            let mut s_lo = BigRational::zero();
            let mut s_hi = BigRational::one();
            let dy = y1 - y0;
            let mut empty = false;
            let mut clip = |bound: &BigRational, want_above: bool| {
                // constraint: y0 + s·dy > bound (want_above) or < bound
                if dy.is_zero() {
                    let ok = if want_above { y0 > bound } else { y0 < bound };
                    if !ok {
                        empty = true;
                    }
                    return;
                }
                let s_star = (bound - y0) / &dy;
                let increasing = dy.is_positive();
                if want_above == increasing {
                    // constraint active for s > s_star
                    if s_star > s_lo {
                        s_lo = s_star;
                    }
                } else if s_star < s_hi {
                    s_hi = s_star;
                }
            };
            if let Some(b) = lo {
                clip(b, true);
            }
            if let Some(b) = hi {
                clip(b, false);
            }
            if empty || s_lo >= s_hi {
                continue;
            }
            let a = x0 + &s_lo * (x1 - x0);
            let b = x0 + &s_hi * (x1 - x0);
            open.push((a, b));
        }
        // closure + merge of overlapping/adjacent intervals
        open.sort();
        let mut merged: Vec<(BigRational, BigRational)> = Vec::new();
        for (a, b) in open {
            match merged.last_mut() {
                Some((_, pb)) if a <= *pb => {
                    if b > *pb {
                        *pb = b;
                    }
                }
                _ => merged.push((a, b)),
            }
        }
        merged
    }

    /// Closure of the support of a nonnegative function.
    pub fn support_closure(&self) -> Vec<(BigRational, BigRational)> {
        self.where_strictly_between(Some(&BigRational::zero()), None)
    }
}

/// The four ramp/bump profiles whose support relations drive every
/// connecting-map estimate, together with the reflected ramp.
///
/// * [`d`] ramps 0→1 on `[0, 3/16]`, then stays at 1.
/// * [`f`] is 0 on `[0, 1/4]`, ramps to 1 on `[1/4, 1/2]`, then stays at 1.
/// * [`g`] is the tent supported on `(1/4, 3/4)` with peak `g(1/2) = 1`.
/// * [`h`] is 0 on `[0, 1/2]`, ramps to 1 on `[1/2, 3/4]`, then stays at 1.
/// * [`d_bar`] is `t ↦ d(1−t)`.
///
/// The identities tying them together (`g = f − h`, `hf = h`,
/// `(1−f)·d̄ = 1−f`, `g·d̄ = g`, `(f−f²)·d̂ = f−f²`, `g·d̂ = g`, where
/// `d̂(t) = d(t(1−t))`) are verified exactly by [`verify_pl_identities`].
pub mod canon {
    use super::PLFunc;

    pub fn d() -> PLFunc {
        PLFunc::from_int_pairs(&[((0, 1), (0, 1)), ((3, 16), (1, 1)), ((1, 1), (1, 1))])
            .expect("static breakpoints")
    }

    pub fn f() -> PLFunc {
        PLFunc::from_int_pairs(&[
            ((0, 1), (0, 1)),
            ((1, 4), (0, 1)),
            ((1, 2), (1, 1)),
            ((1, 1), (1, 1)),
        ])
        .expect("static breakpoints")
    }

    pub fn g() -> PLFunc {
        PLFunc::from_int_pairs(&[
            ((0, 1), (0, 1)),
            ((1, 4), (0, 1)),
            ((1, 2), (1, 1)),
            ((3, 4), (0, 1)),
            ((1, 1), (0, 1)),
        ])
        .expect("static breakpoints")
    }

    pub fn h() -> PLFunc {
        PLFunc::from_int_pairs(&[
            ((0, 1), (0, 1)),
            ((1, 2), (0, 1)),
            ((3, 4), (1, 1)),
            ((1, 1), (1, 1)),
        ])
        .expect("static breakpoints")
    }

    pub fn d_bar() -> PLFunc {
        d().reflect()
    }
}

/// Exact check that `a ≡ 1` on every interval in `supp_intervals`.
fn one_on_all(a: &PLFunc, supp_intervals: &[(BigRational, BigRational)]) -> bool {
    supp_intervals.iter().all(|(lo, hi)| a.is_one_on(lo, hi))
}

/// Exact check that `d∘σ ≡ 1` on every interval in `supp_intervals`, where
/// `σ(t) = t(1−t)`. Uses concavity of σ: on `[lo,hi]` its minimum sits at an
/// endpoint and its maximum at `1/2` (clamped into the interval), so the
/// image `σ([lo,hi])` is an exactly computable interval.
fn dhat_one_on_all(d: &PLFunc, supp_intervals: &[(BigRational, BigRational)]) -> bool {
    let sigma = |t: &BigRational| t * &(BigRational::one() - t);
    let half = rat(1, 2);
    supp_intervals.iter().all(|(lo, hi)| {
        let s_lo = sigma(lo);
        let s_hi = sigma(hi);
        let min = if s_lo < s_hi { s_lo.clone() } else { s_hi.clone() };
        let max = if lo <= &half && &half <= hi {
            rat(1, 4)
        } else if s_lo > s_hi {
            s_lo
        } else {
            s_hi
        };
        d.is_one_on(&min, &max)
    })
}

/// Float residual scan for a failed product identity `a·b = b`, where the
/// functions enter as closures so that non-piecewise-linear factors (like
/// `d∘σ`) are covered. Returns `(residual, worst_t)`.
fn scan_product_defect(
    a: impl Fn(f64) -> f64,
    b: impl Fn(f64) -> f64,
    samples: usize,
) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for j in 0..samples {
        let t = j as f64 / (samples - 1) as f64;
        let r = (a(t) * b(t) - b(t)).abs();
        if r > worst.0 {
            worst = (r, t);
        }
    }
    worst
}

/// Verify the six exact identities between the canonical profiles.
///
/// Each identity is decided in rational arithmetic: the linear one by
/// breakpoint equality, the product ones by the support/unit criterion.
/// On failure the entry carries a float residual estimate and its location.
pub fn verify_pl_identities() -> RelationReport {
    let d = canon::d();
    let f = canon::f();
    let g = canon::g();
    let h = canon::h();
    let d_bar = canon::d_bar();
    let one_minus_f = f.one_minus();

    let mut report = RelationReport::new();
    let scan_n = 20_001;

    // g = f − h: both sides piecewise linear, exact equality.
    {
        let diff = f.sub(&h);
        let pass = diff == g;
        let entry = if pass {
            RelationEntry::exact(true, 0.0, None)
        } else {
            let mut worst = (0.0f64, 0.0f64);
            for j in 0..scan_n {
                let t = j as f64 / (scan_n - 1) as f64;
                let r = (g.eval_f64_clamped(t)
                    - (f.eval_f64_clamped(t) - h.eval_f64_clamped(t)))
                .abs();
                if r > worst.0 {
                    worst = (r, t);
                }
            }
            RelationEntry::exact(false, worst.0, Some(worst.1))
        };
        report.insert("g_eq_f_minus_h", entry);
    }

    // Support/unit identities with piecewise-linear unit factor.
    type Support = Vec<(BigRational, BigRational)>;
    type Eval = Box<dyn Fn(f64) -> f64>;
    let cases: [(&str, &PLFunc, Support, Eval); 3] = [
        (
            "hf_eq_h",
            &f,
            h.support_closure(),
            Box::new({
                let h = h.clone();
                move |t| h.eval_f64_clamped(t)
            }),
        ),
        (
            "one_minus_f_dbar_eq_one_minus_f",
            &d_bar,
            one_minus_f.support_closure(),
            Box::new({
                let omf = one_minus_f.clone();
                move |t| omf.eval_f64_clamped(t)
            }),
        ),
        (
            "g_dbar_eq_g",
            &d_bar,
            g.support_closure(),
            Box::new({
                let g = g.clone();
                move |t| g.eval_f64_clamped(t)
            }),
        ),
    ];
    for (name, unit_factor, supp, b_eval) in cases {
        let pass = one_on_all(unit_factor, &supp);
        let entry = if pass {
            RelationEntry::exact(true, 0.0, None)
        } else {
            let uf = unit_factor.clone();
            let (r, t) = scan_product_defect(move |t| uf.eval_f64_clamped(t), b_eval, scan_n);
            RelationEntry::exact(false, r, Some(t))
        };
        report.insert(name, entry);
    }

    // Support/unit identities whose unit factor is d̂(t) = d(t(1−t)).
    let dhat_cases: [(&str, Support, Eval); 2] = [
        (
            // support of f−f² is {0 < f < 1}
            "fdefect_dhat_eq_fdefect",
            f.where_strictly_between(Some(&BigRational::zero()), Some(&BigRational::one())),
            Box::new({
                let f = f.clone();
                move |t| {
                    let v = f.eval_f64_clamped(t);
                    v - v * v
                }
            }),
        ),
        (
            "g_dhat_eq_g",
            g.support_closure(),
            Box::new({
                let g = g.clone();
                move |t| g.eval_f64_clamped(t)
            }),
        ),
    ];
    for (name, supp, b_eval) in dhat_cases {
        let pass = dhat_one_on_all(&d, &supp);
        let entry = if pass {
            RelationEntry::exact(true, 0.0, None)
        } else {
            let d = d.clone();
            let (r, t) = scan_product_defect(
                move |t| d.eval_f64_clamped(t * (1.0 - t)),
                b_eval,
                scan_n,
            );
            RelationEntry::exact(false, r, Some(t))
        };
        report.insert(name, entry);
    }

    report
}

/// `h∘h∘…∘h` (`n` factors), exact. The iterate is again a single clamped
/// ramp: 0 up to `l_n/4^n`, slope `4^n`, then 1, with `l_1 = 2` and
/// `l_{n+1} = 4·l_n + 2`.
pub fn h_iterate(n: u32) -> Result<PLFunc> {
    if n == 0 {
        return Err(Error::Precondition("h_iterate needs n >= 1".into()));
    }
    let h = canon::h();
    let mut acc = h.clone();
    for _ in 1..n {
        acc = acc.compose(&h)?;
    }
    Ok(acc)
}

/// If `f` is a single clamped ramp `t ↦ clamp(slope·t − offset)` with flat 0
/// and flat 1 shoulders, return `(slope, offset)`.
pub fn ramp_profile(f: &PLFunc) -> Option<(BigRational, BigRational)> {
    let p = f.points();
    if p.len() != 4 {
        return None;
    }
    let zero = BigRational::zero();
    let one = BigRational::one();
    if p[0].1 != zero || p[1].1 != zero || p[2].1 != one || p[3].1 != one {
        return None;
    }
    let width = &p[2].0 - &p[1].0;
    let slope = width.recip();
    let offset = &p[1].0 * &slope;
    Some((slope, offset))
}

/// One entry of a symbolic connecting datum: either a constant evaluation
/// point or a genuine piecewise-linear reparametrisation.
///
/// The `Constant` variant is a *structural* marker: it is produced only by
/// the constant generators and by composites having at least one constant
/// factor. A `Piecewise` entry that happens to be a constant function keeps
/// its variant, so that entry-count bookkeeping (the non-constant fraction
/// `1/(q²−q+1)` per level) matches the structural count exactly.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConnectorFunc {
    Constant(BigRational),
    Piecewise(PLFunc),
}

impl ConnectorFunc {
    pub fn eval_f64(&self, t: f64) -> f64 {
        match self {
            ConnectorFunc::Constant(c) => c.to_f64().unwrap(),
            ConnectorFunc::Piecewise(p) => p.eval_f64_clamped(t),
        }
    }

    pub fn eval(&self, t: &BigRational) -> Result<BigRational> {
        match self {
            ConnectorFunc::Constant(c) => Ok(c.clone()),
            ConnectorFunc::Piecewise(p) => p.eval(t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectorEntry {
    pub func: ConnectorFunc,
    pub multiplicity: BigUint,
}

/// A finite multiset of evaluation reparametrisations with exact big-integer
/// multiplicities; the symbolic form of one (or several composed) connecting
/// steps of the inductive system.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConnectorSymbolic {
    pub entries: Vec<ConnectorEntry>,
}

impl ConnectorSymbolic {
    /// Total number of evaluation slots, multiplicities included.
    pub fn total_count(&self) -> BigUint {
        self.entries
            .iter()
            .map(|e| e.multiplicity.clone())
            .sum::<BigUint>()
    }

    /// Slots whose reparametrisation is structurally non-constant.
    pub fn non_constant_count(&self) -> BigUint {
        self.entries
            .iter()
            .filter(|e| matches!(e.func, ConnectorFunc::Piecewise(_)))
            .map(|e| e.multiplicity.clone())
            .sum::<BigUint>()
    }

    pub fn non_constant_fraction(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.non_constant_count()),
            BigInt::from(self.total_count()),
        )
    }

    /// Merge equal entries and order deterministically (constants first by
    /// value, then piecewise entries by breakpoint list).
    pub fn normalized(mut self) -> ConnectorSymbolic {
        self.entries
            .sort_by(|a, b| a.func.cmp(&b.func));
        let mut out: Vec<ConnectorEntry> = Vec::with_capacity(self.entries.len());
        for e in self.entries.drain(..) {
            match out.last_mut() {
                Some(last) if last.func == e.func => last.multiplicity += e.multiplicity,
                _ => out.push(e),
            }
        }
        ConnectorSymbolic { entries: out }
    }

    /// Compose with the next (inner) level: entries `G∘F` for `G` in `self`
    /// and `F` in `next`, multiplicities multiplied. A composite is constant
    /// iff some factor is constant.
    pub fn compose_next(&self, next: &ConnectorSymbolic) -> Result<ConnectorSymbolic> {
        const DISTINCT_BUDGET: usize = 2_000_000;
        if self
            .entries
            .len()
            .checked_mul(next.entries.len())
            .map(|n| n > DISTINCT_BUDGET)
            .unwrap_or(true)
        {
            return Err(Error::Resource(format!(
                "connector composition would materialize {} x {} entries",
                self.entries.len(),
                next.entries.len()
            )));
        }
        let next_total = next.total_count();
        let mut entries = Vec::new();
        for g in &self.entries {
            match &g.func {
                ConnectorFunc::Constant(c) => {
                    // constant outer factor absorbs the whole inner level
                    entries.push(ConnectorEntry {
                        func: ConnectorFunc::Constant(c.clone()),
                        multiplicity: &g.multiplicity * &next_total,
                    });
                }
                ConnectorFunc::Piecewise(gp) => {
                    for f in &next.entries {
                        let mult = &g.multiplicity * &f.multiplicity;
                        let func = match &f.func {
                            ConnectorFunc::Constant(c) => {
                                ConnectorFunc::Constant(gp.eval(c)?)
                            }
                            ConnectorFunc::Piecewise(fp) => {
                                ConnectorFunc::Piecewise(gp.compose(fp)?)
                            }
                        };
                        entries.push(ConnectorEntry { func, multiplicity: mult });
                    }
                }
            }
        }
        Ok(ConnectorSymbolic { entries }.normalized())
    }
}

/// The symbolic evaluation data of one connecting step at matrix-size
/// parameter `q`: constants `i/q` (for `1 ≤ i ≤ q−1`) each with multiplicity
/// `q³`, the late ramp `h` with multiplicity `q(q−1)`, and the profiles
/// `h_i(t) = 1 − (i/q)·f(1−t)` for `1 ≤ i ≤ q`, each once. Total count
/// `q³(q−1) + q(q−1) + q`, of which exactly `q²` slots are non-constant, so
/// the non-constant fraction is `1/(q²−q+1)`.
pub fn lambda_sequence(q: u64) -> Result<ConnectorSymbolic> {
    if q < 2 {
        return Err(Error::Precondition(format!(
            "level parameter must be at least 2, got {q}"
        )));
    }
    let qc = BigUint::from(q);
    let q3 = &qc * &qc * &qc;
    let mut entries = Vec::new();
    for i in 1..q {
        entries.push(ConnectorEntry {
            func: ConnectorFunc::Constant(rat(i as i64, q as i64)),
            multiplicity: q3.clone(),
        });
    }
    entries.push(ConnectorEntry {
        func: ConnectorFunc::Piecewise(canon::h()),
        multiplicity: &qc * &(&qc - 1u32),
    });
    let f_reflected = canon::f().reflect();
    for i in 1..=q {
        let hi = PLFunc::constant(BigRational::one())
            .sub(&f_reflected.scale(&rat(i as i64, q as i64)));
        entries.push(ConnectorEntry {
            func: ConnectorFunc::Piecewise(hi),
            multiplicity: BigUint::one(),
        });
    }
    Ok(ConnectorSymbolic { entries })
}

// --- serialization -------------------------------------------------------
//
// Breakpoints travel as arrays of [numerator, denominator] decimal strings:
// [[["xn","xd"],["yn","yd"]], ...], lossless for arbitrary-precision values.

fn rational_to_strings(r: &BigRational) -> [String; 2] {
    [r.numer().to_string(), r.denom().to_string()]
}

fn rational_from_strings(s: &[String; 2]) -> std::result::Result<BigRational, String> {
    let num: BigInt = s[0].parse().map_err(|e| format!("bad numerator: {e}"))?;
    let den: BigInt = s[1].parse().map_err(|e| format!("bad denominator: {e}"))?;
    if den.is_zero() {
        return Err("zero denominator".into());
    }
    Ok(BigRational::new(num, den))
}

impl Serialize for PLFunc {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<[[String; 2]; 2]> = self
            .points
            .iter()
            .map(|(x, y)| [rational_to_strings(x), rational_to_strings(y)])
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PLFunc {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<[[String; 2]; 2]> = Vec::deserialize(deserializer)?;
        let points = rows
            .iter()
            .map(|[x, y]| {
                Ok((
                    rational_from_strings(x).map_err(D::Error::custom)?,
                    rational_from_strings(y).map_err(D::Error::custom)?,
                ))
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        PLFunc::new(points).map_err(|e| D::Error::custom(e.to_string()))
    }
}

impl Serialize for ConnectorSymbolic {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            #[serde(skip_serializing_if = "Option::is_none")]
            constant: Option<[String; 2]>,
            #[serde(skip_serializing_if = "Option::is_none")]
            breakpoints: Option<&'a PLFunc>,
            multiplicity: String,
        }
        let rows: Vec<Entry> = self
            .entries
            .iter()
            .map(|e| match &e.func {
                ConnectorFunc::Constant(c) => Entry {
                    constant: Some(rational_to_strings(c)),
                    breakpoints: None,
                    multiplicity: e.multiplicity.to_string(),
                },
                ConnectorFunc::Piecewise(p) => Entry {
                    constant: None,
                    breakpoints: Some(p),
                    multiplicity: e.multiplicity.to_string(),
                },
            })
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConnectorSymbolic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Entry {
            #[serde(default)]
            constant: Option<[String; 2]>,
            #[serde(default)]
            breakpoints: Option<PLFunc>,
            multiplicity: String,
        }
        let rows: Vec<Entry> = Vec::deserialize(deserializer)?;
        let entries = rows
            .into_iter()
            .map(|e| {
                let func = match (e.constant, e.breakpoints) {
                    (Some(c), None) => {
                        ConnectorFunc::Constant(rational_from_strings(&c).map_err(D::Error::custom)?)
                    }
                    (None, Some(p)) => ConnectorFunc::Piecewise(p),
                    _ => {
                        return Err(D::Error::custom(
                            "entry must have exactly one of `constant`, `breakpoints`",
                        ))
                    }
                };
                let multiplicity: BigUint = e
                    .multiplicity
                    .parse()
                    .map_err(|err| D::Error::custom(format!("bad multiplicity: {err}")))?;
                Ok(ConnectorEntry { func, multiplicity })
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        Ok(ConnectorSymbolic { entries })
    }
}
