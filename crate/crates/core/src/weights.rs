//! Curvature weight functionals built from bordered determinants.
//!
//! The module evaluates a family of scalar weights attached to polynomial
//! systems: a defining function paired with cutoffs on a product space
//! ([`PhaseSystem`]), or a polynomial map into ℝⁿ paired with cutoffs on its
//! domain ([`ConeMap`]).  Each weight is a determinant — or a determinant of
//! determinants — whose entries are derivatives of the system, and each is
//! exposed through three backends:
//!
//! * an exact path over ℚ (entries evaluated at a rational point, then an
//!   exact determinant) — the default for identity checking;
//! * a float path (entries evaluated in `f64`, LU determinants) — the default
//!   for scans and integration;
//! * a symbolic path (polynomial determinants) where the result is itself a
//!   polynomial of manageable degree.
//!
//! On top of the direct formulas sits an inductive construction
//! ([`WeightFunctional::Induced`]) that manufactures the higher-order weights
//! from the base one by passing to a cone over the graph: domain variables
//! gain a leading scale parameter, the map is replaced by a reduced derivative
//! of itself, and the base weight is evaluated at a reciprocal substitution.
//! Preparing that construction once per system keeps repeated pointwise
//! evaluation cheap.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{det_rat, polydet_capped, rat_to_f64, MultiPoly, PolyMatrix, Rat};

/// Degree cap for symbolic work inside the inductive construction and the
/// third-order weight, where nested determinants legitimately push degrees
/// far beyond hand-written inputs.
pub const INDUCTION_DEGREE_CAP: u32 = 512;

// ---------------------------------------------------------------------------
// Systems
// ---------------------------------------------------------------------------

/// A polynomial map Φ: ℝ^d → ℝⁿ together with an ordered list of cutoff
/// polynomials on the same domain.  Every weight consumes the prefix of
/// `cutoffs` that its matrix shape demands, so one system can feed weights of
/// several orders as long as enough cutoffs are supplied.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeMap {
    /// Domain dimension (number of variables of every polynomial).
    pub d: usize,
    /// Components of the map, each in `d` variables.
    pub components: Vec<MultiPoly>,
    /// Cutoff polynomials, each in `d` variables.
    pub cutoffs: Vec<MultiPoly>,
}

impl ConeMap {
    pub fn new(d: usize, components: Vec<MultiPoly>, cutoffs: Vec<MultiPoly>) -> Result<Self> {
        if d == 0 {
            return Err(Error::input("cone map needs at least one domain variable"));
        }
        if components.is_empty() {
            return Err(Error::input("cone map needs at least one component"));
        }
        for p in components.iter().chain(cutoffs.iter()) {
            if p.nvars() != d {
                return Err(Error::input(format!(
                    "cone map polynomial has {} variables, expected {d}",
                    p.nvars()
                )));
            }
        }
        Ok(ConeMap { d, components, cutoffs })
    }

    /// Target dimension n.
    pub fn n(&self) -> usize {
        self.components.len()
    }

    fn cutoff_prefix(&self, q: usize, what: &str) -> Result<&[MultiPoly]> {
        if self.cutoffs.len() < q {
            return Err(Error::input(format!(
                "{what} needs {q} cutoff(s), system has {}",
                self.cutoffs.len()
            )));
        }
        Ok(&self.cutoffs[..q])
    }

    fn check_point(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(Error::input(format!(
                "evaluation point has {len} coordinates, domain dimension is {}",
                self.d
            )));
        }
        Ok(())
    }
}

/// A defining polynomial ρ on ℝ^{d_l} × ℝ^{d_r} with companion cutoffs.  The
/// first `d_l` variables are the left block x, the remaining `d_r` the right
/// block y.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSystem {
    pub d_l: usize,
    pub d_r: usize,
    /// Defining polynomial in `d_l + d_r` variables.
    pub rho: MultiPoly,
    /// Cutoffs in the same `d_l + d_r` variables.
    pub cutoffs: Vec<MultiPoly>,
}

impl PhaseSystem {
    pub fn new(d_l: usize, d_r: usize, rho: MultiPoly, cutoffs: Vec<MultiPoly>) -> Result<Self> {
        if d_l == 0 || d_r == 0 {
            return Err(Error::input("phase system blocks must both be nonempty"));
        }
        if d_l > d_r + 1 {
            return Err(Error::input(format!(
                "phase system needs d_l <= d_r + 1 (got d_l = {d_l}, d_r = {d_r})"
            )));
        }
        let nv = d_l + d_r;
        for p in std::iter::once(&rho).chain(cutoffs.iter()) {
            if p.nvars() != nv {
                return Err(Error::input(format!(
                    "phase polynomial has {} variables, expected {nv}",
                    p.nvars()
                )));
            }
        }
        Ok(PhaseSystem { d_l, d_r, rho, cutoffs })
    }

    fn check_point(&self, len: usize) -> Result<()> {
        if len != self.d_l + self.d_r {
            return Err(Error::input(format!(
                "evaluation point has {len} coordinates, expected {}",
                self.d_l + self.d_r
            )));
        }
        Ok(())
    }
}

/// Which derivative covector to extract: the component-bordered operator, or
/// its reduced form that splits off the first component before pairing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DopMode {
    Full,
    FirstSplit,
}

// ---------------------------------------------------------------------------
// Evaluation backends
// ---------------------------------------------------------------------------

/// Backend used by the generic weight builders: entries of the determinant
/// matrices are mapped into a scalar type, and determinants are folded in that
/// type.  One builder per weight then serves the exact, float, and symbolic
/// paths alike.
trait EvalCtx {
    type S: Clone;
    fn eval(&self, p: &MultiPoly) -> Self::S;
    fn from_rat(&self, r: &Rat) -> Self::S;
    fn zero(&self) -> Self::S;
    fn add(&self, a: Self::S, b: Self::S) -> Result<Self::S>;
    fn sub(&self, a: Self::S, b: Self::S) -> Result<Self::S>;
    fn mul(&self, a: &Self::S, b: &Self::S) -> Result<Self::S>;
    fn det(&self, rows: Vec<Vec<Self::S>>) -> Result<Self::S>;
}

struct ExactCtx<'a> {
    point: &'a [Rat],
}

impl EvalCtx for ExactCtx<'_> {
    type S = Rat;
    fn eval(&self, p: &MultiPoly) -> Rat {
        p.eval_rat(self.point)
    }
    fn from_rat(&self, r: &Rat) -> Rat {
        r.clone()
    }
    fn zero(&self) -> Rat {
        Rat::zero()
    }
    fn add(&self, a: Rat, b: Rat) -> Result<Rat> {
        Ok(a + b)
    }
    fn sub(&self, a: Rat, b: Rat) -> Result<Rat> {
        Ok(a - b)
    }
    fn mul(&self, a: &Rat, b: &Rat) -> Result<Rat> {
        Ok(a * b)
    }
    fn det(&self, rows: Vec<Vec<Rat>>) -> Result<Rat> {
        det_rat(&rows)
    }
}

struct FloatCtx<'a> {
    point: &'a [f64],
}

impl EvalCtx for FloatCtx<'_> {
    type S = f64;
    fn eval(&self, p: &MultiPoly) -> f64 {
        p.eval_f64(self.point)
    }
    fn from_rat(&self, r: &Rat) -> f64 {
        rat_to_f64(r)
    }
    fn zero(&self) -> f64 {
        0.0
    }
    fn add(&self, a: f64, b: f64) -> Result<f64> {
        Ok(a + b)
    }
    fn sub(&self, a: f64, b: f64) -> Result<f64> {
        Ok(a - b)
    }
    fn mul(&self, a: &f64, b: &f64) -> Result<f64> {
        Ok(a * b)
    }
    fn det(&self, rows: Vec<Vec<f64>>) -> Result<f64> {
        linalg::det_rows(&rows)
    }
}

struct SymCtx {
    nvars: usize,
    cap: u32,
}

impl EvalCtx for SymCtx {
    type S = MultiPoly;
    fn eval(&self, p: &MultiPoly) -> MultiPoly {
        p.clone()
    }
    fn from_rat(&self, r: &Rat) -> MultiPoly {
        MultiPoly::constant(self.nvars, r.clone())
    }
    fn zero(&self) -> MultiPoly {
        MultiPoly::zero(self.nvars)
    }
    fn add(&self, a: MultiPoly, b: MultiPoly) -> Result<MultiPoly> {
        Ok(&a + &b)
    }
    fn sub(&self, a: MultiPoly, b: MultiPoly) -> Result<MultiPoly> {
        Ok(&a - &b)
    }
    fn mul(&self, a: &MultiPoly, b: &MultiPoly) -> Result<MultiPoly> {
        a.mul_capped(b, self.cap)
    }
    fn det(&self, rows: Vec<Vec<MultiPoly>>) -> Result<MultiPoly> {
        let n = rows.len();
        for r in &rows {
            if r.len() != n {
                return Err(Error::input("determinant of a ragged polynomial matrix"));
            }
        }
        let m = PolyMatrix::from_fn(n, n, self.nvars, |i, j| rows[i][j].clone());
        polydet_capped(&m, self.cap)
    }
}

/// q = d − n + offset as a checked dimension, with a readable error.
fn codim(d: usize, n: usize, offset: usize, what: &str) -> Result<usize> {
    (d + offset).checked_sub(n).ok_or_else(|| {
        Error::input(format!(
            "{what} needs d + {offset} >= n (domain {d}, target {n})"
        ))
    })
}

// ---------------------------------------------------------------------------
// Generic builders (one per weight, shared by all backends)
// ---------------------------------------------------------------------------

/// Pairing ⟨D₁Φ, z⟩: determinant of the cutoff-bordered Jacobian with the
/// vector z inserted as the leading column of the component block.
fn d1_pair_g<C: EvalCtx>(ctx: &C, cm: &ConeMap, z: &[C::S]) -> Result<C::S> {
    let (d, n) = (cm.d, cm.n());
    if z.len() != n {
        return Err(Error::input(format!(
            "pairing vector has {} entries, target dimension is {n}",
            z.len()
        )));
    }
    let q = codim(d, n, 1, "the first-order pairing")?;
    let cut = cm.cutoff_prefix(q, "the first-order pairing")?;
    let mut rows = Vec::with_capacity(q + n);
    for f in cut {
        let mut row = Vec::with_capacity(1 + d);
        row.push(ctx.zero());
        for j in 0..d {
            row.push(ctx.eval(&f.partial(j)));
        }
        rows.push(row);
    }
    for (c, comp) in cm.components.iter().enumerate() {
        let mut row = Vec::with_capacity(1 + d);
        row.push(z[c].clone());
        for j in 0..d {
            row.push(ctx.eval(&comp.partial(j)));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

fn d1_components_g<C: EvalCtx>(ctx: &C, cm: &ConeMap) -> Result<Vec<C::S>> {
    let n = cm.n();
    let one = ctx.from_rat(&Rat::one());
    (0..n)
        .map(|i| {
            let z: Vec<C::S> = (0..n)
                .map(|c| if c == i { one.clone() } else { ctx.zero() })
                .collect();
            d1_pair_g(ctx, cm, &z)
        })
        .collect()
}

/// Pairing against the component-bordered second operator.  `Full` keeps the
/// whole component column; `FirstSplit` moves the first component out of the
/// pairing, shrinking the covector by one slot.
fn dop_pair_g<C: EvalCtx>(ctx: &C, cm: &ConeMap, mode: DopMode, z: &[C::S]) -> Result<C::S> {
    let (d, n) = (cm.d, cm.n());
    let (q, zlen, what) = match mode {
        DopMode::Full => (codim(d, n, 2, "the component-bordered pairing")?, n, "the component-bordered pairing"),
        DopMode::FirstSplit => {
            if n < 2 {
                return Err(Error::input(
                    "the split pairing needs at least two components",
                ));
            }
            (codim(d, n - 1, 1, "the split pairing")?, n - 1, "the split pairing")
        }
    };
    if z.len() != zlen {
        return Err(Error::input(format!(
            "pairing vector has {} entries, expected {zlen}",
            z.len()
        )));
    }
    let cut = cm.cutoff_prefix(q, what)?;
    let mut rows = Vec::with_capacity(q + n);
    for f in cut {
        let mut row = Vec::with_capacity(2 + d);
        row.push(ctx.zero());
        row.push(ctx.zero());
        for j in 0..d {
            row.push(ctx.eval(&f.partial(j)));
        }
        rows.push(row);
    }
    for (c, comp) in cm.components.iter().enumerate() {
        let mut row = Vec::with_capacity(2 + d);
        let lead = match mode {
            DopMode::Full => z[c].clone(),
            DopMode::FirstSplit => {
                if c == 0 {
                    ctx.zero()
                } else {
                    z[c - 1].clone()
                }
            }
        };
        row.push(lead);
        row.push(ctx.eval(comp));
        for j in 0..d {
            row.push(ctx.eval(&comp.partial(j)));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

fn dop_components_g<C: EvalCtx>(ctx: &C, cm: &ConeMap, mode: DopMode) -> Result<Vec<C::S>> {
    let len = match mode {
        DopMode::Full => cm.n(),
        DopMode::FirstSplit => cm.n().saturating_sub(1),
    };
    let one = ctx.from_rat(&Rat::one());
    (0..len)
        .map(|i| {
            let z: Vec<C::S> = (0..len)
                .map(|c| if c == i { one.clone() } else { ctx.zero() })
                .collect();
            dop_pair_g(ctx, cm, mode, &z)
        })
        .collect()
}

/// First-order weight ⟨D₁Φ, Φ⟩.
fn w1_g<C: EvalCtx>(ctx: &C, cm: &ConeMap) -> Result<C::S> {
    let z: Vec<C::S> = cm.components.iter().map(|c| ctx.eval(c)).collect();
    d1_pair_g(ctx, cm, &z)
}

/// Partially degenerate first-order weight: fixed direction vectors occupy
/// the leading columns in place of the pairing vector.
fn w1_partial_g<C: EvalCtx>(ctx: &C, cm: &ConeMap, directions: &[Vec<Rat>]) -> Result<C::S> {
    let (d, n) = (cm.d, cm.n());
    let j = directions.len();
    if j > n {
        return Err(Error::input(format!(
            "at most {n} direction vectors are allowed, got {j}"
        )));
    }
    for v in directions {
        if v.len() != n {
            return Err(Error::input(format!(
                "direction vector has {} entries, target dimension is {n}",
                v.len()
            )));
        }
    }
    let q = codim(d, n, j, "the partially degenerate first-order weight")?;
    let cut = cm.cutoff_prefix(q, "the partially degenerate first-order weight")?;
    let mut rows = Vec::with_capacity(q + n);
    for f in cut {
        let mut row = Vec::with_capacity(j + d);
        for _ in 0..j {
            row.push(ctx.zero());
        }
        for t in 0..d {
            row.push(ctx.eval(&f.partial(t)));
        }
        rows.push(row);
    }
    for (c, comp) in cm.components.iter().enumerate() {
        let mut row = Vec::with_capacity(j + d);
        for v in directions {
            row.push(ctx.from_rat(&v[c]));
        }
        for t in 0..d {
            row.push(ctx.eval(&comp.partial(t)));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

/// Second-order weight: outer bordered determinant whose core entries are the
/// component-bordered pairings against second derivatives of the map.
fn w2_g<C: EvalCtx>(ctx: &C, cm: &ConeMap) -> Result<C::S> {
    let (d, n) = (cm.d, cm.n());
    let q = codim(d, n, 2, "the second-order weight")?;
    let cut = cm.cutoff_prefix(q, "the second-order weight")?;
    // Core entries are symmetric in (i, j) because mixed partials commute.
    let mut core: Vec<Vec<Option<C::S>>> = vec![vec![None; d]; d];
    for i in 0..d {
        for j in i..d {
            let z: Vec<C::S> = cm
                .components
                .iter()
                .map(|comp| ctx.eval(&comp.partial(i).partial(j)))
                .collect();
            let m = dop_pair_g(ctx, cm, DopMode::Full, &z)?;
            core[i][j] = Some(m.clone());
            core[j][i] = Some(m);
        }
    }
    let mut rows = Vec::with_capacity(q + d);
    for f in cut {
        let mut row = Vec::with_capacity(q + d);
        for _ in 0..q {
            row.push(ctx.zero());
        }
        for j in 0..d {
            row.push(ctx.eval(&f.partial(j)));
        }
        rows.push(row);
    }
    for i in 0..d {
        let mut row = Vec::with_capacity(q + d);
        for f in cut {
            row.push(ctx.eval(&f.partial(i)));
        }
        for j in 0..d {
            row.push(core[i][j].take().expect("core entry filled above"));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

/// Second-order weight with `border` component gradients promoted into the
/// outer border, for maps into ℝ^{n−1} whose cone has that many flat
/// directions.  The core pairing carries the second derivative in its leading
/// column instead of a component column.
fn w2_k_g<C: EvalCtx>(ctx: &C, cm: &ConeMap, border: usize) -> Result<C::S> {
    let (d, nm1) = (cm.d, cm.n());
    let n = nm1 + 1;
    if border > n - 2 {
        return Err(Error::input(format!(
            "border rank {border} exceeds the limit {} for this target",
            n - 2
        )));
    }
    let q = codim(d, n, 2, "the bordered second-order weight")?;
    let cut = cm.cutoff_prefix(q, "the bordered second-order weight")?;
    let mut core: Vec<Vec<Option<C::S>>> = vec![vec![None; d]; d];
    for i in 0..d {
        for j in i..d {
            let mut rows = Vec::with_capacity(q + nm1);
            for f in cut {
                let mut row = Vec::with_capacity(1 + d);
                row.push(ctx.zero());
                for t in 0..d {
                    row.push(ctx.eval(&f.partial(t)));
                }
                rows.push(row);
            }
            for comp in &cm.components {
                let mut row = Vec::with_capacity(1 + d);
                row.push(ctx.eval(&comp.partial(i).partial(j)));
                for t in 0..d {
                    row.push(ctx.eval(&comp.partial(t)));
                }
                rows.push(row);
            }
            let m = ctx.det(rows)?;
            core[i][j] = Some(m.clone());
            core[j][i] = Some(m);
        }
    }
    let width = q + border;
    let mut rows = Vec::with_capacity(width + d);
    for f in cut {
        let mut row = Vec::with_capacity(width + d);
        for _ in 0..width {
            row.push(ctx.zero());
        }
        for j in 0..d {
            row.push(ctx.eval(&f.partial(j)));
        }
        rows.push(row);
    }
    for t in 0..border {
        let mut row = Vec::with_capacity(width + d);
        for _ in 0..width {
            row.push(ctx.zero());
        }
        for j in 0..d {
            row.push(ctx.eval(&cm.components[t].partial(j)));
        }
        rows.push(row);
    }
    for i in 0..d {
        let mut row = Vec::with_capacity(width + d);
        for f in cut {
            row.push(ctx.eval(&f.partial(i)));
        }
        for t in 0..border {
            row.push(ctx.eval(&cm.components[t].partial(i)));
        }
        for j in 0..d {
            row.push(core[i][j].take().expect("core entry filled above"));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

/// Second-order weight degenerate along fixed directions: the direction
/// vectors occupy leading columns of the core pairing, and `border` component
/// gradients are promoted into the outer border.
fn w2_jk_g<C: EvalCtx>(
    ctx: &C,
    cm: &ConeMap,
    directions: &[Vec<Rat>],
    border: usize,
) -> Result<C::S> {
    let (d, n) = (cm.d, cm.n());
    let j = directions.len();
    for v in directions {
        if v.len() != n {
            return Err(Error::input(format!(
                "direction vector has {} entries, target dimension is {n}",
                v.len()
            )));
        }
    }
    if border + j + 1 > n {
        return Err(Error::input(format!(
            "border rank {border} with {j} direction(s) exceeds the limit for target {n}"
        )));
    }
    let q = codim(d, n, j + 1, "the direction-degenerate second-order weight")?;
    let cut = cm.cutoff_prefix(q, "the direction-degenerate second-order weight")?;
    let mut core: Vec<Vec<Option<C::S>>> = vec![vec![None; d]; d];
    for i in 0..d {
        for l in i..d {
            let mut rows = Vec::with_capacity(q + n);
            for f in cut {
                let mut row = Vec::with_capacity(j + 1 + d);
                for _ in 0..=j {
                    row.push(ctx.zero());
                }
                for t in 0..d {
                    row.push(ctx.eval(&f.partial(t)));
                }
                rows.push(row);
            }
            for (c, comp) in cm.components.iter().enumerate() {
                let mut row = Vec::with_capacity(j + 1 + d);
                for v in directions {
                    row.push(ctx.from_rat(&v[c]));
                }
                row.push(ctx.eval(&comp.partial(i).partial(l)));
                for t in 0..d {
                    row.push(ctx.eval(&comp.partial(t)));
                }
                rows.push(row);
            }
            let m = ctx.det(rows)?;
            core[i][l] = Some(m.clone());
            core[l][i] = Some(m);
        }
    }
    let width = q + border;
    let mut rows = Vec::with_capacity(width + d);
    for f in cut {
        let mut row = Vec::with_capacity(width + d);
        for _ in 0..width {
            row.push(ctx.zero());
        }
        for t in 0..d {
            row.push(ctx.eval(&f.partial(t)));
        }
        rows.push(row);
    }
    for t in 0..border {
        let mut row = Vec::with_capacity(width + d);
        for _ in 0..width {
            row.push(ctx.zero());
        }
        for s in 0..d {
            row.push(ctx.eval(&cm.components[t].partial(s)));
        }
        rows.push(row);
    }
    for i in 0..d {
        let mut row = Vec::with_capacity(width + d);
        for f in cut {
            row.push(ctx.eval(&f.partial(i)));
        }
        for t in 0..border {
            row.push(ctx.eval(&cm.components[t].partial(i)));
        }
        for l in 0..d {
            row.push(core[i][l].take().expect("core entry filled above"));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

/// Third-order weight, returned in the form (ℓ∘Φ)^d · W so the construction
/// stays polynomial; callers divide by the evaluated (ℓ∘Φ)^d on the scalar
/// paths.  `ell` is the linear functional on the target space that the weight
/// depends on.
fn w3_scaled_g<C: EvalCtx>(ctx: &C, cm: &ConeMap, ell: &[Rat]) -> Result<C::S> {
    let (d, n) = (cm.d, cm.n());
    if n <= 2 {
        return Err(Error::input(
            "the third-order weight needs a target of dimension at least 3",
        ));
    }
    if ell.len() != n {
        return Err(Error::input(format!(
            "functional has {} entries, target dimension is {n}",
            ell.len()
        )));
    }
    if ell.iter().all(|c| c.is_zero()) {
        return Err(Error::input("the third-order functional must be nonzero"));
    }
    let q2 = codim(d, n, 2, "the third-order weight")?;
    let q3 = q2 + 1;
    let cut3 = cm.cutoff_prefix(q3, "the third-order weight")?;
    let cut2 = &cut3[..q2];
    // The second operator's covector components, kept symbolic because the
    // core entries differentiate them again.
    let sym = SymCtx { nvars: d, cap: INDUCTION_DEGREE_CAP };
    let dcomp = dop_components_g(&sym, cm, DopMode::Full)?;
    let ell_comp: MultiPoly = cm
        .components
        .iter()
        .zip(ell)
        .map(|(c, w)| c.scale(w))
        .fold(MultiPoly::zero(d), |a, b| &a + &b);
    let ell_val = ctx.eval(&ell_comp);
    // G[r][l] = Σ_c (DΦ)_c · ∂²_{r l}Φ_c appears both inside the bordered
    // blocks and as the coefficient of the correction term.
    let mut gmat: Vec<Vec<C::S>> = vec![vec![ctx.zero(); d]; d];
    for r in 0..d {
        for l in r..d {
            let mut acc = ctx.zero();
            for c in 0..n {
                let term = ctx.mul(
                    &ctx.eval(&dcomp[c]),
                    &ctx.eval(&cm.components[c].partial(r).partial(l)),
                )?;
                acc = ctx.add(acc, term)?;
            }
            gmat[r][l] = acc.clone();
            gmat[l][r] = acc;
        }
    }
    // Shared bordered determinant: cutoff rows, one designated middle row,
    // then the G block bordered by the longer cutoff list.
    let bordered = |mid: Vec<C::S>| -> Result<C::S> {
        let mut rows = Vec::with_capacity(q2 + 1 + d);
        for f in cut2 {
            let mut row = Vec::with_capacity(q3 + d);
            for _ in 0..q3 {
                row.push(ctx.zero());
            }
            for l in 0..d {
                row.push(ctx.eval(&f.partial(l)));
            }
            rows.push(row);
        }
        {
            let mut row = Vec::with_capacity(q3 + d);
            for _ in 0..q3 {
                row.push(ctx.zero());
            }
            row.extend(mid);
            rows.push(row);
        }
        for r in 0..d {
            let mut row = Vec::with_capacity(q3 + d);
            for f in cut3 {
                row.push(ctx.eval(&f.partial(r)));
            }
            for l in 0..d {
                row.push(gmat[r][l].clone());
            }
            rows.push(row);
        }
        ctx.det(rows)
    };
    let row_b: Vec<C::S> = (0..d).map(|l| ctx.eval(&ell_comp.partial(l))).collect();
    let det_b = bordered(row_b)?;
    // Core entries, scaled through by ℓ∘Φ to stay in the ring:
    // (ℓ∘Φ)·N_ij = (ℓ∘Φ)·detA_ij − G_ij·detB.
    let mut core: Vec<Vec<Option<C::S>>> = vec![vec![None; d]; d];
    for i in 0..d {
        for j in i..d {
            let mut row_a = Vec::with_capacity(d);
            for l in 0..d {
                let mut acc = ctx.zero();
                for c in 0..n {
                    let term = ctx.mul(
                        &ctx.eval(&dcomp[c].partial(i).partial(j)),
                        &ctx.eval(&cm.components[c].partial(l)),
                    )?;
                    acc = ctx.add(acc, term)?;
                }
                row_a.push(acc);
            }
            let det_a = bordered(row_a)?;
            let scaled = ctx.sub(
                ctx.mul(&ell_val, &det_a)?,
                ctx.mul(&gmat[i][j], &det_b)?,
            )?;
            core[i][j] = Some(scaled.clone());
            core[j][i] = Some(scaled);
        }
    }
    // Outer determinant with the bottom rows scaled by ℓ∘Φ, which multiplies
    // the whole determinant by (ℓ∘Φ)^d.
    let mut rows = Vec::with_capacity(q3 + d);
    for f in cut3 {
        let mut row = Vec::with_capacity(q3 + d);
        for _ in 0..q3 {
            row.push(ctx.zero());
        }
        for j in 0..d {
            row.push(ctx.eval(&f.partial(j)));
        }
        rows.push(row);
    }
    for i in 0..d {
        let mut row = Vec::with_capacity(q3 + d);
        for f in cut3 {
            row.push(ctx.mul(&ell_val, &ctx.eval(&f.partial(i)))?);
        }
        for j in 0..d {
            row.push(core[i][j].take().expect("core entry filled above"));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

/// First rotational-curvature weight on a phase system: the (d_r+1)-square
/// bordered mixed-Hessian determinant.
fn rotcurv1_g<C: EvalCtx>(ctx: &C, ps: &PhaseSystem) -> Result<C::S> {
    let (dl, dr) = (ps.d_l, ps.d_r);
    let k = dr.checked_sub(dl).ok_or_else(|| {
        Error::input("the first rotational weight needs d_l <= d_r")
    })?;
    if ps.cutoffs.len() < k {
        return Err(Error::input(format!(
            "the first rotational weight needs {k} cutoff(s), system has {}",
            ps.cutoffs.len()
        )));
    }
    let cut = &ps.cutoffs[..k];
    let y = |i: usize| dl + i;
    let mut rows = Vec::with_capacity(dr + 1);
    {
        let mut row = Vec::with_capacity(dr + 1);
        for _ in 0..=k {
            row.push(ctx.zero());
        }
        for a in 0..dl {
            row.push(ctx.eval(&ps.rho.partial(a)));
        }
        rows.push(row);
    }
    for i in 0..dr {
        let mut row = Vec::with_capacity(dr + 1);
        for f in cut {
            row.push(ctx.eval(&f.partial(y(i))));
        }
        row.push(ctx.eval(&ps.rho.partial(y(i))));
        for a in 0..dl {
            row.push(ctx.eval(&ps.rho.partial(a).partial(y(i))));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

/// Second rotational-curvature weight: outer block determinant whose core is
/// the matrix of third-derivative bordered determinants.
fn rotcurv2_g<C: EvalCtx>(ctx: &C, ps: &PhaseSystem) -> Result<C::S> {
    let (dl, dr) = (ps.d_l, ps.d_r);
    let r = (dr + 1).checked_sub(dl).ok_or_else(|| {
        Error::input("the second rotational weight needs d_l <= d_r + 1")
    })?;
    if ps.cutoffs.len() < r {
        return Err(Error::input(format!(
            "the second rotational weight needs {r} cutoff(s), system has {}",
            ps.cutoffs.len()
        )));
    }
    let cut = &ps.cutoffs[..r];
    let y = |i: usize| dl + i;
    let mut core: Vec<Vec<Option<C::S>>> = vec![vec![None; dr]; dr];
    for i in 0..dr {
        for l in i..dr {
            let mut rows = Vec::with_capacity(dr + 2);
            {
                let mut row = Vec::with_capacity(dr + 2);
                for _ in 0..=r {
                    row.push(ctx.zero());
                }
                for a in 0..dl {
                    row.push(ctx.eval(&ps.rho.partial(a)));
                }
                rows.push(row);
            }
            {
                let mut row = Vec::with_capacity(dr + 2);
                for _ in 0..=r {
                    row.push(ctx.zero());
                }
                for a in 0..dl {
                    row.push(ctx.eval(&ps.rho.partial(a).partial(y(i)).partial(y(l))));
                }
                rows.push(row);
            }
            for s in 0..dr {
                let mut row = Vec::with_capacity(dr + 2);
                for f in cut {
                    row.push(ctx.eval(&f.partial(y(s))));
                }
                row.push(ctx.eval(&ps.rho.partial(y(s))));
                for a in 0..dl {
                    row.push(ctx.eval(&ps.rho.partial(a).partial(y(s))));
                }
                rows.push(row);
            }
            let m = ctx.det(rows)?;
            core[i][l] = Some(m.clone());
            core[l][i] = Some(m);
        }
    }
    let mut rows = Vec::with_capacity(r + 1 + dr);
    for f in cut {
        let mut row = Vec::with_capacity(r + 1 + dr);
        for _ in 0..=r {
            row.push(ctx.zero());
        }
        for j in 0..dr {
            row.push(ctx.eval(&f.partial(y(j))));
        }
        rows.push(row);
    }
    {
        let mut row = Vec::with_capacity(r + 1 + dr);
        for _ in 0..=r {
            row.push(ctx.zero());
        }
        for j in 0..dr {
            row.push(ctx.eval(&ps.rho.partial(y(j))));
        }
        rows.push(row);
    }
    for i in 0..dr {
        let mut row = Vec::with_capacity(r + 1 + dr);
        for f in cut {
            row.push(ctx.eval(&f.partial(y(i))));
        }
        row.push(ctx.eval(&ps.rho.partial(y(i))));
        for l in 0..dr {
            row.push(core[i][l].take().expect("core entry filled above"));
        }
        rows.push(row);
    }
    ctx.det(rows)
}

// ---------------------------------------------------------------------------
// Public operations: exact / float / symbolic paths
// ---------------------------------------------------------------------------

macro_rules! triple_paths {
    ($exact:ident, $float:ident, $sym:ident, $builder:ident, ($($arg:ident : $ty:ty),*)) => {
        pub fn $exact(cm: &ConeMap, $($arg: $ty,)* y: &[Rat]) -> Result<Rat> {
            cm.check_point(y.len())?;
            $builder(&ExactCtx { point: y }, cm $(, $arg)*)
        }
        pub fn $float(cm: &ConeMap, $($arg: $ty,)* y: &[f64]) -> Result<f64> {
            cm.check_point(y.len())?;
            $builder(&FloatCtx { point: y }, cm $(, $arg)*)
        }
        pub fn $sym(cm: &ConeMap $(, $arg: $ty)*) -> Result<MultiPoly> {
            $builder(&SymCtx { nvars: cm.d, cap: INDUCTION_DEGREE_CAP }, cm $(, $arg)*)
        }
    };
}

triple_paths!(w1_exact, w1_f64, w1_symbolic, w1_g, ());
triple_paths!(
    w1_partial_exact,
    w1_partial_f64,
    w1_partial_symbolic,
    w1_partial_g,
    (directions: &[Vec<Rat>])
);
triple_paths!(w2_exact, w2_f64, w2_symbolic, w2_g, ());
triple_paths!(w2_k_exact, w2_k_f64, w2_k_symbolic, w2_k_g, (border: usize));
triple_paths!(
    w2_jk_exact,
    w2_jk_f64,
    w2_jk_symbolic,
    w2_jk_g,
    (directions: &[Vec<Rat>], border: usize)
);

/// Covector of the first-order derivative operator at a rational point.
pub fn d1_apply_exact(cm: &ConeMap, y: &[Rat]) -> Result<Vec<Rat>> {
    cm.check_point(y.len())?;
    d1_components_g(&ExactCtx { point: y }, cm)
}

pub fn d1_apply_f64(cm: &ConeMap, y: &[f64]) -> Result<Vec<f64>> {
    cm.check_point(y.len())?;
    d1_components_g(&FloatCtx { point: y }, cm)
}

/// Symbolic components of the first-order derivative covector.
pub fn d1_symbolic(cm: &ConeMap) -> Result<Vec<MultiPoly>> {
    d1_components_g(&SymCtx { nvars: cm.d, cap: INDUCTION_DEGREE_CAP }, cm)
}

/// Covector of the component-bordered operator (or its split form).
pub fn dop_apply_exact(cm: &ConeMap, mode: DopMode, y: &[Rat]) -> Result<Vec<Rat>> {
    cm.check_point(y.len())?;
    dop_components_g(&ExactCtx { point: y }, cm, mode)
}

pub fn dop_apply_f64(cm: &ConeMap, mode: DopMode, y: &[f64]) -> Result<Vec<f64>> {
    cm.check_point(y.len())?;
    dop_components_g(&FloatCtx { point: y }, cm, mode)
}

pub fn dop_symbolic(cm: &ConeMap, mode: DopMode) -> Result<Vec<MultiPoly>> {
    dop_components_g(&SymCtx { nvars: cm.d, cap: INDUCTION_DEGREE_CAP }, cm, mode)
}

/// Third-order weight at a rational point.  Returns 0 when the functional
/// vanishes on the image point, by convention.
pub fn w3_exact(cm: &ConeMap, ell: &[Rat], y: &[Rat]) -> Result<Rat> {
    cm.check_point(y.len())?;
    let ctx = ExactCtx { point: y };
    let ell_val = ell_value_exact(cm, ell, y)?;
    if ell_val.is_zero() {
        return Ok(Rat::zero());
    }
    let scaled = w3_scaled_g(&ctx, cm, ell)?;
    Ok(scaled / rat_pow(&ell_val, cm.d as i64))
}

pub fn w3_f64(cm: &ConeMap, ell: &[Rat], y: &[f64]) -> Result<f64> {
    cm.check_point(y.len())?;
    validate_ell(cm, ell)?;
    let ctx = FloatCtx { point: y };
    let ell_val: f64 = cm
        .components
        .iter()
        .zip(ell)
        .map(|(c, w)| c.eval_f64(y) * rat_to_f64(w))
        .sum();
    if ell_val == 0.0 {
        return Ok(0.0);
    }
    let scaled = w3_scaled_g(&ctx, cm, ell)?;
    Ok(scaled / ell_val.powi(cm.d as i32))
}

/// Symbolic third-order weight, scaled by (ℓ∘Φ)^d to stay polynomial.
/// Returns the pair (scaled weight, ℓ∘Φ).
pub fn w3_symbolic_scaled(cm: &ConeMap, ell: &[Rat]) -> Result<(MultiPoly, MultiPoly)> {
    let scaled = w3_scaled_g(&SymCtx { nvars: cm.d, cap: INDUCTION_DEGREE_CAP }, cm, ell)?;
    let ell_comp = cm
        .components
        .iter()
        .zip(ell)
        .map(|(c, w)| c.scale(w))
        .fold(MultiPoly::zero(cm.d), |a, b| &a + &b);
    Ok((scaled, ell_comp))
}

fn validate_ell(cm: &ConeMap, ell: &[Rat]) -> Result<()> {
    if ell.len() != cm.n() {
        return Err(Error::input(format!(
            "functional has {} entries, target dimension is {}",
            ell.len(),
            cm.n()
        )));
    }
    if ell.iter().all(|c| c.is_zero()) {
        return Err(Error::input("the third-order functional must be nonzero"));
    }
    Ok(())
}

fn ell_value_exact(cm: &ConeMap, ell: &[Rat], y: &[Rat]) -> Result<Rat> {
    validate_ell(cm, ell)?;
    Ok(cm
        .components
        .iter()
        .zip(ell)
        .map(|(c, w)| c.eval_rat(y) * w)
        .fold(Rat::zero(), |a, b| a + b))
}

/// The first-coordinate functional, the default choice for the third-order
/// weight.
pub fn first_coordinate_ell(n: usize) -> Vec<Rat> {
    (0..n)
        .map(|i| if i == 0 { Rat::one() } else { Rat::zero() })
        .collect()
}

pub fn rotcurv1_exact(ps: &PhaseSystem, point: &[Rat]) -> Result<Rat> {
    ps.check_point(point.len())?;
    rotcurv1_g(&ExactCtx { point }, ps)
}

pub fn rotcurv1_f64(ps: &PhaseSystem, point: &[f64]) -> Result<f64> {
    ps.check_point(point.len())?;
    rotcurv1_g(&FloatCtx { point }, ps)
}

pub fn rotcurv1_symbolic(ps: &PhaseSystem) -> Result<MultiPoly> {
    rotcurv1_g(&SymCtx { nvars: ps.d_l + ps.d_r, cap: INDUCTION_DEGREE_CAP }, ps)
}

pub fn rotcurv2_exact(ps: &PhaseSystem, point: &[Rat]) -> Result<Rat> {
    ps.check_point(point.len())?;
    rotcurv2_g(&ExactCtx { point }, ps)
}

pub fn rotcurv2_f64(ps: &PhaseSystem, point: &[f64]) -> Result<f64> {
    ps.check_point(point.len())?;
    rotcurv2_g(&FloatCtx { point }, ps)
}

pub fn rotcurv2_symbolic(ps: &PhaseSystem) -> Result<MultiPoly> {
    rotcurv2_g(&SymCtx { nvars: ps.d_l + ps.d_r, cap: INDUCTION_DEGREE_CAP }, ps)
}

// ---------------------------------------------------------------------------
// System transformers
// ---------------------------------------------------------------------------

/// Freezes the left block of a phase system at `x`, producing the cone map
/// whose components are the frozen left-derivatives of ρ and whose cutoffs
/// are the frozen cutoffs followed by frozen ρ (the column order of the
/// rotational weights).
pub fn cone_from_phase(ps: &PhaseSystem, x: &[Rat]) -> Result<ConeMap> {
    if x.len() != ps.d_l {
        return Err(Error::input(format!(
            "left point has {} coordinates, d_l is {}",
            x.len(),
            ps.d_l
        )));
    }
    let components: Vec<MultiPoly> = (0..ps.d_l)
        .map(|a| ps.rho.partial(a).freeze_prefix(x))
        .collect();
    let mut cutoffs: Vec<MultiPoly> =
        ps.cutoffs.iter().map(|f| f.freeze_prefix(x)).collect();
    cutoffs.push(ps.rho.freeze_prefix(x));
    ConeMap::new(ps.d_r, components, cutoffs)
}

/// Appends `extra` dummy domain variables together with matching coordinate
/// cutoffs.  This lifts a system whose domain is too small for a weight (for
/// example a curve fed to the second-order weight) into one where the weight
/// is defined; evaluate at points whose new coordinates are zero.
pub fn augment(cm: &ConeMap, extra: usize) -> Result<ConeMap> {
    let d = cm.d + extra;
    let components: Vec<MultiPoly> =
        cm.components.iter().map(|c| c.extend_back(extra)).collect();
    let mut cutoffs: Vec<MultiPoly> =
        cm.cutoffs.iter().map(|f| f.extend_back(extra)).collect();
    for t in 0..extra {
        cutoffs.push(MultiPoly::var(d, cm.d + t));
    }
    ConeMap::new(d, components, cutoffs)
}

// ---------------------------------------------------------------------------
// Weight functionals and the inductive construction
// ---------------------------------------------------------------------------

/// A weight selected by kind plus kind-specific parameters.  The rotational
/// kinds attach to a [`PhaseSystem`]; all others attach to a [`ConeMap`].
#[derive(Clone, Debug)]
pub enum WeightFunctional {
    RotCurv1,
    RotCurv2,
    W1,
    W1Partial { directions: Vec<Vec<Rat>> },
    W2,
    W2K { border: usize },
    W2JK { directions: Vec<Vec<Rat>>, border: usize },
    W3 { ell: Vec<Rat> },
    /// One step of the inductive construction applied to `base`, which must
    /// be valid for maps into ℝ^{base_target}; the attached system maps into
    /// ℝ^{base_target + 1}.  `alpha` and `beta` are the exponents of the
    /// inequality hypothesis satisfied by the base weight.
    Induced {
        base: Box<WeightFunctional>,
        alpha: Rat,
        beta: Rat,
        base_target: usize,
    },
}

impl WeightFunctional {
    /// Validates the functional against a cone map and caches everything
    /// point-independent (for induced weights: the lifted system and the
    /// recursively prepared base).
    pub fn prepare(&self, cm: &ConeMap) -> Result<PreparedWeight> {
        match self {
            WeightFunctional::RotCurv1 | WeightFunctional::RotCurv2 => Err(Error::input(
                "rotational weights attach to a phase system, not a cone map; freeze the left block first",
            )),
            WeightFunctional::W1 => {
                let q = codim(cm.d, cm.n(), 1, "the first-order weight")?;
                cm.cutoff_prefix(q, "the first-order weight")?;
                Ok(PreparedWeight { cm: cm.clone(), node: PreparedNode::Leaf(self.clone()) })
            }
            WeightFunctional::W1Partial { directions } => {
                let q = codim(cm.d, cm.n(), directions.len(), "the partially degenerate weight")?;
                cm.cutoff_prefix(q, "the partially degenerate weight")?;
                Ok(PreparedWeight { cm: cm.clone(), node: PreparedNode::Leaf(self.clone()) })
            }
            WeightFunctional::W2 => {
                let q = codim(cm.d, cm.n(), 2, "the second-order weight")?;
                cm.cutoff_prefix(q, "the second-order weight")?;
                Ok(PreparedWeight { cm: cm.clone(), node: PreparedNode::Leaf(self.clone()) })
            }
            WeightFunctional::W2K { border } => {
                let q = codim(cm.d, cm.n() + 1, 2, "the bordered second-order weight")?;
                cm.cutoff_prefix(q, "the bordered second-order weight")?;
                if *border + 1 > cm.n() {
                    return Err(Error::input(format!(
                        "border rank {border} exceeds the limit {} for this target",
                        cm.n() - 1
                    )));
                }
                Ok(PreparedWeight { cm: cm.clone(), node: PreparedNode::Leaf(self.clone()) })
            }
            WeightFunctional::W2JK { directions, border } => {
                let q = codim(cm.d, cm.n(), directions.len() + 1, "the direction-degenerate weight")?;
                cm.cutoff_prefix(q, "the direction-degenerate weight")?;
                if border + directions.len() + 1 > cm.n() {
                    return Err(Error::input(
                        "border rank plus directions exceeds the target dimension",
                    ));
                }
                Ok(PreparedWeight { cm: cm.clone(), node: PreparedNode::Leaf(self.clone()) })
            }
            WeightFunctional::W3 { ell } => {
                if cm.n() <= 2 {
                    return Err(Error::input(
                        "the third-order weight needs a target of dimension at least 3",
                    ));
                }
                let q3 = codim(cm.d, cm.n(), 3, "the third-order weight")?;
                cm.cutoff_prefix(q3, "the third-order weight")?;
                if ell.len() != cm.n() {
                    return Err(Error::input("functional length must match the target dimension"));
                }
                Ok(PreparedWeight { cm: cm.clone(), node: PreparedNode::Leaf(self.clone()) })
            }
            WeightFunctional::Induced { base, alpha, beta, base_target } => {
                if beta.is_zero() {
                    return Err(Error::input("induced weight needs beta != 0"));
                }
                if (alpha + Rat::one()).is_zero() {
                    return Err(Error::input("induced weight needs alpha != -1"));
                }
                let n = *base_target;
                if n == 0 {
                    return Err(Error::input("induced weight needs base_target >= 1"));
                }
                if cm.n() != n + 1 {
                    return Err(Error::input(format!(
                        "induced weight over base target {n} needs a map into R^{}, got R^{}",
                        n + 1,
                        cm.n()
                    )));
                }
                // Point-independent lift: one extra leading variable scales
                // the reduced derivative of the map; the first component
                // moves into a reciprocal cutoff.
                let reduced = dop_symbolic(cm, DopMode::FirstSplit)?;
                let lead = MultiPoly::monomial(cm.d + 1, lead_exponent(cm.d + 1, n - 1), Rat::one());
                let lifted: Result<Vec<MultiPoly>> = reduced
                    .iter()
                    .map(|c| c.extend_front(1).mul_capped(&lead, INDUCTION_DEGREE_CAP))
                    .collect();
                let first = cm.components[0].clone();
                let recip_cut = &MultiPoly::var(cm.d + 1, 0)
                    .mul_capped(&first.extend_front(1), INDUCTION_DEGREE_CAP)?
                    - &MultiPoly::one(cm.d + 1);
                let mut tilde_cutoffs = vec![recip_cut];
                tilde_cutoffs.extend(cm.cutoffs.iter().map(|f| f.extend_front(1)));
                let tilde = ConeMap::new(cm.d + 1, lifted?, tilde_cutoffs)?;
                let base_prep = base.prepare(&tilde)?;
                // Net exponent on |Φ₁| after the outer power is applied.
                let nn = Rat::from_integer(BigInt::from((n * n) as i64 - 1));
                let nr = Rat::from_integer(BigInt::from(n as i64));
                let ap1 = alpha + Rat::one();
                let exponent = (nn * alpha / (&nr * &ap1) - Rat::one()) * ap1 / beta;
                Ok(PreparedWeight {
                    cm: cm.clone(),
                    node: PreparedNode::Induced {
                        base: Box::new(base_prep),
                        first,
                        exponent,
                    },
                })
            }
        }
    }
}

fn lead_exponent(nvars: usize, power: usize) -> Vec<u32> {
    let mut e = vec![0u32; nvars];
    e[0] = power as u32;
    e
}

/// A weight functional bound to its system, with the point-independent parts
/// of the inductive construction precomputed.
#[derive(Clone, Debug)]
pub struct PreparedWeight {
    cm: ConeMap,
    node: PreparedNode,
}

#[derive(Clone, Debug)]
enum PreparedNode {
    Leaf(WeightFunctional),
    Induced {
        base: Box<PreparedWeight>,
        first: MultiPoly,
        exponent: Rat,
    },
}

impl PreparedWeight {
    /// The system this weight evaluates on.
    pub fn system(&self) -> &ConeMap {
        &self.cm
    }

    /// Exact evaluation at a rational point.  Induced weights require the
    /// net exponent to be an integer (true along the inductive chain of
    /// interest); otherwise the float path must be used.
    pub fn eval_exact(&self, y: &[Rat]) -> Result<Rat> {
        self.cm.check_point(y.len())?;
        match &self.node {
            PreparedNode::Leaf(kind) => leaf_exact(kind, &self.cm, y),
            PreparedNode::Induced { base, first, exponent } => {
                let f = first.eval_rat(y);
                if f.is_zero() {
                    return Ok(Rat::zero());
                }
                if !exponent.is_integer() {
                    return Err(Error::input(format!(
                        "induced weight has non-integer net exponent {exponent}; use the float path"
                    )));
                }
                let e = exponent.to_integer().to_i64().ok_or_else(|| {
                    Error::input("induced weight exponent does not fit in an i64")
                })?;
                let mut point = Vec::with_capacity(y.len() + 1);
                point.push(f.recip());
                point.extend_from_slice(y);
                let b = base.eval_exact(&point)?;
                Ok(rat_pow(&f.abs(), e) * b.abs())
            }
        }
    }

    /// Float evaluation; rational exponents are allowed here.
    pub fn eval_f64(&self, y: &[f64]) -> Result<f64> {
        self.cm.check_point(y.len())?;
        match &self.node {
            PreparedNode::Leaf(kind) => leaf_f64(kind, &self.cm, y),
            PreparedNode::Induced { base, first, exponent } => {
                let f = first.eval_f64(y);
                if f == 0.0 {
                    return Ok(0.0);
                }
                let mut point = Vec::with_capacity(y.len() + 1);
                point.push(1.0 / f);
                point.extend_from_slice(y);
                let b = base.eval_f64(&point)?;
                Ok(f.abs().powf(rat_to_f64(exponent)) * b.abs())
            }
        }
    }
}

fn leaf_exact(kind: &WeightFunctional, cm: &ConeMap, y: &[Rat]) -> Result<Rat> {
    match kind {
        WeightFunctional::W1 => w1_exact(cm, y),
        WeightFunctional::W1Partial { directions } => w1_partial_exact(cm, directions, y),
        WeightFunctional::W2 => w2_exact(cm, y),
        WeightFunctional::W2K { border } => w2_k_exact(cm, *border, y),
        WeightFunctional::W2JK { directions, border } => {
            w2_jk_exact(cm, directions, *border, y)
        }
        WeightFunctional::W3 { ell } => w3_exact(cm, ell, y),
        _ => Err(Error::input("weight kind is not evaluable on a cone map")),
    }
}

fn leaf_f64(kind: &WeightFunctional, cm: &ConeMap, y: &[f64]) -> Result<f64> {
    match kind {
        WeightFunctional::W1 => w1_f64(cm, y),
        WeightFunctional::W1Partial { directions } => w1_partial_f64(cm, directions, y),
        WeightFunctional::W2 => w2_f64(cm, y),
        WeightFunctional::W2K { border } => w2_k_f64(cm, *border, y),
        WeightFunctional::W2JK { directions, border } => w2_jk_f64(cm, directions, *border, y),
        WeightFunctional::W3 { ell } => w3_f64(cm, ell, y),
        _ => Err(Error::input("weight kind is not evaluable on a cone map")),
    }
}

/// Integer power of a rational, supporting negative exponents for nonzero
/// bases.
pub fn rat_pow(base: &Rat, e: i64) -> Rat {
    let mag = e.unsigned_abs() as u32;
    let p = Rat::new(base.numer().pow(mag), base.denom().pow(mag));
    if e < 0 {
        p.recip()
    } else {
        p
    }
}
