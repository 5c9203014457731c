//! Exact multivariate polynomial arithmetic over the rationals.
//!
//! Polynomials are stored sparsely as a map from exponent vectors to nonzero
//! rational coefficients. All arithmetic is exact; floating point enters only
//! through the dedicated `eval_f64` evaluators. Symbolic determinants use
//! cofactor expansion below dimension 4 and fraction-free (Bareiss)
//! elimination with exact polynomial division from dimension 4 upward.
//!
//! The text format is a sparse term list: terms joined by ` + `, each term a
//! rational coefficient optionally followed by ` * ` and space-separated
//! variable powers `x3^2`. Variables are 1-indexed in text (`x1`, `x2`, ...)
//! and 0-indexed in the API. Emission is canonical: terms sorted by graded
//! lexicographic order (descending), every exponent written explicitly, so
//! equal polynomials always print identically.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result, DEFAULT_DEGREE_CAP};

/// Exact rational scalar used throughout the crate.
pub type Rat = BigRational;

/// Convenience constructor for a rational from an integer pair.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Convenience constructor for an integer rational.
pub fn rat_int(num: i64) -> Rat {
    Rat::from(BigInt::from(num))
}

/// Parse a rational in `num` or `num/den` form.
pub fn parse_rat(text: &str) -> Result<Rat> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| Error::input(format!("invalid rational numerator `{num}`")))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| Error::input(format!("invalid rational denominator `{den}`")))?;
    if den.is_zero() {
        return Err(Error::input(format!("zero denominator in rational `{text}`")));
    }
    Ok(Rat::new(num, den))
}

/// Format a rational as `num` or `num/den` (canonical, reduced form).
pub fn format_rat(value: &Rat) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Nearest float to a rational (NaN if either side overflows a float, which
/// no quantity in this crate approaches).
pub fn rat_to_f64(value: &Rat) -> f64 {
    value.numer().to_f64().unwrap_or(f64::NAN) / value.denom().to_f64().unwrap_or(f64::NAN)
}

/// Graded lexicographic comparison of exponent vectors (degree first, then
/// lexicographic on the exponents).
fn grlex_cmp(a: &[u32], b: &[u32]) -> Ordering {
    let da: u64 = a.iter().map(|&e| e as u64).sum();
    let db: u64 = b.iter().map(|&e| e as u64).sum();
    da.cmp(&db).then_with(|| a.cmp(b))
}

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Immutable after construction: all operations return new values. The
/// number of variables is fixed per polynomial and operations panic on a
/// variable-count mismatch (that is a programming error, not a data error).
#[derive(Clone, PartialEq, Eq)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Rat>,
}

impl MultiPoly {
    /// The zero polynomial in `nvars` variables.
    pub fn zero(nvars: usize) -> Self {
        MultiPoly { nvars, terms: BTreeMap::new() }
    }

    /// A constant polynomial.
    pub fn constant(nvars: usize, value: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !value.is_zero() {
            terms.insert(vec![0; nvars], value);
        }
        MultiPoly { nvars, terms }
    }

    /// The constant `1`.
    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rat::one())
    }

    /// The monomial `x_var` (0-indexed).
    pub fn var(nvars: usize, var: usize) -> Self {
        assert!(var < nvars, "variable index {var} out of range for {nvars} variables");
        let mut exps = vec![0; nvars];
        exps[var] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(exps, Rat::one());
        MultiPoly { nvars, terms }
    }

    /// A single monomial `coeff * x^exps`.
    pub fn monomial(nvars: usize, exps: Vec<u32>, coeff: Rat) -> Self {
        assert_eq!(exps.len(), nvars, "exponent vector length mismatch");
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(exps, coeff);
        }
        MultiPoly { nvars, terms }
    }

    /// Build from a list of `(exponents, coefficient)` terms, merging duplicates.
    pub fn from_terms(nvars: usize, list: impl IntoIterator<Item = (Vec<u32>, Rat)>) -> Self {
        let mut out = MultiPoly::zero(nvars);
        for (exps, coeff) in list {
            assert_eq!(exps.len(), nvars, "exponent vector length mismatch");
            out.add_term(exps, coeff);
        }
        out
    }

    fn add_term(&mut self, exps: Vec<u32>, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(slot) => {
                slot.insert(coeff);
            }
            Entry::Occupied(mut slot) => {
                let sum = slot.get() + &coeff;
                if sum.is_zero() {
                    slot.remove();
                } else {
                    *slot.get_mut() = sum;
                }
            }
        }
    }

    /// Number of variables.
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of stored (nonzero) terms.
    pub fn nterms(&self) -> usize {
        self.terms.len()
    }

    /// True for the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; zero polynomial reports 0.
    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Iterate over `(exponents, coefficient)` terms in map order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Rat)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    /// Coefficient of the given exponent vector (zero if absent).
    pub fn coeff(&self, exps: &[u32]) -> Rat {
        self.terms.get(exps).cloned().unwrap_or_else(Rat::zero)
    }

    /// Constant term.
    pub fn constant_term(&self) -> Rat {
        self.coeff(&vec![0; self.nvars])
    }

    fn assert_same_vars(&self, other: &Self) {
        assert_eq!(
            self.nvars, other.nvars,
            "variable count mismatch: {} vs {}",
            self.nvars, other.nvars
        );
    }

    /// Scale by a rational constant.
    pub fn scale(&self, factor: &Rat) -> Self {
        if factor.is_zero() {
            return MultiPoly::zero(self.nvars);
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), c * factor))
            .collect();
        MultiPoly { nvars: self.nvars, terms }
    }

    /// Exact product with a total-degree cap; exceeding the cap is an error.
    pub fn mul_capped(&self, other: &Self, cap: u32) -> Result<Self> {
        self.assert_same_vars(other);
        let degree = self.total_degree().saturating_add(other.total_degree());
        if !self.is_zero() && !other.is_zero() && degree > cap {
            return Err(Error::DegreeCap { degree, cap });
        }
        let mut out = MultiPoly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exps, ca * cb);
            }
        }
        Ok(out)
    }

    /// Integer power with a degree cap.
    pub fn pow_capped(&self, exp: u32, cap: u32) -> Result<Self> {
        let mut acc = MultiPoly::one(self.nvars);
        for _ in 0..exp {
            acc = acc.mul_capped(self, cap)?;
        }
        Ok(acc)
    }

    /// Partial derivative with respect to variable `var` (0-indexed).
    pub fn partial(&self, var: usize) -> Self {
        assert!(var < self.nvars, "variable index {var} out of range");
        let mut out = MultiPoly::zero(self.nvars);
        for (exps, coeff) in &self.terms {
            let e = exps[var];
            if e == 0 {
                continue;
            }
            let mut new_exps = exps.clone();
            new_exps[var] = e - 1;
            out.add_term(new_exps, coeff * Rat::from(BigInt::from(e)));
        }
        out
    }

    /// Exact evaluation at a rational point.
    pub fn eval_rat(&self, point: &[Rat]) -> Rat {
        assert_eq!(point.len(), self.nvars, "evaluation point dimension mismatch");
        let powers = power_table_rat(point, &self.max_exponents());
        let mut acc = Rat::zero();
        for (exps, coeff) in &self.terms {
            let mut term = coeff.clone();
            for (v, &e) in exps.iter().enumerate() {
                if e > 0 {
                    term *= &powers[v][e as usize];
                }
            }
            acc += term;
        }
        acc
    }

    /// Floating-point evaluation.
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.nvars, "evaluation point dimension mismatch");
        let maxes = self.max_exponents();
        let mut powers: Vec<Vec<f64>> = Vec::with_capacity(self.nvars);
        for (v, &m) in maxes.iter().enumerate() {
            let mut row = Vec::with_capacity(m as usize + 1);
            row.push(1.0);
            for e in 1..=m as usize {
                row.push(row[e - 1] * point[v]);
            }
            powers.push(row);
        }
        let mut acc = 0.0;
        for (exps, coeff) in &self.terms {
            let mut term = coeff.to_f64().unwrap_or(f64::NAN);
            for (v, &e) in exps.iter().enumerate() {
                if e > 0 {
                    term *= powers[v][e as usize];
                }
            }
            acc += term;
        }
        acc
    }

    fn max_exponents(&self) -> Vec<u32> {
        let mut maxes = vec![0u32; self.nvars];
        for exps in self.terms.keys() {
            for (m, &e) in maxes.iter_mut().zip(exps) {
                *m = (*m).max(e);
            }
        }
        maxes
    }

    /// Substitute `x_i := sum_j a[i][j] x_j + b[i]` for a square rational
    /// affine map on the full variable set.
    pub fn compose_affine(&self, a: &[Vec<Rat>], b: &[Rat]) -> Result<Self> {
        let k = self.nvars;
        if a.len() != k || b.len() != k || a.iter().any(|row| row.len() != k) {
            return Err(Error::input(format!(
                "affine map must be {k}x{k} with offset of length {k}"
            )));
        }
        // Affine image of each variable as a degree-<=1 polynomial.
        let images: Vec<MultiPoly> = (0..k)
            .map(|i| {
                let mut p = MultiPoly::constant(k, b[i].clone());
                for (j, coeff) in a[i].iter().enumerate() {
                    p = &p + &MultiPoly::var(k, j).scale(coeff);
                }
                p
            })
            .collect();
        // Composition preserves total degree for affine arguments, so the
        // default cap is adequate whenever the input respects it; still use
        // a cap derived from the input degree to be safe for high degrees.
        let cap = DEFAULT_DEGREE_CAP.max(self.total_degree());
        let maxes = self.max_exponents();
        let mut image_powers: Vec<Vec<MultiPoly>> = Vec::with_capacity(k);
        for (v, &m) in maxes.iter().enumerate() {
            let mut row = Vec::with_capacity(m as usize + 1);
            row.push(MultiPoly::one(k));
            for e in 1..=m as usize {
                let next = row[e - 1].mul_capped(&images[v], cap)?;
                row.push(next);
            }
            image_powers.push(row);
        }
        let mut acc = MultiPoly::zero(k);
        for (exps, coeff) in &self.terms {
            let mut term = MultiPoly::constant(k, coeff.clone());
            for (v, &e) in exps.iter().enumerate() {
                if e > 0 {
                    term = term.mul_capped(&image_powers[v][e as usize], cap)?;
                }
            }
            acc = &acc + &term;
        }
        Ok(acc)
    }

    /// Substitute rational constants for the first `values.len()` variables
    /// and return a polynomial in the remaining variables (indices shift
    /// down accordingly).
    pub fn freeze_prefix(&self, values: &[Rat]) -> Self {
        let k = values.len();
        assert!(k <= self.nvars, "cannot freeze more variables than exist");
        let rest = self.nvars - k;
        let maxes = self.max_exponents();
        let powers = power_table_rat(values, &maxes[..k]);
        let mut out = MultiPoly::zero(rest);
        for (exps, coeff) in &self.terms {
            let mut c = coeff.clone();
            for v in 0..k {
                let e = exps[v] as usize;
                if e > 0 {
                    c *= &powers[v][e];
                }
            }
            out.add_term(exps[k..].to_vec(), c);
        }
        out
    }

    /// View this polynomial in `extra + nvars` variables, with `extra` new
    /// variables prepended (existing variable indices shift up by `extra`).
    pub fn extend_front(&self, extra: usize) -> Self {
        let nvars = self.nvars + extra;
        let terms = self
            .terms
            .iter()
            .map(|(exps, coeff)| {
                let mut e = vec![0u32; nvars];
                e[extra..].copy_from_slice(exps);
                (e, coeff.clone())
            })
            .collect();
        MultiPoly { nvars, terms }
    }

    /// View this polynomial in `nvars + extra` variables, with `extra` new
    /// variables appended (existing variable indices are unchanged).
    pub fn extend_back(&self, extra: usize) -> Self {
        let nvars = self.nvars + extra;
        let terms = self
            .terms
            .iter()
            .map(|(exps, coeff)| {
                let mut e = vec![0u32; nvars];
                e[..self.nvars].copy_from_slice(exps);
                (e, coeff.clone())
            })
            .collect();
        MultiPoly { nvars, terms }
    }

    /// Divide exactly by `divisor`, erroring if the division leaves a
    /// remainder. Used by fraction-free elimination, where divisibility is
    /// guaranteed.
    pub fn div_exact(&self, divisor: &Self) -> Result<Self> {
        self.assert_same_vars(divisor);
        if divisor.is_zero() {
            return Err(Error::input("exact polynomial division by zero"));
        }
        let lead = divisor
            .terms
            .iter()
            .max_by(|(ea, _), (eb, _)| grlex_cmp(ea, eb))
            .map(|(e, c)| (e.clone(), c.clone()))
            .expect("nonzero divisor has a leading term");
        let mut rem = self.clone();
        let mut quot = MultiPoly::zero(self.nvars);
        while !rem.is_zero() {
            let (exps, coeff) = rem
                .terms
                .iter()
                .max_by(|(ea, _), (eb, _)| grlex_cmp(ea, eb))
                .map(|(e, c)| (e.clone(), c.clone()))
                .expect("nonzero remainder has a leading term");
            if exps.iter().zip(&lead.0).any(|(a, b)| a < b) {
                return Err(Error::input(
                    "polynomial division is not exact (leading term not divisible)",
                ));
            }
            let qexps: Vec<u32> = exps.iter().zip(&lead.0).map(|(a, b)| a - b).collect();
            let qcoeff = &coeff / &lead.1;
            let qterm = MultiPoly::monomial(self.nvars, qexps, qcoeff);
            // rem -= qterm * divisor; caps are irrelevant here because the
            // product degree never exceeds the dividend degree.
            let prod = qterm
                .mul_capped(divisor, u32::MAX)
                .expect("uncapped product cannot fail");
            rem = &rem - &prod;
            quot = &quot + &qterm;
        }
        Ok(quot)
    }

    /// Canonical text form (see module docs).
    pub fn to_text(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut entries: Vec<(&Vec<u32>, &Rat)> = self.terms.iter().collect();
        entries.sort_by(|(ea, _), (eb, _)| grlex_cmp(eb, ea));
        let rendered: Vec<String> = entries
            .into_iter()
            .map(|(exps, coeff)| {
                let vars: Vec<String> = exps
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(v, &e)| format!("x{}^{}", v + 1, e))
                    .collect();
                if vars.is_empty() {
                    format_rat(coeff)
                } else {
                    format!("{} * {}", format_rat(coeff), vars.join(" "))
                }
            })
            .collect();
        rendered.join(" + ")
    }

    /// Parse the text form. `nvars` fixes the ambient variable count; the
    /// text may reference any subset of `x1..x{nvars}`.
    pub fn parse(text: &str, nvars: usize) -> Result<Self> {
        let mut out = MultiPoly::zero(nvars);
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(Error::input("empty polynomial text"));
        }
        for raw_term in trimmed.split('+') {
            let term = raw_term.trim();
            if term.is_empty() {
                return Err(Error::input(format!("empty term in polynomial `{text}`")));
            }
            let mut pieces = term.split('*').map(str::trim);
            let coeff_text = pieces
                .next()
                .ok_or_else(|| Error::input(format!("malformed term `{term}`")))?;
            let (coeff, var_pieces): (Rat, Vec<&str>) = if coeff_text.starts_with('x') {
                // Term with implicit unit coefficient, e.g. `x1^2 x2^1`.
                (Rat::one(), std::iter::once(coeff_text).chain(pieces).collect())
            } else {
                (parse_rat(coeff_text)?, pieces.collect())
            };
            let mut exps = vec![0u32; nvars];
            for piece in var_pieces {
                for factor in piece.split_whitespace() {
                    let (var_part, exp_part) = match factor.split_once('^') {
                        Some((v, e)) => (v, e),
                        None => (factor, "1"),
                    };
                    let var_idx: usize = var_part
                        .strip_prefix('x')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| {
                            Error::input(format!("invalid variable `{var_part}` in `{term}`"))
                        })?;
                    if var_idx == 0 || var_idx > nvars {
                        return Err(Error::input(format!(
                            "variable x{var_idx} out of range 1..={nvars}"
                        )));
                    }
                    let exp: u32 = exp_part.parse().map_err(|_| {
                        Error::input(format!("invalid exponent `{exp_part}` in `{term}`"))
                    })?;
                    exps[var_idx - 1] += exp;
                }
            }
            out.add_term(exps, coeff);
        }
        Ok(out)
    }
}

fn power_table_rat(point: &[Rat], maxes: &[u32]) -> Vec<Vec<Rat>> {
    point
        .iter()
        .zip(maxes)
        .map(|(x, &m)| {
            let mut row = Vec::with_capacity(m as usize + 1);
            row.push(Rat::one());
            for e in 1..=m as usize {
                let next = &row[e - 1] * x;
                row.push(next);
            }
            row
        })
        .collect()
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly({})", self.to_text())
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        self.assert_same_vars(rhs);
        let mut out = self.clone();
        for (exps, coeff) in &rhs.terms {
            out.add_term(exps.clone(), coeff.clone());
        }
        out
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        self.assert_same_vars(rhs);
        let mut out = self.clone();
        for (exps, coeff) in &rhs.terms {
            out.add_term(exps.clone(), -coeff.clone());
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), -c.clone()))
            .collect();
        MultiPoly { nvars: self.nvars, terms }
    }
}

/// Product under the default degree cap. Panics if the cap is exceeded;
/// symbolic paths that may legitimately grow use [`MultiPoly::mul_capped`]
/// with an explicit cap instead.
impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        self.mul_capped(rhs, DEFAULT_DEGREE_CAP)
            .expect("degree cap exceeded in operator product; use mul_capped")
    }
}

/// Dense matrix with polynomial entries (row-major).
#[derive(Clone, Debug)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    entries: Vec<MultiPoly>,
}

impl PolyMatrix {
    /// Zero matrix.
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            nvars,
            entries: vec![MultiPoly::zero(nvars); rows * cols],
        }
    }

    /// Build from a closure producing each entry.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        nvars: usize,
        mut f: impl FnMut(usize, usize) -> MultiPoly,
    ) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let p = f(i, j);
                assert_eq!(p.nvars(), nvars, "entry variable count mismatch");
                entries.push(p);
            }
        }
        PolyMatrix { rows, cols, nvars, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn get(&self, i: usize, j: usize) -> &MultiPoly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: MultiPoly) {
        assert_eq!(value.nvars(), self.nvars, "entry variable count mismatch");
        self.entries[i * self.cols + j] = value;
    }

    /// Evaluate every entry at a rational point.
    pub fn eval_rat(&self, point: &[Rat]) -> Vec<Vec<Rat>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).eval_rat(point)).collect())
            .collect()
    }

    /// Evaluate every entry in floating point.
    pub fn eval_f64(&self, point: &[f64]) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).eval_f64(point)).collect())
            .collect()
    }
}

/// Symbolic determinant under the default degree cap.
pub fn polydet(m: &PolyMatrix) -> Result<MultiPoly> {
    polydet_capped(m, DEFAULT_DEGREE_CAP)
}

/// Symbolic determinant with an explicit degree cap. Cofactor expansion is
/// used below dimension 4; fraction-free elimination (with exact polynomial
/// division) from dimension 4 upward to control intermediate growth.
pub fn polydet_capped(m: &PolyMatrix, cap: u32) -> Result<MultiPoly> {
    if m.rows != m.cols {
        return Err(Error::input(format!(
            "determinant of non-square {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    if n == 0 {
        return Ok(MultiPoly::one(m.nvars));
    }
    if n < 4 {
        let grid: Vec<Vec<MultiPoly>> = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
            .collect();
        return cofactor_det(&grid, cap);
    }
    bareiss_det(m, cap)
}

fn cofactor_det(rows: &[Vec<MultiPoly>], cap: u32) -> Result<MultiPoly> {
    let n = rows.len();
    let nvars = rows[0][0].nvars();
    if n == 1 {
        return Ok(rows[0][0].clone());
    }
    let mut acc = MultiPoly::zero(nvars);
    for (i, row) in rows.iter().enumerate() {
        let pivot = &row[0];
        if pivot.is_zero() {
            continue;
        }
        let minor: Vec<Vec<MultiPoly>> = rows
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != i)
            .map(|(_, r)| r[1..].to_vec())
            .collect();
        let sub = cofactor_det(&minor, cap)?;
        let signed = if i % 2 == 0 { pivot.clone() } else { -pivot };
        acc = &acc + &signed.mul_capped(&sub, cap)?;
    }
    Ok(acc)
}

fn bareiss_det(m: &PolyMatrix, cap: u32) -> Result<MultiPoly> {
    let n = m.rows;
    let nvars = m.nvars;
    let mut a: Vec<Vec<MultiPoly>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
        .collect();
    let mut sign_flip = false;
    let mut prev_pivot = MultiPoly::one(nvars);
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign_flip = !sign_flip;
                }
                None => return Ok(MultiPoly::zero(nvars)),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let prod1 = a[k][k].mul_capped(&a[i][j], cap)?;
                let prod2 = a[i][k].mul_capped(&a[k][j], cap)?;
                let num = &prod1 - &prod2;
                a[i][j] = if prev_pivot.nterms() == 1
                    && prev_pivot.total_degree() == 0
                    && prev_pivot.constant_term().is_one()
                {
                    num
                } else {
                    num.div_exact(&prev_pivot)?
                };
            }
            a[i][k] = MultiPoly::zero(nvars);
        }
        prev_pivot = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    Ok(if sign_flip { -&det } else { det })
}

// ---------------------------------------------------------------------------
// Exact rational dense linear algebra (scalar matrices).
// ---------------------------------------------------------------------------

/// Exact determinant of a square rational matrix by Gaussian elimination.
pub fn det_rat(matrix: &[Vec<Rat>]) -> Result<Rat> {
    let n = matrix.len();
    if matrix.iter().any(|row| row.len() != n) {
        return Err(Error::input("determinant of non-square rational matrix"));
    }
    if n == 0 {
        return Ok(Rat::one());
    }
    let mut a: Vec<Vec<Rat>> = matrix.to_vec();
    let mut det = Rat::one();
    for k in 0..n {
        let pivot_row = match (k..n).find(|&r| !a[r][k].is_zero()) {
            Some(r) => r,
            None => return Ok(Rat::zero()),
        };
        if pivot_row != k {
            a.swap(k, pivot_row);
            det = -det;
        }
        let pivot = a[k][k].clone();
        det *= &pivot;
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let factor = &a[i][k] / &pivot;
            for j in k..n {
                let delta = &factor * &a[k][j];
                a[i][j] = &a[i][j] - &delta;
            }
        }
    }
    Ok(det)
}

/// Exact solve `A x = b` for square invertible rational `A`.
pub fn solve_rat(matrix: &[Vec<Rat>], rhs: &[Rat]) -> Result<Vec<Rat>> {
    let n = matrix.len();
    if matrix.iter().any(|row| row.len() != n) || rhs.len() != n {
        return Err(Error::input("solve requires a square system"));
    }
    let mut a = matrix.to_vec();
    let mut b = rhs.to_vec();
    for k in 0..n {
        let pivot_row = (k..n)
            .find(|&r| !a[r][k].is_zero())
            .ok_or_else(|| Error::input("singular rational system"))?;
        a.swap(k, pivot_row);
        b.swap(k, pivot_row);
        let pivot = a[k][k].clone();
        for i in 0..n {
            if i == k || a[i][k].is_zero() {
                continue;
            }
            let factor = &a[i][k] / &pivot;
            for j in k..n {
                let delta = &factor * &a[k][j];
                a[i][j] = &a[i][j] - &delta;
            }
            let delta = &factor * &b[k];
            b[i] = &b[i] - &delta;
        }
    }
    for k in 0..n {
        b[k] = &b[k] / &a[k][k];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, nvars: usize) -> MultiPoly {
        MultiPoly::parse(text, nvars).expect("parse test polynomial")
    }

    /// Independent power-rule oracle: differentiate term-by-term from the raw
    /// term list, without going through `partial`.
    fn derivative_oracle(poly: &MultiPoly, var: usize) -> Vec<(Vec<u32>, Rat)> {
        let mut out = Vec::new();
        for (exps, coeff) in poly.terms() {
            if exps[var] == 0 {
                continue;
            }
            let mut e = exps.to_vec();
            e[var] -= 1;
            out.push((e, coeff * Rat::from(BigInt::from(exps[var]))));
        }
        out.sort_by(|(a, _), (b, _)| a.cmp(b));
        out
    }

    #[test]
    fn partial_matches_power_rule_oracle() {
        // x1^3 - 3 x1 x2^2, derivative in x2 -> -6 x1 x2.
        let poly = p("1 * x1^3 + -3 * x1^1 x2^2", 2);
        let got = poly.partial(1);
        let expected = MultiPoly::from_terms(2, derivative_oracle(&poly, 1));
        assert_eq!(got, expected);
        assert_eq!(got.to_text(), "-6 * x1^1 x2^1");
    }

    #[test]
    fn partial_of_constant_is_zero() {
        let poly = p("5/3", 3);
        assert!(poly.partial(2).is_zero());
    }

    #[test]
    fn compose_affine_shear() {
        // p = x1^2 under x1 -> x1 + x2, x2 -> x2 + 1.
        let poly = p("1 * x1^2", 2);
        let a = vec![vec![rat_int(1), rat_int(1)], vec![rat_int(0), rat_int(1)]];
        let b = vec![rat_int(0), rat_int(1)];
        let got = poly.compose_affine(&a, &b).unwrap();
        assert_eq!(got, p("1 * x1^2 + 2 * x1^1 x2^1 + 1 * x2^2", 2));
    }

    #[test]
    fn compose_affine_rejects_bad_shapes() {
        let poly = p("1 * x1^1", 2);
        let a = vec![vec![rat_int(1)]];
        let b = vec![rat_int(0)];
        assert!(matches!(poly.compose_affine(&a, &b), Err(Error::Input(_))));
    }

    #[test]
    fn polydet_two_by_two_matches_cofactor_oracle() {
        // [[0, y], [x, 1]] with x = x1, y = x2; ad - bc computed by hand.
        let m = PolyMatrix::from_fn(2, 2, 2, |i, j| match (i, j) {
            (0, 0) => MultiPoly::zero(2),
            (0, 1) => MultiPoly::var(2, 1),
            (1, 0) => MultiPoly::var(2, 0),
            (1, 1) => MultiPoly::one(2),
        _ => unreachable!(),
        });
        let det = polydet(&m).unwrap();
        let oracle = &(&(m.get(0, 0) * m.get(1, 1)) - &(m.get(0, 1) * m.get(1, 0)));
        assert_eq!(&det, oracle);
        assert_eq!(det.to_text(), "-1 * x1^1 x2^1");
    }

    #[test]
    fn polydet_identity_with_zero_row_is_zero() {
        let mut m = PolyMatrix::zeros(3, 3, 1);
        m.set(0, 0, MultiPoly::one(1));
        m.set(2, 2, MultiPoly::one(1));
        // Row 1 all zero.
        assert!(polydet(&m).unwrap().is_zero());
    }

    #[test]
    fn bareiss_matches_cofactor_on_random_integer_matrices() {
        // Deterministic small pseudo-random integer entries; compare the
        // fraction-free path (n >= 4) against plain cofactor expansion.
        let mut state = 0x9e3779b9u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % 11) as i64 - 5
        };
        for _ in 0..25 {
            let n = 4 + (next().unsigned_abs() as usize % 2); // 4 or 5
            let m = PolyMatrix::from_fn(n, n, 1, |_, _| {
                MultiPoly::constant(1, rat_int(next()))
            });
            let grid: Vec<Vec<MultiPoly>> = (0..n)
                .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
                .collect();
            let via_bareiss = polydet(&m).unwrap();
            let via_cofactor = cofactor_det(&grid, DEFAULT_DEGREE_CAP).unwrap();
            assert_eq!(via_bareiss, via_cofactor);
        }
    }

    #[test]
    fn polydet_symbolic_four_by_four() {
        // Block diagonal [[x1, 1, 0, 0], [1, x1, 0, 0], [0, 0, x2, 0], [0, 0, 0, x2]]:
        // determinant (x1^2 - 1) x2^2 exercises exact division in Bareiss.
        let x = MultiPoly::var(2, 0);
        let y = MultiPoly::var(2, 1);
        let mut m = PolyMatrix::zeros(4, 4, 2);
        m.set(0, 0, x.clone());
        m.set(0, 1, MultiPoly::one(2));
        m.set(1, 0, MultiPoly::one(2));
        m.set(1, 1, x.clone());
        m.set(2, 2, y.clone());
        m.set(3, 3, y.clone());
        let det = polydet(&m).unwrap();
        let expected = &(&(&x * &x) - &MultiPoly::one(2)) * &(&y * &y);
        assert_eq!(det, expected);
    }

    #[test]
    fn degree_cap_is_a_hard_error() {
        let big = MultiPoly::monomial(1, vec![30], Rat::one());
        let err = big.mul_capped(&big, 40).unwrap_err();
        assert!(matches!(err, Error::DegreeCap { degree: 60, cap: 40 }));
    }

    #[test]
    fn parse_rejects_out_of_range_variable() {
        assert!(MultiPoly::parse("1 * x3^1", 2).is_err());
        assert!(MultiPoly::parse("1 * x0^1", 2).is_err());
    }

    #[test]
    fn parse_emit_round_trip_is_canonical() {
        let poly = p("-1/2 * x2^1 + 1 * x1^2 + 3", 2);
        let text = poly.to_text();
        assert_eq!(text, "1 * x1^2 + -1/2 * x2^1 + 3");
        assert_eq!(MultiPoly::parse(&text, 2).unwrap(), poly);
    }

    #[test]
    fn zero_polynomial_round_trips() {
        let zero = MultiPoly::zero(3);
        assert_eq!(zero.to_text(), "0");
        assert_eq!(MultiPoly::parse("0", 3).unwrap(), zero);
    }

    #[test]
    fn freeze_prefix_substitutes_and_renumbers() {
        // x1 * x2 + x3^2 frozen at x1 = 2 -> 2 x1 + x2^2 in two variables.
        let poly = p("1 * x1^1 x2^1 + 1 * x3^2", 3);
        let frozen = poly.freeze_prefix(&[rat_int(2)]);
        assert_eq!(frozen, p("2 * x1^1 + 1 * x2^2", 2));
    }

    #[test]
    fn extend_front_shifts_variables() {
        let poly = p("1 * x1^1 x2^2", 2);
        let lifted = poly.extend_front(1);
        assert_eq!(lifted, p("1 * x2^1 x3^2", 3));
    }

    #[test]
    fn div_exact_detects_non_divisibility() {
        let a = p("1 * x1^2 + 1", 1);
        let b = p("1 * x1^1", 1);
        assert!(a.div_exact(&b).is_err());
        let exact = p("1 * x1^2 + 2 * x1^1 x2^1 + 1 * x2^2", 2);
        let root = p("1 * x1^1 + 1 * x2^1", 2);
        assert_eq!(exact.div_exact(&root).unwrap(), root);
    }

    #[test]
    fn det_rat_and_solve_rat_are_exact() {
        let m = vec![
            vec![rat_int(2), rat_int(1)],
            vec![rat_int(7), rat_int(4)],
        ];
        assert_eq!(det_rat(&m).unwrap(), rat_int(1));
        let x = solve_rat(&m, &[rat_int(1), rat_int(3)]).unwrap();
        assert_eq!(x, vec![rat_int(1), rat_int(-1)]);
        let singular = vec![
            vec![rat_int(1), rat_int(2)],
            vec![rat_int(2), rat_int(4)],
        ];
        assert_eq!(det_rat(&singular).unwrap(), rat_int(0));
        assert!(solve_rat(&singular, &[rat_int(1), rat_int(1)]).is_err());
    }

    #[test]
    fn eval_rat_and_f64_agree() {
        let poly = p("1/4 * x1^3 x2^1 + -2 * x2^2 + 7", 2);
        let pt_rat = [rat(3, 2), rat(-1, 4)];
        let pt_f64 = [1.5, -0.25];
        let exact = poly.eval_rat(&pt_rat).to_f64().unwrap();
        let float = poly.eval_f64(&pt_f64);
        assert!((exact - float).abs() < 1e-12);
    }
}
