//! Numerical evaluation of the integral objects the weights feed into:
//! sublevel-set functionals, geometric integrals with a `|QΦ|^{-s}` kernel
//! and their supremum scans, ε-shell averaging operators, and image measures
//! with their slice widths.
//!
//! Two quadrature backends sit behind one front door: tensor Gauss–Legendre
//! for domains below three dimensions, seeded Monte Carlo above.  Monte Carlo
//! runs are split into fixed-size batches, each with its own derived RNG
//! stream, evaluated in parallel and combined by pairwise summation in batch
//! order — so results are bit-identical for a fixed seed regardless of the
//! thread count.
//!
//! Integrands with a genuine singularity (the geometric kernels) are clipped
//! at a configurable ceiling and the clipped mass is reported; callers treat
//! a run as valid only when that mass is negligible, which turns divergence
//! into an observable instead of an exception.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::{GLn, ProjectionTV};
use crate::poly::MultiPoly;
use crate::weights::{PhaseSystem, PreparedWeight};

/// Samples per Monte Carlo batch.  Batching is independent of the thread
/// count so that parallel runs stay bit-reproducible.
const MC_BATCH: u64 = 4096;

/// A run is valid when the clipped mass stays below this fraction of the
/// estimate.
pub const CLIP_VALID_LIMIT: f64 = 1e-3;

/// Dimension at and above which Monte Carlo becomes the default method.
const MC_DIM_THRESHOLD: usize = 3;

/// Hard cap on Gauss–Legendre nodes per axis.
const GL_MAX_NODES: usize = 512;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// A bounded region: a finite union of pairwise disjoint axis-aligned boxes,
/// optionally intersected with polynomial sublevel sets `p ≤ 0`.
#[derive(Clone, Debug)]
pub struct Region {
    /// Ambient dimension.
    pub dim: usize,
    /// Axis-aligned boxes, each a list of `dim` intervals `(lo, hi)`.
    pub boxes: Vec<Vec<(f64, f64)>>,
    /// Membership requires `p(z) ≤ 0` for every constraint polynomial.
    pub constraints: Vec<MultiPoly>,
}

impl Region {
    pub fn new(dim: usize, boxes: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("region needs at least one dimension"));
        }
        for b in &boxes {
            if b.len() != dim {
                return Err(Error::input(format!(
                    "box has {} intervals, region dimension is {dim}",
                    b.len()
                )));
            }
            for &(lo, hi) in b {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::input(format!(
                        "degenerate or unbounded interval ({lo}, {hi})"
                    )));
                }
            }
        }
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let overlap = (0..dim).all(|a| {
                    boxes[i][a].0 < boxes[j][a].1 && boxes[j][a].0 < boxes[i][a].1
                });
                if overlap {
                    return Err(Error::input(format!(
                        "boxes {i} and {j} overlap; regions must be disjoint unions"
                    )));
                }
            }
        }
        Ok(Region { dim, boxes, constraints: Vec::new() })
    }

    /// Single cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Region::new(dim, vec![vec![(lo, hi); dim]])
    }

    /// Adds membership constraints `p ≤ 0`.
    pub fn with_constraints(mut self, constraints: Vec<MultiPoly>) -> Result<Self> {
        for p in &constraints {
            if p.nvars() != self.dim {
                return Err(Error::input(format!(
                    "constraint has {} variables, region dimension is {}",
                    p.nvars(),
                    self.dim
                )));
            }
        }
        self.constraints.extend(constraints);
        Ok(self)
    }

    /// Total volume of the box union (ignoring constraints).
    pub fn box_volume(&self) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.iter().map(|&(lo, hi)| hi - lo).product::<f64>())
            .sum()
    }

    /// Membership test including the constraint polynomials.
    pub fn contains(&self, z: &[f64]) -> bool {
        if z.len() != self.dim {
            return false;
        }
        self.boxes
            .iter()
            .any(|b| b.iter().zip(z).all(|(&(lo, hi), &v)| lo <= v && v <= hi))
            && self.satisfies_constraints(z)
    }

    fn satisfies_constraints(&self, z: &[f64]) -> bool {
        self.constraints.iter().all(|p| p.eval_f64(z) <= 0.0)
    }
}

/// Which quadrature produced an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    MonteCarlo,
    TensorQuadrature,
}

/// A numerical integral with its uncertainty and clipping diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub method: Method,
    /// Fraction of the estimate lost to the singularity ceiling; zero for
    /// integrands without a kernel.
    pub clipped_fraction: f64,
}

impl IntegralEstimate {
    fn zero(method: Method) -> Self {
        IntegralEstimate {
            value: 0.0,
            std_error: 0.0,
            n_samples: 1,
            method,
            clipped_fraction: 0.0,
        }
    }

    /// Whether the clipped mass is small enough for the run to count.
    pub fn is_valid_run(&self) -> bool {
        self.clipped_fraction < CLIP_VALID_LIMIT
    }
}

/// Knobs shared by every estimator.
#[derive(Clone, Debug)]
pub struct EstimateOpts {
    /// Root seed for Monte Carlo streams and scan candidates.
    pub seed: u64,
    /// Sample budget (Monte Carlo) or evaluation budget (quadrature).
    pub n_samples: u64,
    /// Forced method; `None` picks Monte Carlo at dimension 3 and above,
    /// tensor Gauss–Legendre below.
    pub method: Option<Method>,
    /// Ceiling applied to singular kernels before accumulation.
    pub clip_ceiling: f64,
}

/// Root seed of [`EstimateOpts::default`], exported so front ends can apply
/// the same default without restating the constant.
pub const DEFAULT_SEED: u64 = 0x5eed_cafe;

impl Default for EstimateOpts {
    fn default() -> Self {
        EstimateOpts {
            seed: DEFAULT_SEED,
            n_samples: 200_000,
            method: None,
            clip_ceiling: 1e12,
        }
    }
}

impl EstimateOpts {
    pub(crate) fn pick_method(&self, dim: usize) -> Method {
        self.method.unwrap_or(if dim >= MC_DIM_THRESHOLD {
            Method::MonteCarlo
        } else {
            Method::TensorQuadrature
        })
    }
}

// ---------------------------------------------------------------------------
// Quadrature drivers
// ---------------------------------------------------------------------------

/// Deterministic stream splitter (splitmix64 step) for per-batch seeds.
pub(crate) fn mix(seed: u64, i: u64) -> u64 {
    let mut z = seed.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-independent compensated total of per-batch partials.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let m = n / 2;
            pairwise_sum(&xs[..m]) + pairwise_sum(&xs[m..])
        }
    }
}

/// Integrand evaluated over the region: returns the (already clipped) value
/// together with the mass removed by clipping.
type PairIntegrand<'a> = dyn Fn(&[f64]) -> (f64, f64) + Sync + 'a;

fn cumulative_volumes(region: &Region) -> Vec<f64> {
    let mut acc = 0.0;
    region
        .boxes
        .iter()
        .map(|b| {
            acc += b.iter().map(|&(lo, hi)| hi - lo).product::<f64>();
            acc
        })
        .collect()
}

fn mc_estimate(region: &Region, f: &PairIntegrand, opts: &EstimateOpts) -> IntegralEstimate {
    let vol = region.box_volume();
    if vol <= 0.0 || region.boxes.is_empty() {
        return IntegralEstimate::zero(Method::MonteCarlo);
    }
    let n = opts.n_samples.max(1);
    let batches = n.div_ceil(MC_BATCH);
    let cum = cumulative_volumes(region);
    let partials: Vec<(f64, f64, f64, u64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(opts.seed, b));
            let count = MC_BATCH.min(n - b * MC_BATCH);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut clipped = 0.0;
            let mut z = vec![0.0; region.dim];
            for _ in 0..count {
                let u: f64 = rng.gen::<f64>() * vol;
                let bi = cum.partition_point(|&c| c <= u).min(region.boxes.len() - 1);
                for (a, &(lo, hi)) in region.boxes[bi].iter().enumerate() {
                    z[a] = lo + (hi - lo) * rng.gen::<f64>();
                }
                let (v, c) = if region.satisfies_constraints(&z) {
                    f(&z)
                } else {
                    (0.0, 0.0)
                };
                sum += v;
                sum_sq += v * v;
                clipped += c;
            }
            (sum, sum_sq, clipped, count)
        })
        .collect();
    let total: u64 = partials.iter().map(|p| p.3).sum();
    let sums: Vec<f64> = partials.iter().map(|p| p.0).collect();
    let sqs: Vec<f64> = partials.iter().map(|p| p.1).collect();
    let clips: Vec<f64> = partials.iter().map(|p| p.2).collect();
    let mean = pairwise_sum(&sums) / total as f64;
    let mean_sq = pairwise_sum(&sqs) / total as f64;
    let var = ((mean_sq - mean * mean) / total as f64).max(0.0);
    let value = vol * mean;
    let clipped_mass = vol * pairwise_sum(&clips) / total as f64;
    IntegralEstimate {
        value,
        std_error: vol * var.sqrt(),
        n_samples: total,
        method: Method::MonteCarlo,
        clipped_fraction: clip_fraction(clipped_mass, value),
    }
}

fn clip_fraction(clipped_mass: f64, value: f64) -> f64 {
    if clipped_mass == 0.0 {
        0.0
    } else {
        clipped_mass / value.abs().max(f64::MIN_POSITIVE)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn legendre_rule(k: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(k);
    for i in 0..k {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_k and P_k' at x via the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for j in 2..=k {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// Tensor Gauss–Legendre over one box at `k` nodes per axis.
fn gl_box(b: &[(f64, f64)], rule: &[(f64, f64)], region: &Region, f: &PairIntegrand) -> (f64, f64) {
    let dim = b.len();
    let k = rule.len();
    let mut value = 0.0;
    let mut clipped = 0.0;
    let mut idx = vec![0usize; dim];
    let mut z = vec![0.0; dim];
    loop {
        let mut w = 1.0;
        for a in 0..dim {
            let (x, wx) = rule[idx[a]];
            let (lo, hi) = b[a];
            z[a] = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x;
            w *= 0.5 * (hi - lo) * wx;
        }
        if region.satisfies_constraints(&z) {
            let (v, c) = f(&z);
            value += w * v;
            clipped += w * c;
        }
        // Odometer over the tensor grid.
        let mut a = 0;
        loop {
            if a == dim {
                return (value, clipped);
            }
            idx[a] += 1;
            if idx[a] < k {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

fn gl_estimate(region: &Region, f: &PairIntegrand, opts: &EstimateOpts) -> IntegralEstimate {
    if region.boxes.is_empty() {
        return IntegralEstimate::zero(Method::TensorQuadrature);
    }
    let dim = region.dim;
    let budget = opts.n_samples.max(16) as f64;
    let k = (budget.powf(1.0 / dim as f64).floor() as usize).clamp(4, GL_MAX_NODES);
    let rule_hi = legendre_rule(k);
    let rule_lo = legendre_rule((k / 2).max(2));
    let mut hi = (0.0, 0.0);
    let mut lo = 0.0;
    for b in &region.boxes {
        let (v, c) = gl_box(b, &rule_hi, region, f);
        hi.0 += v;
        hi.1 += c;
        lo += gl_box(b, &rule_lo, region, f).0;
    }
    let evals = (region.boxes.len() as u64) * (k as u64).pow(dim as u32);
    IntegralEstimate {
        value: hi.0,
        std_error: (hi.0 - lo).abs(),
        n_samples: evals,
        method: Method::TensorQuadrature,
        clipped_fraction: clip_fraction(hi.1, hi.0),
    }
}

fn estimate(region: &Region, f: &PairIntegrand, opts: &EstimateOpts) -> IntegralEstimate {
    match opts.pick_method(region.dim) {
        Method::MonteCarlo => mc_estimate(region, f, opts),
        Method::TensorQuadrature => gl_estimate(region, f, opts),
    }
}

/// Plain integral of a bounded function over a region, with the usual
/// method selection and determinism guarantees.
pub fn region_integral(
    region: &Region,
    f: impl Fn(&[f64]) -> f64 + Sync,
    opts: &EstimateOpts,
) -> IntegralEstimate {
    estimate(region, &|z: &[f64]| (f(z), 0.0), opts)
}

// ---------------------------------------------------------------------------
// Sublevel functionals and shell averages
// ---------------------------------------------------------------------------

/// Bilinear sublevel functional: ∫_E χ_{|ρ(x,y)| ≤ ε} f(x) g(y) dx dy.
pub fn sublevel_eval(
    ps: &PhaseSystem,
    eps: f64,
    region: &Region,
    f: impl Fn(&[f64]) -> f64 + Sync,
    g: impl Fn(&[f64]) -> f64 + Sync,
    opts: &EstimateOpts,
) -> Result<IntegralEstimate> {
    if !(eps > 0.0) {
        return Err(Error::input("sublevel threshold must be positive"));
    }
    let dl = ps.d_l;
    if region.dim != dl + ps.d_r {
        return Err(Error::input(format!(
            "region dimension {} does not match the phase space {}",
            region.dim,
            dl + ps.d_r
        )));
    }
    let integrand = move |z: &[f64]| -> (f64, f64) {
        if ps.rho.eval_f64(z).abs() <= eps {
            (f(&z[..dl]) * g(&z[dl..]), 0.0)
        } else {
            (0.0, 0.0)
        }
    };
    Ok(estimate(region, &integrand, opts))
}

/// ε-shell average of the Radon-like operator at a fixed left point:
/// (1/2ε) ∫ χ_{|ρ(x,y)| ≤ ε} χ_E(x,y) g(y) dy.
pub fn radon_apply(
    ps: &PhaseSystem,
    g: impl Fn(&[f64]) -> f64 + Sync,
    x: &[f64],
    eps: f64,
    region: &Region,
    opts: &EstimateOpts,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::input("shell width must be positive"));
    }
    if x.len() != ps.d_l {
        return Err(Error::input(format!(
            "left point has {} coordinates, d_l is {}",
            x.len(),
            ps.d_l
        )));
    }
    if region.dim != ps.d_l + ps.d_r {
        return Err(Error::input(format!(
            "region dimension {} does not match the phase space {}",
            region.dim,
            ps.d_l + ps.d_r
        )));
    }
    // Slice the region at x: keep the y-part of boxes whose x-part contains x.
    let y_boxes: Vec<Vec<(f64, f64)>> = region
        .boxes
        .iter()
        .filter(|b| b[..ps.d_l].iter().zip(x).all(|(&(lo, hi), &v)| lo <= v && v <= hi))
        .map(|b| b[ps.d_l..].to_vec())
        .collect();
    if y_boxes.is_empty() {
        return Ok(0.0);
    }
    let y_region = Region::new(ps.d_r, y_boxes)?;
    let integrand = move |y: &[f64]| -> (f64, f64) {
        let mut full = Vec::with_capacity(ps.d_l + ps.d_r);
        full.extend_from_slice(x);
        full.extend_from_slice(y);
        let inside = region.satisfies_constraints(&full) && ps.rho.eval_f64(&full).abs() <= eps;
        if inside {
            (g(y) / (2.0 * eps), 0.0)
        } else {
            (0.0, 0.0)
        }
    };
    Ok(estimate(&y_region, &integrand, opts).value)
}

// ---------------------------------------------------------------------------
// Geometric integrals and the supremum scan
// ---------------------------------------------------------------------------

/// Numerator of a geometric integral: a constant, or a prepared weight raised
/// to a power (in absolute value).
pub enum GeomWeight<'a> {
    Constant(f64),
    Prepared { weight: &'a PreparedWeight, power: f64 },
}

impl GeomWeight<'_> {
    fn eval(&self, y: &[f64]) -> Result<f64> {
        match self {
            GeomWeight::Constant(c) => Ok(c.abs()),
            GeomWeight::Prepared { weight, power } => {
                Ok(weight.eval_f64(y)?.abs().powf(*power))
            }
        }
    }

    fn check_domain(&self, dim: usize) -> Result<()> {
        if let GeomWeight::Prepared { weight, .. } = self {
            if weight.system().d != dim {
                return Err(Error::input(format!(
                    "weight domain has {} variables, region dimension is {dim}",
                    weight.system().d
                )));
            }
        }
        Ok(())
    }
}

/// Optional damped-denominator form: `1 + |Q T_V Φ(y)|^α` instead of
/// `|Q Φ(y)|^s`.
pub struct Regularizer {
    pub projection: ProjectionTV,
    pub alpha: f64,
}

/// Geometric integral ∫_E |w(y)| / |Q Φ(y)|^s dy, with the kernel clipped at
/// the configured ceiling and the clipped mass reported on the estimate.
pub fn geom_integral(
    maps: &[MultiPoly],
    weight: &GeomWeight,
    s: f64,
    q: &GLn,
    region: &Region,
    regularizer: Option<&Regularizer>,
    opts: &EstimateOpts,
) -> Result<IntegralEstimate> {
    if maps.is_empty() {
        return Err(Error::input("geometric integral needs at least one map"));
    }
    if !(s > 0.0) {
        return Err(Error::input("kernel exponent must be positive"));
    }
    for p in maps {
        if p.nvars() != region.dim {
            return Err(Error::input(format!(
                "map has {} variables, region dimension is {}",
                p.nvars(),
                region.dim
            )));
        }
    }
    weight.check_domain(region.dim)?;
    let expected = match regularizer {
        Some(r) => {
            if r.projection.d != maps.len() {
                return Err(Error::input(format!(
                    "projection acts on dimension {}, map target is {}",
                    r.projection.d,
                    maps.len()
                )));
            }
            if !(r.alpha > 0.0) {
                return Err(Error::input("regularizer exponent must be positive"));
            }
            r.projection.matrix.nrows()
        }
        None => maps.len(),
    };
    if q.n != expected {
        return Err(Error::input(format!(
            "matrix acts on dimension {}, kernel expects {expected}",
            q.n
        )));
    }
    let ceiling = opts.clip_ceiling;
    let integrand = move |y: &[f64]| -> (f64, f64) {
        let wv = match weight.eval(y) {
            Ok(v) => v,
            Err(_) => return (0.0, 0.0),
        };
        if wv == 0.0 {
            return (0.0, 0.0);
        }
        let phi: Vec<f64> = maps.iter().map(|p| p.eval_f64(y)).collect();
        let img = match regularizer {
            Some(r) => q.apply(&r.projection.apply(&phi)),
            None => q.apply(&phi),
        };
        let norm = img.iter().map(|v| v * v).sum::<f64>().sqrt();
        let denom = match regularizer {
            Some(r) => 1.0 + norm.powf(r.alpha),
            None => norm.powf(s),
        };
        let raw = wv / denom;
        if raw.is_finite() && raw <= ceiling {
            (raw, 0.0)
        } else if raw.is_finite() {
            (ceiling, raw - ceiling)
        } else {
            // A sample exactly on the singular locus: count the whole ceiling
            // as clipped so the run cannot silently pass.
            (ceiling, ceiling)
        }
    };
    Ok(estimate(region, &integrand, opts))
}

/// One evaluated candidate in a supremum scan.
#[derive(Clone, Debug, Serialize)]
pub struct ScanStep {
    /// Which stage produced the candidate: exploration, refinement, or the
    /// squash probe along a volume-preserving family.
    pub stage: String,
    pub log_abs_det: f64,
    pub objective: f64,
    pub clipped_fraction: f64,
    /// Set on probe steps that grow monotonically — the signature of a
    /// degenerate direction.
    pub diverging: bool,
}

/// Result of a supremum scan over GL(n).
pub struct ScanOutcome {
    /// Largest objective seen; a lower bound for the true supremum.
    pub sup_estimate: f64,
    pub worst_q: GLn,
    pub trace: Vec<ScanStep>,
    /// True when some volume-preserving squash family kept increasing the
    /// objective, i.e. the supremum looks infinite.
    pub diverging: bool,
}

/// Lower-bounds sup_Q |det Q|^{s/n} ∫_E |w| / |QΦ|^s dy by seeded sampling,
/// local refinement around the best candidate, and volume-preserving squash
/// probes that detect divergent families.  Deterministic for a fixed seed.
pub fn oberlin_scan(
    maps: &[MultiPoly],
    weight: &GeomWeight,
    s: f64,
    region: &Region,
    budget: u32,
    opts: &EstimateOpts,
) -> Result<ScanOutcome> {
    if budget == 0 {
        return Err(Error::input("scan budget must be positive"));
    }
    let n = maps.len();
    let det_pow = s / n as f64;
    let mut trace = Vec::new();
    let objective = |q: &GLn, trace: &mut Vec<ScanStep>, stage: &str| -> Result<f64> {
        let est = geom_integral(maps, weight, s, q, region, None, opts)?;
        let obj = q.det.abs().powf(det_pow) * est.value;
        trace.push(ScanStep {
            stage: stage.to_string(),
            log_abs_det: q.det.abs().ln(),
            objective: obj,
            clipped_fraction: est.clipped_fraction,
            diverging: false,
        });
        Ok(obj)
    };

    // Exploration: independent candidates across a spread of determinants.
    let mut best: Option<(f64, GLn)> = None;
    for i in 0..budget {
        let q = crate::linalg::sample_gl(n, mix(opts.seed, i as u64), (-3.0, 3.0), 100.0)?;
        let obj = objective(&q, &mut trace, "explore")?;
        if best.as_ref().map_or(true, |(b, _)| obj > *b) {
            best = Some((obj, q));
        }
    }
    let (mut best_obj, mut best_q) = best.expect("budget is positive");

    // Refinement: multiplicative perturbations with shrinking step size.
    let refine_rounds = 3u32;
    let per_round = (budget / 2).max(4);
    for r in 0..refine_rounds {
        let scale = 0.5 / f64::powi(2.0, r as i32);
        for i in 0..per_round {
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix(opts.seed ^ 0xabcd_1234, (r * per_round + i) as u64));
            let mut m = best_q.entries.clone();
            for v in m.iter_mut() {
                *v *= 1.0 + scale * (rng.gen::<f64>() - 0.5);
            }
            let Ok(q) = GLn::new(m) else { continue };
            let obj = objective(&q, &mut trace, "refine")?;
            if obj > best_obj {
                best_obj = obj;
                best_q = q;
            }
        }
    }

    // Squash probes: volume-preserving families that expand one output
    // direction and contract the rest.  Monotone growth along a whole family
    // marks a degenerate direction.
    let mut diverging = false;
    let squash_steps = [2.0, 4.0, 8.0, 16.0];
    let run_family = |family: &mut dyn FnMut(f64) -> Option<GLn>,
                          trace: &mut Vec<ScanStep>,
                          best_obj: &mut f64,
                          best_q: &mut GLn|
     -> Result<bool> {
        let mut values = Vec::new();
        for &t in &squash_steps {
            let Some(q) = family(t) else { continue };
            let obj = objective(&q, trace, "probe")?;
            values.push(obj);
            if obj > *best_obj {
                *best_obj = obj;
                *best_q = q;
            }
        }
        // A degenerate direction makes the objective grow geometrically in
        // the squash parameter, so successive increments must not decay; an
        // objective saturating toward a finite supremum also rises, but with
        // shrinking increments, and is not divergence.
        let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let monotone = values.len() == squash_steps.len()
            && values[0] > 0.0
            && values.windows(2).all(|w| w[1] > w[0])
            && values[3] > 2.0 * values[0]
            && increments.windows(2).all(|w| w[1] > 0.9 * w[0]);
        if monotone {
            for step in trace.iter_mut().rev().take(values.len()) {
                step.diverging = true;
            }
        }
        Ok(monotone)
    };

    // Probe A: axis squashes of the best candidate (row i up, row j down).
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let base = best_q.entries.clone();
            let mut family = |t: f64| {
                let mut m = base.clone();
                for c in 0..n {
                    m[(i, c)] *= t;
                    m[(j, c)] /= t;
                }
                GLn::new(m).ok()
            };
            diverging |= run_family(&mut family, &mut trace, &mut best_obj, &mut best_q)?;
        }
    }

    // Probe B: squash aligned with the image's second-moment frame, blowing
    // up the weakest direction while contracting the others with unit
    // determinant.  If the image sits in a hyperplane this family shrinks
    // |QΦ| uniformly and the objective runs away.
    if n >= 2 {
        let pts = domain_grid(region, 4096.min(opts.n_samples));
        if !pts.is_empty() {
            let mut moment = nalgebra::DMatrix::<f64>::zeros(n, n);
            for z in &pts {
                let phi: Vec<f64> = maps.iter().map(|p| p.eval_f64(z)).collect();
                for i in 0..n {
                    for j in 0..n {
                        moment[(i, j)] += phi[i] * phi[j];
                    }
                }
            }
            let eig = nalgebra::SymmetricEigen::new(moment);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite moments")
            });
            let frame = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
                eig.eigenvectors.column(order[i])[j]
            });
            let contract = -1.0 / (n as f64 - 1.0);
            let mut family = |t: f64| {
                let mut d = nalgebra::DMatrix::<f64>::zeros(n, n);
                d[(0, 0)] = t;
                for i in 1..n {
                    d[(i, i)] = t.powf(contract);
                }
                GLn::new(&d * &frame).ok()
            };
            diverging |= run_family(&mut family, &mut trace, &mut best_obj, &mut best_q)?;
        }
    }

    Ok(ScanOutcome { sup_estimate: best_obj, worst_q: best_q, trace, diverging })
}

// ---------------------------------------------------------------------------
// Image measures and widths
// ---------------------------------------------------------------------------

/// Image-measure estimate at two grid resolutions.
#[derive(Clone, Debug, Serialize)]
pub struct ImageMeasure {
    /// Fine-resolution estimate (the reported value).
    pub value: f64,
    /// Half-resolution estimate for a Richardson-style agreement check.
    pub coarse: f64,
    /// Occupied cells at the fine resolution.
    pub cells: u64,
}

impl ImageMeasure {
    /// Relative disagreement between the two resolutions.
    pub fn agreement(&self) -> f64 {
        (self.value - self.coarse).abs() / self.value.abs().max(f64::MIN_POSITIVE)
    }
}

/// Deterministic per-box sample grid with roughly `total` points distributed
/// by volume.
fn domain_grid(region: &Region, total: u64) -> Vec<Vec<f64>> {
    let vol = region.box_volume();
    let mut points = Vec::new();
    for b in &region.boxes {
        let bvol: f64 = b.iter().map(|&(lo, hi)| hi - lo).product();
        let share = if vol > 0.0 {
            (total as f64 * bvol / vol).max(1.0)
        } else {
            1.0
        };
        let per_axis = (share.powf(1.0 / b.len() as f64).round() as usize).max(2);
        let mut idx = vec![0usize; b.len()];
        let mut z = vec![0.0; b.len()];
        'grid: loop {
            for (a, &(lo, hi)) in b.iter().enumerate() {
                z[a] = lo + (hi - lo) * (idx[a] as f64 + 0.5) / per_axis as f64;
            }
            if region.satisfies_constraints(&z) {
                points.push(z.clone());
            }
            let mut a = 0;
            loop {
                if a == b.len() {
                    break 'grid;
                }
                idx[a] += 1;
                if idx[a] < per_axis {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }
    points
}

/// Occupied-cell measure of a point cloud at `resolution` cells per axis.
fn hit_grid_measure(points: &[Vec<f64>], k: usize, resolution: usize) -> (f64, u64) {
    if points.is_empty() {
        return (0.0, 0);
    }
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for p in points {
        for a in 0..k {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut cell = vec![0.0; k];
    for a in 0..k {
        let extent = hi[a] - lo[a];
        if extent <= 0.0 {
            // The image is flat along this axis: measure zero in ℝ^k.
            return (0.0, points.len() as u64);
        }
        cell[a] = extent / resolution as f64;
    }
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    for p in points {
        let key: Vec<u32> = (0..k)
            .map(|a| {
                let i = ((p[a] - lo[a]) / cell[a]).floor() as i64;
                i.clamp(0, resolution as i64 - 1) as u32
            })
            .collect();
        seen.insert(key);
    }
    let cell_vol: f64 = cell.iter().product();
    (seen.len() as f64 * cell_vol, seen.len() as u64)
}

/// k-dimensional measure of the image of `region` under the given maps, by
/// hit-grid counting at `resolution` and `resolution/2` cells per axis.
pub fn image_measure(
    maps: &[MultiPoly],
    region: &Region,
    resolution: usize,
    opts: &EstimateOpts,
) -> Result<ImageMeasure> {
    if maps.is_empty() {
        return Err(Error::input("image measure needs at least one map"));
    }
    if resolution < 2 {
        return Err(Error::input("resolution must be at least 2"));
    }
    for p in maps {
        if p.nvars() != region.dim {
            return Err(Error::input(format!(
                "map has {} variables, region dimension is {}",
                p.nvars(),
                region.dim
            )));
        }
    }
    let domain = domain_grid(region, opts.n_samples);
    let images: Vec<Vec<f64>> = domain
        .par_iter()
        .map(|z| maps.iter().map(|p| p.eval_f64(z)).collect())
        .collect();
    let (value, cells) = hit_grid_measure(&images, maps.len(), resolution);
    let (coarse, _) = hit_grid_measure(&images, maps.len(), (resolution / 2).max(2));
    Ok(ImageMeasure { value, coarse, cells })
}

/// Left width: the essential supremum over right slices of the image measure
/// of the left block, approximated by the maximum over a slice grid.
pub fn width_l(
    maps: &[MultiPoly],
    d_l: usize,
    region: &Region,
    resolution: usize,
    slices: usize,
    opts: &EstimateOpts,
) -> Result<f64> {
    slice_width(maps, d_l, region, resolution, slices, opts, true)
}

/// Right width: the essential supremum over left slices of the image measure
/// of the right block.
pub fn width_r(
    maps: &[MultiPoly],
    d_l: usize,
    region: &Region,
    resolution: usize,
    slices: usize,
    opts: &EstimateOpts,
) -> Result<f64> {
    slice_width(maps, d_l, region, resolution, slices, opts, false)
}

fn slice_width(
    maps: &[MultiPoly],
    d_l: usize,
    region: &Region,
    resolution: usize,
    slices: usize,
    opts: &EstimateOpts,
    left: bool,
) -> Result<f64> {
    if maps.is_empty() {
        return Err(Error::input("width needs at least one map"));
    }
    if d_l == 0 || d_l >= region.dim {
        return Err(Error::input(format!(
            "left block size {d_l} must split the {}-dimensional region",
            region.dim
        )));
    }
    if slices == 0 || resolution < 2 {
        return Err(Error::input("slice and resolution counts must be positive"));
    }
    // The frozen block enumerates slice positions; the free block is sampled
    // per slice and pushed through the maps.
    let (frozen_range, free_range) = if left {
        (d_l..region.dim, 0..d_l)
    } else {
        (0..d_l, d_l..region.dim)
    };
    let free_dim = free_range.len();
    let per_free = ((opts.n_samples as f64 / slices.pow(frozen_range.len() as u32) as f64)
        .max(16.0)
        .powf(1.0 / free_dim as f64)
        .round() as usize)
        .max(2);
    let mut sup: f64 = 0.0;
    for b in &region.boxes {
        let frozen_axes: Vec<usize> = frozen_range.clone().collect();
        let free_axes: Vec<usize> = free_range.clone().collect();
        let mut sidx = vec![0usize; frozen_axes.len()];
        'slices: loop {
            let mut z = vec![0.0; region.dim];
            for (t, &a) in frozen_axes.iter().enumerate() {
                let (lo, hi) = b[a];
                z[a] = lo + (hi - lo) * (sidx[t] as f64 + 0.5) / slices as f64;
            }
            // Collect the image of this slice.
            let mut points = Vec::new();
            let mut fidx = vec![0usize; free_dim];
            'free: loop {
                for (t, &a) in free_axes.iter().enumerate() {
                    let (lo, hi) = b[a];
                    z[a] = lo + (hi - lo) * (fidx[t] as f64 + 0.5) / per_free as f64;
                }
                if region.satisfies_constraints(&z) {
                    points.push(maps.iter().map(|p| p.eval_f64(&z)).collect());
                }
                let mut t = 0;
                loop {
                    if t == free_dim {
                        break 'free;
                    }
                    fidx[t] += 1;
                    if fidx[t] < per_free {
                        break;
                    }
                    fidx[t] = 0;
                    t += 1;
                }
            }
            let (m, _) = hit_grid_measure(&points, maps.len(), resolution);
            sup = sup.max(m);
            let mut t = 0;
            loop {
                if t == frozen_axes.len() {
                    break 'slices;
                }
                sidx[t] += 1;
                if sidx[t] < slices {
                    break;
                }
                sidx[t] = 0;
                t += 1;
            }
        }
    }
    Ok(sup)
}
