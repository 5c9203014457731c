//! Float linear algebra: determinants, span-annihilating projections,
//! completing-the-square decompositions, and seeded GL(n) sampling.
//!
//! This is the numeric layer; exact determinant work lives in [`crate::poly`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative singular-value threshold below which directions count as rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// An invertible matrix with its determinant cached at construction.
#[derive(Clone, Debug)]
pub struct GLn {
    pub n: usize,
    pub entries: DMatrix<f64>,
    pub det: f64,
}

impl GLn {
    /// Wraps a square matrix, caching its determinant.
    ///
    /// Errors if the matrix is not square or is singular (|det| ≤ 1e−12).
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::input(format!(
                "GLn requires a square matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let d = det(&entries);
        if d.abs() <= 1e-12 {
            return Err(Error::input(format!("matrix is singular (det = {d:e})")));
        }
        Ok(GLn { n: entries.nrows(), entries, det: d })
    }

    /// Applies the matrix to a vector.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(z);
        (&self.entries * v).iter().copied().collect()
    }
}

/// A projection T_V: ℝ^d → ℝ^{d−k−1} annihilating span{v_1, …, v_{k+1}},
/// normalized so |T_V z_1 ⋯ T_V z_{d−k−1}| = |v_1 ⋯ v_{k+1} z_1 ⋯ z_{d−k−1}|.
#[derive(Clone, Debug)]
pub struct ProjectionTV {
    pub d: usize,
    pub k: usize,
    /// (d−k−1)×d matrix; rows annihilate every v in V.
    pub matrix: DMatrix<f64>,
}

impl ProjectionTV {
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(z);
        (&self.matrix * v).iter().copied().collect()
    }
}

/// Determinant via pivoted LU; singular matrices return 0 (no error).
pub fn det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().lu().determinant()
}

/// Determinant of a row-major slice matrix; errors if rows are ragged or non-square.
pub fn det_rows(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len();
    for r in rows {
        if r.len() != n {
            return Err(Error::input(format!(
                "determinant needs a square matrix; got a row of length {} in a {}-row matrix",
                r.len(),
                n
            )));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(det(&DMatrix::from_row_slice(n, n, &flat)))
}

/// Builds the normalized projection annihilating span(V) from k+1 vectors in ℝ^d.
///
/// For full-rank V the scaling makes |T_V z_1 ⋯ T_V z_{d−k−1}| equal to
/// |v_1 ⋯ v_{k+1} z_1 ⋯ z_{d−k−1}| for every z-tuple.  When V is rank-deficient
/// that target determinant vanishes identically and no scaling can be pinned
/// down; the returned map then has unit-norm rows annihilating span(V), and
/// every weight composed with it vanishes because the v-columns are dependent.
pub fn build_tv(vs: &[Vec<f64>]) -> Result<ProjectionTV> {
    if vs.is_empty() {
        return Err(Error::input("build_tv requires at least one vector"));
    }
    let d = vs[0].len();
    let kp1 = vs.len();
    if kp1 >= d {
        return Err(Error::input(format!(
            "build_tv needs d > k+1 (ambient {d}, got {kp1} vectors)"
        )));
    }
    for v in vs {
        if v.len() != d {
            return Err(Error::input("build_tv vectors must share one dimension"));
        }
    }
    let out_dim = d - kp1;
    let scale = vs
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(1.0_f64, f64::max);
    // Orthonormalize the v's (modified Gram–Schmidt with one re-pass); the
    // product of residual norms is the parallelepiped volume of V.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut vol = 1.0;
    for v in vs {
        let mut u = DVector::from_column_slice(v);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&u);
                u -= b * c;
            }
        }
        let norm = u.norm();
        if norm > RANK_TOL * scale {
            vol *= norm;
            basis.push(u / norm);
        }
    }
    let rank = basis.len();
    // Complete to an orthonormal basis of ℝ^d; the new vectors annihilate
    // span(V).  When rank < k+1 the annihilator is larger than out_dim and any
    // out_dim orthonormal rows of it satisfy the (degenerate) contract.
    let mut comp: Vec<DVector<f64>> = Vec::new();
    for j in 0..d {
        if comp.len() == out_dim {
            break;
        }
        let mut u = DVector::zeros(d);
        u[j] = 1.0;
        for _ in 0..2 {
            for b in basis.iter().chain(comp.iter()) {
                let c = b.dot(&u);
                u -= b * c;
            }
        }
        let norm = u.norm();
        if norm > 1e-8 {
            comp.push(u / norm);
        }
    }
    debug_assert_eq!(comp.len(), out_dim);
    let mut rows = DMatrix::zeros(out_dim, d);
    for (i, b) in comp.iter().enumerate() {
        rows.set_row(i, &b.transpose());
    }
    if rank == kp1 {
        // Scaling one row by vol(V) scales the z-determinant once, which is
        // exactly the factor the target determinant carries.
        let scaled = rows.row(0) * vol;
        rows.set_row(0, &scaled);
    }
    Ok(ProjectionTV { d, k: kp1 - 1, matrix: rows })
}

/// Splits |Qz|² for Q ∈ GL(n+1) as |Q0(ẑ − v·z_{n+1})|² + b²·z_{n+1}²,
/// returning (Q0, v, b) with b > 0 and |det Q| = |det Q0|·b.
///
/// Computed from the block Cholesky structure of QᵀQ.
pub fn complete_square(q: &GLn) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let np1 = q.n;
    if np1 < 2 {
        return Err(Error::input("complete_square needs dimension at least 2"));
    }
    let n = np1 - 1;
    let g = q.entries.transpose() * &q.entries;
    let a = g.view((0, 0), (n, n)).into_owned();
    let c = g.view((0, n), (n, 1)).into_owned();
    let gnn = g[(n, n)];
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::input("complete_square: leading block is not positive definite"))?;
    let q0 = chol.l().transpose();
    let ainv_c = chol.solve(&c);
    let v = -&ainv_c;
    let b_sq = gnn - (c.transpose() * &ainv_c)[(0, 0)];
    if b_sq <= 0.0 {
        return Err(Error::input("complete_square: Schur complement is not positive"));
    }
    Ok((q0, DVector::from_column_slice(v.as_slice()), b_sq.sqrt()))
}

/// Draws an invertible n×n matrix with log|det| uniform in `log_det_range`
/// and condition number at most `cond_cap`.  Deterministic for a fixed seed.
pub fn sample_gl(n: usize, seed: u64, log_det_range: (f64, f64), cond_cap: f64) -> Result<GLn> {
    if n == 0 {
        return Err(Error::input("sample_gl needs n >= 1"));
    }
    if cond_cap <= 1.0 {
        return Err(Error::input("sample_gl needs cond_cap > 1"));
    }
    if !(log_det_range.0 <= log_det_range.1) {
        return Err(Error::input("sample_gl log_det_range must be ordered (lo <= hi)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(n, &mut rng);
    let v = random_orthogonal(n, &mut rng);
    // Log-singular values spread within ±ln(cond_cap)/2, then shifted so the
    // sum hits the requested log-determinant; shifting preserves the ratios.
    let half = 0.5 * cond_cap.ln();
    let mut logs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 * half - half).collect();
    let target = log_det_range.0 + rng.gen::<f64>() * (log_det_range.1 - log_det_range.0);
    let shift = (target - logs.iter().sum::<f64>()) / n as f64;
    for l in &mut logs {
        *l += shift;
    }
    let sigma = DMatrix::from_diagonal(&DVector::from_iterator(n, logs.iter().map(|l| l.exp())));
    GLn::new(u * sigma * v)
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let qr = m.qr();
    qr.q()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0_f64).max(b.abs())
    }

    #[test]
    fn det_identity_and_diagonal() {
        assert_eq!(det(&DMatrix::identity(3, 3)), 1.0);
        assert_eq!(det_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap(), 6.0);
        assert_eq!(det_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), -1.0);
    }

    #[test]
    fn det_rejects_non_square() {
        assert!(det_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).is_err());
    }

    #[test]
    fn det_multiplicative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(4, 4, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let b = DMatrix::from_fn(4, 4, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let lhs = det(&(&a * &b));
            let rhs = det(&a) * det(&b);
            assert!(approx(lhs, rhs, 1e-9), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn build_tv_axis_cases() {
        // d=2, V={e1}: T_V = (0, ±1).
        let tv = build_tv(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(tv.matrix.nrows(), 1);
        assert!(approx(tv.matrix[(0, 0)].abs(), 0.0, 1e-12));
        assert!(approx(tv.matrix[(0, 1)].abs(), 1.0, 1e-12));
        // d=3, V={e1,e2}: T_V z = ±z3.
        let tv = build_tv(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let z = tv.apply(&[0.3, -0.7, 2.5]);
        assert!(approx(z[0].abs(), 2.5, 1e-12));
    }

    #[test]
    fn build_tv_volume_normalization_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 5;
        let kp1 = 2;
        let out = d - kp1;
        let vs: Vec<Vec<f64>> = (0..kp1)
            .map(|_| (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let tv = build_tv(&vs).unwrap();
        for _ in 0..50 {
            let zs: Vec<Vec<f64>> = (0..out)
                .map(|_| (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .collect();
            // Left: det of T_V applied to the z's.
            let lhs_rows: Vec<Vec<f64>> = zs.iter().map(|z| tv.apply(z)).collect();
            let lhs = det_rows(&lhs_rows).unwrap().abs();
            // Right: det of the full [v | z] column matrix.
            let mut full = DMatrix::zeros(d, d);
            for (j, v) in vs.iter().enumerate() {
                full.set_column(j, &DVector::from_column_slice(v));
            }
            for (j, z) in zs.iter().enumerate() {
                full.set_column(kp1 + j, &DVector::from_column_slice(z));
            }
            let rhs = det(&full).abs();
            assert!(approx(lhs, rhs, 1e-8), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn build_tv_uniqueness_up_to_unimodular_factor() {
        // Two constructions differing by the row basis must agree on the
        // normalized determinant invariant, which is what pins them down.
        let vs = [vec![1.0, 2.0, -1.0, 0.5], vec![0.0, 1.0, 1.0, -2.0]];
        let tv = build_tv(&vs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let d = 4;
        for _ in 0..20 {
            let zs: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let lhs_rows: Vec<Vec<f64>> = zs.iter().map(|z| tv.apply(z)).collect();
            let lhs = det_rows(&lhs_rows).unwrap().abs();
            let mut full = DMatrix::zeros(d, d);
            for (j, v) in vs.iter().enumerate() {
                full.set_column(j, &DVector::from_column_slice(v));
            }
            for (j, z) in zs.iter().enumerate() {
                full.set_column(2 + j, &DVector::from_column_slice(z));
            }
            assert!(approx(lhs, det(&full).abs(), 1e-8));
        }
    }

    #[test]
    fn build_tv_rank_deficient_gives_unit_rows() {
        let tv = build_tv(&[vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        for i in 0..tv.matrix.nrows() {
            let norm: f64 = tv.matrix.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(approx(norm, 1.0, 1e-9));
        }
        // Rows still annihilate the span.
        let z = tv.apply(&[5.0, 0.0, 0.0]);
        assert!(z.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn complete_square_identity_and_diag() {
        let q = GLn::new(DMatrix::identity(2, 2)).unwrap();
        let (q0, v, b) = complete_square(&q).unwrap();
        assert!(approx(q0[(0, 0)].abs(), 1.0, 1e-12));
        assert!(approx(v[0], 0.0, 1e-12));
        assert!(approx(b, 1.0, 1e-12));

        let q = GLn::new(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -2.0])).unwrap();
        let (q0, v, b) = complete_square(&q).unwrap();
        assert!(approx(q0[(0, 0)].abs(), 3.0, 1e-12));
        assert!(approx(v[0], 0.0, 1e-12));
        assert!(approx(b, 2.0, 1e-12));
    }

    #[test]
    fn complete_square_shear_example() {
        // |Qz|^2 = (z1+z2)^2 + z2^2 for Q = [[1,1],[0,1]]: Q0=(1), v=(-1), b=1.
        let q = GLn::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
        let (q0, v, b) = complete_square(&q).unwrap();
        assert!(approx(q0[(0, 0)].abs(), 1.0, 1e-12));
        assert!(approx(v[0], -1.0, 1e-12));
        assert!(approx(b, 1.0, 1e-12));
    }

    #[test]
    fn complete_square_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..20 {
            let n = 2 + trial % 3;
            let q = sample_gl(n, 1000 + trial as u64, (-0.5, 0.5), 50.0).unwrap();
            let (q0, v, b) = complete_square(&q).unwrap();
            assert!(
                approx(q.det.abs(), det(&q0).abs() * b, 1e-10),
                "det identity failed"
            );
            for _ in 0..100 {
                let z: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let qz = q.apply(&z);
                let lhs: f64 = qz.iter().map(|x| x * x).sum();
                let zn = z[n - 1];
                let zhat = DVector::from_column_slice(&z[..n - 1]);
                let shifted = zhat - &v * zn;
                let q0s = &q0 * shifted;
                let rhs: f64 = q0s.iter().map(|x| x * x).sum::<f64>() + b * b * zn * zn;
                assert!(approx(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn sample_gl_deterministic_and_in_range() {
        let a = sample_gl(2, 42, (-1.0, 1.0), 100.0).unwrap();
        let b = sample_gl(2, 42, (-1.0, 1.0), 100.0).unwrap();
        assert_eq!(a.entries, b.entries);

        let c = sample_gl(3, 7, (0.0, 0.0), 10.0).unwrap();
        assert!(approx(c.det.abs(), 1.0, 1e-9), "det {}", c.det);

        for seed in 0..200 {
            let m = sample_gl(3, seed, (-2.0, 3.0), 40.0).unwrap();
            let l = m.det.abs().ln();
            assert!((-2.0 - 1e-9..=3.0 + 1e-9).contains(&l), "log|det| {l}");
            let svd = m.entries.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            assert!(smax / smin <= 40.0 * (1.0 + 1e-9), "cond {}", smax / smin);
        }
    }

    #[test]
    fn sample_gl_covers_det_range() {
        let (lo, hi) = (-2.0_f64, 2.0_f64);
        let mut buckets = [0usize; 4];
        for seed in 0..1000 {
            let m = sample_gl(3, seed, (lo, hi), 30.0).unwrap();
            let l = m.det.abs().ln();
            let idx = (((l - lo) / (hi - lo)) * 4.0).floor().clamp(0.0, 3.0) as usize;
            buckets[idx] += 1;
        }
        assert!(buckets.iter().all(|&c| c > 100), "{buckets:?}");
    }

    #[test]
    fn sample_gl_rejects_bad_config() {
        assert!(sample_gl(2, 1, (1.0, -1.0), 10.0).is_err());
        assert!(sample_gl(2, 1, (0.0, 1.0), 1.0).is_err());
        assert!(sample_gl(0, 1, (0.0, 1.0), 10.0).is_err());
    }
}
