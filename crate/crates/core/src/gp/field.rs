use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::kernel::{cholesky_with_jitter, kernel_matrix, KernelParams, MAX_JITTER};
use crate::error::{Error, Result};

/// Values of a zero-mean Gaussian process at a finite set of points, with the
/// Cholesky factor `L` of `K + jitter * I` and the whitened values
/// `z = L^-1 g` kept alongside.
///
/// Points are stored in factor order, which is the order they were added in.
/// They must be distinct but need not be sorted; [`GpField::sorted`] gives the
/// time-ordered view.
#[derive(Debug, Clone, PartialEq)]
pub struct GpField {
    points: Vec<f64>,
    values: Vec<f64>,
    whitened: Vec<f64>,
    params: KernelParams,
    chol: DMatrix<f64>,
    jitter: f64,
}

fn check_points(points: &[f64]) -> Result<()> {
    if points.iter().any(|t| !t.is_finite()) {
        return Err(Error::Usage("GP input points must be finite".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Usage(format!("repeated GP input point {}", w[0])));
    }
    Ok(())
}

fn standard_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `L x` for lower-triangular `L`.
fn lower_mul(l: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate().skip(j) {
            *o += l[(i, j)] * xj;
        }
    }
    out
}

/// Solves `L x = b` by forward substitution.
fn lower_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = b.to_vec();
    for j in 0..n {
        x[j] /= l[(j, j)];
        let xj = x[j];
        for (i, xi) in x.iter_mut().enumerate().skip(j + 1) {
            *xi -= l[(i, j)] * xj;
        }
    }
    x
}

/// In-place update of lower `L` to the factor of `L L^T + x x^T`.
fn rank_one_update(l: &mut DMatrix<f64>, mut x: Vec<f64>) {
    let n = x.len();
    for k in 0..n {
        let lkk = l[(k, k)];
        let r = lkk.hypot(x[k]);
        let c = r / lkk;
        let s = x[k] / lkk;
        l[(k, k)] = r;
        for i in k + 1..n {
            let lik = (l[(i, k)] + s * x[i]) / c;
            l[(i, k)] = lik;
            x[i] = c * x[i] - s * lik;
        }
    }
}

impl GpField {
    /// Draws `g = L z`, `z` standard normal.
    pub fn sample_prior<R: Rng + ?Sized>(
        points: &[f64],
        params: KernelParams,
        rng: &mut R,
    ) -> Result<Self> {
        check_points(points)?;
        let (chol, jitter) = cholesky_with_jitter(&kernel_matrix(points, &params), params.omega)?;
        let whitened = standard_normals(points.len(), rng);
        Ok(Self::assemble(points.to_vec(), whitened, params, chol, jitter))
    }

    /// Field with prescribed values.
    pub fn from_values(points: &[f64], values: &[f64], params: KernelParams) -> Result<Self> {
        check_points(points)?;
        let (chol, jitter) = cholesky_with_jitter(&kernel_matrix(points, &params), params.omega)?;
        Self::with_factor(points.to_vec(), values.to_vec(), params, chol, jitter)
    }

    /// Field with prescribed values and a fixed jitter (no escalation). Used
    /// where points come and go one at a time and every factor update must
    /// refer to the same regularized kernel.
    pub fn from_values_with_jitter(
        points: &[f64],
        values: &[f64],
        params: KernelParams,
        jitter: f64,
    ) -> Result<Self> {
        check_points(points)?;
        let mut k = kernel_matrix(points, &params);
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("kernel not positive definite with jitter {jitter}")))?
            .unpack();
        Self::with_factor(points.to_vec(), values.to_vec(), params, chol, jitter)
    }

    fn with_factor(
        points: Vec<f64>,
        values: Vec<f64>,
        params: KernelParams,
        chol: DMatrix<f64>,
        jitter: f64,
    ) -> Result<Self> {
        if values.len() != points.len() {
            return Err(Error::Usage(format!(
                "{} GP values for {} points",
                values.len(),
                points.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite GP value".into()));
        }
        let whitened = lower_solve(&chol, &values);
        Ok(GpField {
            points,
            values,
            whitened,
            params,
            chol,
            jitter,
        })
    }

    fn assemble(
        points: Vec<f64>,
        whitened: Vec<f64>,
        params: KernelParams,
        chol: DMatrix<f64>,
        jitter: f64,
    ) -> Self {
        let values = lower_mul(&chol, &whitened);
        GpField {
            points,
            values,
            whitened,
            params,
            chol,
            jitter,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn whitened(&self) -> &[f64] {
        &self.whitened
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    /// Lower Cholesky factor of `K + jitter * I` in factor order.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(points, values)` in increasing time order.
    pub fn sorted(&self) -> (Vec<f64>, Vec<f64>) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.points[a].total_cmp(&self.points[b]));
        (
            idx.iter().map(|&i| self.points[i]).collect(),
            idx.iter().map(|&i| self.values[i]).collect(),
        )
    }

    pub fn position(&self, t: f64) -> Option<usize> {
        self.points.iter().position(|&p| p == t)
    }

    /// `L^-1 k(points, t)`.
    fn cross_solve(&self, t: f64) -> Vec<f64> {
        let k: Vec<f64> = self.points.iter().map(|&p| self.params.cov(p, t)).collect();
        lower_solve(&self.chol, &k)
    }

    /// Conditional mean and variance of `g(t)` given the field.
    pub fn conditional_at(&self, t: f64) -> (f64, f64) {
        let b = self.cross_solve(t);
        let mean = b.iter().zip(&self.whitened).map(|(x, z)| x * z).sum();
        let var = self.params.omega - b.iter().map(|x| x * x).sum::<f64>();
        (mean, var.max(0.0))
    }

    /// Mean and standard deviation of `g(t)` under the jittered joint law the
    /// factor describes, i.e. the distribution [`GpField::push`] inverts.
    pub fn proposal_at(&self, t: f64) -> (f64, f64) {
        let b = self.cross_solve(t);
        let mean = b.iter().zip(&self.whitened).map(|(x, z)| x * z).sum();
        let var = self.params.omega + self.jitter - b.iter().map(|x| x * x).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }

    /// Conditional mean vector and covariance matrix of `g` at `new_points`.
    pub fn conditional(&self, new_points: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let (b, k22) = self.cross_blocks(new_points);
        let mean = (b.transpose() * nalgebra::DVector::from_column_slice(&self.whitened))
            .iter()
            .cloned()
            .collect();
        let cov = k22 - b.transpose() * &b;
        (mean, cov)
    }

    /// Conditional means only: `k(t, points) K^-1 g` for every `t`.
    pub fn predict_mean(&self, at: &[f64]) -> Vec<f64> {
        at.iter()
            .map(|&t| {
                let b = self.cross_solve(t);
                b.iter().zip(&self.whitened).map(|(x, z)| x * z).sum()
            })
            .collect()
    }

    fn cross_blocks(&self, new_points: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.len();
        let m = new_points.len();
        let k12 = DMatrix::from_fn(n, m, |i, j| self.params.cov(self.points[i], new_points[j]));
        let b = if n == 0 {
            k12
        } else {
            self.chol
                .solve_lower_triangular(&k12)
                .expect("Cholesky factor has a positive diagonal")
        };
        (b, kernel_matrix(new_points, &self.params))
    }

    /// New field with `new_points` appended, their values drawn from the
    /// Gaussian conditional given the current values. Existing points, values
    /// and the leading block of the factor are unchanged.
    pub fn conditional_extend<R: Rng + ?Sized>(
        &self,
        new_points: &[f64],
        rng: &mut R,
    ) -> Result<GpField> {
        let mut all = self.points.clone();
        all.extend_from_slice(new_points);
        check_points(&all)?;
        let n = self.len();
        let m = new_points.len();
        let (b, k22) = self.cross_blocks(new_points);
        let schur = k22 - b.transpose() * &b;

        let mut extra = 0.0;
        let c = loop {
            let mut s = schur.clone();
            for i in 0..m {
                s[(i, i)] += self.jitter + extra;
            }
            if let Some(c) = s.cholesky() {
                break c.unpack();
            }
            extra = if extra == 0.0 {
                self.jitter.max(1e-10 * self.params.omega)
            } else {
                extra * 10.0
            };
            if extra > MAX_JITTER * self.params.omega * 1.000001 {
                return Err(Error::Numerical(format!(
                    "conditional covariance of {m} new points is not positive definite"
                )));
            }
        };

        let mut chol = DMatrix::zeros(n + m, n + m);
        chol.view_mut((0, 0), (n, n)).copy_from(&self.chol);
        chol.view_mut((n, 0), (m, n)).copy_from(&b.transpose());
        chol.view_mut((n, n), (m, m)).copy_from(&c);
        let mut whitened = self.whitened.clone();
        whitened.extend(standard_normals(m, rng));
        let mut values = self.values.clone();
        values.extend(lower_mul(&chol, &whitened)[n..].iter());
        Ok(GpField {
            points: all,
            values,
            whitened,
            params: self.params,
            chol,
            jitter: self.jitter + extra,
        })
    }

    /// The field restricted to its first `keep` points in factor order.
    pub fn restrict(&self, keep: usize) -> GpField {
        let keep = keep.min(self.len());
        GpField {
            points: self.points[..keep].to_vec(),
            values: self.values[..keep].to_vec(),
            whitened: self.whitened[..keep].to_vec(),
            params: self.params,
            chol: self.chol.view((0, 0), (keep, keep)).into_owned(),
            jitter: self.jitter,
        }
    }

    /// Appends one point with a given value, updating the factor in `O(n^2)`.
    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if !t.is_finite() || self.position(t).is_some() {
            return Err(Error::Usage(format!("cannot add GP point {t}")));
        }
        let b = self.cross_solve(t);
        let c2 = self.params.omega + self.jitter - b.iter().map(|x| x * x).sum::<f64>();
        if c2.is_nan() || c2 <= 0.0 {
            return Err(Error::Numerical(format!("GP point {t} is numerically collinear")));
        }
        let c = c2.sqrt();
        let n = self.len();
        let z = (value - b.iter().zip(&self.whitened).map(|(x, z)| x * z).sum::<f64>()) / c;
        let mut chol = DMatrix::zeros(n + 1, n + 1);
        chol.view_mut((0, 0), (n, n)).copy_from(&self.chol);
        for (j, bj) in b.iter().enumerate() {
            chol[(n, j)] = *bj;
        }
        chol[(n, n)] = c;
        self.chol = chol;
        self.points.push(t);
        self.values.push(value);
        self.whitened.push(z);
        Ok(())
    }

    /// Removes the point at `idx`, downdating the factor in `O(n^2)`.
    pub fn remove(&mut self, idx: usize) {
        let n = self.len();
        assert!(idx < n, "GP point index out of range");
        if idx + 1 == n {
            self.chol = self.chol.view((0, 0), (idx, idx)).into_owned();
            self.points.pop();
            self.values.pop();
            self.whitened.pop();
            return;
        }
        let tail: Vec<f64> = (idx + 1..n).map(|i| self.chol[(i, idx)]).collect();
        let mut chol = self.chol.clone().remove_row(idx).remove_column(idx);
        if !tail.is_empty() {
            let m = tail.len();
            let mut block = chol.view((idx, idx), (m, m)).into_owned();
            rank_one_update(&mut block, tail);
            chol.view_mut((idx, idx), (m, m)).copy_from(&block);
        }
        self.chol = chol;
        self.points.remove(idx);
        self.values.remove(idx);
        let fixed = idx;
        let z_tail = lower_solve(&self.chol, &self.values);
        self.whitened.truncate(fixed);
        self.whitened.extend_from_slice(&z_tail[fixed..]);
    }

    /// Refactorizes from scratch with the current jitter, clearing round-off
    /// accumulated by [`GpField::push`] and [`GpField::remove`].
    pub fn refactor(&mut self) -> Result<()> {
        let fresh = GpField::from_values_with_jitter(
            &self.points,
            &self.values,
            self.params,
            self.jitter,
        )?;
        *self = fresh;
        Ok(())
    }

    /// Whitened part of an under-relaxed proposal:
    /// `sqrt(1 - eps^2) z + eps xi`, `xi` standard normal.
    pub fn propose_whitened<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> Vec<f64> {
        let a = (1.0 - eps * eps).max(0.0).sqrt();
        self.whitened
            .iter()
            .map(|z| {
                let xi: f64 = rng.sample(StandardNormal);
                a * z + eps * xi
            })
            .collect()
    }

    /// Values `L z` for a whitened vector `z`.
    pub fn values_from_whitened(&self, z: &[f64]) -> Vec<f64> {
        lower_mul(&self.chol, z)
    }

    /// Replaces the whitened vector (and hence the values).
    pub fn set_whitened(&mut self, z: Vec<f64>) {
        assert_eq!(z.len(), self.len());
        self.values = lower_mul(&self.chol, &z);
        self.whitened = z;
    }

    /// Replaces one value, keeping the factor.
    pub fn set_value(&mut self, idx: usize, value: f64) {
        self.values[idx] = value;
        let z_tail = lower_solve(&self.chol, &self.values);
        self.whitened[idx..].copy_from_slice(&z_tail[idx..]);
    }

    /// Under-relaxed proposal `sqrt(1 - eps^2) g + eps V` with `V` a prior
    /// draw on the same points.
    pub fn underrelaxed_propose<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> GpField {
        let mut out = self.clone();
        let z = self.propose_whitened(eps, rng);
        out.set_whitened(z);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn params() -> KernelParams {
        KernelParams::new(2.0, 1.5).unwrap()
    }

    #[test]
    fn single_point_is_scalar_normal() {
        let mut r = rng::from_seed(1);
        let n = 20_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let f = GpField::sample_prior(&[0.3], params(), &mut r).unwrap();
            s2 += f.values()[0].powi(2);
        }
        let var = s2 / n as f64;
        assert!((var - 2.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn sample_prior_is_deterministic() {
        let pts = [0.0, 1.0, 2.5];
        let a = GpField::sample_prior(&pts, params(), &mut rng::from_seed(4)).unwrap();
        let b = GpField::sample_prior(&pts, params(), &mut rng::from_seed(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_repeated_points() {
        let r = GpField::sample_prior(&[0.0, 1.0, 0.0], params(), &mut rng::from_seed(1));
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn extend_then_restrict_is_identity() {
        let mut r = rng::from_seed(7);
        let f = GpField::sample_prior(&[0.0, 1.0, 2.0], params(), &mut r).unwrap();
        let g = f.conditional_extend(&[3.0, -1.0], &mut r).unwrap();
        assert_eq!(&g.values()[..3], f.values());
        assert_eq!(g.restrict(3), f);
    }

    #[test]
    fn extended_factor_matches_direct_factor() {
        let mut r = rng::from_seed(7);
        let f = GpField::sample_prior(&[0.0, 1.0, 2.0], params(), &mut r).unwrap();
        let g = f.conditional_extend(&[3.0, 0.5], &mut r).unwrap();
        let direct = GpField::from_values_with_jitter(g.points(), g.values(), params(), g.jitter())
            .unwrap();
        assert!((g.chol() - direct.chol()).abs().max() < 1e-10);
        for (a, b) in g.whitened().iter().zip(direct.whitened()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn push_and_remove_match_refactorization() {
        let mut r = rng::from_seed(9);
        let p = params();
        let mut f = GpField::from_values_with_jitter(&[0.0, 2.0], &[0.1, -0.4], p, 1e-6).unwrap();
        f.push(1.0, 0.3).unwrap();
        f.push(4.0, -1.0).unwrap();
        f.push(-2.0, 0.7).unwrap();
        f.remove(1);
        f.remove(0);
        let direct = GpField::from_values_with_jitter(f.points(), f.values(), p, 1e-6).unwrap();
        assert_eq!(f.points(), &[1.0, 4.0, -2.0]);
        assert!((f.chol() - direct.chol()).abs().max() < 1e-10);
        for (a, b) in f.whitened().iter().zip(direct.whitened()) {
            assert!((a - b).abs() < 1e-8);
        }
        let z = f.propose_whitened(0.3, &mut r);
        f.set_whitened(z);
        let back = lower_solve(f.chol(), f.values());
        for (a, b) in back.iter().zip(f.whitened()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn coincident_extension_has_tiny_variance() {
        let f = GpField::from_values(&[0.0, 1.0], &[0.5, 0.2], params()).unwrap();
        let (mean, cov) = f.conditional(&[1.0 + 1e-9]);
        assert!(cov[(0, 0)] < 10.0 * f.jitter());
        assert!((mean[0] - 0.2).abs() < 1e-4);
    }

    #[test]
    fn joint_and_sequential_extension_agree() {
        // mean and covariance of extending by {a, b} jointly vs {a} then {b}
        let p = params();
        let f = GpField::from_values(&[0.0, 1.0, 2.0], &[0.4, -0.3, 1.1], p).unwrap();
        let (a, b) = (2.7, -0.6);
        let (m_joint, c_joint) = f.conditional(&[a, b]);

        // sequential: g(a) | f, then g(b) | f, g(a). Mean and covariance of the
        // pair follow from the law of total expectation / variance.
        let (ma, ca) = f.conditional(&[a]);
        let (va, vb_given) = {
            let fa = GpField::from_values(&[0.0, 1.0, 2.0, a], &[0.4, -0.3, 1.1, 0.0], p).unwrap();
            let (_, cb) = fa.conditional(&[b]);
            (ca[(0, 0)], cb[(0, 0)])
        };
        // E[g(b) | f, g(a)] is affine in g(a): slope = (m(0+e) - m(0)) / e exactly
        let f0 = GpField::from_values(&[0.0, 1.0, 2.0, a], &[0.4, -0.3, 1.1, 0.0], p).unwrap();
        let f1 = GpField::from_values(&[0.0, 1.0, 2.0, a], &[0.4, -0.3, 1.1, 1.0], p).unwrap();
        let m0 = f0.conditional(&[b]).0[0];
        let slope = f1.conditional(&[b]).0[0] - m0;
        let mean_b = m0 + slope * ma[0];
        let cov_ab = slope * va;
        let var_b = vb_given + slope * slope * va;
        assert!((m_joint[0] - ma[0]).abs() < 1e-10);
        assert!((m_joint[1] - mean_b).abs() < 1e-10);
        assert!((c_joint[(0, 1)] - cov_ab).abs() < 1e-10);
        assert!((c_joint[(1, 1)] - var_b).abs() < 1e-10);
    }

    #[test]
    fn epsilon_limits() {
        let mut r = rng::from_seed(3);
        let f = GpField::sample_prior(&[0.0, 1.0, 2.0], params(), &mut r).unwrap();
        let same = f.underrelaxed_propose(0.0, &mut r);
        assert_eq!(same.values(), f.values());
        let mut r1 = rng::from_seed(5);
        let mut r2 = rng::from_seed(5);
        let fresh = f.underrelaxed_propose(1.0, &mut r1);
        let z: Vec<f64> = standard_normals(3, &mut r2);
        let expect = lower_mul(f.chol(), &z);
        for (a, b) in fresh.values().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
