use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Smallest and largest diagonal jitter tried, as multiples of `omega`.
pub const MIN_JITTER: f64 = 1e-10;
pub const MAX_JITTER: f64 = 1e-6;

/// Squared-exponential kernel `omega * exp(-((x - y) / l)^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub omega: f64,
    pub length_scale: f64,
}

impl KernelParams {
    pub fn new(omega: f64, length_scale: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Parameter(format!("kernel variance must be positive, got {omega}")));
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "kernel length scale must be positive, got {length_scale}"
            )));
        }
        Ok(KernelParams {
            omega,
            length_scale,
        })
    }

    #[inline]
    pub fn cov(&self, x: f64, y: f64) -> f64 {
        // (x - y)^2 == (y - x)^2 bitwise, so the matrix is exactly symmetric
        let d = (x - y) / self.length_scale;
        self.omega * (-0.5 * d * d).exp()
    }
}

pub fn kernel_matrix(points: &[f64], params: &KernelParams) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| params.cov(points[i], points[j]))
}

/// Lower Cholesky factor of `k + jitter * I`, escalating the jitter tenfold
/// from `MIN_JITTER * omega` up to `MAX_JITTER * omega`. Returns the factor
/// and the jitter that worked.
pub fn cholesky_with_jitter(k: &DMatrix<f64>, omega: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut rel = MIN_JITTER;
    while rel <= MAX_JITTER * 1.000001 {
        let jitter = rel * omega;
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Ok((c.unpack(), jitter));
        }
        rel *= 10.0;
    }
    Err(Error::Numerical(format!(
        "kernel matrix of size {} is not positive definite even with jitter {}",
        k.nrows(),
        MAX_JITTER * omega
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let p = KernelParams::new(10.0, 6.0).unwrap();
        assert_eq!(p.cov(3.0, 3.0), 10.0);
        assert!((p.cov(0.0, 6.0) - 10.0 * (-0.5f64).exp()).abs() < 1e-12);
        assert!((p.cov(0.0, 6.0) - 6.0653).abs() < 1e-4);
        assert_eq!(p.cov(0.0, 1e4), 0.0);
    }

    #[test]
    fn symmetric_and_factorizable() {
        let p = KernelParams::new(5.0, 14.0).unwrap();
        let pts: Vec<f64> = (0..120).map(|k| k as f64 * 0.7 - 3.1).collect();
        let k = kernel_matrix(&pts, &p);
        assert_eq!(k, k.transpose());
        let (l, jitter) = cholesky_with_jitter(&k, p.omega).unwrap();
        assert!(jitter <= 1e-6 * p.omega);
        let recon = &l * l.transpose();
        let err = (&recon - &k).abs().max();
        assert!(err <= 2.0 * jitter, "{err}");
    }

    #[test]
    fn invalid_params() {
        assert!(KernelParams::new(0.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, -1.0).is_err());
    }
}
