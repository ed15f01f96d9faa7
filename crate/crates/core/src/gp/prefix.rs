use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::kernel::{cholesky_with_jitter, kernel_matrix, KernelParams};
use super::GpField;
use crate::error::{Error, Result};

/// A GP on the integer days `top, top - 1, ..., floor`, factored once in that
/// (reverse) order.
///
/// Because the factor is lower triangular, the values on the `m` latest days
/// depend only on the first `m` whitened coordinates. Activating more days
/// further back is therefore a draw from the GP conditional given the days
/// already active, and dropping them is a restriction, without refactoring.
#[derive(Debug, Clone)]
pub struct PrefixGp {
    top: i64,
    floor: i64,
    params: KernelParams,
    chol: DMatrix<f64>,
    jitter: f64,
}

impl PrefixGp {
    pub fn new(top: i64, floor: i64, params: KernelParams) -> Result<Self> {
        if floor > top {
            return Err(Error::Usage(format!("empty day range {floor}..={top}")));
        }
        let days: Vec<f64> = (floor..=top).rev().map(|d| d as f64).collect();
        let (chol, jitter) = cholesky_with_jitter(&kernel_matrix(&days, &params), params.omega)?;
        Ok(PrefixGp {
            top,
            floor,
            params,
            chol,
            jitter,
        })
    }

    pub fn top(&self) -> i64 {
        self.top
    }

    pub fn floor(&self) -> i64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        (self.top - self.floor + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Position of `day` in factor order.
    pub fn index(&self, day: i64) -> Option<usize> {
        (day >= self.floor && day <= self.top).then(|| (self.top - day) as usize)
    }

    pub fn day(&self, index: usize) -> i64 {
        self.top - index as i64
    }

    /// Values on the `m` latest days, `L[..m, ..m] z[..m]`, in factor order.
    pub fn values(&self, z: &[f64], m: usize) -> Vec<f64> {
        let m = m.min(self.len()).min(z.len());
        let mut out = vec![0.0; m];
        for (j, &zj) in z.iter().enumerate().take(m) {
            for (i, o) in out.iter_mut().enumerate().skip(j) {
                *o += self.chol[(i, j)] * zj;
            }
        }
        out
    }

    pub fn standard_normals<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.len()).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// The active part as a [`GpField`] (days in factor order).
    pub fn to_field(&self, z: &[f64], m: usize) -> Result<GpField> {
        let m = m.min(self.len());
        let days: Vec<f64> = (0..m).map(|i| self.day(i) as f64).collect();
        GpField::from_values(&days, &self.values(z, m), self.params)
    }
}
