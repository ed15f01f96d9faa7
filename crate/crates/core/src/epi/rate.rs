use crate::error::{Error, Result};
use crate::gp::{link_exp, link_sigmoid, GpField};

/// Link from a latent Gaussian-process value to a non-negative rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// `beta = exp(g)`.
    Exp,
    /// `beta = bound * sigma(g)`, bounded above by `bound`.
    ScaledSigmoid { bound: f64 },
}

impl Link {
    pub fn apply(&self, g: f64) -> f64 {
        match *self {
            Link::Exp => link_exp(g),
            Link::ScaledSigmoid { bound } => bound * link_sigmoid(g),
        }
    }
}

/// A time-varying infection rate `beta(t) >= 0`.
///
/// Grid-based variants are left-continuous step functions: on `(t_{k-1}, t_k]`
/// the rate equals the value attached to `t_k`, so `beta(t-)` at an event time
/// reads the value of the interval the event closes.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFunction {
    Constant(f64),
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
    Transformed { link: Link, grid: Vec<f64>, latent: Vec<f64> },
}

impl RateFunction {
    pub fn constant(beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Parameter(format!("rate must be finite and >= 0, got {beta}")));
        }
        Ok(RateFunction::Constant(beta))
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid, values.len())?;
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Parameter(format!("tabulated rate value {v} is not >= 0")));
        }
        Ok(RateFunction::Tabulated { grid, values })
    }

    /// Tabulates `f` on the given grid.
    pub fn tabulate(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&t| f(t)).collect();
        RateFunction::tabulated(grid, values)
    }

    /// `link(g)` where `g` is the field's values, read off its sorted grid.
    pub fn transformed(link: Link, field: &GpField) -> Result<Self> {
        if let Link::ScaledSigmoid { bound } = link {
            if !(bound >= 0.0 && bound.is_finite()) {
                return Err(Error::Parameter(format!("bounding rate {bound} is not >= 0")));
            }
        }
        let (grid, latent) = field.sorted();
        check_grid(&grid, latent.len())?;
        Ok(RateFunction::Transformed { link, grid, latent })
    }

    /// Interval on which the function is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            RateFunction::Constant(_) => (f64::NEG_INFINITY, f64::INFINITY),
            RateFunction::Tabulated { grid, .. } | RateFunction::Transformed { grid, .. } => {
                (grid[0], grid[grid.len() - 1])
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            RateFunction::Constant(b) => Ok(*b),
            RateFunction::Tabulated { grid, values } => Ok(values[step_index(grid, t)?]),
            RateFunction::Transformed { link, grid, latent } => {
                Ok(link.apply(latent[step_index(grid, t)?]))
            }
        }
    }

    /// `sup_t beta(t)` over the domain, used as the thinning bound.
    pub fn sup(&self) -> f64 {
        match self {
            RateFunction::Constant(b) => *b,
            RateFunction::Tabulated { values, .. } => values.iter().cloned().fold(0.0, f64::max),
            RateFunction::Transformed { link, latent, .. } => {
                let gmax = latent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                link.apply(gmax)
            }
        }
    }
}

fn check_grid(grid: &[f64], n_values: usize) -> Result<()> {
    if grid.is_empty() || grid.len() != n_values {
        return Err(Error::Usage(format!(
            "grid of length {} with {n_values} values",
            grid.len()
        )));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("rate grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn step_index(grid: &[f64], t: f64) -> Result<usize> {
    if !(t >= grid[0] && t <= grid[grid.len() - 1]) {
        return Err(Error::Domain(format!(
            "rate queried at {t}, outside its grid [{}, {}]",
            grid[0],
            grid[grid.len() - 1]
        )));
    }
    Ok(grid.partition_point(|&g| g < t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_is_left_continuous() {
        let f = RateFunction::tabulated(vec![0.0, 1.0, 2.0], vec![5.0, 1.0, 2.0]).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 5.0);
        assert_eq!(f.eval(0.5).unwrap(), 1.0);
        assert_eq!(f.eval(1.0).unwrap(), 1.0);
        assert_eq!(f.eval(1.0001).unwrap(), 2.0);
        assert_eq!(f.eval(2.0).unwrap(), 2.0);
        assert!(matches!(f.eval(2.5), Err(Error::Domain(_))));
        assert!(matches!(f.eval(-0.1), Err(Error::Domain(_))));
        assert_eq!(f.sup(), 5.0);
    }

    #[test]
    fn rejects_negative_or_unsorted() {
        assert!(RateFunction::constant(-1.0).is_err());
        assert!(RateFunction::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(RateFunction::tabulated(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(RateFunction::tabulated(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn sigmoid_link_is_bounded() {
        let l = Link::ScaledSigmoid { bound: 2.0 };
        assert_eq!(l.apply(0.0), 1.0);
        assert!(l.apply(50.0) <= 2.0);
        assert_eq!(Link::Exp.apply(0.0), 1.0);
    }
}
