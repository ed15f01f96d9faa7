use crate::epi::RemovalData;
use crate::error::{Error, Result};
use crate::gp::log_sigmoid;
use crate::trajectory::{path_terms, PathTerms};

/// Latent state of the continuous-time sigmoidal-GP model.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinnedState {
    pub initial: f64,
    /// Non-initial infection times and their GP values.
    pub infections: Vec<f64>,
    pub g_infections: Vec<f64>,
    /// Thinned points of the bounding process and their GP values.
    pub thinned: Vec<f64>,
    pub g_thinned: Vec<f64>,
    pub beta_star: f64,
    pub gamma: f64,
}

impl ThinnedState {
    pub fn terms(&self, data: &RemovalData) -> Option<PathTerms> {
        let mut inf = Vec::with_capacity(self.infections.len() + 1);
        inf.push(self.initial);
        inf.extend_from_slice(&self.infections);
        if self.infections.iter().chain(&self.thinned).any(|&t| t <= self.initial) {
            return None;
        }
        path_terms(&inf, data.times(), &self.thinned, data.population())
    }
}

pub(crate) fn loglik_from_terms(
    p: &PathTerms,
    beta_star: f64,
    gamma: f64,
    sum_log_sig_inf: f64,
    sum_log_sig_thin: f64,
) -> f64 {
    let points = p.infections + p.thinned;
    let mut ll = p.ln_xy_infections + p.ln_xy_thinned + p.ln_y_removals
        + sum_log_sig_inf
        + sum_log_sig_thin
        - beta_star * p.int_xy
        - gamma * p.int_y;
    if points > 0 {
        ll += points as f64 * beta_star.ln();
    }
    if p.removals > 0 {
        ll += p.removals as f64 * gamma.ln();
    }
    ll
}

/// Log of the augmented likelihood with thinned points: retained infections
/// contribute `beta* X Y sigma(g)`, thinned points `beta* X Y sigma(-g)`,
/// removals `gamma Y`, and the exponent is `-int (beta* X Y + gamma Y) dt`
/// over `[i_1, r_n]`. `-inf` for impossible configurations.
pub fn sir_thinned_augmented_loglik(state: &ThinnedState, data: &RemovalData) -> Result<f64> {
    if state.infections.len() != state.g_infections.len()
        || state.thinned.len() != state.g_thinned.len()
    {
        return Err(Error::Usage("every point needs one GP value".into()));
    }
    Ok(match state.terms(data) {
        None => f64::NEG_INFINITY,
        Some(p) => loglik_from_terms(
            &p,
            state.beta_star,
            state.gamma,
            state.g_infections.iter().map(|&g| log_sigmoid(g)).sum(),
            state.g_thinned.iter().map(|&g| log_sigmoid(-g)).sum(),
        ),
    })
}
