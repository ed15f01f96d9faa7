use crate::error::{Error, Result};
use crate::gp::log_sigmoid;

/// Log-density of a sigmoidal-GP Cox process on `[0, horizon]` augmented with
/// its thinned points:
/// `(M + K) ln lambda* - lambda* T + sum ln sigma(g_k) + sum ln sigma(-g_m)`.
pub fn sgcp_augmented_loglik(
    observed: &[f64],
    g_observed: &[f64],
    thinned: &[f64],
    g_thinned: &[f64],
    bound: f64,
    horizon: f64,
) -> Result<f64> {
    if observed.len() != g_observed.len() || thinned.len() != g_thinned.len() {
        return Err(Error::Usage("every point needs one GP value".into()));
    }
    if !(bound >= 0.0 && bound.is_finite() && horizon >= 0.0) {
        return Err(Error::Parameter(format!("bad bound {bound} or horizon {horizon}")));
    }
    if let Some(t) = observed
        .iter()
        .chain(thinned)
        .find(|&&t| !(0.0..=horizon).contains(&t))
    {
        return Err(Error::Usage(format!("point {t} outside [0, {horizon}]")));
    }
    let count = observed.len() + thinned.len();
    let mut ll = -bound * horizon;
    if count > 0 {
        ll += count as f64 * bound.ln();
    }
    ll += g_observed.iter().map(|&g| log_sigmoid(g)).sum::<f64>();
    ll += g_thinned.iter().map(|&g| log_sigmoid(-g)).sum::<f64>();
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(sgcp_augmented_loglik(&[], &[], &[], &[], 2.0, 3.0).unwrap(), -6.0);
        let ll = sgcp_augmented_loglik(&[0.4], &[0.0], &[], &[], 1.0, 1.0).unwrap();
        assert!((ll - (-1.0 + 0.5f64.ln())).abs() < 1e-15);
        assert!(sgcp_augmented_loglik(&[1.5], &[0.0], &[], &[], 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn swapping_roles_with_negated_field_is_invariant(
            a in proptest::collection::vec((0.0f64..5.0, -4.0f64..4.0), 0..6),
            b in proptest::collection::vec((0.0f64..5.0, -4.0f64..4.0), 0..6),
            bound in 0.1f64..3.0,
        ) {
            let (s, gs): (Vec<f64>, Vec<f64>) = a.into_iter().unzip();
            let (m, gm): (Vec<f64>, Vec<f64>) = b.into_iter().unzip();
            let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
            let x = sgcp_augmented_loglik(&s, &gs, &m, &gm, bound, 5.0).unwrap();
            let y = sgcp_augmented_loglik(&m, &neg(&gm), &s, &neg(&gs), bound, 5.0).unwrap();
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_bin_marginalization() {
        // Piecewise-constant g on [0, 1) and [1, 2]; one observed point in
        // each bin. Summing the augmented density over thinned configurations
        // (counts m1, m2 with positions integrated out: lengths^m / m!) must
        // give the inhomogeneous Poisson likelihood
        // lambda(s1) lambda(s2) exp(-int lambda).
        let (bound, g1, g2) = (1.7, 0.8, -1.1);
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut total = 0.0;
        let mut fact = [1.0f64; 40];
        for k in 1..40 {
            fact[k] = fact[k - 1] * k as f64;
        }
        for m1 in 0..40usize {
            for m2 in 0..40usize {
                let thinned: Vec<f64> = (0..m1)
                    .map(|k| (k as f64 + 0.5) / (m1 as f64 + 1.0))
                    .chain((0..m2).map(|k| 1.0 + (k as f64 + 0.5) / (m2 as f64 + 1.0)))
                    .collect();
                let gt: Vec<f64> = (0..m1).map(|_| g1).chain((0..m2).map(|_| g2)).collect();
                let ll = sgcp_augmented_loglik(&[0.3, 1.6], &[g1, g2], &thinned, &gt, bound, 2.0)
                    .unwrap();
                // bins have unit length, so the position volume is 1 / m!
                total += ll.exp() / (fact[m1] * fact[m2]);
            }
        }
        let lam1 = bound * sig(g1);
        let lam2 = bound * sig(g2);
        let expect = lam1 * lam2 * (-(lam1 + lam2)).exp();
        assert!((total - expect).abs() / expect < 1e-3, "{total} vs {expect}");
    }
}
