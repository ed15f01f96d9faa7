/// Logistic function `1 / (1 + exp(-z))`, evaluated without overflow.
pub fn link_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln sigma(z)`, accurate in both tails.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn link_exp(z: f64) -> f64 {
    z.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(link_sigmoid(0.0), 0.5);
        assert_eq!(link_exp(0.0), 1.0);
        assert_eq!(link_sigmoid(-1000.0), 0.0);
        assert_eq!(link_sigmoid(1000.0), 1.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sigmoid_symmetry(z in -40.0f64..40.0) {
            prop_assert!((link_sigmoid(z) + link_sigmoid(-z) - 1.0).abs() < 1e-15);
            prop_assert!((log_sigmoid(z) - link_sigmoid(z).ln()).abs() < 1e-12);
        }

        #[test]
        fn exp_is_increasing(a in -50.0f64..50.0, d in 1e-6f64..10.0) {
            prop_assert!(link_exp(a + d) > link_exp(a));
        }
    }
}
