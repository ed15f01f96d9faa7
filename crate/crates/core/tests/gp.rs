use approx::assert_relative_eq;

use epinp::gp::{GpField, KernelParams, PrefixGp};
use epinp::rng::from_seed;

fn se(omega: f64, l: f64, d: f64) -> f64 {
    omega * (-d * d / (2.0 * l * l)).exp()
}

#[test]
fn conditional_on_two_points_matches_the_two_by_two_formula() {
    let (omega, l) = (1.7, 1.3);
    let k = KernelParams::new(omega, l).unwrap();
    let (x1, x2, v1, v2, t) = (0.0, 1.1, 0.4, -0.9, 0.6);
    let field = GpField::from_values(&[x1, x2], &[v1, v2], k).unwrap();
    let (a, b, c) = (omega, se(omega, l, x2 - x1), omega);
    let det = a * c - b * b;
    // K^-1 by hand
    let inv = [[c / det, -b / det], [-b / det, a / det]];
    let kt = [se(omega, l, t - x1), se(omega, l, t - x2)];
    let w = [
        kt[0] * inv[0][0] + kt[1] * inv[1][0],
        kt[0] * inv[0][1] + kt[1] * inv[1][1],
    ];
    let mean = w[0] * v1 + w[1] * v2;
    let var = omega - (w[0] * kt[0] + w[1] * kt[1]);
    let (m, v) = field.conditional_at(t);
    assert_relative_eq!(m, mean, max_relative = 1e-6);
    assert_relative_eq!(v, var, max_relative = 1e-5);
    assert_relative_eq!(field.predict_mean(&[t])[0], mean, max_relative = 1e-6);
}

#[test]
fn prefix_values_have_kernel_covariance() {
    let (omega, l) = (2.0, 3.0);
    let gp = PrefixGp::new(10, 0, KernelParams::new(omega, l).unwrap()).unwrap();
    let mut rng = from_seed(5);
    let n = 40_000;
    // factor order: index 0 is day 10, index 4 is day 6
    let (mut s00, mut s04, mut s44) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let g = gp.values(&gp.standard_normals(&mut rng), gp.len());
        s00 += g[0] * g[0];
        s04 += g[0] * g[4];
        s44 += g[4] * g[4];
    }
    let n = n as f64;
    // Monte Carlo error of a covariance estimate is about omega * sqrt(2 / n)
    let tol = 4.0 * omega * (2.0 / n).sqrt();
    assert!((s00 / n - omega).abs() < tol);
    assert!((s44 / n - omega).abs() < tol);
    assert!((s04 / n - se(omega, l, 4.0)).abs() < tol);
}

#[test]
fn prefix_extension_keeps_the_active_values() {
    let gp = PrefixGp::new(20, -30, KernelParams::new(1.0, 4.0).unwrap()).unwrap();
    let z = gp.standard_normals(&mut from_seed(6));
    let short = gp.values(&z, 8);
    let long = gp.values(&z, 30);
    assert_eq!(short[..], long[..8]);
}
