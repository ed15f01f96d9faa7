use crate::error::{Error, Result};

/// Largest population the exact final-size enumeration accepts.
pub const MAX_ORACLE_POPULATION: usize = 10;

/// Exact final-size distribution of the Markov SIR epidemic with infection
/// rate `beta * x * y` and removal rate `gamma * y`, started from one
/// infective. Entry `k` is `P(final size = k)`; entry 0 is always zero.
pub fn final_size_oracle(population: usize, beta: f64, gamma: f64) -> Result<Vec<f64>> {
    if population == 0 || population > MAX_ORACLE_POPULATION {
        return Err(Error::Usage(format!(
            "final-size enumeration supports 1..={MAX_ORACLE_POPULATION} individuals, got {population}"
        )));
    }
    if !(beta >= 0.0 && beta.is_finite() && gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("invalid rates beta={beta}, gamma={gamma}")));
    }
    let n = population;
    // mass[x][y]: probability the embedded jump chain visits (x, y). Each jump
    // lowers 2x + y by one, so sweeping that potential downward is a
    // topological order.
    let mut mass = vec![vec![0.0f64; n + 1]; n + 1];
    mass[n - 1][1] = 1.0;
    let mut out = vec![0.0; n + 1];
    for level in (0..=2 * n - 1).rev() {
        for x in 0..n {
            if 2 * x > level {
                break;
            }
            let y = level - 2 * x;
            if y > n - x {
                continue;
            }
            let p = mass[x][y];
            if p == 0.0 {
                continue;
            }
            if y == 0 {
                out[n - x] += p;
                continue;
            }
            let infect = beta * x as f64;
            let q = infect / (infect + gamma);
            if x > 0 {
                mass[x - 1][y + 1] += p * q;
            }
            mass[x][y - 1] += p * (1.0 - q);
        }
    }
    Ok(out)
}
