//! Piecewise-constant `(X(t), Y(t))` paths of continuous-time epidemics built
//! from latent infection times and observed removals, with the exact
//! interval sums that enter the augmented likelihoods.

/// Sufficient statistics of a path over `[i_1, T]`, `T` the last removal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathTerms {
    /// Infections other than the initial one.
    pub infections: usize,
    pub removals: usize,
    pub thinned: usize,
    /// `sum ln(X(i-) Y(i-))` over non-initial infections.
    pub ln_xy_infections: f64,
    /// `sum ln Y(r-)` over removals.
    pub ln_y_removals: f64,
    /// `sum ln(X(s-) Y(s-))` over thinned points.
    pub ln_xy_thinned: f64,
    pub int_xy: f64,
    pub int_y: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Infection,
    Thinned,
    Removal,
}

/// One interval of constant counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub x: usize,
    pub y: usize,
}

fn merged(infections: &[f64], removals: &[f64], thinned: &[f64]) -> Vec<(f64, Kind)> {
    let mut ev: Vec<(f64, Kind)> = infections
        .iter()
        .map(|&t| (t, Kind::Infection))
        .chain(removals.iter().map(|&t| (t, Kind::Removal)))
        .chain(thinned.iter().map(|&t| (t, Kind::Thinned)))
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ev
}

/// Walks the path defined by all infection times (initial one included, in
/// any order), removal times and thinned points. Returns `None` when the path
/// is impossible: an infection or thinned point with `X(t-) Y(t-) = 0`, a
/// removal with `Y(t-) = 0`, more infections than `population`, or any point
/// after the last removal.
pub fn path_terms(
    infections: &[f64],
    removals: &[f64],
    thinned: &[f64],
    population: usize,
) -> Option<PathTerms> {
    if infections.is_empty() || removals.is_empty() || infections.len() > population {
        return None;
    }
    let ev = merged(infections, removals, thinned);
    if ev[0].1 != Kind::Infection {
        return None;
    }
    let end = removals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = PathTerms::default();
    let (mut x, mut y) = (population - 1, 1usize);
    let mut prev = ev[0].0;
    for &(t, kind) in &ev[1..] {
        if t > end {
            return None;
        }
        let dt = t - prev;
        out.int_xy += (x * y) as f64 * dt;
        out.int_y += y as f64 * dt;
        prev = t;
        match kind {
            Kind::Infection => {
                if x == 0 || y == 0 {
                    return None;
                }
                out.ln_xy_infections += ((x * y) as f64).ln();
                out.infections += 1;
                x -= 1;
                y += 1;
            }
            Kind::Thinned => {
                if x == 0 || y == 0 {
                    return None;
                }
                out.ln_xy_thinned += ((x * y) as f64).ln();
                out.thinned += 1;
            }
            Kind::Removal => {
                if y == 0 {
                    return None;
                }
                out.ln_y_removals += (y as f64).ln();
                out.removals += 1;
                y -= 1;
            }
        }
    }
    Some(out)
}

/// Constant-count intervals between `i_1` and the last removal. `None` for
/// impossible paths, as in [`path_terms`].
pub fn segments(infections: &[f64], removals: &[f64], population: usize) -> Option<Vec<Segment>> {
    path_terms(infections, removals, &[], population)?;
    let ev = merged(infections, removals, &[]);
    let (mut x, mut y) = (population - 1, 1usize);
    let mut out = Vec::with_capacity(ev.len());
    let mut prev = ev[0].0;
    for &(t, kind) in &ev[1..] {
        if t > prev {
            out.push(Segment {
                start: prev,
                end: t,
                x,
                y,
            });
        }
        prev = t;
        match kind {
            Kind::Infection => {
                x -= 1;
                y += 1;
            }
            _ => y -= 1,
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_person_example() {
        let p = path_terms(&[0.0, 1.0], &[2.0, 3.0], &[], 2).unwrap();
        assert_eq!(p.int_xy, 1.0);
        assert_eq!(p.int_y, 4.0);
        assert_eq!(p.ln_xy_infections, 0.0);
        assert_eq!(p.ln_y_removals, 2f64.ln());
    }

    #[test]
    fn infection_after_epidemic_died_out_is_impossible() {
        assert!(path_terms(&[0.0, 2.5], &[2.0, 3.0], &[], 3).is_none());
        assert!(path_terms(&[0.0, 1.0], &[2.0, 3.0], &[2.5], 2).is_none());
        assert!(path_terms(&[0.0], &[1.0, 2.0], &[], 3).is_none());
    }

    fn riemann(infections: &[f64], removals: &[f64], n: usize, dt: f64) -> (f64, f64) {
        let mut inf = infections.to_vec();
        inf.sort_by(f64::total_cmp);
        let end = removals.iter().cloned().fold(f64::MIN, f64::max);
        let (mut sxy, mut sy) = (0.0, 0.0);
        let steps = ((end - inf[0]) / dt).round() as usize;
        for k in 0..steps {
            let t = inf[0] + (k as f64 + 0.5) * dt;
            let i = inf.iter().filter(|&&s| s <= t).count();
            let r = removals.iter().filter(|&&s| s <= t).count();
            let (x, y) = (n - i, i - r);
            sxy += (x * y) as f64 * dt;
            sy += y as f64 * dt;
        }
        (sxy, sy)
    }

    #[test]
    fn integrals_match_riemann_sums() {
        let inf = [0.0, 0.37, 1.21, 1.9];
        let rem = [1.5, 2.2, 3.15, 4.0];
        let p = path_terms(&inf, &rem, &[], 6).unwrap();
        let (sxy, sy) = riemann(&inf, &rem, 6, 1e-4);
        assert!((p.int_xy - sxy).abs() / sxy < 1e-6);
        assert!((p.int_y - sy).abs() / sy < 1e-6);
    }

    proptest! {
        #[test]
        fn segment_sums_equal_path_integrals(
            gaps in proptest::collection::vec(0.01f64..2.0, 3..12),
        ) {
            // alternate infection / removal pattern that keeps Y >= 1
            let mut t = 0.0;
            let mut inf = vec![0.0];
            let mut rem = vec![];
            for (k, g) in gaps.iter().enumerate() {
                t += g;
                if k % 2 == 0 { inf.push(t) } else { rem.push(t) }
            }
            while rem.len() < inf.len() {
                t += 0.5;
                rem.push(t);
            }
            let p = path_terms(&inf, &rem, &[], 20).unwrap();
            let segs = segments(&inf, &rem, 20).unwrap();
            let ixy: f64 = segs.iter().map(|s| (s.x * s.y) as f64 * (s.end - s.start)).sum();
            prop_assert!((ixy - p.int_xy).abs() < 1e-9);
            prop_assert!(segs.iter().all(|s| s.y >= 1));
        }
    }
}
