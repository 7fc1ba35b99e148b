//! Random test matrices with controlled structure.

use std::collections::BTreeMap;

use rand::Rng;

/// Random `nrows x ncols` triplets; each position is kept with probability
/// `density`, values uniform in `[-1, 1)`.
pub fn random_sparse<R: Rng>(
    rng: &mut R,
    nrows: usize,
    ncols: usize,
    density: f64,
) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for r in 0..nrows {
        for c in 0..ncols {
            if rng.random::<f64>() < density {
                out.push((r, c, rng.random_range(-1.0..1.0)));
            }
        }
    }
    out
}

fn off_diagonal_symmetric<R: Rng>(
    rng: &mut R,
    n: usize,
    density: f64,
) -> BTreeMap<(usize, usize), f64> {
    let mut map = BTreeMap::new();
    for r in 0..n {
        for c in 0..r {
            if rng.random::<f64>() < density {
                let v = rng.random_range(-1.0..1.0);
                map.insert((r, c), v);
                map.insert((c, r), v);
            }
        }
    }
    map
}

fn row_abs_sums(n: usize, entries: &BTreeMap<(usize, usize), f64>) -> Vec<f64> {
    let mut sums = vec![0.0; n];
    for (&(r, _), v) in entries {
        sums[r] += v.abs();
    }
    sums
}

/// Random symmetric positive definite matrix whose 2-norm condition number
/// is at most `max_condition` (by Gershgorin's theorem).
///
/// Diagonal entries are `R_i + shift` where `R_i` is the off-diagonal row
/// sum and `shift = (2 R_max) / (max_condition - 1)` scaled by a random
/// factor in `[1, 10]`, so every eigenvalue lies in
/// `[shift, 2 R_max + shift]`.
pub fn random_spd<R: Rng>(
    rng: &mut R,
    n: usize,
    density: f64,
    max_condition: f64,
) -> Vec<(usize, usize, f64)> {
    assert!(max_condition > 1.0);
    let mut map = off_diagonal_symmetric(rng, n, density);
    let sums = row_abs_sums(n, &map);
    let r_max = sums.iter().copied().fold(0.0, f64::max).max(1e-3);
    let shift = 2.0 * r_max / (max_condition - 1.0) * rng.random_range(1.0..10.0);
    for (i, s) in sums.iter().enumerate() {
        map.insert((i, i), s + shift);
    }
    map.into_iter().map(|((r, c), v)| (r, c, v)).collect()
}

/// Random nonsymmetric, strictly diagonally dominant (hence nonsingular)
/// matrix.
pub fn random_diag_dominant<R: Rng>(
    rng: &mut R,
    n: usize,
    density: f64,
) -> Vec<(usize, usize, f64)> {
    let mut map: BTreeMap<(usize, usize), f64> = random_sparse(rng, n, n, density)
        .into_iter()
        .filter(|&(r, c, _)| r != c)
        .map(|(r, c, v)| ((r, c), v))
        .collect();
    let sums = row_abs_sums(n, &map);
    for (i, s) in sums.iter().enumerate() {
        let margin = rng.random_range(0.5..2.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        map.insert((i, i), sign * (s + margin));
    }
    map.into_iter().map(|((r, c), v)| (r, c, v)).collect()
}

/// Upper bound on the condition number of a symmetric matrix from its
/// Gershgorin discs, or `None` if a disc touches zero.
pub fn gershgorin_condition_bound(n: usize, entries: &[(usize, usize, f64)]) -> Option<f64> {
    let mut diag = vec![0.0; n];
    let mut radius = vec![0.0; n];
    for &(r, c, v) in entries {
        if r == c {
            diag[r] += v;
        } else {
            radius[r] += v.abs();
        }
    }
    let lo = diag
        .iter()
        .zip(&radius)
        .map(|(d, r)| d - r)
        .fold(f64::INFINITY, f64::min);
    let hi = diag
        .iter()
        .zip(&radius)
        .map(|(d, r)| d + r)
        .fold(f64::NEG_INFINITY, f64::max);
    (lo > 0.0).then(|| hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spd_condition_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 5, 40, 120] {
            let e = random_spd(&mut rng, n, 0.1, 1e4);
            let bound = gershgorin_condition_bound(n, &e).unwrap();
            assert!(bound <= 1e4 * (1.0 + 1e-12), "{bound}");
            for &(r, c, v) in &e {
                let mirrored = e.iter().find(|&&(r2, c2, _)| r2 == c && c2 == r).unwrap();
                assert_eq!(mirrored.2, v);
            }
        }
    }

    #[test]
    fn diag_dominant_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let e = random_diag_dominant(&mut rng, n, 0.2);
        for i in 0..n {
            let d: f64 = e
                .iter()
                .filter(|x| x.0 == i && x.1 == i)
                .map(|x| x.2.abs())
                .sum();
            let off: f64 = e
                .iter()
                .filter(|x| x.0 == i && x.1 != i)
                .map(|x| x.2.abs())
                .sum();
            assert!(d > off);
        }
    }
}
