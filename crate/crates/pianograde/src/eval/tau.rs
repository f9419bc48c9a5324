//! Stuart's tau-c rank correlation for tied ordinal grades.

use crate::error::{Error, Result};

/// Kendall tau-c between two rankings with ties allowed.
///
/// With `n_c` concordant pairs, `n_d` discordant pairs, and
/// `m = min(#distinct a, #distinct b)`, returns
/// `2 m (n_c - n_d) / (n^2 (m - 1))`.
pub fn kendall_tau_c(rank_a: &[i64], rank_b: &[i64]) -> Result<f64> {
    if rank_a.len() != rank_b.len() {
        return Err(Error::Domain(format!(
            "rank length mismatch: {} vs {}",
            rank_a.len(),
            rank_b.len()
        )));
    }
    let n = rank_a.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 items, got {n}"
        )));
    }
    let m = distinct(rank_a).min(distinct(rank_b));
    if m < 2 {
        return Err(Error::UndefinedCorrelation(
            "a ranking is constant".into(),
        ));
    }

    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = rank_a[i].cmp(&rank_a[j]) as i64;
            let db = rank_b[i].cmp(&rank_b[j]) as i64;
            match da * db {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }

    let n = n as f64;
    let m = m as f64;
    Ok(2.0 * m * (concordant - discordant) as f64 / (n * n * (m - 1.0)))
}

fn distinct(values: &[i64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_concordance_tie_free_is_one() {
        let a: Vec<i64> = (1..=20).collect();
        assert!((kendall_tau_c(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_discordance_tie_free_is_minus_one() {
        let a: Vec<i64> = (1..=20).collect();
        let b: Vec<i64> = (1..=20).rev().collect();
        assert!((kendall_tau_c(&a, &b).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tied_example_from_pair_enumeration() {
        // n_c = 4, n_d = 0, m = 3 => 2 * 3 * 4 / (16 * 2) = 0.75
        let a = [1, 1, 2, 3];
        let b = [1, 2, 2, 3];
        assert!((kendall_tau_c(&a, &b).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn constant_ranking_is_undefined() {
        let a = [3, 3, 3, 3];
        let b = [1, 2, 3, 4];
        assert!(matches!(
            kendall_tau_c(&a, &b),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn length_mismatch_is_domain_error() {
        assert!(matches!(
            kendall_tau_c(&[1, 2], &[1, 2, 3]),
            Err(Error::Domain(_))
        ));
    }

    proptest! {
        #[test]
        fn symmetric_in_arguments(
            pairs in proptest::collection::vec((1i64..=11, 1i64..=11), 2..60)
        ) {
            let a: Vec<i64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<i64> = pairs.iter().map(|p| p.1).collect();
            match (kendall_tau_c(&a, &b), kendall_tau_c(&b, &a)) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "symmetry of definedness violated"),
            }
        }

        #[test]
        fn invariant_under_monotone_relabeling(
            pairs in proptest::collection::vec((1i64..=11, 1i64..=11), 2..60),
            scale in 1i64..5,
            offset in -10i64..10,
        ) {
            let a: Vec<i64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<i64> = pairs.iter().map(|p| p.1).collect();
            // x -> scale * x^2 + offset is strictly monotone on positive grades.
            let a2: Vec<i64> = a.iter().map(|&x| scale * x * x + offset).collect();
            match (kendall_tau_c(&a, &b), kendall_tau_c(&a2, &b)) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn bounded_in_unit_interval(
            pairs in proptest::collection::vec((1i64..=11, 1i64..=11), 2..80)
        ) {
            let a: Vec<i64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<i64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(tau) = kendall_tau_c(&a, &b) {
                prop_assert!((-1.0..=1.0).contains(&tau));
            }
        }
    }
}
