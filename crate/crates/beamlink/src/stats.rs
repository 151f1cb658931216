//! Descriptive statistics shared by object enrichment and fingerprint cells.
//!
//! Quantiles interpolate linearly between the two closest ranks: for `n`
//! sorted values the quantile `q` sits at position `h = (n - 1) * q`, and the
//! result is `s[floor(h)] + (s[ceil(h)] - s[floor(h)]) * (h - floor(h))`.
//! The sample standard deviation uses the `n - 1` denominator and is defined
//! as zero when fewer than two values are present.

/// Arithmetic mean. Empty input is a caller bug.
pub fn mean(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator), zero for n < 2.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Quantile of an already sorted slice, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
}

/// Quantile of an unsorted slice; copies and sorts internally.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("quantile input must not contain NaN"));
    quantile_sorted(&sorted, q)
}

/// The five-number summary used throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescriptiveStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Summarises `values`; `None` when empty.
pub fn describe(values: &[f64]) -> Option<DescriptiveStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("stats input must not contain NaN"));
    Some(DescriptiveStats {
        count: sorted.len(),
        mean: mean(&sorted),
        std: sample_std(&sorted),
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

#[cfg(test)]
mod test {
    use super::*;

    #[test]
    fn four_value_quartiles() {
        let values = [10.0, 20.0, 30.0, 40.0];
        assert_eq!(mean(&values), 25.0);
        assert_eq!(quantile(&values, 0.5), 25.0);
        assert_eq!(quantile(&values, 0.25), 17.5);
        assert_eq!(quantile(&values, 0.75), 32.5);
    }

    #[test]
    fn single_value_summary() {
        let s = describe(&[42.0]).unwrap();
        assert_eq!(s.count, 1);
        assert_eq!(s.mean, 42.0);
        assert_eq!(s.median, 42.0);
        assert_eq!(s.q1, 42.0);
        assert_eq!(s.q3, 42.0);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn describe_empty_is_none() {
        assert!(describe(&[]).is_none());
    }

    #[test]
    fn std_matches_two_point_case() {
        // For {0, 2}: mean 1, sum of squares 2, n-1 = 1.
        assert_eq!(sample_std(&[0.0, 2.0]), 2.0_f64.sqrt());
    }

    #[test]
    fn quantile_order_independent() {
        let a = [3.0, 1.0, 2.0, 5.0, 4.0];
        let b = [5.0, 4.0, 3.0, 2.0, 1.0];
        for q in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
            assert_eq!(quantile(&a, q), quantile(&b, q));
        }
    }
}
