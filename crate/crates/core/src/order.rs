//! Selected order statistics without a full sort.

/// Fills `lower[i] = X_(k)` and `upper[i] = X_(n−k+1)` for each `k = scales[i]`.
///
/// `scales` must be strictly increasing with every entry in `1..=n/2`.
/// `values` is reordered in place (the multiset is unchanged). When
/// `sorted` is true the values are read directly.
pub fn select_extremes(values: &mut [f64], sorted: bool, scales: &[usize], lower: &mut [f64], upper: &mut [f64]) {
    let n = values.len();
    debug_assert!(scales.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(scales.last().is_none_or(|&k| k >= 1 && 2 * k <= n));
    if sorted {
        for (i, &k) in scales.iter().enumerate() {
            lower[i] = values[k - 1];
            upper[i] = values[n - k];
        }
        return;
    }
    // Largest scale first: each selection narrows the slice the next one
    // has to search.
    let mut lo_end = n;
    let mut hi_start = 0;
    for (i, &k) in scales.iter().enumerate().rev() {
        let (_, &mut x, _) = values[..lo_end].select_nth_unstable_by(k - 1, f64::total_cmp);
        lower[i] = x;
        lo_end = k - 1;
        if hi_start == 0 {
            hi_start = k;
        }
        let idx = n - k;
        let (_, &mut y, _) = values[hi_start..].select_nth_unstable_by(idx - hi_start, f64::total_cmp);
        upper[i] = y;
        hi_start = idx + 1;
    }
}

/// Index of the `⌈(1−u)·B⌉`-th order statistic (1-based rank, returned 0-based)
/// among `len` sorted values.
pub fn upper_quantile_index(len: usize, level: f64) -> usize {
    let target = (1.0 - level) * len as f64;
    let nearest = target.round();
    // (1 − 0.05)·10⁵ evaluates to 95000.00000000001; snap representation noise
    let rank = if (target - nearest).abs() <= 1e-9 * len as f64 {
        nearest
    } else {
        target.ceil()
    };
    (rank as usize).clamp(1, len) - 1
}

/// The `⌈(1−u)·B⌉`-th order statistic of an ascending slice.
pub fn upper_quantile(sorted: &[f64], level: f64) -> f64 {
    sorted[upper_quantile_index(sorted.len(), level)]
}
