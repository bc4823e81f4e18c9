//! Small statistical helpers shared by the simulators, tests and the
//! experiment harness: seed derivation, goodness-of-fit statistics and
//! least-squares fits. Everything here is plain `f64` plumbing.

/// SplitMix64 mixing step.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-replicate seed: base seed xor'd with the mixed replicate index.
pub fn replicate_seed(base: u64, replicate: u64) -> u64 {
    base ^ splitmix64(replicate)
}

/// Pearson chi-square statistic of observed counts against a discrete
/// distribution. Cells with expected probability below `min_prob` are pooled
/// into one remainder cell. Returns `(statistic, degrees_of_freedom)`.
pub fn chi_square_statistic(observed: &[u64], probs: &[f64], min_prob: f64) -> (f64, usize) {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_prob = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p < min_prob {
            pooled_obs += o as f64;
            pooled_prob += p;
        } else {
            let e = n * p;
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_prob >= min_prob {
        let e = n * pooled_prob;
        stat += (pooled_obs - e).powi(2) / e;
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}

/// Upper 1% critical value of the chi-square distribution.
///
/// Exact table for small degrees of freedom, Wilson-Hilferty beyond it.
pub fn chi_square_critical_1pct(df: usize) -> f64 {
    const TABLE: [f64; 15] = [
        6.634897, 9.210340, 11.344867, 13.276704, 15.086272, 16.811894, 18.475307, 20.090235,
        21.665994, 23.209251, 24.724970, 26.216967, 27.688250, 29.141238, 30.577914,
    ];
    assert!(df >= 1, "chi-square needs at least one degree of freedom");
    if df <= TABLE.len() {
        TABLE[df - 1]
    } else {
        // Wilson-Hilferty cube approximation, z_{0.99} = 2.3263478740
        let d = df as f64;
        let z = 2.326_347_874_040_841;
        d * (1.0 - 2.0 / (9.0 * d) + z * (2.0 / (9.0 * d)).sqrt()).powi(3)
    }
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// Asymptotic 1% critical value for the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_62 / (n as f64).sqrt()
}

/// Least-squares line fit. Returns `(intercept, slope)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> crate::Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(crate::Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(crate::Error::Invalid(
            "slope fit needs at least two points".into(),
        ));
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(crate::Error::Invalid(
            "slope fit needs at least two distinct abscissae".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    Ok((ym - slope * xm, slope))
}

/// Median of a sample (averages the middle pair for even length).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Sample mean and standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
