//! Derived constants of a landscape/rate-model pair and the explicit
//! deviation bounds between the stochastic occupancy measure and its
//! deterministic prediction.
//!
//! Every bound is a `(threshold, failure probability)` pair: with the
//! stated probability, the discrepancy `sup_t sup_B |mu_X{B} - mu_p{B}|`
//! over a family of VC dimension `V` stays below the threshold.
//! Probabilities are clamped to `[0, 1]`; thresholds are reported raw with
//! a vacuity flag, since a threshold at or above 1 can never be exceeded.

use crate::continuous::k_max_rate;
use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::rates::RateModel;
use crate::scalar::Scalar;
use serde::Serialize;

/// Scalar constants derived from a landscape and rate model.
///
/// With `L_i` the total Lipschitz constant of patch `i`'s rate pair on its
/// reachable connectivity range:
///
/// ```text
/// beta_in_i^2 = n^-1 sum_j (a_j s_ji)^2
/// a   = n^-1 max_i sum_j a_j L_j s_ji     (influence growth rate)
/// h   = n^-1 sum_i a_i L_i beta_in_i
/// a2  = max_j n^-1 sum_i a_i^2 L_i s_ij
/// h2  = n^-1 sum_i a_i^2 L_i beta_in_i
/// ```
#[derive(Debug, Clone, Serialize)]
pub struct BoundConstants<T> {
    pub n: usize,
    pub weights: Vec<T>,
    pub mean_weight: T,
    pub lipschitz: Vec<T>,
    pub beta_in: Vec<T>,
    pub a: T,
    pub h: T,
    pub a2: T,
    pub h2: T,
    pub k_max: T,
}

impl<T: Scalar> BoundConstants<T> {
    /// The amplification ratio `h / (a * mean_weight)`.
    pub fn h_ratio(&self) -> T {
        self.h / (self.a * self.mean_weight)
    }

    /// Fraction of patches with weight strictly below `theta * mean_weight`,
    /// together with their indices.
    pub fn psi(&self, theta: T) -> (T, Vec<usize>) {
        let cut = theta * self.mean_weight;
        let idx: Vec<usize> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &a)| a < cut)
            .map(|(i, _)| i)
            .collect();
        (T::from_count(idx.len()) / T::from_count(self.n), idx)
    }
}

/// Computes every derived constant for the pair.
pub fn bound_constants<T: Scalar>(land: &Landscape<T>, model: &RateModel<T>) -> BoundConstants<T> {
    let n = land.n();
    let nf = T::from_count(n);
    let weights: Vec<T> = (0..n).map(|i| land.weight(i)).collect();
    let lip = model.lipschitz(land.connectivity_ceiling());
    let l = &lip.total;

    let mut beta_in = vec![T::zero(); n];
    let mut a = T::zero();
    let mut a2 = T::zero();
    for i in 0..n {
        let row = land.s_row(i); // s_ij = s_ji
        let mut beta_sq = T::zero();
        let mut row_infl = T::zero();
        let mut col2 = T::zero();
        for j in 0..n {
            let w = weights[j] * row[j];
            beta_sq += w * w;
            row_infl += weights[j] * l[j] * row[j];
            col2 += weights[j] * weights[j] * l[j] * row[j];
        }
        beta_in[i] = (beta_sq / nf).sqrt();
        a = a.max(row_infl / nf);
        a2 = a2.max(col2 / nf);
    }
    let mut h = T::zero();
    let mut h2 = T::zero();
    for i in 0..n {
        h += weights[i] * l[i] * beta_in[i];
        h2 += weights[i] * weights[i] * l[i] * beta_in[i];
    }
    h /= nf;
    h2 /= nf;
    BoundConstants {
        n,
        mean_weight: weights.iter().copied().sum::<T>() / nf,
        weights,
        lipschitz: l.clone(),
        beta_in,
        a,
        h,
        a2,
        h2,
        k_max: k_max_rate(land, model),
    }
}

/// `eps_n(r) = n^(-1/2) sqrt(r log n)` (natural logarithm).
pub fn eps_n<T: Scalar>(n: usize, r: T) -> Result<T> {
    if n < 2 {
        return Err(Error::Invalid("eps_n needs n >= 2".into()));
    }
    if r < T::zero() {
        return Err(Error::OutOfRange(format!("r must be >= 0, got {r}")));
    }
    let nf = T::from_count(n);
    Ok((r * nf.ln()).sqrt() / nf.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TheoremId {
    T1,
    T2,
    T3a,
    T3b,
}

/// Echo of the evaluation inputs.
#[derive(Debug, Clone, Serialize)]
pub struct BoundInputs<T> {
    pub m: Option<T>,
    pub horizon: T,
    pub vc_dim: usize,
    pub theta: T,
    pub eta: Option<T>,
    pub r: Option<T>,
    pub alpha: Option<T>,
}

/// A `(threshold, failure probability)` pair with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremBound<T> {
    pub id: TheoremId,
    pub threshold: T,
    /// Failure probability, clamped to `[0, 1]`.
    pub probability: T,
    /// A threshold at or above 1 can never be exceeded.
    pub vacuous: bool,
    /// False when a stated side condition fails; the bound is still
    /// reported but carries no guarantee.
    pub preconditions_ok: bool,
    pub diagnostics: Vec<String>,
    pub inputs: BoundInputs<T>,
}

fn finish<T: Scalar>(
    id: TheoremId,
    threshold: T,
    probability: T,
    preconditions_ok: bool,
    diagnostics: Vec<String>,
    inputs: BoundInputs<T>,
) -> TheoremBound<T> {
    TheoremBound {
        id,
        threshold,
        probability: probability.max(T::zero()).min(T::one()),
        vacuous: threshold >= T::one(),
        preconditions_ok,
        diagnostics,
        inputs,
    }
}

fn check_positive<T: Scalar>(value: T, name: &str) -> Result<()> {
    if !(value > T::zero()) {
        return Err(Error::OutOfRange(format!(
            "{name} must be positive, got {value}"
        )));
    }
    Ok(())
}

fn check_growth_rate<T: Scalar>(c: &BoundConstants<T>) -> Result<()> {
    if !(c.a > T::zero()) {
        return Err(Error::Invalid(
            "influence growth rate is zero (constant-rate model): the coupling is exact and \
             the deviation is governed by the Hoeffding tail alone"
                .into(),
        ));
    }
    Ok(())
}

/// First discrete-time bound, valid for `max_{1<=t<=mT}`:
/// threshold `psi(theta) + n^(eta - 1/2) {(h/(a abar)) e^(aT) / theta + 1}`,
/// probability `2mT (n+1)^V exp(-2 n^(2 eta)) + n^-eta`.
pub fn theorem1_bound<T: Scalar>(
    c: &BoundConstants<T>,
    m: T,
    horizon: T,
    vc_dim: usize,
    theta: T,
    eta: T,
) -> Result<TheoremBound<T>> {
    check_positive(theta, "theta")?;
    check_positive(eta, "eta")?;
    check_growth_rate(c)?;
    let steps = crate::discrete::steps_for(m, horizon)?;
    let n = T::from_count(c.n);
    if c.n < 2 {
        return Err(Error::Invalid("bounds need n >= 2".into()));
    }
    let (psi, _) = c.psi(theta);
    let half = T::half();
    let threshold =
        psi + n.powf(eta - half) * (c.h_ratio() / theta * (c.a * horizon).exp() + T::one());
    let shatter = (n + T::one()).powi(vc_dim as i32);
    let probability =
        T::two() * T::from_count(steps) * shatter * (-T::two() * n.powf(T::two() * eta)).exp()
            + n.powf(-eta);
    let inputs = BoundInputs {
        m: Some(m),
        horizon,
        vc_dim,
        theta,
        eta: Some(eta),
        r: None,
        alpha: None,
    };
    Ok(finish(
        TheoremId::T1,
        threshold,
        probability,
        true,
        Vec::new(),
        inputs,
    ))
}

/// Refined discrete-time bound:
/// threshold `psi(theta) + {2 (h/(a abar)) e^(aT) / theta + 1} eps_n(r)`,
/// probability `(2 + 2^(V+1)) aT / n + (a2 h + h2 a) / (h^2 n eps_n(r))`,
/// under `r <= n / log n` and `(2r - V - 1) log n >= log(m / a)`.
pub fn theorem2_bound<T: Scalar>(
    c: &BoundConstants<T>,
    m: T,
    horizon: T,
    vc_dim: usize,
    theta: T,
    r: T,
) -> Result<TheoremBound<T>> {
    check_positive(theta, "theta")?;
    check_positive(r, "r")?;
    check_growth_rate(c)?;
    crate::discrete::steps_for(m, horizon)?;
    if c.n < 2 {
        return Err(Error::Invalid("bounds need n >= 2".into()));
    }
    let n = T::from_count(c.n);
    let eps = eps_n(c.n, r)?;
    let mut diagnostics = Vec::new();
    let mut ok = true;
    if r > n / n.ln() {
        ok = false;
        diagnostics.push(format!("violated: r <= n / log n ({r} > {})", n / n.ln()));
    }
    let lhs = (T::two() * r - T::from_count(vc_dim) - T::one()) * n.ln();
    let rhs = (m / c.a).ln();
    if lhs < rhs {
        ok = false;
        diagnostics.push(format!(
            "violated: (2r - V - 1) log n >= log(m/a) ({lhs} < {rhs})"
        ));
    }
    let (psi, _) = c.psi(theta);
    let threshold = psi + (T::two() * c.h_ratio() / theta * (c.a * horizon).exp() + T::one()) * eps;
    let at = c.a * horizon;
    let probability = (T::two() + T::two().powi(vc_dim as i32 + 1)) * at / n
        + (c.a2 * c.h + c.h2 * c.a) / (c.h * c.h * n * eps);
    let inputs = BoundInputs {
        m: Some(m),
        horizon,
        vc_dim,
        theta,
        eta: None,
        r: Some(r),
        alpha: None,
    };
    Ok(finish(
        TheoremId::T2,
        threshold,
        probability,
        ok,
        diagnostics,
        inputs,
    ))
}

/// Continuous-time bounds, valid for `sup_{0<=t<=T}`. Returns the pair of
/// variants: the first trades a larger probability for a smaller threshold
/// term, the second the reverse. Side conditions:
/// `a/n <= k <= a n^alpha` and `2r > V + 5 + 2 alpha + (V+1) log 2 / log n`.
pub fn theorem3_bound<T: Scalar>(
    c: &BoundConstants<T>,
    horizon: T,
    vc_dim: usize,
    theta: T,
    eta: T,
    alpha: T,
    r: T,
) -> Result<(TheoremBound<T>, TheoremBound<T>)> {
    check_positive(theta, "theta")?;
    check_positive(eta, "eta")?;
    check_positive(r, "r")?;
    check_growth_rate(c)?;
    if c.n < 2 {
        return Err(Error::Invalid("bounds need n >= 2".into()));
    }
    let n = T::from_count(c.n);
    let eps = eps_n(c.n, r)?;
    let mut diagnostics = Vec::new();
    let mut ok = true;
    if c.k_max < c.a / n || c.k_max > c.a * n.powf(alpha) {
        ok = false;
        diagnostics.push(format!(
            "violated: a/n <= k <= a n^alpha (k = {}, a/n = {}, a n^alpha = {})",
            c.k_max,
            c.a / n,
            c.a * n.powf(alpha)
        ));
    }
    let v = T::from_count(vc_dim);
    let r_floor =
        v + T::from_real(5.0) + T::two() * alpha + (v + T::one()) * T::two().ln() / n.ln();
    if !(T::two() * r > r_floor) {
        ok = false;
        diagnostics.push(format!("violated: 2r > {r_floor} (r = {r})"));
    }
    let (psi, _) = c.psi(theta);
    let half = T::half();
    let e_at = (c.a * horizon).exp();
    let base = psi + T::two() / n + eps;
    let at1 = T::from_real(5.0) * (c.a * horizon + T::one()) / n;

    let thr_a = base + n.powf(eta - half) / theta * e_at;
    let prob_a = at1 + c.h_ratio() * n.powf(-eta) * (r * n.ln()).sqrt();

    let thr_b = base + T::two() * eps * c.h_ratio() / theta * e_at;
    let prob_b = at1 + (T::two() * c.a2 * c.h + c.a * c.h2) / (T::two() * c.h * c.h * n * eps);

    let inputs = BoundInputs {
        m: None,
        horizon,
        vc_dim,
        theta,
        eta: Some(eta),
        r: Some(r),
        alpha: Some(alpha),
    };
    Ok((
        finish(
            TheoremId::T3a,
            thr_a,
            prob_a,
            ok,
            diagnostics.clone(),
            inputs.clone(),
        ),
        finish(TheoremId::T3b, thr_b, prob_b, ok, diagnostics, inputs),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{KernelSpec, Patch};
    use crate::rates::{RateFn, RateModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Complete graph with unit kernel entries: every pair interacts alike.
    fn equal_patch(n: usize, weight: f64) -> Landscape<f64> {
        let patches = (0..n)
            .map(|i| Patch {
                location: vec![i as f64],
                weight,
            })
            .collect();
        let mut s = vec![vec![1.0; n]; n];
        for (i, row) in s.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        Landscape::build(patches, KernelSpec::Explicit(s)).unwrap()
    }

    fn linear_model(n: usize, lambda: f64) -> RateModel<f64> {
        RateModel::uniform(n, RateFn::Linear(lambda), RateFn::Constant(0.5)).unwrap()
    }

    #[test]
    fn equal_patch_constants_match_closed_forms() {
        let n = 100usize;
        let a = 2.0;
        let lambda = 0.7;
        let land = equal_patch(n, a);
        let model = linear_model(n, lambda);
        let c = bound_constants(&land, &model);
        let nf = n as f64;
        let frac = (nf - 1.0) / nf;
        assert!((c.mean_weight - a).abs() < 1e-12);
        assert!((c.a - a * lambda * frac).abs() < 1e-12);
        for &b in &c.beta_in {
            assert!((b - a * frac.sqrt()).abs() < 1e-12);
        }
        assert!((c.h - a * a * lambda * frac.sqrt()).abs() < 1e-12);
        assert!((c.a2 - a * a * lambda * frac).abs() < 1e-12);
        assert!((c.h2 - a * a * a * lambda * frac.sqrt()).abs() < 1e-10);
        // ratio identities: exactly sqrt(n/(n-1)) and 2 sqrt((n-1)/n)
        assert!((c.h_ratio() - (nf / (nf - 1.0)).sqrt()).abs() < 1e-12);
        let ratio2 = (c.a2 * c.h + c.h2 * c.a) / (c.h * c.h);
        assert!((ratio2 - 2.0 * frac.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degree_landscape_ratio_formula() {
        // random symmetric 0/1 kernel, unit weights, unit Lipschitz
        let n = 60usize;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < 0.2 {
                    s[i][j] = 1.0;
                    s[j][i] = 1.0;
                }
            }
        }
        let degrees: Vec<f64> = (0..n).map(|i| s[i].iter().sum()).collect();
        let patches = (0..n)
            .map(|i| Patch {
                location: vec![i as f64],
                weight: 1.0,
            })
            .collect();
        let land = Landscape::build(patches, KernelSpec::Explicit(s)).unwrap();
        let model = RateModel::uniform(n, RateFn::Linear(1.0), RateFn::Constant(1.0)).unwrap();
        let c = bound_constants(&land, &model);
        let nf = n as f64;
        let expected = nf.sqrt() * (degrees.iter().map(|d| d.sqrt()).sum::<f64>() / nf)
            / degrees.iter().cloned().fold(0.0, f64::max);
        assert!((c.h_ratio() - expected).abs() < 1e-10);
    }

    #[test]
    fn single_patch_constants_are_zero() {
        let land = equal_patch(1, 1.0);
        let model = linear_model(1, 1.0);
        let c = bound_constants(&land, &model);
        assert_eq!(c.a, 0.0);
        assert_eq!(c.h, 0.0);
        assert_eq!(c.a2, 0.0);
        assert_eq!(c.h2, 0.0);
    }

    #[test]
    fn psi_counts_strictly_small_weights() {
        let land = equal_patch(4, 1.0);
        let c = bound_constants(&land, &linear_model(4, 1.0));
        assert_eq!(c.psi(1.0).0, 0.0); // no weight strictly below the mean
        assert_eq!(c.psi(1.5).0, 1.0);

        let patches = vec![
            Patch {
                location: vec![0.0],
                weight: 1.0,
            },
            Patch {
                location: vec![1.0],
                weight: 2.0,
            },
            Patch {
                location: vec![2.0],
                weight: 3.0,
            },
        ];
        let land = Landscape::build(patches, KernelSpec::Ring).unwrap();
        let c = bound_constants(&land, &linear_model(3, 1.0));
        let (psi, idx) = c.psi(1.0);
        assert!((psi - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn eps_n_values_and_scaling() {
        assert!((eps_n::<f64>(8, 1.0).unwrap() - 0.509_833_495_084_404_5).abs() < 1e-15);
        assert_eq!(eps_n::<f64>(8, 0.0).unwrap(), 0.0);
        assert!(eps_n::<f64>(1, 1.0).is_err());
        assert!(eps_n::<f64>(8, -1.0).is_err());
        let n = 50usize;
        let ratio = eps_n(4 * n, 2.0).unwrap() / eps_n(n, 2.0).unwrap();
        let expected = 0.5 * ((4.0 * n as f64).ln() / (n as f64).ln()).sqrt();
        assert!((ratio - expected).abs() < 1e-14);
    }

    /// Idealized equal-patch constants with `h/(a abar)` exactly one.
    fn synthetic_constants(n: usize, a: f64) -> BoundConstants<f64> {
        BoundConstants {
            n,
            weights: vec![1.0; n],
            mean_weight: 1.0,
            lipschitz: vec![1.0; n],
            beta_in: vec![1.0; n],
            a,
            h: a,
            a2: a,
            h2: a,
            k_max: a,
        }
    }

    #[test]
    fn theorem1_plug_in_value() {
        // frozen from a high-precision evaluation of the formula at
        // n=100, m=1, T=2, V=4, theta=1, eta=0.25 with unit ratio and a=1
        let c = synthetic_constants(100, 1.0);
        let b = theorem1_bound(&c, 1.0, 2.0, 4, 1.0, 0.25).unwrap();
        assert!((b.threshold - 2.652_852_469_154_769).abs() < 1e-12);
        assert_eq!(b.probability, 1.0); // raw value 1.174... clamps
        assert!(b.vacuous);
        assert!(b.preconditions_ok);
    }

    #[test]
    fn theorem1_probability_vanishes_for_large_eta() {
        let c = synthetic_constants(100, 1.0);
        let mut last = f64::INFINITY;
        for eta in [0.25, 0.5, 0.75, 1.0, 1.5] {
            let b = theorem1_bound(&c, 1.0, 2.0, 4, 1.0, eta).unwrap();
            assert!(b.probability <= last + 1e-15);
            last = b.probability;
        }
        assert!(last <= 1e-3);
    }

    #[test]
    fn theorem1_equal_patch_threshold_form() {
        let c = synthetic_constants(400, 0.5);
        let b = theorem1_bound(&c, 1.0, 2.0, 4, 1.0, 0.25).unwrap();
        let expected = (400f64).powf(-0.25) * ((1.0f64).exp() + 1.0);
        assert!((b.threshold - expected).abs() < 1e-12);
    }

    #[test]
    fn theorem1_rejects_zero_growth_rate() {
        let mut c = synthetic_constants(100, 1.0);
        c.a = 0.0;
        assert!(theorem1_bound(&c, 1.0, 2.0, 4, 1.0, 0.25).is_err());
    }

    #[test]
    fn theorem2_equal_patch_probability_identity() {
        let n = 1000usize;
        let land = equal_patch(n, 1.0);
        let model = linear_model(n, 0.1);
        let c = bound_constants(&land, &model);
        let v = 4usize;
        let r = 3.0;
        let b = theorem2_bound(&c, 1.0, 1.0, v, 1.0, r).unwrap();
        assert!(b.preconditions_ok, "{:?}", b.diagnostics);
        let nf = n as f64;
        let at = c.a * 1.0;
        let ratio2 = (c.a2 * c.h + c.h2 * c.a) / (c.h * c.h);
        assert!((ratio2 - 2.0).abs() < 0.01);
        let expected =
            (2.0 + 2f64.powi(v as i32 + 1)) * at / nf + ratio2 / (nf * eps_n(n, r).unwrap());
        assert!((b.probability - expected).abs() < 1e-12);
    }

    #[test]
    fn theorem2_degree_threshold_scaling() {
        // circulant regular graphs of degree 10 and 40: the amplification
        // term scales as sqrt(n/d) e^(aT)
        let n = 1000usize;
        let build = |deg: usize| -> BoundConstants<f64> {
            let patches = (0..n)
                .map(|i| Patch {
                    location: vec![i as f64],
                    weight: 1.0,
                })
                .collect();
            let mut s = vec![vec![0.0; n]; n];
            for i in 0..n {
                for off in 1..=(deg / 2) {
                    let j = (i + off) % n;
                    s[i][j] = 1.0;
                    s[j][i] = 1.0;
                }
            }
            let land = Landscape::build(patches, KernelSpec::Explicit(s)).unwrap();
            let model = RateModel::uniform(n, RateFn::Linear(1.0), RateFn::Constant(1.0)).unwrap();
            bound_constants(&land, &model)
        };
        let (c10, c40) = (build(10), build(40));
        let r = 4.0;
        let b10 = theorem2_bound(&c10, 1.0, 1.0, 4, 1.0, r).unwrap();
        let b40 = theorem2_bound(&c40, 1.0, 1.0, 4, 1.0, r).unwrap();
        let eps = eps_n(n, r).unwrap();
        let amp10 = b10.threshold - eps; // psi = 0, so the rest is the amplification term
        let amp40 = b40.threshold - eps;
        let expected_ratio = (40.0f64 / 10.0).sqrt() * ((c10.a - c40.a) * 1.0).exp();
        assert!(((amp10 / amp40) - expected_ratio).abs() < 1e-9);
    }

    #[test]
    fn theorem2_precondition_gates() {
        let c = synthetic_constants(100, 1.0);
        // r way above n / log n
        let b = theorem2_bound(&c, 1.0, 1.0, 4, 1.0, 50.0).unwrap();
        assert!(!b.preconditions_ok);
        assert!(!b.diagnostics.is_empty());
        // r too small for the m/a condition
        let b = theorem2_bound(&c, 100.0, 1.0, 4, 1.0, 2.0).unwrap();
        assert!(!b.preconditions_ok);
    }

    #[test]
    fn theorem3_equal_patch_ratio_and_gates() {
        let n = 1000usize;
        let land = equal_patch(n, 1.0);
        let model = linear_model(n, 0.1);
        let c = bound_constants(&land, &model);
        let ratio = (2.0 * c.a2 * c.h + c.a * c.h2) / (2.0 * c.h * c.h);
        assert!((ratio - 1.5).abs() < 0.015);

        // k = 0.5 (constant extinction) needs alpha with a n^alpha >= 0.5
        let (b3a, b3b) = theorem3_bound(&c, 1.0, 4, 1.0, 0.25, 0.35, 6.0).unwrap();
        assert!(b3a.preconditions_ok, "{:?}", b3a.diagnostics);
        let nf = n as f64;
        let eps = eps_n(n, 6.0).unwrap();
        let expected_b = 5.0 * (c.a + 1.0) / nf + ratio / (nf * eps);
        assert!((b3b.probability - expected_b).abs() < 1e-12);

        // r below the floor is flagged
        let (b3a, _) = theorem3_bound(&c, 1.0, 4, 1.0, 0.25, 0.35, 2.0).unwrap();
        assert!(!b3a.preconditions_ok);
        // alpha too small for k
        let (b3a, _) = theorem3_bound(&c, 1.0, 4, 1.0, 0.25, 0.01, 6.0).unwrap();
        assert!(!b3a.preconditions_ok);
    }

    #[test]
    fn constants_scale_invariance() {
        let n = 50usize;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let weights: Vec<f64> = (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let mut s = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen::<f64>();
                s[i][j] = v;
                s[j][i] = v;
            }
        }
        let build = |c: f64| -> BoundConstants<f64> {
            let patches = (0..n)
                .map(|i| Patch {
                    location: vec![i as f64],
                    weight: weights[i] * c,
                })
                .collect();
            let scaled: Vec<Vec<f64>> = s
                .iter()
                .map(|row| row.iter().map(|v| v / c).collect())
                .collect();
            let land = Landscape::build(patches, KernelSpec::Explicit(scaled)).unwrap();
            let model = RateModel::uniform(n, RateFn::Hill(0.4), RateFn::Constant(0.3)).unwrap();
            bound_constants(&land, &model)
        };
        let base = build(1.0);
        for c in [0.1, 10.0] {
            let scaled = build(c);
            assert!((scaled.a - base.a).abs() / base.a < 1e-10);
            assert!((scaled.h_ratio() - base.h_ratio()).abs() / base.h_ratio() < 1e-10);
            let r2 = |x: &BoundConstants<f64>| (x.a2 * x.h + x.h2 * x.a) / (x.h * x.h);
            assert!((r2(&scaled) - r2(&base)).abs() / r2(&base) < 1e-10);
        }
    }

    #[test]
    fn crude_sanity_envelopes() {
        let n = 40usize;
        let land: Landscape<f64> = Landscape::generate(
            &crate::landscape::GenerateSpec::UniformBox { n, d: 2, seed: 2 },
            KernelSpec::Exponential(0.5),
        )
        .unwrap();
        let model = RateModel::uniform(n, RateFn::Linear(0.3), RateFn::Hill(1.0)).unwrap();
        let c = bound_constants(&land, &model);
        let max_al = (0..n)
            .map(|i| land.weight(i) * c.lipschitz[i])
            .fold(0.0, f64::max);
        let max_beta = c.beta_in.iter().cloned().fold(0.0, f64::max);
        assert!(c.h <= max_al * max_beta + 1e-12);
        let max_row_mean = (0..n)
            .map(|i| land.s_row(i).iter().sum::<f64>() / n as f64)
            .fold(0.0, f64::max);
        assert!(c.a <= max_al * max_row_mean + 1e-12);
    }

    #[test]
    fn thresholds_monotone_in_horizon_and_n() {
        let mut last = 0.0;
        for horizon in [1.0, 2.0, 4.0, 8.0] {
            let c = synthetic_constants(400, 0.5);
            let b = theorem2_bound(&c, 1.0, horizon, 4, 1.0, 3.0).unwrap();
            assert!(b.threshold >= last);
            last = b.threshold;
        }
        let mut last = f64::INFINITY;
        for n in [100usize, 400, 1600] {
            let land = equal_patch(n, 1.0);
            let c = bound_constants(&land, &linear_model(n, 0.5));
            let b = theorem2_bound(&c, 1.0, 2.0, 4, 1.0, 3.0).unwrap();
            assert!(b.threshold <= last);
            last = b.threshold;
        }
    }
}
