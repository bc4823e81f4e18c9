//! Exact small-instance computations backing the Monte Carlo engines:
//! transition-matrix powering for the discrete chain, the joint law of the
//! coupled `(X, W, J)` chain with the shared uniform integrated in closed
//! form, and CTMC transients via uniformization plus an independent
//! matrix-exponential route.
//!
//! States are indexed little-endian on the patch index: bit `i` of the
//! state index is the occupancy of patch `i`.

use crate::discrete::{step_deterministic, steps_for, OccupancyState};
use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::rates::RateModel;
use crate::scalar::Scalar;

/// Exact ceiling for single-chain state spaces (`2^n`).
pub const MAX_CHAIN_PATCHES: usize = 6;
/// Exact ceiling for the joint coupled chain (`8^n`).
pub const MAX_JOINT_PATCHES: usize = 3;

/// Probability vector over `{0,1}^n`, little-endian state indices.
#[derive(Debug, Clone)]
pub struct ExactDistribution<T> {
    pub n: usize,
    pub probabilities: Vec<T>,
}

impl<T: Scalar> ExactDistribution<T> {
    pub fn point_mass(x0: &OccupancyState) -> Self {
        let mut probabilities = vec![T::zero(); 1 << x0.n()];
        probabilities[state_index(x0.bits())] = T::one();
        Self {
            n: x0.n(),
            probabilities,
        }
    }

    pub fn total(&self) -> T {
        self.probabilities.iter().copied().sum()
    }

    pub fn state_probability(&self, bits: &[u8]) -> T {
        self.probabilities[state_index(bits)]
    }

    /// Probability that every patch is empty.
    pub fn mass_at_empty(&self) -> T {
        self.probabilities[0]
    }

    pub fn sup_distance(&self, other: &Self) -> T {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |acc, v| acc.max(v))
    }
}

pub fn state_index(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .map(|(i, &b)| (b as usize) << i)
        .sum()
}

pub fn state_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::StateSpaceTooLarge { n, limit });
    }
    Ok(())
}

/// Per-state success probabilities `q_i = P(X'_i = 1 | x)`.
fn one_step_probs<T: Scalar>(
    land: &Landscape<T>,
    model: &RateModel<T>,
    inv_m: T,
    bits: &[u8],
) -> Vec<T> {
    let xr: Vec<T> = bits.iter().map(|&b| T::from_count(b as usize)).collect();
    let mut conn = vec![T::zero(); bits.len()];
    land.connectivity_into(&xr, &mut conn);
    let (c, e) = model.eval(&conn);
    (0..bits.len())
        .map(|i| {
            if bits[i] == 1 {
                T::one() - inv_m * e[i]
            } else {
                inv_m * c[i]
            }
        })
        .collect()
}

/// Distribution of the discrete chain at time `m * T` by transition-matrix
/// powering; patches are conditionally independent given the current state,
/// so each row is a product over patches.
pub fn exact_chain_distribution<T: Scalar>(
    x0: &OccupancyState,
    land: &Landscape<T>,
    model: &RateModel<T>,
    m: T,
    horizon: T,
) -> Result<ExactDistribution<T>> {
    let n = land.n();
    check_limit(n, MAX_CHAIN_PATCHES)?;
    model.validate_timestep(land, m)?;
    let steps = steps_for(m, horizon)?;
    let size = 1usize << n;
    let inv_m = m.recip();
    let mut dist = ExactDistribution::point_mass(x0).probabilities;
    let mut next = vec![T::zero(); size];
    for _ in 0..steps {
        for v in next.iter_mut() {
            *v = T::zero();
        }
        for x in 0..size {
            if dist[x] == T::zero() {
                continue;
            }
            let q = one_step_probs(land, model, inv_m, &state_bits(x, n));
            for y in 0..size {
                let mut p = dist[x];
                for (i, &qi) in q.iter().enumerate() {
                    p *= if (y >> i) & 1 == 1 { qi } else { T::one() - qi };
                }
                next[y] += p;
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    Ok(ExactDistribution {
        n,
        probabilities: dist,
    })
}

/// Moments of the weighted disagreement `Z = sum_i a_i J_i` at `m * T`.
#[derive(Debug, Clone, Copy)]
pub struct CoupledMoments<T> {
    pub mean: T,
    pub variance: T,
}

/// Exact law of the coupled `(X, W, J)` chain at time `m * T`.
///
/// The shared uniform is integrated in closed form: given the two success
/// thresholds `t_x` and `t_w` of a patch, the pair of next-step indicators
/// has `P(1,1) = min(t_x, t_w)`, `P(1,0) = (t_x - t_w)_+`,
/// `P(0,1) = (t_w - t_x)_+` and `P(0,0) = 1 - max(t_x, t_w)`.
pub fn exact_coupled_moment<T: Scalar>(
    x0: &OccupancyState,
    land: &Landscape<T>,
    model: &RateModel<T>,
    m: T,
    horizon: T,
) -> Result<CoupledMoments<T>> {
    let n = land.n();
    check_limit(n, MAX_JOINT_PATCHES)?;
    model.validate_timestep(land, m)?;
    let steps = steps_for(m, horizon)?;
    let inv_m = m.recip();
    let size = 1usize << (3 * n); // (x, w, j) packed as three bit groups
    let pack = |x: usize, w: usize, j: usize| x | (w << n) | (j << (2 * n));
    let mask = (1usize << n) - 1;

    let mut dist = vec![T::zero(); size];
    let x0_idx = state_index(x0.bits());
    dist[pack(x0_idx, x0_idx, 0)] = T::one();
    let mut p = x0.to_reals::<T>();

    let mut next = vec![T::zero(); size];
    for _ in 0..steps {
        // W thresholds depend on the deterministic state only
        let mut conn_p = vec![T::zero(); n];
        land.connectivity_into(&p, &mut conn_p);
        let (cp, ep) = model.eval(&conn_p);
        for v in next.iter_mut() {
            *v = T::zero();
        }
        for state in 0..size {
            if dist[state] == T::zero() {
                continue;
            }
            let (x, w, j) = (state & mask, (state >> n) & mask, (state >> (2 * n)) & mask);
            let qx = one_step_probs(land, model, inv_m, &state_bits(x, n));
            // joint per-patch laws over the four (x', w') outcomes
            let per: Vec<[T; 4]> = (0..n)
                .map(|i| {
                    let tx = qx[i];
                    let tw = if (w >> i) & 1 == 1 {
                        T::one() - inv_m * ep[i]
                    } else {
                        inv_m * cp[i]
                    };
                    // order: (x', w') = (0,0), (1,0), (0,1), (1,1)
                    [
                        T::one() - tx.max(tw),
                        (tx - tw).max(T::zero()),
                        (tw - tx).max(T::zero()),
                        tx.min(tw),
                    ]
                })
                .collect();
            // odometer over per-patch outcomes
            let combos = 1usize << (2 * n);
            for combo in 0..combos {
                let mut prob = dist[state];
                let mut x2 = 0usize;
                let mut w2 = 0usize;
                for (i, outcomes) in per.iter().enumerate() {
                    let o = (combo >> (2 * i)) & 3;
                    prob *= outcomes[o];
                    if prob == T::zero() {
                        break;
                    }
                    x2 |= (o & 1) << i;
                    w2 |= ((o >> 1) & 1) << i;
                }
                if prob == T::zero() {
                    continue;
                }
                let j2 = j | (x2 ^ w2);
                next[pack(x2, w2, j2)] = next[pack(x2, w2, j2)] + prob;
            }
        }
        std::mem::swap(&mut dist, &mut next);
        p = step_deterministic(&p, land, model, m);
    }

    let mut mean = T::zero();
    let mut second = T::zero();
    for (state, &pr) in dist.iter().enumerate() {
        if pr == T::zero() {
            continue;
        }
        let j = (state >> (2 * n)) & mask;
        let z: T = (0..n)
            .filter(|i| (j >> i) & 1 == 1)
            .map(|i| land.weight(i))
            .sum();
        mean += pr * z;
        second += pr * z * z;
    }
    Ok(CoupledMoments {
        mean,
        variance: second - mean * mean,
    })
}

/// Dense CTMC generator over `{0,1}^n`, row-major.
fn generator<T: Scalar>(land: &Landscape<T>, model: &RateModel<T>) -> Vec<T> {
    let n = land.n();
    let size = 1usize << n;
    let mut q = vec![T::zero(); size * size];
    for x in 0..size {
        let bits = state_bits(x, n);
        let xr: Vec<T> = bits.iter().map(|&b| T::from_count(b as usize)).collect();
        let mut conn = vec![T::zero(); n];
        land.connectivity_into(&xr, &mut conn);
        let (c, e) = model.eval(&conn);
        let mut exit = T::zero();
        for i in 0..n {
            let rate = if bits[i] == 1 { e[i] } else { c[i] };
            if rate > T::zero() {
                let y = x ^ (1 << i);
                q[x * size + y] += rate;
                exit += rate;
            }
        }
        q[x * size + x] -= exit;
    }
    q
}

/// Distribution of the chain at time `T` by uniformization.
///
/// The Poisson series is truncated at tail mass `1e-12`; long horizons are
/// split into chunks to keep the series numerically representable.
pub fn exact_ctmc_marginal<T: Scalar>(
    x0: &OccupancyState,
    land: &Landscape<T>,
    model: &RateModel<T>,
    horizon: T,
) -> Result<ExactDistribution<T>> {
    let n = land.n();
    check_limit(n, MAX_CHAIN_PATCHES)?;
    if horizon < T::zero() {
        return Err(Error::OutOfRange("horizon must be >= 0".into()));
    }
    let size = 1usize << n;
    let q = generator(land, model);
    let max_exit = (0..size)
        .map(|x| -q[x * size + x])
        .fold(T::zero(), |a, b| a.max(b));
    let mut dist = ExactDistribution::point_mass(x0).probabilities;
    if max_exit == T::zero() || horizon == T::zero() {
        return Ok(ExactDistribution {
            n,
            probabilities: dist,
        });
    }
    let rate = T::from_real(1.05) * max_exit;
    // P = I + Q / rate
    let mut p = vec![T::zero(); size * size];
    for x in 0..size {
        for y in 0..size {
            let mut v = q[x * size + y] / rate;
            if x == y {
                v += T::one();
            }
            p[x * size + y] = v;
        }
    }
    let chunks = (rate * horizon / T::from_real(200.0))
        .as_f64()
        .ceil()
        .max(1.0) as usize;
    let chunk_t = horizon / T::from_count(chunks);
    let lam = (rate * chunk_t).as_f64();
    let tail = 1e-12;
    for _ in 0..chunks {
        let mut weight = (-lam).exp();
        let mut cumulative = weight;
        let mut out = vec![T::zero(); size];
        let mut v = dist.clone();
        add_scaled(&mut out, &v, T::from_real(weight));
        let mut k = 1usize;
        while cumulative < 1.0 - tail {
            v = row_vec_mul(&v, &p, size);
            weight *= lam / k as f64;
            cumulative += weight;
            add_scaled(&mut out, &v, T::from_real(weight));
            k += 1;
            assert!(k < 1_000_000, "uniformization series failed to converge");
        }
        dist = out;
    }
    Ok(ExactDistribution {
        n,
        probabilities: dist,
    })
}

/// Distribution of the chain at time `T` by a scaling-and-squaring matrix
/// exponential; the independent cross-check for [`exact_ctmc_marginal`].
pub fn exact_ctmc_marginal_expm<T: Scalar>(
    x0: &OccupancyState,
    land: &Landscape<T>,
    model: &RateModel<T>,
    horizon: T,
) -> Result<ExactDistribution<T>> {
    let n = land.n();
    check_limit(n, MAX_CHAIN_PATCHES)?;
    if horizon < T::zero() {
        return Err(Error::OutOfRange("horizon must be >= 0".into()));
    }
    let size = 1usize << n;
    let q = generator(land, model);
    let mut a: Vec<T> = q.iter().map(|&v| v * horizon).collect();
    // scale so the infinity norm is below 1/2, exponentiate, square back
    let norm = (0..size)
        .map(|x| (0..size).map(|y| a[x * size + y].abs()).sum::<T>())
        .fold(T::zero(), |acc, v| acc.max(v));
    let mut squarings = 0u32;
    let mut scale = T::one();
    while norm / scale > T::half() {
        scale *= T::two();
        squarings += 1;
    }
    let inv_scale = scale.recip();
    for v in a.iter_mut() {
        *v *= inv_scale;
    }
    // Taylor series: exp(A) = sum A^k / k!
    let mut result = identity::<T>(size);
    let mut term = identity::<T>(size);
    for k in 1..60 {
        term = mat_mul(&term, &a, size);
        let inv_fact = T::from_count(k).recip();
        for v in term.iter_mut() {
            *v *= inv_fact;
        }
        let mut largest = T::zero();
        for (r, &t) in result.iter_mut().zip(&term) {
            *r += t;
            largest = largest.max(t.abs());
        }
        if largest < T::from_real(1e-20) {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result, size);
    }
    let dist = row_vec_mul(
        &ExactDistribution::point_mass(x0).probabilities,
        &result,
        size,
    );
    Ok(ExactDistribution {
        n,
        probabilities: dist,
    })
}

fn identity<T: Scalar>(size: usize) -> Vec<T> {
    let mut m = vec![T::zero(); size * size];
    for i in 0..size {
        m[i * size + i] = T::one();
    }
    m
}

fn mat_mul<T: Scalar>(a: &[T], b: &[T], size: usize) -> Vec<T> {
    let mut out = vec![T::zero(); size * size];
    for i in 0..size {
        for k in 0..size {
            let aik = a[i * size + k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..size {
                out[i * size + j] += aik * b[k * size + j];
            }
        }
    }
    out
}

fn row_vec_mul<T: Scalar>(v: &[T], m: &[T], size: usize) -> Vec<T> {
    let mut out = vec![T::zero(); size];
    for x in 0..size {
        let vx = v[x];
        if vx == T::zero() {
            continue;
        }
        for y in 0..size {
            out[y] += vx * m[x * size + y];
        }
    }
    out
}

fn add_scaled<T: Scalar>(acc: &mut [T], v: &[T], w: T) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a += w * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{KernelSpec, Patch};
    use crate::rates::RateFn;

    fn ring2(weight: f64, lambda: f64, ext: f64) -> (Landscape<f64>, RateModel<f64>) {
        let land = Landscape::build(
            vec![
                Patch {
                    location: vec![0.0],
                    weight,
                },
                Patch {
                    location: vec![1.0],
                    weight,
                },
            ],
            KernelSpec::Explicit(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
        )
        .unwrap();
        let model = RateModel::uniform(2, RateFn::Linear(lambda), RateFn::Constant(ext)).unwrap();
        (land, model)
    }

    #[test]
    fn chain_distribution_frozen_reference() {
        // n=2, unit weights, s12=1, linear(1)/const(0.5), m=1, T=3, X0=(1,1);
        // frozen from an independent path-enumeration oracle
        let (land, model) = ring2(1.0, 1.0, 0.5);
        let x0 = OccupancyState::all_occupied(2);
        let dist = exact_chain_distribution(&x0, &land, &model, 1.0, 3.0).unwrap();
        let expected = [0.578125, 0.140625, 0.140625, 0.140625];
        for (got, want) in dist.probabilities.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!((dist.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_distribution_matches_path_enumeration() {
        // independent oracle: enumerate all state paths and multiply
        // per-step product-form transition probabilities
        let (land, model) = ring2(1.5, 0.8, 0.4);
        let x0 = OccupancyState::new(vec![1, 0]).unwrap();
        let steps = 3usize;
        let dist = exact_chain_distribution(&x0, &land, &model, 1.0, steps as f64).unwrap();

        let mut path_probs = vec![0.0f64; 4];
        let step_prob = |from: usize, to: usize| -> f64 {
            let q = one_step_probs(&land, &model, 1.0, &state_bits(from, 2));
            (0..2)
                .map(|i| if (to >> i) & 1 == 1 { q[i] } else { 1.0 - q[i] })
                .product()
        };
        let start = state_index(x0.bits());
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    path_probs[c] += step_prob(start, a) * step_prob(a, b) * step_prob(b, c);
                }
            }
        }
        for (got, want) in dist.probabilities.iter().zip(path_probs) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn absorbing_mass_is_monotone() {
        let (land, model) = ring2(1.0, 1.0, 0.5);
        let x0 = OccupancyState::all_occupied(2);
        let mut last = 0.0;
        for t in 1..=6 {
            let dist = exact_chain_distribution(&x0, &land, &model, 1.0, t as f64).unwrap();
            assert!(dist.mass_at_empty() >= last);
            last = dist.mass_at_empty();
        }
    }

    #[test]
    fn certain_extinction_in_one_step() {
        let land: Landscape<f64> = Landscape::build(
            vec![
                Patch {
                    location: vec![0.0],
                    weight: 1.0,
                },
                Patch {
                    location: vec![1.0],
                    weight: 1.0,
                },
            ],
            KernelSpec::Ring,
        )
        .unwrap();
        let model = RateModel::uniform(2, RateFn::Constant(0.0), RateFn::Constant(1.0)).unwrap();
        let x0 = OccupancyState::all_occupied(2);
        let dist = exact_chain_distribution(&x0, &land, &model, 1.0, 1.0).unwrap();
        assert!((dist.mass_at_empty() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coupled_moments_frozen_reference() {
        // frozen from an independent implementation of the joint chain
        let (land, model) = ring2(1.0, 1.0, 0.5);
        let x0 = OccupancyState::all_occupied(2);
        let m = exact_coupled_moment(&x0, &land, &model, 1.0, 3.0).unwrap();
        assert!((m.mean - 0.5078125).abs() < 1e-13, "mean {}", m.mean);
        assert!(
            (m.variance - 0.37847900390625).abs() < 1e-13,
            "var {}",
            m.variance
        );
    }

    #[test]
    fn coupled_moments_trivial_cases() {
        // constant rates: thresholds always agree, J stays zero
        let land = Landscape::build(
            vec![
                Patch {
                    location: vec![0.0],
                    weight: 1.0,
                },
                Patch {
                    location: vec![1.0],
                    weight: 2.0,
                },
            ],
            KernelSpec::Ring,
        )
        .unwrap();
        let model = RateModel::uniform(2, RateFn::Constant(0.3), RateFn::Constant(0.6)).unwrap();
        let x0 = OccupancyState::new(vec![1, 0]).unwrap();
        let m = exact_coupled_moment(&x0, &land, &model, 1.0, 4.0).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 0.0);

        // one step from a deterministic start: p0 = X0, so thresholds agree
        let (land, model) = ring2(1.0, 1.0, 0.5);
        let m = exact_coupled_moment(&x0, &land, &model, 1.0, 1.0).unwrap();
        assert_eq!(m.mean, 0.0);
    }

    #[test]
    fn ctmc_point_mass_at_time_zero() {
        let (land, model) = ring2(2.0, 1.0, 1.0);
        let x0 = OccupancyState::new(vec![0, 1]).unwrap();
        let dist = exact_ctmc_marginal(&x0, &land, &model, 0.0).unwrap();
        assert_eq!(dist.state_probability(&[0, 1]), 1.0);
    }

    #[test]
    fn pure_death_closed_form() {
        let land = Landscape::build(
            vec![Patch {
                location: vec![0.0],
                weight: 1.0,
            }],
            KernelSpec::Ring,
        )
        .unwrap();
        let model = RateModel::uniform(1, RateFn::Constant(0.0), RateFn::Constant(1.0)).unwrap();
        let x0 = OccupancyState::all_occupied(1);
        for t in [0.5f64, 1.0, 2.0] {
            let dist = exact_ctmc_marginal(&x0, &land, &model, t).unwrap();
            assert!((dist.mass_at_empty() - (1.0 - (-t).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn ctmc_marginal_frozen_reference() {
        // n=2, a=(2,2), s12=1, C_i = x_other, E = 1, X0 = (1,0), T = 1;
        // frozen from an independent dense matrix exponential
        let (land, model) = ring2(2.0, 1.0, 1.0);
        let x0 = OccupancyState::new(vec![1, 0]).unwrap();
        let dist = exact_ctmc_marginal(&x0, &land, &model, 1.0).unwrap();
        let expected = [
            0.5200357960294257,
            0.2150601859057844,
            0.0797249026691713,
            0.1851791153956187,
        ];
        for (got, want) in dist.probabilities.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn uniformization_agrees_with_expm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
        for n in 2..=4usize {
            let patches = (0..n)
                .map(|i| Patch {
                    location: vec![i as f64],
                    weight: 0.5 + rng.gen::<f64>(),
                })
                .collect();
            let land = Landscape::build(patches, KernelSpec::Exponential(0.6)).unwrap();
            let model = RateModel::uniform(n, RateFn::Hill(0.4), RateFn::Constant(0.8)).unwrap();
            let x0 = OccupancyState::alternating(n);
            let uni = exact_ctmc_marginal(&x0, &land, &model, 1.5).unwrap();
            let exp = exact_ctmc_marginal_expm(&x0, &land, &model, 1.5).unwrap();
            assert!(uni.sup_distance(&exp) < 1e-8);
            assert!((uni.total() - 1.0).abs() < 1e-12);
            assert!((exp.total() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn discrete_chain_converges_to_ctmc_as_m_grows() {
        let (land, model) = ring2(1.0, 0.9, 0.6);
        let x0 = OccupancyState::new(vec![1, 0]).unwrap();
        let target = exact_ctmc_marginal(&x0, &land, &model, 2.0).unwrap();
        let mut errs = Vec::new();
        for m in [8.0, 16.0, 32.0, 64.0] {
            let dist = exact_chain_distribution(&x0, &land, &model, m, 2.0).unwrap();
            errs.push(dist.sup_distance(&target));
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (1.6..=2.4).contains(&ratio),
                "sup-norm error should halve when m doubles: {errs:?}"
            );
        }
    }
}
