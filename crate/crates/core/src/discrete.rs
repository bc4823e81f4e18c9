//! Discrete-time incidence-function chain, its deterministic recursion and
//! the shared-uniform coupling with the independent-patches chain.
//!
//! One step of the occupancy chain `X` flips patch `i` according to a single
//! uniform `U_{i,t}` compared against a colonisation or survival threshold.
//! The independent-patches chain `W` uses the *same* uniforms but thresholds
//! evaluated at the deterministic state `p` instead of `X`, which keeps the
//! marginal law of each chain intact while making their pathwise distance
//! meaningful. The disagreement indicator `J_{i,t}` records whether patch
//! `i` has ever differed between the two chains up to time `t`.

use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::rates::RateModel;
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Binary occupancy vector in `{0,1}^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyState {
    bits: Vec<u8>,
}

impl OccupancyState {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::OutOfRange(format!("occupancy[{i}] must be 0 or 1")));
        }
        Ok(Self { bits })
    }

    pub fn all_occupied(n: usize) -> Self {
        Self { bits: vec![1; n] }
    }

    pub fn all_empty(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    /// Alternating 1,0,1,0,... pattern.
    pub fn alternating(n: usize) -> Self {
        Self {
            bits: (0..n).map(|i| (1 - i % 2) as u8).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_occupied(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn to_reals<T: Scalar>(&self) -> Vec<T> {
        self.bits
            .iter()
            .map(|&b| T::from_count(b as usize))
            .collect()
    }
}

/// Vector in `[0,1]^n` holding the deterministic occupancy probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ProbabilityVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::OutOfRange(format!("p[{i}] = {v} outside [0, 1]")));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Number of chain steps for horizon `T` at resolution `m`; `m * T` must be
/// an integer (up to rounding slack).
pub fn steps_for<T: Scalar>(m: T, horizon: T) -> Result<usize> {
    let s = (m * horizon).as_f64();
    let rounded = s.round();
    if (s - rounded).abs() > 1e-9 * rounded.abs().max(1.0) || rounded < 0.0 {
        return Err(Error::NonIntegerSteps(s));
    }
    Ok(rounded as usize)
}

/// One step of the deterministic recursion
/// `p'_i = p_i + m^-1 C_i(p) (1 - p_i) - m^-1 E_i(p) p_i`.
///
/// Panics if the output leaves `[0,1]` by more than an FP slack, which
/// means the caller skipped `validate_timestep`.
pub fn step_deterministic<T: Scalar>(
    p: &[T],
    land: &Landscape<T>,
    model: &RateModel<T>,
    m: T,
) -> Vec<T> {
    let n = land.n();
    let mut conn = vec![T::zero(); n];
    land.connectivity_into(p, &mut conn);
    let (c, e) = model.eval(&conn);
    let mut out = vec![T::zero(); n];
    deterministic_update(p, &c, &e, m, &mut out);
    out
}

fn deterministic_update<T: Scalar>(p: &[T], c: &[T], e: &[T], m: T, out: &mut [T]) {
    let tol = T::from_real(1e-12);
    let inv_m = m.recip();
    for i in 0..p.len() {
        let v = p[i] + inv_m * c[i] * (T::one() - p[i]) - inv_m * e[i] * p[i];
        assert!(
            v >= -tol && v <= T::one() + tol,
            "deterministic step left [0,1] at patch {i}: {v}; time step too coarse"
        );
        out[i] = v.max(T::zero()).min(T::one());
    }
}

/// One coupled transition of `(X, W, p)` driven by the shared uniforms `u`.
pub fn step_coupled<T: Scalar>(
    x: &OccupancyState,
    w: &OccupancyState,
    p: &[T],
    u: &[T],
    land: &Landscape<T>,
    model: &RateModel<T>,
    m: T,
) -> (OccupancyState, OccupancyState, Vec<T>) {
    let n = land.n();
    assert!(x.n() == n && w.n() == n && p.len() == n && u.len() == n);
    let mut conn = vec![T::zero(); n];
    let xr = x.to_reals::<T>();
    land.connectivity_into(&xr, &mut conn);
    let (cx, ex) = model.eval(&conn);
    land.connectivity_into(p, &mut conn);
    let (cp, ep) = model.eval(&conn);

    let inv_m = m.recip();
    let mut x2 = vec![0u8; n];
    let mut w2 = vec![0u8; n];
    for i in 0..n {
        x2[i] = chain_bit(x.bits()[i], u[i], inv_m * cx[i], inv_m * ex[i]);
        w2[i] = chain_bit(w.bits()[i], u[i], inv_m * cp[i], inv_m * ep[i]);
    }
    let mut p2 = vec![T::zero(); n];
    deterministic_update(p, &cp, &ep, m, &mut p2);
    (OccupancyState { bits: x2 }, OccupancyState { bits: w2 }, p2)
}

#[inline]
fn chain_bit<T: Scalar>(current: u8, u: T, colonise: T, extinguish: T) -> u8 {
    if current == 0 {
        u8::from(u <= colonise)
    } else {
        u8::from(u <= T::one() - extinguish)
    }
}

/// Path of the occupancy chain alone.
#[derive(Debug, Clone)]
pub struct OccupancyPath {
    /// `steps + 1` states, row `t` is the state at time `t`.
    pub states: Vec<Vec<u8>>,
    pub seed: u64,
}

/// Synchronized paths of `(X, W, p, J)` from one coupled run.
#[derive(Debug, Clone)]
pub struct CoupledTrajectory<T> {
    pub x: Vec<Vec<u8>>,
    pub w: Vec<Vec<u8>>,
    pub p: Vec<Vec<T>>,
    /// Sticky disagreement indicators; `j[t][i]` is non-decreasing in `t`.
    pub j: Vec<Vec<u8>>,
    pub m: T,
    pub seed: u64,
}

impl<T: Scalar> CoupledTrajectory<T> {
    pub fn steps(&self) -> usize {
        self.x.len() - 1
    }

    pub fn n(&self) -> usize {
        self.x[0].len()
    }

    /// Weighted disagreement `sum_i a_i J_{i,t}`.
    pub fn weighted_disagreement(&self, t: usize, land: &Landscape<T>) -> T {
        self.j[t]
            .iter()
            .enumerate()
            .map(|(i, &ji)| land.weight(i) * T::from_count(ji as usize))
            .sum()
    }

    /// `n^-1 sum_i |X_{i,t} - W_{i,t}|`.
    pub fn l1_distance(&self, t: usize) -> T {
        let n = self.n();
        let diff = self.x[t]
            .iter()
            .zip(&self.w[t])
            .filter(|(a, b)| a != b)
            .count();
        T::from_count(diff) / T::from_count(n)
    }
}

/// Runs the coupled `(X, W, p)` system for `m * T` steps.
///
/// `W_0 = X_0` and `p_0 = X_0` read as reals. Uniforms are consumed in a
/// fixed order (step-major, patch-minor) from a ChaCha stream, so runs are
/// reproducible and the `X` marginal is bit-identical to [`simulate_ifm`]
/// under the same seed.
pub fn simulate_coupled<T: Scalar>(
    x0: &OccupancyState,
    land: &Landscape<T>,
    model: &RateModel<T>,
    m: T,
    horizon: T,
    seed: u64,
) -> Result<CoupledTrajectory<T>> {
    model.validate_timestep(land, m)?;
    let steps = steps_for(m, horizon)?;
    let n = land.n();
    if x0.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: x0.n(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(steps + 1);
    let mut w = Vec::with_capacity(steps + 1);
    let mut p = Vec::with_capacity(steps + 1);
    let mut j = Vec::with_capacity(steps + 1);
    x.push(x0.bits().to_vec());
    w.push(x0.bits().to_vec());
    p.push(x0.to_reals::<T>());
    j.push(vec![0u8; n]);

    let mut cur_x = x0.clone();
    let mut cur_w = x0.clone();
    let mut cur_p = x0.to_reals::<T>();
    let mut cur_j = vec![0u8; n];
    let mut u = vec![T::zero(); n];
    for _ in 0..steps {
        for ui in u.iter_mut() {
            *ui = T::from_real(rng.gen::<f64>());
        }
        let (nx, nw, np) = step_coupled(&cur_x, &cur_w, &cur_p, &u, land, model, m);
        for i in 0..n {
            if nx.bits()[i] != nw.bits()[i] {
                cur_j[i] = 1;
            }
        }
        x.push(nx.bits().to_vec());
        w.push(nw.bits().to_vec());
        p.push(np.clone());
        j.push(cur_j.clone());
        cur_x = nx;
        cur_w = nw;
        cur_p = np;
    }
    Ok(CoupledTrajectory {
        x,
        w,
        p,
        j,
        m,
        seed,
    })
}

/// Runs the occupancy chain alone, with the same uniform-stream convention
/// as [`simulate_coupled`].
pub fn simulate_ifm<T: Scalar>(
    x0: &OccupancyState,
    land: &Landscape<T>,
    model: &RateModel<T>,
    m: T,
    horizon: T,
    seed: u64,
) -> Result<OccupancyPath> {
    model.validate_timestep(land, m)?;
    let steps = steps_for(m, horizon)?;
    let n = land.n();
    if x0.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: x0.n(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.bits().to_vec());
    let mut cur = x0.bits().to_vec();
    let mut conn = vec![T::zero(); n];
    let mut xr = x0.to_reals::<T>();
    let inv_m = m.recip();
    let mut c = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    for _ in 0..steps {
        land.connectivity_into(&xr, &mut conn);
        model.eval_into(&conn, &mut c, &mut e);
        for i in 0..n {
            let u = T::from_real(rng.gen::<f64>());
            cur[i] = chain_bit(cur[i], u, inv_m * c[i], inv_m * e[i]);
            xr[i] = T::from_count(cur[i] as usize);
        }
        states.push(cur.clone());
    }
    Ok(OccupancyPath { states, seed })
}
