//! Continuous-time dynamics: the occupancy Markov chain, the mean-field ODE
//! system and their bivariate coupling.
//!
//! The chain flips patch `i` up at rate `C_i(x)(1 - x_i)` and down at rate
//! `E_i(x) x_i`. Its deterministic counterpart is the ODE
//! `dp_i/dt = C_i(p)(1 - p_i) - E_i(p) p_i`, integrated here with classical
//! fixed-step RK4. The coupled simulator runs the pair `(W, X)` where `W`
//! is the inhomogeneous independent-patches chain driven by `p(t)`;
//! synchronised and split transitions are generated by exact thinning
//! against a constant dominating rate.

use crate::discrete::OccupancyState;
use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::rates::RateModel;
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solution of the mean-field ODE on a uniform grid.
#[derive(Debug, Clone)]
pub struct OdePath<T> {
    step: T,
    /// `values[k]` is `p(k * step)`.
    values: Vec<Vec<T>>,
    /// Connectivity `S(p)` at every grid point.
    conn: Vec<Vec<T>>,
}

impl<T: Scalar> OdePath<T> {
    pub fn step(&self) -> T {
        self.step
    }

    pub fn horizon(&self) -> T {
        self.step * T::from_count(self.values.len() - 1)
    }

    pub fn grid(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn terminal(&self) -> &[T] {
        self.values.last().unwrap()
    }

    fn locate(&self, t: T) -> (usize, T) {
        let k_max = self.values.len() - 1;
        let raw = (t / self.step).as_f64().floor();
        let k = (raw.max(0.0) as usize).min(k_max.saturating_sub(1));
        let frac = (t - self.step * T::from_count(k)) / self.step;
        (k, frac.max(T::zero()).min(T::one()))
    }

    /// Linear interpolation between grid points; `t` clamped to the horizon.
    pub fn value_at(&self, t: T) -> Vec<T> {
        let n = self.values[0].len();
        let mut out = vec![T::zero(); n];
        self.value_at_into(t, &mut out);
        out
    }

    pub fn value_at_into(&self, t: T, out: &mut [T]) {
        let (k, frac) = self.locate(t);
        lerp_into(&self.values[k], &self.values[k + 1], frac, out);
    }

    /// Interpolated connectivity `S(p(t))`; exact because `S` is linear in `p`.
    pub fn conn_at_into(&self, t: T, out: &mut [T]) {
        let (k, frac) = self.locate(t);
        lerp_into(&self.conn[k], &self.conn[k + 1], frac, out);
    }
}

fn lerp_into<T: Scalar>(a: &[T], b: &[T], frac: T, out: &mut [T]) {
    for i in 0..a.len() {
        out[i] = a[i] + frac * (b[i] - a[i]);
    }
}

/// Default ODE step: `min(0.01, 1 / (10 k))` with `k` the maximum rate.
pub fn default_ode_step<T: Scalar>(land: &Landscape<T>, model: &RateModel<T>) -> T {
    let k = k_max_rate(land, model);
    let cap = T::from_real(0.01);
    if k > T::zero() {
        cap.min((T::from_real(10.0) * k).recip())
    } else {
        cap
    }
}

/// Integrates the mean-field ODE with classical RK4 at fixed step `h`
/// (adjusted slightly so the grid lands on `t_end` exactly).
pub fn integrate_ode<T: Scalar>(
    p0: &[T],
    land: &Landscape<T>,
    model: &RateModel<T>,
    t_end: T,
    h: T,
) -> Result<OdePath<T>> {
    let n = land.n();
    if p0.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: p0.len(),
        });
    }
    for (i, &v) in p0.iter().enumerate() {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::OutOfRange(format!("p0[{i}] = {v} outside [0, 1]")));
        }
    }
    if !(h > T::zero()) || !(t_end >= T::zero()) {
        return Err(Error::OutOfRange("need h > 0 and t_end >= 0".into()));
    }
    let steps = (t_end / h).as_f64().ceil().max(1.0) as usize;
    let h = t_end / T::from_count(steps);

    let mut deriv_buf = DerivBuffers::new(n);
    let mut values = Vec::with_capacity(steps + 1);
    let mut conn_grid = Vec::with_capacity(steps + 1);
    let mut p = p0.to_vec();
    values.push(p.clone());
    conn_grid.push(land.connectivity(&p).unwrap_or_else(|_| {
        let mut c = vec![T::zero(); n];
        land.connectivity_into(&p, &mut c);
        c
    }));

    let tol = T::from_real(1e-12);
    let half = T::half();
    let sixth = T::from_real(6.0).recip();
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut stage = vec![T::zero(); n];
    for _ in 0..steps {
        deriv_buf.eval(land, model, &p, &mut k1);
        for i in 0..n {
            stage[i] = p[i] + half * h * k1[i];
        }
        deriv_buf.eval(land, model, &stage, &mut k2);
        for i in 0..n {
            stage[i] = p[i] + half * h * k2[i];
        }
        deriv_buf.eval(land, model, &stage, &mut k3);
        for i in 0..n {
            stage[i] = p[i] + h * k3[i];
        }
        deriv_buf.eval(land, model, &stage, &mut k4);
        for i in 0..n {
            let v = p[i] + h * sixth * (k1[i] + T::two() * k2[i] + T::two() * k3[i] + k4[i]);
            if v < -tol || v > T::one() + tol {
                return Err(Error::OdeUnstable(format!(
                    "p[{i}] = {v} left [0,1]; reduce the step size"
                )));
            }
            p[i] = v.max(T::zero()).min(T::one());
        }
        values.push(p.clone());
        let mut c = vec![T::zero(); n];
        land.connectivity_into(&p, &mut c);
        conn_grid.push(c);
    }
    Ok(OdePath {
        step: h,
        values,
        conn: conn_grid,
    })
}

struct DerivBuffers<T> {
    clamped: Vec<T>,
    conn: Vec<T>,
    c: Vec<T>,
    e: Vec<T>,
}

impl<T: Scalar> DerivBuffers<T> {
    fn new(n: usize) -> Self {
        Self {
            clamped: vec![T::zero(); n],
            conn: vec![T::zero(); n],
            c: vec![T::zero(); n],
            e: vec![T::zero(); n],
        }
    }

    /// `out_i = C_i(p)(1 - p_i) - E_i(p) p_i`, with intermediate stage
    /// values clamped into the unit cube before evaluating the rates.
    fn eval(&mut self, land: &Landscape<T>, model: &RateModel<T>, p: &[T], out: &mut [T]) {
        for i in 0..p.len() {
            self.clamped[i] = p[i].max(T::zero()).min(T::one());
        }
        land.connectivity_into(&self.clamped, &mut self.conn);
        model.eval_into(&self.conn, &mut self.c, &mut self.e);
        for i in 0..p.len() {
            out[i] = self.c[i] * (T::one() - self.clamped[i]) - self.e[i] * self.clamped[i];
        }
    }
}

/// A single flip of the continuous-time chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<T> {
    pub time: T,
    pub patch: usize,
    pub new_value: u8,
}

/// Event-list representation of one chain trajectory.
#[derive(Debug, Clone)]
pub struct EventPath<T> {
    pub initial: Vec<u8>,
    pub events: Vec<Event<T>>,
    pub horizon: T,
    pub seed: u64,
}

impl<T: Scalar> EventPath<T> {
    /// Dense state at time `t` (replays the event list).
    pub fn state_at(&self, t: T) -> Vec<u8> {
        let mut state = self.initial.clone();
        for ev in &self.events {
            if ev.time > t {
                break;
            }
            state[ev.patch] = ev.new_value;
        }
        state
    }

    pub fn final_state(&self) -> Vec<u8> {
        self.state_at(self.horizon)
    }

    /// First time every patch is empty, if that happens on the path.
    pub fn extinction_time(&self) -> Option<T> {
        let mut occupied: usize = self.initial.iter().map(|&b| b as usize).sum();
        if occupied == 0 {
            return Some(T::zero());
        }
        for ev in &self.events {
            if ev.new_value == 1 {
                occupied += 1;
            } else {
                occupied -= 1;
                if occupied == 0 {
                    return Some(ev.time);
                }
            }
        }
        None
    }

    /// Replays the path, calling `visit(k, t_k, state)` for each requested
    /// time in the sorted slice `times`.
    pub fn scan(&self, times: &[T], mut visit: impl FnMut(usize, T, &[u8])) {
        let mut state = self.initial.clone();
        let mut next = 0usize;
        for ev in &self.events {
            while next < times.len() && times[next] < ev.time {
                visit(next, times[next], &state);
                next += 1;
            }
            state[ev.patch] = ev.new_value;
        }
        while next < times.len() {
            visit(next, times[next], &state);
            next += 1;
        }
    }
}

/// Maximum possible rate of change of a single patch,
/// `max_i max_x max(C_i(x), E_i(x))`, from the families' closed-form suprema.
pub fn k_max_rate<T: Scalar>(land: &Landscape<T>, model: &RateModel<T>) -> T {
    model
        .rate_ceiling(land.connectivity_ceiling())
        .into_iter()
        .fold(T::zero(), |a, b| a.max(b))
}

/// Exact event-driven simulation of the occupancy chain up to `t_end`.
///
/// Competing exponentials: the next event time is exponential in the total
/// rate and the flipped patch is chosen proportionally to its rate. Stops
/// early once the total rate hits zero.
pub fn simulate_ctmc<T: Scalar>(
    x0: &OccupancyState,
    land: &Landscape<T>,
    model: &RateModel<T>,
    t_end: T,
    seed: u64,
) -> Result<EventPath<T>> {
    let n = land.n();
    if x0.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: x0.n(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = x0.bits().to_vec();
    let mut conn = vec![T::zero(); n];
    let xr = x0.to_reals::<T>();
    land.connectivity_into(&xr, &mut conn);
    let mut rates = vec![T::zero(); n];
    for i in 0..n {
        rates[i] = patch_rate(model, state[i], conn[i], i);
    }
    let mut total: T = rates.iter().copied().sum();
    let mut events = Vec::new();
    let mut t = T::zero();
    loop {
        if !(total > T::zero()) {
            break; // absorbed
        }
        let u: f64 = rng.gen();
        t -= T::from_real((1.0 - u).ln()) / total;
        if t > t_end {
            break;
        }
        // proportional selection by cumulative scan
        let mut target = T::from_real(rng.gen::<f64>()) * total;
        let mut chosen = n - 1;
        for (i, &r) in rates.iter().enumerate() {
            if target < r {
                chosen = i;
                break;
            }
            target -= r;
        }
        let new_value = 1 - state[chosen];
        state[chosen] = new_value;
        events.push(Event {
            time: t,
            patch: chosen,
            new_value,
        });
        // connectivity and rate updates along the flipped patch's row
        let sign = if new_value == 1 { T::one() } else { -T::one() };
        let w_j = land.weight(chosen);
        let inv_n = T::from_count(n).recip();
        let row = land.s_row(chosen);
        for i in 0..n {
            if row[i] != T::zero() {
                conn[i] = (conn[i] + sign * w_j * row[i] * inv_n).max(T::zero());
                rates[i] = patch_rate(model, state[i], conn[i], i);
            }
        }
        rates[chosen] = patch_rate(model, state[chosen], conn[chosen], chosen);
        total = rates.iter().copied().sum();
    }
    Ok(EventPath {
        initial: x0.bits().to_vec(),
        events,
        horizon: t_end,
        seed,
    })
}

#[inline]
fn patch_rate<T: Scalar>(model: &RateModel<T>, occupied: u8, conn: T, i: usize) -> T {
    if occupied == 1 {
        model.extinction(i).eval(conn)
    } else {
        model.colonisation(i).eval(conn)
    }
}

/// One transition of the coupled pair; at least one chain moves.
#[derive(Debug, Clone, Copy)]
pub struct CoupledEvent<T> {
    pub time: T,
    pub patch: usize,
    pub w_new: Option<u8>,
    pub x_new: Option<u8>,
}

/// Joint event path of `(W, X)` with the sticky disagreement process.
#[derive(Debug, Clone)]
pub struct CoupledCtTrajectory<T> {
    pub initial: Vec<u8>,
    pub events: Vec<CoupledEvent<T>>,
    pub horizon: T,
    pub seed: u64,
    /// Disagreement indicators at the horizon.
    pub final_j: Vec<u8>,
}

impl<T: Scalar> CoupledCtTrajectory<T> {
    /// Replays the joint path, calling `visit(k, t_k, w, x, j)` at each
    /// requested time in the sorted slice `times`.
    pub fn scan(&self, times: &[T], mut visit: impl FnMut(usize, T, &[u8], &[u8], &[u8])) {
        let mut w = self.initial.clone();
        let mut x = self.initial.clone();
        let mut j = vec![0u8; w.len()];
        let mut next = 0usize;
        for ev in &self.events {
            while next < times.len() && times[next] < ev.time {
                visit(next, times[next], &w, &x, &j);
                next += 1;
            }
            if let Some(v) = ev.w_new {
                w[ev.patch] = v;
            }
            if let Some(v) = ev.x_new {
                x[ev.patch] = v;
            }
            if w[ev.patch] != x[ev.patch] {
                j[ev.patch] = 1;
            }
        }
        while next < times.len() {
            visit(next, times[next], &w, &x, &j);
            next += 1;
        }
    }

    /// Weighted disagreement `sum_i a_i J_i` at the horizon.
    pub fn final_weighted_disagreement(&self, land: &Landscape<T>) -> T {
        self.final_j
            .iter()
            .enumerate()
            .map(|(i, &ji)| land.weight(i) * T::from_count(ji as usize))
            .sum()
    }

    /// Marginal `X` path, for comparisons against the plain chain.
    pub fn x_events(&self) -> EventPath<T> {
        let events = self
            .events
            .iter()
            .filter_map(|ev| {
                ev.x_new.map(|v| Event {
                    time: ev.time,
                    patch: ev.patch,
                    new_value: v,
                })
            })
            .collect();
        EventPath {
            initial: self.initial.clone(),
            events,
            horizon: self.horizon,
            seed: self.seed,
        }
    }
}

/// Exact simulation of the bivariate inhomogeneous chain `(W, X)` by
/// thinning against the constant dominating rate `2 n k`.
///
/// Per candidate time a patch is drawn uniformly and one of its (at most
/// three) transitions accepted with probability `rate / (2k)`:
/// agreeing coordinates move synchronously at the minimum of the two rates
/// and split at the positive parts of their difference; disagreeing
/// coordinates move independently, `W` at its `p(t)`-driven rate and `X`
/// at its own.
pub fn simulate_coupled_ct<T: Scalar>(
    x0: &OccupancyState,
    land: &Landscape<T>,
    model: &RateModel<T>,
    t_end: T,
    seed: u64,
    ode: &OdePath<T>,
) -> Result<CoupledCtTrajectory<T>> {
    let n = land.n();
    if x0.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: x0.n(),
        });
    }
    if ode.horizon() < t_end - T::from_real(1e-9) {
        return Err(Error::Invalid(format!(
            "ode path covers [0, {}] but the simulation horizon is {t_end}",
            ode.horizon()
        )));
    }
    let k_max = k_max_rate(land, model);
    let two_k = T::two() * k_max;
    let dominating = T::from_count(n) * two_k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut w = x0.bits().to_vec();
    let mut x = x0.bits().to_vec();
    let mut j = vec![0u8; n];
    let mut conn_x = vec![T::zero(); n];
    land.connectivity_into(&x0.to_reals::<T>(), &mut conn_x);
    let mut conn_p = vec![T::zero(); n];
    let mut events = Vec::new();
    let mut t = T::zero();
    let tol = T::from_real(1e-9);

    if !(dominating > T::zero()) {
        // all rates are identically zero; nothing can ever move
        return Ok(CoupledCtTrajectory {
            initial: x0.bits().to_vec(),
            events,
            horizon: t_end,
            seed,
            final_j: j,
        });
    }

    loop {
        let u: f64 = rng.gen();
        t -= T::from_real((1.0 - u).ln()) / dominating;
        if t > t_end {
            break;
        }
        let i = rng.gen_range(0..n);
        ode.conn_at_into(t, &mut conn_p);
        let cw = model.colonisation(i).eval(conn_p[i]);
        let ew = model.extinction(i).eval(conn_p[i]);
        let cx = model.colonisation(i).eval(conn_x[i]);
        let ex = model.extinction(i).eval(conn_x[i]);
        // (rate, w move, x move); None = that chain stays put
        let moves: [(T, Option<u8>, Option<u8>); 3] = match (w[i], x[i]) {
            (1, 1) => [
                (ew.min(ex), Some(0), Some(0)),
                ((ew - ex).max(T::zero()), Some(0), None),
                ((ex - ew).max(T::zero()), None, Some(0)),
            ],
            (0, 0) => [
                (cw.min(cx), Some(1), Some(1)),
                ((cw - cx).max(T::zero()), Some(1), None),
                ((cx - cw).max(T::zero()), None, Some(1)),
            ],
            (1, 0) => [
                (ew, Some(0), None),
                (cx, None, Some(1)),
                (T::zero(), None, None),
            ],
            _ => [
                (cw, Some(1), None),
                (ex, None, Some(0)),
                (T::zero(), None, None),
            ],
        };
        let block: T = moves.iter().map(|m| m.0).sum();
        assert!(
            block <= two_k + tol,
            "patch transition rates {block} exceed the dominating rate {two_k}"
        );
        let mut target = T::from_real(rng.gen::<f64>()) * two_k;
        let mut applied = None;
        for (rate, w_mv, x_mv) in moves {
            if target < rate {
                applied = Some((w_mv, x_mv));
                break;
            }
            target -= rate;
        }
        let Some((w_mv, x_mv)) = applied else {
            continue; // thinning rejection
        };
        if let Some(v) = w_mv {
            w[i] = v;
        }
        if let Some(v) = x_mv {
            x[i] = v;
            // X flipped: refresh connectivity along patch i's row
            let sign = if v == 1 { T::one() } else { -T::one() };
            let w_i = land.weight(i);
            let inv_n = T::from_count(n).recip();
            let row = land.s_row(i);
            for l in 0..n {
                if row[l] != T::zero() {
                    conn_x[l] = (conn_x[l] + sign * w_i * row[l] * inv_n).max(T::zero());
                }
            }
        }
        if w[i] != x[i] {
            j[i] = 1;
        }
        events.push(CoupledEvent {
            time: t,
            patch: i,
            w_new: w_mv,
            x_new: x_mv,
        });
    }
    Ok(CoupledCtTrajectory {
        initial: x0.bits().to_vec(),
        events,
        horizon: t_end,
        seed,
        final_j: j,
    })
}
