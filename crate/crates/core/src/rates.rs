//! Colonisation and extinction rate functions of connectivity.
//!
//! Rate functions come from a closed set of parametric families so that
//! Lipschitz constants and suprema over the reachable connectivity range
//! are available in closed form; the deviation bounds depend on them
//! being trustworthy rather than numerically estimated.

use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::scalar::Scalar;

/// A rate function `[0, inf) -> [0, inf)` from one of the supported families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFn<T> {
    /// `f(s) = lambda * s`
    Linear(T),
    /// `f(s) = c`
    Constant(T),
    /// `f(s) = s^2 / (s^2 + y^2)`, saturating at 1
    Hill(T),
    /// `f(s) = e * (1 - s^2 / (s^2 + y^2))`: extinction damped by connectivity
    Rescue(T, T),
}

impl<T: Scalar> RateFn<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateFn::Linear(l) if l < T::zero() => Err(Error::InvalidRate(format!(
                "linear slope must be >= 0, got {l}"
            ))),
            RateFn::Constant(c) if c < T::zero() => Err(Error::InvalidRate(format!(
                "constant rate must be >= 0, got {c}"
            ))),
            RateFn::Hill(y) if !(y > T::zero()) => Err(Error::InvalidRate(format!(
                "hill scale must be > 0, got {y}"
            ))),
            RateFn::Rescue(e, y) if e < T::zero() || !(y > T::zero()) => Err(Error::InvalidRate(
                format!("rescue needs e >= 0 and y > 0, got ({e}, {y})"),
            )),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, s: T) -> T {
        // connectivity is non-negative by construction; clamp FP drift
        let s = s.max(T::zero());
        match *self {
            RateFn::Linear(l) => l * s,
            RateFn::Constant(c) => c,
            RateFn::Hill(y) => hill(s, y),
            RateFn::Rescue(e, y) => e * (T::one() - hill(s, y)),
        }
    }

    /// Lipschitz constant valid on `[0, s_max]`.
    pub fn lipschitz_on(&self, s_max: T) -> T {
        match *self {
            RateFn::Linear(l) => l,
            RateFn::Constant(_) => T::zero(),
            RateFn::Hill(y) => hill_slope_max(s_max, y),
            RateFn::Rescue(e, y) => e * hill_slope_max(s_max, y),
        }
    }

    /// Supremum of the function over `[0, s_max]`.
    pub fn sup_on(&self, s_max: T) -> T {
        match *self {
            RateFn::Linear(l) => l * s_max,
            RateFn::Constant(c) => c,
            RateFn::Hill(y) => hill(s_max, y), // non-decreasing
            RateFn::Rescue(e, _) => e,         // non-increasing, max at 0
        }
    }

    /// Parses `linear(2.0)`, `const(1.0)`, `hill(0.5)` or `rescue(1.0, 0.5)`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let open = text
            .find('(')
            .ok_or_else(|| Error::Parse(format!("rate function needs arguments: {text}")))?;
        if !text.ends_with(')') {
            return Err(Error::Parse(format!("unbalanced parentheses: {text}")));
        }
        let name = text[..open].trim();
        let args: Vec<T> = text[open + 1..text.len() - 1]
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map(T::from_real)
                    .map_err(|e| Error::Parse(format!("bad rate argument {a:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let need = |k: usize| -> Result<()> {
            if args.len() != k {
                return Err(Error::Parse(format!(
                    "{name} takes {k} argument(s), got {}",
                    args.len()
                )));
            }
            Ok(())
        };
        let f = match name {
            "linear" => {
                need(1)?;
                RateFn::Linear(args[0])
            }
            "const" | "constant" => {
                need(1)?;
                RateFn::Constant(args[0])
            }
            "hill" => {
                need(1)?;
                RateFn::Hill(args[0])
            }
            "rescue" => {
                need(2)?;
                RateFn::Rescue(args[0], args[1])
            }
            other => return Err(Error::Parse(format!("unknown rate family: {other}"))),
        };
        f.validate()?;
        Ok(f)
    }
}

impl<T: Scalar> std::fmt::Display for RateFn<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateFn::Linear(l) => write!(f, "linear({l})"),
            RateFn::Constant(c) => write!(f, "const({c})"),
            RateFn::Hill(y) => write!(f, "hill({y})"),
            RateFn::Rescue(e, y) => write!(f, "rescue({e}, {y})"),
        }
    }
}

fn hill<T: Scalar>(s: T, y: T) -> T {
    let s2 = s * s;
    s2 / (s2 + y * y)
}

/// Max of `|d/ds hill(s, y)| = 2 s y^2 / (s^2 + y^2)^2` over `[0, s_max]`.
///
/// The derivative increases up to `s = y / sqrt(3)` where it peaks at
/// `3 sqrt(3) / (8 y)`, then decreases.
fn hill_slope_max<T: Scalar>(s_max: T, y: T) -> T {
    let three = T::from_real(3.0);
    let s_star = y / three.sqrt();
    let at = |s: T| {
        let d = s * s + y * y;
        T::two() * s * y * y / (d * d)
    };
    if s_max >= s_star {
        three * three.sqrt() / (T::from_real(8.0) * y)
    } else {
        at(s_max)
    }
}

/// Per-patch Lipschitz constants of a rate model on the reachable range.
#[derive(Debug, Clone)]
pub struct LipschitzConstants<T> {
    pub colonisation: Vec<T>,
    pub extinction: Vec<T>,
    /// Per-patch sum `L_i = L_i(C) + L_i(E)`.
    pub total: Vec<T>,
}

/// Per-patch pair of colonisation/extinction rate functions.
#[derive(Debug, Clone)]
pub struct RateModel<T> {
    colonisation: Vec<RateFn<T>>,
    extinction: Vec<RateFn<T>>,
}

impl<T: Scalar> RateModel<T> {
    pub fn new(colonisation: Vec<RateFn<T>>, extinction: Vec<RateFn<T>>) -> Result<Self> {
        if colonisation.len() != extinction.len() {
            return Err(Error::LengthMismatch {
                expected: colonisation.len(),
                got: extinction.len(),
            });
        }
        if colonisation.is_empty() {
            return Err(Error::Invalid("rate model needs at least one patch".into()));
        }
        for f in colonisation.iter().chain(&extinction) {
            f.validate()?;
        }
        Ok(Self {
            colonisation,
            extinction,
        })
    }

    /// Same function pair at every patch.
    pub fn uniform(n: usize, colonisation: RateFn<T>, extinction: RateFn<T>) -> Result<Self> {
        Self::new(vec![colonisation; n], vec![extinction; n])
    }

    pub fn n(&self) -> usize {
        self.colonisation.len()
    }

    pub fn colonisation(&self, i: usize) -> &RateFn<T> {
        &self.colonisation[i]
    }

    pub fn extinction(&self, i: usize) -> &RateFn<T> {
        &self.extinction[i]
    }

    /// Evaluates `C_i = f_C,i(S_i)` and `E_i = f_E,i(S_i)`.
    pub fn eval(&self, conn: &[T]) -> (Vec<T>, Vec<T>) {
        let mut c = vec![T::zero(); conn.len()];
        let mut e = vec![T::zero(); conn.len()];
        self.eval_into(conn, &mut c, &mut e);
        (c, e)
    }

    pub fn eval_into(&self, conn: &[T], c_out: &mut [T], e_out: &mut [T]) {
        for i in 0..conn.len() {
            c_out[i] = self.colonisation[i].eval(conn[i]);
            e_out[i] = self.extinction[i].eval(conn[i]);
        }
    }

    /// Analytic Lipschitz constants on `[0, s_max_i]` per patch.
    pub fn lipschitz(&self, s_max: &[T]) -> LipschitzConstants<T> {
        let col: Vec<T> = self
            .colonisation
            .iter()
            .zip(s_max)
            .map(|(f, &s)| f.lipschitz_on(s))
            .collect();
        let ext: Vec<T> = self
            .extinction
            .iter()
            .zip(s_max)
            .map(|(f, &s)| f.lipschitz_on(s))
            .collect();
        let total = col.iter().zip(&ext).map(|(&a, &b)| a + b).collect();
        LipschitzConstants {
            colonisation: col,
            extinction: ext,
            total,
        }
    }

    /// Per-patch supremum of `max(f_C, f_E)` over the reachable range.
    pub fn rate_ceiling(&self, s_max: &[T]) -> Vec<T> {
        self.colonisation
            .iter()
            .zip(&self.extinction)
            .zip(s_max)
            .map(|((c, e), &s)| c.sup_on(s).max(e.sup_on(s)))
            .collect()
    }

    /// Checks that `m^-1 max(C_i(x), E_i(x)) <= 1` for every reachable state,
    /// so the chain transition probabilities are valid.
    pub fn validate_timestep(&self, land: &Landscape<T>, m: T) -> Result<()> {
        if land.n() != self.n() {
            return Err(Error::LengthMismatch {
                expected: land.n(),
                got: self.n(),
            });
        }
        if !(m > T::zero()) {
            return Err(Error::OutOfRange(format!("m must be positive, got {m}")));
        }
        let ceilings = self.rate_ceiling(land.connectivity_ceiling());
        for (i, &sup) in ceilings.iter().enumerate() {
            if sup > m {
                return Err(Error::TimestepTooCoarse {
                    patch: i,
                    sup: sup.as_f64(),
                    m: m.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Parses a rates config: a default pair plus optional per-patch overrides.
    ///
    /// ```text
    /// colonisation = linear(2.0)
    /// extinction = const(1.0)
    /// colonisation[3] = hill(0.5)
    /// ```
    pub fn parse_config(text: &str, n: usize) -> Result<Self> {
        let mut col_default = None;
        let mut ext_default = None;
        let mut overrides: Vec<(bool, usize, RateFn<T>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, rhs) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key = value", lineno + 1))
            })?;
            let lhs = lhs.trim();
            let f = RateFn::parse(rhs)?;
            let (key, idx) = match lhs.split_once('[') {
                Some((k, rest)) => {
                    let idx: usize = rest
                        .strip_suffix(']')
                        .ok_or_else(|| Error::Parse(format!("line {}: bad index", lineno + 1)))?
                        .trim()
                        .parse()
                        .map_err(|e| {
                            Error::Parse(format!("line {}: bad index: {e}", lineno + 1))
                        })?;
                    (k.trim(), Some(idx))
                }
                None => (lhs, None),
            };
            let is_col = match key {
                "colonisation" | "colonization" => true,
                "extinction" => false,
                other => return Err(Error::Parse(format!("unknown key: {other}"))),
            };
            match idx {
                None => {
                    if is_col {
                        col_default = Some(f);
                    } else {
                        ext_default = Some(f);
                    }
                }
                Some(i) => {
                    if i >= n {
                        return Err(Error::Parse(format!(
                            "override index {i} out of range for n = {n}"
                        )));
                    }
                    overrides.push((is_col, i, f));
                }
            }
        }
        let col = col_default.ok_or_else(|| Error::Parse("missing colonisation".into()))?;
        let ext = ext_default.ok_or_else(|| Error::Parse("missing extinction".into()))?;
        let mut model = Self::uniform(n, col, ext)?;
        for (is_col, i, f) in overrides {
            if is_col {
                model.colonisation[i] = f;
            } else {
                model.extinction[i] = f;
            }
        }
        Ok(model)
    }
}
