//! Patch networks: locations, weights and the interaction kernel.
//!
//! A [`Landscape`] holds `n` patches, each with a location `z` in `R^d` and
//! a positive weight `a`, together with a symmetric non-negative kernel
//! matrix `s` with zero diagonal. The connectivity of patch `i` in state
//! `x` is the weighted average influence of the other patches,
//!
//! ```text
//! S_i(x) = n^-1 * sum_{j != i} x_j * a_j * s_ji .
//! ```

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A habitat patch: location in `R^d` plus a positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch<T> {
    pub location: Vec<T>,
    pub weight: T,
}

impl<T: Scalar> Patch<T> {
    pub fn new(location: Vec<T>, weight: T) -> Result<Self> {
        if location.is_empty() {
            return Err(Error::Invalid(
                "patch location must have dimension >= 1".into(),
            ));
        }
        if !(weight > T::zero()) {
            return Err(Error::OutOfRange(format!(
                "patch weight must be positive, got {weight}"
            )));
        }
        Ok(Self { location, weight })
    }
}

/// Interaction kernel used to build the matrix `s`.
#[derive(Debug, Clone)]
pub enum KernelSpec<T> {
    /// `s_ij = exp(-alpha * |z_i - z_j|)`.
    Exponential(T),
    /// `s_ij = 1[|z_i - z_j| <= R] / (v(d) R^d)` with `v(d)` the unit-ball volume.
    TopHat(T),
    /// `s_ij = 1` for ring neighbours (wrapping around), else 0.
    Ring,
    /// Explicit symmetric matrix with zero diagonal and non-negative entries.
    Explicit(Vec<Vec<T>>),
}

/// How the kernel matrix of a landscape was produced; kept for serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelForm<T> {
    Exponential(T),
    TopHat(T),
    Ring,
    Matrix,
}

/// Procedural landscape generators.
#[derive(Debug, Clone)]
pub enum GenerateSpec {
    /// `n` locations i.i.d. uniform on `[0, n^(1/d)]^d`, every weight equal to `n`.
    UniformBox { n: usize, d: usize, seed: u64 },
    /// Regular integer lattice covering the first `n` sites, unit weights.
    Grid { n: usize, d: usize },
    /// Patches at integer positions on a line, unit weights.
    Ring { n: usize },
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

#[derive(Debug, Clone)]
pub struct Landscape<T> {
    patches: Vec<Patch<T>>,
    dim: usize,
    /// Row-major `n x n` kernel matrix.
    s: Vec<T>,
    kernel_form: KernelForm<T>,
    /// `S_i(1)`: the attainable connectivity ceiling per patch.
    conn_ceiling: Vec<T>,
}

impl<T: Scalar> Landscape<T> {
    /// Builds a landscape from patches and a kernel specification.
    pub fn build(patches: Vec<Patch<T>>, kernel: KernelSpec<T>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::Invalid("landscape needs at least one patch".into()));
        }
        let dim = patches[0].location.len();
        for p in &patches {
            if p.location.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.location.len(),
                });
            }
            if !(p.weight > T::zero()) {
                return Err(Error::OutOfRange("patch weight must be positive".into()));
            }
        }
        let n = patches.len();
        let mut s = vec![T::zero(); n * n];
        let kernel_form;
        match &kernel {
            KernelSpec::Exponential(alpha) => {
                if !(*alpha > T::zero()) {
                    return Err(Error::InvalidKernel(
                        "exponential alpha must be positive".into(),
                    ));
                }
                kernel_form = KernelForm::Exponential(*alpha);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v =
                            (-*alpha * distance(&patches[i].location, &patches[j].location)).exp();
                        s[i * n + j] = v;
                        s[j * n + i] = v;
                    }
                }
            }
            KernelSpec::TopHat(radius) => {
                if !(*radius > T::zero()) {
                    return Err(Error::InvalidKernel(
                        "top-hat radius must be positive".into(),
                    ));
                }
                kernel_form = KernelForm::TopHat(*radius);
                let scale = T::from_real(unit_ball_volume(dim)).recip() / radius.powi(dim as i32);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let d = distance(&patches[i].location, &patches[j].location);
                        if d <= *radius {
                            s[i * n + j] = scale;
                            s[j * n + i] = scale;
                        }
                    }
                }
            }
            KernelSpec::Ring => {
                kernel_form = KernelForm::Ring;
                for i in 0..n.saturating_sub(1) {
                    s[i * n + i + 1] = T::one();
                    s[(i + 1) * n + i] = T::one();
                }
                if n >= 2 {
                    s[n - 1] = T::one(); // (0, n-1)
                    s[(n - 1) * n] = T::one();
                }
            }
            KernelSpec::Explicit(rows) => {
                kernel_form = KernelForm::Matrix;
                if rows.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: rows.len(),
                    });
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::LengthMismatch {
                            expected: n,
                            got: row.len(),
                        });
                    }
                    for (j, &v) in row.iter().enumerate() {
                        if i == j && v != T::zero() {
                            return Err(Error::InvalidKernel(format!(
                                "matrix diagonal must be zero, s[{i}][{i}] = {v}"
                            )));
                        }
                        if v < T::zero() {
                            return Err(Error::InvalidKernel(format!(
                                "matrix entries must be non-negative, s[{i}][{j}] = {v}"
                            )));
                        }
                        if rows[j][i] != v {
                            return Err(Error::InvalidKernel(format!(
                                "matrix must be symmetric, s[{i}][{j}] != s[{j}][{i}]"
                            )));
                        }
                        s[i * n + j] = v;
                    }
                }
            }
        }
        let mut land = Self {
            patches,
            dim,
            s,
            kernel_form,
            conn_ceiling: Vec::new(),
        };
        land.conn_ceiling = land.connectivity_of_full();
        Ok(land)
    }

    /// Generates a landscape procedurally; deterministic in the seed.
    pub fn generate(spec: &GenerateSpec, kernel: KernelSpec<T>) -> Result<Self> {
        let patches = match *spec {
            GenerateSpec::UniformBox { n, d, seed } => {
                if n == 0 || d == 0 {
                    return Err(Error::Invalid("uniform box needs n >= 1 and d >= 1".into()));
                }
                let side = (n as f64).powf(1.0 / d as f64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n)
                    .map(|_| Patch {
                        location: (0..d)
                            .map(|_| T::from_real(side * rng.gen::<f64>()))
                            .collect(),
                        weight: T::from_count(n),
                    })
                    .collect()
            }
            GenerateSpec::Grid { n, d } => {
                if n == 0 || d == 0 {
                    return Err(Error::Invalid("grid needs n >= 1 and d >= 1".into()));
                }
                let side = (n as f64).powf(1.0 / d as f64).ceil() as usize;
                let mut patches = Vec::with_capacity(n);
                'outer: for flat in 0..side.pow(d as u32) {
                    let mut rem = flat;
                    let mut loc = Vec::with_capacity(d);
                    for _ in 0..d {
                        loc.push(T::from_count(rem % side));
                        rem /= side;
                    }
                    patches.push(Patch {
                        location: loc,
                        weight: T::one(),
                    });
                    if patches.len() == n {
                        break 'outer;
                    }
                }
                patches
            }
            GenerateSpec::Ring { n } => {
                if n == 0 {
                    return Err(Error::Invalid("ring needs n >= 1".into()));
                }
                (0..n)
                    .map(|i| Patch {
                        location: vec![T::from_count(i)],
                        weight: T::one(),
                    })
                    .collect()
            }
        };
        Self::build(patches, kernel)
    }

    pub fn n(&self) -> usize {
        self.patches.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patches(&self) -> &[Patch<T>] {
        &self.patches
    }

    pub fn weight(&self, i: usize) -> T {
        self.patches[i].weight
    }

    pub fn mean_weight(&self) -> T {
        self.patches.iter().map(|p| p.weight).sum::<T>() / T::from_count(self.n())
    }

    pub fn kernel_form(&self) -> &KernelForm<T> {
        &self.kernel_form
    }

    /// Kernel entry `s_ij`.
    pub fn s(&self, i: usize, j: usize) -> T {
        self.s[i * self.n() + j]
    }

    /// Row `i` of the kernel matrix.
    pub fn s_row(&self, i: usize) -> &[T] {
        let n = self.n();
        &self.s[i * n..(i + 1) * n]
    }

    /// Attribute point of patch `i` in `R^(d+1)`: location coordinates then weight.
    pub fn attribute(&self, i: usize, axis: usize) -> T {
        if axis < self.dim {
            self.patches[i].location[axis]
        } else {
            self.patches[i].weight
        }
    }

    /// Dimension of the attribute space (`d + 1`).
    pub fn attribute_dim(&self) -> usize {
        self.dim + 1
    }

    /// Connectivity vector `S(x)` for `x` in `[0,1]^n`; validates the input.
    pub fn connectivity(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        for (i, &v) in x.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::OutOfRange(format!("x[{i}] = {v} outside [0, 1]")));
            }
        }
        let mut out = vec![T::zero(); self.n()];
        self.connectivity_into(x, &mut out);
        Ok(out)
    }

    /// Connectivity without input validation; `out.len() == n` required.
    pub fn connectivity_into(&self, x: &[T], out: &mut [T]) {
        let n = self.n();
        let inv_n = T::from_count(n).recip();
        // weighted state u_j = x_j * a_j, then S = (s . u) / n
        for i in 0..n {
            let row = &self.s[i * n..(i + 1) * n];
            let mut acc = T::zero();
            for j in 0..n {
                acc += x[j] * self.patches[j].weight * row[j];
            }
            out[i] = acc * inv_n;
        }
    }

    /// `S_i(1)`, the attainable connectivity ceiling of each patch.
    pub fn connectivity_ceiling(&self) -> &[T] {
        &self.conn_ceiling
    }

    fn connectivity_of_full(&self) -> Vec<T> {
        let ones = vec![T::one(); self.n()];
        let mut out = vec![T::zero(); self.n()];
        self.connectivity_into(&ones, &mut out);
        out
    }

    /// Serializes to the plain-text landscape format.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let n = self.n();
        writeln!(out, "{} {}", self.dim, n).unwrap();
        for p in &self.patches {
            for z in &p.location {
                write!(out, "{z} ").unwrap();
            }
            writeln!(out, "{}", p.weight).unwrap();
        }
        match &self.kernel_form {
            KernelForm::Exponential(a) => writeln!(out, "kernel exponential {a}").unwrap(),
            KernelForm::TopHat(r) => writeln!(out, "kernel tophat {r}").unwrap(),
            KernelForm::Ring => writeln!(out, "kernel ring").unwrap(),
            KernelForm::Matrix => {
                writeln!(out, "kernel matrix").unwrap();
                for i in 0..n {
                    let row: Vec<String> = self.s_row(i).iter().map(|v| format!("{v}")).collect();
                    writeln!(out, "{}", row.join(" ")).unwrap();
                }
            }
        }
        out
    }

    /// Parses the plain-text landscape format produced by [`Self::to_text`].
    ///
    /// Without a kernel block the kernel matrix is zero.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty landscape file".into()))?;
        let mut it = header.split_whitespace();
        let d: usize = parse_tok(it.next(), "dimension")?;
        let n: usize = parse_tok(it.next(), "patch count")?;
        if d == 0 || n == 0 {
            return Err(Error::Parse(
                "landscape header needs d >= 1 and n >= 1".into(),
            ));
        }
        let mut patches = Vec::with_capacity(n);
        for k in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {n} patch lines, got {k}")))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("patch line {k}: {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "patch line {k}: expected {} values, got {}",
                    d + 1,
                    vals.len()
                )));
            }
            patches.push(Patch {
                location: vals[..d].iter().map(|&v| T::from_real(v)).collect(),
                weight: T::from_real(vals[d]),
            });
        }
        let kernel = match lines.next() {
            None => KernelSpec::Explicit(vec![vec![T::zero(); n]; n]),
            Some(line) => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.first() != Some(&"kernel") {
                    return Err(Error::Parse(format!("expected kernel block, got: {line}")));
                }
                match toks.get(1) {
                    Some(&"exponential") => KernelSpec::Exponential(T::from_real(parse_tok(
                        toks.get(2).copied(),
                        "alpha",
                    )?)),
                    Some(&"tophat") => {
                        KernelSpec::TopHat(T::from_real(parse_tok(toks.get(2).copied(), "radius")?))
                    }
                    Some(&"ring") => KernelSpec::Ring,
                    Some(&"matrix") => {
                        let mut rows = Vec::with_capacity(n);
                        for k in 0..n {
                            let line = lines.next().ok_or_else(|| {
                                Error::Parse(format!("expected {n} kernel rows, got {k}"))
                            })?;
                            let row: Vec<T> = line
                                .split_whitespace()
                                .map(|t| {
                                    t.parse::<f64>()
                                        .map(T::from_real)
                                        .map_err(|e| Error::Parse(format!("kernel row {k}: {e}")))
                                })
                                .collect::<Result<_>>()?;
                            rows.push(row);
                        }
                        KernelSpec::Explicit(rows)
                    }
                    other => return Err(Error::Parse(format!("unknown kernel kind: {other:?}"))),
                }
            }
        };
        Self::build(patches, kernel)
    }
}

fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

fn parse_tok<F: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<F>
where
    F::Err: std::fmt::Display,
{
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse::<F>()
        .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
}
