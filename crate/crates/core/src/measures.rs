//! Empirical measures over patch attribute space, total variation distance
//! and supremum discrepancy over set families of finite VC dimension.
//!
//! Patch `i` contributes the attribute point `(z_i, a_i)` in `R^(d+1)`. A
//! value vector (binary occupancy or probabilities) induces the measure
//! `mu{B} = n^-1 sum_i v_i 1[(z_i, a_i) in B]`, and the discrepancy between
//! two value vectors over a family `F` is `sup_{B in F} |mu_a{B} - mu_b{B}|`.
//!
//! The supremum over axis-aligned rectangles is attained on rectangles
//! whose boundaries pass through data coordinate values; ties are handled
//! by enumerating distinct sorted values. In attribute dimension <= 2 the
//! enumeration is complete, so the result is exact. In higher dimensions
//! (and for balls) the scan covers a decimated anchored candidate set and
//! the result is reported as a lower bound.

use crate::discrete::OccupancyState;
use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::scalar::Scalar;

/// Set family with known VC dimension over the attribute space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcFamily {
    /// Axis-aligned closed rectangles in `R^dim`; VC dimension `2 dim`.
    Rectangles { dim: usize },
    /// Closed balls in `R^dim`; VC dimension `dim + 1`.
    Balls { dim: usize },
    /// Lower half-spaces `{w : w_axis <= c}` over all axes; VC dimension `dim`.
    HalfLines { dim: usize },
}

impl VcFamily {
    pub fn dim(&self) -> usize {
        match *self {
            VcFamily::Rectangles { dim }
            | VcFamily::Balls { dim }
            | VcFamily::HalfLines { dim } => dim,
        }
    }

    pub fn vc_dimension(&self) -> usize {
        match *self {
            VcFamily::Rectangles { dim } => 2 * dim,
            VcFamily::Balls { dim } => dim + 1,
            VcFamily::HalfLines { dim } => dim,
        }
    }
}

impl std::fmt::Display for VcFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VcFamily::Rectangles { dim } => write!(f, "rectangles({dim})"),
            VcFamily::Balls { dim } => write!(f, "balls({dim})"),
            VcFamily::HalfLines { dim } => write!(f, "halflines({dim})"),
        }
    }
}

/// A concrete measurable set from one of the families.
#[derive(Debug, Clone, PartialEq)]
pub enum SetRegion<T> {
    /// Closed box; empty whenever `lo > hi` on some axis.
    Rect { lo: Vec<T>, hi: Vec<T> },
    /// Closed ball; empty for negative radius.
    Ball { center: Vec<T>, radius: T },
    /// `{w : w_axis <= cutoff}`.
    HalfLine { axis: usize, cutoff: T },
}

impl<T: Scalar> std::fmt::Display for SetRegion<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[T]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        match self {
            SetRegion::Rect { lo, hi } => write!(f, "rect lo=({}) hi=({})", join(lo), join(hi)),
            SetRegion::Ball { center, radius } => {
                write!(f, "ball center=({}) radius={radius}", join(center))
            }
            SetRegion::HalfLine { axis, cutoff } => {
                write!(f, "halfline axis={axis} cutoff={cutoff}")
            }
        }
    }
}

impl<T: Scalar> SetRegion<T> {
    fn contains(&self, point: impl Fn(usize) -> T) -> bool {
        match self {
            SetRegion::Rect { lo, hi } => (0..lo.len()).all(|k| {
                let v = point(k);
                v >= lo[k] && v <= hi[k]
            }),
            SetRegion::Ball { center, radius } => {
                let d2 = (0..center.len())
                    .map(|k| {
                        let d = point(k) - center[k];
                        d * d
                    })
                    .sum::<T>();
                *radius >= T::zero() && d2 <= *radius * *radius
            }
            SetRegion::HalfLine { axis, cutoff } => point(*axis) <= *cutoff,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let got = match self {
            SetRegion::Rect { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::LengthMismatch {
                        expected: lo.len(),
                        got: hi.len(),
                    });
                }
                lo.len()
            }
            SetRegion::Ball { center, .. } => center.len(),
            SetRegion::HalfLine { axis, .. } => {
                if *axis >= dim {
                    return Err(Error::OutOfRange(format!(
                        "half-line axis {axis} out of range for dimension {dim}"
                    )));
                }
                dim
            }
        };
        if got != dim {
            return Err(Error::DimensionMismatch { expected: dim, got });
        }
        Ok(())
    }
}

/// `n^-1 sum_i values_i 1[(z_i, a_i) in region]`.
pub fn measure_mass<T: Scalar>(
    values: &[T],
    land: &Landscape<T>,
    region: &SetRegion<T>,
) -> Result<T> {
    let n = land.n();
    if values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: values.len(),
        });
    }
    region.validate(land.attribute_dim())?;
    let mut acc = T::zero();
    for i in 0..n {
        if region.contains(|k| land.attribute(i, k)) {
            acc += values[i];
        }
    }
    Ok(acc / T::from_count(n))
}

/// Total variation distance between the occupancy measure of `x` and the
/// measure induced by `p`:
/// `max(n^-1 sum_{i: x_i=1} (1 - p_i), n^-1 sum_{i: x_i=0} p_i)`.
pub fn tv_distance<T: Scalar>(x: &OccupancyState, p: &[T]) -> Result<T> {
    if x.n() != p.len() {
        return Err(Error::LengthMismatch {
            expected: x.n(),
            got: p.len(),
        });
    }
    let mut occupied = T::zero();
    let mut empty = T::zero();
    for (i, &b) in x.bits().iter().enumerate() {
        if b == 1 {
            occupied += T::one() - p[i];
        } else {
            empty += p[i];
        }
    }
    let n = T::from_count(p.len());
    Ok((occupied / n).max(empty / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    LowerBound,
}

/// Result of a supremum-discrepancy scan, with an attaining witness.
#[derive(Debug, Clone)]
pub struct DiscrepancyReport<T> {
    pub sup: T,
    pub witness: SetRegion<T>,
    pub family: VcFamily,
    pub exactness: Exactness,
}

/// Default per-axis boundary budget for the lower-bound rectangle scan.
pub const DEFAULT_MAX_CUTS: usize = 24;

/// Supremum of `|mu_a{B} - mu_b{B}|` over the family.
///
/// Exact for half-lines and for rectangles in attribute dimension <= 2;
/// rectangles in dimension >= 3 and balls report a lower bound over
/// candidates anchored at data coordinates.
pub fn sup_discrepancy<T: Scalar>(
    values_a: &[T],
    values_b: &[T],
    land: &Landscape<T>,
    family: &VcFamily,
) -> Result<DiscrepancyReport<T>> {
    sup_discrepancy_with_cuts(values_a, values_b, land, family, DEFAULT_MAX_CUTS)
}

/// [`sup_discrepancy`] with an explicit boundary budget for the
/// lower-bound scans (ignored where the scan is exact).
pub fn sup_discrepancy_with_cuts<T: Scalar>(
    values_a: &[T],
    values_b: &[T],
    land: &Landscape<T>,
    family: &VcFamily,
    max_cuts: usize,
) -> Result<DiscrepancyReport<T>> {
    let n = land.n();
    if values_a.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: values_a.len(),
        });
    }
    if values_b.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: values_b.len(),
        });
    }
    let attr_dim = land.attribute_dim();
    if family.dim() != attr_dim {
        return Err(Error::DimensionMismatch {
            expected: attr_dim,
            got: family.dim(),
        });
    }
    if max_cuts == 0 {
        return Err(Error::Invalid("boundary budget must be positive".into()));
    }
    // sum the raw differences and divide by n once at the end, so the scan
    // agrees bitwise with any oracle following the same convention
    let diff: Vec<T> = values_a
        .iter()
        .zip(values_b)
        .map(|(&a, &b)| a - b)
        .collect();
    let mut report = match family {
        VcFamily::HalfLines { .. } => halfline_scan(&diff, land, *family),
        VcFamily::Balls { .. } => ball_scan(&diff, land, *family),
        VcFamily::Rectangles { .. } => rectangle_scan(&diff, land, *family, max_cuts),
    };
    report.sup /= T::from_count(n);
    Ok(report)
}

// ---------------------------------------------------------------- half-lines

fn halfline_scan<T: Scalar>(
    diff: &[T],
    land: &Landscape<T>,
    family: VcFamily,
) -> DiscrepancyReport<T> {
    let n = land.n();
    let dim = land.attribute_dim();
    let mut best = T::zero();
    // empty half-line as the baseline witness
    let axis0_min = (0..n)
        .map(|i| land.attribute(i, 0))
        .fold(T::infinity(), |a, b| a.min(b));
    let mut witness = SetRegion::HalfLine {
        axis: 0,
        cutoff: axis0_min - T::one(),
    };
    for axis in 0..dim {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            land.attribute(i, axis)
                .partial_cmp(&land.attribute(j, axis))
                .unwrap()
        });
        let mut acc = T::zero();
        let mut k = 0;
        while k < n {
            let cutoff = land.attribute(order[k], axis);
            // absorb the whole tie group before evaluating the cutoff
            while k < n && land.attribute(order[k], axis) == cutoff {
                acc += diff[order[k]];
                k += 1;
            }
            if acc.abs() > best {
                best = acc.abs();
                witness = SetRegion::HalfLine { axis, cutoff };
            }
        }
    }
    DiscrepancyReport {
        sup: best,
        witness,
        family,
        exactness: Exactness::Exact,
    }
}

// --------------------------------------------------------------------- balls

fn ball_scan<T: Scalar>(diff: &[T], land: &Landscape<T>, family: VcFamily) -> DiscrepancyReport<T> {
    let n = land.n();
    let dim = land.attribute_dim();
    let mut best = T::zero();
    let mut witness = SetRegion::Ball {
        center: (0..dim).map(|k| land.attribute(0, k)).collect(),
        radius: -T::one(),
    };
    let dist2 = |i: usize, j: usize| -> T {
        (0..dim)
            .map(|k| {
                let d = land.attribute(i, k) - land.attribute(j, k);
                d * d
            })
            .sum::<T>()
    };
    for c in 0..n {
        let mut by_dist: Vec<(T, usize)> = (0..n).map(|i| (dist2(c, i), i)).collect();
        by_dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut acc = T::zero();
        let mut k = 0;
        while k < n {
            let d2 = by_dist[k].0;
            while k < n && by_dist[k].0 == d2 {
                acc += diff[by_dist[k].1];
                k += 1;
            }
            if acc.abs() > best {
                best = acc.abs();
                witness = SetRegion::Ball {
                    center: (0..dim).map(|a| land.attribute(c, a)).collect(),
                    radius: d2.sqrt(),
                };
            }
        }
    }
    DiscrepancyReport {
        sup: best,
        witness,
        family,
        exactness: Exactness::LowerBound,
    }
}

// ---------------------------------------------------------------- rectangles

/// Per-axis grouping of the data into cells delimited by (possibly
/// decimated) distinct coordinate values. A cell range `[k1, k2]` is
/// realizable as the closed interval from the first data value of cell `k1`
/// to the boundary value of cell `k2`.
struct AxisCells<T> {
    /// Distinct sorted coordinate values.
    unique: Vec<T>,
    /// Cell upper boundaries as indices into `unique`; last entry is the max.
    bounds: Vec<usize>,
    /// Cell index per data point.
    cell_of: Vec<usize>,
}

impl<T: Scalar> AxisCells<T> {
    fn build(vals: &[T], max_cuts: Option<usize>) -> Self {
        let mut unique = vals.to_vec();
        unique.sort_by(|a, b| a.partial_cmp(b).unwrap());
        unique.dedup();
        let m = unique.len();
        let bounds: Vec<usize> = match max_cuts {
            Some(k) if k < m => {
                let mut b: Vec<usize> = (1..=k).map(|j| j * m / k - 1).collect();
                b.dedup();
                debug_assert_eq!(*b.last().unwrap(), m - 1);
                b
            }
            _ => (0..m).collect(),
        };
        let boundary_vals: Vec<T> = bounds.iter().map(|&b| unique[b]).collect();
        let cell_of = vals
            .iter()
            .map(|&v| boundary_vals.partition_point(|&b| b < v))
            .collect();
        Self {
            unique,
            bounds,
            cell_of,
        }
    }

    fn cells(&self) -> usize {
        self.bounds.len()
    }

    /// Closed-interval endpoints realizing the cell range `[k1, k2]`.
    fn interval(&self, k1: usize, k2: usize) -> (T, T) {
        let lo_idx = if k1 == 0 { 0 } else { self.bounds[k1 - 1] + 1 };
        (self.unique[lo_idx], self.unique[self.bounds[k2]])
    }

    fn full_interval(&self) -> (T, T) {
        (self.unique[0], *self.unique.last().unwrap())
    }
}

fn rectangle_scan<T: Scalar>(
    diff: &[T],
    land: &Landscape<T>,
    family: VcFamily,
    max_cuts: usize,
) -> DiscrepancyReport<T> {
    let n = land.n();
    let dim = land.attribute_dim();
    let exact = dim <= 2;
    let cap = if exact { None } else { Some(max_cuts) };

    // group every axis, then keep the three most informative as scan axes
    // (ties broken by axis index); the rest span their full range
    let all_cells: Vec<AxisCells<T>> = (0..dim)
        .map(|k| AxisCells::build(&axis_values(land, k), cap))
        .collect();
    let mut axis_order: Vec<usize> = (0..dim).collect();
    axis_order.sort_by_key(|&k| std::cmp::Reverse(all_cells[k].cells()));
    let scan_axes: Vec<usize> = axis_order.iter().copied().take(3).collect();
    // cheapest loop placement: fewest cells outermost
    let mut placed = scan_axes.clone();
    placed.sort_by_key(|&k| all_cells[k].cells());
    let (ax0, ax1, ax2) = match placed.len() {
        1 => (None, None, placed[0]),
        2 => (None, Some(placed[0]), placed[1]),
        _ => (Some(placed[0]), Some(placed[1]), placed[2]),
    };
    let k0 = ax0.map_or(1, |a| all_cells[a].cells());
    let k1 = ax1.map_or(1, |a| all_cells[a].cells());
    let k2 = all_cells[ax2].cells();

    // cell sums over the (k0, k1, k2) grid
    let mut grid = vec![T::zero(); k0 * k1 * k2];
    for i in 0..n {
        let c0 = ax0.map_or(0, |a| all_cells[a].cell_of[i]);
        let c1 = ax1.map_or(0, |a| all_cells[a].cell_of[i]);
        let c2 = all_cells[ax2].cell_of[i];
        grid[(c0 * k1 + c1) * k2 + c2] += diff[i];
    }

    let mut best = T::zero();
    let mut best_ranges: Option<[(usize, usize); 3]> = None;
    let mut plane = vec![T::zero(); k1 * k2];
    let mut line = vec![T::zero(); k2];
    for lo0 in 0..k0 {
        for v in plane.iter_mut() {
            *v = T::zero();
        }
        for hi0 in lo0..k0 {
            for c in 0..k1 * k2 {
                plane[c] += grid[hi0 * k1 * k2 + c];
            }
            for lo1 in 0..k1 {
                for v in line.iter_mut() {
                    *v = T::zero();
                }
                for hi1 in lo1..k1 {
                    for c in 0..k2 {
                        line[c] += plane[hi1 * k2 + c];
                    }
                    if let Some((value, s, e)) = best_abs_subarray(&line) {
                        if value > best {
                            best = value;
                            best_ranges = Some([(lo0, hi0), (lo1, hi1), (s, e)]);
                        }
                    }
                }
            }
        }
    }

    let witness = match best_ranges {
        None => {
            // zero discrepancy everywhere: report an empty rectangle
            SetRegion::Rect {
                lo: vec![T::one(); dim],
                hi: vec![T::zero(); dim],
            }
        }
        Some(ranges) => {
            let mut lo = vec![T::zero(); dim];
            let mut hi = vec![T::zero(); dim];
            for k in 0..dim {
                let (l, h) = all_cells[k].full_interval();
                lo[k] = l;
                hi[k] = h;
            }
            let parts: [(Option<usize>, usize); 3] = [(ax0, 0), (ax1, 1), (Some(ax2), 2)];
            for (axis, slot) in parts {
                if let Some(a) = axis {
                    let (l, h) = all_cells[a].interval(ranges[slot].0, ranges[slot].1);
                    lo[a] = l;
                    hi[a] = h;
                }
            }
            SetRegion::Rect { lo, hi }
        }
    };
    DiscrepancyReport {
        sup: best,
        witness,
        family,
        exactness: if exact {
            Exactness::Exact
        } else {
            Exactness::LowerBound
        },
    }
}

fn axis_values<T: Scalar>(land: &Landscape<T>, axis: usize) -> Vec<T> {
    (0..land.n()).map(|i| land.attribute(i, axis)).collect()
}

/// Largest `|sum|` over non-empty contiguous ranges, with the first
/// attaining range in scan order. `None` when the array is empty.
fn best_abs_subarray<T: Scalar>(vals: &[T]) -> Option<(T, usize, usize)> {
    let max = max_subarray(vals, T::one())?;
    let min = max_subarray(vals, -T::one())?;
    Some(if max.0 >= min.0 { max } else { min })
}

fn max_subarray<T: Scalar>(vals: &[T], sign: T) -> Option<(T, usize, usize)> {
    if vals.is_empty() {
        return None;
    }
    let mut best = sign * vals[0];
    let mut best_range = (0usize, 0usize);
    let mut run = sign * vals[0];
    let mut run_start = 0usize;
    for (k, &v) in vals.iter().enumerate().skip(1) {
        let v = sign * v;
        if run < T::zero() {
            run = v;
            run_start = k;
        } else {
            run += v;
        }
        if run > best {
            best = run;
            best_range = (run_start, k);
        }
    }
    Some((best, best_range.0, best_range.1))
}

/// `(n + 1)^V` cap on the shatter coefficient, with saturation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShatterBound {
    pub value: u128,
    pub saturated: bool,
}

impl ShatterBound {
    pub fn as_f64(&self) -> f64 {
        if self.saturated {
            f64::INFINITY
        } else {
            self.value as f64
        }
    }
}

pub fn shatter_bound(vc_dim: usize, n: usize) -> ShatterBound {
    let base = n as u128 + 1;
    let mut value: u128 = 1;
    for _ in 0..vc_dim {
        match value.checked_mul(base) {
            Some(v) => value = v,
            None => {
                return ShatterBound {
                    value: u128::MAX,
                    saturated: true,
                }
            }
        }
    }
    ShatterBound {
        value,
        saturated: false,
    }
}

/// Two-sided Hoeffding tail for a weighted empirical mean:
/// `min(1, 2 exp(-2 n eps^2 / G^2))` with `G^2 = n^-1 sum g_i^2`.
///
/// An all-zero weight vector makes the sum degenerate, so the bound is 0
/// for positive `eps`.
pub fn hoeffding_tail<T: Scalar>(g: &[T], eps: T) -> T {
    let n = T::from_count(g.len());
    let g2 = g.iter().map(|&v| v * v).sum::<T>() / n;
    if g2 == T::zero() {
        return T::zero();
    }
    let bound = T::two() * (-T::two() * n * eps * eps / g2).exp();
    bound.min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{KernelSpec, Patch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_landscape(zs: &[f64], weights: &[f64]) -> Landscape<f64> {
        let patches = zs
            .iter()
            .zip(weights)
            .map(|(&z, &a)| Patch {
                location: vec![z],
                weight: a,
            })
            .collect();
        let n = zs.len();
        Landscape::build(patches, KernelSpec::Explicit(vec![vec![0.0; n]; n])).unwrap()
    }

    #[test]
    fn measure_mass_examples() {
        let land = line_landscape(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
        let whole = SetRegion::Rect {
            lo: vec![-10.0, 0.0],
            hi: vec![10.0, 10.0],
        };
        let x = [1.0, 0.0, 1.0];
        assert_eq!(measure_mass(&x, &land, &whole).unwrap(), 2.0 / 3.0);
        let empty = SetRegion::Rect {
            lo: vec![1.0, 1.0],
            hi: vec![0.0, 0.0],
        };
        assert_eq!(measure_mass(&x, &land, &empty).unwrap(), 0.0);
        // covers patches 0 and 1 only
        let partial = SetRegion::Rect {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 10.0],
        };
        assert_eq!(measure_mass(&x, &land, &partial).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn tv_distance_examples() {
        let ones = OccupancyState::all_occupied(4);
        assert_eq!(tv_distance(&ones, &[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(tv_distance(&ones, &[0.5; 4]).unwrap(), 0.5);
        let x = OccupancyState::new(vec![1, 1, 0, 0]).unwrap();
        let p = [0.9f64, 0.8, 0.1, 0.2];
        assert!((tv_distance(&x, &p).unwrap() - 0.075).abs() < 1e-15);
    }

    #[test]
    fn identical_values_have_zero_discrepancy() {
        let land = line_landscape(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        let v = [0.3, 0.8, 0.1, 0.9];
        for family in [
            VcFamily::Rectangles { dim: 2 },
            VcFamily::Balls { dim: 2 },
            VcFamily::HalfLines { dim: 2 },
        ] {
            let rep = sup_discrepancy(&v, &v, &land, &family).unwrap();
            assert_eq!(rep.sup, 0.0, "{family}");
        }
    }

    #[test]
    fn halfline_one_point_witness() {
        // diff vector (+0.5, -0.5) at z = (0, 1); the half-line covering only
        // the first patch attains sup = |0.5| / n = 0.25
        let land = line_landscape(&[0.0, 1.0], &[1.0, 1.0]);
        let rep = sup_discrepancy(
            &[1.0, 0.0],
            &[0.5, 0.5],
            &land,
            &VcFamily::HalfLines { dim: 2 },
        )
        .unwrap();
        assert_eq!(rep.sup, 0.25);
        let mass_a = measure_mass(&[1.0, 0.0], &land, &rep.witness).unwrap();
        let mass_b = measure_mass(&[0.5, 0.5], &land, &rep.witness).unwrap();
        assert_eq!((mass_a - mass_b).abs(), 0.25);
        match rep.witness {
            SetRegion::HalfLine { axis: 0, cutoff } => assert_eq!(cutoff, 0.0),
            other => panic!("unexpected witness {other:?}"),
        }
    }

    /// Exhaustive oracle: max |diff sum| over subsets realizable by a closed
    /// rectangle (no outside point inside the subset's bounding box).
    fn brute_force_rect_sup(diff: &[f64], points: &[Vec<f64>]) -> f64 {
        let n = points.len();
        let dim = points[0].len();
        let mut best = 0.0f64;
        for mask in 0..(1u32 << n) {
            let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            if members.is_empty() {
                continue;
            }
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for &i in &members {
                for k in 0..dim {
                    lo[k] = lo[k].min(points[i][k]);
                    hi[k] = hi[k].max(points[i][k]);
                }
            }
            let realizable = (0..n)
                .filter(|i| mask >> i & 1 == 0)
                .all(|i| (0..dim).any(|k| points[i][k] < lo[k] || points[i][k] > hi[k]));
            if realizable {
                let sum: f64 = members.iter().map(|&i| diff[i]).sum();
                best = best.max(sum.abs());
            }
        }
        best
    }

    #[test]
    fn rectangles_match_brute_force_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..40 {
            let n = rng.gen_range(2..=8);
            // dyadic values make subset sums order-independent, so the exact
            // scan and the subset oracle agree bitwise
            let zs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=12) as f64 * 0.5).collect();
            let weights: Vec<f64> = (0..n)
                .map(|_| 1.0 + rng.gen_range(0..=8) as f64 * 0.25)
                .collect();
            let land = line_landscape(&zs, &weights);
            let va: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0..=16) as f64 / 16.0)
                .collect();
            let vb: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0..=16) as f64 / 16.0)
                .collect();
            let rep = sup_discrepancy(&va, &vb, &land, &VcFamily::Rectangles { dim: 2 }).unwrap();
            assert_eq!(rep.exactness, Exactness::Exact);
            let diff: Vec<f64> = va.iter().zip(&vb).map(|(a, b)| a - b).collect();
            let points: Vec<Vec<f64>> = (0..n).map(|i| vec![zs[i], weights[i]]).collect();
            let oracle = brute_force_rect_sup(&diff, &points) / n as f64;
            assert_eq!(rep.sup, oracle, "case {case}: n = {n}");
            // the witness must attain the reported value
            let ma = measure_mass(&va, &land, &rep.witness).unwrap();
            let mb = measure_mass(&vb, &land, &rep.witness).unwrap();
            assert!(
                ((ma - mb).abs() - rep.sup).abs() < 1e-15,
                "witness mismatch in case {case}"
            );
        }
    }

    #[test]
    fn decimated_scan_is_a_lower_bound_of_the_exact_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n = rng.gen_range(4..=30);
            let zs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 10.0).collect();
            let weights: Vec<f64> = (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect();
            let land = line_landscape(&zs, &weights);
            let va: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let vb: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let exact = sup_discrepancy(&va, &vb, &land, &VcFamily::Rectangles { dim: 2 }).unwrap();
            let coarse =
                sup_discrepancy_with_cuts(&va, &vb, &land, &VcFamily::Rectangles { dim: 2 }, 5)
                    .unwrap();
            assert!(coarse.sup <= exact.sup + 1e-12);
        }
    }

    #[test]
    fn three_dimensional_scan_is_flagged_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let patches: Vec<Patch<f64>> = (0..n)
            .map(|_| Patch {
                location: vec![rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0],
                weight: 1.0,
            })
            .collect();
        let land = Landscape::build(patches, KernelSpec::TopHat(1.0)).unwrap();
        let va: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let vb: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let rep = sup_discrepancy(&va, &vb, &land, &VcFamily::Rectangles { dim: 3 }).unwrap();
        assert_eq!(rep.exactness, Exactness::LowerBound);
        // the witness realizes the reported value
        let ma = measure_mass(&va, &land, &rep.witness).unwrap();
        let mb = measure_mass(&vb, &land, &rep.witness).unwrap();
        assert!(((ma - mb).abs() - rep.sup).abs() < 1e-12);
    }

    #[test]
    fn family_hierarchy_and_tv_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let n = rng.gen_range(2..=12);
            let zs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 5.0).collect();
            let weights: Vec<f64> = (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect();
            let land = line_landscape(&zs, &weights);
            let x_bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1) as u8).collect();
            let x = OccupancyState::new(x_bits.clone()).unwrap();
            let xr: Vec<f64> = x_bits.iter().map(|&b| b as f64).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let tv = tv_distance(&x, &p).unwrap();
            let rect = sup_discrepancy(&xr, &p, &land, &VcFamily::Rectangles { dim: 2 }).unwrap();
            let half = sup_discrepancy(&xr, &p, &land, &VcFamily::HalfLines { dim: 2 }).unwrap();
            let ball = sup_discrepancy(&xr, &p, &land, &VcFamily::Balls { dim: 2 }).unwrap();
            assert!(rect.sup <= tv + 1e-12);
            assert!(half.sup <= rect.sup + 1e-12);
            assert!(ball.sup <= tv + 1e-12);
        }
    }

    #[test]
    fn shatter_bound_values() {
        assert_eq!(shatter_bound(0, 5).value, 1);
        assert_eq!(shatter_bound(2, 3).value, 16);
        assert_eq!(shatter_bound(4, 10).value, 14641);
        let big = shatter_bound(200, usize::MAX);
        assert!(big.saturated);
        assert_eq!(big.as_f64(), f64::INFINITY);
    }

    #[test]
    fn hoeffding_tail_values() {
        // indicator weights: G^2 = fraction of ones <= 1
        let g = vec![1.0; 100];
        let b = hoeffding_tail(&g, 0.1);
        assert!((b - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!(hoeffding_tail(&g, 10.0) < 1e-30);
        assert_eq!(hoeffding_tail(&[0.0f64; 10], 0.5), 0.0);
        assert_eq!(hoeffding_tail(&g, 0.0), 1.0); // clamped
    }
}
