//! Config-driven experiments: the contact-process divergence demonstration,
//! the kernel-range sweep on a Poisson-like landscape, the empirical
//! convergence study, and the bound falsification harness.
//!
//! Replicates run on a worker pool with seeds derived from the base seed
//! and the replicate index, and are aggregated in replicate order, so every
//! experiment is reproducible regardless of scheduling.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

use crate::config::{ExperimentConfig, ExperimentKind, ScalingRule};
use crate::output::{ensure_dir, fmt_f64, write_csv, write_json, Manifest};
use anyhow::{bail, Context, Result};
use metapop_core::bounds::{
    bound_constants, theorem1_bound, theorem2_bound, theorem3_bound, BoundConstants, TheoremBound,
    TheoremId,
};
use metapop_core::continuous::{
    default_ode_step, integrate_ode, simulate_coupled_ct, simulate_ctmc,
};
use metapop_core::discrete::{simulate_coupled, steps_for, OccupancyState};
use metapop_core::landscape::{GenerateSpec, KernelSpec, Landscape, Patch};
use metapop_core::measures::{sup_discrepancy, tv_distance, VcFamily};
use metapop_core::rates::{RateFn, RateModel};
use metapop_core::stats;
use rayon::prelude::*;
use serde_json::json;
use std::path::Path;

/// Ring landscape with weights equal to `n`, so that the connectivity of a
/// patch counts its occupied neighbours.
pub fn contact_landscape(n: usize) -> Landscape<f64> {
    let patches = (0..n)
        .map(|i| Patch {
            location: vec![i as f64],
            weight: n as f64,
        })
        .collect();
    Landscape::build(patches, KernelSpec::Ring).expect("ring landscape")
}

/// Complete interaction graph: every off-diagonal kernel entry is one.
pub fn equal_patch_landscape(n: usize, weight: f64) -> Landscape<f64> {
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
    Landscape::build(patches, KernelSpec::Explicit(s)).expect("equal-patch landscape")
}

// ------------------------------------------------------------------- contact

#[derive(Debug, Clone)]
pub struct DiscrepancyPoint {
    pub t: f64,
    pub mean_tv: f64,
    pub mean_sup: f64,
}

#[derive(Debug, Clone)]
pub struct ContactOutcome {
    pub n: usize,
    pub lambda: f64,
    pub time_cap: f64,
    /// Per replicate; `None` when the run was censored at the cap.
    pub extinction_times: Vec<Option<f64>>,
    pub ode_terminal: Vec<f64>,
    pub trajectory: Vec<DiscrepancyPoint>,
}

impl ContactOutcome {
    pub fn censored(&self) -> usize {
        self.extinction_times.iter().filter(|t| t.is_none()).count()
    }

    /// Median over observed extinction times; `None` when a majority of
    /// runs were censored.
    pub fn median_extinction_time(&self) -> Option<f64> {
        let observed: Vec<f64> = self.extinction_times.iter().flatten().copied().collect();
        if observed.len() * 2 <= self.extinction_times.len() {
            return None;
        }
        Some(stats::median(&observed))
    }
}

/// Contact process on a ring: colonisation `lambda` per occupied
/// neighbour, unit extinction. Runs the chain from full occupancy until
/// extinction (capped at `50 log n`, censored runs flagged), integrates the
/// ODE from the all-one state to `T = 50`, and tracks the TV and
/// sup-rectangle discrepancy between the chain and the ODE on a time grid.
pub fn run_contact_experiment(
    n: usize,
    lambda: f64,
    reps: usize,
    seed: u64,
) -> Result<ContactOutcome> {
    if !(lambda > 0.0) {
        bail!("lambda must be positive");
    }
    let land = contact_landscape(n);
    let model = RateModel::uniform(n, RateFn::Linear(lambda), RateFn::Constant(1.0))
        .map_err(anyhow::Error::from)?;
    let time_cap = 50.0 * (n as f64).ln();
    let ode_horizon = 50.0;
    let h = default_ode_step(&land, &model);
    let p0 = vec![1.0; n];
    let ode = integrate_ode(&p0, &land, &model, ode_horizon, h)?;

    let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
    let x0 = OccupancyState::all_occupied(n);
    let family = VcFamily::Rectangles { dim: 2 };
    type ContactRep = (Option<f64>, Vec<(f64, f64)>);
    let per_rep: Vec<ContactRep> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = stats::replicate_seed(seed, rep as u64);
            let path = simulate_ctmc(&x0, &land, &model, time_cap, rep_seed)?;
            let mut points = vec![(0.0, 0.0); grid.len()];
            path.scan(&grid, |k, t, state| {
                let xs = OccupancyState::new(state.to_vec()).unwrap();
                let xr: Vec<f64> = state.iter().map(|&b| b as f64).collect();
                let p = ode.value_at(t);
                let tv = tv_distance(&xs, &p).unwrap();
                let sup = sup_discrepancy(&xr, &p, &land, &family).unwrap().sup;
                points[k] = (tv, sup);
            });
            Ok((path.extinction_time(), points))
        })
        .collect::<Result<_>>()?;

    let trajectory = grid
        .iter()
        .enumerate()
        .map(|(k, &t)| DiscrepancyPoint {
            t,
            mean_tv: per_rep.iter().map(|(_, pts)| pts[k].0).sum::<f64>() / reps as f64,
            mean_sup: per_rep.iter().map(|(_, pts)| pts[k].1).sum::<f64>() / reps as f64,
        })
        .collect();
    Ok(ContactOutcome {
        n,
        lambda,
        time_cap,
        extinction_times: per_rep.into_iter().map(|(t, _)| t).collect(),
        ode_terminal: ode.terminal().to_vec(),
        trajectory,
    })
}

// ------------------------------------------------------------------- poisson

#[derive(Debug, Clone)]
pub struct PoissonRdOutcome {
    /// Kernel volume `R^d`.
    pub rd: f64,
    pub radius: f64,
    pub max_degree: usize,
    /// Expected neighbour count `v(d) R^d` for interior patches.
    pub predicted_degree: f64,
    /// Per replicate, at the horizon: discrepancy between the chain and the
    /// deterministic state.
    pub sup_at_t: Vec<f64>,
    /// Per replicate: peak discrepancy over the scan grid.
    pub max_sup: Vec<f64>,
    /// Per replicate, at the horizon: discrepancy of the independent-patches
    /// chain against the deterministic state (the kernel-independent
    /// sampling floor).
    pub independent_sup_at_t: Vec<f64>,
    /// Per replicate, at the horizon: fraction of patches where the chain
    /// and its independent-patches companion disagree (the coupling error).
    pub coupling_l1_at_t: Vec<f64>,
    pub mean_sup_at_t: f64,
    pub bound_a: TheoremBound<f64>,
    pub bound_b: TheoremBound<f64>,
    pub constants: BoundConstants<f64>,
}

#[derive(Debug, Clone)]
pub struct PoissonOutcome {
    pub n: usize,
    pub d: usize,
    pub horizon: f64,
    pub per_rd: Vec<PoissonRdOutcome>,
    /// Log-log slope of the mean terminal sup discrepancy against `R^d`.
    pub slope: f64,
}

/// One kernel radius of the uniform-box sweep: weights `n`, identity
/// colonisation of connectivity, constant extinction `1/2`, coupled
/// continuous-time runs from full occupancy.
pub fn run_poisson_rd(
    n: usize,
    d: usize,
    rd: f64,
    horizon: f64,
    reps: usize,
    seed: u64,
) -> Result<PoissonRdOutcome> {
    if !(rd > 0.0) {
        bail!("kernel volume must be positive");
    }
    let radius = rd.powf(1.0 / d as f64);
    let land = Landscape::generate(
        &GenerateSpec::UniformBox { n, d, seed },
        KernelSpec::TopHat(radius),
    )?;
    let model = RateModel::uniform(n, RateFn::Linear(1.0), RateFn::Constant(0.5))
        .map_err(anyhow::Error::from)?;
    let constants = bound_constants(&land, &model);
    let family = VcFamily::Rectangles { dim: d + 1 };
    let v = family.vc_dimension();
    let nf = n as f64;
    let alpha = 0.25;
    let r = 0.5 * (v as f64 + 5.0 + 2.0 * alpha + (v as f64 + 1.0) * 2f64.ln() / nf.ln()) + 0.5;
    let (bound_a, bound_b) = theorem3_bound(&constants, horizon, v, 1.0, 0.25, alpha, r)?;

    let max_degree = (0..n)
        .map(|i| land.s_row(i).iter().filter(|&&s| s > 0.0).count())
        .max()
        .unwrap_or(0);
    let predicted_degree = metapop_core::landscape::unit_ball_volume(d) * rd;

    let h = default_ode_step(&land, &model);
    let x0 = OccupancyState::all_occupied(n);
    let ode = integrate_ode(&x0.to_reals(), &land, &model, horizon, h)?;
    let grid: Vec<f64> = (0..=8).map(|k| k as f64 * horizon / 8.0).collect();

    let rows: Vec<(f64, f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = stats::replicate_seed(seed, rep as u64);
            let traj = simulate_coupled_ct(&x0, &land, &model, horizon, rep_seed, &ode)?;
            let mut max_sup = 0.0f64;
            let mut at_t = 0.0f64;
            let mut w_sup = 0.0f64;
            let mut l1 = 0.0f64;
            traj.scan(&grid, |k, t, w, x, _j| {
                let xr: Vec<f64> = x.iter().map(|&b| b as f64).collect();
                let p = ode.value_at(t);
                let sup = sup_discrepancy(&xr, &p, &land, &family).unwrap().sup;
                max_sup = max_sup.max(sup);
                if k == grid.len() - 1 {
                    at_t = sup;
                    let wr: Vec<f64> = w.iter().map(|&b| b as f64).collect();
                    w_sup = sup_discrepancy(&wr, &p, &land, &family).unwrap().sup;
                    l1 = x.iter().zip(w).filter(|(a, b)| *a != *b).count() as f64 / n as f64;
                }
            });
            Ok((at_t, max_sup, w_sup, l1))
        })
        .collect::<Result<_>>()?;

    let sup_at_t: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mean_sup_at_t = sup_at_t.iter().sum::<f64>() / reps as f64;
    Ok(PoissonRdOutcome {
        rd,
        radius,
        max_degree,
        predicted_degree,
        mean_sup_at_t,
        sup_at_t,
        max_sup: rows.iter().map(|r| r.1).collect(),
        independent_sup_at_t: rows.iter().map(|r| r.2).collect(),
        coupling_l1_at_t: rows.iter().map(|r| r.3).collect(),
        bound_a,
        bound_b,
        constants,
    })
}

pub fn run_poisson_experiment(
    n: usize,
    d: usize,
    rd_list: &[f64],
    horizon: f64,
    reps: usize,
    seed: u64,
) -> Result<PoissonOutcome> {
    let per_rd: Vec<PoissonRdOutcome> = rd_list
        .iter()
        .map(|&rd| run_poisson_rd(n, d, rd, horizon, reps, seed))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = per_rd.iter().map(|o| o.rd.ln()).collect();
    let ys: Vec<f64> = per_rd.iter().map(|o| o.mean_sup_at_t.ln()).collect();
    let (_, slope) = stats::linear_fit(&xs, &ys)?;
    Ok(PoissonOutcome {
        n,
        d,
        horizon,
        per_rd,
        slope,
    })
}

// --------------------------------------------------------------- convergence

#[derive(Debug, Clone)]
pub struct ConvergenceOutcome {
    pub rule: ScalingRule,
    pub n_list: Vec<usize>,
    pub mean_max_sup: Vec<f64>,
    /// Log-log slope of the mean discrepancy against `n`.
    pub slope: f64,
}

/// Discrete coupled runs across a growing patch count; fits the log mean
/// peak discrepancy against `log n`.
pub fn run_convergence_study(
    n_list: &[usize],
    rule: ScalingRule,
    reps: usize,
    seed: u64,
) -> Result<ConvergenceOutcome> {
    if n_list.len() < 2 {
        bail!("convergence study needs at least two patch counts");
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        bail!("patch counts must be strictly increasing");
    }
    let family = VcFamily::Rectangles { dim: 2 };
    let mut mean_max_sup = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let (land, model, m) = match rule {
            ScalingRule::EqualPatch => (
                equal_patch_landscape(n, 1.0),
                RateModel::uniform(n, RateFn::Linear(0.3), RateFn::Constant(0.3))?,
                1.0,
            ),
            ScalingRule::Ring => (
                contact_landscape(n),
                RateModel::uniform(n, RateFn::Linear(1.0), RateFn::Constant(1.0))?,
                4.0,
            ),
        };
        let horizon = 2.0;
        let steps = steps_for(m, horizon).map_err(anyhow::Error::from)?;
        let x0 = OccupancyState::all_occupied(n);
        let sups: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = stats::replicate_seed(seed, rep as u64);
                let traj = simulate_coupled(&x0, &land, &model, m, horizon, rep_seed)?;
                let mut max_sup = 0.0f64;
                for t in 1..=steps {
                    let xr: Vec<f64> = traj.x[t].iter().map(|&b| b as f64).collect();
                    let sup = sup_discrepancy(&xr, &traj.p[t], &land, &family)?.sup;
                    max_sup = max_sup.max(sup);
                }
                Ok(max_sup)
            })
            .collect::<Result<_>>()?;
        mean_max_sup.push(sups.iter().sum::<f64>() / reps as f64);
    }
    let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = mean_max_sup.iter().map(|v| v.ln()).collect();
    let (_, slope) = stats::linear_fit(&xs, &ys)?;
    Ok(ConvergenceOutcome {
        rule,
        n_list: n_list.to_vec(),
        mean_max_sup,
        slope,
    })
}

// -------------------------------------------------------------------- verify

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifySystem {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub name: String,
    pub theorem: TheoremId,
    pub system: VerifySystem,
    pub n: usize,
    /// Slope of the linear colonisation function.
    pub lambda: f64,
    /// Constant extinction rate.
    pub extinction: f64,
    pub family: VcFamily,
    pub m: f64,
    pub horizon: f64,
    pub theta: f64,
    pub eta: f64,
    pub r: f64,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub name: String,
    pub bound: TheoremBound<f64>,
    pub reps: usize,
    pub exceed_count: usize,
    pub exceed_frequency: f64,
    pub max_observed: f64,
    /// True when the bound is non-vacuous with valid side conditions and a
    /// failure probability below 0.05, i.e. it enters the acceptance gate.
    pub qualifying: bool,
}

/// Default battery: equal-patch landscapes where the bound values are
/// analytically transparent, spanning both chains and all theorem variants.
pub fn default_verification_battery(reps: usize, seed: u64) -> Vec<VerifyConfig> {
    let base = |idx: u64| stats::replicate_seed(seed, 0x5EED ^ idx);
    vec![
        VerifyConfig {
            name: "t1-halflines-discrete".into(),
            theorem: TheoremId::T1,
            system: VerifySystem::Discrete,
            n: 2000,
            lambda: 0.1,
            extinction: 0.5,
            family: VcFamily::HalfLines { dim: 2 },
            m: 1.0,
            horizon: 1.0,
            theta: 1.0,
            eta: 0.3,
            r: 2.0,
            alpha: 0.35,
            reps,
            seed: base(1),
        },
        VerifyConfig {
            name: "t2-halflines-discrete".into(),
            theorem: TheoremId::T2,
            system: VerifySystem::Discrete,
            n: 2000,
            lambda: 0.05,
            extinction: 0.5,
            family: VcFamily::HalfLines { dim: 2 },
            m: 2.0,
            horizon: 2.0,
            theta: 1.0,
            eta: 0.25,
            r: 2.0,
            alpha: 0.35,
            reps,
            seed: base(2),
        },
        VerifyConfig {
            name: "t2-rectangles-discrete".into(),
            theorem: TheoremId::T2,
            system: VerifySystem::Discrete,
            n: 2000,
            lambda: 0.05,
            extinction: 0.5,
            family: VcFamily::Rectangles { dim: 2 },
            m: 2.0,
            horizon: 2.0,
            theta: 1.0,
            eta: 0.25,
            r: 3.0,
            alpha: 0.35,
            reps,
            seed: base(3),
        },
        VerifyConfig {
            name: "t3b-halflines-continuous".into(),
            theorem: TheoremId::T3b,
            system: VerifySystem::Continuous,
            n: 2000,
            lambda: 0.05,
            extinction: 0.5,
            family: VcFamily::HalfLines { dim: 2 },
            m: 1.0,
            horizon: 1.0,
            theta: 1.0,
            eta: 0.25,
            r: 4.5,
            alpha: 0.35,
            reps,
            seed: base(4),
        },
    ]
}

/// Runs one falsification configuration: simulates the coupled system,
/// tracks the peak discrepancy per replicate and counts threshold
/// exceedances against the computed bound.
pub fn run_theorem_verification(cfg: &VerifyConfig) -> Result<VerifyOutcome> {
    let land = equal_patch_landscape(cfg.n, 1.0);
    let model = RateModel::uniform(
        cfg.n,
        RateFn::Linear(cfg.lambda),
        RateFn::Constant(cfg.extinction),
    )?;
    let constants = bound_constants(&land, &model);
    let v = cfg.family.vc_dimension();
    let bound = match cfg.theorem {
        TheoremId::T1 => theorem1_bound(&constants, cfg.m, cfg.horizon, v, cfg.theta, cfg.eta)?,
        TheoremId::T2 => theorem2_bound(&constants, cfg.m, cfg.horizon, v, cfg.theta, cfg.r)?,
        TheoremId::T3a => {
            theorem3_bound(
                &constants,
                cfg.horizon,
                v,
                cfg.theta,
                cfg.eta,
                cfg.alpha,
                cfg.r,
            )?
            .0
        }
        TheoremId::T3b => {
            theorem3_bound(
                &constants,
                cfg.horizon,
                v,
                cfg.theta,
                cfg.eta,
                cfg.alpha,
                cfg.r,
            )?
            .1
        }
    };

    let x0 = OccupancyState::all_occupied(cfg.n);
    let maxima: Vec<f64> = match cfg.system {
        VerifySystem::Discrete => {
            let steps = steps_for(cfg.m, cfg.horizon).map_err(anyhow::Error::from)?;
            (0..cfg.reps)
                .into_par_iter()
                .map(|rep| {
                    let rep_seed = stats::replicate_seed(cfg.seed, rep as u64);
                    let traj = simulate_coupled(&x0, &land, &model, cfg.m, cfg.horizon, rep_seed)?;
                    let mut max_sup = 0.0f64;
                    for t in 1..=steps {
                        let xr: Vec<f64> = traj.x[t].iter().map(|&b| b as f64).collect();
                        let sup = sup_discrepancy(&xr, &traj.p[t], &land, &cfg.family)?.sup;
                        max_sup = max_sup.max(sup);
                    }
                    Ok(max_sup)
                })
                .collect::<Result<_>>()?
        }
        VerifySystem::Continuous => {
            let h = default_ode_step(&land, &model);
            let ode = integrate_ode(&x0.to_reals(), &land, &model, cfg.horizon, h)?;
            let grid: Vec<f64> = (0..=20).map(|k| k as f64 * cfg.horizon / 20.0).collect();
            (0..cfg.reps)
                .into_par_iter()
                .map(|rep| {
                    let rep_seed = stats::replicate_seed(cfg.seed, rep as u64);
                    let traj =
                        simulate_coupled_ct(&x0, &land, &model, cfg.horizon, rep_seed, &ode)?;
                    let mut max_sup = 0.0f64;
                    traj.scan(&grid, |_k, t, _w, x, _j| {
                        let xr: Vec<f64> = x.iter().map(|&b| b as f64).collect();
                        let p = ode.value_at(t);
                        let sup = sup_discrepancy(&xr, &p, &land, &cfg.family).unwrap().sup;
                        max_sup = max_sup.max(sup);
                    });
                    Ok(max_sup)
                })
                .collect::<Result<_>>()?
        }
    };

    let exceed_count = maxima.iter().filter(|&&m| m > bound.threshold).count();
    let qualifying = bound.probability < 0.05 && !bound.vacuous && bound.preconditions_ok;
    Ok(VerifyOutcome {
        name: cfg.name.clone(),
        reps: cfg.reps,
        exceed_count,
        exceed_frequency: exceed_count as f64 / cfg.reps as f64,
        max_observed: maxima.iter().cloned().fold(0.0, f64::max),
        qualifying,
        bound,
    })
}

// --------------------------------------------------------------- bound sweep

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub bound: TheoremBound<f64>,
}

/// Parameter grids for [`run_bound_sweep`].
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub r: Vec<f64>,
    pub alpha: f64,
}

/// Evaluates every bound variant over the `(theta, eta, r)` grid on an
/// equal-patch instance; the sweep surfaces which parameter corners give a
/// usable (valid, non-vacuous) pair rather than optimizing them.
pub fn run_bound_sweep(
    n: usize,
    lambda: f64,
    extinction: f64,
    m: f64,
    horizon: f64,
    family: VcFamily,
    grid: &SweepGrid,
) -> Result<Vec<SweepRow>> {
    let land = equal_patch_landscape(n, 1.0);
    let model = RateModel::uniform(n, RateFn::Linear(lambda), RateFn::Constant(extinction))?;
    let constants = bound_constants(&land, &model);
    let v = family.vc_dimension();
    let mut rows = Vec::new();
    for &theta in &grid.theta {
        for &eta in &grid.eta {
            rows.push(SweepRow {
                bound: theorem1_bound(&constants, m, horizon, v, theta, eta)?,
            });
        }
        for &r in &grid.r {
            rows.push(SweepRow {
                bound: theorem2_bound(&constants, m, horizon, v, theta, r)?,
            });
            for &eta in &grid.eta {
                let (a, b) = theorem3_bound(&constants, horizon, v, theta, eta, grid.alpha, r)?;
                rows.push(SweepRow { bound: a });
                rows.push(SweepRow { bound: b });
            }
        }
    }
    Ok(rows)
}

// ------------------------------------------------------------ orchestration

/// Dispatches a parsed config, writes `results.csv`, `bounds.json` and
/// `manifest.json` into the output directory, and returns the aggregates.
pub fn run_from_config(config: &ExperimentConfig, out_dir: &Path) -> Result<serde_json::Value> {
    ensure_dir(out_dir)?;
    let aggregates = match config.kind {
        ExperimentKind::Contact => {
            let outcomes: Vec<ContactOutcome> = config
                .n_list
                .iter()
                .map(|&n| run_contact_experiment(n, config.lambda, config.reps, config.seed))
                .collect::<Result<_>>()?;
            let mut rows = Vec::new();
            for o in &outcomes {
                for (rep, t) in o.extinction_times.iter().enumerate() {
                    rows.push(vec![
                        o.n.to_string(),
                        rep.to_string(),
                        t.map(fmt_f64).unwrap_or_default(),
                        (t.is_none() as u8).to_string(),
                    ]);
                }
            }
            write_csv(
                out_dir.join("results.csv"),
                &["n", "rep", "extinction_time", "censored"],
                rows,
            )?;
            let traj_rows = outcomes.iter().flat_map(|o| {
                o.trajectory.iter().map(|p| {
                    vec![
                        o.n.to_string(),
                        fmt_f64(p.t),
                        fmt_f64(p.mean_tv),
                        fmt_f64(p.mean_sup),
                    ]
                })
            });
            write_csv(
                out_dir.join("discrepancy.csv"),
                &["n", "t", "mean_tv", "mean_sup"],
                traj_rows,
            )?;
            let constants: Vec<serde_json::Value> = outcomes
                .iter()
                .map(|o| {
                    let land = contact_landscape(o.n);
                    let model =
                        RateModel::uniform(o.n, RateFn::Linear(o.lambda), RateFn::Constant(1.0))
                            .expect("contact rate model");
                    json!({ "n": o.n, "constants": bound_constants(&land, &model) })
                })
                .collect();
            write_json(out_dir.join("bounds.json"), &constants)?;
            json!({
                "per_n": outcomes.iter().map(|o| json!({
                    "n": o.n,
                    "median_extinction_time": o.median_extinction_time(),
                    "censored": o.censored(),
                    "ode_terminal_min": o.ode_terminal.iter().cloned().fold(f64::INFINITY, f64::min),
                    "ode_terminal_max": o.ode_terminal.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                })).collect::<Vec<_>>(),
            })
        }
        ExperimentKind::Poisson => {
            let n = config.n_list[0];
            let outcome = run_poisson_experiment(
                n,
                config.d,
                &config.rd_list,
                config.horizon,
                config.reps,
                config.seed,
            )?;
            let mut rows = Vec::new();
            for o in &outcome.per_rd {
                for rep in 0..o.sup_at_t.len() {
                    rows.push(vec![
                        fmt_f64(o.rd),
                        rep.to_string(),
                        fmt_f64(o.sup_at_t[rep]),
                        fmt_f64(o.max_sup[rep]),
                        fmt_f64(o.independent_sup_at_t[rep]),
                        fmt_f64(o.coupling_l1_at_t[rep]),
                    ]);
                }
            }
            write_csv(
                out_dir.join("results.csv"),
                &[
                    "rd",
                    "rep",
                    "sup_at_horizon",
                    "max_sup",
                    "independent_sup",
                    "coupling_l1",
                ],
                rows,
            )?;
            let bounds: Vec<serde_json::Value> = outcome
                .per_rd
                .iter()
                .map(|o| {
                    json!({
                        "rd": o.rd,
                        "constants": o.constants,
                        "bound_a": o.bound_a,
                        "bound_b": o.bound_b,
                    })
                })
                .collect();
            write_json(out_dir.join("bounds.json"), &bounds)?;
            json!({
                "slope": outcome.slope,
                "per_rd": outcome.per_rd.iter().map(|o| json!({
                    "rd": o.rd,
                    "mean_sup_at_horizon": o.mean_sup_at_t,
                    "mean_independent_sup": o.independent_sup_at_t.iter().sum::<f64>()
                        / o.independent_sup_at_t.len() as f64,
                    "mean_coupling_l1": o.coupling_l1_at_t.iter().sum::<f64>()
                        / o.coupling_l1_at_t.len() as f64,
                    "max_degree": o.max_degree,
                    "predicted_degree": o.predicted_degree,
                })).collect::<Vec<_>>(),
            })
        }
        ExperimentKind::Convergence => {
            let outcome =
                run_convergence_study(&config.n_list, config.rule, config.reps, config.seed)?;
            let rows = outcome
                .n_list
                .iter()
                .zip(&outcome.mean_max_sup)
                .map(|(&n, &v)| vec![n.to_string(), fmt_f64(v)]);
            write_csv(out_dir.join("results.csv"), &["n", "mean_max_sup"], rows)?;
            let constants: Vec<serde_json::Value> = outcome
                .n_list
                .iter()
                .map(|&n| {
                    let (land, model) = match outcome.rule {
                        ScalingRule::EqualPatch => (
                            equal_patch_landscape(n, 1.0),
                            RateModel::uniform(n, RateFn::Linear(0.3), RateFn::Constant(0.3))
                                .expect("rate model"),
                        ),
                        ScalingRule::Ring => (
                            contact_landscape(n),
                            RateModel::uniform(n, RateFn::Linear(1.0), RateFn::Constant(1.0))
                                .expect("rate model"),
                        ),
                    };
                    json!({ "n": n, "constants": bound_constants(&land, &model) })
                })
                .collect();
            write_json(out_dir.join("bounds.json"), &constants)?;
            json!({ "slope": outcome.slope })
        }
        ExperimentKind::BoundSweep => {
            let n = config.n_list[0];
            let grid = SweepGrid {
                theta: config.theta_list.clone(),
                eta: config.eta_list.clone(),
                r: config.r_list.clone(),
                alpha: config.alpha,
            };
            let rows = run_bound_sweep(
                n,
                config.lambda,
                config.extinction,
                config.m,
                config.horizon,
                VcFamily::Rectangles { dim: 2 },
                &grid,
            )?;
            let csv_rows = rows.iter().map(|row| {
                let b = &row.bound;
                vec![
                    format!("{:?}", b.id),
                    fmt_f64(b.inputs.theta),
                    b.inputs.eta.map(fmt_f64).unwrap_or_default(),
                    b.inputs.r.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(b.threshold),
                    fmt_f64(b.probability),
                    b.vacuous.to_string(),
                    b.preconditions_ok.to_string(),
                ]
            });
            write_csv(
                out_dir.join("results.csv"),
                &[
                    "theorem",
                    "theta",
                    "eta",
                    "r",
                    "threshold",
                    "probability",
                    "vacuous",
                    "preconditions_ok",
                ],
                csv_rows,
            )?;
            let land = equal_patch_landscape(n, 1.0);
            let model = RateModel::uniform(
                n,
                RateFn::Linear(config.lambda),
                RateFn::Constant(config.extinction),
            )?;
            write_json(
                out_dir.join("bounds.json"),
                &json!({ "constants": bound_constants(&land, &model) }),
            )?;
            let usable = rows
                .iter()
                .filter(|r| !r.bound.vacuous && r.bound.preconditions_ok)
                .count();
            let best = rows
                .iter()
                .filter(|r| !r.bound.vacuous && r.bound.preconditions_ok)
                .min_by(|a, b| {
                    (a.bound.threshold + a.bound.probability)
                        .partial_cmp(&(b.bound.threshold + b.bound.probability))
                        .unwrap()
                });
            json!({
                "rows": rows.len(),
                "usable": usable,
                "best": best.map(|r| json!({
                    "theorem": format!("{:?}", r.bound.id),
                    "theta": r.bound.inputs.theta,
                    "eta": r.bound.inputs.eta,
                    "r": r.bound.inputs.r,
                    "threshold": r.bound.threshold,
                    "probability": r.bound.probability,
                })),
            })
        }
        ExperimentKind::Verify => {
            let battery = default_verification_battery(config.reps, config.seed);
            let outcomes: Vec<VerifyOutcome> = battery
                .iter()
                .map(run_theorem_verification)
                .collect::<Result<_>>()?;
            let rows = outcomes.iter().map(|o| {
                vec![
                    o.name.clone(),
                    fmt_f64(o.bound.threshold),
                    fmt_f64(o.bound.probability),
                    o.bound.vacuous.to_string(),
                    o.bound.preconditions_ok.to_string(),
                    o.qualifying.to_string(),
                    o.exceed_count.to_string(),
                    fmt_f64(o.exceed_frequency),
                    fmt_f64(o.max_observed),
                ]
            });
            write_csv(
                out_dir.join("results.csv"),
                &[
                    "config",
                    "threshold",
                    "probability",
                    "vacuous",
                    "preconditions_ok",
                    "qualifying",
                    "exceed_count",
                    "exceed_frequency",
                    "max_observed",
                ],
                rows,
            )?;
            let bounds: Vec<serde_json::Value> = battery
                .iter()
                .zip(&outcomes)
                .map(|(cfg, o)| {
                    let land = equal_patch_landscape(cfg.n, 1.0);
                    let model = RateModel::uniform(
                        cfg.n,
                        RateFn::Linear(cfg.lambda),
                        RateFn::Constant(cfg.extinction),
                    )
                    .expect("verify rate model");
                    json!({
                        "config": o.name,
                        "bound": o.bound,
                        "constants": bound_constants(&land, &model),
                    })
                })
                .collect();
            write_json(out_dir.join("bounds.json"), &bounds)?;
            json!({
                "qualifying": outcomes.iter().filter(|o| o.qualifying).count(),
                "max_exceed_frequency_qualifying": outcomes
                    .iter()
                    .filter(|o| o.qualifying)
                    .map(|o| o.exceed_frequency)
                    .fold(0.0, f64::max),
            })
        }
    };
    let manifest = Manifest::new(
        &config.kind.to_string(),
        config.seed,
        &config.raw,
        aggregates.clone(),
    );
    write_json(out_dir.join("manifest.json"), &manifest).context("writing manifest.json")?;
    Ok(aggregates)
}
