use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use metapop::config::ExperimentConfig;
use metapop::experiments;
use metapop::output::{ensure_dir, fmt_f64, write_csv};
use metapop_core::bounds::{bound_constants, theorem1_bound, theorem2_bound, theorem3_bound};
use metapop_core::continuous::{
    default_ode_step, integrate_ode, simulate_coupled_ct, simulate_ctmc,
};
use metapop_core::discrete::{simulate_coupled, simulate_ifm, OccupancyState};
use metapop_core::landscape::{GenerateSpec, KernelSpec, Landscape};
use metapop_core::measures::{sup_discrepancy, tv_distance, VcFamily};
use metapop_core::oracle;
use metapop_core::rates::RateModel;
use metapop_core::stats;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "metapop",
    version,
    about = "Stochastic metapopulation models, their deterministic limits and deviation bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Landscape generation and inspection.
    Landscape {
        #[command(subcommand)]
        cmd: LandscapeCmd,
    },
    /// Run simulators and write trajectories as CSV.
    Simulate {
        #[command(subcommand)]
        cmd: SimulateCmd,
    },
    /// Evaluate the deviation bounds for a landscape and rate model.
    Bounds(BoundsArgs),
    /// Exact small-instance references for debugging the simulators.
    Oracle {
        #[command(subcommand)]
        cmd: OracleCmd,
    },
    /// Config-driven experiment suites.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum LandscapeCmd {
    /// Generate a landscape and write it in the text format.
    Gen {
        /// uniform | ring | grid
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// e.g. "exponential(1.0)", "tophat(2.0)" or "ring"
        #[arg(long)]
        kernel: String,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    landscape: PathBuf,
    #[arg(long)]
    rates: PathBuf,
    /// Time horizon T.
    #[arg(long = "T")]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// full | empty | alternating | explicit bit string such as 1010
    #[arg(long, default_value = "full")]
    x0: String,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Discrete-time chain; --coupled also tracks (W, p, J) diagnostics.
    Discrete {
        #[command(flatten)]
        common: SimArgs,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long)]
        coupled: bool,
    },
    /// Continuous-time chain via exact event simulation.
    Ctmc {
        #[command(flatten)]
        common: SimArgs,
    },
    /// Mean-field ODE with fixed-step RK4.
    Ode {
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[arg(long = "T")]
        horizon: f64,
        /// Step size; defaults to min(0.01, 1/(10 k)).
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value = "full")]
        p0: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Coupled continuous-time pair (W, X) against the ODE path.
    CoupledCt {
        #[command(flatten)]
        common: SimArgs,
        #[arg(long)]
        h: Option<f64>,
    },
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    landscape: PathBuf,
    #[arg(long)]
    rates: PathBuf,
    /// 1, 2 or 3.
    #[arg(long)]
    theorem: u8,
    #[arg(long = "T")]
    horizon: f64,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// VC dimension; defaults to the rectangles family over the attribute space.
    #[arg(long = "V")]
    vc_dim: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.25)]
    eta: f64,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Emit the full JSON report (otherwise a short summary).
    #[arg(long)]
    json: bool,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Exact distribution of the discrete chain at m*T (n <= 6).
    Chain {
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value = "full")]
        x0: String,
    },
    /// Exact moments of the coupled weighted disagreement (n <= 3).
    Coupled {
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value = "full")]
        x0: String,
    },
    /// Exact CTMC transient distribution (n <= 6).
    Ctmc {
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value = "full")]
        x0: String,
        /// uniformization | expm
        #[arg(long, default_value = "uniformization")]
        method: String,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// contact | poisson | convergence | verify | bound-sweep
    kind: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

fn parse_kernel(text: &str) -> Result<KernelSpec<f64>> {
    let text = text.trim();
    if text == "ring" {
        return Ok(KernelSpec::Ring);
    }
    let (name, rest) = text
        .split_once('(')
        .with_context(|| format!("kernel spec needs an argument: {text}"))?;
    let arg: f64 = rest
        .strip_suffix(')')
        .with_context(|| format!("unbalanced parentheses: {text}"))?
        .trim()
        .parse()
        .with_context(|| format!("bad kernel argument in {text}"))?;
    match name.trim() {
        "exponential" => Ok(KernelSpec::Exponential(arg)),
        "tophat" => Ok(KernelSpec::TopHat(arg)),
        other => bail!("unknown kernel kind: {other}"),
    }
}

fn parse_x0(text: &str, n: usize) -> Result<OccupancyState> {
    match text {
        "full" => Ok(OccupancyState::all_occupied(n)),
        "empty" => Ok(OccupancyState::all_empty(n)),
        "alternating" => Ok(OccupancyState::alternating(n)),
        bits => {
            let parsed: Vec<u8> = bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => bail!("bad occupancy bit {other:?}"),
                })
                .collect::<Result<_>>()?;
            if parsed.len() != n {
                bail!(
                    "occupancy string has {} bits, landscape has {n}",
                    parsed.len()
                );
            }
            Ok(OccupancyState::new(parsed)?)
        }
    }
}

fn load_pair(landscape: &Path, rates: &Path) -> Result<(Landscape<f64>, RateModel<f64>)> {
    let land_text = fs::read_to_string(landscape)
        .with_context(|| format!("reading {}", landscape.display()))?;
    let land: Landscape<f64> = Landscape::from_text(&land_text)?;
    let rates_text =
        fs::read_to_string(rates).with_context(|| format!("reading {}", rates.display()))?;
    let model = RateModel::parse_config(&rates_text, land.n())?;
    Ok((land, model))
}

fn state_header(n: usize, prefix: &str) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("{prefix}{i}")))
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Landscape { cmd } => landscape_cmd(cmd),
        Command::Simulate { cmd } => simulate_cmd(cmd),
        Command::Bounds(args) => bounds_cmd(args),
        Command::Oracle { cmd } => oracle_cmd(cmd),
        Command::Experiment(args) => experiment_cmd(args),
    }
}

fn landscape_cmd(cmd: LandscapeCmd) -> Result<()> {
    match cmd {
        LandscapeCmd::Gen {
            kind,
            n,
            d,
            seed,
            kernel,
            out,
        } => {
            let spec = match kind.as_str() {
                "uniform" => GenerateSpec::UniformBox { n, d, seed },
                "ring" => GenerateSpec::Ring { n },
                "grid" => GenerateSpec::Grid { n, d },
                other => bail!("unknown landscape kind: {other}"),
            };
            let land: Landscape<f64> = Landscape::generate(&spec, parse_kernel(&kernel)?)?;
            fs::write(&out, land.to_text())
                .with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} ({} patches)", out.display(), land.n());
            Ok(())
        }
    }
}

fn simulate_cmd(cmd: SimulateCmd) -> Result<()> {
    match cmd {
        SimulateCmd::Discrete { common, m, coupled } => {
            let (land, model) = load_pair(&common.landscape, &common.rates)?;
            let n = land.n();
            let x0 = parse_x0(&common.x0, n)?;
            ensure_dir(&common.out)?;
            let header = state_header(n, "X_");
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let family = VcFamily::Rectangles {
                dim: land.attribute_dim(),
            };
            for rep in 0..common.reps {
                let rep_seed = stats::replicate_seed(common.seed, rep as u64);
                if coupled {
                    let traj = simulate_coupled(&x0, &land, &model, m, common.horizon, rep_seed)?;
                    let rows = (0..=traj.steps()).map(|t| {
                        std::iter::once(t.to_string())
                            .chain(traj.x[t].iter().map(|b| b.to_string()))
                            .collect()
                    });
                    write_csv(
                        common.out.join(format!("rep{rep:04}_x.csv")),
                        &header_refs,
                        rows,
                    )?;
                    let diag_rows: Vec<Vec<String>> = (0..=traj.steps())
                        .map(|t| {
                            let xs = OccupancyState::new(traj.x[t].clone()).unwrap();
                            let xr: Vec<f64> = traj.x[t].iter().map(|&b| b as f64).collect();
                            let tv = tv_distance(&xs, &traj.p[t]).unwrap();
                            let sup = sup_discrepancy(&xr, &traj.p[t], &land, &family)
                                .unwrap()
                                .sup;
                            vec![
                                t.to_string(),
                                fmt_f64(traj.weighted_disagreement(t, &land)),
                                fmt_f64(traj.l1_distance(t)),
                                fmt_f64(tv),
                                fmt_f64(sup),
                            ]
                        })
                        .collect();
                    write_csv(
                        common.out.join(format!("rep{rep:04}_coupled.csv")),
                        &["t", "sumJ_weighted", "l1_XW", "tv_Xp", "sup_rect_Xp"],
                        diag_rows,
                    )?;
                } else {
                    let path = simulate_ifm(&x0, &land, &model, m, common.horizon, rep_seed)?;
                    let rows = path.states.iter().enumerate().map(|(t, state)| {
                        std::iter::once(t.to_string())
                            .chain(state.iter().map(|b| b.to_string()))
                            .collect()
                    });
                    write_csv(
                        common.out.join(format!("rep{rep:04}_x.csv")),
                        &header_refs,
                        rows,
                    )?;
                }
            }
            Ok(())
        }
        SimulateCmd::Ctmc { common } => {
            let (land, model) = load_pair(&common.landscape, &common.rates)?;
            let x0 = parse_x0(&common.x0, land.n())?;
            ensure_dir(&common.out)?;
            for rep in 0..common.reps {
                let rep_seed = stats::replicate_seed(common.seed, rep as u64);
                let path = simulate_ctmc(&x0, &land, &model, common.horizon, rep_seed)?;
                let rows = path.events.iter().map(|ev| {
                    vec![
                        fmt_f64(ev.time),
                        ev.patch.to_string(),
                        ev.new_value.to_string(),
                    ]
                });
                write_csv(
                    common.out.join(format!("rep{rep:04}_events.csv")),
                    &["time", "patch", "new_value"],
                    rows,
                )?;
            }
            Ok(())
        }
        SimulateCmd::Ode {
            landscape,
            rates,
            horizon,
            h,
            p0,
            out,
        } => {
            let (land, model) = load_pair(&landscape, &rates)?;
            let n = land.n();
            let start = parse_x0(&p0, n)?.to_reals::<f64>();
            let h = h.unwrap_or_else(|| default_ode_step(&land, &model));
            let path = integrate_ode(&start, &land, &model, horizon, h)?;
            ensure_dir(&out)?;
            let header = state_header(n, "p_");
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = path.grid().iter().enumerate().map(|(k, p)| {
                std::iter::once(fmt_f64(k as f64 * path.step()))
                    .chain(p.iter().map(|&v| fmt_f64(v)))
                    .collect()
            });
            write_csv(out.join("ode.csv"), &header_refs, rows)?;
            Ok(())
        }
        SimulateCmd::CoupledCt { common, h } => {
            let (land, model) = load_pair(&common.landscape, &common.rates)?;
            let x0 = parse_x0(&common.x0, land.n())?;
            let h = h.unwrap_or_else(|| default_ode_step(&land, &model));
            let ode = integrate_ode(&x0.to_reals(), &land, &model, common.horizon, h)?;
            ensure_dir(&common.out)?;
            let family = VcFamily::Rectangles {
                dim: land.attribute_dim(),
            };
            let grid: Vec<f64> = (0..=20).map(|k| k as f64 * common.horizon / 20.0).collect();
            for rep in 0..common.reps {
                let rep_seed = stats::replicate_seed(common.seed, rep as u64);
                let traj = simulate_coupled_ct(&x0, &land, &model, common.horizon, rep_seed, &ode)?;
                let rows = traj.events.iter().map(|ev| {
                    vec![
                        fmt_f64(ev.time),
                        ev.patch.to_string(),
                        ev.w_new.map(|v| v.to_string()).unwrap_or_default(),
                        ev.x_new.map(|v| v.to_string()).unwrap_or_default(),
                    ]
                });
                write_csv(
                    common.out.join(format!("rep{rep:04}_events.csv")),
                    &["time", "patch", "w_new", "x_new"],
                    rows,
                )?;
                let mut disc_rows = Vec::with_capacity(grid.len());
                traj.scan(&grid, |_k, t, _w, x, _j| {
                    let xs = OccupancyState::new(x.to_vec()).unwrap();
                    let xr: Vec<f64> = x.iter().map(|&b| b as f64).collect();
                    let p = ode.value_at(t);
                    let rep = sup_discrepancy(&xr, &p, &land, &family).unwrap();
                    let tv = tv_distance(&xs, &p).unwrap();
                    disc_rows.push(vec![
                        fmt_f64(t),
                        family.to_string(),
                        fmt_f64(rep.sup),
                        match rep.exactness {
                            metapop_core::measures::Exactness::Exact => "exact".to_string(),
                            metapop_core::measures::Exactness::LowerBound => {
                                "lower-bound".to_string()
                            }
                        },
                        rep.witness.to_string(),
                        fmt_f64(tv),
                    ]);
                });
                write_csv(
                    common.out.join(format!("rep{rep:04}_discrepancy.csv")),
                    &["t", "family", "sup", "exact_flag", "witness_params", "tv"],
                    disc_rows,
                )?;
            }
            Ok(())
        }
    }
}

fn bounds_cmd(args: BoundsArgs) -> Result<()> {
    let (land, model) = load_pair(&args.landscape, &args.rates)?;
    let constants = bound_constants(&land, &model);
    let vc_dim = args.vc_dim.unwrap_or_else(|| {
        VcFamily::Rectangles {
            dim: land.attribute_dim(),
        }
        .vc_dimension()
    });
    let bounds = match args.theorem {
        1 => vec![theorem1_bound(
            &constants,
            args.m,
            args.horizon,
            vc_dim,
            args.theta,
            args.eta,
        )?],
        2 => vec![theorem2_bound(
            &constants,
            args.m,
            args.horizon,
            vc_dim,
            args.theta,
            args.r,
        )?],
        3 => {
            let (a, b) = theorem3_bound(
                &constants,
                args.horizon,
                vc_dim,
                args.theta,
                args.eta,
                args.alpha,
                args.r,
            )?;
            vec![a, b]
        }
        other => bail!("theorem must be 1, 2 or 3, got {other}"),
    };
    let report = json!({ "constants": constants, "bounds": bounds });
    if args.json {
        let text = serde_json::to_string_pretty(&report)?;
        match &args.out {
            Some(path) => fs::write(path, text)?,
            None => println!("{text}"),
        }
    } else {
        for b in &bounds {
            println!(
                "{:?}: threshold {:.6} probability {:.6}{}{}",
                b.id,
                b.threshold,
                b.probability,
                if b.vacuous { " [vacuous]" } else { "" },
                if b.preconditions_ok {
                    ""
                } else {
                    " [preconditions violated]"
                },
            );
        }
        if let Some(path) = &args.out {
            fs::write(path, serde_json::to_string_pretty(&report)?)?;
        }
    }
    Ok(())
}

fn oracle_cmd(cmd: OracleCmd) -> Result<()> {
    match cmd {
        OracleCmd::Chain {
            landscape,
            rates,
            m,
            horizon,
            x0,
        } => {
            let (land, model) = load_pair(&landscape, &rates)?;
            let x0 = parse_x0(&x0, land.n())?;
            let dist = oracle::exact_chain_distribution(&x0, &land, &model, m, horizon)?;
            print_distribution(&dist);
            Ok(())
        }
        OracleCmd::Coupled {
            landscape,
            rates,
            m,
            horizon,
            x0,
        } => {
            let (land, model) = load_pair(&landscape, &rates)?;
            let x0 = parse_x0(&x0, land.n())?;
            let moments = oracle::exact_coupled_moment(&x0, &land, &model, m, horizon)?;
            println!(
                "{}",
                json!({
                    "mean_weighted_disagreement": moments.mean,
                    "variance_weighted_disagreement": moments.variance,
                })
            );
            Ok(())
        }
        OracleCmd::Ctmc {
            landscape,
            rates,
            horizon,
            x0,
            method,
        } => {
            let (land, model) = load_pair(&landscape, &rates)?;
            let x0 = parse_x0(&x0, land.n())?;
            let dist = match method.as_str() {
                "uniformization" => oracle::exact_ctmc_marginal(&x0, &land, &model, horizon)?,
                "expm" => oracle::exact_ctmc_marginal_expm(&x0, &land, &model, horizon)?,
                other => bail!("unknown method: {other}"),
            };
            print_distribution(&dist);
            Ok(())
        }
    }
}

fn print_distribution(dist: &oracle::ExactDistribution<f64>) {
    println!("state,probability");
    for (idx, &p) in dist.probabilities.iter().enumerate() {
        let bits: String = oracle::state_bits(idx, dist.n)
            .iter()
            .map(|b| char::from(b'0' + b))
            .collect();
        println!("{bits},{p}");
    }
}

fn experiment_cmd(args: ExperimentArgs) -> Result<()> {
    let mut text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if !text.lines().any(|l| l.trim_start().starts_with("kind")) {
        text = format!("kind = {}\n{text}", args.kind);
    }
    let config = ExperimentConfig::parse(&text)?;
    if config.kind.to_string() != args.kind {
        bail!(
            "config kind `{}` does not match the requested experiment `{}`",
            config.kind,
            args.kind
        );
    }
    let aggregates = experiments::run_from_config(&config, &args.out)?;
    println!("{}", serde_json::to_string_pretty(&aggregates)?);
    Ok(())
}
