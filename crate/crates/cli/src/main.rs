use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gridshare::clustering::{cluster_network, ClusteringMethod};
use gridshare::dispatch::{
    audit, cost, dispatch_partial, enumerate_scenarios, totals, DispatchContext, Knowledge, ScenarioMode, SharingMode,
};
use gridshare::harness::{
    default_price_grid, realize, replicate_three_bs, run_strategies, run_strategy, sweep, write_manifest,
    write_reports, write_schedule, write_three_bs, Strategy, SweepParameter, SweepSpec,
};
use gridshare::model::build_network;
use gridshare::rng::{child_rng, iteration_rng, STREAM_SCENARIOS};
use gridshare::Config;

#[derive(Parser)]
#[command(name = "gridshare", version, about = "Energy-sharing planner and dispatcher for renewable-powered base stations")]
struct Cli {
    /// JSON configuration; missing fields take the reference defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides network.rng_seed; also seeds the Monte Carlo draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    output: PathBuf,
    /// Overrides harness.iterations.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draws the station placement.
    Place,
    /// Plans the power lines.
    Cluster {
        #[arg(long, value_enum, default_value_t = Method::DivisiveSea)]
        method: Method,
    },
    /// Dispatches one day on one realization.
    Dispatch {
        #[arg(long, value_enum, default_value_t = KnowledgeArg::Perfect)]
        knowledge: KnowledgeArg,
        #[arg(long, value_enum, default_value_t = Mode::Hybrid)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Method::DivisiveSea)]
        method: Method,
        #[arg(long)]
        scenario_cap: Option<usize>,
        #[arg(long)]
        deviation: Option<f64>,
        /// Dispatch on the mean profiles instead of a random draw.
        #[arg(long)]
        mean: bool,
    },
    /// Monte Carlo comparison of strategies on one network.
    Simulate {
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = Mode::value_variants().to_vec())]
        modes: Vec<Mode>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [KnowledgeArg::Perfect])]
        knowledge: Vec<KnowledgeArg>,
        #[arg(long, value_enum, default_value_t = Method::DivisiveSea)]
        method: Method,
    },
    /// Monte Carlo runs along one parameter.
    Sweep {
        #[arg(long, value_enum)]
        parameter: Parameter,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = Mode::value_variants().to_vec())]
        modes: Vec<Mode>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [KnowledgeArg::Perfect])]
        knowledge: Vec<KnowledgeArg>,
        #[arg(long, value_enum, default_value_t = Method::DivisiveSea)]
        method: Method,
    },
    /// The three-station example across grid prices.
    ReplicateThreeBs {
        #[arg(long, value_delimiter = ',')]
        prices: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    AgglomerativeAea,
    AgglomerativeSea,
    DivisiveAea,
    DivisiveSea,
}

impl From<Method> for ClusteringMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::AgglomerativeAea => Self::AgglomerativeAea,
            Method::AgglomerativeSea => Self::AgglomerativeSea,
            Method::DivisiveAea => Self::DivisiveAea,
            Method::DivisiveSea => Self::DivisiveSea,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    NoSharing,
    SgOnly,
    PhysicalOnly,
    Hybrid,
}

impl From<Mode> for SharingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::NoSharing => Self::NoSharing,
            Mode::SgOnly => Self::SgOnly,
            Mode::PhysicalOnly => Self::PhysicalOnly,
            Mode::Hybrid => Self::Hybrid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KnowledgeArg {
    Zero,
    Perfect,
    Partial,
}

impl From<KnowledgeArg> for Knowledge {
    fn from(k: KnowledgeArg) -> Self {
        match k {
            KnowledgeArg::Zero => Self::Zero,
            KnowledgeArg::Perfect => Self::Perfect,
            KnowledgeArg::Partial => Self::Partial,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Parameter {
    SharingRange,
    GridPrice,
    Deviation,
}

impl From<Parameter> for SweepParameter {
    fn from(p: Parameter) -> Self {
        match p {
            Parameter::SharingRange => Self::SharingRange,
            Parameter::GridPrice => Self::GridPrice,
            Parameter::Deviation => Self::Deviation,
        }
    }
}

fn strategies(modes: &[Mode], knowledge: &[KnowledgeArg], method: Method) -> Vec<Strategy> {
    let mut out = Vec::new();
    for &k in knowledge {
        for &m in modes {
            let mode = SharingMode::from(m);
            let clustering = mode.uses_links().then(|| method.into());
            out.push(Strategy::new(mode, k.into(), clustering));
        }
    }
    out
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.network.rng_seed = s;
    }
    if let Some(n) = cli.iterations {
        cfg.harness.iterations = n;
    }
    if let Command::Dispatch { scenario_cap, deviation, .. } = &cli.command {
        if let Some(c) = scenario_cap {
            cfg.dispatch.scenario_cap = *c;
        }
        if let Some(d) = deviation {
            cfg.dispatch.deviation = *d;
        }
    }
    cfg.validate()?;
    let seed = cfg.network.rng_seed;
    let iterations = cfg.harness.iterations;
    let out = &cli.output;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let name = match &cli.command {
        Command::Place => {
            let net = build_network(&cfg)?;
            let mut w = csv::Writer::from_writer(create(out, "placement.csv")?);
            w.write_record(["bs", "x_km", "y_km", "panel_area_m2"])?;
            for (i, st) in net.stations.iter().enumerate() {
                w.write_record([
                    (i + 1).to_string(),
                    st.position[0].to_string(),
                    st.position[1].to_string(),
                    st.generation.panel_area_m2.to_string(),
                ])?;
            }
            w.flush()?;
            "place"
        }
        Command::Cluster { method } => {
            let net = build_network(&cfg)?;
            let links = cluster_network(&net, &cfg.clustering, (*method).into());
            let mut w = csv::Writer::from_writer(create(out, "association.csv")?);
            for row in links.rows() {
                w.write_record(row.iter().map(u8::to_string))?;
            }
            w.flush()?;
            let mut w = csv::Writer::from_writer(create(out, "edges.csv")?);
            w.write_record(["from", "to", "length_km"])?;
            for (a, b) in links.edges() {
                w.write_record([(a + 1).to_string(), (b + 1).to_string(), net.distance(a, b).to_string()])?;
            }
            w.flush()?;
            let total = links.total_length(&net.positions());
            let summary = serde_json::json!({ "links": links.edge_count(), "total_length_km": total });
            std::fs::write(out.join("cluster.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            println!("{} links, {total:.4} km of line", links.edge_count());
            "cluster"
        }
        Command::Dispatch { knowledge, mode, method, mean, .. } => {
            let net = build_network(&cfg)?;
            let mode = SharingMode::from(*mode);
            let knowledge = Knowledge::from(*knowledge);
            let links = if mode.uses_links() {
                cluster_network(&net, &cfg.clustering, (*method).into())
            } else {
                gridshare::clustering::AssociationMatrix::empty(net.bs_count())
            };
            let params = &cfg.dispatch;
            let ctx = DispatchContext { net: &net, links: &links, mode, params };
            let profiles = if *mean {
                net.mean_profiles()
            } else {
                realize(&net, cfg.harness.realization, params, &mut iteration_rng(seed, 0))
            };
            let plan = if knowledge == Knowledge::Partial {
                let m = net.mean_profiles();
                let set = enumerate_scenarios(
                    &m.generation,
                    params.deviation,
                    params.support_points,
                    params.scenario_cap,
                    params.scenario_mode,
                    &mut child_rng(seed, STREAM_SCENARIOS),
                )?;
                if set.mode == ScenarioMode::Sampled {
                    log::info!("sampled {} scenarios", set.len());
                }
                Some(dispatch_partial(&ctx, &m.consumption, &set)?.grid)
            } else {
                None
            };
            let schedule = run_strategy(&ctx, knowledge, plan.as_deref(), &profiles)?;
            let report = audit(&ctx, &profiles, &schedule);
            if !report.passes(false) {
                bail!("schedule failed its audit: {report:?}");
            }
            write_schedule(create(out, "schedule.csv")?, create(out, "lines.csv")?, &schedule)?;
            let c = cost(&schedule, &net.prices);
            let t = totals(&schedule, &net.prices);
            let summary = serde_json::json!({
                "sharing_mode": mode.label(),
                "knowledge": knowledge.label(),
                "total_cost": c.total,
                "per_bs": c.per_bs,
                "per_slot": c.per_slot,
                "grid_wh": t.grid,
                "shared_sg_wh": t.shared_sg,
                "extra_wh": t.extra,
                "shared_lines_wh": t.shared_lines,
                "battery_use_wh": t.battery_use,
            });
            std::fs::write(out.join("cost.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            println!("total cost {:.6} MU", c.total);
            "dispatch"
        }
        Command::Simulate { modes, knowledge, method } => {
            let reports = run_strategies(&cfg, &strategies(modes, knowledge, *method), iterations, seed)?;
            write_reports(create(out, "simulate.csv")?, &reports)?;
            for r in &reports {
                println!(
                    "{:>14} {:>8}  mean cost {:.4} ± {:.4}",
                    r.strategy.sharing_mode.label(),
                    r.strategy.knowledge.label(),
                    r.mean.cost,
                    r.std_error.cost
                );
            }
            "simulate"
        }
        Command::Sweep { parameter, values, modes, knowledge, method } => {
            let spec = SweepSpec { parameter: (*parameter).into(), values: values.clone(), mc_iterations: iterations, seed };
            let table = sweep(&spec, &cfg, &strategies(modes, knowledge, *method))?;
            table.write_csv(create(out, "sweep.csv")?)?;
            "sweep"
        }
        Command::ReplicateThreeBs { prices } => {
            let grid = prices.clone().unwrap_or_else(default_price_grid);
            let rows = replicate_three_bs(&cfg, &grid)?;
            write_three_bs(create(out, "three_bs.csv")?, &rows)?;
            for r in &rows {
                println!("c_g {:.2}  hybrid saving {:.2}%", r.grid_price, 100.0 * r.saving(SharingMode::Hybrid));
            }
            "replicate-three-bs"
        }
    };
    write_manifest(out, name, &cfg, seed, iterations)?;
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
