//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use sirefine::causal::{
    brute_force_causal, default_sizes, min_rates_causal_sized, optimal_decoders, separation_check, CausalAuxChannel,
    CausalDecoderRuleSet, CausalRegionPoint, GridSpec,
};
use sirefine::channels::{capacity, dmc_capacity, CapacityResult, ChannelConfig, StateChannel, StateKnowledge};
use sirefine::noncausal::{
    inner_frontier, lossless_special_case, nc_optimal_decoders, outer_frontier, sr_special_case,
    verify_inner_subset_outer, LosslessDecoder, NcAuxChannel, NcDecoderRuleSet, NcRegionPoint, NcSizes,
};
use sirefine::search::SearchConfig;
use sirefine::sim::{simulate_causal, simulate_nc, SimReport, Storage};
use sirefine::{DistortionQuad, Error};

use crate::output::{Cell, Outputs, Table};
use crate::problem::{Capacities, InputDigest, Inputs, ProblemFile};
use crate::{Cli, Command};

/// Exit status: 2 for infeasible targets and exceeded caps, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::InfeasibleTarget { .. } | Error::CapExceeded(_)) => 2,
        _ => 1,
    }
}

fn parse_target(s: &str) -> std::result::Result<DistortionQuad, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| match t.trim() {
            "inf" => Ok(f64::INFINITY),
            t => t.parse::<f64>().map_err(|e| format!("`{t}`: {e}")),
        })
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != 4 {
        return Err("expected four values dy1,dz1,dy2,dz2".into());
    }
    let q = DistortionQuad::from_array([v[0], v[1], v[2], v[3]]);
    if !q.is_valid() {
        return Err("distortion levels must be >= 0".into());
    }
    Ok(q)
}

fn parse_nc_sizes(s: &str) -> std::result::Result<NcSizes, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [w1, w2, w3, w4, v] => Ok(NcSizes { w1, w2, w3, w4, v }),
        _ => Err("expected five sizes w1,w2,w3,w4,v".into()),
    }
}

/// Search tunables shared by the region and bound commands.
#[derive(Args, Debug, Clone, Default)]
pub struct SearchFlags {
    /// Distortion target `dy1,dz1,dy2,dz2` (`inf` for unconstrained).
    #[arg(long, value_parser = parse_target)]
    pub target: Option<DistortionQuad>,
    /// Random restarts per objective weight.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Proposals per restart.
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RegionArgs {
    pub problem: PathBuf,
    #[command(flatten)]
    pub search: SearchFlags,
    #[arg(long)]
    pub w1: Option<usize>,
    #[arg(long)]
    pub w2: Option<usize>,
    /// Upper limit on default auxiliary sizes.
    #[arg(long)]
    pub aux_cap: Option<usize>,
    /// Use the exhaustive grid with this many steps per simplex edge.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsMode {
    Inner,
    Outer,
    Sr,
    LosslessZ1,
    LosslessY2,
    Consistency,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    pub problem: PathBuf,
    #[arg(long, value_enum)]
    pub mode: BoundsMode,
    #[command(flatten)]
    pub search: SearchFlags,
    /// Auxiliary sizes `w1,w2,w3,w4,v`.
    #[arg(long, value_parser = parse_nc_sizes)]
    pub sizes: Option<NcSizes>,
    /// Sampled channels for `--mode consistency`.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityMode {
    /// State known causally at the encoder.
    Causal,
    /// State known non-causally at the encoder.
    Noncausal,
    /// State unknown; capacity of the state-averaged channel.
    Dmc,
}

#[derive(Args, Debug)]
pub struct CapacityArgs {
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t = CapacityMode::Causal)]
    pub mode: CapacityMode,
}

#[derive(Args, Debug)]
pub struct SeparationArgs {
    pub problem: PathBuf,
    #[command(flatten)]
    pub search: SearchFlags,
    /// Capacity file written by `capacity` (`capacity_detail.json`).
    #[arg(long)]
    pub capacities: Option<PathBuf>,
    /// How stage capacities are computed from the problem's channels.
    #[arg(long, value_enum, default_value_t = CapacityMode::Causal)]
    pub mode: CapacityMode,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub rho1: Option<f64>,
    #[arg(long)]
    pub rho2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Causal,
    Noncausal,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub problem: PathBuf,
    #[arg(long, value_enum)]
    pub scheme: Scheme,
    /// Auxiliary channel JSON file.
    #[arg(long, conflicts_with = "from_region_witness")]
    pub aux: Option<PathBuf>,
    /// Witness file from `region-causal` or `bounds-noncausal`.
    #[arg(long)]
    pub from_region_witness: Option<PathBuf>,
    /// Which witness point to use.
    #[arg(long, default_value_t = 0)]
    pub point: usize,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Cap on stored codeword symbols.
    #[arg(long)]
    pub cap: Option<u64>,
    #[arg(long, value_enum)]
    pub storage: Option<StorageArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StorageArg {
    Auto,
    Materialized,
    OnDemand,
}

impl From<StorageArg> for Storage {
    fn from(s: StorageArg) -> Self {
        match s {
            StorageArg::Auto => Storage::Auto,
            StorageArg::Materialized => Storage::Materialized,
            StorageArg::OnDemand => Storage::OnDemand,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    argv: Vec<String>,
    command: &'static str,
    seed: u64,
    workers: Option<usize>,
    format: crate::Format,
    config: serde_json::Value,
    inputs: &'a [InputDigest],
    outputs: Vec<String>,
    started_unix: u64,
    wall_clock_secs: f64,
}

/// What a command hands back for writing.
struct Run {
    name: &'static str,
    seed: u64,
    config: serde_json::Value,
    /// Printed to standard output after the files are written.
    summary: String,
}

pub fn run(cli: &Cli) -> Result<()> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    if let Some(w) = cli.global.workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("cannot configure the worker pool")?;
    }
    let mut inputs = Inputs::default();
    let g = &cli.global;
    let mut out = Outputs::new(g.format);
    let run = match &cli.command {
        Command::RegionCausal(a) => region_causal(a, g.seed, &mut inputs, &mut out)?,
        Command::BoundsNoncausal(a) => bounds_noncausal(a, g.seed, &mut inputs, &mut out)?,
        Command::Capacity(a) => capacity_cmd(a, g.seed, &mut inputs, &mut out)?,
        Command::Separation(a) => separation(a, g.seed, &mut inputs, &mut out)?,
        Command::Simulate(a) => simulate(a, g.seed, &mut inputs, &mut out)?,
    };
    let manifest = Manifest {
        tool: "sirefine",
        version: env!("CARGO_PKG_VERSION"),
        argv: std::env::args().collect(),
        command: run.name,
        seed: run.seed,
        workers: g.workers,
        format: g.format,
        config: run.config,
        inputs: &inputs.digests,
        outputs: out.names(),
        started_unix: started,
        wall_clock_secs: clock.elapsed().as_secs_f64(),
    };
    out.json("manifest.json", &manifest);
    out.write_all(&g.out_dir)?;
    print!("{}", run.summary);
    Ok(())
}

fn load_problem(path: &Path, inputs: &mut Inputs) -> Result<ProblemFile> {
    inputs.json(path)
}

fn search_config(p: &ProblemFile, f: &SearchFlags, seed: Option<u64>) -> SearchConfig {
    let mut c = p.search.clone().unwrap_or_default();
    if let Some(s) = seed {
        c.seed = s;
    }
    if let Some(r) = f.restarts {
        c.restarts = r;
    }
    if let Some(i) = f.iters {
        c.iters = i;
    }
    c
}

fn target_of(p: &ProblemFile, f: &SearchFlags) -> Result<DistortionQuad> {
    f.target
        .or(p.target)
        .ok_or_else(|| anyhow!("no distortion target: pass --target or set `target` in the problem file"))
}

fn quad_cells(q: &DistortionQuad) -> Vec<Cell> {
    q.as_array().iter().map(|&v| Cell::Num(v)).collect()
}

fn region_causal(a: &RegionArgs, seed: Option<u64>, inputs: &mut Inputs, out: &mut Outputs) -> Result<Run> {
    let p = load_problem(&a.problem, inputs)?;
    let source = p.source()?;
    let target = target_of(&p, &a.search)?;
    let mut cfg = search_config(&p, &a.search, seed);
    if let Some(c) = a.aux_cap {
        cfg.aux_cap = c;
    }
    let (dw1, dw2) = default_sizes(source.x_size(), cfg.aux_cap);
    let (pw1, pw2) = p.causal_sizes.map(|s| (s[0], s[1])).unwrap_or((dw1, dw2));
    let sizes = (a.w1.unwrap_or(pw1), a.w2.unwrap_or(pw2));
    let points = match a.grid {
        Some(res) => brute_force_causal(source, &target, &GridSpec::new(sizes.0, sizes.1, res))?,
        None => min_rates_causal_sized(source, &target, &cfg, sizes)?,
    };
    let mut t = Table::new(&["r1", "delta_r", "dy1", "dz1", "dy2", "dz2"]);
    for pt in &points {
        let mut row = vec![Cell::Num(pt.r1), Cell::Num(pt.delta_r)];
        row.extend(quad_cells(&pt.achieved));
        t.push(row);
    }
    out.table("frontier", &t);
    out.json("witness.json", &points);
    let best = points.iter().map(|p| p.r1).fold(f64::INFINITY, f64::min);
    Ok(Run {
        name: "region-causal",
        seed: cfg.seed,
        config: serde_json::json!({
            "target": target, "search": cfg, "sizes": [sizes.0, sizes.1], "grid": a.grid,
        }),
        summary: format!("{} frontier points, min r1 = {}\n", points.len(), sirefine::text::sig9(best)),
    })
}

fn bounds_noncausal(a: &BoundsArgs, seed: Option<u64>, inputs: &mut Inputs, out: &mut Outputs) -> Result<Run> {
    let p = load_problem(&a.problem, inputs)?;
    let source = p.source()?;
    let cfg = search_config(&p, &a.search, seed);
    let sizes = a.sizes.or(p.nc_sizes).unwrap_or_else(|| NcSizes::default_for(source.x_size()));
    if a.mode == BoundsMode::Consistency {
        let rep = verify_inner_subset_outer(source, a.samples, cfg.seed)?;
        let mut t = Table::new(&["samples", "r1_mismatches", "r2_violations", "max_r1_diff", "max_r2_excess", "max_markov_residual"]);
        t.push(vec![
            Cell::Int(rep.samples as u64),
            Cell::Int(rep.r1_mismatches as u64),
            Cell::Int(rep.r2_violations as u64),
            Cell::Num(rep.max_r1_diff),
            Cell::Num(rep.max_r2_excess),
            Cell::Num(rep.max_markov_residual),
        ]);
        out.table("consistency", &t);
        out.json("consistency_report.json", &rep);
        return Ok(Run {
            name: "bounds-noncausal",
            seed: cfg.seed,
            config: serde_json::json!({ "mode": a.mode, "samples": a.samples }),
                summary: format!(
                "{} samples, {} r1 mismatches, {} r2 violations\n",
                rep.samples, rep.r1_mismatches, rep.r2_violations
            ),
        });
    }
    let target = target_of(&p, &a.search).or_else(|e| match a.mode {
        BoundsMode::LosslessZ1 | BoundsMode::LosslessY2 => Ok(DistortionQuad::unconstrained()),
        _ => Err(e),
    })?;
    let mut case = None;
    let points: Vec<NcRegionPoint> = match a.mode {
        BoundsMode::Inner => inner_frontier(source, &target, sizes, &cfg)?,
        BoundsMode::Outer => outer_frontier(source, &target, sizes, &cfg)?,
        BoundsMode::Sr => {
            let (c, pts) = sr_special_case(source, &target, sizes, &cfg)?;
            case = Some(serde_json::to_value(c)?);
            pts
        }
        BoundsMode::LosslessZ1 => lossless_special_case(source, LosslessDecoder::Z1, &target, sizes, &cfg)?,
        BoundsMode::LosslessY2 => lossless_special_case(source, LosslessDecoder::Y2, &target, sizes, &cfg)?,
        BoundsMode::Consistency => unreachable!("handled above"),
    };
    let mut t = Table::new(&["kind", "r1", "r2", "dy1", "dz1", "dy2", "dz2"]);
    for pt in &points {
        let mut row = vec![Cell::Text(pt.kind.as_str().into()), Cell::Num(pt.r1), Cell::Num(pt.r2)];
        row.extend(quad_cells(&pt.achieved));
        t.push(row);
    }
    out.table("bounds", &t);
    out.json("witness.json", &points);
    Ok(Run {
        name: "bounds-noncausal",
        seed: cfg.seed,
        config: serde_json::json!({
            "mode": a.mode, "target": target, "search": cfg, "sizes": sizes, "sr_case": case,
        }),
        summary: format!("{} points\n", points.len()),
    })
}

/// One stage's capacity in `capacity_detail.json`.
#[derive(Serialize, serde::Deserialize)]
struct StageCapacity {
    stage: String,
    rho: f64,
    result: CapacityResult,
}

#[derive(Serialize, serde::Deserialize)]
struct CapacityDetail {
    mode: String,
    stages: Vec<StageCapacity>,
    /// Present when both stages were given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacities: Option<Capacities>,
}

fn stage_capacity(ch: &StateChannel, mode: CapacityMode, cfg: &ChannelConfig) -> Result<CapacityResult> {
    Ok(match mode {
        CapacityMode::Causal => capacity(ch, StateKnowledge::Causal, cfg)?,
        CapacityMode::Noncausal => capacity(ch, StateKnowledge::Noncausal, cfg)?,
        CapacityMode::Dmc => dmc_capacity(&ch.averaged(), cfg.tol, cfg.max_iter)?,
    })
}

fn mode_name(m: CapacityMode) -> String {
    serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn compute_capacities(p: &ProblemFile, mode: CapacityMode, cfg: &ChannelConfig) -> Result<CapacityDetail> {
    let ch = p
        .channels
        .as_ref()
        .ok_or_else(|| anyhow!("problem file has no `channels`"))?;
    let mut stages = Vec::new();
    let s1 = ch.stage1()?;
    stages.push(StageCapacity {
        stage: "stage1".into(),
        rho: s1.rho(),
        result: stage_capacity(&s1, mode, cfg)?,
    });
    if let Some(s2) = ch.stage2()? {
        stages.push(StageCapacity {
            stage: "stage2".into(),
            rho: s2.rho(),
            result: stage_capacity(&s2, mode, cfg)?,
        });
    }
    let capacities = (stages.len() == 2).then(|| Capacities {
        c1: stages[0].result.capacity,
        c2: stages[1].result.capacity,
        rho1: stages[0].rho,
        rho2: stages[1].rho,
    });
    Ok(CapacityDetail {
        mode: mode_name(mode),
        stages,
        capacities,
    })
}

fn channel_config(p: &ProblemFile, seed: Option<u64>) -> ChannelConfig {
    let mut c = p.channel_config.clone().unwrap_or_default();
    if let Some(s) = seed {
        c.seed = s;
    }
    c
}

fn capacity_cmd(a: &CapacityArgs, seed: Option<u64>, inputs: &mut Inputs, out: &mut Outputs) -> Result<Run> {
    let p = load_problem(&a.problem, inputs)?;
    let cfg = channel_config(&p, seed);
    let detail = compute_capacities(&p, a.mode, &cfg)?;
    let mut t = Table::new(&["stage", "rho", "capacity", "upper_bound", "residual", "certified", "iterations"]);
    let mut summary = String::new();
    for s in &detail.stages {
        let r = &s.result;
        t.push(vec![
            Cell::Text(s.stage.clone()),
            Cell::Num(s.rho),
            Cell::Num(r.capacity),
            Cell::Num(r.upper_bound),
            Cell::Num(r.residual),
            Cell::Text(r.certified.to_string()),
            Cell::Int(r.iterations as u64),
        ]);
        summary.push_str(&format!("{}: capacity {}\n", s.stage, sirefine::text::sig9(r.capacity)));
    }
    out.table("capacity", &t);
    out.json("capacity_detail.json", &detail);
    Ok(Run {
        name: "capacity",
        seed: cfg.seed,
        config: serde_json::json!({ "mode": a.mode, "channel_config": cfg }),
        summary,
    })
}

fn separation(a: &SeparationArgs, seed: Option<u64>, inputs: &mut Inputs, out: &mut Outputs) -> Result<Run> {
    let p = load_problem(&a.problem, inputs)?;
    let source = p.source()?;
    let target = target_of(&p, &a.search)?;
    let cfg = search_config(&p, &a.search, seed);
    let base = if let Some(path) = &a.capacities {
        let d: CapacityDetail = inputs.json(path)?;
        Some(d.capacities.ok_or_else(|| anyhow!("{} holds a single stage", path.display()))?)
    } else if let Some(c) = p.capacities {
        Some(c)
    } else if p.channels.is_some() && [a.c1, a.c2].contains(&None) {
        let d = compute_capacities(&p, a.mode, &channel_config(&p, seed))?;
        Some(d.capacities.ok_or_else(|| anyhow!("separation needs both stage channels"))?)
    } else {
        None
    };
    let pick = |flag: Option<f64>, from: Option<f64>, name: &str| {
        flag.or(from).ok_or_else(|| anyhow!("missing `{name}`: pass --{name}, --capacities, or set it in the problem"))
    };
    let caps = Capacities {
        c1: pick(a.c1, base.map(|b| b.c1), "c1")?,
        c2: pick(a.c2, base.map(|b| b.c2), "c2")?,
        rho1: pick(a.rho1, base.map(|b| b.rho1).or(Some(1.0)), "rho1")?,
        rho2: pick(a.rho2, base.map(|b| b.rho2).or(Some(1.0)), "rho2")?,
    };
    let r = separation_check(source, &target, caps.rho1, caps.rho2, caps.c1, caps.c2, &cfg)?;
    let mut t = Table::new(&["achievable", "budget1", "budget2", "r1", "delta_r", "dy1", "dz1", "dy2", "dz2"]);
    let shown = r.witness.as_ref().unwrap_or(&r.closest);
    let mut row = vec![
        Cell::Text(if r.achievable { "yes" } else { "no" }.into()),
        Cell::Num(r.budgets[0]),
        Cell::Num(r.budgets[1]),
        Cell::Num(shown.r1),
        Cell::Num(shown.delta_r),
    ];
    row.extend(quad_cells(&shown.achieved));
    t.push(row);
    out.table("separation", &t);
    out.json("separation_detail.json", &r);
    let mut summary = format!("achievable: {}\n", if r.achievable { "yes" } else { "no" });
    if let Some(w) = &r.witness {
        summary.push_str(&format!(
            "witness: r1 = {}, delta_r = {}\n{}",
            sirefine::text::sig9(w.r1),
            sirefine::text::sig9(w.delta_r),
            crate::output::pretty(&w.aux)
        ));
    }
    Ok(Run {
        name: "separation",
        seed: cfg.seed,
        config: serde_json::json!({ "target": target, "capacities": caps, "search": cfg }),
        summary,
    })
}

enum SimInput {
    Causal(CausalAuxChannel, CausalDecoderRuleSet),
    Noncausal(NcAuxChannel, NcDecoderRuleSet),
}

fn sim_input(a: &SimulateArgs, p: &ProblemFile, inputs: &mut Inputs) -> Result<SimInput> {
    let source = p.source()?;
    if let Some(path) = &a.from_region_witness {
        let text = inputs.read(path)?;
        let bad = |e: serde_json::Error| anyhow!("{} is not a {:?} witness file: {e}", path.display(), a.scheme);
        return match a.scheme {
            Scheme::Causal => {
                let mut pts: Vec<CausalRegionPoint> = serde_json::from_str(&text).map_err(bad)?;
                if a.point >= pts.len() {
                    bail!("witness file has {} points, --point is {}", pts.len(), a.point);
                }
                let pt = pts.swap_remove(a.point);
                Ok(SimInput::Causal(pt.aux, pt.decoders))
            }
            Scheme::Noncausal => {
                let mut pts: Vec<NcRegionPoint> = serde_json::from_str(&text).map_err(bad)?;
                if a.point >= pts.len() {
                    bail!("witness file has {} points, --point is {}", pts.len(), a.point);
                }
                let pt = pts.swap_remove(a.point);
                Ok(SimInput::Noncausal(pt.aux, pt.decoders))
            }
        };
    }
    let value = match &a.aux {
        Some(path) => inputs.json::<serde_json::Value>(path)?,
        None => p
            .aux
            .clone()
            .ok_or_else(|| anyhow!("no auxiliary channel: pass --aux, --from-region-witness, or set `aux`"))?,
    };
    match a.scheme {
        Scheme::Causal => {
            let aux: CausalAuxChannel = serde_json::from_value(value).context("invalid causal auxiliary channel")?;
            let dec = optimal_decoders(source, &aux)?;
            Ok(SimInput::Causal(aux, dec))
        }
        Scheme::Noncausal => {
            let aux: NcAuxChannel = serde_json::from_value(value).context("invalid non-causal auxiliary channel")?;
            let dec = nc_optimal_decoders(source, &aux)?;
            Ok(SimInput::Noncausal(aux, dec))
        }
    }
}

fn simulate(a: &SimulateArgs, seed: Option<u64>, inputs: &mut Inputs, out: &mut Outputs) -> Result<Run> {
    let p = load_problem(&a.problem, inputs)?;
    let source = p.source()?;
    let mut cfg = p.sim.clone().unwrap_or_default();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.margin {
        cfg.rate_margin = v;
    }
    if a.delta.is_some() {
        cfg.delta = a.delta;
    }
    if let Some(v) = a.cap {
        cfg.codeword_cap = v;
    }
    if let Some(v) = a.storage {
        cfg.storage = v.into();
    }
    let input = sim_input(a, &p, inputs)?;
    let result = match &input {
        SimInput::Causal(aux, dec) => simulate_causal(source, aux, dec, &cfg),
        SimInput::Noncausal(aux, dec) => simulate_nc(source, aux, dec, &cfg),
    };
    let rep: SimReport = match result {
        Err(Error::CapExceeded(sizes)) => {
            eprintln!("codebook sizes (n = {}):", sizes.n);
            eprintln!("  {:<6} {:>12} {:>24} {:>24} {:>24}", "book", "log2 size", "codewords", "bins", "books");
            for e in &sizes.entries {
                eprintln!("  {:<6} {:>12.3} {:>24} {:>24} {:>24}", e.name, e.log2_size, e.size, e.bins, e.books);
            }
            return Err(Error::CapExceeded(sizes).into());
        }
        r => r?,
    };
    let mut t = Table::new(&["trial", "event", "indices", "d_y1", "d_z1", "d_y2", "d_z2", "decode_failures"]);
    for tr in &rep.trials_detail {
        let idx = tr.indices.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        let mut row = vec![
            Cell::Int(tr.trial),
            Cell::Text(tr.event.clone().unwrap_or_default()),
            Cell::Text(idx),
        ];
        match tr.distortions {
            Some(d) => row.extend(d.iter().map(|&v| Cell::Num(v))),
            None => row.extend((0..4).map(|_| Cell::Text(String::new()))),
        }
        row.push(Cell::Text(tr.decode_failures.join(" ")));
        t.push(row);
    }
    out.table("trials", &t);
    out.json("report.json", &rep);
    let failures: u64 = rep.encoder_errors();
    let summary = format!(
        "{} trials, {} ok, {} encoder errors, {} wrong decodings\n",
        cfg.trials,
        rep.trials_ok,
        failures,
        rep.wrong_unique()
    );
    Ok(Run {
        name: "simulate",
        seed: cfg.seed,
        config: serde_json::json!({ "scheme": a.scheme, "point": a.point, "sim": cfg }),
        summary,
    })
}
