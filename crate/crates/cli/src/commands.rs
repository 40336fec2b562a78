use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqsmooth_core::experiments::{game_table, generalization_rate, region_check, RateReport};
use eqsmooth_core::game::{resolve_attack, simulate, AttackSpec, DefenseSpec};
use eqsmooth_core::oracle::oracle_solve;
use eqsmooth_core::solve::solve;
use eqsmooth_core::synthetic::sample_dataset;
use eqsmooth_core::{Budget, Dataset, GaussianSpec, SolveConfig, SyntheticModel};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::format::{
    create, read_attacks, read_dataset, read_defense, write_attacks, write_dataset,
    write_json_line, DefenseFile,
};

#[derive(Debug, Parser)]
#[command(
    name = "eqsmooth",
    version,
    about = "Attack/defense equilibrium toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a linearised dataset from a synthetic classifier.
    Synth(SynthArgs),
    /// Fit the defense vector maximising robust coverage.
    Solve(SolveArgs),
    /// Play attacks against defenses; CSV report.
    Simulate(SimulateArgs),
    /// Exact maximiser by subset enumeration (small n only).
    Oracle(OracleArgs),
    /// Write per-point attack vectors in the attack JSONL format.
    Attacks(AttacksArgs),
    /// Generalization gap of the fitted defense against sample size.
    Genrate(GenrateArgs),
    /// Region counts of random 2D line arrangements.
    Regions(RegionsArgs),
    /// Attack/defense accuracy table on a fresh train/test split.
    Table(TableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Linear,
    Fan,
}

/// Synthetic model and input distribution. Both kinds use standard
/// Gaussian inputs shifted by `shift` along `(1,…,1)/√m`; the linear model
/// has `w = (1,…,1)/√m`, `b0 = 0`; the fan model is the roof
/// `x₂ − slope·|x₁|`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "linear")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 1.0)]
    pub slope: f64,
    #[arg(long, default_value_t = 0.0)]
    pub shift: f64,
}

impl ModelArgs {
    pub fn build(&self, dim: usize) -> CliResult<(SyntheticModel, GaussianSpec)> {
        if dim == 0 {
            return Err(CliError::Usage("--dim must be at least 1".into()));
        }
        let unit = vec![1.0 / (dim as f64).sqrt(); dim];
        let model = match self.model {
            ModelKind::Linear => SyntheticModel::linear(unit.clone(), 0.0)?,
            ModelKind::Fan => SyntheticModel::roof(dim, self.slope)?,
        };
        let mean = unit.iter().map(|u| u * self.shift).collect();
        Ok((model, GaussianSpec::new(mean, vec![1.0; dim])?))
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset JSONL.
    #[arg(long)]
    pub data: PathBuf,
    /// Re-derive robust sets under this ε instead of the header's.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Step size; defaults to ε/10.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub surrogate_scale: f64,
    /// Skip the greedy augmentation pass.
    #[arg(long)]
    pub no_polish: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackKind {
    None,
    Fgm,
    Pgd,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DefenseKind {
    None,
    Smooth,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "none,fgm")]
    pub attacks: Vec<AttackKind>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "none")]
    pub defenses: Vec<DefenseKind>,
    /// Defense JSON written by `solve`; required by the `smooth` defense.
    #[arg(long)]
    pub defense_file: Option<PathBuf>,
    /// Attack-vector JSONL; required by the `file` attack.
    #[arg(long)]
    pub attack_file: Option<PathBuf>,
    #[arg(long, default_value_t = eqsmooth_core::game::DEFAULT_PGD_ITERS)]
    pub pgd_iters: usize,
    /// Model behind the dataset; needed for PGD and true accuracy.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, default_value_t = 1.0)]
    pub slope: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = eqsmooth_core::oracle::DEFAULT_MAX_N)]
    pub max_n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttacksArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "fgm")]
    pub attack: AttackKind,
    #[arg(long, default_value_t = eqsmooth_core::game::DEFAULT_PGD_ITERS)]
    pub pgd_iters: usize,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, default_value_t = 1.0)]
    pub slope: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenrateArgs {
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    /// Mean of the inputs along w, in standard deviations of the score.
    #[arg(long, default_value_t = 0.5)]
    pub shift: f64,
    #[arg(long, value_delimiter = ',', default_value = "30,100,300,1000,3000")]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also draw the log-log gap curve here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegionsArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const GAME_CSV_HEADER: &str = "attack,defense,approx_acc,true_acc,mean_utility";
pub const RATE_CSV_HEADER: &str = "n,mean_gap,std_gap";
pub const REGIONS_CSV_HEADER: &str = "n,regions,formula,match";

/// Runs one command. Warnings go to `err`; results go to `--out` or `out`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => synth(a, out),
        Command::Solve(a) => solve_cmd(a, out, err),
        Command::Simulate(a) => simulate_cmd(a, out, err),
        Command::Oracle(a) => oracle_cmd(a, out, err),
        Command::Attacks(a) => attacks_cmd(a, out, err),
        Command::Genrate(a) => genrate(a, out, err),
        Command::Regions(a) => regions(a, out),
        Command::Table(a) => table(a, out),
    }
}

fn emit(path: Option<&Path>, out: &mut dyn Write, body: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut f = create(p)?;
            f.write_all(body).map_err(|e| CliError::io(p, e))?;
            f.flush().map_err(|e| CliError::io(p, e))
        }
        None => out
            .write_all(body)
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn json_body<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_json_line(&mut buf, value)?;
    Ok(buf)
}

fn load(args: &DataArgs, err: &mut dyn Write) -> CliResult<Dataset> {
    let ds = read_dataset(&args.data)?;
    match args.epsilon {
        Some(eps) if eps != ds.budget().epsilon() => {
            let _ = writeln!(
                err,
                "WARNING: overriding dataset epsilon {} with {eps}; every robust set is re-derived",
                ds.budget().epsilon()
            );
            Ok(ds.with_epsilon(eps)?)
        }
        _ => Ok(ds),
    }
}

fn model_for(kind: Option<ModelKind>, slope: f64, dim: usize) -> CliResult<Option<SyntheticModel>> {
    kind.map(|model| {
        let args = ModelArgs {
            model,
            slope,
            shift: 0.0,
        };
        args.build(dim).map(|(m, _)| m)
    })
    .transpose()
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let budget = Budget::new(a.epsilon, a.dim)?;
    let (model, dist) = a.model.build(a.dim)?;
    let ds = sample_dataset(&model, &dist, a.n, &budget, a.seed)?;
    let mut buf = Vec::new();
    write_dataset(&mut buf, &ds)?;
    emit(a.out.as_deref(), out, &buf)
}

fn solve_cmd(a: SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let ds = load(&a.data, err)?;
    let mut cfg = SolveConfig::for_budget(ds.budget()).with_seed(a.seed);
    cfg.restarts = a.restarts;
    cfg.iterations = a.iters;
    if let Some(step) = a.step {
        cfg.step_size = step;
    }
    cfg.surrogate_scale = a.surrogate_scale;
    cfg.polish = !a.no_polish;
    let res = solve(&ds, &cfg)?;
    let file = DefenseFile {
        v: res.v_star,
        phi_n: res.phi_value,
        satisfied: res.satisfied_indices,
        n: ds.len(),
    };
    emit(a.out.as_deref(), out, &json_body(&file)?)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn simulate_cmd(a: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let ds = load(&a.data, err)?;
    let model = model_for(a.model, a.slope, ds.dim())?;

    let mut defenses = Vec::new();
    for kind in &a.defenses {
        match kind {
            DefenseKind::None => defenses.push(("none", DefenseSpec::None)),
            DefenseKind::Smooth => {
                let path = a.defense_file.as_ref().ok_or_else(|| {
                    CliError::Usage("the smooth defense needs --defense-file".into())
                })?;
                let def = read_defense(path)?;
                if def.v.len() != ds.dim() {
                    return Err(CliError::Usage(format!(
                        "defense vector has dimension {}, dataset has {}",
                        def.v.len(),
                        ds.dim()
                    )));
                }
                defenses.push(("smooth", DefenseSpec::Fixed(def.v)));
            }
        }
    }

    let mut attacks = Vec::new();
    for kind in &a.attacks {
        attacks.push(match kind {
            AttackKind::None => AttackSpec::None,
            AttackKind::Fgm => AttackSpec::Fgm,
            AttackKind::Pgd => AttackSpec::Pgd { iters: a.pgd_iters },
            AttackKind::File => {
                let path = a
                    .attack_file
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("the file attack needs --attack-file".into()))?;
                AttackSpec::PerPoint(read_attacks(path, &ds)?)
            }
        });
    }

    let mut body = String::from(GAME_CSV_HEADER);
    body.push('\n');
    for attack in &attacks {
        for (name, defense) in &defenses {
            let rep = simulate(&ds, attack, defense, model.as_ref())?;
            body.push_str(&format!(
                "{},{},{},{},{}\n",
                attack.name(),
                name,
                rep.approximate_accuracy,
                fmt_opt(rep.true_accuracy),
                rep.mean_attacker_utility
            ));
        }
    }
    emit(a.out.as_deref(), out, body.as_bytes())
}

#[derive(Serialize)]
struct OracleOutput {
    v: Vec<f64>,
    phi_n: f64,
    certificate: Vec<usize>,
    n: usize,
    subsets_checked: usize,
    ties: usize,
}

fn oracle_cmd(a: OracleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let ds = load(&a.data, err)?;
    let res = oracle_solve(&ds, a.max_n)?;
    let body = json_body(&OracleOutput {
        v: res.v_star,
        phi_n: res.phi_value,
        certificate: res.certificate,
        n: ds.len(),
        subsets_checked: res.subsets_checked,
        ties: res.ties,
    })?;
    emit(a.out.as_deref(), out, &body)
}

fn attacks_cmd(a: AttacksArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let ds = load(&a.data, err)?;
    let model = model_for(a.model, a.slope, ds.dim())?;
    let spec = match a.attack {
        AttackKind::None => AttackSpec::None,
        AttackKind::Fgm => AttackSpec::Fgm,
        AttackKind::Pgd => AttackSpec::Pgd { iters: a.pgd_iters },
        AttackKind::File => {
            return Err(CliError::Usage(
                "attacks cannot re-export a file attack".into(),
            ))
        }
    };
    let vectors = ds
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| resolve_attack(r, i, &spec, model.as_ref(), ds.budget()))
        .collect::<eqsmooth_core::Result<Vec<_>>>()?;
    let mut extra = serde_json::Map::new();
    extra.insert("attack".into(), spec.name().into());
    extra.insert("dim".into(), ds.dim().into());
    extra.insert("epsilon".into(), ds.budget().epsilon().into());
    if let AttackSpec::Pgd { iters } = spec {
        extra.insert("iters".into(), iters.into());
    }
    let mut buf = Vec::new();
    write_attacks(&mut buf, &vectors, extra)?;
    emit(a.out.as_deref(), out, &buf)
}

fn genrate(a: GenrateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let budget = Budget::new(a.epsilon, a.dim)?;
    let (model, dist) = ModelArgs {
        model: ModelKind::Linear,
        slope: 1.0,
        shift: a.shift,
    }
    .build(a.dim)?;
    let report = generalization_rate(&model, &dist, &budget, &a.ns, a.trials, a.seed)?;
    let mut body = String::from(RATE_CSV_HEADER);
    body.push('\n');
    for r in &report.rows {
        body.push_str(&format!("{},{},{}\n", r.n, r.mean_gap, r.std_gap));
    }
    match report.slope {
        Some(s) => {
            let _ = writeln!(err, "log-log slope {s}, inversions {}", report.inversions());
        }
        None => {
            let _ = writeln!(
                err,
                "slope undefined: fewer than two mean gaps above the floor"
            );
        }
    }
    emit(a.out.as_deref(), out, body.as_bytes())?;
    if let Some(path) = &a.svg {
        emit(Some(path), out, gap_svg(&report).as_bytes())?;
    }
    Ok(())
}

/// Log-log polyline of mean gap against n.
pub fn gap_svg(report: &RateReport) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.mean_gap > 0.0)
        .map(|r| ((r.n as f64).log10(), r.mean_gap.log10()))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <text x=\"{tx}\" y=\"{ty}\" font-size=\"12\">log10 n</text>\n\
         <text x=\"4\" y=\"{PAD}\" font-size=\"12\">log10 gap</text>\n",
        y0 = H - PAD,
        x1 = W - PAD,
        tx = W / 2.0,
        ty = H - 8.0,
    );
    if pts.len() >= 2 {
        let (xmin, xmax) = bounds(pts.iter().map(|p| p.0));
        let (ymin, ymax) = bounds(pts.iter().map(|p| p.1));
        let sx = |x: f64| PAD + (x - xmin) / (xmax - xmin) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - ymin) / (ymax - ymin) * (H - 2.0 * PAD);
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
            coords.join(" ")
        ));
        for &(x, y) in &pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n",
                sx(x),
                sy(y)
            ));
        }
    }
    if let Some(s) = report.slope {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">slope {s:.3}</text>\n",
            W - 140.0,
            PAD
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn regions(a: RegionsArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut body = String::from(REGIONS_CSV_HEADER);
    body.push('\n');
    for &n in &a.n {
        let r = region_check(n, a.seed)?;
        body.push_str(&format!(
            "{},{},{},{}\n",
            r.n, r.regions, r.formula, r.matches
        ));
    }
    emit(a.out.as_deref(), out, body.as_bytes())
}

fn table(a: TableArgs, out: &mut dyn Write) -> CliResult<()> {
    let budget = Budget::new(a.epsilon, a.dim)?;
    let (model, dist) = a.model.build(a.dim)?;
    let t = game_table(&model, &dist, a.n, &budget, a.seed)?;
    let mut body = String::from(GAME_CSV_HEADER);
    body.push('\n');
    for r in &t.rows {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            r.attack,
            r.defense,
            r.approximate_accuracy,
            fmt_opt(r.true_accuracy),
            r.mean_utility
        ));
    }
    emit(a.out.as_deref(), out, body.as_bytes())
}
