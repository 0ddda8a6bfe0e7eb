//! Command-line front end: rate tables, partitions, adaptive approximation,
//! h-set construction, tree operator norms and the empirical verifiers.
//!
//! Exit codes: 0 on success, 2 on parameter/validation errors (with a JSON
//! object on stderr), 3 on I/O failures. All stochastic paths run off the
//! `--seed` flag, so identical invocations produce byte-identical outputs.

mod fieldspec;
mod svg;
mod util;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cuspidal_core::approx::{adaptive_approximate, ApproxOptions};
use cuspidal_core::domain::DomainSpec;
use cuspidal_core::empirics::{fit_rate, interval_widths, norm_scaling, svd_widths_tree};
use cuspidal_core::hset::{HSet, HSetKind};
use cuspidal_core::partition::{
    build_hset_tree, build_tree, partition_audit, probe_tree, BuildLimits, PartitionTree,
    ProbeParams, ProbeReport, Role, TreeVariant,
};
use cuspidal_core::poly::LqExponent;
use cuspidal_core::rates::{
    entropy_exponents, hset_exponents, tau_factor, width_exponents, HsetVariant, ParamSet,
    RatePrediction, SlowVariation, TauKind, WidthKind,
};
use cuspidal_core::treeop::{Certainty, NormMethod, WeightedTree};

use fieldspec::FieldSpec;
use util::{
    csv_columns, f17, fmt_ext, fmt_rat, io_err, parse_ext, parse_rat, read_file, resolve_out,
    validation, write_file, AppResult, Csv,
};

#[derive(Parser)]
#[command(
    name = "cuspidal",
    version,
    about = "Tree partitions, local polynomial approximation and width/entropy rate tables for cusp domains"
)]
struct Cli {
    /// Seed for every stochastic sampling path.
    #[arg(long, global = true, default_value_t = 1729)]
    seed: u64,
    /// Worker threads for the Monte-Carlo probe; other paths are sequential.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate decay exponents and regime selectors in exact rational arithmetic.
    Rates(RatesArgs),
    /// Build or probe the cell partition of a domain and audit its invariants.
    Partition(PartitionArgs),
    /// Budgeted adaptive piecewise-polynomial approximation of a test field.
    Approx(ApproxArgs),
    /// Fractal h-set construction.
    Hset {
        #[command(subcommand)]
        cmd: HsetCmd,
    },
    /// Weighted summation operators on rooted trees.
    Treeop {
        #[command(subcommand)]
        cmd: TreeopCmd,
    },
    /// Empirical verification drivers.
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WidthArg {
    Entropy,
    Kolmogorov,
    Linear,
    Gelfand,
}

impl From<WidthArg> for WidthKind {
    fn from(w: WidthArg) -> WidthKind {
        match w {
            WidthArg::Entropy => WidthKind::Entropy,
            WidthArg::Kolmogorov => WidthKind::Kolmogorov,
            WidthArg::Linear => WidthKind::Linear,
            WidthArg::Gelfand => WidthKind::Gelfand,
        }
    }
}

#[derive(Args)]
struct RatesArgs {
    /// Source exponent p (integer, fraction a/b, or inf).
    #[arg(long)]
    p: String,
    /// Target exponent q.
    #[arg(long)]
    q: String,
    /// Smoothness order.
    #[arg(long)]
    r: u32,
    /// Ambient dimension.
    #[arg(long)]
    d: u32,
    /// Cusp order (rational).
    #[arg(long)]
    sigma: String,
    /// Singular-set dimension; switches to the h-set estimates.
    #[arg(long)]
    theta: Option<String>,
    /// Use the coordinate-slab refinement instead of the generic h-set one.
    #[arg(long, default_value_t = false)]
    plane: bool,
    #[arg(long, value_enum)]
    width: WidthArg,
    /// Slow-variation factor: `const` or `logpow:<beta>`.
    #[arg(long, default_value = "const")]
    lambda: String,
    /// Also evaluate the slowly-varying correction at this n.
    #[arg(long)]
    n: Option<u64>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    Hset,
}

#[derive(Args)]
struct PartitionArgs {
    /// Domain description (JSON).
    #[arg(long)]
    domain: PathBuf,
    /// Depth of the tree.
    #[arg(long)]
    levels: u32,
    #[arg(long, value_enum, default_value = "full")]
    variant: VariantArg,
    /// Cell table (CSV); required unless --probe is given.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip materialization: sampled point-location checks instead.
    #[arg(long, default_value_t = false)]
    probe: bool,
    /// Monte-Carlo samples for the probe.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Materialization guard.
    #[arg(long, default_value_t = 2_000_000)]
    max_cells: u128,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long)]
    domain: PathBuf,
    /// Field name (const:<v>, coord:<axis>, monomial:<p,..>, cusp:linear,
    /// cusp:layer:<order>, tip:<b>:<order>) or @file.json.
    #[arg(long)]
    function: String,
    #[arg(long)]
    budget: usize,
    #[arg(long)]
    r: usize,
    /// Exponent of the smoothness class the field is normalized in (report only).
    #[arg(long, default_value = "2")]
    p: String,
    /// Error norm exponent (number or inf).
    #[arg(long, default_value = "2")]
    q: String,
    #[arg(long)]
    out: PathBuf,
    /// Optional log-log plot of the error history.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HsetCmd {
    /// Build a fractal set description and optionally dump its cells.
    Build {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        depth: u32,
        #[arg(long, value_enum)]
        kind: HsetKindArg,
        #[arg(long)]
        out: PathBuf,
        /// Also dump construction cells (level, centers, halfwidth, mass).
        #[arg(long)]
        cells_csv: Option<PathBuf>,
        /// Refuse dumps above this many cells.
        #[arg(long, default_value_t = 1_000_000)]
        max_dump: u128,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HsetKindArg {
    Cantor,
    Plane,
}

#[derive(Subcommand)]
enum TreeopCmd {
    /// Operator norm of the weighted summation map on a rooted tree.
    Norm {
        /// JSON: {"parents": [-1,0,..], "g": [..], "v": [..]}.
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long, value_enum)]
        method: MethodArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Spectral,
    Ascent,
    Exhaustive,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Norm scaling of the spike family across construction levels.
    Bumps {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        kmax: u32,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// SVD widths of a p = q = 2 discretization.
    Widths {
        /// Domain JSON for the tree-based discretization.
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        levels: u32,
        #[arg(long, default_value_t = 1)]
        r: usize,
        /// Quadrature order per axis.
        #[arg(long, default_value_t = 3)]
        grid: usize,
        #[arg(long, default_value_t = 64)]
        nmax: usize,
        /// Classical 1-D anchor with this many elements instead of a domain.
        #[arg(long)]
        interval: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Least-squares log-log slope of a CSV table.
    Slope {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "n")]
        xcol: String,
        #[arg(long, default_value = "e")]
        ycol: String,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit(); // help/version go to stdout with exit 0
            }
            eprintln!("{}", json!({"error": e.to_string(), "kind": "usage"}));
            std::process::exit(2);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{}", json!({"error": e.message(), "kind": e.kind()}));
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> AppResult<()> {
    if cli.threads == 0 {
        return Err(validation("--threads must be at least 1"));
    }
    match cli.cmd {
        Cmd::Rates(args) => cmd_rates(&cli.out_dir, args),
        Cmd::Partition(args) => cmd_partition(&cli.out_dir, cli.seed, cli.threads, args),
        Cmd::Approx(args) => cmd_approx(&cli.out_dir, args),
        Cmd::Hset { cmd } => cmd_hset(&cli.out_dir, cmd),
        Cmd::Treeop { cmd } => cmd_treeop(cmd),
        Cmd::Verify { cmd } => cmd_verify(&cli.out_dir, cmd),
    }
}

fn parse_lambda(s: &str) -> AppResult<SlowVariation> {
    if s == "const" {
        return Ok(SlowVariation::Constant);
    }
    if let Some(beta) = s.strip_prefix("logpow:") {
        return Ok(SlowVariation::LogPower {
            beta: beta
                .parse()
                .map_err(|_| validation("bad beta in logpow:<beta>"))?,
        });
    }
    Err(validation("--lambda must be `const` or `logpow:<beta>`"))
}

fn prediction_json(pred: &RatePrediction) -> serde_json::Value {
    json!({
        "alpha1": fmt_rat(pred.alpha1),
        "alpha2": fmt_rat(pred.alpha2),
        "thetas": pred.thetas.map(|t| t.iter().map(|x| fmt_rat(*x)).collect::<Vec<_>>()),
        "j_star": pred.j_star,
        "exponent": fmt_rat(pred.exponent),
        "tau": match pred.tau {
            TauKind::Tau1 => "tau1",
            TauKind::Tau2 => "tau2",
            TauKind::Tau2HatQ => "tau2_hatq",
        },
        "q_hat": pred.q_hat.map(fmt_ext),
    })
}

fn cmd_rates(out_dir: &Option<PathBuf>, args: RatesArgs) -> AppResult<()> {
    let ps = ParamSet {
        p: parse_ext(&args.p)?,
        q: parse_ext(&args.q)?,
        r: args.r,
        d: args.d,
        sigma: parse_rat(&args.sigma)?,
        theta: args.theta.as_deref().map(parse_rat).transpose()?,
        width: args.width.into(),
        lambda: parse_lambda(&args.lambda)?,
    };
    let mut body;
    let pred;
    if ps.theta.is_some() {
        let variant = if args.plane {
            HsetVariant::Plane
        } else {
            HsetVariant::General
        };
        let hp = hset_exponents(&ps, variant).map_err(validation)?;
        body = prediction_json(&hp.hset);
        body["replaced"] = json!(fmt_rat(hp.replaced));
        body["generic_exponent"] = json!(fmt_rat(hp.generic.exponent));
        pred = hp.hset;
    } else if ps.width == WidthKind::Entropy {
        let p = entropy_exponents(&ps).map_err(validation)?;
        body = prediction_json(&p);
        pred = p;
    } else {
        let p = width_exponents(&ps).map_err(validation)?;
        body = prediction_json(&p);
        pred = p;
    }
    body["feasible"] = json!(true);
    if let Some(n) = args.n {
        let tau = tau_factor(&ps, n, pred.tau).map_err(validation)?;
        body["n"] = json!(n);
        body["tau_value"] = json!(tau);
    }
    let text = serde_json::to_string_pretty(&body).map_err(io_err)?;
    match &args.out {
        Some(path) => write_file(&resolve_out(out_dir, path), &text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load_domain(path: &PathBuf) -> AppResult<DomainSpec> {
    let text = read_file(path)?;
    let mut dom: DomainSpec = serde_json::from_str(&text).map_err(validation)?;
    dom.normalize().map_err(validation)?;
    Ok(dom)
}

fn merge_probes(mut reports: Vec<ProbeReport>) -> ProbeReport {
    let mut acc = reports.remove(0);
    for r in reports {
        acc.samples += r.samples;
        acc.in_omega += r.in_omega;
        acc.covered += r.covered;
        acc.fringe += r.fringe;
        acc.height_x2k_min = acc.height_x2k_min.min(r.height_x2k_min);
        acc.height_x2k_max = acc.height_x2k_max.max(r.height_x2k_max);
        acc.tiling_checked += r.tiling_checked;
        acc.tiling_exact &= r.tiling_exact;
        acc.chaining_exact &= r.chaining_exact;
        acc.c_plus_tol = acc.c_plus_tol.max(r.c_plus_tol);
        for (k, lo, hi) in r.level_heights {
            match acc.level_heights.iter_mut().find(|(ak, _, _)| *ak == k) {
                Some(slot) => {
                    slot.1 = slot.1.min(lo);
                    slot.2 = slot.2.max(hi);
                }
                None => acc.level_heights.push((k, lo, hi)),
            }
        }
    }
    acc.level_heights.sort_unstable_by_key(|(k, _, _)| *k);
    let n = acc.samples as f64;
    acc.mc_omega_volume = acc.box_volume * acc.in_omega as f64 / n;
    acc.mc_covered_volume = acc.box_volume * acc.covered as f64 / n;
    let frac = acc.fringe as f64 / n;
    acc.fringe_stderr = acc.box_volume * (frac * (1.0 - frac) / n).sqrt();
    acc
}

fn probe_json(rep: &ProbeReport) -> serde_json::Value {
    json!({
        "samples": rep.samples,
        "in_omega": rep.in_omega,
        "covered": rep.covered,
        "fringe": rep.fringe,
        "box_volume": rep.box_volume,
        "mc_omega_volume": rep.mc_omega_volume,
        "mc_covered_volume": rep.mc_covered_volume,
        "fringe_stderr": rep.fringe_stderr,
        "level_heights_x2k": rep.level_heights.iter()
            .map(|(k, lo, hi)| json!({"level": k, "min": lo, "max": hi})).collect::<Vec<_>>(),
        "chaining_exact": rep.chaining_exact,
        "tiling_checked": rep.tiling_checked,
        "tiling_exact": rep.tiling_exact,
        "covering_defect_bound": rep.covering_defect_bound,
        "c_plus_tol": rep.c_plus_tol,
    })
}

fn cmd_partition(
    out_dir: &Option<PathBuf>,
    seed: u64,
    threads: usize,
    args: PartitionArgs,
) -> AppResult<()> {
    let dom = load_domain(&args.domain)?;
    let variant = match args.variant {
        VariantArg::Full => TreeVariant::Full,
        VariantArg::Hset => TreeVariant::HsetPruned,
    };
    if args.probe {
        let reports: Vec<ProbeReport> = if threads <= 1 {
            vec![probe_tree(
                &dom,
                variant,
                args.levels,
                &ProbeParams {
                    samples: args.samples,
                    seed,
                    tile_checks: 1000,
                },
            )
            .map_err(validation)?]
        } else {
            let chunk = args.samples / threads as u64;
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..threads)
                    .map(|i| {
                        let dom = &dom;
                        let samples = if i + 1 == threads {
                            args.samples - chunk * (threads as u64 - 1)
                        } else {
                            chunk
                        };
                        scope.spawn(move || {
                            probe_tree(
                                dom,
                                variant,
                                args.levels,
                                &ProbeParams {
                                    samples,
                                    seed: seed
                                        .wrapping_add(i as u64)
                                        .wrapping_mul(0x9E3779B97F4A7C15),
                                    tile_checks: 1000 / threads as u32 + 1,
                                },
                            )
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("probe thread"))
                    .collect::<Result<_, _>>()
            })
            .map_err(validation)?
        };
        let rep = merge_probes(reports);
        let text = serde_json::to_string_pretty(&probe_json(&rep)).map_err(io_err)?;
        match &args.out {
            Some(path) => write_file(&resolve_out(out_dir, path), &text)?,
            None => println!("{text}"),
        }
        return Ok(());
    }

    let out = args
        .out
        .as_ref()
        .ok_or_else(|| validation("--out is required unless --probe"))?;
    let limits = BuildLimits {
        max_cells: args.max_cells,
    };
    let tree = match variant {
        TreeVariant::Full => build_tree(&dom, args.levels, &limits),
        TreeVariant::HsetPruned => build_hset_tree(&dom, args.levels, &limits),
    }
    .map_err(validation)?;
    write_file(&resolve_out(out_dir, out), &cells_csv(&tree))?;
    let audit = partition_audit(&tree);
    let levels: Vec<_> = audit
        .levels
        .iter()
        .map(|l| {
            json!({
                "level": l.level,
                "cells": l.cells,
                "near": l.near,
                "far": l.far,
                "height_x2k_min": l.height_x2k_min,
                "height_x2k_max": l.height_x2k_max,
                "branching_max": l.branching_max,
                "volume_ratio_min": l.volume_ratio_min,
                "volume_ratio_max": l.volume_ratio_max,
            })
        })
        .collect();
    let text = serde_json::to_string_pretty(&json!({
        "cells": tree.cell_count(),
        "tiling_exact": audit.tiling_exact,
        "chaining_exact": audit.chaining_exact,
        "covered_measure": audit.covered_measure,
        "covering_defect_bound": audit.covering_defect_bound,
        "near_constant": audit.near_constant,
        "levels": levels,
    }))
    .map_err(io_err)?;
    println!("{text}");
    Ok(())
}

fn cells_csv(tree: &PartitionTree) -> String {
    let bd = tree.base_dim();
    let mut header = vec![
        "level".to_string(),
        "index".to_string(),
        "parent_index".to_string(),
        "role".to_string(),
    ];
    for a in 1..=bd {
        header.push(format!("base_lo_{a}"));
    }
    for a in 1..=bd {
        header.push(format!("base_hi_{a}"));
    }
    header.push("c_minus".into());
    header.push("c_plus".into());
    header.push("tail_top".into());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    let off = tree.domain.base_offset;
    for (k, level) in tree.levels.iter().enumerate() {
        for (idx, cell) in level.iter().enumerate() {
            let (lo, hi) = tree.base_box(cell);
            let mut row = vec![
                k.to_string(),
                idx.to_string(),
                if cell.parent == cuspidal_core::partition::NO_PARENT {
                    "-1".to_string()
                } else {
                    cell.parent.to_string()
                },
                match cell.role {
                    Role::Interior => "interior",
                    Role::NearGamma => "near_gamma",
                    Role::FarGamma => "far_gamma",
                }
                .to_string(),
            ];
            for a in 0..bd {
                row.push(f17(lo[a] + off));
            }
            for a in 0..bd {
                row.push(f17(hi[a] + off));
            }
            row.push(f17(cell.c_minus));
            row.push(f17(cell.c_plus));
            row.push(cell.tail_top.map(f17).unwrap_or_default());
            csv.row(&row);
        }
    }
    csv.finish()
}

fn parse_lq(s: &str) -> AppResult<LqExponent> {
    if s.eq_ignore_ascii_case("inf") || s == "oo" {
        return Ok(LqExponent::Inf);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| validation(format!("bad exponent `{s}`")))?;
    if v < 1.0 {
        return Err(validation("exponent must be >= 1"));
    }
    Ok(LqExponent::Fin(v))
}

fn cmd_approx(out_dir: &Option<PathBuf>, args: ApproxArgs) -> AppResult<()> {
    let dom = load_domain(&args.domain)?;
    let spec = FieldSpec::parse(&args.function)?;
    let field = spec.build(&dom)?;
    let p = parse_lq(&args.p)?;
    let q = parse_lq(&args.q)?;
    let (_, report) = adaptive_approximate(
        field.as_ref(),
        &dom,
        args.budget,
        args.r,
        p,
        q,
        &ApproxOptions::default(),
    )
    .map_err(validation)?;
    // snapshot at powers of two plus the final budget
    let mut csv = Csv::new(&["budget", "pieces", "error", "fringe_defect"]);
    let mut pts = Vec::new();
    for &(pieces, err) in &report.history {
        if pieces.is_power_of_two() || pieces == args.budget {
            csv.row(&[
                pieces.to_string(),
                pieces.to_string(),
                f17(err),
                f17(report.fringe_defect),
            ]);
            if err > 0.0 {
                pts.push((pieces as f64, err));
            }
        }
    }
    write_file(&resolve_out(out_dir, &args.out), &csv.finish())?;
    if let Some(svg_path) = &args.svg {
        let plot = svg::loglog_plot(&[("error", &pts)], "approximation error vs pieces");
        write_file(&resolve_out(out_dir, svg_path), &plot)?;
    }
    let slope = if pts.len() >= 4 {
        fit_rate(&pts).ok().map(|f| f.slope)
    } else {
        None
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "pieces": report.pieces,
            "total_error": report.total_error,
            "fringe_defect": report.fringe_defect,
            "fitted_slope": slope,
        }))
        .map_err(io_err)?
    );
    Ok(())
}

fn cmd_hset(out_dir: &Option<PathBuf>, cmd: HsetCmd) -> AppResult<()> {
    match cmd {
        HsetCmd::Build {
            theta,
            dim,
            depth,
            kind,
            out,
            cells_csv,
            max_dump,
        } => {
            let kind = match kind {
                HsetKindArg::Cantor => HSetKind::Cantor,
                HsetKindArg::Plane => HSetKind::Plane,
            };
            let h = HSet::build(theta, dim, depth, kind).map_err(validation)?;
            let text = serde_json::to_string_pretty(&h).map_err(io_err)?;
            write_file(&resolve_out(out_dir, &out), &text)?;
            if let Some(csv_path) = cells_csv {
                if kind != HSetKind::Cantor {
                    return Err(validation("cell dumps only apply to the cantor kind"));
                }
                let mut header = vec!["level".to_string()];
                for a in 1..=h.ambient_dim {
                    header.push(format!("center_{a}"));
                }
                header.push("halfwidth".into());
                header.push("mass".into());
                let refs: Vec<&str> = header.iter().map(String::as_str).collect();
                let mut csv = Csv::new(&refs);
                for level in 0..=depth {
                    let cells = h.level_cells(level, max_dump).map_err(validation)?;
                    for cell in cells {
                        let mut row = vec![level.to_string()];
                        for a in 0..h.ambient_dim {
                            row.push(f17(cell.center[a]));
                        }
                        row.push(f17(h.cell_side(level) / 2.0));
                        row.push(f17(h.cell_mass(level)));
                        csv.row(&row);
                    }
                }
                write_file(&resolve_out(out_dir, &csv_path), &csv.finish())?;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "kind": match kind { HSetKind::Cantor => "cantor", HSetKind::Plane => "plane" },
                    "m": h.m,
                    "lambda": h.lambda,
                    "depth": h.depth,
                    "approx_radius": h.approx_radius(),
                }))
                .map_err(io_err)?
            );
            Ok(())
        }
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    parents: Vec<i64>,
    g: Vec<f64>,
    v: Vec<f64>,
}

fn cmd_treeop(cmd: TreeopCmd) -> AppResult<()> {
    match cmd {
        TreeopCmd::Norm { tree, p, q, method } => {
            let tf: TreeFile = serde_json::from_str(&read_file(&tree)?).map_err(validation)?;
            let wt = WeightedTree::new(&tf.parents, tf.g, tf.v).map_err(validation)?;
            let p = parse_lq(&p)?;
            let q = parse_lq(&q)?;
            let method = match method {
                MethodArg::Spectral => NormMethod::Spectral,
                MethodArg::Ascent => NormMethod::Ascent,
                MethodArg::Exhaustive => NormMethod::Exhaustive,
            };
            let est = wt.operator_norm(p, q, method).map_err(validation)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "value": est.value,
                    "certainty": match est.certainty {
                        Certainty::Exact => "exact",
                        Certainty::LowerBound => "lower_bound",
                    },
                    "sup_gv": wt.g.iter().zip(&wt.v).map(|(a, b)| a * b).fold(0.0f64, f64::max),
                }))
                .map_err(io_err)?
            );
            Ok(())
        }
    }
}

fn cmd_verify(out_dir: &Option<PathBuf>, cmd: VerifyCmd) -> AppResult<()> {
    match cmd {
        VerifyCmd::Bumps {
            theta,
            sigma,
            d,
            kmax,
            p,
            q,
            r,
            out,
        } => {
            let h = HSet::build(theta, d, kmax + 7, HSetKind::Cantor).map_err(validation)?;
            let dom = DomainSpec::hset_cusp(d, sigma, h, -0.5).map_err(validation)?;
            let rep = norm_scaling(&dom, 1..=kmax, p, q, r).map_err(validation)?;
            let mut csv = Csv::new(&[
                "k",
                "count",
                "b_k",
                "grad_lp",
                "val_lq",
                "val_lp",
                "separation",
            ]);
            for row in &rep.rows {
                csv.row(&[
                    row.k.to_string(),
                    row.count.to_string(),
                    f17(row.b_k),
                    f17(row.grad_lp),
                    f17(row.val_lq),
                    f17(row.val_lp),
                    f17(row.separation),
                ]);
            }
            write_file(&resolve_out(out_dir, &out), &csv.finish())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "grad_slope": rep.grad_slope,
                    "grad_slope_predicted": rep.grad_slope_predicted,
                    "val_slope": rep.val_slope,
                    "val_slope_predicted": rep.val_slope_predicted,
                    "packing_slope": rep.packing_slope,
                    "packing_slope_predicted": rep.packing_slope_predicted,
                }))
                .map_err(io_err)?
            );
            Ok(())
        }
        VerifyCmd::Widths {
            domain,
            levels,
            r,
            grid,
            nmax,
            interval,
            out,
            svg: svg_path,
        } => {
            let widths = match (interval, domain) {
                (Some(m), _) => interval_widths(m).map_err(validation)?,
                (None, Some(path)) => {
                    let dom = load_domain(&path)?;
                    let tree =
                        build_tree(&dom, levels, &BuildLimits::default()).map_err(validation)?;
                    svd_widths_tree(&tree, r, grid, nmax).map_err(validation)?
                }
                (None, None) => {
                    return Err(validation("need --domain or --interval"));
                }
            };
            let mut csv = Csv::new(&["n", "value"]);
            let mut pts = Vec::new();
            for w in widths.iter().take(nmax + 1) {
                csv.row(&[w.n.to_string(), f17(w.value)]);
                if w.n > 0 && w.value > 0.0 {
                    pts.push((w.n as f64, w.value));
                }
            }
            write_file(&resolve_out(out_dir, &out), &csv.finish())?;
            if let Some(sp) = svg_path {
                let plot = svg::loglog_plot(&[("width", &pts)], "widths vs n");
                write_file(&resolve_out(out_dir, &sp), &plot)?;
            }
            let slope = if pts.len() >= 4 {
                fit_rate(&pts).ok().map(|f| f.slope)
            } else {
                None
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "count": widths.len(),
                    "fitted_slope": slope,
                }))
                .map_err(io_err)?
            );
            Ok(())
        }
        VerifyCmd::Slope { csv, xcol, ycol } => {
            let pts = csv_columns(&read_file(&csv)?, &xcol, &ycol)?;
            let fit = fit_rate(&pts).map_err(validation)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "slope": fit.slope,
                    "max_residual": fit.max_residual,
                    "points": pts.len(),
                }))
                .map_err(io_err)?
            );
            Ok(())
        }
    }
}
