//! gmtlab: generate dyadic sets and configurations, certify
//! non-concentration, run decompositions, evaluate closed-form bounds, and
//! drive the exponent experiments.
//!
//! Exit codes: 0 on success, 2 on a precondition error, 3 on a verification
//! failure (an output failed its own certification).

use clap::{Parser, Subcommand};
use gmt_core::bounds::{
    furstenberg_conjecture, furstenberg_general, lp_min_polygon_k, lp_min_polygon_l,
    minimal_nonconcentration_exponent, projection_exceptional, sumproduct_exponent,
    ProjectionRegime, SumProductVariant,
};
use gmt_core::branching::{branching_function, check_uniform, exhaustive_uniformize, uniformize};
use gmt_core::constructions::{cantor_set, sharpness_config, CantorSpec, SharpnessSpec};
use gmt_core::dyadic::{DyadicSet, Scale};
use gmt_core::error::GmtError;
use gmt_core::exact::{rat_from_str, rat_to_f64, rat_to_string, Rat};
use gmt_core::experiment::{
    run_abc, run_furstenberg, run_projection, run_sumproduct, ConfigSpec, DirectionSpec, SetSpec1,
    SetSpec2,
};
use gmt_core::frostman::{frostman_constant, katz_tao_constant, regularity_constant};
use gmt_core::lipschitz::{
    decompose_linear, falconer_decompose, kaufman_decompose, superlinear_tail, weak_decompose,
    PiecewiseAffine,
};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gmtlab", about = "dyadic geometric measure theory laboratory")]
struct Cli {
    /// rayon worker threads (0 = library default)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Covering number of a set file at a coarser scale
    Cover {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        delta_exp: u32,
    },
    /// Non-concentration certificates for a set file
    Frostman {
        #[arg(long)]
        set: PathBuf,
        /// dimension parameter as p/q
        #[arg(long)]
        s: String,
        /// also compute the two-sided regularity certificate
        #[arg(long)]
        regular: bool,
        /// also compute the Katz-Tao constant
        #[arg(long)]
        katz_tao: bool,
    },
    /// Extract a uniform subset (or an exhaustive family) from a set file
    Uniformize {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        step: u32,
        /// exhaustive mode: repeat until the leftover is below delta^epsilon
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a decomposition on a breakpoint-list function file
    Decompose {
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        epsilon: String,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long)]
        zeta: Option<String>,
    },
    /// Generate an input set or configuration from a spec file
    Construct {
        /// cantor | sharpness
        #[arg(long)]
        kind: String,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a closed-form bound
    Bounds {
        /// furstenberg-conjecture | furstenberg-general | projection |
        /// sumproduct | minimal-nonconcentration | polygon-k | polygon-l
        #[arg(long)]
        query: String,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        u: Option<String>,
        #[arg(long)]
        eta: Option<String>,
        /// regular | borel-low | borel-high (projection query)
        #[arg(long)]
        regime: Option<String>,
        /// general | regular (sumproduct query)
        #[arg(long)]
        variant: Option<String>,
        /// sharp variant (minimal-nonconcentration query)
        #[arg(long)]
        sharp: bool,
        /// print an N x N (s,t) grid of values as machine-readable JSON rows
        #[arg(long)]
        grid: Option<u32>,
    },
    /// Run an experiment from a spec file and write the report
    Experiment {
        /// abc | projection | furstenberg | sumproduct
        kind: String,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// also flatten per-scale rows into a CSV file
        #[arg(long)]
        csv: Option<PathBuf>,
        /// overrides the seed in the spec file
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_rat(s: &str) -> Result<Rat, GmtError> {
    rat_from_str(s).ok_or_else(|| GmtError::Malformed(format!("bad rational literal: {s}")))
}

fn load_set(path: &PathBuf) -> Result<DyadicSet, GmtError> {
    let text = fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    DyadicSet::from_json(&v)
}

fn load_function(path: &PathBuf) -> Result<PiecewiseAffine, GmtError> {
    let text = fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let arr = v
        .as_array()
        .ok_or_else(|| GmtError::Malformed("function file must be a breakpoint list".into()))?;
    let mut pts = Vec::new();
    for item in arr {
        let pair = item
            .as_array()
            .filter(|p| p.len() == 2)
            .ok_or_else(|| GmtError::Malformed("breakpoint must be [[xn,xd],[yn,yd]]".into()))?;
        let num_pair = |v: &serde_json::Value| -> Result<Rat, GmtError> {
            let p = v
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| GmtError::Malformed("rational must be [num, den]".into()))?;
            let parse = |x: &serde_json::Value| -> Result<i64, GmtError> {
                if let Some(n) = x.as_i64() {
                    Ok(n)
                } else if let Some(s) = x.as_str() {
                    s.parse()
                        .map_err(|_| GmtError::Malformed(format!("bad integer {s}")))
                } else {
                    Err(GmtError::Malformed("bad integer".into()))
                }
            };
            Ok(gmt_core::exact::rat(parse(&p[0])?, parse(&p[1])?))
        };
        pts.push((num_pair(&pair[0])?, num_pair(&pair[1])?));
    }
    PiecewiseAffine::new(pts, gmt_core::exact::rat_int(2))
}

#[derive(serde::Deserialize)]
struct ExperimentFile {
    #[serde(default)]
    seed: u64,
    delta_exps: Vec<u32>,
    #[serde(default)]
    a: Option<SetSpec1>,
    #[serde(default)]
    b: Option<SetSpec1>,
    #[serde(default)]
    c: Option<SetSpec1>,
    #[serde(default)]
    k: Option<SetSpec2>,
    #[serde(default)]
    directions: Option<DirectionSpec>,
    #[serde(default)]
    config: Option<ConfigSpec>,
}

fn write_report(
    out: &PathBuf,
    csv: Option<&PathBuf>,
    value: serde_json::Value,
    csv_rows: Vec<Vec<String>>,
) -> Result<(), GmtError> {
    fs::write(out, serde_json::to_string_pretty(&value)? + "\n")?;
    if let Some(path) = csv {
        let mut text = String::new();
        for row in csv_rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(path, text)?;
    }
    Ok(())
}

fn missing(field: &str) -> GmtError {
    GmtError::Malformed(format!("experiment spec is missing the `{field}` field"))
}

fn run() -> Result<(), GmtError> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // a failure here only means a pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match cli.command {
        Command::Cover { set, delta_exp } => {
            let p = load_set(&set)?;
            println!("{}", p.covering_number(Scale(delta_exp))?);
        }
        Command::Frostman {
            set,
            s,
            regular,
            katz_tao,
        } => {
            let p = load_set(&set)?;
            let sv = parse_rat(&s)?;
            let cert = frostman_constant(&p, &sv)?;
            let mut out = serde_json::json!({ "frostman": cert.to_json() });
            if regular {
                let reg = regularity_constant(&p, &sv)?;
                out["regularity"] = serde_json::json!({
                    "C_combined_approx": reg.combined_f64(),
                    "scaleinv_witness": reg.scaleinv_witness,
                });
            }
            if katz_tao {
                let (c, w) = katz_tao_constant(&p, &sv)?;
                out["katz_tao"] = serde_json::json!({
                    "C_approx": c.to_f64(&sv),
                    "witness": w,
                });
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Uniformize {
            set,
            step,
            epsilon,
            out,
        } => {
            let p = load_set(&set)?;
            match epsilon {
                None => {
                    let u = uniformize(&p, step)?;
                    let structure = check_uniform(&u, step)?
                        .map_err(|f| GmtError::VerificationFailed(format!("{f:?}")))?;
                    let beta = branching_function(&structure)?;
                    let payload = serde_json::json!({
                        "set": u.to_json(),
                        "counts": structure.counts,
                        "branching_function": beta.to_json(),
                    });
                    match out {
                        Some(path) => fs::write(path, serde_json::to_string_pretty(&payload)?)?,
                        None => println!("{}", serde_json::to_string_pretty(&payload)?),
                    }
                }
                Some(eps) => {
                    let ev = parse_rat(&eps)?;
                    let parts = exhaustive_uniformize(&p, step, &ev)?;
                    let payload = serde_json::json!({
                        "parts": parts.iter().map(|q| q.to_json()).collect::<Vec<_>>(),
                    });
                    match out {
                        Some(path) => fs::write(path, serde_json::to_string_pretty(&payload)?)?,
                        None => println!("{}", serde_json::to_string_pretty(&payload)?),
                    }
                }
            }
        }
        Command::Decompose {
            function,
            mode,
            epsilon,
            s,
            t,
            sigma,
            zeta,
        } => {
            let f = load_function(&function)?;
            let eps = parse_rat(&epsilon)?;
            let payload = match mode.as_str() {
                "linear" => decompose_linear(&f, &eps)?.to_json(),
                "kaufman" => {
                    let sv = parse_rat(&s.ok_or_else(|| missing("s"))?)?;
                    let tv = parse_rat(&t.ok_or_else(|| missing("t"))?)?;
                    kaufman_decompose(&f, &sv, &tv, &eps)?.to_json()
                }
                "falconer" => {
                    let sv = parse_rat(&s.ok_or_else(|| missing("s"))?)?;
                    let tv = parse_rat(&t.ok_or_else(|| missing("t"))?)?;
                    falconer_decompose(&f, &sv, &tv, &eps)?.to_json()
                }
                "weak" => {
                    let wd = weak_decompose(&f, &eps)?;
                    serde_json::json!({
                        "points": wd.points.iter().map(rat_to_string).collect::<Vec<_>>(),
                        "slopes": wd.slopes.iter().map(rat_to_string).collect::<Vec<_>>(),
                        "tau": rat_to_string(&wd.tau),
                    })
                }
                "tail" => {
                    let sv = parse_rat(&sigma.ok_or_else(|| missing("sigma"))?)?;
                    let zv = parse_rat(&zeta.ok_or_else(|| missing("zeta"))?)?;
                    let a = superlinear_tail(&f, &sv, &zv, &eps)?;
                    serde_json::json!({ "tail_point": rat_to_string(&a) })
                }
                other => {
                    return Err(GmtError::Malformed(format!(
                        "unknown decomposition mode {other}"
                    )))
                }
            };
            println!("{}", serde_json::to_string_pretty(&payload)?);
        }
        Command::Construct {
            kind,
            spec,
            out,
            seed,
        } => {
            let text = fs::read_to_string(&spec)?;
            match kind.as_str() {
                "cantor" => {
                    let mut cs: CantorSpec = serde_json::from_str(&text)?;
                    if let Some(sd) = seed {
                        cs.seed = sd;
                    }
                    let set = cantor_set(&cs)?;
                    fs::write(&out, serde_json::to_string_pretty(&set.to_json())? + "\n")?;
                }
                "sharpness" => {
                    let ss: SharpnessSpec = serde_json::from_str(&text)?;
                    let built = sharpness_config(&ss)?;
                    let payload = serde_json::json!({
                        "config": built.config.to_json(),
                        "ledger": built.ledger,
                    });
                    fs::write(&out, serde_json::to_string_pretty(&payload)? + "\n")?;
                }
                other => {
                    return Err(GmtError::Malformed(format!(
                        "unknown construction kind {other}"
                    )))
                }
            }
        }
        Command::Bounds {
            query,
            s,
            t,
            u,
            eta,
            regime,
            variant,
            sharp,
            grid,
        } => {
            let req = |v: &Option<String>, name: &str| -> Result<Rat, GmtError> {
                parse_rat(v.as_deref().ok_or_else(|| missing(name))?)
            };
            if let Some(n) = grid {
                // machine-readable rows over an (s,t) grid, one JSON per line
                let n = n.max(2) as i64;
                println!("# {query} on an {n} x {n} (s,t) grid");
                for i in 1..n {
                    let sv = gmt_core::exact::rat(i, n);
                    for j in 0..n {
                        let tmax = gmt_core::exact::rat_int(2) - &sv;
                        let tv = &sv + (&tmax - &sv) * gmt_core::exact::rat(j, n - 1);
                        let (value, source) = match query.as_str() {
                            "furstenberg-conjecture" => {
                                (furstenberg_conjecture(&sv, &tv)?, "three-way minimum")
                            }
                            "furstenberg-general" => (
                                furstenberg_general(&sv, &tv)?.dimension_bound,
                                "tube-count exponent plus s",
                            ),
                            other => {
                                return Err(GmtError::Malformed(format!(
                                    "grid mode supports the furstenberg queries, not {other}"
                                )))
                            }
                        };
                        println!(
                            "{}",
                            serde_json::json!({
                                "query": query,
                                "s": rat_to_string(&sv),
                                "t": rat_to_string(&tv),
                                "value_num": value.numer().to_string(),
                                "value_den": value.denom().to_string(),
                                "value": rat_to_f64(&value),
                                "source": source,
                            })
                        );
                    }
                }
                return Ok(());
            }
            let (value, source) = match query.as_str() {
                "furstenberg-conjecture" => (
                    furstenberg_conjecture(&req(&s, "s")?, &req(&t, "t")?)?,
                    "three-way minimum",
                ),
                "furstenberg-general" => {
                    let g = furstenberg_general(&req(&s, "s")?, &req(&t, "t")?)?;
                    println!(
                        "{}",
                        serde_json::json!({
                            "query": query,
                            "gamma": rat_to_string(&g.gamma),
                            "dimension_bound": rat_to_string(&g.dimension_bound),
                        })
                    );
                    return Ok(());
                }
                "projection" => {
                    let reg = match regime.as_deref() {
                        Some("regular") => ProjectionRegime::Regular,
                        Some("borel-low") => ProjectionRegime::BorelLow,
                        Some("borel-high") => ProjectionRegime::BorelHigh,
                        other => return Err(GmtError::Malformed(format!(
                            "projection regime must be regular|borel-low|borel-high, got {other:?}"
                        ))),
                    };
                    (
                        projection_exceptional(&req(&t, "t")?, &req(&u, "u")?, reg)?,
                        "exceptional-set bound",
                    )
                }
                "sumproduct" => {
                    let var = match variant.as_deref() {
                        Some("regular") => SumProductVariant::Regular,
                        _ => SumProductVariant::General,
                    };
                    (sumproduct_exponent(&req(&s, "s")?, var)?, "growth exponent")
                }
                "minimal-nonconcentration" => (
                    minimal_nonconcentration_exponent(
                        &req(&s, "s")?,
                        &req(&t, "t")?,
                        &req(&u, "u")?,
                        sharp,
                    )?,
                    "tube-count exponent",
                ),
                "polygon-k" => {
                    let etav = eta
                        .as_deref()
                        .map(parse_rat)
                        .transpose()?
                        .unwrap_or_else(|| gmt_core::exact::rat_int(0));
                    let m = lp_min_polygon_k(&req(&s, "s")?, &req(&t, "t")?, &etav)?;
                    println!(
                        "{}",
                        serde_json::json!({
                            "query": query,
                            "minimum": rat_to_string(&m.minimum),
                            "vertices": m.vertices.iter().map(|(a, h)| {
                                vec![rat_to_string(a), rat_to_string(h)]
                            }).collect::<Vec<_>>(),
                            "kappa": rat_to_string(&m.kappa),
                        })
                    );
                    return Ok(());
                }
                "polygon-l" => {
                    let etav = eta
                        .as_deref()
                        .map(parse_rat)
                        .transpose()?
                        .unwrap_or_else(|| gmt_core::exact::rat_int(0));
                    let m = lp_min_polygon_l(&req(&s, "s")?, &req(&t, "t")?, &etav)?;
                    println!(
                        "{}",
                        serde_json::json!({
                            "query": query,
                            "minimum": rat_to_string(&m.minimum),
                            "kappa": rat_to_string(&m.kappa),
                        })
                    );
                    return Ok(());
                }
                other => return Err(GmtError::Malformed(format!("unknown bounds query {other}"))),
            };
            println!(
                "{}",
                serde_json::json!({
                    "query": query,
                    "value_num": value.numer().to_string(),
                    "value_den": value.denom().to_string(),
                    "value": rat_to_f64(&value),
                    "source": source,
                })
            );
        }
        Command::Experiment {
            kind,
            spec,
            out,
            csv,
            seed,
        } => {
            let text = fs::read_to_string(&spec)?;
            let mut file: ExperimentFile = serde_json::from_str(&text)?;
            if let Some(sd) = seed {
                file.seed = sd;
            }
            match kind.as_str() {
                "abc" => {
                    let rep = run_abc(
                        &file.a.ok_or_else(|| missing("a"))?,
                        &file.b.ok_or_else(|| missing("b"))?,
                        &file.c.ok_or_else(|| missing("c"))?,
                        &file.delta_exps,
                        file.seed,
                    )?;
                    let csv_rows = std::iter::once(vec![
                        "delta_exp".into(),
                        "a_count".into(),
                        "max_count".into(),
                        "max_ratio_log2".into(),
                    ])
                    .chain(rep.rows.iter().map(|r| {
                        vec![
                            r.delta_exp.to_string(),
                            r.a_count.to_string(),
                            r.max_count.to_string(),
                            format!("{}", r.max_ratio_log2),
                        ]
                    }))
                    .collect();
                    write_report(&out, csv.as_ref(), serde_json::to_value(&rep)?, csv_rows)?;
                }
                "sumproduct" => {
                    let rep = run_sumproduct(
                        &file.a.ok_or_else(|| missing("a"))?,
                        &file.delta_exps,
                        file.seed,
                    )?;
                    let csv_rows = std::iter::once(vec![
                        "delta_exp".into(),
                        "a_count".into(),
                        "sum_count".into(),
                        "product_count".into(),
                    ])
                    .chain(rep.rows.iter().map(|r| {
                        vec![
                            r.delta_exp.to_string(),
                            r.a_count.to_string(),
                            r.sum_count.to_string(),
                            r.product_count.to_string(),
                        ]
                    }))
                    .collect();
                    write_report(&out, csv.as_ref(), serde_json::to_value(&rep)?, csv_rows)?;
                }
                "projection" => {
                    let rep = run_projection(
                        &file.k.ok_or_else(|| missing("k"))?,
                        &file.directions.unwrap_or(DirectionSpec::HalfGrid),
                        &file.delta_exps,
                        file.seed,
                    )?;
                    let csv_rows = std::iter::once(vec![
                        "delta_exp".into(),
                        "k_count".into(),
                        "min_projection".into(),
                        "max_projection".into(),
                    ])
                    .chain(rep.rows.iter().map(|r| {
                        vec![
                            r.delta_exp.to_string(),
                            r.k_count.to_string(),
                            r.min_projection.to_string(),
                            r.max_projection.to_string(),
                        ]
                    }))
                    .collect();
                    write_report(&out, csv.as_ref(), serde_json::to_value(&rep)?, csv_rows)?;
                }
                "furstenberg" => {
                    let rep = run_furstenberg(
                        &file.config.ok_or_else(|| missing("config"))?,
                        &file.delta_exps,
                        file.seed,
                    )?;
                    let csv_rows = std::iter::once(vec![
                        "delta_exp".into(),
                        "point_count".into(),
                        "m".into(),
                        "union_tubes".into(),
                    ])
                    .chain(rep.rows.iter().map(|r| {
                        vec![
                            r.delta_exp.to_string(),
                            r.point_count.to_string(),
                            r.m.to_string(),
                            r.union_tubes.to_string(),
                        ]
                    }))
                    .collect();
                    write_report(&out, csv.as_ref(), serde_json::to_value(&rep)?, csv_rows)?;
                }
                other => {
                    return Err(GmtError::Malformed(format!(
                        "unknown experiment kind {other}"
                    )))
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gmtlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
