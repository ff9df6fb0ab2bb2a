//! `hypersurf`: scenario-driven verification of hypersurfaces in S^n×R and H^n×R.

mod report;
mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypersurf::acceptance::{self, Fixtures, DEFAULT_SEED, FAMILY_INIT, FAMILY_LAMBDA0, FAMILY_SPAN, POINTS_PER_CHART};
use hypersurf::classify::{self, PointRecord, Samples};
use hypersurf::profiles::{self, family_table, OdeState, RelationSpec, StepControl};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use report::{Diagnostic, Overall, Report, Status, Verdict};
use scenario::{Built, ChartSpec, CheckName, CheckSpec, FamilySpec, OutputSpec, Sampling, Scenario, SpaceSpec};

#[derive(Parser, Debug)]
#[command(name = "hypersurf", version, about = "Invariants and structure checks for hypersurfaces of S^n×R and H^n×R")]
struct Cli {
    /// Output directory for reports and tables.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Tolerance override `key=value`; repeatable.
    #[arg(long = "tol-override", global = true, value_name = "KEY=VALUE")]
    tol_override: Vec<String>,
    /// Worker threads for sample evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the sampling generator; overrides the scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the chart of a scenario file, sample it and run the requested checks.
    Analyze { scenario: PathBuf },
    /// Integrate a rotation profile under a curvature relation and verify the result.
    Family(FamilyArgs),
    /// Run the built-in acceptance suite.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RelationKind {
    SemiParallel,
    Soliton,
    ConstantScalar,
}

#[derive(Args, Debug)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    relation: RelationKind,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1)]
    epsilon: i32,
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Soliton constant; derived from --lambda0 when absent.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Constant scalar curvature; derived from --lambda0 when absent.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Profile curvature at the initial state used to derive c or rho.
    #[arg(long, allow_negative_numbers = true, default_value_t = FAMILY_LAMBDA0)]
    lambda0: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = FAMILY_INIT.t)]
    t0: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = FAMILY_INIT.phi)]
    phi: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = FAMILY_INIT.a)]
    a: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = FAMILY_INIT.dphi)]
    dphi: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = FAMILY_INIT.da)]
    da: f64,
    /// Integration interval `start,end`.
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',', num_args = 2, default_values_t = [FAMILY_SPAN.0, FAMILY_SPAN.1])]
    t_span: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    /// Rows of the profile table.
    #[arg(long, default_value_t = 101)]
    rows: usize,
    /// Random sample points on the generated chart.
    #[arg(long, default_value_t = POINTS_PER_CHART)]
    samples: usize,
}

enum Failure {
    Input(String),
    Io(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Analyze { scenario } => analyze(&cli, scenario),
        Command::Family(args) => family(&cli, args),
        Command::Selftest => selftest(&cli),
    };
    match outcome {
        Ok(Overall::Pass) => ExitCode::SUCCESS,
        Ok(Overall::Fail) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_overrides(list: &[String]) -> Result<Vec<(String, f64)>, Failure> {
    list.iter()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Input(format!("--tol-override {kv:?}: expected key=value")))?;
            let v: f64 = v.trim().parse().map_err(|_| Failure::Input(format!("--tol-override {kv:?}: value is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn apply_cli(cli: &Cli, sc: &mut Scenario) -> Result<(), Failure> {
    for (k, v) in parse_overrides(&cli.tol_override)? {
        sc.tolerances.insert(k, v);
    }
    if let (Some(s), Sampling::Random { seed, .. }) = (cli.seed, &mut sc.sampling) {
        *seed = Some(s);
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))
}

fn analyze(cli: &Cli, path: &Path) -> Result<Overall, Failure> {
    let started = Instant::now();
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut sc = scenario::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    apply_cli(cli, &mut sc)?;
    let run = run_scenario(&sc)?;
    let Run { report, records, indices, .. } = run;
    emit(cli, &sc.output, report, started, |dir| write_points(dir, &sc.output, &records, &indices))
}

struct Run {
    report: Report,
    built: Built,
    records: Vec<PointRecord>,
    indices: Vec<usize>,
}

/// Samples the scenario's chart and evaluates its checks.
fn run_scenario(sc: &Scenario) -> Result<Run, Failure> {
    let space = sc.validate().map_err(Failure::Input)?;
    let built = sc.chart.build(space).map_err(|e| Failure::Input(format!("chart: {e}")))?;
    let chart = built.chart();
    let us = match sc.sampling {
        Sampling::Random { count, seed, margin } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.expect("validated"));
            chart.domain().sample_random(&mut rng, count, margin)
        }
        Sampling::Grid { per_dim, margin } => chart.domain().grid(per_dim, margin),
    };
    let (samples, failures) = Samples::evaluate_partial(chart, &us);
    let mut diagnostics: Vec<Diagnostic> = failures
        .iter()
        .map(|(i, e)| Diagnostic { sample: Some(*i), ..Diagnostic::new("regularity", e.to_string()) })
        .collect();
    let ok_indices: Vec<usize> = (0..us.len()).filter(|i| !failures.iter().any(|(j, _)| j == i)).collect();
    let params = sc.relation_params();
    let base_tol = sc.tolerances(None).map_err(|e| Failure::Input(e.to_string()))?;
    let mut records = Vec::new();
    let mut indices = Vec::new();
    let mut kept = Samples { space: samples.space, points: Vec::new() };
    for (p, i) in samples.points.into_iter().zip(&ok_indices) {
        match classify::point_record(&p, params, &base_tol) {
            Ok(r) => {
                records.push(r);
                indices.push(*i);
                kept.points.push(p);
            }
            Err(e) => diagnostics.push(Diagnostic { sample: Some(*i), ..Diagnostic::new("regularity", e.to_string()) }),
        }
    }
    let tols = sc.checks.iter().map(|c| sc.tolerances(Some(c))).collect::<Result<Vec<_>, _>>().map_err(|e| Failure::Input(e.to_string()))?;
    let verdicts = report::verdicts(&sc.checks, &kept, &records, params, &tols);
    if let Built::Generated(fam, _) = &built {
        for h in &fam.halts {
            diagnostics.push(Diagnostic { t: Some(h.t), ..Diagnostic::new("halt", format!("{} integration stopped: {}", h.direction, h.reason)) });
        }
    }
    diagnostics.push(Diagnostic::new("scope", report::SCOPE_NOTE));
    let mut meta = report::base_meta(match sc.sampling {
        Sampling::Random { seed, .. } => seed,
        Sampling::Grid { .. } => None,
    });
    meta.insert("samples_requested".into(), json!(us.len()));
    meta.insert("samples_evaluated".into(), json!(records.len()));
    meta.insert("tolerances".into(), json!(base_tol));
    if let Built::Generated(fam, _) = &built {
        meta.insert("ode_nodes".into(), json!(fam.nodes.len()));
        meta.insert("integrated_interval".into(), json!(fam.curve.t_range));
    }
    let report = Report {
        scenario: serde_json::to_value(sc).expect("scenario serializes"),
        points: report::point_rows(&records, &indices),
        aggregates: report::aggregates(&records),
        verdicts,
        diagnostics,
        meta,
    };
    Ok(Run { report, built, records, indices })
}

/// Writes the report and any extra files, then prints the verdict summary.
fn emit(
    cli: &Cli,
    output: &OutputSpec,
    mut report: Report,
    started: Instant,
    extra: impl FnOnce(&Path) -> Result<(), Failure>,
) -> Result<Overall, Failure> {
    prepare_out(&cli.out)?;
    report.finish(started.elapsed().as_secs_f64());
    extra(&cli.out)?;
    let path = cli.out.join(&output.report);
    report.write_json(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    let overall = report.overall();
    eprintln!("{} -> {}", if overall == Overall::Pass { "PASS" } else { "FAIL" }, path.display());
    Ok(overall)
}

fn write_points(dir: &Path, output: &OutputSpec, records: &[PointRecord], indices: &[usize]) -> Result<(), Failure> {
    match &output.points_csv {
        Some(name) => report::write_points_csv(&dir.join(name), records, indices).map_err(|e| Failure::Io(format!("{name}: {e}"))),
        None => Ok(()),
    }
}

fn family(cli: &Cli, args: &FamilyArgs) -> Result<Overall, Failure> {
    let started = Instant::now();
    let space = SpaceSpec { epsilon: args.epsilon, n: args.n };
    let amb = space.build().map_err(|e| Failure::Input(e.to_string()))?;
    let init = OdeState { t: args.t0, phi: args.phi, a: args.a, dphi: args.dphi, da: args.da };
    let derive = |kind: &str| profiles::relation_constant(kind, &init, args.lambda0, amb).map_err(|e| Failure::Input(e.to_string()));
    let relation = match args.relation {
        RelationKind::SemiParallel => RelationSpec::SemiParallel,
        RelationKind::Soliton => match args.c {
            Some(c) => RelationSpec::Soliton { c },
            None => derive("soliton")?,
        },
        RelationKind::ConstantScalar => match args.rho {
            Some(rho) => RelationSpec::ConstantScalar { rho },
            None => derive("constant_scalar")?,
        },
    };
    let identities = [CheckName::Gauss, CheckName::Codazzi, CheckName::TField, CheckName::HeightGradient, CheckName::ClosedForms];
    let specific: Vec<CheckName> = match relation {
        RelationSpec::SemiParallel => {
            let mut v = vec![CheckName::SemiParallel, CheckName::RadiallyFlat];
            if args.n >= 4 {
                v.push(CheckName::ConformallyFlat);
            }
            v
        }
        RelationSpec::Soliton { .. } => vec![CheckName::Soliton, CheckName::Rigidity],
        _ => vec![CheckName::ConstantScalar],
    };
    let sc = {
        let mut sc = Scenario {
            name: Some(format!("family {}", args.relation.to_possible_value().unwrap().get_name())),
            space,
            chart: ChartSpec::Family(FamilySpec {
                relation,
                init,
                t_span: (args.t_span[0], args.t_span[1]),
                step: StepControl { rtol: args.rtol, ..StepControl::default() },
            }),
            sampling: Sampling::Random { count: args.samples, seed: Some(cli.seed.unwrap_or(DEFAULT_SEED)), margin: acceptance::SAMPLE_MARGIN },
            checks: identities.iter().chain(&specific).map(|c| CheckSpec::Name(*c)).collect(),
            tolerances: Default::default(),
            soliton_c: None,
            output: OutputSpec { report: "family_report.json".into(), points_csv: Some("family_points.csv".into()) },
        };
        apply_cli(cli, &mut sc)?;
        sc
    };
    let Run { mut report, built, records, indices } = run_scenario(&sc)?;
    let Built::Generated(fam, _) = &built else { unreachable!() };
    let tol = sc.tolerances(None).map_err(|e| Failure::Input(e.to_string()))?;
    let rows = family_table(fam, args.rows).map_err(|e| Failure::Input(format!("profile table: {e}")))?;
    let eps = amb.epsilon.value();
    let rel_max = rows.iter().map(|r| relation.residual(eps, amb.n, r.lambda, r.mu, r.cos_theta).abs()).fold(0.0, f64::max);
    report.verdicts.insert("relation".into(), Verdict::threshold(rel_max, tol.relation).with_detail(format!("{relation:?} along {} profile rows", rows.len())));
    report.verdicts.insert("arclength".into(), Verdict::threshold(fam.max_speed_defect(), 1e-9));
    report.meta.insert("relation".into(), json!(relation));
    emit(cli, &sc.output, report, started, |dir| {
        write_points(dir, &sc.output, &records, &indices)?;
        let path = dir.join("family_table.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        for r in &rows {
            w.serialize(r).map_err(|e| Failure::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| Failure::Io(e.to_string()))
    })
}

fn selftest(cli: &Cli) -> Result<Overall, Failure> {
    let started = Instant::now();
    if !cli.tol_override.is_empty() {
        return Err(Failure::Input("selftest tolerances are fixed; --tol-override is not accepted".into()));
    }
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let fx = Fixtures::build(seed).map_err(|e| Failure::Input(format!("fixtures: {e}")))?;
    let results = acceptance::run_all(&fx);
    let forced = acceptance::perturbed_fixture().map_err(|e| Failure::Input(e.to_string()))?;
    let mut verdicts = std::collections::BTreeMap::new();
    let mut aggregates = std::collections::BTreeMap::new();
    for r in &results {
        let status = if r.passed { Status::Pass } else { Status::Fail };
        verdicts.insert(r.name.to_string(), Verdict { status, value: None, tolerance: None, flags: vec![], detail: Some(r.detail.clone()) });
        aggregates.insert(r.name.to_string(), json!(r.metrics));
    }
    verdicts.insert(
        "forced failure is detected".into(),
        Verdict {
            status: if forced.passed { Status::Fail } else { Status::Pass },
            value: None,
            tolerance: None,
            flags: vec![],
            detail: Some(forced.line()),
        },
    );
    aggregates.insert(forced.name.to_string(), json!(forced.metrics));
    let mut meta = report::base_meta(Some(seed));
    meta.insert("criteria".into(), json!(results.len()));
    meta.insert("criteria_passed".into(), json!(results.iter().filter(|r| r.passed).count()));
    let report = Report {
        scenario: json!({ "name": "selftest", "seed": seed }),
        points: Vec::new(),
        aggregates,
        verdicts,
        diagnostics: vec![Diagnostic::new("scope", report::SCOPE_NOTE)],
        meta,
    };
    emit(cli, &OutputSpec { report: "selftest_report.json".into(), points_csv: None }, report, started, |_| Ok(()))
}
