//! Benchmark suites: one CSV row per (instance, method, stopping rule).

use std::fs;
use std::path::Path;

use parnes_core::baselines::{
    apg_no_restart, apg_no_restart_with, fista_qp_with, reference_qp, QpProblem, StopReference,
    StopRule, StopRuleObserver,
};
use parnes_core::nesta_lasso::{solve_lasso, LassoProblem, NoObserver};
use parnes_core::operators::OperatorKind;
use parnes_core::parnes::{lambda_from_dual, solve_bpdn_with, BpdnProblem};
use parnes_core::problems::{assemble, OperatorSpec, ProblemBundle, SignalSpec};
use parnes_core::vecops::{norm1, norm2};
use parnes_core::{SolveReport, Termination};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{BenchArgs, BenchName, SolverFlags};
use crate::commands::{lasso_config, lipschitz_for, parnes_config, to_json, write_text};
use crate::error::{CliError, CliResult, EXIT_OK};

/// `(m, n, tau)` grid of the restart ablation.
#[allow(clippy::approx_constant)] // 6.28 is a budget, not 2 pi
pub const ABLATION_GRID: [(usize, usize, f64); 3] =
    [(100, 256, 6.28), (200, 512, 12.6), (400, 1024, 25.1)];
pub const ABLATION_ETA: f64 = 1e-3;
pub const SWEEP_ETA: f64 = 1e-6;
/// Root tolerance of rule-driven PARNES runs: small enough that the stopping
/// rule, not the root test, ends the solve.
pub const RULE_PARNES_ETA: f64 = 1e-9;
/// Gap target of rule-driven apg runs, for the same reason.
pub const RULE_APG_ETA: f64 = 1e-12;
pub const SCALED_N: usize = 8192;
pub const FULL_SCALE_N: usize = 262_144;
pub const REFERENCE_LABEL: &str = "fista_tight";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub bench: &'static str,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub d_db: Option<f64>,
    pub seed: u64,
    pub method: String,
    pub rule: &'static str,
    pub param: &'static str,
    pub param_value: Option<f64>,
    /// Integer count, `DNC` when the budget ran out, `ERR` on solver failure.
    #[serde(rename = "N_A")]
    pub n_a: String,
    pub converged: bool,
    pub n_forward: u64,
    pub n_adjoint: u64,
    pub setup_matvecs: u64,
    pub iterations: usize,
    pub newton: usize,
    pub restarts: usize,
    pub x_norm1: Option<f64>,
    pub residual_norm: Option<f64>,
    pub rel_err_1: Option<f64>,
    pub err_inf: Option<f64>,
    pub err_2: Option<f64>,
    pub reference: &'static str,
    pub note: String,
}

#[derive(Debug, Clone, Copy)]
struct Instance {
    m: usize,
    n: usize,
    s: usize,
    d_db: Option<f64>,
    seed: u64,
    tau: f64,
}

impl BenchRow {
    fn new(bench: BenchName, inst: &Instance, method: &str, rule: &'static str) -> Self {
        Self {
            bench: bench.name(),
            m: inst.m,
            n: inst.n,
            s: inst.s,
            d_db: inst.d_db,
            seed: inst.seed,
            method: method.to_string(),
            rule,
            param: "",
            param_value: None,
            n_a: String::new(),
            converged: false,
            n_forward: 0,
            n_adjoint: 0,
            setup_matvecs: 0,
            iterations: 0,
            newton: 0,
            restarts: 0,
            x_norm1: None,
            residual_norm: None,
            rel_err_1: None,
            err_inf: None,
            err_2: None,
            reference: "",
            note: String::new(),
        }
    }

    fn param(mut self, name: &'static str, value: f64) -> Self {
        self.param = name;
        self.param_value = Some(value);
        self
    }

    /// Fills counts from a report; `converged` decides between a count and `DNC`.
    fn fill(&mut self, report: &SolveReport, converged: bool, setup: u64) {
        self.converged = converged;
        self.n_a = if !converged && report.termination == Termination::BudgetExhausted {
            "DNC".into()
        } else {
            report.n_a().to_string()
        };
        self.n_forward = report.n_forward;
        self.n_adjoint = report.n_adjoint;
        self.setup_matvecs = setup;
        self.iterations = report.inner_iterations;
        self.newton = report.newton_iterations;
        self.restarts = report.restarts;
        self.x_norm1 = Some(report.x_norm1);
        self.residual_norm = Some(report.residual_norm);
    }

    fn errors_against(&mut self, x: &[f64], x_ref: &[f64]) {
        let diff: Vec<f64> = x.iter().zip(x_ref).map(|(a, b)| a - b).collect();
        let ref1 = norm1(x_ref);
        self.rel_err_1 = Some(if ref1 > 0.0 {
            norm1(&diff) / ref1
        } else {
            norm1(&diff)
        });
        self.err_inf = Some(diff.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        self.err_2 = Some(norm2(&diff));
        self.reference = REFERENCE_LABEL;
    }

    fn failed(mut self, err: &parnes_core::Error) -> Self {
        self.n_a = "ERR".into();
        self.converged = false;
        self.note = err.to_string();
        self
    }
}

/// Resolved settings; serialized into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub bench: &'static str,
    pub kind: OperatorKind,
    /// `(m, n, tau)` points; only the ablation uses a grid.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<(usize, usize, f64)>,
    #[serde(skip_serializing_if = "is_zero")]
    pub n: usize,
    #[serde(skip_serializing_if = "is_zero")]
    pub m: usize,
    #[serde(skip_serializing_if = "is_zero")]
    pub s: usize,
    pub noise: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dr_db: Vec<f64>,
    pub decay: f64,
    pub eta: f64,
    pub rule_parnes_eta: f64,
    pub rule_apg_eta: f64,
    pub max_matvec: u64,
    pub lipschitz_override: Option<f64>,
    pub rip_delta: f64,
    pub k_max: Option<usize>,
    pub restart_check: bool,
    pub methods: Vec<String>,
    pub seeds: u64,
    pub jobs: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl BenchConfig {
    pub fn resolve(args: &BenchArgs) -> CliResult<Self> {
        let n = args.n.unwrap_or(if args.full_scale {
            FULL_SCALE_N
        } else {
            SCALED_N
        });
        let m = args.m.unwrap_or(n / 8);
        let s = args.s.unwrap_or(m / 5);
        let (default_noise, eta, allowed, default_methods): (f64, f64, &[&str], &[&str]) =
            match args.name {
                BenchName::ProxAblation => (
                    0.1,
                    ABLATION_ETA,
                    &["nesta-lasso", "apg"],
                    &["nesta-lasso", "apg"],
                ),
                BenchName::DynamicRange => (
                    0.1,
                    SWEEP_ETA,
                    &["parnes", "apg", "fista"],
                    &["parnes", "apg", "fista"],
                ),
                BenchName::ApproxSparse => (
                    1e-3,
                    SWEEP_ETA,
                    &["parnes", "apg", "fista"],
                    &["parnes", "apg", "fista"],
                ),
            };
        let methods: Vec<String> = match &args.methods {
            Some(list) => {
                for name in list {
                    if !allowed.contains(&name.as_str()) {
                        return Err(CliError::Usage(format!(
                            "method '{name}' is not available in {} (choose from {})",
                            args.name.name(),
                            allowed.join(", ")
                        )));
                    }
                }
                list.clone()
            }
            None => default_methods.iter().map(|s| s.to_string()).collect(),
        };
        if args.seeds == 0 || args.jobs == 0 {
            return Err(CliError::Usage(
                "--seeds and --jobs must be positive".into(),
            ));
        }
        if args.name == BenchName::DynamicRange && args.dr_db.is_empty() {
            return Err(CliError::Usage("--dr-db needs at least one value".into()));
        }
        let ablation = args.name == BenchName::ProxAblation;
        Ok(Self {
            bench: args.name.name(),
            kind: if ablation {
                OperatorKind::Dense
            } else {
                args.kind.into()
            },
            grid: if ablation {
                ABLATION_GRID.to_vec()
            } else {
                Vec::new()
            },
            // the ablation grid fixes sizes; s is m/10 there
            n: if ablation { 0 } else { n },
            m: if ablation { 0 } else { m },
            s: match args.name {
                BenchName::ProxAblation | BenchName::ApproxSparse => 0,
                BenchName::DynamicRange => s,
            },
            noise: args.noise.unwrap_or(default_noise),
            dr_db: if args.name == BenchName::DynamicRange {
                args.dr_db.clone()
            } else {
                Vec::new()
            },
            decay: args.decay,
            eta: args.flags.eta.unwrap_or(eta),
            rule_parnes_eta: RULE_PARNES_ETA,
            rule_apg_eta: RULE_APG_ETA,
            max_matvec: args.flags.max_matvec,
            lipschitz_override: args.flags.lipschitz,
            rip_delta: args.flags.rip_delta,
            k_max: args.flags.k_max,
            restart_check: !args.flags.no_restart_check,
            methods,
            seeds: args.seeds,
            jobs: args.jobs,
        })
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command_line: Vec<String>,
    config: &'a BenchConfig,
    master_seed: u64,
    library_version: &'static str,
    timestamp: String,
    csv: String,
    reference: &'static str,
    rows: usize,
}

fn timestamp(reproducible: bool) -> String {
    let when = if reproducible {
        let secs = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.trim().parse::<i64>().ok())
            .unwrap_or(0);
        chrono::DateTime::from_timestamp(secs, 0).unwrap_or_default()
    } else {
        chrono::Utc::now()
    };
    when.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// `argv` is recorded in the manifest.
pub fn run_bench(args: &BenchArgs, argv: &[String]) -> CliResult<crate::commands::Outcome> {
    let config = BenchConfig::resolve(args)?;
    let instances = instances(args.name, &config, args.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()?;
    let per_instance: Vec<Vec<BenchRow>> = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| run_instance(args.name, &config, &args.flags, inst))
            .collect()
    });
    let rows: Vec<BenchRow> = per_instance.into_iter().flatten().collect();

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let csv_name = format!("{}.csv", config.bench);
    let csv_path = args.out.join(&csv_name);
    write_csv(&csv_path, &rows)?;
    let manifest = Manifest {
        command_line: argv.to_vec(),
        config: &config,
        master_seed: args.seed,
        library_version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp(args.reproducible),
        csv: csv_name,
        reference: match args.name {
            BenchName::ProxAblation => "none",
            _ => REFERENCE_LABEL,
        },
        rows: rows.len(),
    };
    write_text(&args.out.join(MANIFEST_FILE), &to_json(&manifest))?;

    #[derive(Serialize)]
    struct Summary {
        csv: String,
        manifest: String,
        rows: usize,
        dnc: usize,
        errors: usize,
    }
    let summary = Summary {
        csv: csv_path.display().to_string(),
        manifest: args.out.join(MANIFEST_FILE).display().to_string(),
        rows: rows.len(),
        dnc: rows.iter().filter(|r| r.n_a == "DNC").count(),
        errors: rows.iter().filter(|r| r.n_a == "ERR").count(),
    };
    Ok(crate::commands::Outcome {
        stdout: to_json(&summary),
        code: EXIT_OK,
    })
}

fn write_csv(path: &Path, rows: &[BenchRow]) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

fn instances(name: BenchName, config: &BenchConfig, master: u64) -> Vec<Instance> {
    let seeds = (0..config.seeds).map(|i| master.wrapping_add(i));
    match name {
        BenchName::ProxAblation => config
            .grid
            .iter()
            .flat_map(|&(m, n, tau)| {
                seeds.clone().map(move |seed| Instance {
                    m,
                    n,
                    s: m / 10,
                    d_db: Some(0.0),
                    seed,
                    tau,
                })
            })
            .collect(),
        BenchName::DynamicRange => seeds
            .flat_map(|seed| {
                config.dr_db.iter().map(move |&d| Instance {
                    m: config.m,
                    n: config.n,
                    s: config.s,
                    d_db: Some(d),
                    seed,
                    tau: f64::NAN,
                })
            })
            .collect(),
        BenchName::ApproxSparse => seeds
            .map(|seed| Instance {
                m: config.m,
                n: config.n,
                s: 0,
                d_db: None,
                seed,
                tau: f64::NAN,
            })
            .collect(),
    }
}

fn build(
    name: BenchName,
    config: &BenchConfig,
    inst: &Instance,
) -> parnes_core::Result<ProblemBundle> {
    let (spec, kind) = match name {
        BenchName::ProxAblation => (
            SignalSpec::sparse(inst.n, inst.s, 0.0, inst.seed),
            OperatorKind::Dense,
        ),
        BenchName::DynamicRange => (
            SignalSpec::sparse(inst.n, inst.s, inst.d_db.unwrap_or(0.0), inst.seed),
            config.kind,
        ),
        BenchName::ApproxSparse => (
            SignalSpec::power_law(inst.n, config.decay, inst.seed),
            config.kind,
        ),
    };
    let op_spec = OperatorSpec {
        kind,
        m: inst.m,
        normalize_columns: true,
    };
    assemble(&spec, &op_spec, config.noise)
}

fn run_instance(
    name: BenchName,
    config: &BenchConfig,
    flags: &SolverFlags,
    inst: &Instance,
) -> Vec<BenchRow> {
    let bundle = match build(name, config, inst) {
        Ok(b) => b,
        Err(e) => return vec![BenchRow::new(name, inst, "gen", "").failed(&e)],
    };
    let (lipschitz, setup) = match lipschitz_for(&bundle.op, flags.lipschitz) {
        Ok(v) => v,
        Err(e) => {
            let mut row = BenchRow::new(name, inst, "setup", "");
            row.n_a = "ERR".into();
            row.note = e.to_string();
            return vec![row];
        }
    };
    match name {
        BenchName::ProxAblation => {
            ablation_rows(name, config, flags, inst, &bundle, lipschitz, setup)
        }
        _ => sweep_rows(name, config, flags, inst, &bundle, lipschitz, setup),
    }
}

fn ablation_rows(
    name: BenchName,
    config: &BenchConfig,
    flags: &SolverFlags,
    inst: &Instance,
    bundle: &ProblemBundle,
    lipschitz: f64,
    setup: u64,
) -> Vec<BenchRow> {
    let x0 = vec![0.0; inst.n];
    let lasso = lasso_config(flags, config.eta);
    config
        .methods
        .iter()
        .map(|method| {
            let row = BenchRow::new(name, inst, method, "gap").param("tau", inst.tau);
            let result =
                LassoProblem::new(&bundle.op, &bundle.b, inst.tau, lipschitz).and_then(|p| {
                    if method == "apg" {
                        apg_no_restart(&p, &x0, &lasso)
                    } else {
                        solve_lasso(&p, &x0, &lasso)
                    }
                });
            match result {
                Ok(report) => {
                    let mut row = row;
                    row.fill(&report, report.converged, setup);
                    row
                }
                Err(e) => row.failed(&e),
            }
        })
        .collect()
}

/// PARNES at `sigma_true`, then a tight FISTA reference at the matching
/// `lambda`, then every method under both stopping rules.
fn sweep_rows(
    name: BenchName,
    config: &BenchConfig,
    flags: &SolverFlags,
    inst: &Instance,
    bundle: &ProblemBundle,
    lipschitz: f64,
    setup: u64,
) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    let op = &bundle.op;
    let b = &bundle.b;
    let x0 = vec![0.0; inst.n];

    let own = BenchRow::new(name, inst, "parnes", "root").param("sigma", bundle.sigma_true);
    let solved = BpdnProblem::new(op, b, bundle.sigma_true, lipschitz)
        .and_then(|p| solve_bpdn_with(&p, &parnes_config(flags, config.eta), &mut NoObserver));
    let solution = match solved {
        Ok(s) => s,
        Err(e) => {
            rows.push(own.failed(&e));
            return rows;
        }
    };
    let mut own = own;
    own.fill(&solution.report, solution.report.converged, setup);

    let lambda = match lambda_from_dual(solution.last_point()) {
        Ok(l) => l,
        Err(e) => {
            rows.push(own);
            rows.push(BenchRow::new(name, inst, "fista-ref", "").failed(&e));
            return rows;
        }
    };
    let reference = match QpProblem::new(op, b, lambda, lipschitz).and_then(|q| reference_qp(&q)) {
        Ok(r) => r,
        Err(e) => {
            rows.push(own);
            rows.push(
                BenchRow::new(name, inst, "fista-ref", "")
                    .param("lambda", lambda)
                    .failed(&e),
            );
            return rows;
        }
    };
    let x_ref = &reference.x_ref;
    own.errors_against(&solution.report.x, x_ref);
    rows.push(own);

    let mut ref_row = BenchRow::new(name, inst, "fista-ref", "").param("lambda", lambda);
    ref_row.fill(&reference.report, reference.report.converged, setup);
    ref_row.errors_against(x_ref, x_ref);
    rows.push(ref_row);

    let stop_ref = match StopReference::from_point(op, b, x_ref) {
        Ok(r) => r,
        Err(e) => {
            rows.push(BenchRow::new(name, inst, "rules", "").failed(&e));
            return rows;
        }
    };

    for rule in [StopRule::Bp, StopRule::Qp { lambda }] {
        for method in &config.methods {
            let mut observer = StopRuleObserver::new(rule, stop_ref);
            let (row, result) = match method.as_str() {
                "parnes" => {
                    let pc = parnes_config(flags, config.rule_parnes_eta);
                    let row = BenchRow::new(name, inst, method, rule.name())
                        .param("sigma", stop_ref.residual_norm);
                    let result = BpdnProblem::new(op, b, stop_ref.residual_norm, lipschitz)
                        .and_then(|p| solve_bpdn_with(&p, &pc, &mut observer))
                        .map(|s| s.report);
                    (row, result)
                }
                "apg" => {
                    let lc = lasso_config(flags, config.rule_apg_eta);
                    let row = BenchRow::new(name, inst, method, rule.name())
                        .param("tau", stop_ref.x_norm1);
                    let result = LassoProblem::new(op, b, stop_ref.x_norm1, lipschitz)
                        .and_then(|p| apg_no_restart_with(&p, &x0, &lc, &mut observer))
                        .map(|s| s.report);
                    (row, result)
                }
                _ => {
                    let row =
                        BenchRow::new(name, inst, method, rule.name()).param("lambda", lambda);
                    let mut monitor = |x: &[f64], r: &[f64]| observer.check(x, r);
                    let result = QpProblem::new(op, b, lambda, lipschitz).and_then(|q| {
                        fista_qp_with(
                            &q,
                            &x0,
                            0.0,
                            usize::MAX,
                            config.max_matvec,
                            Some(&mut monitor),
                        )
                    });
                    (row, result)
                }
            };
            let row = match result {
                Ok(report) => {
                    let met = observer.triggered
                        || rule.satisfied(report.x_norm1, report.residual_norm, &stop_ref);
                    let mut row = row;
                    row.fill(&report, met, setup);
                    row.errors_against(&report.x, x_ref);
                    if !met && report.termination != Termination::BudgetExhausted {
                        row.note = "stopped before the rule held".into();
                    }
                    row
                }
                Err(e) => row.failed(&e),
            };
            rows.push(row);
        }
    }
    rows
}
