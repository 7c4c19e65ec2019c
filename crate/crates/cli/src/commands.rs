//! The five subcommands. Each writes CSV files into the output directory.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nehari_core::experiment::{run_sweep, SolveStatus, SweepContext, SweepRow};
use nehari_core::fiber::{classify, random_direction, sample_sign_sets, FiberMap};
use nehari_core::nehari::{check_proximity, minimize_branch};
use nehari_core::oracle::{dense_eigen_p2, run_suite, OracleReport, SuiteOptions};
use nehari_core::{
    principal_eigenpair, subdomain_eigen, EigenOptions, EigenResult, Error, Execution, Grid, GridFunction,
    NehariOptions, Problem, WeightTable,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{FiberSource, RunConfig};
use crate::CliError;

pub const DEFAULT_SEED: u64 = 20240611;
pub const FIBER_POINTS: usize = 200;
pub const SAMPLER_COUNT: usize = 200;

/// Everything a command needs after the config is loaded.
pub struct Run {
    pub config: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub allow_near_lambda1: bool,
    pub execution: Execution,
}

struct Setup {
    table: Arc<WeightTable>,
    eig: EigenResult,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl Run {
    fn setup(&self) -> Result<Setup, CliError> {
        let grid = Grid::new(self.config.n).map_err(|e| CliError::Config(e.to_string()))?;
        let table = WeightTable::assemble(grid, self.config.kernel()?).with_execution(self.execution);
        let eig = principal_eigenpair(&table, &EigenOptions::default())?;
        Ok(Setup { table: Arc::new(table), eig })
    }

    fn problem(&self, s: &Setup, lambda: f64) -> Result<Problem, CliError> {
        Ok(Problem::new(self.config.params(lambda)?, self.config.weight()?, s.table.clone())?)
    }

    fn nehari_options(&self, s: &Setup) -> NehariOptions {
        let d = NehariOptions::default();
        NehariOptions {
            tol: self.config.tol.unwrap_or(d.tol),
            max_iter: self.config.max_iter.unwrap_or(d.max_iter),
            phi1: Some(s.eig.phi1.clone()),
            ..d
        }
    }

    fn lambdas(&self, s: &Setup) -> Result<Vec<f64>, CliError> {
        let lambdas = self.config.lambdas(s.eig.lambda1)?;
        for &l in &lambdas {
            check_proximity(l, s.eig.lambda1, self.allow_near_lambda1).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(lambdas)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// `eigen.csv` with `λ₁` (and `λ_b`, and the dense value for small `p = 2`
    /// grids), `phi1.csv` with nodal values.
    pub fn eigen(&self) -> Result<(), CliError> {
        let s = self.setup()?;
        let mut rows = vec![
            vec!["lambda1".into(), num(s.eig.lambda1)],
            vec!["lambda1_iterations".into(), s.eig.iterations.to_string()],
            vec!["lambda1_residual".into(), num(s.eig.residual)],
        ];
        let weight = self.config.weight()?;
        if weight.is_sign_changing() {
            match subdomain_eigen(&s.table, &weight, &EigenOptions::default()) {
                Ok(sub) => rows.push(vec!["lambda_b".into(), num(sub.lambda1)]),
                Err(Error::Precondition(m)) => eprintln!("lambda_b skipped: {m}"),
                Err(e) => return Err(e.into()),
            }
        }
        if self.config.p == 2.0 && self.config.n <= 6 {
            rows.push(vec!["lambda1_dense".into(), num(dense_eigen_p2(&s.table)?)]);
        }
        write_rows(&self.path("eigen.csv"), &["quantity", "value"], &rows)?;
        write_rows(&self.path("phi1.csv"), &["x", "phi1"], &nodal_rows(&s.eig.phi1))
    }

    /// One `solution_<k>_<branch>.csv` per `(λ, branch)`, plus `solve_summary.csv`.
    pub fn solve(&self) -> Result<(), CliError> {
        let s = self.setup()?;
        let opts = self.nehari_options(&s);
        let mut summary = Vec::new();
        let mut worst: Option<CliError> = None;
        for (k, &lambda) in self.lambdas(&s)?.iter().enumerate() {
            let problem = self.problem(&s, lambda)?;
            for branch in self.config.branches() {
                let tag = if branch == nehari_core::Branch::NPlus { "plus" } else { "minus" };
                let (sol, status) = match minimize_branch(&problem, branch, &s.eig.phi1, &opts) {
                    Ok(sol) => (Some(sol), SolveStatus::Converged),
                    Err(Error::BranchNotConverged { best, .. }) => (Some(*best), SolveStatus::NotConverged),
                    Err(e @ (Error::BranchEmpty(_) | Error::Unbounded(_))) => {
                        let status = match e {
                            Error::BranchEmpty(_) => SolveStatus::BranchEmpty,
                            _ => SolveStatus::Unbounded,
                        };
                        eprintln!("lambda = {lambda}, {branch}: {e}");
                        (None, status)
                    }
                    Err(e) => return Err(e.into()),
                };
                let file = format!("solution_{k}_{tag}.csv");
                let mut row = vec![num(lambda), branch.to_string(), status.as_str().into()];
                match &sol {
                    Some(sol) => {
                        write_rows(&self.path(&file), &["x", "u"], &nodal_rows(&sol.u))?;
                        row.extend([
                            num(sol.j_value),
                            num(sol.seminorm_p.powf(1.0 / self.config.p)),
                            num(sol.nehari_residual),
                            num(sol.grad_residual),
                            num(sol.min_node_value),
                            sol.iterations.to_string(),
                            file,
                        ]);
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 7)),
                }
                summary.push(row);
                let err = match status {
                    SolveStatus::Converged => None,
                    SolveStatus::BranchEmpty => Some(CliError::BranchEmpty(format!("lambda = {lambda}, {branch}"))),
                    _ => Some(CliError::NotConverged(format!("lambda = {lambda}, {branch}: {}", status.as_str()))),
                };
                worst = match (worst, err) {
                    (Some(a), Some(b)) => Some(if b.code() > a.code() { b } else { a }),
                    (a, b) => a.or(b),
                };
            }
        }
        write_rows(
            &self.path("solve_summary.csv"),
            &[
                "lambda",
                "branch",
                "status",
                "j",
                "u_norm",
                "nehari_residual",
                "grad_residual",
                "min_node",
                "iterations",
                "file",
            ],
            &summary,
        )?;
        worst.map_or(Ok(()), Err)
    }

    /// `sweep.csv`, one row per `(λ, branch)` in input order.
    pub fn sweep(&self) -> Result<(), CliError> {
        let s = self.setup()?;
        let lambdas = self.lambdas(&s)?;
        let ctx = SweepContext {
            problem: self.problem(&s, lambdas[0])?,
            phi1: s.eig.phi1.clone(),
            lambda1: s.eig.lambda1,
            opts: self.nehari_options(&s),
            allow_near_lambda1: self.allow_near_lambda1,
        };
        let rows = run_sweep(&ctx, &lambdas, &self.config.branches(), self.execution)?;
        write_rows(
            &self.path("sweep.csv"),
            &[
                "lambda",
                "lambda_over_lambda1",
                "branch",
                "status",
                "j_inf",
                "closed_form_j",
                "u_norm",
                "lp_norm",
                "b_integral",
                "angle_to_phi1",
                "iterations",
                "converged",
                "nehari_residual",
                "grad_residual",
            ],
            &rows.iter().map(|r| sweep_record(r, s.eig.lambda1)).collect::<Vec<_>>(),
        )?;
        if rows.iter().any(|r| r.status == SolveStatus::NotConverged) {
            return Err(CliError::NotConverged("at least one sweep row did not converge".into()));
        }
        Ok(())
    }

    /// `fiber.csv` on a geometric `t` grid centered at `t*` (or at 1), and
    /// `fiber_summary.csv` with the case analysis and the sign-set sampler.
    /// Uses the first `λ`.
    pub fn fiber_dump(&self) -> Result<(), CliError> {
        let s = self.setup()?;
        let lambda = self.lambdas(&s)?[0];
        let problem = self.problem(&s, lambda)?;
        let u = match &self.config.fiber.source {
            FiberSource::Phi1 => s.eig.phi1.clone(),
            FiberSource::Random => random_direction(&problem, &mut ChaCha8Rng::seed_from_u64(self.seed), 12),
            FiberSource::Subdomain => subdomain_eigen(&s.table, problem.b(), &EigenOptions::default())?.phi1,
            FiberSource::Values(v) => {
                GridFunction::new(problem.grid().clone(), v.clone()).map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        if u.is_zero() {
            return Err(CliError::Config("fiber source is the zero function".into()));
        }
        let map = FiberMap::new(&problem, &u)?;
        let d = classify(&problem, &u)?;
        let center = d.t_star.unwrap_or(1.0);
        let decades = self.config.fiber.decades;
        let ts: Vec<f64> = (0..FIBER_POINTS)
            .map(|k| center * 10f64.powf(decades * (2.0 * k as f64 / (FIBER_POINTS - 1) as f64 - 1.0)))
            .collect();
        let nearest = d
            .t_star
            .map(|t| (0..ts.len()).min_by(|&a, &b| (ts[a] / t).ln().abs().total_cmp(&(ts[b] / t).ln().abs())).unwrap());
        let rows: Vec<Vec<String>> = ts
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let mark = if Some(k) == nearest { "1" } else { "0" };
                vec![num(t), num(map.value(t)), num(map.d1(t)), num(map.d2(t)), mark.into()]
            })
            .collect();
        write_rows(&self.path("fiber.csv"), &["t", "phi", "phi_d1", "phi_d2", "is_t_star"], &rows)?;
        let mut summary = vec![
            vec!["lambda".into(), num(lambda)],
            vec!["e".into(), num(map.e())],
            vec!["b".into(), num(map.b())],
            vec!["e_sign".into(), d.e_sign.as_str().into()],
            vec!["b_sign".into(), d.b_sign.as_str().into()],
            vec!["case".into(), d.case_id.map(|c| c.to_string()).unwrap_or_default()],
            vec!["t_star".into(), opt(d.t_star)],
            vec!["branch".into(), d.target_branch.map(|b| b.to_string()).unwrap_or_default()],
            vec!["j_at_t_star".into(), opt(map.critical_value().ok())],
        ];
        let sampler = sample_sign_sets(&problem, std::slice::from_ref(&s.eig.phi1), SAMPLER_COUNT, self.seed);
        summary.extend([
            vec!["sampler_directions".into(), sampler.samples.to_string()],
            vec!["sampler_e_minus".into(), sampler.e_minus.to_string()],
            vec!["sampler_e_minus_b_nonneg".into(), sampler.e_minus_b_nonneg.to_string()],
            vec!["lambda0_estimate".into(), opt(sampler.lambda0_estimate)],
            vec!["delta2_estimate".into(), opt(sampler.delta2_estimate)],
        ]);
        write_rows(&self.path("fiber_summary.csv"), &["quantity", "value"], &summary)
    }

    /// `check.csv` with one row per oracle report; fails when any report fails.
    pub fn check(&self) -> Result<(), CliError> {
        let reports = run_suite(&SuiteOptions { seed: self.seed, execution: self.execution });
        for r in &reports {
            println!("{}", report_line(r));
        }
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    num(r.max_rel_error),
                    num(r.tolerance),
                    r.samples.to_string(),
                    if r.passed { "PASS" } else { "FAIL" }.into(),
                ]
            })
            .collect();
        write_rows(&self.path("check.csv"), &["name", "max_rel_error", "tolerance", "samples", "result"], &rows)?;
        let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Oracle(failed.join(", ")))
        }
    }
}

pub fn report_line(r: &OracleReport) -> String {
    format!(
        "{} {} max_rel_error={:e} tolerance={:e} samples={}",
        if r.passed { "PASS" } else { "FAIL" },
        r.name,
        r.max_rel_error,
        r.tolerance,
        r.samples
    )
}

fn nodal_rows(u: &GridFunction) -> Vec<Vec<String>> {
    u.grid().nodes().iter().zip(u.values()).map(|(x, v)| vec![num(*x), num(*v)]).collect()
}

fn sweep_record(r: &SweepRow, lambda1: f64) -> Vec<String> {
    vec![
        num(r.lambda),
        num(r.lambda / lambda1),
        r.branch.to_string(),
        r.status.as_str().into(),
        num(r.j_inf),
        opt(r.closed_form),
        num(r.u_norm),
        num(r.lp_norm),
        num(r.b_integral),
        num(r.angle_to_phi1),
        r.iterations.to_string(),
        (r.status == SolveStatus::Converged).to_string(),
        num(r.nehari_residual),
        num(r.grad_residual),
    ]
}
