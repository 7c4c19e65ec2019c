//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nehari_core::eigen::rayleigh_quotient;
use nehari_core::experiment::{lambda_ladder, run_sweep, SolveStatus, SweepContext, SweepRow};
use nehari_core::fiber::{random_direction, sample_sign_sets, FiberMap};
use nehari_core::grid::{interpolate, lp_values};
use nehari_core::nehari::{
    contrast_floor, solve_two_branches, unbounded_witness, vanishing_infimum_witness, BranchSolution,
};
use nehari_core::oracle::{self, OracleReport, SuiteOptions};
use nehari_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 64;
const SEED: u64 = 20240611;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

struct Setup {
    kernel: KernelSpec,
    table: Arc<WeightTable>,
    eig: EigenResult,
}

impl Setup {
    fn new() -> Setup {
        let kernel = KernelSpec::model(2.0, 0.25).unwrap();
        let table = Arc::new(WeightTable::assemble(Grid::new(N).unwrap(), kernel));
        let eig = principal_eigenpair(&table, &EigenOptions::default()).unwrap();
        Setup { kernel, table, eig }
    }

    fn problem(&self, beta: f64, b: BWeight, lambda: f64) -> Problem {
        Problem::new(ProblemParams::new(self.kernel, beta, lambda).unwrap(), b, self.table.clone()).unwrap()
    }

    fn context(&self, beta: f64, b: BWeight) -> SweepContext {
        SweepContext {
            problem: self.problem(beta, b, 0.0),
            phi1: self.eig.phi1.clone(),
            lambda1: self.eig.lambda1,
            opts: NehariOptions::default(),
            allow_near_lambda1: false,
        }
    }
}

fn reports_outcome(reports: &[OracleReport], elapsed: Duration, budget: Duration) -> Outcome {
    let worst = reports
        .iter()
        .map(|r| format!("{} err {:.2e} (tol {:.0e})", r.name, r.max_rel_error, r.tolerance))
        .collect::<Vec<_>>()
        .join("; ");
    let passed = reports.iter().all(|r| r.passed) && elapsed < budget;
    Outcome::new(passed, format!("{worst}; {:.2}s of {}s", elapsed.as_secs_f64(), budget.as_secs()))
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let reports = oracle::check_gradients(SEED, &[(2.0, 0.25, 1.5), (2.0, 0.25, 3.0), (3.0, 0.2, 2.0)])
        .unwrap_or_else(|e| vec![OracleReport::new(format!("fd_gradients: {e}"), f64::INFINITY, 1e-5, 0)]);
    reports_outcome(&reports, t0.elapsed(), Duration::from_secs(10))
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let report = oracle::check_dense_eigen()
        .unwrap_or_else(|e| OracleReport::new(format!("dense_eigen_p2: {e}"), f64::INFINITY, 1e-8, 0));
    reports_outcome(&[report], t0.elapsed(), Duration::from_secs(5))
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut reports = Vec::new();
    for (seed, beta) in [(SEED, 1.5), (SEED + 1, 3.0)] {
        match oracle::check_t_star(seed, beta, 50) {
            Ok(r) => reports.extend(r),
            Err(e) => reports.push(OracleReport::new(format!("t_scan: {e}"), f64::INFINITY, 1e-3, 0)),
        }
    }
    let enough = reports.iter().all(|r| r.samples == 50);
    let mut out = reports_outcome(&reports, t0.elapsed(), Duration::from_secs(60));
    out.passed &= enough;
    out
}

/// Solutions gathered from the sweeps, with the problem each one solves.
struct Accepted {
    problem: Problem,
    solution: BranchSolution,
}

fn collect(ctx: &SweepContext, rows: &[SweepRow], into: &mut Vec<Accepted>) {
    for r in rows {
        if let (SolveStatus::Converged, Some(sol)) = (r.status, &r.solution) {
            into.push(Accepted { problem: ctx.problem.with_lambda(r.lambda).unwrap(), solution: sol.clone() });
        }
    }
}

fn criterion_4(accepted: &[Accepted]) -> Outcome {
    let mut worst = [0.0f64; 4];
    let mut ok = !accepted.is_empty();
    for a in accepted {
        let (pr, sol) = (&a.problem, &a.solution);
        let params = pr.params();
        let report = pr.report(&sol.u).unwrap();
        let manifold = (report.e_lambda - report.b_term).abs() / report.seminorm_p;
        let expect = params.nehari_factor() * report.b_term;
        let j = pr.j_plus(&sol.u).unwrap();
        let identity = (j - expect).abs() / expect.abs();
        let min_node = sol.u.min_value();
        let grad = pr.grad_j(&sol.u).unwrap();
        let scale = report.seminorm_p.powf((params.p() - 1.0) / params.p()).max(1.0);
        let weak = grad.max_abs() / scale;
        worst[0] = worst[0].max(manifold);
        worst[1] = worst[1].max(identity);
        worst[2] = worst[2].min(min_node);
        worst[3] = worst[3].max(weak);
        ok &= manifold <= 1e-8 && identity <= 1e-8 && min_node >= -1e-10 && weak <= 1e-6;
    }
    Outcome::new(
        ok,
        format!(
            "{} solutions; manifold {:.2e}, J identity {:.2e}, min node {:.2e}, weak {:.2e}",
            accepted.len(),
            worst[0],
            worst[1],
            worst[2],
            worst[3]
        ),
    )
}

fn all_converged(rows: &[SweepRow]) -> bool {
    rows.iter().all(|r| r.status == SolveStatus::Converged)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn criterion_5(s: &Setup, accepted: &mut Vec<Accepted>) -> Outcome {
    let t0 = Instant::now();
    let ctx = s.context(1.5, BWeight::PosCore { c: 0.2 });
    let lambdas = lambda_ladder(s.eig.lambda1, false, &[1, 2, 3]);
    let rows = match run_sweep(&ctx, &lambdas, &[Branch::NPlus], Execution::Parallel) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("sweep failed: {e}")),
    };
    collect(&ctx, &rows, accepted);
    let j: Vec<f64> = rows.iter().map(|r| r.j_inf).collect();
    let cf: Vec<f64> = rows.iter().map(|r| r.closed_form.unwrap_or(f64::NAN)).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.u_norm).collect();
    let gaps: Vec<f64> = lambdas.iter().map(|l| s.eig.lambda1 - l).collect();
    let k = slope(&gaps, &cf);
    let target = -1.5 / (2.0 - 1.5);
    let below_cf = j.iter().zip(&cf).all(|(j, c)| *j <= c + 1e-6);
    let elapsed = t0.elapsed();
    let ok = all_converged(&rows)
        && strictly(&j, false)
        && below_cf
        && ((k - target) / target).abs() <= 0.05
        && strictly(&norms, true)
        && elapsed < Duration::from_secs(300);
    Outcome::new(
        ok,
        format!(
            "J {:?}, closed form {:?}, slope {k:.4} vs {target}, norms {:?}; {:.2}s",
            short(&j),
            short(&cf),
            short(&norms),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6(s: &Setup, accepted: &mut Vec<Accepted>) -> Outcome {
    let b = BWeight::NegCore { c: 0.3 };
    let ctx = s.context(1.5, b.clone());
    let lambdas = lambda_ladder(s.eig.lambda1, true, &[1, 2]);
    let rows = match run_sweep(&ctx, &lambdas, &[Branch::NMinus], Execution::Parallel) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("sweep failed: {e}")),
    };
    collect(&ctx, &rows, accepted);
    let j_minus: Vec<f64> = rows.iter().map(|r| r.j_inf).collect();
    let mut ok = all_converged(&rows) && strictly(&j_minus, true);
    let mut pairs = Vec::new();
    for &lambda in &lambdas {
        let pr = s.problem(1.5, b.clone(), lambda);
        match solve_two_branches(&pr, &s.eig.phi1, s.eig.lambda1, &NehariOptions::default(), false) {
            Ok((plus, minus)) => {
                ok &= plus.j_value < 0.0 && minus.j_value > 0.0;
                ok &= plus.min_node_value >= -1e-10 && minus.min_node_value >= -1e-10;
                pairs.push((plus.j_value, minus.j_value));
                accepted.push(Accepted { problem: pr.clone(), solution: plus });
                accepted.push(Accepted { problem: pr, solution: minus });
            }
            Err(e) => {
                ok = false;
                pairs.push((f64::NAN, f64::NAN));
                eprintln!("two-branch solve at lambda = {lambda}: {e}");
            }
        }
    }
    Outcome::new(ok, format!("inf J on N- {:?}; (J(N+), J(N-)) {:?}", short(&j_minus), pairs))
}

fn criterion_7(s: &Setup, accepted: &mut Vec<Accepted>) -> Outcome {
    let ctx = s.context(3.0, BWeight::PosCore { c: 0.2 });
    let lambdas = lambda_ladder(s.eig.lambda1, false, &[1, 2, 3]);
    let rows = match run_sweep(&ctx, &lambdas, &[Branch::NMinus], Execution::Parallel) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("sweep failed: {e}")),
    };
    collect(&ctx, &rows, accepted);
    let j: Vec<f64> = rows.iter().map(|r| r.j_inf).collect();
    let cf: Vec<f64> = rows.iter().map(|r| r.closed_form.unwrap_or(f64::NAN)).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.u_norm).collect();
    let gaps: Vec<f64> = lambdas.iter().map(|l| s.eig.lambda1 - l).collect();
    let k = slope(&gaps, &cf);
    let target = 3.0 / (3.0 - 2.0);
    let ok = all_converged(&rows)
        && strictly(&j, false)
        && j.iter().all(|v| *v > 0.0)
        && ((k - target) / target).abs() <= 0.05
        && strictly(&norms, false);
    Outcome::new(ok, format!("J {:?}, slope {k:.4} vs {target}, norms {:?}", short(&j), short(&norms)))
}

fn criterion_8(s: &Setup, accepted: &mut Vec<Accepted>) -> Outcome {
    let ctx = s.context(3.0, BWeight::NegCore { c: 0.3 });
    let lambdas = lambda_ladder(s.eig.lambda1, true, &[1, 2, 3]);
    let rows = match run_sweep(&ctx, &lambdas, &[Branch::NPlus], Execution::Parallel) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("sweep failed: {e}")),
    };
    collect(&ctx, &rows, accepted);
    let norms: Vec<f64> = rows.iter().map(|r| r.u_norm).collect();
    let angles: Vec<f64> = rows.iter().map(|r| r.angle_to_phi1).collect();
    let ok = all_converged(&rows)
        && strictly(&norms, false)
        && strictly(&angles, false)
        && angles.last().is_some_and(|a| *a <= 0.05);
    Outcome::new(ok, format!("norms {:?}, angles {:?}", short(&norms), short(&angles)))
}

fn criterion_9(s: &Setup) -> Outcome {
    let b = BWeight::PosCore { c: 0.2 };
    let above = s.problem(3.0, b.clone(), 1.05 * s.eig.lambda1);
    let witness = match vanishing_infimum_witness(&above, std::slice::from_ref(&s.eig.phi1), 1e-2, 5) {
        Ok(w) => w,
        Err(e) => return Outcome::new(false, format!("witness failed: {e}")),
    };
    let last = witness.points.last().map_or(f64::NAN, |p| p.j);
    let positive = witness.points.iter().all(|p| p.j > 0.0);
    let below = s.problem(3.0, b, 0.9 * s.eig.lambda1);
    let contrast = match contrast_floor(&below, &s.eig.phi1, 200, SEED, &NehariOptions::default()) {
        Ok(c) => c,
        Err(e) => return Outcome::new(false, format!("contrast failed: {e}")),
    };
    let ok = last < 1e-2
        && positive
        && contrast.floor > 0.0
        && contrast.samples > 0
        && contrast.min_sampled >= contrast.floor * (1.0 - 1e-9);
    Outcome::new(
        ok,
        format!(
            "witness J {:?}; contrast floor {:.4e}, min of {} samples {:.4e}",
            short(&witness.j_values()),
            contrast.floor,
            contrast.samples,
            contrast.min_sampled
        ),
    )
}

fn criterion_10(s: &Setup) -> Outcome {
    let b = BWeight::PosCore { c: 0.2 };
    let sub = match subdomain_eigen(&s.table, &b, &EigenOptions::default()) {
        Ok(e) => e,
        Err(e) => return Outcome::new(false, format!("subdomain eigenvalue failed: {e}")),
    };
    let scenarios = [
        ("sublinear phi1", 1.5, 1.1 * s.eig.lambda1, s.eig.phi1.clone()),
        ("superlinear phi1, large lambda", 3.0, 1.1 * sub.lambda1, s.eig.phi1.clone()),
        ("sublinear lambda_b", 1.5, 1.1 * sub.lambda1, sub.phi1.clone()),
        ("superlinear lambda_b", 3.0, 1.1 * sub.lambda1, sub.phi1.clone()),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, beta, lambda, seed) in scenarios {
        let pr = s.problem(beta, b.clone(), lambda);
        match unbounded_witness(&pr, &[seed], 5) {
            Ok(w) => {
                let good = w.points.len() >= 5 && w.strictly_decreasing();
                ok &= good;
                details.push(format!("{name}: {:?}", short(&w.j_values())));
            }
            Err(e) => {
                ok = false;
                details.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome::new(ok, format!("lambda_b {:.6}; {}", sub.lambda1, details.join("; ")))
}

fn criterion_11(s: &Setup) -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let pr = s.problem(1.5, BWeight::Cosine { c0: 0.1, c1: 1.0 }, 0.5 * s.eig.lambda1);
    let p = pr.params().p();
    let beta = pr.params().beta;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    for _ in 0..10 {
        let u = random_direction(&pr, &mut rng, 10);
        for c in [0.37, 2.5, -1.7] {
            let v = u.scaled(c);
            let ru = pr.report(&u).unwrap();
            let rv = pr.report(&v).unwrap();
            worst = worst.max(rel(rv.seminorm_p, c.abs().powf(p) * ru.seminorm_p));
            worst = worst.max(rel(rv.lp_p, c.abs().powf(p) * ru.lp_p));
            worst = worst.max(rel(rv.b_term, c.abs().powf(beta) * ru.b_term));
            worst = worst.max(rel(rayleigh_quotient(&s.table, &v).unwrap(), rayleigh_quotient(&s.table, &u).unwrap()));
            let (mu, mv) = (FiberMap::new(&pr, &u).unwrap(), FiberMap::new(&pr, &v).unwrap());
            if let (Ok(tu), Ok(tv)) = (mu.t_star(), mv.t_star()) {
                worst = worst.max(rel(tv * c.abs(), tu));
            }
        }
        let l = lp_values(pr.grid(), u.values(), p);
        worst = worst.max(rel(lp_values(pr.grid(), u.scaled(3.0).values(), p), 3f64.powf(p) * l));
    }
    // Determinism: seeded runs repeat bit for bit, in both execution modes.
    let run = |exec: Execution| {
        let suite = oracle::check_t_star(SEED, 1.5, 10).unwrap();
        let sampler = sample_sign_sets(&pr, std::slice::from_ref(&s.eig.phi1), 50, SEED);
        let ctx = s.context(1.5, BWeight::PosCore { c: 0.2 });
        let rows = run_sweep(&ctx, &lambda_ladder(s.eig.lambda1, false, &[1, 2]), &[Branch::NPlus], exec).unwrap();
        let table = WeightTable::assemble(s.table.grid().clone(), s.kernel).with_execution(exec);
        let u = interpolate(s.table.grid(), |x| (1.0 - x * x) * (1.0 + 0.3 * x)).unwrap();
        let (sn, grad) = table.seminorm_grad_values(u.values());
        let mut bits: Vec<u64> = suite.iter().map(|r| r.max_rel_error.to_bits()).collect();
        bits.extend(rows.iter().flat_map(|r| r.solution.as_ref().unwrap().u.values().iter().map(|v| v.to_bits())));
        bits.push(sn.to_bits());
        bits.extend(grad.iter().map(|g| g.to_bits()));
        (bits, format!("{sampler:?}"))
    };
    let first = run(Execution::Parallel);
    let again = run(Execution::Parallel);
    let sequential = run(Execution::Sequential);
    let identical = first == again && first == sequential;
    Outcome::new(
        worst <= 1e-12 && identical,
        format!("max homogeneity error {worst:.2e}; repeated and sequential runs identical: {identical}"),
    )
}

fn short(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.4e}")).collect()
}

fn main() {
    let t0 = Instant::now();
    let s = Setup::new();
    let mut accepted = Vec::new();
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (5, criterion_5(&s, &mut accepted)),
        (6, criterion_6(&s, &mut accepted)),
        (7, criterion_7(&s, &mut accepted)),
        (8, criterion_8(&s, &mut accepted)),
        // Runs after the sweeps that fill `accepted`.
        (4, criterion_4(&accepted)),
        (9, criterion_9(&s)),
        (10, criterion_10(&s)),
        (11, criterion_11(&s)),
    ];
    results.sort_by_key(|(k, _)| *k);
    let suite = oracle::run_suite(&SuiteOptions { seed: SEED, execution: Execution::Parallel });
    let mut failed = 0;
    for (k, o) in &results {
        println!("criterion {k:>2}: {} | {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    let suite_ok = suite.iter().all(|r| r.passed);
    println!("oracle suite: {} | {} checks", if suite_ok { "PASS" } else { "FAIL" }, suite.len());
    println!("acceptance finished in {:.1}s", t0.elapsed().as_secs_f64());
    if failed > 0 || !suite_ok {
        std::process::exit(1);
    }
}
