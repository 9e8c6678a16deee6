//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use grassflow::flows::{simulate, Model, SimConfig, State};
use grassflow::hierarchy::{block_field, closed_form_q, compute_hierarchy};
use grassflow::presets::soliton;
use grassflow::verify::{run_suite, Row, Status, Suite, VerifyConfig, VerifyReport, THREADS_ENV};
use grassflow::*;

struct Outcome {
    name: &'static str,
    checks: Vec<(String, bool)>,
}

impl Outcome {
    fn new(name: &'static str) -> Self {
        Outcome { name, checks: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn rows(&mut self, report: &VerifyReport, suite: Suite, ids: &[&str]) {
        for id in ids {
            let rows: Vec<&Row> = report.rows.iter().filter(|r| r.suite == suite && r.test_id == *id).collect();
            self.check(format!("{}/{id} present", suite.name()), !rows.is_empty());
            for r in rows {
                let label = format!("{}/{id}: {} = {:.3e} ({}) {}", suite.name(), r.quantity, r.value, r.bound, r.status);
                self.check(label, r.status != Status::Fail);
            }
        }
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn closed_forms_512(out: &mut Outcome) -> Result<()> {
    let grid = Grid::new(20.0, 512)?;
    let p = OrbitParams::new(2, 1)?;
    let u = soliton(&grid, &p);
    let (table, elapsed) = timed(|| compute_hierarchy(&u, &p, 3));
    let table = table?;
    let q = block_field(&u, &p);
    for j in 2..=3 {
        let d = table.q(j)?.distance(&closed_form_q(&q, &p, j)?)?;
        out.check(format!("N=512 Q{j} vs closed form = {d:.3e} (<=1e-7)"), d <= 1e-7);
    }
    out.check(format!("N=512 hierarchy runtime {:.3} s (<1 s)", elapsed.as_secs_f64()), elapsed < Duration::from_secs(1));
    Ok(())
}

fn mnls_runtime(out: &mut Outcome) -> Result<()> {
    let grid = Grid::new(20.0, 256)?;
    let p = OrbitParams::new(2, 1)?;
    let u = State::Field(soliton(&grid, &p));
    let sim = SimConfig { t_final: 1.0, dt: 2e-4, log_every: 500 };
    let (traj, elapsed) = timed(|| simulate(Model::Mnls, &u, &sim, Some(&p)));
    out.check("MNLS simulation finite", traj?.states.iter().all(State::is_finite));
    out.check(format!("MNLS runtime {:.2} s (<30 s)", elapsed.as_secs_f64()), elapsed < Duration::from_secs(30));
    Ok(())
}

fn main() -> ExitCode {
    let cfg = VerifyConfig::default();
    let (first, elapsed) = timed(|| run_suite(Suite::All, &cfg));
    let first = first.expect("verify all runs");
    std::env::set_var(THREADS_ENV, "1");
    let second = run_suite(Suite::All, &cfg).expect("verify all runs");
    std::env::remove_var(THREADS_ENV);

    let mut outcomes = Vec::new();

    let mut c = Outcome::new("hierarchy closed forms");
    c.rows(&first, Suite::Hierarchy, &["closed-forms-sech", "closed-forms-n3"]);
    if let Err(e) = closed_forms_512(&mut c) {
        c.check(format!("N=512 run: {e}"), false);
    }
    outcomes.push(c);

    let mut c = Outcome::new("vacuum");
    c.rows(&first, Suite::Hierarchy, &["vacuum"]);
    c.rows(&first, Suite::Gauge, &["vacuum-fixed"]);
    c.rows(&first, Suite::Lax, &["mnls-vacuum"]);
    outcomes.push(c);

    let mut c = Outcome::new("matrix NLS exact solution");
    c.rows(&first, Suite::Gauge, &["mnls-exact"]);
    if let Err(e) = mnls_runtime(&mut c) {
        c.check(format!("MNLS run: {e}"), false);
    }
    outcomes.push(c);

    let mut c = Outcome::new("gauge equivalence");
    c.rows(&first, Suite::Gauge, &["gauge-equivalence"]);
    outcomes.push(c);

    let mut c = Outcome::new("development round trips");
    c.rows(&first, Suite::Roundtrip, &["n2k1", "n3k1", "n4k2"]);
    let fields = first.rows.iter().filter(|r| r.suite == Suite::Roundtrip && r.test_id == "n2k1").count() / 2;
    c.check(format!("{fields} fields per orbit (>=6)"), fields >= 6);
    outcomes.push(c);

    let mut c = Outcome::new("differential of development");
    c.rows(&first, Suite::Roundtrip, &["dphi"]);
    let dirs = first.rows.iter().filter(|r| r.test_id == "dphi").count();
    c.check(format!("{dirs} directions (>=10)"), dirs >= 10);
    outcomes.push(c);

    let mut c = Outcome::new("gradients");
    c.rows(&first, Suite::Gradients, &["field-side", "path-side"]);
    outcomes.push(c);

    let mut c = Outcome::new("pullback of symplectic forms");
    c.rows(&first, Suite::Pullback, &["k0", "k-1"]);
    outcomes.push(c);

    let mut c = Outcome::new("Lenard relation");
    c.rows(&first, Suite::Lenard, &["lenard", "pu-identity"]);
    outcomes.push(c);

    let mut c = Outcome::new("zero curvature");
    c.rows(&first, Suite::Lax, &["mnls-soliton", "mnls-perturbed", "gnls-lifted", "kdv-wave"]);
    outcomes.push(c);

    let mut c = Outcome::new("KdV operators");
    c.rows(&first, Suite::Kdv, &["derivation", "skew-adjoint", "reality"]);
    c.rows(&first, Suite::Gauge, &["kdv-travelling"]);
    outcomes.push(c);

    let mut c = Outcome::new("geometric flows");
    c.rows(&first, Suite::Lax, &["gnls-geometric-form"]);
    c.rows(&first, Suite::Hierarchy, &["geometric-flows"]);
    outcomes.push(c);

    let mut c = Outcome::new("full verify run");
    c.check(format!("verify all runtime {:.1} s (<300 s)", elapsed.as_secs_f64()), elapsed < Duration::from_secs(300));
    match (first.to_csv(), second.to_csv()) {
        (Ok(a), Ok(b)) => c.check("reports byte-identical across runs and thread counts", a == b),
        (Err(e), _) | (_, Err(e)) => c.check(format!("report serialization: {e}"), false),
    }
    outcomes.push(c);

    let mut failed = 0;
    for (i, o) in outcomes.iter().enumerate() {
        let status = if o.passed() { "PASS" } else { "FAIL" };
        println!("criterion {:>2}  {:<32} {status}", i + 1, o.name);
        for (what, ok) in &o.checks {
            if !ok {
                println!("              failed: {what}");
            }
        }
        failed += usize::from(!o.passed());
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
