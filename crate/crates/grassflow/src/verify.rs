//! Verification suites: every identity as a row of a CSV report.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::development::{d_phi, develop, energy, grad_h, rotate_path, rotation_tangent, undevelop};
use crate::error::{Error, Result};
use crate::field::{Grid, MatrixField, ScalarField};
use crate::flows::{
    self, cross_check_geometric_flows, curvature, gauge_lift, gnls_geometric, gnls_lambda2_defect, gnls_rhs,
    mnls_rhs_signed, simulate, Model, SimConfig, State,
};
use crate::hierarchy::{block_field, closed_form_q, compute_hierarchy, offblock_field, RECURSION_TOL};
use crate::io::csv_error;
use crate::kdv::{derivation_residuals, j_1, j_minus1, kdv_lax_fields, reality_residual};
use crate::lie::{OrbitParams, C64};
use crate::presets::{gaussian_block, kdv_wave, random_perp_bump, random_scalar_bump, random_skew_bump, soliton};
use crate::symplectic::{constrained_combinations, constraint_residuals, l_gamma, p_u, pullback_check, tau_k, w_k};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "GRASSFLOW_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Lax,
    Gauge,
    Roundtrip,
    Hierarchy,
    Gradients,
    Pullback,
    Lenard,
    Kdv,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Lax,
        Suite::Gauge,
        Suite::Roundtrip,
        Suite::Hierarchy,
        Suite::Gradients,
        Suite::Pullback,
        Suite::Lenard,
        Suite::Kdv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lax => "lax",
            Suite::Gauge => "gauge",
            Suite::Roundtrip => "roundtrip",
            Suite::Hierarchy => "hierarchy",
            Suite::Gradients => "gradients",
            Suite::Pullback => "pullback",
            Suite::Lenard => "lenard",
            Suite::Kdv => "kdv",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown suite `{s}`")))
    }
}

/// Suite configuration, read from TOML. Every key is optional.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Half-width `L` of the grid.
    pub half_width: f64,
    /// Grid size `N`.
    pub len: usize,
    pub seed: u64,
    /// Sign in front of the matrix NLS right-hand side used by the lax suite.
    pub mnls_sign: f64,
    /// Spectral parameters; one seeded random value is appended.
    pub lambdas: Vec<f64>,
    pub directions: usize,
    pub tangent_pairs: usize,
    pub gaussian_seeds: usize,
    pub kdv_pairs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            half_width: 20.0,
            len: 256,
            seed: 42,
            mnls_sign: 1.0,
            lambdas: vec![0.5, 1.0, 2.0],
            directions: 10,
            tangent_pairs: 20,
            gaussian_seeds: 5,
            kdv_pairs: 10,
        }
    }
}

impl VerifyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| {
                    let before = &text[..s.start.min(text.len())];
                    (before.lines().count().max(1), before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1)
                })
                .unwrap_or((1, 1));
            Error::Parse { line, column, message: e.message().to_string() }
        })
    }

    fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_width, self.len)
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    /// Configured spectral parameters plus one seeded random value.
    pub fn lambda_set(&self) -> Vec<f64> {
        let mut out = self.lambdas.clone();
        out.push(self.rng(0x1a).random_range(0.25..3.0));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    PassWithWarning,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::PassWithWarning => "PASS-WITH-WARNING",
            Status::Fail => "FAIL",
        })
    }
}

/// Acceptance rule of a row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    /// Recorded, never failed.
    Report,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(t) => write!(f, "<={t:e}"),
            Bound::AtLeast(t) => write!(f, ">={t:e}"),
            Bound::Report => f.write_str("report"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub suite: Suite,
    pub test_id: String,
    pub quantity: String,
    pub value: f64,
    pub bound: Bound,
    pub status: Status,
    pub notes: String,
}

impl Row {
    fn new(suite: Suite, test_id: &str, quantity: impl Into<String>, value: f64, bound: Bound) -> Self {
        let status = match bound {
            Bound::AtMost(t) if value <= t => Status::Pass,
            Bound::AtLeast(t) if value >= t => Status::Pass,
            Bound::Report => Status::PassWithWarning,
            _ => Status::Fail,
        };
        let notes = if bound == Bound::Report { "report only".to_string() } else { String::new() };
        Row { suite, test_id: test_id.to_string(), quantity: quantity.into(), value, bound, status, notes }
    }

    fn note(mut self, text: &str) -> Self {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(text);
        self
    }

    /// Downgrades a pass to a warning when a diagnostic was raised.
    fn warn_if(mut self, flagged: bool, text: &str) -> Self {
        if flagged {
            if self.status == Status::Pass {
                self.status = Status::PassWithWarning;
            }
            self = self.note(text);
        }
        self
    }
}

/// Ordered rows of one or more suites.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<Row>,
}

impl VerifyReport {
    pub const HEADER: [&'static str; 7] = ["suite", "test_id", "quantity", "value", "tolerance", "status", "notes"];

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.status == Status::Fail)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record([
                r.suite.name().to_string(),
                r.test_id.clone(),
                r.quantity.clone(),
                format!("{:.6e}", r.value),
                r.bound.to_string(),
                r.status.to_string(),
                r.notes.clone(),
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

type CaseFn = fn(&VerifyConfig, Suite, &str) -> Result<Vec<Row>>;

struct Case {
    suite: Suite,
    id: &'static str,
    run: CaseFn,
}

fn cases(suite: Suite) -> Vec<Case> {
    let list: &[(&'static str, CaseFn)] = match suite {
        Suite::Lax => &[
            ("mnls-soliton", lax_mnls),
            ("mnls-perturbed", lax_mnls_perturbed),
            ("mnls-vacuum", lax_mnls_vacuum),
            ("gnls-lifted", lax_gnls),
            ("gnls-geometric-form", lax_gnls_geometric),
            ("kdv-wave", lax_kdv),
        ],
        Suite::Gauge => &[
            ("mnls-exact", gauge_mnls_exact),
            ("gauge-equivalence", gauge_equivalence),
            ("vacuum-fixed", gauge_vacuum),
            ("kdv-travelling", gauge_kdv_wave),
        ],
        Suite::Roundtrip => &[
            ("n2k1", roundtrip_21),
            ("n3k1", roundtrip_31),
            ("n4k2", roundtrip_42),
            ("dphi", roundtrip_dphi),
        ],
        Suite::Hierarchy => &[
            ("closed-forms-sech", hierarchy_sech),
            ("closed-forms-n3", hierarchy_n3),
            ("vacuum", hierarchy_vacuum),
            ("hamiltonians-sech", hierarchy_hamiltonians),
            ("geometric-flows", hierarchy_geometric),
        ],
        Suite::Gradients => &[("field-side", gradients_f), ("path-side", gradients_h)],
        Suite::Pullback => &[("k0", pullback_k0), ("k-1", pullback_km1)],
        Suite::Lenard => &[("lenard", lenard), ("pu-identity", lenard_pu)],
        Suite::Kdv => &[
            ("derivation", kdv_derivation),
            ("skew-adjoint", kdv_skew),
            ("reality", kdv_reality),
        ],
        Suite::All => return Suite::EACH.into_iter().flat_map(cases).collect(),
    };
    list.iter().map(|&(id, run)| Case { suite, id, run }).collect()
}

/// Worker count from [`THREADS_ENV`], defaulting to the available cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs a suite. Case errors become FAIL rows; row order does not depend on
/// scheduling.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.grid()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let list = cases(suite);
    let rows: Vec<Vec<Row>> = pool.install(|| {
        list.par_iter()
            .map(|c| match (c.run)(cfg, c.suite, c.id) {
                Ok(rows) => rows,
                Err(e) => vec![Row {
                    suite: c.suite,
                    test_id: c.id.to_string(),
                    quantity: "error".into(),
                    value: f64::NAN,
                    bound: Bound::AtMost(0.0),
                    status: Status::Fail,
                    notes: e.to_string(),
                }],
            })
            .collect()
    });
    Ok(VerifyReport { rows: rows.into_iter().flatten().collect() })
}

fn n2k1() -> OrbitParams {
    OrbitParams::new(2, 1).expect("valid orbit")
}

fn rel(a: &MatrixField, b: &MatrixField) -> Result<f64> {
    Ok(a.distance(b)? / b.max_norm().max(f64::MIN_POSITIVE))
}

// ---- lax ----

fn lax_mnls(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let u = soliton(&cfg.grid()?, &p);
    let ut = mnls_rhs_signed(&u, &p, cfg.mnls_sign)?;
    let c = curvature(Model::Mnls, &State::Field(u), &State::Field(ut), Some(&p))?;
    let mut rows = Vec::new();
    for l in cfg.lambda_set() {
        rows.push(Row::new(s, id, format!("residual(lambda={l:.6})"), c.norm_at(l)?, Bound::AtMost(1e-7)));
    }
    for (i, v) in c.coefficient_norms().into_iter().enumerate() {
        rows.push(Row::new(s, id, format!("coefficient(lambda^{i})"), v, Bound::AtMost(1e-7)));
    }
    Ok(rows)
}

fn lax_mnls_perturbed(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let u = soliton(&cfg.grid()?, &p);
    let ut = mnls_rhs_signed(&u, &p, cfg.mnls_sign)?.scale(1.01);
    let c = curvature(Model::Mnls, &State::Field(u), &State::Field(ut), Some(&p))?;
    cfg.lambda_set()
        .into_iter()
        .map(|l| Ok(Row::new(s, id, format!("residual(lambda={l:.6})"), c.norm_at(l)?, Bound::AtLeast(1e-3)).note("state_dot scaled by 1.01")))
        .collect()
}

fn lax_mnls_vacuum(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let u = MatrixField::zeros(&cfg.grid()?, 2, 2);
    let ut = mnls_rhs_signed(&u, &p, cfg.mnls_sign)?;
    let r = flows::lax_residual(Model::Mnls, &State::Field(u), &State::Field(ut), &cfg.lambda_set(), Some(&p))?;
    Ok(vec![Row::new(s, id, "max residual", r.into_iter().fold(0.0, f64::max), Bound::AtMost(1e-14))])
}

fn lax_gnls(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let fp = undevelop(&soliton(&cfg.grid()?, &p), &p)?;
    let gamma = fp.gamma().clone();
    let gt = gnls_rhs(&gamma)?;
    let c = curvature(Model::Gnls, &State::Path(gamma.clone()), &State::Path(gt.clone()), Some(&p))?;
    let mut rows = Vec::new();
    for l in cfg.lambda_set() {
        rows.push(Row::new(s, id, format!("residual(lambda={l:.6})"), c.norm_at(l)?, Bound::AtMost(1e-6)));
    }
    rows.push(Row::new(s, id, "lambda^2 identity", gnls_lambda2_defect(&gamma)?, Bound::AtMost(1e-10)));
    let cp = curvature(Model::Gnls, &State::Path(gamma), &State::Path(gt.scale(1.01)), Some(&p))?;
    rows.push(Row::new(s, id, "perturbed residual(lambda=1)", cp.norm_at(1.0)?, Bound::AtLeast(1e-3)).note("state_dot scaled by 1.01"));
    Ok(rows)
}

fn lax_gnls_geometric(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let fp = undevelop(&soliton(&cfg.grid()?, &p), &p)?;
    let d = gnls_geometric(fp.gamma())?.distance(&gnls_rhs(fp.gamma())?)?;
    Ok(vec![Row::new(s, id, "bracket vs projected form", d, Bound::AtMost(1e-8))])
}

fn lax_kdv(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let q = kdv_wave(&cfg.grid()?, 1.0, 0.0);
    let qt = crate::kdv::kdv_rhs(&q)?;
    let c = curvature(Model::Kdv, &State::Scalar(q.clone()), &State::Scalar(qt.clone()), None)?;
    let mut rows = Vec::new();
    for l in cfg.lambda_set() {
        rows.push(Row::new(s, id, format!("residual(lambda={l:.6})"), c.norm_at(l)?, Bound::AtMost(1e-6)));
    }
    let cp = curvature(Model::Kdv, &State::Scalar(q), &State::Scalar(qt.scale(1.01)), None)?;
    rows.push(Row::new(s, id, "perturbed residual(lambda=1)", cp.norm_at(1.0)?, Bound::AtLeast(1e-3)).note("state_dot scaled by 1.01"));
    Ok(rows)
}

// ---- gauge / flows ----

fn gauge_mnls_exact(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let grid = cfg.grid()?;
    let u = soliton(&grid, &p);
    let traj = simulate(Model::Mnls, &State::Field(u.clone()), &SimConfig { t_final: 1.0, dt: 2e-4, log_every: 500 }, Some(&p))?;
    let last = traj.states.last().and_then(State::as_matrix_field).expect("field trajectory");
    let phase = C64::new(1.0f64.cos(), 1.0f64.sin());
    let exact = block_field(&u, &p).map(|m| m * phase);
    let err = block_field(last, &p).distance(&exact)?;
    let drift = traj.relative_drift();
    let mut rows = vec![Row::new(s, id, "sup error vs e^{it}sech", err, Bound::AtMost(1e-4))];
    for (label, d) in traj.conserved_labels.iter().zip(drift) {
        rows.push(Row::new(s, id, format!("{label} relative drift"), d, Bound::AtMost(1e-6)));
    }
    Ok(rows)
}

/// Matrix NLS then gauge lift, against GNLS from the developed initial path.
pub fn gauge_equivalence_rows(cfg: &VerifyConfig, s: Suite, id: &str, t_final: f64, log_every: usize) -> Result<Vec<Row>> {
    let p = n2k1();
    let u = soliton(&cfg.grid()?, &p);
    let sim = SimConfig { t_final, dt: 2e-4, log_every };
    let mnls = simulate(Model::Mnls, &State::Field(u.clone()), &sim, Some(&p))?;
    let lift = gauge_lift(&mnls, &p)?;
    let gamma0 = undevelop(&u, &p)?.gamma().clone();
    let gnls = simulate(Model::Gnls, &State::Path(gamma0), &sim, Some(&p))?;
    let mut gap: f64 = 0.0;
    let mut phi_gap: f64 = 0.0;
    for ((a, b), um) in gnls.states.iter().zip(&lift.trajectory.states).zip(&mnls.states) {
        gap = gap.max(a.distance(b)?);
        let fp = flows::frame_of(a, &p)?;
        phi_gap = phi_gap.max(fp.u().distance(um.as_matrix_field().expect("field"))?);
    }
    // lifted gamma against GNLS by central differences in t
    let mut lifted_residual: f64 = 0.0;
    let lt = &lift.trajectory;
    for i in 1..lt.states.len().saturating_sub(1) {
        let dt = lt.times[i + 1] - lt.times[i - 1];
        let (a, b) = (lt.states[i + 1].as_matrix_field().expect("path"), lt.states[i - 1].as_matrix_field().expect("path"));
        let gt = a.sub(b)?.scale(1.0 / dt);
        let g = lt.states[i].as_matrix_field().expect("path");
        lifted_residual = lifted_residual.max(gt.distance(&gnls_rhs(g)?)?);
    }
    let drift = gnls.relative_drift();
    let orbit = gnls.orbit_residuals.iter().copied().fold(0.0, f64::max);
    Ok(vec![
        Row::new(s, id, "sup gap gnls vs lifted mnls", gap, Bound::AtMost(1e-3)),
        Row::new(s, id, "t-consistency", lift.t_consistency, Bound::AtMost(flows::T_CONSISTENCY_TOL)),
        Row::new(s, id, "lifted gamma gnls residual", lifted_residual, Bound::AtMost(1e-4)),
        Row::new(s, id, "develop(gamma(t)) vs u(t)", phi_gap, Bound::AtMost(1e-6)),
        Row::new(s, id, "H0 relative drift", drift[0], Bound::AtMost(1e-5)),
        Row::new(s, id, "H1 relative drift", drift[1], Bound::AtMost(1e-5)),
        Row::new(s, id, "orbit residual before projection", orbit, Bound::AtMost(1e-6)).warn_if(gnls.flagged, "orbit correction flagged"),
    ])
}

fn gauge_equivalence(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    gauge_equivalence_rows(cfg, s, id, 0.5, 25)
}

fn gauge_vacuum(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let grid = cfg.grid()?;
    let p = n2k1();
    let sim = SimConfig { t_final: 20.0 * 1e-4, dt: 1e-4, log_every: 10 };
    let zero = State::Field(MatrixField::zeros(&grid, 2, 2));
    let base = State::Path(MatrixField::constant(&grid, p.a()));
    let flat = State::Scalar(ScalarField::zeros(&grid));
    let mut rows = Vec::new();
    for (model, s0) in [
        (Model::Mnls, &zero),
        (Model::Flow(1), &zero),
        (Model::Flow(2), &zero),
        (Model::Flow(3), &zero),
        (Model::Gnls, &base),
        (Model::HFlow(0), &base),
        (Model::HFlow(1), &base),
        (Model::Kdv, &flat),
    ] {
        let sim = if model.order() == 3 { SimConfig { t_final: 20.0 * 1e-5, dt: 1e-5, log_every: 10 } } else { sim };
        let traj = simulate(model, s0, &sim, Some(&p))?;
        let dev = traj.states.iter().map(|x| x.distance(s0)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        rows.push(Row::new(s, id, format!("{model} deviation"), dev, Bound::AtMost(1e-14)));
    }
    Ok(rows)
}

fn gauge_kdv_wave(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let grid = cfg.grid()?;
    let q0 = kdv_wave(&grid, 1.0, 0.0);
    let dt = flows::STABILITY_THIRD_ORDER * grid.spacing().powi(3);
    let traj = simulate(Model::Kdv, &State::Scalar(q0), &SimConfig { t_final: 1.0, dt, log_every: usize::MAX }, None)?;
    let err = traj.states.last().expect("logged").distance(&State::Scalar(kdv_wave(&grid, 1.0, 1.0)))?;
    let drift = traj.relative_drift();
    Ok(vec![
        Row::new(s, id, "shape error vs translate", err, Bound::AtMost(1e-3)),
        Row::new(s, id, "int q^2 relative drift", drift[1], Bound::AtMost(1e-6)),
    ])
}

// ---- roundtrip ----

fn roundtrip_rows(cfg: &VerifyConfig, s: Suite, id: &str, n: usize, k: usize) -> Result<Vec<Row>> {
    let p = OrbitParams::new(n, k)?;
    let grid = cfg.grid()?;
    let mut fields = vec![("soliton".to_string(), soliton(&grid, &p))];
    for i in 0..cfg.gaussian_seeds as u64 {
        let seed = cfg.seed + i;
        fields.push((format!("gaussian-{seed}"), offblock_field(&gaussian_block(&grid, &p, seed), &p)?));
    }
    let mut rows = Vec::new();
    for (name, u) in fields {
        let fp = undevelop(&u, &p)?;
        let back = develop(&fp.path(), &p)?;
        rows.push(
            Row::new(s, id, format!("{name}: develop(undevelop(u)) - u"), back.u().distance(&u)?, Bound::AtMost(1e-8))
                .warn_if(fp.diagnostics().flagged || back.diagnostics().flagged, "frame diagnostics flagged"),
        );
        let again = undevelop(back.u(), &p)?;
        rows.push(Row::new(
            s,
            id,
            format!("{name}: undevelop(develop(gamma)) - gamma"),
            again.gamma().distance(back.gamma())?,
            Bound::AtMost(1e-8),
        ));
    }
    Ok(rows)
}

fn roundtrip_21(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    roundtrip_rows(cfg, s, id, 2, 1)
}

fn roundtrip_31(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    roundtrip_rows(cfg, s, id, 3, 1)
}

fn roundtrip_42(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    roundtrip_rows(cfg, s, id, 4, 2)
}

fn roundtrip_dphi(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let grid = cfg.grid()?;
    let fp = undevelop(&soliton(&grid, &p), &p)?;
    let path = fp.path();
    let mut rng = cfg.rng(0xd1);
    let eps = 1e-4;
    let mut rows = Vec::new();
    for i in 0..cfg.directions {
        let xi = random_skew_bump(&grid, 2, &mut rng);
        let d = rotation_tangent(&path, &xi)?;
        let up = develop(&rotate_path(&path, &xi, eps, &p)?, &p)?;
        let dn = develop(&rotate_path(&path, &xi, -eps, &p)?, &p)?;
        let fd = up.u().sub(dn.u())?.scale(0.5 / eps);
        rows.push(Row::new(s, id, format!("direction {i} relative error"), rel(&fd, &d_phi(&fp, &d)?)?, Bound::AtMost(1e-5)));
    }
    Ok(rows)
}

// ---- hierarchy ----

fn hierarchy_sech(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let u = soliton(&cfg.grid()?, &p);
    let t = compute_hierarchy(&u, &p, 3)?;
    let q = block_field(&u, &p);
    let mut rows = Vec::new();
    for j in 2..=3 {
        let d = t.q(j)?.distance(&closed_form_q(&q, &p, j)?)?;
        rows.push(Row::new(s, id, format!("Q{j} vs closed form"), d, Bound::AtMost(1e-7)));
    }
    let worst = t.recursion_residuals().iter().copied().fold(0.0, f64::max);
    rows.push(Row::new(s, id, "recursion residual", worst, Bound::AtMost(RECURSION_TOL)));
    Ok(rows)
}

fn hierarchy_n3(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = OrbitParams::new(3, 1)?;
    let grid = cfg.grid()?;
    let q = gaussian_block(&grid, &p, cfg.seed);
    let t = compute_hierarchy(&offblock_field(&q, &p)?, &p, 3)?;
    (2..=3)
        .map(|j| Ok(Row::new(s, id, format!("Q{j} vs closed form"), t.q(j)?.distance(&closed_form_q(&q, &p, j)?)?, Bound::AtMost(1e-7))))
        .collect()
}

fn hierarchy_vacuum(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let t = compute_hierarchy(&MatrixField::zeros(&cfg.grid()?, 2, 2), &p, 6)?;
    let worst = (1..=6).map(|j| t.q(j).map(|f| f.max_norm())).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let flows = (1..=5).map(|j| t.flow_rhs(j).map(|f| f.max_norm())).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(vec![
        Row::new(s, id, "max |Q_j|, j=1..6", worst, Bound::AtMost(1e-13)),
        Row::new(s, id, "max flow rhs, j=1..5", flows, Bound::AtMost(1e-13)),
    ])
}

fn hierarchy_hamiltonians(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let t = compute_hierarchy(&soliton(&cfg.grid()?, &p), &p, 4)?;
    Ok(vec![
        Row::new(s, id, "|F0 - 2|", (t.hamiltonian(0)? - 2.0).abs(), Bound::AtMost(1e-8)),
        Row::new(s, id, "|F1|", t.hamiltonian(1)?.abs(), Bound::AtMost(1e-8)),
        Row::new(s, id, "|F2 + 2/3|", (t.hamiltonian(2)? + 2.0 / 3.0).abs(), Bound::AtMost(1e-8)),
    ])
}

fn hierarchy_geometric(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let fp = undevelop(&soliton(&cfg.grid()?, &p), &p)?;
    let r = cross_check_geometric_flows(&fp)?;
    // the soliton leaves the cubic basis rank deficient; fit on a generic path
    let generic = undevelop(&offblock_field(&gaussian_block(fp.u().grid(), &p, cfg.seed), &p)?, &p)?;
    let r2 = cross_check_geometric_flows(&generic)?;
    let fit = r2.j2_fit.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(" ");
    Ok(vec![
        Row::new(s, id, "j=0 projected form vs [gamma,gamma_xx]", r.j0_vs_bracket, Bound::AtMost(1e-7)),
        Row::new(s, id, "j=0 projected form vs g[Q2,a]g^-1", r.j0_vs_frame, Bound::AtMost(1e-6)),
        Row::new(s, id, "j=1 printed form vs g[Q3,a]g^-1", r.j1_printed, Bound::AtMost(1e-6)),
        Row::new(s, id, "j=1 with -nabla^2 term vs g[Q3,a]g^-1", r.j1_sign_flipped, Bound::Report),
        Row::new(s, id, "j=2 printed form vs g[Q4,a]g^-1", r.j2_printed, Bound::Report),
        Row::new(s, id, "j=1 printed form vs g[Q3,a]g^-1, gaussian path", r2.j1_printed, Bound::AtMost(1e-6)),
        Row::new(s, id, "j=1 with -nabla^2 term, gaussian path", r2.j1_sign_flipped, Bound::Report),
        Row::new(s, id, "j=2 fitted form residual, gaussian path", r2.j2_fit_residual, Bound::Report).note(&format!("coefficients {fit}")),
    ])
}

// ---- gradients ----

fn gradients_f(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let grid = cfg.grid()?;
    let u = soliton(&grid, &p);
    let table = compute_hierarchy(&u, &p, 4)?;
    let mut rng = cfg.rng(0x6f);
    let eps = 1e-4;
    let mut rows = Vec::new();
    for j in 0..3 {
        let mut worst: f64 = 0.0;
        for _ in 0..3 {
            let v = random_perp_bump(&grid, &p, &mut rng);
            let f = |w: &MatrixField| -> Result<f64> { compute_hierarchy(w, &p, 4)?.hamiltonian(j) };
            let fd = (f(&u.axpy(eps, &v)?)? - f(&u.axpy(-eps, &v)?)?) / (2.0 * eps);
            let an = table.gradient(j)?.l2_pairing(&v)?;
            worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
        }
        rows.push(Row::new(s, id, format!("F{j} directional derivative"), worst, Bound::AtMost(1e-5)));
    }
    Ok(rows)
}

fn gradients_h(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let grid = cfg.grid()?;
    let fp = undevelop(&soliton(&grid, &p), &p)?;
    let path = fp.path();
    let mut rng = cfg.rng(0x48);
    let eps = 1e-4;
    let mut worst = [0.0f64; 2];
    for _ in 0..3 {
        let xi = random_skew_bump(&grid, 2, &mut rng);
        let d = rotation_tangent(&path, &xi)?;
        let up = develop(&rotate_path(&path, &xi, eps, &p)?, &p)?;
        let dn = develop(&rotate_path(&path, &xi, -eps, &p)?, &p)?;
        for (j, w) in worst.iter_mut().enumerate() {
            let fd = (grad_h(&up, j)?.value - grad_h(&dn, j)?.value) / (2.0 * eps);
            let an = grad_h(&fp, j)?.gradient.l2_pairing(&d)?;
            *w = w.max((fd - an).abs() / an.abs().max(1e-3));
        }
    }
    let h0 = grad_h(&fp, 0)?.value;
    let e = energy(fp.gamma());
    Ok(vec![
        Row::new(s, id, "H0 directional derivative", worst[0], Bound::AtMost(1e-5)),
        Row::new(s, id, "H1 directional derivative", worst[1], Bound::AtMost(1e-5)),
        Row::new(s, id, "H0 vs energy", (h0 - e).abs() / e, Bound::AtMost(1e-7)),
    ])
}

// ---- pullback ----

fn pullback_rows(cfg: &VerifyConfig, s: Suite, id: &str, k: i32) -> Result<Vec<Row>> {
    let p = n2k1();
    let grid = cfg.grid()?;
    let u = soliton(&grid, &p);
    let fp = undevelop(&u, &p)?;
    let mut rng = cfg.rng(0x50 + k.unsigned_abs() as u64);
    let levels = (2 - k) as usize;
    let candidates: Vec<MatrixField> = (0..4 * levels + 8).map(|_| random_perp_bump(&grid, &p, &mut rng)).collect();
    let vs = constrained_combinations(&u, &p, levels, &candidates, 2 * cfg.tangent_pairs, &mut rng)?;
    let mut membership: f64 = 0.0;
    for v in &vs {
        let ch = constraint_residuals(&u, v, &p, -(levels as i32))?;
        membership = membership.max(ch.boundary.iter().copied().fold(0.0, f64::max));
    }
    let ds: Vec<MatrixField> = vs.iter().map(|v| v.scale(-1.0).conjugate_by(fp.frames())).collect();
    let mut worst: f64 = 0.0;
    let mut anti_w: f64 = 0.0;
    let mut anti_tau: f64 = 0.0;
    for pair in ds.chunks(2).zip(vs.chunks(2)) {
        let ([d1, d2], [v1, v2]) = (pair.0, pair.1) else { continue };
        worst = worst.max(pullback_check(&fp, d1, d2, k)?.residual);
        let a = w_k(&u, v1, v2, &p, k)?;
        let b = w_k(&u, v2, v1, &p, k)?;
        anti_w = anti_w.max((a + b).abs() / (a.abs() + f64::EPSILON));
        let c = tau_k(&fp, d1, d2, k - 2)?;
        let e = tau_k(&fp, d2, d1, k - 2)?;
        anti_tau = anti_tau.max((c + e).abs() / (c.abs() + f64::EPSILON));
    }
    Ok(vec![
        Row::new(s, id, "constraint boundary residual", membership, Bound::AtMost(1e-7)),
        Row::new(s, id, format!("w_{k} pullback vs tau_{}", k - 2), worst, Bound::AtMost(1e-6)),
        Row::new(s, id, format!("w_{k} antisymmetry"), anti_w, Bound::AtMost(1e-8)),
        Row::new(s, id, format!("tau_{} antisymmetry", k - 2), anti_tau, Bound::AtMost(1e-8)),
    ])
}

fn pullback_k0(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    pullback_rows(cfg, s, id, 0)
}

fn pullback_km1(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    pullback_rows(cfg, s, id, -1)
}

// ---- lenard ----

fn lenard(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let fp = undevelop(&soliton(&cfg.grid()?, &p), &p)?;
    (1..=2)
        .map(|j| {
            let lhs = grad_h(&fp, j)?.gradient.bracket(fp.gamma())?;
            let rhs = l_gamma(&fp, &grad_h(&fp, j - 1)?.gradient)?;
            Ok(Row::new(s, id, format!("j={j} [grad H_j, gamma] vs L(grad H_(j-1))"), rel(&rhs.value, &lhs)?, Bound::AtMost(1e-6)))
        })
        .collect()
}

fn lenard_pu(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let p = n2k1();
    let u = soliton(&cfg.grid()?, &p);
    let t = compute_hierarchy(&u, &p, 5)?;
    let q = block_field(&u, &p);
    let q3 = closed_form_q(&q, &p, 3)?;
    let want = q3.map(|x| -crate::lie::ad_a(x, &p));
    let pv = p_u(&u, &closed_form_q(&q, &p, 2)?.perp(&p), &p)?;
    let closed = Row::new(s, id, "P_u(perp Q2) vs [Q3,a], closed forms", rel(&pv.pv, &want)?, Bound::AtMost(1e-7))
        .warn_if(pv.flagged, "characterization flagged");
    std::iter::once(Ok(closed))
        .chain((1..=3).map(|j| {
            let pv = p_u(&u, &t.q(j + 1)?.perp(&p), &p)?;
            let want = t.flow_rhs(j + 1)?;
            Ok(Row::new(s, id, format!("P_u(perp Q{}) vs [Q{},a]", j + 1, j + 2), rel(&pv.pv, &want)?, Bound::AtMost(1e-7))
                .warn_if(pv.flagged, "characterization flagged"))
        }))
        .collect()
}

// ---- kdv ----

fn kdv_derivation(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let grid = cfg.grid()?;
    let mut rng = cfg.rng(0x6b);
    let mut worst = [0.0f64; 4];
    for _ in 0..cfg.kdv_pairs {
        let q = random_scalar_bump(&grid, &mut rng);
        let c = random_scalar_bump(&grid, &mut rng);
        let r = derivation_residuals(&q, &c)?;
        for (w, v) in worst.iter_mut().zip([r.minus1, r.minus1_chain, r.plus1, r.plus1_chain]) {
            *w = w.max(v);
        }
    }
    Ok(vec![
        Row::new(s, id, "J_-1 from negative chain", worst[0], Bound::AtMost(1e-8)),
        Row::new(s, id, "negative chain equations", worst[1], Bound::AtMost(1e-8)),
        Row::new(s, id, "J_1 from zeroth-order system", worst[2], Bound::AtMost(1e-8)),
        Row::new(s, id, "zeroth-order system equations", worst[3], Bound::AtMost(1e-8)),
    ])
}

fn kdv_skew(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let grid = cfg.grid()?;
    let mut rng = cfg.rng(0x5e);
    let mut worst = [0.0f64; 2];
    for _ in 0..cfg.kdv_pairs {
        let q = random_scalar_bump(&grid, &mut rng);
        let v = random_scalar_bump(&grid, &mut rng);
        let w = random_scalar_bump(&grid, &mut rng);
        worst[0] = worst[0].max((j_minus1(&v).l2_pairing(&w)? + v.l2_pairing(&j_minus1(&w))?).abs());
        worst[1] = worst[1].max((j_1(&q, &v)?.l2_pairing(&w)? + v.l2_pairing(&j_1(&q, &w)?)?).abs());
    }
    Ok(vec![
        Row::new(s, id, "J_-1 skew-adjointness", worst[0], Bound::AtMost(1e-9)),
        Row::new(s, id, "J_1 skew-adjointness", worst[1], Bound::AtMost(1e-9)),
    ])
}

fn kdv_reality(cfg: &VerifyConfig, s: Suite, id: &str) -> Result<Vec<Row>> {
    let grid = cfg.grid()?;
    let mut rng = cfg.rng(0x7e);
    let mut worst: f64 = 0.0;
    for q in [kdv_wave(&grid, 1.0, 0.0), random_scalar_bump(&grid, &mut rng)] {
        let f = kdv_lax_fields(&q);
        for m in 0..grid.len() {
            worst = worst.max(reality_residual(&f.laurent_at(m))?);
        }
    }
    Ok(vec![Row::new(s, id, "Lax polynomial reality pattern", worst, Bound::AtMost(1e-10))])
}
