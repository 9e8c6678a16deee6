//! Time evolution, zero-curvature residuals, the gauge lift from matrix NLS
//! solutions to orbit paths, and the geometric forms of the first flows.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::development::{self, covariant_chain, develop, undevelop, FramedPath, GrassmannPath};
use crate::error::{Error, Result};
use crate::field::{MatrixField, ScalarField};
use crate::hierarchy::{block_field, closed_form_q, compute_hierarchy, offblock_field};
use crate::kdv;
use crate::lie::{self, OrbitParams, C64};

/// Evolution equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// `q_t = i(q_xx + 2 q q^* q)` on the off-block entry of `u`.
    Mnls,
    /// `gamma_t = [gamma, gamma_xx]`.
    Gnls,
    /// `q_t = (q_xxx - 6 q q_x)/4`.
    Kdv,
    /// `u_t = [Q_{j+1}, a]`.
    Flow(usize),
    /// `gamma_t = g [Q_{j+2}, a] g^{-1}`.
    HFlow(usize),
}

impl Model {
    /// Parses a model name; `flow-j` and `hflow-j` take their index from `j`.
    pub fn parse(name: &str, j: Option<usize>) -> Result<Self> {
        let need_j = || j.ok_or_else(|| Error::Parameter(format!("model `{name}` needs an index j")));
        match name {
            "mnls" => Ok(Model::Mnls),
            "gnls" => Ok(Model::Gnls),
            "kdv" => Ok(Model::Kdv),
            "flow-j" => Ok(Model::Flow(need_j()?)),
            "hflow-j" => Ok(Model::HFlow(need_j()?)),
            other => Err(Error::Parameter(format!("unknown model `{other}`"))),
        }
    }

    /// Highest spatial derivative in the right-hand side.
    pub fn order(self) -> u32 {
        match self {
            Model::Mnls | Model::Gnls => 2,
            Model::Kdv => 3,
            Model::Flow(j) => (j as u32).max(1),
            Model::HFlow(j) => j as u32 + 2,
        }
    }

    fn path_valued(self) -> bool {
        matches!(self, Model::Gnls | Model::HFlow(_))
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Mnls => f.write_str("mnls"),
            Model::Gnls => f.write_str("gnls"),
            Model::Kdv => f.write_str("kdv"),
            Model::Flow(j) => write!(f, "flow-{j}"),
            Model::HFlow(j) => write!(f, "hflow-{j}"),
        }
    }
}

/// State of an evolution: a perp field, an orbit path or a scalar field.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Field(MatrixField),
    Path(MatrixField),
    Scalar(ScalarField),
}

impl State {
    fn axpy(&self, s: f64, other: &State) -> Result<State> {
        Ok(match (self, other) {
            (State::Field(a), State::Field(b)) => State::Field(a.axpy(s, b)?),
            (State::Path(a), State::Path(b)) => State::Path(a.axpy(s, b)?),
            (State::Scalar(a), State::Scalar(b)) => State::Scalar(a.zip_map(b, |x, y| x + s * y)?),
            _ => return Err(Error::ModelMismatch("incompatible state kinds".into())),
        })
    }

    pub fn is_finite(&self) -> bool {
        match self {
            State::Field(f) | State::Path(f) => f.values().iter().all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite())),
            State::Scalar(f) => f.values().iter().all(|v| v.is_finite()),
        }
    }

    /// Sup-norm distance between states of the same kind.
    pub fn distance(&self, other: &State) -> Result<f64> {
        match (self, other) {
            (State::Field(a), State::Field(b)) | (State::Path(a), State::Path(b)) => a.distance(b),
            (State::Scalar(a), State::Scalar(b)) => a.distance(b),
            _ => Err(Error::ModelMismatch("incompatible state kinds".into())),
        }
    }

    pub fn as_matrix_field(&self) -> Option<&MatrixField> {
        match self {
            State::Field(f) | State::Path(f) => Some(f),
            State::Scalar(_) => None,
        }
    }

    pub fn grid(&self) -> &crate::field::Grid {
        match self {
            State::Field(f) | State::Path(f) => f.grid(),
            State::Scalar(f) => f.grid(),
        }
    }
}

fn need_params(params: Option<&OrbitParams>, model: Model) -> Result<&OrbitParams> {
    params.ok_or_else(|| Error::ModelMismatch(format!("model {model} needs orbit parameters")))
}

/// Matrix NLS right-hand side with a sign in front, used by negative controls.
pub fn mnls_rhs_signed(u: &MatrixField, params: &OrbitParams, sign: f64) -> Result<MatrixField> {
    let q = block_field(u, params);
    let qxx = q.derivative(2);
    let i = C64::new(0.0, sign);
    let qt = q.zip_map(&qxx, |b, bxx| (bxx + b * b.adjoint() * b * C64::new(2.0, 0.0)) * i)?;
    offblock_field(&qt, params)
}

/// `[gamma, gamma_xx]`.
pub fn gnls_rhs(gamma: &MatrixField) -> Result<MatrixField> {
    gamma.bracket(&gamma.ddx_asymptotic().ddx())
}

/// `ad(gamma)(pi_t(gamma_xx))`, the geometric form of the GNLS.
pub fn gnls_geometric(gamma: &MatrixField) -> Result<MatrixField> {
    let gxx = gamma.ddx_asymptotic().ddx();
    let nabla = gamma.zip_map(&gxx, lie::tangent_projection)?;
    gamma.bracket(&nabla)
}

/// `g [Q_{j+2}, a] g^{-1}` for the framed lift of a path.
pub fn hflow_rhs(fp: &FramedPath, j: usize) -> Result<MatrixField> {
    let t = compute_hierarchy(fp.u(), fp.params(), j + 2)?;
    Ok(t.flow_rhs(j + 1)?.conjugate_by(fp.frames()))
}

/// Right-hand side of `model` at `state`.
pub fn rhs(model: Model, state: &State, params: Option<&OrbitParams>) -> Result<State> {
    match (model, state) {
        (Model::Mnls, State::Field(u)) => Ok(State::Field(mnls_rhs_signed(u, need_params(params, model)?, 1.0)?)),
        (Model::Flow(j), State::Field(u)) => {
            let p = need_params(params, model)?;
            Ok(State::Field(compute_hierarchy(u, p, j + 1)?.flow_rhs(j)?))
        }
        (Model::Gnls, State::Path(g)) => Ok(State::Path(gnls_rhs(g)?)),
        (Model::HFlow(j), State::Path(g)) => {
            let p = need_params(params, model)?;
            // Runge-Kutta stages sit off the orbit by O(dt^2)
            let fp = develop(&GrassmannPath::new(g.map(lie::project_to_orbit), p)?, p)?;
            Ok(State::Path(hflow_rhs(&fp, j)?))
        }
        (Model::Kdv, State::Scalar(q)) => Ok(State::Scalar(kdv::kdv_rhs(q)?)),
        _ => Err(Error::ModelMismatch(format!("model {model} does not act on this state kind"))),
    }
}

/// Stability constants: `dt <= c h^order`.
pub const STABILITY_SECOND_ORDER: f64 = 0.2;
pub const STABILITY_THIRD_ORDER: f64 = 0.05;

/// Largest orbit correction accepted at a logged step.
pub const ORBIT_CORRECTION_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    pub log_every: usize,
}

/// Logged evolution.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub model: Model,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub conserved_labels: [&'static str; 3],
    pub conserved: Vec<[f64; 3]>,
    /// Orbit residual before re-projection, per logged step (paths only).
    pub orbit_residuals: Vec<f64>,
    /// Size of the re-projection, per logged step (paths only).
    pub orbit_corrections: Vec<f64>,
    pub flagged: bool,
}

impl Trajectory {
    /// `max_t |I(t) - I(0)| / max(|I(0)|, 1)` for each logged quantity.
    pub fn relative_drift(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        if let Some(first) = self.conserved.first() {
            for row in &self.conserved {
                for c in 0..3 {
                    out[c] = f64::max(out[c], (row[c] - first[c]).abs() / first[c].abs().max(1.0));
                }
            }
        }
        out
    }
}

fn conserved_quantities(model: Model, state: &State, params: Option<&OrbitParams>) -> Result<[f64; 3]> {
    match state {
        State::Field(u) => {
            let t = compute_hierarchy(u, need_params(params, model)?, 4)?;
            Ok([t.hamiltonian(0)?, t.hamiltonian(1)?, t.hamiltonian(2)?])
        }
        State::Path(g) => {
            let p = need_params(params, model)?;
            let fp = develop(&GrassmannPath::new(g.clone(), p)?, p)?;
            let t = compute_hierarchy(fp.u(), p, 4)?;
            Ok([t.hamiltonian(0)?, t.hamiltonian(1)?, t.hamiltonian(2)?])
        }
        State::Scalar(q) => Ok(kdv::kdv_invariants(q)),
    }
}

/// Classical fourth-order Runge-Kutta integration with logging.
pub fn simulate(model: Model, state0: &State, cfg: &SimConfig, params: Option<&OrbitParams>) -> Result<Trajectory> {
    if !(cfg.t_final > 0.0 && cfg.dt > 0.0) || cfg.log_every == 0 {
        return Err(Error::Parameter("need t_final > 0, dt > 0 and log_every >= 1".into()));
    }
    let h = state0.grid().spacing();
    let order = model.order();
    let c = if order <= 2 { STABILITY_SECOND_ORDER } else { STABILITY_THIRD_ORDER };
    let bound = c * h.powi(order as i32);
    if cfg.dt > bound * (1.0 + 1e-12) {
        return Err(Error::Stability(format!(
            "dt = {} exceeds {c} h^{order} = {bound:.3e} for model {model}",
            cfg.dt
        )));
    }
    let steps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.t_final / steps as f64;
    let labels = match state0 {
        State::Field(_) => ["F0", "F1", "F2"],
        State::Path(_) => ["H0", "H1", "H2"],
        State::Scalar(_) => ["I0", "I1", "I2"],
    };
    let mut traj = Trajectory {
        model,
        times: vec![0.0],
        states: vec![state0.clone()],
        conserved_labels: labels,
        conserved: vec![conserved_quantities(model, state0, params)?],
        orbit_residuals: Vec::new(),
        orbit_corrections: Vec::new(),
        flagged: false,
    };
    if model.path_valued() {
        traj.orbit_residuals.push(0.0);
        traj.orbit_corrections.push(0.0);
    }
    let mut y = state0.clone();
    for step in 1..=steps {
        let k1 = rhs(model, &y, params)?;
        let k2 = rhs(model, &y.axpy(0.5 * dt, &k1)?, params)?;
        let k3 = rhs(model, &y.axpy(0.5 * dt, &k2)?, params)?;
        let k4 = rhs(model, &y.axpy(dt, &k3)?, params)?;
        y = y
            .axpy(dt / 6.0, &k1)?
            .axpy(dt / 3.0, &k2)?
            .axpy(dt / 3.0, &k3)?
            .axpy(dt / 6.0, &k4)?;
        if !y.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite state at step {step} (t = {})", step as f64 * dt)));
        }
        if step % cfg.log_every == 0 || step == steps {
            if let State::Path(g) = &y {
                let p = need_params(params, model)?;
                let residual = g.values().iter().fold(0.0, |m: f64, x| m.max(lie::orbit_residual(x, p)));
                let projected = g.map(lie::project_to_orbit);
                let correction = projected.distance(g)?;
                traj.orbit_residuals.push(residual);
                traj.orbit_corrections.push(correction);
                traj.flagged |= correction > ORBIT_CORRECTION_TOL;
                y = State::Path(projected);
            }
            traj.times.push(step as f64 * dt);
            traj.conserved.push(conserved_quantities(model, &y, params)?);
            traj.states.push(y.clone());
        }
    }
    Ok(traj)
}

/// Per-power coefficients of the curvature `A_t - B_x - [A, B]`.
#[derive(Clone, Debug)]
pub struct Curvature {
    /// `coeffs[p]` multiplies `lambda^p`.
    pub coeffs: Vec<MatrixField>,
}

impl Curvature {
    /// `h sum_x |sum_p lambda^p R_p(x)|_F`.
    pub fn norm_at(&self, lambda: f64) -> Result<f64> {
        let mut acc = self.coeffs[0].clone();
        let mut pow = 1.0;
        for c in &self.coeffs[1..] {
            pow *= lambda;
            acc = acc.axpy(pow, c)?;
        }
        Ok(acc.l1_frobenius())
    }

    /// `h sum_x |R_p(x)|_F` per power.
    pub fn coefficient_norms(&self) -> Vec<f64> {
        self.coeffs.iter().map(MatrixField::l1_frobenius).collect()
    }
}

/// Curvature coefficients of the Lax pair of `model` at `(state, state_dot)`.
pub fn curvature(model: Model, state: &State, state_dot: &State, params: Option<&OrbitParams>) -> Result<Curvature> {
    match (model, state, state_dot) {
        (Model::Mnls, State::Field(u), State::Field(ut)) => {
            // A = a l + u, B = a l^2 + u l + Q_2
            let p = need_params(params, model)?;
            let q2 = closed_form_q(&block_field(u, p), p, 2)?;
            let a = MatrixField::constant(u.grid(), p.a());
            let r0 = ut.sub(&q2.ddx())?.sub(&u.bracket(&q2)?)?;
            let r1 = u.ddx().add(&a.bracket(&q2)?)?.scale(-1.0);
            Ok(Curvature { coeffs: vec![r0, r1] })
        }
        (Model::Gnls, State::Path(g), State::Path(gt)) => {
            // A = gamma l, B = gamma l^2 + [gamma, gamma_x] l
            let gx = g.ddx_asymptotic();
            let r0 = MatrixField::zeros(g.grid(), g.shape().0, g.shape().1);
            let r1 = gt.sub(&g.bracket(&gx.ddx())?)?;
            let r2 = gx.add(&g.bracket(&g.bracket(&gx)?)?)?.scale(-1.0);
            Ok(Curvature { coeffs: vec![r0, r1, r2] })
        }
        (Model::Kdv, State::Scalar(q), State::Scalar(qt)) => {
            // A = a l + u, B = a l^3 + u l^2 + Q_2 l + Q_3
            let f = kdv::kdv_lax_fields(q);
            let at = MatrixField::from_entries(q.grid(), 2, 2, |i, j| {
                if (i, j) == (0, 1) {
                    qt.values().iter().map(|&v| C64::new(v, 0.0)).collect()
                } else {
                    vec![C64::new(0.0, 0.0); q.grid().len()]
                }
            });
            let a = MatrixField::constant(q.grid(), &f.a2);
            let r0 = at.sub(&f.q3.ddx())?.sub(&f.u2.bracket(&f.q3)?)?;
            let r1 = f.q2.ddx().add(&a.bracket(&f.q3)?)?.add(&f.u2.bracket(&f.q2)?)?.scale(-1.0);
            let r2 = f.u2.ddx().add(&a.bracket(&f.q2)?)?.scale(-1.0);
            Ok(Curvature { coeffs: vec![r0, r1, r2] })
        }
        _ => Err(Error::ModelMismatch(format!("no Lax pair for model {model} with these states"))),
    }
}

/// `h sum_x |A_t - B_x - [A, B]|_F` at each `lambda`.
pub fn lax_residual(
    model: Model,
    state: &State,
    state_dot: &State,
    lambdas: &[f64],
    params: Option<&OrbitParams>,
) -> Result<Vec<f64>> {
    let c = curvature(model, state, state_dot, params)?;
    lambdas.iter().map(|&l| c.norm_at(l)).collect()
}

/// Orbit-valued trajectory produced from a matrix NLS trajectory.
#[derive(Clone, Debug)]
pub struct GaugeLift {
    pub trajectory: Trajectory,
    pub frames: Vec<FramedPath>,
    /// `max |E^{-1} E_t - Q_2|` over interior times and `|x| <= L/2`.
    pub t_consistency: f64,
    pub flagged: bool,
}

/// Threshold for [`GaugeLift::t_consistency`].
pub const T_CONSISTENCY_TOL: f64 = 1e-4;

/// Lifts each logged `u(., t)` to `gamma = E a E^{-1}` with `E_x = E u`,
/// `E(x_0, t) = I`, and checks `E^{-1} E_t = Q_2` by central differences in `t`.
pub fn gauge_lift(traj: &Trajectory, params: &OrbitParams) -> Result<GaugeLift> {
    if traj.model != Model::Mnls {
        return Err(Error::ModelMismatch(format!("gauge lift needs an mnls trajectory, got {}", traj.model)));
    }
    let frames: Vec<FramedPath> = traj
        .states
        .iter()
        .map(|s| match s {
            State::Field(u) => undevelop(u, params),
            _ => Err(Error::ModelMismatch("mnls trajectory holds a non-field state".into())),
        })
        .collect::<Result<_>>()?;
    let mut t_consistency: f64 = 0.0;
    for i in 1..frames.len().saturating_sub(1) {
        let dt = traj.times[i + 1] - traj.times[i - 1];
        let u = frames[i].u();
        let q2 = closed_form_q(&block_field(u, params), params, 2)?;
        let grid = u.grid();
        for m in 0..grid.len() {
            if grid.point(m).abs() > grid.half_width() / 2.0 {
                continue;
            }
            let et = (&frames[i + 1].frames()[m] - &frames[i - 1].frames()[m]) / C64::new(dt, 0.0);
            let lhs = frames[i].frames()[m].adjoint() * et;
            t_consistency = t_consistency.max(lie::max_abs(&(lhs - q2.at(m))));
        }
    }
    let states: Vec<State> = frames.iter().map(|f| State::Path(f.gamma().clone())).collect();
    let conserved = frames
        .iter()
        .map(|f| {
            let t = compute_hierarchy(f.u(), params, 4)?;
            Ok([t.hamiltonian(0)?, t.hamiltonian(1)?, t.hamiltonian(2)?])
        })
        .collect::<Result<Vec<_>>>()?;
    let n = states.len();
    let trajectory = Trajectory {
        model: Model::Gnls,
        times: traj.times.clone(),
        states,
        conserved_labels: ["H0", "H1", "H2"],
        conserved,
        orbit_residuals: frames.iter().map(|f| f.path().orbit_residual(params)).collect(),
        orbit_corrections: vec![0.0; n],
        flagged: false,
    };
    let flagged = t_consistency > T_CONSISTENCY_TOL;
    Ok(GaugeLift { trajectory, frames, t_consistency, flagged })
}

/// Comparison of the geometric forms of the first flows with `g [Q_{j+2}, a] g^{-1}`.
#[derive(Clone, Debug)]
pub struct GeometricReport {
    /// `ad(gamma)(nabla gamma_x)` against `[gamma, gamma_xx]`, relative.
    pub j0_vs_bracket: f64,
    /// `ad(gamma)(nabla gamma_x)` against `g [Q_2, a] g^{-1}`, relative.
    pub j0_vs_frame: f64,
    /// `nabla^2 gamma_x + 2 gamma_x^3` against `g [Q_3, a] g^{-1}`, relative.
    pub j1_printed: f64,
    /// `-nabla^2 gamma_x + 2 gamma_x^3` against `g [Q_3, a] g^{-1}`, relative.
    pub j1_sign_flipped: f64,
    /// `ad(gamma)(nabla^3 gamma_x - 6 gamma_x)` against `g [Q_4, a] g^{-1}`, relative.
    pub j2_printed: f64,
    /// Least-squares coefficients of `g [Q_4, a] g^{-1}` on
    /// `ad(gamma)` applied to `nabla^3 gamma_x`, `gamma_x^2 nabla gamma_x + nabla gamma_x gamma_x^2`,
    /// `gamma_x nabla gamma_x gamma_x`, `gamma_x`.
    pub j2_fit: Vec<f64>,
    /// Relative residual of that fit.
    pub j2_fit_residual: f64,
}

fn relative(a: &MatrixField, b: &MatrixField) -> Result<f64> {
    Ok(a.distance(b)? / b.max_norm().max(f64::MIN_POSITIVE))
}

/// Evaluates the printed geometric flows for `j = 0, 1, 2` and the frame-side
/// right-hand sides they should equal.
pub fn cross_check_geometric_flows(fp: &FramedPath) -> Result<GeometricReport> {
    let gamma = fp.gamma();
    let params = fp.params();
    let table = compute_hierarchy(fp.u(), params, 4)?;
    let frame_rhs = |j: usize| -> Result<MatrixField> { Ok(table.flow_rhs(j + 1)?.conjugate_by(fp.frames())) };
    let chain = covariant_chain(fp, 3)?;
    let gx = &chain.terms[0];
    let j_op = |x: &MatrixField| gamma.bracket(x);
    let cube = gx.map(|x| x * x * x);

    let j0 = j_op(&chain.terms[1])?;
    let f0 = frame_rhs(0)?;
    let j0_vs_bracket = relative(&j0, &gnls_rhs(gamma)?)?;
    let j0_vs_frame = relative(&j0, &f0)?;

    let f1 = frame_rhs(1)?;
    let j1_printed = relative(&chain.terms[2].axpy(2.0, &cube)?, &f1)?;
    let j1_sign_flipped = relative(&cube.scale(2.0).sub(&chain.terms[2])?, &f1)?;

    let f2 = frame_rhs(2)?;
    let j2 = j_op(&chain.terms[3].axpy(-6.0, gx)?)?;
    let j2_printed = relative(&j2, &f2)?;

    let n1 = &chain.terms[1];
    let basis = [
        j_op(&chain.terms[3])?,
        j_op(&gx.zip_map(n1, |g, d| g * g * d + d * g * g)?)?,
        j_op(&gx.zip_map(n1, |g, d| g * d * g)?)?,
        j_op(gx)?,
    ];
    let flat = |f: &MatrixField| -> Vec<f64> {
        f.values().iter().flat_map(|m| m.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect()
    };
    let cols: Vec<Vec<f64>> = basis.iter().map(flat).collect();
    let rows = cols[0].len();
    let a = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    let b = DVector::from_vec(flat(&f2));
    let svd = a.clone().svd(true, true);
    let coeffs = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::NumericalFailure(format!("geometric fit failed: {e}")))?;
    let fit_residual = (&a * &coeffs - &b).amax() / b.amax().max(f64::MIN_POSITIVE);

    Ok(GeometricReport {
        j0_vs_bracket,
        j0_vs_frame,
        j1_printed,
        j1_sign_flipped,
        j2_printed,
        j2_fit: coeffs.iter().copied().collect(),
        j2_fit_residual: fit_residual,
    })
}

/// `max |gamma_x + ad(gamma)^2 gamma_x|`, the `lambda^2` coefficient of the
/// GNLS curvature, which vanishes on any orbit path.
pub fn gnls_lambda2_defect(gamma: &MatrixField) -> Result<f64> {
    let gx = gamma.ddx_asymptotic();
    Ok(gx.add(&gamma.bracket(&gamma.bracket(&gx)?)?)?.max_norm())
}

/// Convenience: the framed lift of a path state.
pub fn frame_of(state: &State, params: &OrbitParams) -> Result<FramedPath> {
    match state {
        State::Path(g) => development::develop(&GrassmannPath::new(g.clone(), params)?, params),
        State::Field(u) => undevelop(u, params),
        State::Scalar(_) => Err(Error::ModelMismatch("scalar states have no frame".into())),
    }
}

