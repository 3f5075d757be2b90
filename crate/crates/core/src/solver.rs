//! Damped Newton solves of `F_t(g) = 0` and the continuity driver that
//! follows solutions from large `t` (where the auxiliary points dominate)
//! down to `t_end`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{PointScheme, QuadratureGrid, Scheme};
use crate::linearization::assemble_operator;
use crate::moment_map::{moment_matrix, residual_t, Residual};
use crate::projective::{
    basis_coordinates, from_basis_coordinates, traceless_hermitian_basis, CMatrix, CVector, GroupElement,
    HermitianMatrix, ProjPoint,
};
use crate::schema::ComplexMatrixJson;
use crate::stability::{general_position, point_set_stable, roots_of_unity_config, StabilityStatus};

/// Backtracking parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearch {
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch { shrink: 0.5, max_backtracks: 30 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Absolute Frobenius tolerance on the residual; `1e-9 * volume` when unset.
    pub residual_tol: Option<f64>,
    pub max_newton_iters: usize,
    pub step_fd: f64,
    pub line_search: LineSearch,
    /// Shift added to the operator when its smallest eigenvalue is below `eig_floor`.
    pub tikhonov: f64,
    pub eig_floor: f64,
    /// Largest Frobenius norm of a single Newton update.
    pub max_step: f64,
    /// Iterates whose condition number exceeds this are reported as degenerate.
    pub max_condition: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            residual_tol: None,
            max_newton_iters: 60,
            step_fd: 1e-5,
            line_search: LineSearch::default(),
            tikhonov: 1e-6,
            eig_floor: 1e-8,
            max_step: 1.0,
            max_condition: 1e12,
        }
    }
}

impl SolverConfig {
    /// Defaults with a fixed absolute tolerance.
    pub fn with_tolerance(tol: f64) -> Self {
        SolverConfig { residual_tol: Some(tol), ..SolverConfig::default() }
    }

    pub fn tolerance_for(&self, volume: f64) -> f64 {
        self.residual_tol.unwrap_or(1e-9 * volume)
    }

    pub fn validate(&self) -> Result<()> {
        if self.residual_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Configuration("residual_tol must be positive".into()));
        }
        let s = self.line_search.shrink;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Configuration("line-search shrink factor must lie in (0,1)".into()));
        }
        if !(self.step_fd > 0.0) || !(self.max_step > 0.0) || !(self.tikhonov >= 0.0) {
            return Err(Error::Configuration("solver steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Converged,
    Stalled,
    Degenerate,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Stalled => "stalled",
            SolveStatus::Degenerate => "degenerate",
        })
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub g: GroupElement,
    pub residual: Residual,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Smallest eigenvalue of the last assembled operator.
    pub min_eigenvalue: Option<f64>,
    /// Residual norm after every accepted iterate, starting with `g0`.
    pub history: Vec<f64>,
}

/// Damped Newton for `F_t(g) = 0` in the directions `g -> exp(U) g`, `U`
/// traceless Hermitian.
pub fn newton_solve_at_t(
    g0: &GroupElement,
    x: &Scheme,
    d: Option<&PointScheme>,
    t: f64,
    config: &SolverConfig,
    grid: &QuadratureGrid,
) -> Result<NewtonOutcome> {
    config.validate()?;
    let basis = traceless_hermitian_basis(x.n());
    let mut g = g0.clone();
    let mut r = residual_t(&g, x, d, t, grid)?;
    let tol = config.tolerance_for(r.volume);
    let mut history = vec![r.frobenius];
    let mut min_eig = None;
    let mut status = SolveStatus::Stalled;
    let mut iterations = 0;

    while iterations < config.max_newton_iters {
        if r.frobenius < tol {
            status = SolveStatus::Converged;
            break;
        }
        if g.condition_number() > config.max_condition {
            status = SolveStatus::Degenerate;
            break;
        }
        let op = assemble_operator(&g, x, d, t, config.step_fd, grid)?;
        let sym = op.symmetrized();
        let lmin = op.min_eigenvalue();
        min_eig = Some(lmin);
        let rhs = -DVector::from_vec(basis_coordinates(&basis, &r.matrix));

        let mut system = sym.clone();
        if lmin < config.eig_floor {
            for i in 0..system.nrows() {
                system[(i, i)] += config.tikhonov;
            }
        }
        let newton = solve_linear(system, &rhs);

        let mut accepted = None;
        let candidates = newton.into_iter().chain(std::iter::once(rhs.clone()));
        for dir in candidates {
            let dir = clip(dir, config.max_step);
            if let Some(step) = line_search(&g, &dir, &basis, &r, x, d, t, config, grid)? {
                accepted = Some(step);
                break;
            }
        }
        iterations += 1;
        match accepted {
            Some((g_new, r_new)) => {
                g = g_new;
                r = r_new;
                history.push(r.frobenius);
            }
            None => {
                status = if lmin < config.eig_floor { SolveStatus::Degenerate } else { SolveStatus::Stalled };
                break;
            }
        }
    }
    if iterations == config.max_newton_iters && r.frobenius < tol {
        status = SolveStatus::Converged;
    }
    Ok(NewtonOutcome { g, residual: r, status, iterations, min_eigenvalue: min_eig, history })
}

fn solve_linear(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let u = m.lu().solve(rhs)?;
    u.iter().all(|x| x.is_finite()).then_some(u)
}

fn clip(u: DVector<f64>, max_norm: f64) -> DVector<f64> {
    let n = u.norm();
    if n > max_norm {
        u * (max_norm / n)
    } else {
        u
    }
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    g: &GroupElement,
    dir: &DVector<f64>,
    basis: &[HermitianMatrix],
    r: &Residual,
    x: &Scheme,
    d: Option<&PointScheme>,
    t: f64,
    config: &SolverConfig,
    grid: &QuadratureGrid,
) -> Result<Option<(GroupElement, Residual)>> {
    let u = from_basis_coordinates(basis, dir.as_slice());
    let mut alpha = 1.0;
    for _ in 0..=config.line_search.max_backtracks {
        let g_try = g.left_exp(&u, alpha);
        let r_try = match residual_t(&g_try, x, d, t, grid) {
            Ok(r) => r,
            Err(Error::NumericalFailure(_)) => {
                alpha *= config.line_search.shrink;
                continue;
            }
            Err(e) => return Err(e),
        };
        if r_try.frobenius < (1.0 - 1e-4 * alpha) * r.frobenius {
            return Ok(Some((g_try, r_try)));
        }
        alpha *= config.line_search.shrink;
    }
    Ok(None)
}

/// Sends `n+2` points in general position to the reference configuration,
/// `p_b -> v_b` up to scale.
pub fn frame_map(points: &[ProjPoint]) -> Result<GroupElement> {
    let n = points[0].n();
    if points.len() != n + 2 || !general_position(points) {
        return Err(Error::Configuration("frame map needs n+2 points in general position".into()));
    }
    let e = roots_of_unity_config(n);
    let t_d = frame_matrix(points)?;
    let t_e = frame_matrix(e.points())?;
    let inv = t_d.try_inverse().ok_or_else(|| Error::NumericalFailure("frame matrix is singular".into()))?;
    GroupElement::new(t_e * inv)
}

/// `P diag(c)` with `P c = p_{n+1}`: sends `e_b -> p_b` and `(1,...,1) -> p_{n+1}`.
fn frame_matrix(points: &[ProjPoint]) -> Result<CMatrix> {
    let n = points[0].n();
    let cols: Vec<CVector> = points[..=n].iter().map(|p| p.normalized()).collect();
    let p = CMatrix::from_columns(&cols);
    let c = p
        .clone()
        .lu()
        .solve(&points[n + 1].normalized())
        .ok_or_else(|| Error::NumericalFailure("frame points are dependent".into()))?;
    Ok(p * CMatrix::from_diagonal(&c))
}

/// A group element balancing `D`. For `n+2` reduced points in general
/// position the start is the coordinate change onto the reference
/// configuration; otherwise the inverse square root of the moment matrix.
pub fn balanced_start_for_d(d: &PointScheme, config: &SolverConfig, grid: &QuadratureGrid) -> Result<GroupElement> {
    let n = d.n();
    let g0 = if d.len() == n + 2 && d.multiplicities().iter().all(|&m| m == 1) && general_position(d.points()) {
        frame_map(d.points())?
    } else {
        let m = moment_matrix(&Scheme::Points(d.clone()), grid)?;
        let lambda = m.scheme_mass / (n + 1) as f64;
        GroupElement::new(m.matrix.scale(1.0 / lambda).psd_power(-0.5))
            .map_err(|_| Error::NoBalancedModel { residual: f64::INFINITY })?
    };
    let x = Scheme::Points(d.clone());
    let out = newton_solve_at_t(&g0, &x, None, 0.0, config, grid)?;
    if out.status != SolveStatus::Converged {
        return Err(Error::NoBalancedModel { residual: out.residual.frobenius });
    }
    Ok(out.g)
}

/// Representative of `g` modulo left unitaries and scalars: the positive
/// polar factor `(g* g)^{1/2}` scaled to determinant one.
pub fn gauge_normalize(g: &GroupElement) -> GroupElement {
    let svd = g.matrix().clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let sigma = &svd.singular_values;
    let dim = sigma.len();
    let log_det: f64 = sigma.iter().map(|s| s.ln()).sum::<f64>() / dim as f64;
    let scale = (-log_det).exp();
    let diag = CVector::from_iterator(dim, sigma.iter().map(|&s| Complex64::new(s * scale, 0.0)));
    let h = v_t.adjoint() * CMatrix::from_diagonal(&diag) * &v_t;
    GroupElement::new(HermitianMatrix::new(h).into_matrix()).expect("positive definite")
}

/// Whether `p` lies on the image of the curve, to chordal distance `tol`.
pub fn curve_contains(curve: &crate::integration::CurveScheme, p: &ProjPoint, tol: f64) -> bool {
    let z = p.normalized();
    let j = (0..z.len()).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm())).unwrap_or(0);
    let deg = curve.degree();
    // q_i(u) = z_j Z_i(u) - z_i Z_j(u) share a root at the parameter of p;
    // a fixed combination of them is searched for roots in chart 0, and the
    // point at infinity is checked directly.
    let coeffs = curve.coefficients();
    let weights: Vec<Complex64> =
        (0..coeffs.nrows()).map(|i| Complex64::new(1.0 + 0.37 * i as f64, 0.61 - 0.23 * i as f64)).collect();
    let poly: Vec<Complex64> = (0..=deg)
        .map(|k| (0..coeffs.nrows()).map(|i| weights[i] * (z[j] * coeffs[(i, k)] - z[i] * coeffs[(j, k)])).sum())
        .collect();
    let on_curve = |u: Complex64, chart: usize| {
        let (zu, _) = curve.evaluate(chart, u);
        ProjPoint::new(zu).map(|q| q.equivalent(p, tol)).unwrap_or(false)
    };
    if on_curve(Complex64::new(0.0, 0.0), 1) {
        return true;
    }
    let top = (0..=deg).rev().find(|&k| poly[k].norm() > 1e-14);
    match top {
        None => (0..8).any(|k| on_curve(Complex64::from_polar(0.5, k as f64), 0)),
        Some(0) => false,
        Some(top) => {
            let mut comp = CMatrix::zeros(top, top);
            for k in 0..top {
                comp[(0, k)] = -poly[top - 1 - k] / poly[top];
            }
            for k in 1..top {
                comp[(k, k - 1)] = Complex64::new(1.0, 0.0);
            }
            match Schur::new(comp).eigenvalues() {
                Some(roots) => roots.iter().any(|&u| on_curve(u, 0)),
                None => false,
            }
        }
    }
}

/// Parameters of the `t` schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    /// Entry value of `t`; `10 * volume(X) / mass(D)` when unset.
    pub t_start: Option<f64>,
    pub gamma: f64,
    pub t_end: f64,
    pub max_halvings: usize,
    /// Below this value the next step goes straight to `t_end`.
    pub snap_below: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { t_start: None, gamma: 0.7, t_end: 0.0, max_halvings: 12, snap_below: 1e-2 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.t_start.is_some_and(|t| !(t > self.t_end)) || !(self.t_end >= 0.0) {
            return Err(Error::Configuration("schedule needs t_start > t_end >= 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Configuration("gamma must lie in (0,1)".into()));
        }
        Ok(())
    }

    fn next(&self, t: f64) -> f64 {
        let next = self.gamma * t;
        if next <= self.t_end || next < self.snap_below {
            self.t_end
        } else {
            next
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub g: ComplexMatrixJson,
    pub residual: f64,
    /// Residual of the warm start before any Newton step at this `t`.
    pub entry_residual: f64,
    pub newton_iterations: usize,
    pub min_eigenvalue: f64,
    pub cond_g: f64,
    pub status: SolveStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunOutcome {
    Success,
    Breakdown,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityTrace {
    pub records: Vec<TraceRecord>,
    pub outcome: RunOutcome,
    /// Whether `D` was allowed to leave `X`.
    pub aux_off_scheme: bool,
}

impl ContinuityTrace {
    pub fn last_converged(&self) -> Option<&TraceRecord> {
        self.records.iter().rev().find(|r| r.status == SolveStatus::Converged)
    }

    /// `t,residual,iters,min_eig,cond_g,status`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "residual", "iters", "min_eig", "cond_g", "status"])?;
        for r in &self.records {
            out.write_record([
                r.t.to_string(),
                r.residual.to_string(),
                r.newton_iterations.to_string(),
                r.min_eigenvalue.to_string(),
                r.cond_g.to_string(),
                r.status.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Continuity options beyond the schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ContinuityOptions {
    /// Permit auxiliary points that do not lie on `X`.
    pub allow_aux_off_scheme: bool,
}

fn aux_on_scheme(x: &Scheme, d: &PointScheme) -> bool {
    match x {
        Scheme::Points(xp) => d.points().iter().all(|p| xp.points().iter().any(|q| q.equivalent(p, 1e-9))),
        Scheme::Curve(c) => d.points().iter().all(|p| curve_contains(c, p, 1e-7)),
    }
}

/// Follows solutions of `F_t = 0` from `t_start` down to `t_end`.
pub fn continuity_run(
    x: &Scheme,
    d: &PointScheme,
    config: &SolverConfig,
    schedule: &Schedule,
    grid: &QuadratureGrid,
) -> Result<ContinuityTrace> {
    continuity_run_with(x, d, config, schedule, grid, ContinuityOptions::default())
}

pub fn continuity_run_with(
    x: &Scheme,
    d: &PointScheme,
    config: &SolverConfig,
    schedule: &Schedule,
    grid: &QuadratureGrid,
    options: ContinuityOptions,
) -> Result<ContinuityTrace> {
    config.validate()?;
    schedule.validate()?;
    if d.n() != x.n() {
        return Err(Error::DimensionMismatch { expected: x.n() + 1, found: d.n() + 1 });
    }
    let verdict = point_set_stable(d);
    if verdict.status != StabilityStatus::Stable {
        return Err(Error::UnstableAuxiliary(format!(
            "criterion margin {:.3e} ({:?})",
            verdict.margin, verdict.status
        )));
    }
    let on_scheme = aux_on_scheme(x, d);
    if !on_scheme && !options.allow_aux_off_scheme {
        return Err(Error::Configuration("auxiliary points do not lie on the scheme".into()));
    }

    let record = |t: f64, entry: f64, out: &NewtonOutcome| -> Result<TraceRecord> {
        let op = assemble_operator(&out.g, x, Some(d), t, config.step_fd, grid)?;
        Ok(TraceRecord {
            t,
            g: ComplexMatrixJson::from(out.g.matrix()),
            residual: out.residual.frobenius,
            entry_residual: entry,
            newton_iterations: out.iterations,
            min_eigenvalue: op.min_eigenvalue(),
            cond_g: out.g.condition_number(),
            status: out.status,
        })
    };

    let mut records = Vec::new();
    let g_d = balanced_start_for_d(d, config, grid)?;
    let mut t = match schedule.t_start {
        Some(t) => t,
        None => 10.0 * crate::integration::volume(x, grid)? / d.mass(),
    };
    if !(t > schedule.t_end) {
        return Err(Error::Configuration("schedule needs t_start > t_end >= 0".into()));
    }
    let entry = residual_t(&g_d, x, Some(d), t, grid)?.frobenius;
    let first = newton_solve_at_t(&g_d, x, Some(d), t, config, grid)?;
    records.push(record(t, entry, &first)?);
    if first.status != SolveStatus::Converged {
        return Ok(ContinuityTrace { records, outcome: RunOutcome::Breakdown, aux_off_scheme: !on_scheme });
    }
    let mut g = first.g;

    while t > schedule.t_end {
        let mut target = schedule.next(t);
        let mut halvings = 0;
        loop {
            let entry = residual_t(&g, x, Some(d), target, grid)?.frobenius;
            let out = newton_solve_at_t(&g, x, Some(d), target, config, grid)?;
            if out.status == SolveStatus::Converged {
                records.push(record(target, entry, &out)?);
                g = out.g;
                t = target;
                break;
            }
            halvings += 1;
            let step = 0.5 * (t - target);
            if halvings > schedule.max_halvings || step <= f64::EPSILON * t.max(1.0) {
                records.push(record(target, entry, &out)?);
                return Ok(ContinuityTrace { records, outcome: RunOutcome::Breakdown, aux_off_scheme: !on_scheme });
            }
            target = t - step;
        }
    }
    Ok(ContinuityTrace { records, outcome: RunOutcome::Success, aux_off_scheme: !on_scheme })
}
