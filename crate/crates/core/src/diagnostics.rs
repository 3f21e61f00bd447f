//! Entropy dissipation and weak residuals over stored trajectories.
//!
//! All space-time integrals are trapezoid sums: periodic in `x`, over the
//! stored levels in `y`. Terms carrying `φ_y` use the summation-by-parts
//! form `Σ ½(a_k + a_{k+1})(φ_{k+1} - φ_k)`, which is the exact discrete
//! dual of a trapezoid integral of `a_y φ`.

use crate::error::{Error, Result};
use crate::metric_lab::{christoffels, ChristoffelSet, MetricSpec, YMetric};
use crate::solver::Trajectory;
use crate::state_space::{from_uv, FundForms, StateField};

/// Quintic smoothstep plateau bump in one variable on `|t| ≤ 1`, returning
/// the value and first two derivatives in `t`.
fn bump1d(t: f64, core: f64) -> (f64, f64, f64) {
    let a = t.abs();
    if a <= core {
        return (1.0, 0.0, 0.0);
    }
    if a >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let w = 1.0 - core;
    let s = (a - core) / w;
    let p = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let dp = -30.0 * s * s * (1.0 - s) * (1.0 - s) / w;
    let ddp = -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (w * w);
    (p, t.signum() * dp, ddp)
}

/// Values of `φ` and the derivatives used by the residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValues {
    pub phi: f64,
    pub phi_x: f64,
    pub phi_y: f64,
    pub phi_xx: f64,
}

/// Tensor-product bump `φ(x, y) = A p((x - xc)/hx) p((y - yc)/hy)`, equal
/// to `A` on the central `core_fraction` of its support and `C²` at the
/// support edge. `x` distances wrap with the period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub x_center: f64,
    pub x_halfwidth: f64,
    pub y_center: f64,
    pub y_halfwidth: f64,
    pub core_fraction: f64,
    pub amplitude: f64,
    pub period: f64,
}

impl TestFunction {
    pub fn tensor_bump(x_center: f64, x_halfwidth: f64, y_center: f64, y_halfwidth: f64, period: f64) -> Self {
        Self { x_center, x_halfwidth, y_center, y_halfwidth, core_fraction: 0.5, amplitude: 1.0, period }
    }

    /// Bump over `[0.05, 0.65] period × [-0.95, -0.05] y0`; off-centre in `x`
    /// so that data symmetric about `period / 2` still gives nonzero pairings.
    pub fn standard(y0: f64, period: f64) -> Self {
        Self::tensor_bump(0.35 * period, 0.3 * period, -0.5 * y0, 0.45 * y0, period)
    }

    pub fn zero(period: f64) -> Self {
        Self { amplitude: 0.0, ..Self::tensor_bump(0.0, 1.0, -0.5, 0.25, period) }
    }

    pub fn y_support(&self) -> (f64, f64) {
        (self.y_center - self.y_halfwidth, self.y_center + self.y_halfwidth)
    }

    /// Fails unless the support lies in `[-y0, 0]` and is shorter than the period.
    pub fn check_support(&self, y0: f64) -> Result<()> {
        if !(self.x_halfwidth > 0.0 && self.y_halfwidth > 0.0) {
            return Err(Error::Support("half-widths must be positive".into()));
        }
        if !(self.core_fraction >= 0.0 && self.core_fraction < 1.0) {
            return Err(Error::Support(format!("core fraction {} outside [0, 1)", self.core_fraction)));
        }
        if 2.0 * self.x_halfwidth > self.period * (1.0 + 1e-12) {
            return Err(Error::Support("x support wraps onto itself".into()));
        }
        let (lo, hi) = self.y_support();
        let tol = 1e-12 * y0.max(1.0);
        if lo < -y0 - tol || hi > tol {
            return Err(Error::Support(format!("y support [{lo}, {hi}] leaves [-{y0}, 0]")));
        }
        Ok(())
    }

    fn wrap(&self, x: f64) -> f64 {
        let d = (x - self.x_center).rem_euclid(self.period);
        if d > 0.5 * self.period {
            d - self.period
        } else {
            d
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> PhiValues {
        let (px, dpx, ddpx) = bump1d(self.wrap(x) / self.x_halfwidth, self.core_fraction);
        let (py, dpy, _) = bump1d((y - self.y_center) / self.y_halfwidth, self.core_fraction);
        let a = self.amplitude;
        PhiValues {
            phi: a * px * py,
            phi_x: a * dpx * py / self.x_halfwidth,
            phi_y: a * px * dpy / self.y_halfwidth,
            phi_xx: a * ddpx * py / (self.x_halfwidth * self.x_halfwidth),
        }
    }
}

/// Entropy `η = (M̃² + 1)/L̃` and flux `q = (M̃ - M̃³)/L̃²` at every node.
pub fn entropy_pair(field: &StateField) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut eta = Vec::with_capacity(field.nx);
    let mut q = Vec::with_capacity(field.nx);
    for (&u, &v) in field.u.iter().zip(&field.v) {
        let f = from_uv(u, v)?;
        eta.push((f.mt * f.mt + 1.0) / f.lt);
        q.push((f.mt - f.mt * f.mt * f.mt) / (f.lt * f.lt));
    }
    Ok((eta, q))
}

/// Hessian of `η` in `(L̃, M̃)`.
pub fn entropy_hessian(lt: f64, mt: f64) -> [[f64; 2]; 2] {
    let l2 = lt * lt;
    [[2.0 * (mt * mt + 1.0) / (l2 * lt), -2.0 * mt / l2], [-2.0 * mt / l2, 2.0 / lt]]
}

/// `(R_A, R_B)`: the Christoffel combinations on the right of the two
/// Codazzi equations.
fn codazzi_rhs(f: &FundForms, gt: &ChristoffelSet) -> (f64, f64) {
    (
        gt.t2_22 * f.lt - 2.0 * gt.t2_12 * f.mt + gt.t2_11 * f.nt,
        gt.t1_22 * f.lt - 2.0 * gt.t1_12 * f.mt + gt.t1_11 * f.nt,
    )
}

/// Production term `Π` of the entropy balance.
pub fn entropy_production(f: &FundForms, gt: &ChristoffelSet) -> f64 {
    let (ra, rb) = codazzi_rhs(f, gt);
    (f.mt * f.mt + 1.0) / (f.lt * f.lt) * ra + 2.0 * f.mt / f.lt * rb
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    /// `η` per stored level and node.
    pub eta: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// `2ε ∬ ((v_x² + u_x²)/v) φ`.
    pub dissipation: f64,
    /// `∬ (ε η φ_xx + η φ_y + q φ_x + Π φ)`.
    pub bound_estimate: f64,
}

/// Stored levels with their trapezoid weights, after support checks.
fn quadrature_levels<'a>(traj: &'a Trajectory, phi: &TestFunction) -> Result<(Vec<&'a StateField>, Vec<f64>)> {
    let levels: Vec<&StateField> = traj.levels.iter().collect();
    let first = levels.first().ok_or_else(|| Error::Grid("trajectory has no stored levels".into()))?;
    let y0 = -first.y;
    phi.check_support(y0)?;
    let (lo, hi) = phi.y_support();
    let inside = levels.iter().filter(|f| f.y > lo && f.y < hi).count();
    if phi.amplitude != 0.0 && inside < 16 {
        return Err(Error::Grid(format!("only {inside} stored levels inside the test-function support, need 16")));
    }
    if levels.windows(2).any(|p| !(p[1].y > p[0].y)) {
        return Err(Error::Grid("stored levels must increase in y".into()));
    }
    let n = levels.len();
    let weights = (0..n)
        .map(|k| {
            let left = if k > 0 { levels[k].y - levels[k - 1].y } else { 0.0 };
            let right = if k + 1 < n { levels[k + 1].y - levels[k].y } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    Ok((levels, weights))
}

fn centred(values: &[f64], i: usize, dx: f64) -> f64 {
    let n = values.len();
    (values[(i + 1) % n] - values[(i + n - 1) % n]) / (2.0 * dx)
}

/// `φ` on every stored node. The x-derivatives are replaced by the centred
/// differences of the nodal values so that the x-sums are exact discrete
/// duals of the difference operators applied to the state.
fn phi_grid(levels: &[&StateField], phi: &TestFunction) -> Vec<Vec<PhiValues>> {
    levels
        .iter()
        .map(|f| {
            let vals: Vec<PhiValues> = (0..f.nx).map(|i| phi.eval(f.x(i), f.y)).collect();
            let n = f.nx;
            (0..n)
                .map(|i| {
                    let (m, c, p) = (vals[(i + n - 1) % n].phi, vals[i].phi, vals[(i + 1) % n].phi);
                    PhiValues { phi_x: (p - m) / (2.0 * f.dx), phi_xx: (p - 2.0 * c + m) / (f.dx * f.dx), ..vals[i] }
                })
                .collect()
        })
        .collect()
}

/// `Σ_i dx Σ_k ½(a_k + a_{k+1})(φ_{k+1} - φ_k)`.
fn y_dual(a: &[Vec<f64>], ph: &[Vec<PhiValues>], dx: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..a.len().saturating_sub(1) {
        for i in 0..a[k].len() {
            total += 0.5 * (a[k][i] + a[k + 1][i]) * (ph[k + 1][i].phi - ph[k][i].phi);
        }
    }
    total * dx
}

/// Dissipation functional and the right-hand side of the entropy balance.
///
/// The two agree in the continuum; the discrete gap is first order in `dx`.
pub fn dissipation(traj: &Trajectory, phi: &TestFunction, eps: f64, metric: &MetricSpec) -> Result<EntropyReport> {
    let (levels, weights) = quadrature_levels(traj, phi)?;
    let ph = phi_grid(&levels, phi);
    let dx = levels[0].dx;
    let mut etas = Vec::with_capacity(levels.len());
    let mut qs = Vec::with_capacity(levels.len());
    let mut diss = 0.0;
    let mut bound = 0.0;
    for (k, field) in levels.iter().enumerate() {
        let (eta, q) = entropy_pair(field)?;
        let gt = christoffels(&metric.sample(field.y))?;
        let mut d_level = 0.0;
        let mut b_level = 0.0;
        for i in 0..field.nx {
            let p = ph[k][i];
            let ux = centred(&field.u, i, dx);
            let vx = centred(&field.v, i, dx);
            d_level += (vx * vx + ux * ux) / field.v[i] * p.phi;
            let forms = from_uv(field.u[i], field.v[i])?;
            b_level += eps * eta[i] * p.phi_xx + q[i] * p.phi_x + entropy_production(&forms, &gt) * p.phi;
        }
        diss += weights[k] * dx * 2.0 * eps * d_level;
        bound += weights[k] * dx * b_level;
        etas.push(eta);
        qs.push(q);
    }
    bound += y_dual(&etas, &ph, dx);
    Ok(EntropyReport { eta: etas, q: qs, dissipation: diss, bound_estimate: bound })
}

/// `|∬ ε L̃_x φ_x|`.
pub fn weak_viscous_residual(traj: &Trajectory, phi: &TestFunction, eps: f64) -> Result<f64> {
    let (levels, weights) = quadrature_levels(traj, phi)?;
    let ph = phi_grid(&levels, phi);
    let mut total = 0.0;
    for ((field, w), p) in levels.iter().zip(&weights).zip(&ph) {
        let lt: Vec<f64> = field.v.iter().map(|v| 1.0 / v).collect();
        let level: f64 = (0..field.nx).map(|i| centred(&lt, i, field.dx) * p[i].phi_x).sum();
        total += w * field.dx * eps * level;
    }
    Ok(total.abs())
}

/// Forms and Christoffel coefficients used by one Codazzi residual variant.
fn codazzi_residual_with(
    traj: &Trajectory,
    metric: &MetricSpec,
    phi: &TestFunction,
    physical: bool,
) -> Result<(f64, f64)> {
    let (levels, weights) = quadrature_levels(traj, phi)?;
    let ph = phi_grid(&levels, phi);
    let dx = levels[0].dx;
    let mut l_grid = Vec::with_capacity(levels.len());
    let mut m_grid = Vec::with_capacity(levels.len());
    let (mut r1, mut r2) = (0.0, 0.0);
    for (k, field) in levels.iter().enumerate() {
        let sample = metric.sample(field.y);
        let chr = christoffels(&sample)?;
        let (gamma, gt) = if physical {
            // untilded symbols placed in the tilde slots
            let g = ChristoffelSet {
                t1_11: chr.g1_11,
                t2_11: chr.g2_11,
                t1_12: chr.g1_12,
                t2_12: chr.g2_12,
                t1_22: chr.g1_22,
                t2_22: chr.g2_22,
                ..chr
            };
            (sample.gamma, g)
        } else {
            (1.0, chr)
        };
        let mut ls = Vec::with_capacity(field.nx);
        let mut ms = Vec::with_capacity(field.nx);
        let (mut a1, mut a2) = (0.0, 0.0);
        for i in 0..field.nx {
            let t = from_uv(field.u[i], field.v[i])?;
            let f = FundForms { lt: gamma * t.lt, mt: gamma * t.mt, nt: gamma * t.nt, ..t };
            let (ra, rb) = codazzi_rhs(&f, &gt);
            let p = ph[k][i];
            a1 += -f.mt * p.phi_x - ra * p.phi;
            a2 += f.nt * p.phi_x - rb * p.phi;
            ls.push(f.lt);
            ms.push(f.mt);
        }
        r1 += weights[k] * dx * a1;
        r2 += weights[k] * dx * a2;
        l_grid.push(ls);
        m_grid.push(ms);
    }
    r1 += y_dual(&l_grid, &ph, dx);
    r2 -= y_dual(&m_grid, &ph, dx);
    Ok((r1, r2))
}

/// Weak residuals of the normalized Codazzi equations:
/// `r1 = ∬ (-M̃ φ_x + L̃ φ_y - R_A φ)`, `r2 = ∬ (Ñ φ_x - M̃ φ_y - R_B φ)` with
/// `R_A = Γ̃²₂₂L̃ - 2Γ̃²₁₂M̃ + Γ̃²₁₁Ñ`, `R_B = Γ̃¹₂₂L̃ - 2Γ̃¹₁₂M̃ + Γ̃¹₁₁Ñ`.
pub fn codazzi_weak_residual(traj: &Trajectory, metric: &MetricSpec, phi: &TestFunction) -> Result<(f64, f64)> {
    codazzi_residual_with(traj, metric, phi, false)
}

/// Same residuals for the physical forms `(L, M, N) = γ(L̃, M̃, Ñ)` with the
/// untilded Christoffel symbols.
pub fn codazzi_weak_residual_physical(
    traj: &Trajectory,
    metric: &MetricSpec,
    phi: &TestFunction,
) -> Result<(f64, f64)> {
    codazzi_residual_with(traj, metric, phi, true)
}

/// Every diagnostic of one run at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub dissipation: f64,
    pub bound_estimate: f64,
    pub visc_residual: f64,
    pub r1: f64,
    pub r2: f64,
}

pub fn evaluate_run(traj: &Trajectory, metric: &MetricSpec, phi: &TestFunction) -> Result<SweepRow> {
    let eps = traj.epsilon;
    let report = dissipation(traj, phi, eps, metric)?;
    let (r1, r2) = codazzi_weak_residual(traj, metric, phi)?;
    Ok(SweepRow {
        epsilon: eps,
        dissipation: report.dissipation,
        bound_estimate: report.bound_estimate,
        visc_residual: weak_viscous_residual(traj, phi, eps)?,
        r1,
        r2,
    })
}

/// `max |L̃Ñ - M̃² + 1|` over a field.
pub fn gauss_residual_field(field: &StateField) -> f64 {
    field
        .u
        .iter()
        .zip(&field.v)
        .map(|(&u, &v)| from_uv(u, v).map_or(f64::INFINITY, |f| f.gauss_defect().abs()))
        .fold(0.0, f64::max)
}

/// `max |L̃Ñ - M̃² + 1|` over arbitrary forms.
pub fn gauss_residual_forms(forms: &[FundForms]) -> f64 {
    forms.iter().map(|f| f.gauss_defect().abs()).fold(0.0, f64::max)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Domain("need at least two paired samples".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive samples".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("x samples are all equal".into()));
    }
    Ok(sxy / sxx)
}
