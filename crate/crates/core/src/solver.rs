//! Vanishing-viscosity solver for the `(u, v)` system on a periodic x-grid.
//!
//! The unknowns are advanced as scaled Riemann invariants
//! `W = s(y)(u + v)`, `Z = s(y)(u - v)` with `s = B` for the helicoid class
//! and `s = 1` otherwise:
//!
//! ```text
//! W_y + (λ1 + 2ε v_x / v) W_x = ε W_xx + s (f + g) + (s'/s) W
//! Z_y + (λ2 + 2ε v_x / v) Z_x = ε Z_xx + s (f - g) + (s'/s) Z
//! ```
//!
//! Transport is first-order upwind on the combined velocity, sources are
//! explicit, and diffusion is either explicit or a θ-scheme (Crank–Nicolson
//! when `ε dy/dx² ≤ 1`, otherwise the smallest monotone θ).

use crate::error::{Error, Result};
use crate::invariant_region::{build_region, InvariantRegion, RegionFamily};
use crate::metric_lab::{christoffels, ChristoffelSet, MetricClass, MetricSample, MetricSpec, YMetric};
use crate::state_space::{source_jacobian, source_terms, StateField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    SemiImplicit,
    FullyExplicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub nx: usize,
    pub x_period: f64,
    pub y0: f64,
    pub cfl_advect: f64,
    /// Bound on `dy · |∂(source)/∂(state)|`.
    pub cfl_source: f64,
    /// `None` selects `2 max(dx, √ε)`.
    pub mollifier_width: Option<f64>,
    pub v_floor: f64,
    pub scheme: Scheme,
    /// Region parameter; `None` selects half the admissible upper bound.
    pub delta: Option<f64>,
    /// Ends the run early once the region violation exceeds this value.
    pub stop_on_violation: Option<f64>,
    /// Negates every Christoffel symbol. Fault-injection hook for tests.
    #[doc(hidden)]
    pub flip_christoffels: bool,
}

impl SolverConfig {
    pub fn new(epsilon: f64, nx: usize, y0: f64) -> Self {
        Self {
            epsilon,
            nx,
            x_period: std::f64::consts::TAU,
            y0,
            cfl_advect: 0.4,
            cfl_source: 0.25,
            mollifier_width: None,
            v_floor: 1e-8,
            scheme: Scheme::SemiImplicit,
            delta: None,
            stop_on_violation: None,
            flip_christoffels: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.nx < 16 {
            return Err(Error::Grid(format!("Nx must be at least 16, got {}", self.nx)));
        }
        if !(self.x_period > 0.0) {
            return Err(Error::Domain(format!("x period must be positive, got {}", self.x_period)));
        }
        if !(self.y0 > 0.0) {
            return Err(Error::Domain(format!("y0 must be positive, got {}", self.y0)));
        }
        if !(self.cfl_advect > 0.0 && self.cfl_advect <= 1.0) {
            return Err(Error::Domain(format!("cfl_advect must lie in (0, 1], got {}", self.cfl_advect)));
        }
        if !(self.cfl_source > 0.0) {
            return Err(Error::Domain(format!("cfl_source must be positive, got {}", self.cfl_source)));
        }
        if let Some(w) = self.mollifier_width {
            if !(w >= 0.0) {
                return Err(Error::Domain(format!("mollifier width must be >= 0, got {w}")));
            }
        }
        if !(self.v_floor > 0.0) {
            return Err(Error::Domain(format!("v_floor must be positive, got {}", self.v_floor)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.x_period / self.nx as f64
    }

    pub fn effective_mollifier_width(&self) -> f64 {
        self.mollifier_width.unwrap_or_else(|| 2.0 * self.dx().max(self.epsilon.sqrt()))
    }
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Level reached by the step.
    pub y: f64,
    pub dy: f64,
    pub max_lambda: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub levels: Vec<StateField>,
    pub step_log: Vec<StepRecord>,
    pub region: InvariantRegion,
    pub epsilon: f64,
    pub mollifier_width: f64,
    /// Containment defect of the mollified initial data.
    pub initial_violation: f64,
}

impl Trajectory {
    pub fn initial_outside_region(&self) -> bool {
        self.initial_violation > 0.0
    }

    pub fn max_violation(&self) -> f64 {
        self.step_log.iter().map(|r| r.violation).fold(self.initial_violation, f64::max)
    }

    pub fn final_level(&self) -> Option<&StateField> {
        self.levels.last()
    }
}

/// `(s, s'/s)` for the class: `(B, B'/B)` for helicoid metrics, `(1, 0)`
/// for catenoid metrics.
pub fn invariant_scale(class: &MetricClass, sample: &MetricSample) -> (f64, f64) {
    match class {
        MetricClass::Helicoid { .. } => (sample.b, 0.5 * sample.e_y / sample.e),
        MetricClass::Catenoid { .. } => (1.0, 0.0),
    }
}

/// Spatially constant state annihilated by the sources:
/// `(0, √(-c(2α+1)))` for catenoid metrics and `(0, √(-a-1)/B)` for
/// helicoid metrics.
pub fn stationary_state(class: &MetricClass, sample: &MetricSample) -> (f64, f64) {
    match *class {
        MetricClass::Catenoid { c, beta, .. } => (0.0, (c * (beta * beta - 1.0)).sqrt()),
        MetricClass::Helicoid { a, .. } => (0.0, (-a - 1.0).sqrt() / sample.b),
    }
}

/// Region used for monitoring on this metric.
pub fn region_for(metric: &MetricSpec, delta: Option<f64>) -> Result<InvariantRegion> {
    let family = RegionFamily::from_class(&metric.class());
    build_region(family, delta.unwrap_or_else(|| family.default_delta()))
}

/// Periodic convolution with a normalized `exp(-1/(1-t²))` bump of
/// half-width `width`. Widths below `dx` leave the data unchanged.
pub fn mollify_initial(u_raw: &[f64], v_raw: &[f64], width: f64, dx: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if u_raw.len() != v_raw.len() {
        return Err(Error::Grid("u and v lengths differ".into()));
    }
    if let Some(i) = v_raw.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("v[{i}] = {} is not positive", v_raw[i])));
    }
    if !(width >= 0.0) || !(dx > 0.0) {
        return Err(Error::Domain(format!("invalid mollifier width {width} or spacing {dx}")));
    }
    let n = u_raw.len();
    let half = ((width / dx).ceil() as usize).saturating_sub(1).min(n.saturating_sub(1) / 2);
    if half == 0 {
        return Ok((u_raw.to_vec(), v_raw.to_vec()));
    }
    let mut kernel: Vec<f64> = (0..=half)
        .map(|k| {
            let t = k as f64 * dx / width;
            if t < 1.0 {
                (-1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total = kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>();
    kernel.iter_mut().for_each(|k| *k /= total);
    let conv = |data: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut acc = kernel[0] * data[i];
                for (k, w) in kernel.iter().enumerate().skip(1) {
                    acc += w * (data[(i + k) % n] + data[(i + n - k) % n]);
                }
                acc
            })
            .collect()
    };
    Ok((conv(u_raw), conv(v_raw)))
}

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = r_i` with periodic wrap
/// (`a_0` multiplies `x_{n-1}`, `c_{n-1}` multiplies `x_0`).
pub fn solve_cyclic_tridiagonal(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert!(n >= 3 && a.len() == n && c.len() == n && r.len() == n);
    let alpha = c[n - 1];
    let beta = a[0];
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(a, &bb, c, r);
    let mut unit = vec![0.0; n];
    unit[0] = gamma;
    unit[n - 1] = alpha;
    let z = solve_tridiagonal(a, &bb, c, &unit);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

/// Thomas algorithm; `a[0]` and `c[n-1]` are ignored.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut m = b[0];
    cp[0] = c[0] / m;
    x[0] = r[0] / m;
    for i in 1..n {
        m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        x[i] = (r[i] - a[i] * x[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

/// Per-level data shared by the step-size control and the update.
struct LevelData {
    gt: ChristoffelSet,
    scale: f64,
    ratio: f64,
}

impl LevelData {
    fn new(metric: &MetricSpec, y: f64, flip: bool) -> Result<Self> {
        let sample = metric.sample(y);
        let mut gt = christoffels(&sample)?;
        if flip {
            gt = negate(gt);
        }
        let (scale, ratio) = invariant_scale(&metric.class(), &sample);
        Ok(Self { gt, scale, ratio })
    }
}

fn negate(g: ChristoffelSet) -> ChristoffelSet {
    ChristoffelSet {
        g1_11: -g.g1_11,
        g2_11: -g.g2_11,
        g1_12: -g.g1_12,
        g2_12: -g.g2_12,
        g1_22: -g.g1_22,
        g2_22: -g.g2_22,
        t1_11: -g.t1_11,
        t2_11: -g.t2_11,
        t1_12: -g.t1_12,
        t2_12: -g.t2_12,
        t1_22: -g.t1_22,
        t2_22: -g.t2_22,
    }
}

/// Step-size limits evaluated on the current field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLimits {
    /// `max(|λ1|, |λ2|)`.
    pub max_lambda: f64,
    /// Largest combined transport speed including the viscous cross term.
    pub max_speed: f64,
    /// Largest row sum of the source Jacobian with respect to `(W, Z)`.
    pub source_stiffness: f64,
    /// The stability contract `cfl_advect dx / max|λ|` (and the explicit
    /// diffusion limit where it applies).
    pub contract: f64,
    /// Step used by [`run`]; never larger than `contract`.
    pub adaptive: f64,
}

fn step_limits(field: &StateField, level: &LevelData, cfg: &SolverConfig) -> StepLimits {
    let dx = field.dx;
    let eps = cfg.epsilon;
    let mut max_lambda: f64 = 0.0;
    let mut max_speed: f64 = 0.0;
    let mut stiffness: f64 = 0.0;
    for i in 0..field.nx {
        let (im, ip) = field.neighbours(i);
        let (u, v) = (field.u[i], field.v[i]);
        let cross = eps * (field.v[ip] - field.v[im]) / (dx * v);
        let (l1, l2) = (u - v, u + v);
        max_lambda = max_lambda.max(l1.abs()).max(l2.abs());
        max_speed = max_speed.max((l1 + cross).abs()).max((l2 + cross).abs());
        let j = source_jacobian(u, v, &level.gt);
        let (su, sv) = (j[0][0] + j[1][0], j[0][1] + j[1][1]);
        let (du, dv) = (j[0][0] - j[1][0], j[0][1] - j[1][1]);
        let row_w = (0.5 * (su + sv) + level.ratio).abs() + (0.5 * (su - sv)).abs();
        let row_z = (0.5 * (du + dv)).abs() + (0.5 * (du - dv) + level.ratio).abs();
        stiffness = stiffness.max(row_w).max(row_z);
    }
    let explicit = cfg.scheme == Scheme::FullyExplicit;
    let mut contract = if max_lambda > 0.0 { cfg.cfl_advect * dx / max_lambda } else { f64::INFINITY };
    if explicit {
        contract = contract.min(cfg.cfl_advect * dx * dx / (2.0 * eps));
    }
    let mut adaptive = contract;
    if max_speed > 0.0 {
        adaptive = adaptive.min(cfg.cfl_advect * dx / max_speed);
    }
    if stiffness > 0.0 {
        adaptive = adaptive.min(cfg.cfl_source / stiffness);
    }
    // keep the explicit update a convex combination
    let diffusion_rate = if explicit { 2.0 * eps / (dx * dx) } else { 0.0 };
    let total_rate = max_speed / dx + diffusion_rate + stiffness;
    if total_rate > 0.0 {
        adaptive = adaptive.min(0.9 / total_rate);
    }
    StepLimits { max_lambda, max_speed, source_stiffness: stiffness, contract, adaptive }
}

/// Limits for `field` at its own level.
pub fn cfl_limits(field: &StateField, metric: &MetricSpec, cfg: &SolverConfig) -> Result<StepLimits> {
    let level = LevelData::new(metric, field.y, cfg.flip_christoffels)?;
    Ok(step_limits(field, &level, cfg))
}

fn check_field(field: &StateField, cfg: &SolverConfig) -> Result<()> {
    if !field.periodic {
        return Err(Error::Grid("solver requires a periodic field".into()));
    }
    if field.u.len() != field.nx || field.v.len() != field.nx || field.nx < 16 {
        return Err(Error::Grid(format!("field has {} nodes, need at least 16 consistent entries", field.nx)));
    }
    if let Some(i) = field.v.iter().position(|&v| !(v > cfg.v_floor)) {
        return Err(Error::PositivityLoss { y: field.y, index: i });
    }
    Ok(())
}

/// Advances one level by `dy`.
pub fn step(field: &StateField, metric: &MetricSpec, dy: f64, cfg: &SolverConfig) -> Result<StateField> {
    cfg.validate()?;
    check_field(field, cfg)?;
    if !(dy > 0.0) {
        return Err(Error::Domain(format!("dy must be positive, got {dy}")));
    }
    let level = LevelData::new(metric, field.y, cfg.flip_christoffels)?;
    let limits = step_limits(field, &level, cfg);
    if dy > limits.contract * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dy, limit: limits.contract });
    }
    advance(field, metric, &level, dy, cfg)
}

fn advance(
    field: &StateField,
    metric: &MetricSpec,
    level: &LevelData,
    dy: f64,
    cfg: &SolverConfig,
) -> Result<StateField> {
    let n = field.nx;
    let dx = field.dx;
    let eps = cfg.epsilon;
    let s0 = level.scale;
    let w: Vec<f64> = field.u.iter().zip(&field.v).map(|(u, v)| s0 * (u + v)).collect();
    let z: Vec<f64> = field.u.iter().zip(&field.v).map(|(u, v)| s0 * (u - v)).collect();
    let explicit = cfg.scheme == Scheme::FullyExplicit;
    let r = eps * dy / (dx * dx);

    let mut w_new = vec![0.0; n];
    let mut z_new = vec![0.0; n];
    for i in 0..n {
        let (im, ip) = field.neighbours(i);
        let (u, v) = (field.u[i], field.v[i]);
        let cross = eps * (field.v[ip] - field.v[im]) / (dx * v);
        let aw = u - v + cross;
        let az = u + v + cross;
        let dw = if aw > 0.0 { w[i] - w[im] } else { w[ip] - w[i] };
        let dz = if az > 0.0 { z[i] - z[im] } else { z[ip] - z[i] };
        let (f, g) = source_terms(u, v, &level.gt);
        let sw = s0 * (f + g) + level.ratio * w[i];
        let sz = s0 * (f - g) + level.ratio * z[i];
        w_new[i] = w[i] - dy / dx * aw * dw + dy * sw;
        z_new[i] = z[i] - dy / dx * az * dz + dy * sz;
        if explicit {
            w_new[i] += r * (w[ip] - 2.0 * w[i] + w[im]);
            z_new[i] += r * (z[ip] - 2.0 * z[i] + z[im]);
        }
    }
    if !explicit && r > 0.0 {
        let theta = if r <= 1.0 { 0.5 } else { 1.0 - 0.5 / r };
        w_new = diffuse(&w_new, r, theta);
        z_new = diffuse(&z_new, r, theta);
    }

    let y_next = field.y + dy;
    let s1 = invariant_scale(&metric.class(), &metric.sample(y_next)).0;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let vi = 0.5 * (w_new[i] - z_new[i]) / s1;
        if !(vi > cfg.v_floor) {
            return Err(Error::PositivityLoss { y: y_next, index: i });
        }
        u.push(0.5 * (w_new[i] + z_new[i]) / s1);
        v.push(vi);
    }
    Ok(StateField { y: y_next, nx: n, dx, periodic: true, u, v })
}

/// θ-scheme for `q_y = ε q_xx`: `(1 - θ r δ²) q' = (1 + (1-θ) r δ²) q`.
fn diffuse(q: &[f64], r: f64, theta: f64) -> Vec<f64> {
    let n = q.len();
    let ex = (1.0 - theta) * r;
    let rhs: Vec<f64> = (0..n).map(|i| q[i] + ex * (q[(i + 1) % n] - 2.0 * q[i] + q[(i + n - 1) % n])).collect();
    let off = vec![-theta * r; n];
    let diag = vec![1.0 + 2.0 * theta * r; n];
    solve_cyclic_tridiagonal(&off, &diag, &off, &rhs)
}

/// `n` evenly spaced levels from `-y0` to `0` inclusive.
pub fn uniform_levels(y0: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| -y0 + y0 * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Integrates from `y = -y0` to `0`, storing the fields at `output_levels`.
///
/// With [`SolverConfig::stop_on_violation`] set, the run may end before
/// `y = 0`; the step log then ends at the offending step.
///
/// The initial data is mollified first. A run whose initial data lies
/// outside the region still proceeds; see
/// [`Trajectory::initial_outside_region`].
pub fn run(
    u0: &[f64],
    v0: &[f64],
    metric: &MetricSpec,
    cfg: &SolverConfig,
    output_levels: &[f64],
) -> Result<Trajectory> {
    cfg.validate()?;
    if u0.len() != cfg.nx || v0.len() != cfg.nx {
        return Err(Error::Grid(format!(
            "initial data has {} / {} nodes, config expects {}",
            u0.len(),
            v0.len(),
            cfg.nx
        )));
    }
    if cfg.y0 > metric.y0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("solver y0 = {} exceeds the metric range {}", cfg.y0, metric.y0)));
    }
    let mut levels: Vec<f64> = output_levels.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let tol = 1e-12 * cfg.y0.max(1.0);
    if let Some(&bad) = levels.iter().find(|&&y| y < -cfg.y0 - tol || y > tol) {
        return Err(Error::Domain(format!("output level {bad} outside [-{}, 0]", cfg.y0)));
    }
    let region = region_for(metric, cfg.delta)?;
    let width = cfg.effective_mollifier_width();
    let (u, v) = mollify_initial(u0, v0, width, cfg.dx())?;
    let mut field = StateField { y: -cfg.y0, nx: cfg.nx, dx: cfg.dx(), periodic: true, u, v };
    check_field(&field, cfg)?;

    let b_of_y = |y: f64| metric.sample(y).b;
    let initial_violation = region.monitor(&field, b_of_y).max_violation;
    let mut stored = Vec::with_capacity(levels.len());
    let mut next = 0;
    while next < levels.len() && levels[next] <= field.y + tol {
        stored.push(StateField { y: levels[next], ..field.clone() });
        next += 1;
    }

    let mut log = Vec::new();
    let min_dy = 1e-12 * cfg.y0;
    while field.y < -tol {
        let level = LevelData::new(metric, field.y, cfg.flip_christoffels)?;
        let limits = step_limits(&field, &level, cfg);
        let target = if next < levels.len() { levels[next].min(0.0) } else { 0.0 };
        let remaining = target - field.y;
        let mut dy = limits.adaptive;
        let mut land = false;
        if dy >= remaining * (1.0 - 1e-12) {
            dy = remaining;
            land = true;
        } else if dy < min_dy {
            return Err(Error::CflViolation { dy, limit: min_dy });
        }
        let mut updated = advance(&field, metric, &level, dy, cfg)?;
        if land {
            updated.y = target;
        }
        field = updated;
        let violation = region.monitor(&field, b_of_y).max_violation;
        log.push(StepRecord { y: field.y, dy, max_lambda: limits.max_lambda, violation });
        while next < levels.len() && levels[next] <= field.y + tol {
            stored.push(StateField { y: levels[next], ..field.clone() });
            next += 1;
        }
        if cfg.stop_on_violation.is_some_and(|t| violation > t) {
            break;
        }
    }
    Ok(Trajectory {
        levels: stored,
        step_log: log,
        region,
        epsilon: cfg.epsilon,
        mollifier_width: width,
        initial_violation,
    })
}
