//! Surface reconstruction from first and second fundamental forms.
//!
//! The frame `(r_x, r_y, n)` is marched with the Gauss–Weingarten
//! equations, first along a seed line and then along every transverse
//! line, with a Gram correction after each step.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric_lab::{MetricSpec, YMetric};
use crate::solver::Trajectory;
use crate::state_space::StateField;

pub type Vec3 = [f64; 3];

/// Tolerance on the seed frame invariants.
pub const SEED_TOL: f64 = 1e-8;

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn axpy(a: f64, x: Vec3, y: Vec3) -> Vec3 {
    [a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2]]
}

fn lin2(a: f64, x: Vec3, b: f64, y: Vec3) -> Vec3 {
    [a * x[0] + b * y[0], a * x[1] + b * y[1], a * x[2] + b * y[2]]
}

fn lin3(a: f64, x: Vec3, b: f64, y: Vec3, c: f64, z: Vec3) -> Vec3 {
    axpy(c, z, lin2(a, x, b, y))
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// Tangent vectors and unit normal at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub rx: Vec3,
    pub ry: Vec3,
    pub n: Vec3,
}

impl Frame {
    /// Largest violation of the frame invariants against `(E, F, G)`.
    pub fn defect(&self, e: f64, f: f64, g: f64) -> f64 {
        let scale = e.abs().max(g.abs()).max(1.0);
        let metric = (dot(self.rx, self.rx) - e)
            .abs()
            .max((dot(self.ry, self.ry) - g).abs())
            .max((dot(self.rx, self.ry) - f).abs())
            / scale;
        let normal = (dot(self.n, self.n) - 1.0)
            .abs()
            .max(dot(self.n, self.rx).abs() / e.abs().sqrt().max(1.0))
            .max(dot(self.n, self.ry).abs() / g.abs().sqrt().max(1.0));
        metric.max(normal)
    }

    /// `r_x` along the first axis, `r_y` in the span of the first and third.
    pub fn default_seed(e: f64, f: f64, g: f64) -> Result<Frame> {
        let det = e * g - f * f;
        if !(e > 0.0) || !(det > 0.0) {
            return Err(Error::MetricDegenerate { y: f64::NAN });
        }
        let se = e.sqrt();
        let rx = [se, 0.0, 0.0];
        let ry = [f / se, 0.0, (det / e).sqrt()];
        let c = cross(rx, ry);
        let n = lin2(1.0 / norm(c), c, 0.0, c);
        Ok(Frame { rx, ry, n })
    }

    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> Frame {
        Frame { rx: rotate(r, self.rx), ry: rotate(r, self.ry), n: rotate(r, self.n) }
    }
}

pub fn rotate(r: &[[f64; 3]; 3], a: Vec3) -> Vec3 {
    [dot(r[0], a), dot(r[1], a), dot(r[2], a)]
}

/// Frame and position at the grid origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub frame: Frame,
    pub position: Vec3,
}

impl Seed {
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> Seed {
        Seed { frame: self.frame.rotated(r), position: rotate(r, self.position) }
    }
}

/// Uniform tensor grid; node `(i, j)` sits at `(x_start + i dx, y_start + j dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub x_start: f64,
    pub dx: f64,
    pub nx: usize,
    pub y_start: f64,
    pub dy: f64,
    pub ny: usize,
}

impl GridGeometry {
    /// `nx × ny` nodes covering `[x0, x1] × [y0, y1]` including both ends.
    pub fn spanning(x0: f64, x1: f64, nx: usize, y0: f64, y1: f64, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Grid(format!("need at least 2x2 nodes, got {nx}x{ny}")));
        }
        Ok(Self { x_start: x0, dx: (x1 - x0) / (nx - 1) as f64, nx, y_start: y0, dy: (y1 - y0) / (ny - 1) as f64, ny })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_start + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_start + j as f64 * self.dy
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Both fundamental forms and the first derivatives of the metric at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FormSample {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub e_x: f64,
    pub e_y: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: f64,
    pub g_y: f64,
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl FormSample {
    pub fn det(&self) -> f64 {
        self.e * self.g - self.f * self.f
    }
}

pub trait FormSource: Sync {
    fn forms(&self, x: f64, y: f64) -> FormSample;
}

/// Gauss–Weingarten coefficients: `∂_i r_j = Γ^1_ij r_x + Γ^2_ij r_y + h_ij n`
/// and `∂_i n = w_i1 r_x + w_i2 r_y`.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    gamma: [[[f64; 2]; 2]; 2],
    h: [[f64; 2]; 2],
    w: [[f64; 2]; 2],
}

fn coefficients(s: &FormSample, y: f64) -> Result<Coefficients> {
    let det = s.det();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::MetricDegenerate { y });
    }
    let inv = [[s.g / det, -s.f / det], [-s.f / det, s.e / det]];
    // [ij, l]
    let first = [
        [[0.5 * s.e_x, s.f_x - 0.5 * s.e_y], [0.5 * s.e_y, 0.5 * s.g_x]],
        [[0.5 * s.e_y, 0.5 * s.g_x], [s.f_y - 0.5 * s.g_x, 0.5 * s.g_y]],
    ];
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                gamma[k][i][j] = inv[k][0] * first[i][j][0] + inv[k][1] * first[i][j][1];
            }
        }
    }
    let h = [[s.h11, s.h12], [s.h12, s.h22]];
    let mut w = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            w[i][k] = -(h[i][0] * inv[0][k] + h[i][1] * inv[1][k]);
        }
    }
    Ok(Coefficients { gamma, h, w })
}

#[derive(Debug, Clone, Copy)]
struct State {
    frame: Frame,
    r: Vec3,
}

fn derivative(st: &State, c: &Coefficients, dir: usize) -> State {
    let Frame { rx, ry, n } = st.frame;
    let t = |j: usize| lin3(c.gamma[0][dir][j], rx, c.gamma[1][dir][j], ry, c.h[dir][j], n);
    State {
        frame: Frame { rx: t(0), ry: t(1), n: lin2(c.w[dir][0], rx, c.w[dir][1], ry) },
        r: if dir == 0 { rx } else { ry },
    }
}

fn advance(st: &State, d: &State, h: f64) -> State {
    State {
        frame: Frame {
            rx: axpy(h, d.frame.rx, st.frame.rx),
            ry: axpy(h, d.frame.ry, st.frame.ry),
            n: axpy(h, d.frame.n, st.frame.n),
        },
        r: axpy(h, d.r, st.r),
    }
}

fn sym_sqrt(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let s = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).sqrt();
    let t = (m[0][0] + m[1][1] + 2.0 * s).sqrt();
    [[(m[0][0] + s) / t, m[0][1] / t], [m[1][0] / t, (m[1][1] + s) / t]]
}

fn inv2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

fn mul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Symmetric re-orthogonalization of the frame against `(E, F, G)`.
///
/// Returns the corrected frame and the size of the correction.
pub fn gram_correct(frame: &Frame, e: f64, f: f64, g: f64) -> (Frame, f64) {
    let n0 = frame.n;
    let nn = norm(n0);
    let n0 = [n0[0] / nn, n0[1] / nn, n0[2] / nn];
    let a = axpy(-dot(frame.rx, n0), n0, frame.rx);
    let b = axpy(-dot(frame.ry, n0), n0, frame.ry);
    let gram = [[dot(a, a), dot(a, b)], [dot(a, b), dot(b, b)]];
    let p = sym_sqrt([[e, f], [f, g]]);
    let pi = inv2(p);
    let q = mul2(mul2(pi, gram), pi);
    let c = mul2(mul2(pi, inv2(sym_sqrt(q))), p);
    let rx = lin2(c[0][0], a, c[1][0], b);
    let ry = lin2(c[0][1], a, c[1][1], b);
    let m = cross(rx, ry);
    let s = if dot(m, n0) < 0.0 { -1.0 } else { 1.0 } / norm(m);
    let n = [s * m[0], s * m[1], s * m[2]];
    let corrected = Frame { rx, ry, n };
    let mut size: f64 = 0.0;
    for (p, q) in [(frame.rx, rx), (frame.ry, ry), (frame.n, n)] {
        size = size.max(dist(p, q));
    }
    (corrected, size)
}

/// Grid of positions with optional frames, row-major with `y` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub grid: GridGeometry,
    pub positions: Vec<Vec3>,
    pub frames: Option<Vec<Frame>>,
    /// Largest Gram correction applied during integration.
    pub max_correction: f64,
}

impl SurfaceMesh {
    pub fn position(&self, i: usize, j: usize) -> Vec3 {
        self.positions[self.grid.index(i, j)]
    }

    pub fn face_count(&self) -> usize {
        if self.grid.nx < 2 || self.grid.ny < 2 {
            0
        } else {
            2 * (self.grid.nx - 1) * (self.grid.ny - 1)
        }
    }

    /// Max distance to another mesh on the same grid.
    pub fn max_distance(&self, other: &SurfaceMesh) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Grid("meshes live on different grids".into()));
        }
        Ok(self.positions.iter().zip(&other.positions).map(|(a, b)| dist(*a, *b)).fold(0.0, f64::max))
    }

    /// `max |r_x·r_x - E| + |r_y·r_y - G| + |r_x·r_y - F|` over the frames.
    pub fn metric_drift(&self, source: &dyn FormSource) -> Option<f64> {
        let frames = self.frames.as_ref()?;
        let mut worst: f64 = 0.0;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let s = source.forms(self.grid.x(i), self.grid.y(j));
                let fr = &frames[self.grid.index(i, j)];
                let d =
                    (dot(fr.rx, fr.rx) - s.e).abs() + (dot(fr.ry, fr.ry) - s.g).abs() + (dot(fr.rx, fr.ry) - s.f).abs();
                worst = worst.max(d / s.e.max(s.g));
            }
        }
        Some(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrationOrder {
    /// Seed column at `x_start`, then every row in `x`.
    #[default]
    YFirst,
    /// Seed row at `y_start`, then every column in `y`.
    XFirst,
}

fn march(
    source: &dyn FormSource,
    start: State,
    x0: f64,
    y0: f64,
    dir: usize,
    h: f64,
    steps: usize,
) -> Result<(Vec<State>, f64)> {
    let at = |t: f64| if dir == 0 { (x0 + t, y0) } else { (x0, y0 + t) };
    let coeff = |t: f64| {
        let (x, y) = at(t);
        let s = source.forms(x, y);
        coefficients(&s, y).map(|c| (c, s))
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut worst: f64 = 0.0;
    let mut st = start;
    out.push(st);
    let (mut c0, _) = coeff(0.0)?;
    for k in 0..steps {
        let t = k as f64 * h;
        let (cm, _) = coeff(t + 0.5 * h)?;
        let (c1, s1) = coeff(t + h)?;
        let k1 = derivative(&st, &c0, dir);
        let k2 = derivative(&advance(&st, &k1, 0.5 * h), &cm, dir);
        let k3 = derivative(&advance(&st, &k2, 0.5 * h), &cm, dir);
        let k4 = derivative(&advance(&st, &k3, h), &c1, dir);
        let mut next = st;
        let w = h / 6.0;
        for (d, m) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
            next = advance(&next, d, w * m);
        }
        let (frame, size) = gram_correct(&next.frame, s1.e, s1.f, s1.g);
        worst = worst.max(size);
        st = State { frame, r: next.r };
        out.push(st);
        c0 = c1;
    }
    Ok((out, worst))
}

/// Integrates the frame equations from a seed at the grid origin.
pub fn frame_integrate(source: &dyn FormSource, grid: &GridGeometry, seed: &Seed) -> Result<SurfaceMesh> {
    frame_integrate_ordered(source, grid, seed, IntegrationOrder::YFirst)
}

pub fn frame_integrate_ordered(
    source: &dyn FormSource,
    grid: &GridGeometry,
    seed: &Seed,
    order: IntegrationOrder,
) -> Result<SurfaceMesh> {
    if grid.is_empty() {
        return Err(Error::EmptyMesh);
    }
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let s = source.forms(grid.x(i), grid.y(j));
            if !(s.det() > 0.0) || !(s.e > 0.0) {
                return Err(Error::MetricDegenerate { y: grid.y(j) });
            }
        }
    }
    let s0 = source.forms(grid.x_start, grid.y_start);
    let defect = seed.frame.defect(s0.e, s0.f, s0.g);
    if !(defect <= SEED_TOL) {
        return Err(Error::SeedInconsistent { defect });
    }
    let start = State { frame: seed.frame, r: seed.position };
    let (first_dir, second_dir, first_n, second_n, first_h, second_h) = match order {
        IntegrationOrder::YFirst => (1, 0, grid.ny, grid.nx, grid.dy, grid.dx),
        IntegrationOrder::XFirst => (0, 1, grid.nx, grid.ny, grid.dx, grid.dy),
    };
    let (line, c0) = march(source, start, grid.x_start, grid.y_start, first_dir, first_h, first_n - 1)?;
    let lines: Vec<(Vec<State>, f64)> = line
        .par_iter()
        .enumerate()
        .map(|(k, st)| {
            let (x0, y0) = if first_dir == 1 { (grid.x_start, grid.y(k)) } else { (grid.x(k), grid.y_start) };
            march(source, *st, x0, y0, second_dir, second_h, second_n - 1)
        })
        .collect::<Result<_>>()?;
    let mut positions = vec![[0.0; 3]; grid.len()];
    let mut frames = vec![Frame { rx: [0.0; 3], ry: [0.0; 3], n: [0.0; 3] }; grid.len()];
    let mut worst = c0;
    for (k, (states, c)) in lines.iter().enumerate() {
        worst = worst.max(*c);
        for (l, st) in states.iter().enumerate() {
            let idx = if first_dir == 1 { grid.index(l, k) } else { grid.index(k, l) };
            positions[idx] = st.r;
            frames[idx] = st.frame;
        }
    }
    Ok(SurfaceMesh { grid: *grid, positions, frames: Some(frames), max_correction: worst })
}

/// Max vertex distance between the two integration orders.
pub fn path_independence(y_first: &SurfaceMesh, x_first: &SurfaceMesh) -> Result<f64> {
    y_first.max_distance(x_first)
}

/// Both integration orders from the same seed, compared.
pub fn path_independence_for(source: &dyn FormSource, grid: &GridGeometry, seed: &Seed) -> Result<f64> {
    let a = frame_integrate_ordered(source, grid, seed, IntegrationOrder::YFirst)?;
    let b = frame_integrate_ordered(source, grid, seed, IntegrationOrder::XFirst)?;
    path_independence(&a, &b)
}

/// Fundamental forms recovered from mesh positions by finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteForms {
    pub grid: GridGeometry,
    /// Nodes closer than this to an edge carry no values.
    pub margin: usize,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub h11: Vec<f64>,
    pub h12: Vec<f64>,
    pub h22: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormValues {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl DiscreteForms {
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let m = self.margin;
        i >= m && j >= m && i + m < self.grid.nx && j + m < self.grid.ny
    }

    pub fn at(&self, i: usize, j: usize) -> Result<FormValues> {
        if !self.is_interior(i, j) {
            return Err(Error::Grid(format!("node ({i}, {j}) needs a one-sided stencil")));
        }
        let k = self.grid.index(i, j);
        Ok(FormValues {
            e: self.e[k],
            f: self.f[k],
            g: self.g[k],
            h11: self.h11[k],
            h12: self.h12[k],
            h22: self.h22[k],
        })
    }

    /// Largest deviation from `source` over interior nodes, per component.
    pub fn max_error(&self, source: &dyn FormSource) -> FormValues {
        let mut err = FormValues { e: 0.0, f: 0.0, g: 0.0, h11: 0.0, h12: 0.0, h22: 0.0 };
        for j in self.margin..self.grid.ny.saturating_sub(self.margin) {
            for i in self.margin..self.grid.nx.saturating_sub(self.margin) {
                let s = source.forms(self.grid.x(i), self.grid.y(j));
                let v = self.at(i, j).expect("interior node");
                err.e = err.e.max((v.e - s.e).abs());
                err.f = err.f.max((v.f - s.f).abs());
                err.g = err.g.max((v.g - s.g).abs());
                err.h11 = err.h11.max((v.h11 - s.h11).abs());
                err.h12 = err.h12.max((v.h12 - s.h12).abs());
                err.h22 = err.h22.max((v.h22 - s.h22).abs());
            }
        }
        err
    }
}

impl FormValues {
    pub fn max(&self) -> f64 {
        [self.e, self.f, self.g, self.h11, self.h12, self.h22].into_iter().fold(0.0, f64::max)
    }
}

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Fourth-order centred differences at interior nodes.
pub fn fundforms_from_mesh(mesh: &SurfaceMesh) -> Result<DiscreteForms> {
    let grid = mesh.grid;
    if grid.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let margin = 2;
    if grid.nx < 2 * margin + 1 || grid.ny < 2 * margin + 1 {
        return Err(Error::Grid(format!("{}x{} grid has no interior nodes for a 5-point stencil", grid.nx, grid.ny)));
    }
    let p = |i: usize, j: usize| mesh.positions[grid.index(i, j)];
    let nan = vec![f64::NAN; grid.len()];
    let mut out = DiscreteForms {
        grid,
        margin,
        e: nan.clone(),
        f: nan.clone(),
        g: nan.clone(),
        h11: nan.clone(),
        h12: nan.clone(),
        h22: nan,
    };
    for j in margin..grid.ny - margin {
        for i in margin..grid.nx - margin {
            let mut rx = [0.0; 3];
            let mut ry = [0.0; 3];
            let mut rxx = [0.0; 3];
            let mut ryy = [0.0; 3];
            let mut rxy = [0.0; 3];
            for a in 0..5 {
                rx = axpy(D1[a] / grid.dx, p(i + a - 2, j), rx);
                ry = axpy(D1[a] / grid.dy, p(i, j + a - 2), ry);
                rxx = axpy(D2[a] / (grid.dx * grid.dx), p(i + a - 2, j), rxx);
                ryy = axpy(D2[a] / (grid.dy * grid.dy), p(i, j + a - 2), ryy);
                for b in 0..5 {
                    if D1[a] != 0.0 && D1[b] != 0.0 {
                        rxy = axpy(D1[a] * D1[b] / (grid.dx * grid.dy), p(i + a - 2, j + b - 2), rxy);
                    }
                }
            }
            let c = cross(rx, ry);
            let nc = norm(c);
            if !(nc > 0.0) {
                return Err(Error::MetricDegenerate { y: grid.y(j) });
            }
            let n = [c[0] / nc, c[1] / nc, c[2] / nc];
            let k = grid.index(i, j);
            out.e[k] = dot(rx, rx);
            out.f[k] = dot(rx, ry);
            out.g[k] = dot(ry, ry);
            out.h11[k] = dot(rxx, n);
            out.h12[k] = dot(rxy, n);
            out.h22[k] = dot(ryy, n);
        }
    }
    Ok(out)
}

/// Surfaces with a closed-form parametrization.
pub trait ExactSurface: FormSource {
    fn position(&self, x: f64, y: f64) -> Vec3;
    fn frame(&self, x: f64, y: f64) -> Frame;

    fn seed(&self, x: f64, y: f64) -> Seed {
        Seed { frame: self.frame(x, y), position: self.position(x, y) }
    }

    fn mesh(&self, grid: &GridGeometry) -> SurfaceMesh {
        let mut positions = Vec::with_capacity(grid.len());
        let mut frames = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                positions.push(self.position(grid.x(i), grid.y(j)));
                frames.push(self.frame(grid.x(i), grid.y(j)));
            }
        }
        SurfaceMesh { grid: *grid, positions, frames: Some(frames), max_correction: 0.0 }
    }
}

/// `r = (cosh y sin x, cosh y cos x, y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactCatenoid;

impl FormSource for ExactCatenoid {
    fn forms(&self, _x: f64, y: f64) -> FormSample {
        let (ch, sh) = (y.cosh(), y.sinh());
        let e = ch * ch;
        FormSample { e, g: e, e_y: 2.0 * ch * sh, g_y: 2.0 * ch * sh, h11: 1.0, h22: -1.0, ..Default::default() }
    }
}

impl ExactSurface for ExactCatenoid {
    fn position(&self, x: f64, y: f64) -> Vec3 {
        [y.cosh() * x.sin(), y.cosh() * x.cos(), y]
    }

    fn frame(&self, x: f64, y: f64) -> Frame {
        let (ch, sh, s, c) = (y.cosh(), y.sinh(), x.sin(), x.cos());
        Frame { rx: [ch * c, -ch * s, 0.0], ry: [sh * s, sh * c, 1.0], n: [-s / ch, -c / ch, sh / ch] }
    }
}

/// `r = (y sin x, y cos x, c x)`.
#[derive(Debug, Clone, Copy)]
pub struct ExactHelicoid {
    pub c: f64,
}

impl FormSource for ExactHelicoid {
    fn forms(&self, _x: f64, y: f64) -> FormSample {
        let c = self.c;
        FormSample { e: c * c + y * y, g: 1.0, e_y: 2.0 * y, h12: -c / (c * c + y * y).sqrt(), ..Default::default() }
    }
}

impl ExactSurface for ExactHelicoid {
    fn position(&self, x: f64, y: f64) -> Vec3 {
        [y * x.sin(), y * x.cos(), self.c * x]
    }

    fn frame(&self, x: f64, y: f64) -> Frame {
        let (s, co, c) = (x.sin(), x.cos(), self.c);
        let r = (c * c + y * y).sqrt();
        Frame { rx: [y * co, -y * s, c], ry: [s, co, 0.0], n: [-c * co / r, c * s / r, y / r] }
    }
}

/// The plane `r = (x, y, 0)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flat;

impl FormSource for Flat {
    fn forms(&self, _x: f64, _y: f64) -> FormSample {
        FormSample { e: 1.0, g: 1.0, ..Default::default() }
    }
}

impl ExactSurface for Flat {
    fn position(&self, x: f64, y: f64) -> Vec3 {
        [x, y, 0.0]
    }

    fn frame(&self, _x: f64, _y: f64) -> Frame {
        Frame { rx: [1.0, 0.0, 0.0], ry: [0.0, 1.0, 0.0], n: [0.0, 0.0, 1.0] }
    }
}

/// Wraps another source and adds a constant to `h12`.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedM<S> {
    pub inner: S,
    pub shift: f64,
}

impl<S: FormSource> FormSource for PerturbedM<S> {
    fn forms(&self, x: f64, y: f64) -> FormSample {
        let mut s = self.inner.forms(x, y);
        s.h12 += self.shift;
        s
    }
}

fn cubic_stencil(t: f64, n: usize) -> (usize, [f64; 4]) {
    let k = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let s = t - k as f64;
    let w = [
        -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
        s * (s - 2.0) * (s - 3.0) / 2.0,
        -s * (s - 1.0) * (s - 3.0) / 2.0,
        s * (s - 1.0) * (s - 2.0) / 6.0,
    ];
    (k, w)
}

/// Forms of a computed trajectory: the `y`-only metric of the run and
/// `h = √(EG) γ (L̃, M̃, Ñ)` interpolated cubically between nodes and levels.
pub struct SolutionForms<'a> {
    metric: &'a MetricSpec,
    y_start: f64,
    dy: f64,
    dx: f64,
    nx: usize,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl<'a> SolutionForms<'a> {
    pub fn new(levels: &[StateField], metric: &'a MetricSpec) -> Result<Self> {
        if levels.len() < 4 {
            return Err(Error::Grid(format!("need at least 4 stored levels, got {}", levels.len())));
        }
        let nx = levels[0].nx;
        if nx < 4 {
            return Err(Error::Grid(format!("need at least 4 nodes per level, got {nx}")));
        }
        let dy = levels[1].y - levels[0].y;
        for (k, w) in levels.windows(2).enumerate() {
            if w[1].nx != nx || !w[1].periodic || (w[1].dx - levels[0].dx).abs() > 1e-14 * levels[0].dx {
                return Err(Error::Grid(format!("level {} has a different x grid", k + 1)));
            }
            if !(dy > 0.0) || ((w[1].y - w[0].y) - dy).abs() > 1e-9 * dy {
                return Err(Error::Grid("stored levels are not uniformly spaced".into()));
            }
        }
        for lv in levels {
            if let Some(i) = lv.v.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::PositivityLoss { y: lv.y, index: i });
            }
        }
        Ok(Self {
            metric,
            y_start: levels[0].y,
            dy,
            dx: levels[0].dx,
            nx,
            u: levels.iter().map(|l| l.u.clone()).collect(),
            v: levels.iter().map(|l| l.v.clone()).collect(),
        })
    }

    /// Mesh grid matching the solve grid.
    pub fn grid(&self) -> GridGeometry {
        GridGeometry { x_start: 0.0, dx: self.dx, nx: self.nx, y_start: self.y_start, dy: self.dy, ny: self.u.len() }
    }

    fn interp(&self, field: &[Vec<f64>], x: f64, y: f64) -> f64 {
        let tx = x / self.dx;
        let i0 = tx.floor();
        let wx = crate::metric_lab::lagrange4_weights(tx - i0);
        let i0 = i0 as isize;
        let (k, wy) = cubic_stencil((y - self.y_start) / self.dy, field.len());
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let row = &field[k + b];
            let mut r = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                r += wxa * row[(i0 - 1 + a as isize).rem_euclid(self.nx as isize) as usize];
            }
            acc += wyb * r;
        }
        acc
    }
}

impl FormSource for SolutionForms<'_> {
    fn forms(&self, x: f64, y: f64) -> FormSample {
        let m = self.metric.sample(y);
        let u = self.interp(&self.u, x, y);
        let v = self.interp(&self.v, x, y);
        let scale = (m.e * m.g).sqrt() * m.gamma;
        FormSample {
            e: m.e,
            g: m.g,
            e_y: m.e_y,
            g_y: m.g_y,
            h11: scale / v,
            h12: -scale * u / v,
            h22: scale * (u * u - v * v) / v,
            ..Default::default()
        }
    }
}

/// Surface of a computed trajectory on the solve grid.
///
/// Without a seed the default gauge at `(0, y_start)` is used.
pub fn realize_from_solution(traj: &Trajectory, metric: &MetricSpec, seed: Option<&Seed>) -> Result<SurfaceMesh> {
    realize_from_levels(&traj.levels, metric, seed)
}

/// As [`realize_from_solution`], from stored levels ordered by `y`.
pub fn realize_from_levels(levels: &[StateField], metric: &MetricSpec, seed: Option<&Seed>) -> Result<SurfaceMesh> {
    let src = SolutionForms::new(levels, metric)?;
    let grid = src.grid();
    let seed = match seed {
        Some(s) => *s,
        None => {
            let s = src.forms(grid.x_start, grid.y_start);
            Seed { frame: Frame::default_seed(s.e, s.f, s.g)?, position: [0.0; 3] }
        }
    };
    frame_integrate(&src, &grid, &seed)
}

/// Wavefront OBJ: `v` lines in row-major order, `vn` when frames exist,
/// two triangles per grid cell.
pub fn write_obj<W: Write>(mesh: &SurfaceMesh, header: &[String], out: &mut W) -> Result<()> {
    if mesh.positions.is_empty() || mesh.grid.is_empty() {
        return Err(Error::EmptyMesh);
    }
    for line in header {
        writeln!(out, "# {line}")?;
    }
    for p in &mesh.positions {
        writeln!(out, "v {} {} {}", p[0], p[1], p[2])?;
    }
    if let Some(frames) = &mesh.frames {
        for f in frames {
            writeln!(out, "vn {} {} {}", f.n[0], f.n[1], f.n[2])?;
        }
    }
    let g = mesh.grid;
    let with_normals = mesh.frames.is_some();
    let mut face = |a: usize, b: usize, c: usize| -> std::io::Result<()> {
        if with_normals {
            writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}")
        } else {
            writeln!(out, "f {a} {b} {c}")
        }
    };
    for j in 0..g.ny.saturating_sub(1) {
        for i in 0..g.nx.saturating_sub(1) {
            let p00 = g.index(i, j) + 1;
            let p10 = g.index(i + 1, j) + 1;
            let p01 = g.index(i, j + 1) + 1;
            let p11 = g.index(i + 1, j + 1) + 1;
            face(p00, p10, p11)?;
            face(p00, p11, p01)?;
        }
    }
    Ok(())
}

pub fn export_obj(mesh: &SurfaceMesh, header: &[String], path: &Path) -> Result<()> {
    if mesh.positions.is_empty() || mesh.grid.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_obj(mesh, header, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid(n: usize) -> GridGeometry {
        GridGeometry::spanning(0.0, TAU, n, -1.0, 0.0, n).unwrap()
    }

    #[test]
    fn flat_plane_is_exact() {
        let g = GridGeometry::spanning(0.0, 1.0, 9, 0.0, 2.0, 7).unwrap();
        let m = frame_integrate(&Flat, &g, &Flat.seed(0.0, 0.0)).unwrap();
        let exact = Flat.mesh(&g);
        assert!(m.max_distance(&exact).unwrap() < 1e-14);
        assert!(path_independence_for(&Flat, &g, &Flat.seed(0.0, 0.0)).unwrap() <= 1e-12);
    }

    #[test]
    fn catenoid_small_grid() {
        let g = grid(65);
        let m = frame_integrate(&ExactCatenoid, &g, &ExactCatenoid.seed(0.0, -1.0)).unwrap();
        let err = m.max_distance(&ExactCatenoid.mesh(&g)).unwrap();
        assert!(err < 1e-5, "{err:e}");
        assert!(m.metric_drift(&ExactCatenoid).unwrap() < 1e-12);
    }

    #[test]
    fn exact_frames_match_forms() {
        for (x, y) in [(0.3, -0.7), (2.0, -0.1)] {
            let s = ExactCatenoid.forms(x, y);
            assert!(ExactCatenoid.frame(x, y).defect(s.e, s.f, s.g) < 1e-14);
            let h = ExactHelicoid { c: 1.0 };
            let s = h.forms(x, y);
            assert!(h.frame(x, y).defect(s.e, s.f, s.g) < 1e-14);
        }
    }

    #[test]
    fn inconsistent_seed_rejected() {
        let g = grid(9);
        let mut seed = ExactCatenoid.seed(0.0, -1.0);
        seed.frame.rx[0] *= 1.01;
        assert!(matches!(frame_integrate(&ExactCatenoid, &g, &seed), Err(Error::SeedInconsistent { .. })));
    }

    #[test]
    fn degenerate_metric_rejected() {
        struct Bad;
        impl FormSource for Bad {
            fn forms(&self, _x: f64, y: f64) -> FormSample {
                FormSample { e: 1.0, g: 1.0, f: if y > 0.5 { 2.0 } else { 0.0 }, ..Default::default() }
            }
        }
        let g = GridGeometry::spanning(0.0, 1.0, 5, 0.0, 1.0, 5).unwrap();
        let r = frame_integrate(&Bad, &g, &Flat.seed(0.0, 0.0));
        assert!(matches!(r, Err(Error::MetricDegenerate { .. })));
    }

    #[test]
    fn gram_correction_restores_metric() {
        let fr = Frame { rx: [1.01, 0.02, 0.0], ry: [0.0, 0.99, 0.01], n: [0.0, 0.01, 1.02] };
        let (c, size) = gram_correct(&fr, 1.0, 0.0, 1.0);
        assert!(c.defect(1.0, 0.0, 1.0) < 1e-14);
        assert!(size > 0.0 && size < 0.05);
    }

    #[test]
    fn default_seed_satisfies_invariants() {
        let f = Frame::default_seed(2.0, 0.3, 1.5).unwrap();
        assert!(f.defect(2.0, 0.3, 1.5) < 1e-15);
    }

    #[test]
    fn obj_layout_for_two_by_two() {
        let g = GridGeometry::spanning(0.0, 1.0, 2, 0.0, 1.0, 2).unwrap();
        let mut m = Flat.mesh(&g);
        m.frames = None;
        let mut buf = Vec::new();
        write_obj(&m, &["flat".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# flat\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4\nf 1 4 3\n");
    }

    #[test]
    fn empty_mesh_rejected() {
        let g = GridGeometry { x_start: 0.0, dx: 1.0, nx: 0, y_start: 0.0, dy: 1.0, ny: 0 };
        let m = SurfaceMesh { grid: g, positions: vec![], frames: None, max_correction: 0.0 };
        assert_eq!(write_obj(&m, &[], &mut Vec::new()), Err(Error::EmptyMesh));
    }

    #[test]
    fn boundary_nodes_flagged() {
        let g = grid(9);
        let d = fundforms_from_mesh(&ExactCatenoid.mesh(&g)).unwrap();
        assert!(matches!(d.at(1, 4), Err(Error::Grid(_))));
        assert!(d.at(2, 2).is_ok());
    }
}
