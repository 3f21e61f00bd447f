//! Initial data on the level `y = -y0`.

use codazzi_core::invariant_region::InvariantRegion;
use codazzi_core::metric_lab::{MetricSpec, YMetric};
use codazzi_core::solver::stationary_state;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::path::Path;

use codazzi_core::state_space::StateField;

use crate::config::{InitKind, RunConfig};
use crate::CliError;

/// Number of Fourier modes in a random field component.
const RANDOM_MODES: usize = 3;

/// `0.5 + 0.5 Σ a_k sin(k x + p_k) / Σ |a_k|`, which stays in `[0, 1]`.
fn unit_series(rng: &mut ChaCha8Rng, nx: usize) -> Vec<f64> {
    let modes: Vec<(f64, f64, f64)> = (0..RANDOM_MODES)
        .map(|_| {
            (rng.random_range(1..=4) as f64, rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let norm: f64 = modes.iter().map(|m| m.1.abs()).sum::<f64>().max(1e-12);
    (0..nx)
        .map(|i| {
            let x = std::f64::consts::TAU * i as f64 / nx as f64;
            let s: f64 = modes.iter().map(|&(k, a, p)| a * (k * x + p).sin()).sum();
            0.5 + 0.5 * s / norm
        })
        .collect()
}

/// Smooth field filling the region at `y = -y0`, reproducible from `seed`.
pub fn random_field(
    region: &InvariantRegion,
    metric: &MetricSpec,
    y0: f64,
    nx: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = metric.sample(-y0).b;
    let s = unit_series(&mut rng, nx);
    let t = unit_series(&mut rng, nx);
    s.iter().zip(&t).map(|(&s, &t)| region.from_unit(s, t, b)).unzip()
}

pub fn initial_data(
    cfg: &RunConfig,
    metric: &MetricSpec,
    region: &InvariantRegion,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let sample = metric.sample(-cfg.y0);
    let (us, vs) = stationary_state(&metric.class(), &sample);
    let nx = cfg.nx;
    Ok(match &cfg.init {
        InitKind::Stationary => (vec![us; nx], vec![vs; nx]),
        InitKind::Perturbed => {
            // phase k x in units of the period; amplitude relative to v_s
            let phase = |i: usize| std::f64::consts::TAU * (cfg.mode as usize * i) as f64 / nx as f64;
            let u = (0..nx).map(|i| us + cfg.amplitude * vs * phase(i).sin()).collect();
            let v = (0..nx).map(|i| vs + 0.5 * cfg.amplitude * vs * phase(i).cos()).collect();
            (u, v)
        }
        InitKind::Random => random_field(region, metric, cfg.y0, nx, cfg.seed),
        InitKind::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(Path::new(path), e))?;
            let field = StateField::from_text(&text)?;
            if field.nx != nx {
                return Err(CliError::Config(format!("{path} has {} nodes, but nx = {nx}", field.nx)));
            }
            (field.u, field.v)
        }
    })
}
