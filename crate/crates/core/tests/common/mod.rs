//! Independent reference values for the integration and acceptance tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{Matrix2, Vector2};

pub fn camel_value(p: Vector2<f64>) -> f64 {
    let (x, y) = (p[0], p[1]);
    (4.0 - 2.1 * x * x + x.powi(4) / 3.0) * x * x + x * y + (-4.0 + 4.0 * y * y) * y * y
}

pub fn camel_gradient(p: Vector2<f64>) -> Vector2<f64> {
    let (x, y) = (p[0], p[1]);
    Vector2::new(
        8.0 * x - 8.4 * x.powi(3) + 2.0 * x.powi(5) + y,
        x - 8.0 * y + 16.0 * y.powi(3),
    )
}

pub fn camel_hessian(p: Vector2<f64>) -> Matrix2<f64> {
    let (x, y) = (p[0], p[1]);
    Matrix2::new(8.0 - 25.2 * x * x + 10.0 * x.powi(4), 1.0, 1.0, -8.0 + 48.0 * y * y)
}

#[derive(Clone, Copy, Debug)]
pub struct CriticalPoint {
    pub x: Vector2<f64>,
    pub value: f64,
    pub eigenvalues: [f64; 2],
}

impl CriticalPoint {
    pub fn morse_index(&self) -> usize {
        self.eigenvalues.iter().filter(|e| **e < 0.0).count()
    }
}

/// Every critical point of the camel in `[-3, 3] x [-2, 2]`: Newton from each
/// node of a 0.05 grid, deduplicated.
pub fn camel_critical_points() -> &'static [CriticalPoint] {
    static CENSUS: OnceLock<Vec<CriticalPoint>> = OnceLock::new();
    CENSUS.get_or_init(census)
}

fn census() -> Vec<CriticalPoint> {
    let mut found: Vec<CriticalPoint> = Vec::new();
    for i in 0..=120 {
        for j in 0..=80 {
            let mut p = Vector2::new(-3.0 + 0.05 * i as f64, -2.0 + 0.05 * j as f64);
            for _ in 0..60 {
                let Some(inv) = camel_hessian(p).try_inverse() else {
                    break;
                };
                let step = inv * camel_gradient(p);
                p -= step;
                if step.norm() < 1e-15 || !p.norm().is_finite() {
                    break;
                }
            }
            if !p.norm().is_finite() || p.norm() >= 10.0 || camel_gradient(p).norm() > 1e-12 {
                continue;
            }
            if found.iter().any(|c| (c.x - p).norm() < 1e-8) {
                continue;
            }
            let mut ev = camel_hessian(p).symmetric_eigenvalues();
            ev.as_mut_slice().sort_by(f64::total_cmp);
            found.push(CriticalPoint {
                x: p,
                value: camel_value(p),
                eigenvalues: [ev[0], ev[1]],
            });
        }
    }
    found.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.x[0].total_cmp(&b.x[0])));
    found
}

/// The critical point of `camel_critical_points()` nearest to `target`.
pub fn nearest_critical(target: [f64; 2]) -> CriticalPoint {
    let t = Vector2::new(target[0], target[1]);
    *camel_critical_points()
        .iter()
        .min_by(|a, b| (a.x - t).norm().total_cmp(&(b.x - t).norm()))
        .expect("camel has critical points")
}

pub const GLOBAL_MIN: [f64; 2] = [0.089842013100318, -0.712656403020740];
pub const GLOBAL_MIN_VALUE: f64 = -1.031628453489877;
pub const LOCAL_MIN: [f64; 2] = [-1.703606714969981, 0.796083568672625];
pub const LOCAL_MIN_VALUE: f64 = -0.215463824383720;
pub const SADDLE: [f64; 2] = [-1.109205336804787, 0.768268092509540];
pub const SADDLE_VALUE: f64 = 0.543718600978185;

pub fn neg(p: [f64; 2]) -> [f64; 2] {
    [-p[0], -p[1]]
}
