//! Traveling global Maxwellians and least-squares projection of `f♯` data
//! onto that family.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{DistributionField, Grid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelingMaxwellianParams {
    pub d: usize,
    pub m: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub beta: f64,
    /// Skew-symmetric `d×d`, row-major.
    pub b: Vec<f64>,
}

impl TravelingMaxwellianParams {
    pub fn isotropic(d: usize, m: f64, alpha: f64, sigma: f64) -> Self {
        Self {
            d,
            m,
            alpha,
            sigma,
            beta: 0.0,
            b: vec![0.0; d * d],
        }
    }

    /// Skew matrix from its strictly-upper entries in row order.
    pub fn with_skew(mut self, upper: &[f64]) -> Self {
        let d = self.d;
        let mut k = 0;
        for i in 0..d {
            for j in (i + 1)..d {
                self.b[i * d + j] = upper[k];
                self.b[j * d + i] = -upper[k];
                k += 1;
            }
        }
        self
    }

    pub fn skew_upper(&self) -> Vec<f64> {
        let d = self.d;
        let mut out = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                out.push(self.b[i * d + j]);
            }
        }
        out
    }

    /// `Q = (ασ − β²) I + B²`.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let d = self.d;
        let b = DMatrix::from_row_slice(d, d, &self.b);
        DMatrix::identity(d, d) * (self.alpha * self.sigma - self.beta * self.beta) + &b * &b
    }

    /// Checks the constraints and returns the normalisation `m √det Q / (2π)^d`.
    pub fn validate(&self) -> Result<f64> {
        let d = self.d;
        if self.b.len() != d * d {
            return Err(Error::ConstraintViolated(format!("B must be {d}x{d}")));
        }
        for i in 0..d {
            for j in 0..d {
                if self.b[i * d + j] != -self.b[j * d + i] {
                    return Err(Error::ConstraintViolated("B is not skew-symmetric".into()));
                }
            }
        }
        if !(self.alpha > 0.0 && self.sigma > 0.0) {
            return Err(Error::ConstraintViolated("alpha and sigma must be positive".into()));
        }
        if !(self.m >= 0.0) || !self.beta.is_finite() {
            return Err(Error::ConstraintViolated("m must be non-negative".into()));
        }
        let q = self.q_matrix();
        let eig = SymmetricEigen::new(q.clone());
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::ConstraintViolated("Q is not positive definite".into()));
        }
        let det: f64 = eig.eigenvalues.iter().product();
        Ok(self.m * det.sqrt() / (2.0 * std::f64::consts::PI).powi(d as i32))
    }

    /// Quadratic form at `(v, u = x − tv)`.
    fn form(&self, v: &[f64], u: &[f64]) -> f64 {
        let d = self.d;
        let mut s = 0.0;
        for i in 0..d {
            s += self.sigma * v[i] * v[i] + 2.0 * self.beta * v[i] * u[i] + self.alpha * u[i] * u[i];
            for j in 0..d {
                s += 2.0 * v[i] * self.b[i * d + j] * u[j];
            }
        }
        s
    }
}

pub fn eval_maxwellian(p: &TravelingMaxwellianParams, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
    let norm = p.validate()?;
    let u: Vec<f64> = x.iter().zip(v).map(|(x, v)| x - t * v).collect();
    Ok(norm * (-0.5 * p.form(v, &u)).exp())
}

/// `M♯(x, v) = M(t, x + tv, v)` for any `t`.
pub fn maxwellian_sharp(p: &TravelingMaxwellianParams, x: &[f64], v: &[f64]) -> Result<f64> {
    eval_maxwellian(p, 0.0, x, v)
}

fn check_grid(grid: &Grid, d: usize) -> Result<()> {
    if grid.d_x != d || grid.d_v != d {
        return Err(Error::UnsupportedDimension(format!(
            "Maxwellian fitting needs d_x = d_v = {d}, got ({}, {})",
            grid.d_x, grid.d_v
        )));
    }
    Ok(())
}

/// `M♯(p)` sampled on the grid nodes (no periodic wrap).
pub fn sample_sharp(p: &TravelingMaxwellianParams, grid: &Grid, time: f64) -> Result<DistributionField> {
    check_grid(grid, p.d)?;
    let norm = p.validate()?;
    Ok(DistributionField::from_fn(grid, time, |x, v| norm * (-0.5 * p.form(v, x)).exp()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxwellianFit {
    pub params: TravelingMaxwellianParams,
    pub residual: f64,
    /// `‖⟨v⟩²⟨x⟩² f♯‖_{L²}` of the input.
    pub input_norm: f64,
    pub converged: bool,
    pub sweeps: usize,
}

pub const MAX_SWEEPS: usize = 200;
const GOLDEN_EVALS: usize = 48;

/// Precomputed weighted data and quadratic features for the objective.
struct Objective {
    /// Per cell: `|v|², |x|², v·x`, then `v_i x_j − v_j x_i` for `i < j`.
    features: Vec<f64>,
    stride: usize,
    weights: Vec<f64>,
    data: Vec<f64>,
    vol: f64,
    yy: f64,
}

impl Objective {
    fn new(sharp: &DistributionField) -> Self {
        let g = &sharp.grid;
        let d = g.d_v;
        let nv = g.v_cells();
        let vt = g.v_table();
        let xt = g.x_table();
        let stride = 3 + d * (d - 1) / 2;
        let mut features = vec![0.0; g.len() * stride];
        let mut weights = vec![0.0; g.len()];
        for ix in 0..g.x_cells() {
            let x = &xt[ix * d..(ix + 1) * d];
            for iv in 0..nv {
                let v = &vt[iv * d..(iv + 1) * d];
                let c = ix * nv + iv;
                let f = &mut features[c * stride..(c + 1) * stride];
                f[0] = v.iter().map(|a| a * a).sum();
                f[1] = x.iter().map(|a| a * a).sum();
                f[2] = v.iter().zip(x).map(|(a, b)| a * b).sum();
                let mut k = 3;
                for i in 0..d {
                    for j in (i + 1)..d {
                        f[k] = v[i] * x[j] - v[j] * x[i];
                        k += 1;
                    }
                }
                weights[c] = (1.0 + f[0]) * (1.0 + f[1]);
            }
        }
        let data: Vec<f64> = sharp.values.iter().zip(&weights).map(|(f, w)| f * w).collect();
        let yy = data.iter().map(|y| y * y).sum();
        Self {
            features,
            stride,
            weights,
            data,
            vol: g.x_volume() * g.v_volume(),
            yy,
        }
    }

    /// Best squared residual over `m` for fixed shape parameters, with that `m`.
    fn eval(&self, p: &TravelingMaxwellianParams) -> (f64, f64) {
        let Ok(norm) = TravelingMaxwellianParams { m: 1.0, ..p.clone() }.validate() else {
            return (f64::INFINITY, 0.0);
        };
        let mut coef = vec![p.sigma, p.alpha, 2.0 * p.beta];
        coef.extend(p.skew_upper().iter().map(|b| 2.0 * b));
        let st = self.stride;
        const CHUNK: usize = 4096;
        let phi: Vec<f64> = self
            .features
            .par_chunks(st)
            .zip(self.weights.par_iter())
            .map(|(f, w)| {
                let q: f64 = f.iter().zip(&coef).map(|(a, b)| a * b).sum();
                w * norm * (-0.5 * q).exp()
            })
            .collect();
        // fixed chunking keeps the sums independent of the thread count
        let parts: Vec<(f64, f64)> = phi
            .par_chunks(CHUNK)
            .zip(self.data.par_chunks(CHUNK))
            .map(|(ps, ys)| ps.iter().zip(ys).fold((0.0, 0.0), |s, (p, y)| (s.0 + p * p, s.1 + p * y)))
            .collect();
        let (pp, py) = parts.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let m = if pp > 0.0 { (py / pp).max(0.0) } else { 0.0 };
        // summed directly: yy − py²/pp cancels below ~1e−8 relative residual
        let r2: f64 = phi
            .par_chunks(CHUNK)
            .zip(self.data.par_chunks(CHUNK))
            .map(|(ps, ys)| ps.iter().zip(ys).map(|(p, y)| (y - m * p).powi(2)).sum::<f64>())
            .collect::<Vec<f64>>()
            .into_iter()
            .sum();
        (r2 * self.vol, m)
    }
}

/// Joint precision matrix of `(v, x)` from the empirical covariance, projected
/// onto the Maxwellian block structure.
fn moment_init(field: &DistributionField, d: usize) -> Result<TravelingMaxwellianParams> {
    let g = &field.grid;
    let nv = g.v_cells();
    let vt = g.v_table();
    let xt = g.x_table();
    let mut mass = 0.0;
    let mut second = DMatrix::<f64>::zeros(2 * d, 2 * d);
    let mut z = vec![0.0; 2 * d];
    for ix in 0..g.x_cells() {
        for iv in 0..nv {
            let f = field.values[ix * nv + iv];
            if f == 0.0 {
                continue;
            }
            z[..d].copy_from_slice(&vt[iv * d..(iv + 1) * d]);
            z[d..].copy_from_slice(&xt[ix * d..(ix + 1) * d]);
            mass += f;
            for a in 0..2 * d {
                for b in 0..2 * d {
                    second[(a, b)] += f * z[a] * z[b];
                }
            }
        }
    }
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    second /= mass;
    let mut init = TravelingMaxwellianParams::isotropic(d, 0.0, 1.0, 1.0);
    if let Some(prec) = second.try_inverse() {
        let mut sig = 0.0;
        let mut alp = 0.0;
        let mut bet = 0.0;
        for i in 0..d {
            sig += prec[(i, i)];
            alp += prec[(d + i, d + i)];
            bet += prec[(i, d + i)];
        }
        init.sigma = sig / d as f64;
        init.alpha = alp / d as f64;
        init.beta = bet / d as f64;
        for i in 0..d {
            for j in 0..d {
                init.b[i * d + j] = 0.5 * (prec[(i, d + j)] - prec[(j, d + i)]);
            }
        }
        if init.validate().is_err() {
            init.beta = 0.0;
            init.b.iter_mut().for_each(|b| *b = 0.0);
        }
        if !(init.alpha > 0.0 && init.sigma > 0.0) {
            init = TravelingMaxwellianParams::isotropic(d, 0.0, 1.0, 1.0);
        }
    }
    Ok(init)
}

fn get_coord(p: &TravelingMaxwellianParams, k: usize) -> f64 {
    match k {
        0 => p.alpha.ln(),
        1 => p.sigma.ln(),
        2 => p.beta,
        _ => p.skew_upper()[k - 3],
    }
}

fn set_coord(p: &TravelingMaxwellianParams, k: usize, x: f64) -> TravelingMaxwellianParams {
    let mut q = p.clone();
    match k {
        0 => q.alpha = x.exp(),
        1 => q.sigma = x.exp(),
        2 => q.beta = x,
        _ => {
            let mut up = q.skew_upper();
            up[k - 3] = x;
            q = q.with_skew(&up);
        }
    }
    q
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, evals: usize, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..evals {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Projects `f♯` onto the traveling Maxwellians in `‖⟨v⟩²⟨x⟩²·‖_{L²}`.
pub fn fit_maxwellian(sharp: &DistributionField) -> Result<MaxwellianFit> {
    let g = &sharp.grid;
    let d = g.d_v;
    check_grid(g, d)?;
    let obj = Objective::new(sharp);
    let input_norm = (obj.yy * obj.vol).sqrt();
    let mut p = moment_init(sharp, d)?;
    let (mut best, mut m) = obj.eval(&p);
    let ncoord = 3 + d * (d - 1) / 2;
    let mut steps: Vec<f64> = (0..ncoord).map(|k| if k < 2 { 0.1 } else { 0.1 * (p.alpha * p.sigma).sqrt() }).collect();
    let floor = 1e-12 * input_norm * input_norm;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let before = best;
        let start: Vec<f64> = (0..ncoord).map(|k| get_coord(&p, k)).collect();
        for k in 0..ncoord {
            let x0 = get_coord(&p, k);
            let s = steps[k];
            let (x, r) = golden(|x| obj.eval(&set_coord(&p, k, x)).0, x0 - s, x0 + s, GOLDEN_EVALS, (1e-3 * s).max(1e-12 * (1.0 + x0.abs())));
            if r < best {
                let moved = (x - x0).abs();
                p = set_coord(&p, k, x);
                best = r;
                // keep the bracket a few times the last move
                steps[k] = (4.0 * moved).clamp(1e-9, 1.0);
            } else {
                steps[k] = (0.25 * s).max(1e-9);
            }
        }
        // pattern move along the net displacement of the sweep
        let end: Vec<f64> = (0..ncoord).map(|k| get_coord(&p, k)).collect();
        if end != start {
            let along = |s: f64| {
                let mut q = p.clone();
                for k in 0..ncoord {
                    q = set_coord(&q, k, start[k] + s * (end[k] - start[k]));
                }
                q
            };
            let (s, r) = golden(|s| obj.eval(&along(s)).0, 0.5, 8.0, GOLDEN_EVALS, 1e-9);
            if r < best {
                p = along(s);
                best = r;
            }
        }
        m = obj.eval(&p).1;
        let settled = steps.iter().all(|&s| s <= 1e-6) && before - best <= 1e-9 * before;
        if best <= floor * 1e-8 || settled {
            converged = true;
            break;
        }
    }
    p.m = m;
    Ok(MaxwellianFit {
        params: p,
        residual: best.sqrt(),
        input_norm,
        converged,
        sweeps,
    })
}
