//! Landau kernel `a_ij(z) = (δ_ij − z_i z_j/|z|²)|z|^{γ+2}`, its divergence
//! `b_i = (1−d)|z|^γ z_i`, its double divergence `c = −(d−1)(d+γ)|z|^γ`, and
//! their cell averages over velocity cells.

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_box, homogeneous_corner_box, CubatureOptions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    gamma: f64,
    d: usize,
}

impl KernelParams {
    pub fn new(gamma: f64, d: usize) -> Result<Self> {
        if !(gamma > -2.0 && gamma < 0.0) {
            return Err(Error::GammaOutOfRange(gamma));
        }
        if !(d == 2 || d == 3) {
            return Err(Error::UnsupportedDimension(format!(
                "velocity dimension {d} (kernel needs 2 or 3)"
            )));
        }
        Ok(Self { gamma, d })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `−(d−1)(d+γ)`, the constant in `c_d(z) = const·|z|^γ`.
    pub fn c_constant(&self) -> f64 {
        let d = self.d as f64;
        -(d - 1.0) * (d + self.gamma)
    }
}

/// Symmetric `d×d` matrix stored in a fixed 3×3 array.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelMatrix {
    pub d: usize,
    pub entries: [[f64; 3]; 3],
}

impl KernelMatrix {
    pub fn zero(d: usize) -> Self {
        Self {
            d,
            entries: [[0.0; 3]; 3],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.entries[i][i]).sum()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.entries[i][j] * x[j]).sum())
            .collect()
    }

    /// Packed upper triangle in row order `(0,0),(0,1),..,(1,1),..`.
    pub fn packed(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(sym_len(self.d));
        for i in 0..self.d {
            for j in i..self.d {
                out.push(self.entries[i][j]);
            }
        }
        out
    }

    pub fn from_packed(d: usize, packed: &[f64]) -> Self {
        let mut m = Self::zero(d);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                m.entries[i][j] = packed[k];
                m.entries[j][i] = packed[k];
                k += 1;
            }
        }
        m
    }
}

/// Number of independent entries of a symmetric `d×d` matrix.
pub const fn sym_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Index of entry `(i, j)` in the packed upper-triangle layout.
pub fn sym_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * i.saturating_sub(1) / 2 + (j - i)
}

fn norm2(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum()
}

fn check_len(z: &[f64], p: &KernelParams) {
    assert_eq!(z.len(), p.d, "vector length must equal the velocity dimension");
}

pub fn kernel_matrix(z: &[f64], p: &KernelParams) -> KernelMatrix {
    check_len(z, p);
    let d = p.d;
    let r2 = norm2(z);
    let mut m = KernelMatrix::zero(d);
    if r2 == 0.0 {
        return m;
    }
    let scale = r2.powf(0.5 * (p.gamma + 2.0));
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            m.entries[i][j] = (delta - z[i] * z[j] / r2) * scale;
        }
    }
    m
}

pub fn kernel_divergence(z: &[f64], p: &KernelParams) -> Result<Vec<f64>> {
    check_len(z, p);
    let r2 = norm2(z);
    if r2 == 0.0 {
        if p.gamma <= -1.0 {
            return Err(Error::SingularPoint);
        }
        return Ok(vec![0.0; p.d]);
    }
    let s = (1.0 - p.d as f64) * r2.powf(0.5 * p.gamma);
    Ok(z.iter().map(|zi| s * zi).collect())
}

pub fn kernel_c(z: &[f64], p: &KernelParams) -> Result<f64> {
    check_len(z, p);
    let r2 = norm2(z);
    if r2 == 0.0 {
        return Err(Error::SingularPoint);
    }
    Ok(p.c_constant() * r2.powf(0.5 * p.gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelComponent {
    Matrix,
    Divergence,
    Contraction,
}

impl KernelComponent {
    pub fn len(&self, d: usize) -> usize {
        match self {
            KernelComponent::Matrix => sym_len(d),
            KernelComponent::Divergence => d,
            KernelComponent::Contraction => 1,
        }
    }

    /// Homogeneity degree of the component.
    pub fn degree(&self, gamma: f64) -> f64 {
        match self {
            KernelComponent::Matrix => gamma + 2.0,
            KernelComponent::Divergence => gamma + 1.0,
            KernelComponent::Contraction => gamma,
        }
    }
}

/// Raw component values at `z` written into `out`; zero at the origin.
fn eval_component(z: &[f64], p: &KernelParams, which: KernelComponent, out: &mut [f64]) {
    let d = p.d;
    let r2 = norm2(z);
    if r2 == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let rg = r2.powf(0.5 * p.gamma);
    match which {
        KernelComponent::Matrix => {
            let mut k = 0;
            for i in 0..d {
                for j in i..d {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    out[k] = (delta * r2 - z[i] * z[j]) * rg;
                    k += 1;
                }
            }
        }
        KernelComponent::Divergence => {
            let s = (1.0 - d as f64) * rg;
            for i in 0..d {
                out[i] = s * z[i];
            }
        }
        KernelComponent::Contraction => out[0] = p.c_constant() * rg,
    }
}

/// Ratio of distance to the origin over cell width beyond which the midpoint
/// value stands in for the cell average.
pub const MIDPOINT_RATIO: f64 = 2.0;

/// Average of the chosen kernel component over the cell `center ± spacing/2`.
///
/// Cells within [`MIDPOINT_RATIO`] widths of the origin are integrated by
/// adaptive cubature; a cell containing the origin is split into orthant
/// boxes cornered at 0 and each is integrated with the homogeneity rescaling.
pub fn cell_averaged_kernel(
    center: &[f64],
    spacing: &[f64],
    p: &KernelParams,
    which: KernelComponent,
) -> Vec<f64> {
    check_len(center, p);
    assert_eq!(spacing.len(), p.d);
    assert!(spacing.iter().all(|&h| h > 0.0), "spacing must be positive");
    let d = p.d;
    let ncomp = which.len(d);
    let mut out = vec![0.0; ncomp];
    let far = center
        .iter()
        .zip(spacing)
        .any(|(c, h)| c.abs() / h > MIDPOINT_RATIO + 1e-9);
    if far {
        eval_component(center, p, which, &mut out);
        return out;
    }
    let lo: Vec<f64> = center.iter().zip(spacing).map(|(c, h)| c - 0.5 * h).collect();
    let hi: Vec<f64> = center.iter().zip(spacing).map(|(c, h)| c + 0.5 * h).collect();
    let volume: f64 = spacing.iter().product();
    let opts = CubatureOptions::default();
    let contains_origin = lo.iter().zip(&hi).all(|(l, h)| *l <= 0.0 && *h >= 0.0);
    let integral = if contains_origin {
        let degree = which.degree(p.gamma);
        let mut total = vec![0.0; ncomp];
        for orthant in 0..(1usize << d) {
            let mut signs = [1.0; 3];
            let mut extent = [0.0; 3];
            for ax in 0..d {
                if orthant >> ax & 1 == 0 {
                    signs[ax] = 1.0;
                    extent[ax] = hi[ax];
                } else {
                    signs[ax] = -1.0;
                    extent[ax] = -lo[ax];
                }
            }
            if extent[..d].iter().any(|&e| e <= 0.0) {
                continue;
            }
            let part = homogeneous_corner_box(
                |q: &[f64], o: &mut [f64]| {
                    let mut z = [0.0; 3];
                    for ax in 0..d {
                        z[ax] = signs[ax] * q[ax];
                    }
                    eval_component(&z[..d], p, which, o);
                },
                &extent[..d],
                degree,
                ncomp,
                opts,
            );
            for (t, v) in total.iter_mut().zip(part.values) {
                *t += v;
            }
        }
        total
    } else {
        adaptive_box(
            |q: &[f64], o: &mut [f64]| eval_component(q, p, which, o),
            &lo,
            &hi,
            ncomp,
            opts,
        )
        .values
    };
    for (o, v) in out.iter_mut().zip(integral) {
        *o = v / volume;
    }
    out
}

/// Both sides of the kernel contraction identities at `(v, v*)`.
#[derive(Clone, Debug)]
pub struct ContractionReport {
    /// `a_ij(v−v*) v_i`, indexed by `j`.
    pub a_dot_v: Vec<f64>,
    /// `|v−v*|^γ (−v_j (v*·(v−v*)) + (v·(v−v*)) v*_j)`.
    pub a_dot_v_rhs: Vec<f64>,
    /// `a_ij(v−v*) v_i v_j`.
    pub a_vv: f64,
    /// `|v−v*|^γ (|v|²|v*|² − (v·v*)²)`.
    pub a_vv_rhs: f64,
    /// `|v|²|v*|² − (v·v*)²`.
    pub gram: f64,
    /// `2|v−v*|²|v*|²`.
    pub gram_bound: f64,
    /// Largest residual of the first identity relative to its natural scale.
    pub a_dot_v_residual: f64,
    pub a_vv_residual: f64,
    pub pythagorean_ok: bool,
}

pub fn contraction_identities(v: &[f64], v_star: &[f64], p: &KernelParams) -> Result<ContractionReport> {
    check_len(v, p);
    check_len(v_star, p);
    let d = p.d;
    let z: Vec<f64> = v.iter().zip(v_star).map(|(a, b)| a - b).collect();
    let r2 = norm2(&z);
    if r2 == 0.0 {
        return Err(Error::SingularPoint);
    }
    let a = kernel_matrix(&z, p);
    let rg = r2.powf(0.5 * p.gamma);
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| a * b).sum() };
    let vs_z = dot(v_star, &z);
    let v_z = dot(v, &z);
    let a_dot_v: Vec<f64> = (0..d)
        .map(|j| (0..d).map(|i| a.entries[i][j] * v[i]).sum())
        .collect();
    let a_dot_v_rhs: Vec<f64> = (0..d)
        .map(|j| rg * (-v[j] * vs_z + v_z * v_star[j]))
        .collect();
    let a_vv: f64 = (0..d).map(|j| a_dot_v[j] * v[j]).sum();
    let nv2 = norm2(v);
    let ns2 = norm2(v_star);
    let vvs = dot(v, v_star);
    let gram = nv2 * ns2 - vvs * vvs;
    let a_vv_rhs = rg * gram;
    let gram_bound = 2.0 * r2 * ns2;

    let scale1 = rg * r2.sqrt() * nv2.sqrt() * (ns2.sqrt() + r2.sqrt()) + f64::MIN_POSITIVE;
    let a_dot_v_residual = a_dot_v
        .iter()
        .zip(&a_dot_v_rhs)
        .map(|(l, r)| (l - r).abs() / scale1)
        .fold(0.0, f64::max);
    let scale2 = rg * nv2 * (ns2 + r2) + f64::MIN_POSITIVE;
    let a_vv_residual = (a_vv - a_vv_rhs).abs() / scale2;
    // gram is computed with cancellation; allow rounding at its natural scale
    let pythagorean_ok = gram <= gram_bound + 8.0 * f64::EPSILON * nv2 * ns2;
    Ok(ContractionReport {
        a_dot_v,
        a_dot_v_rhs,
        a_vv,
        a_vv_rhs,
        gram,
        gram_bound,
        a_dot_v_residual,
        a_vv_residual,
        pythagorean_ok,
    })
}
