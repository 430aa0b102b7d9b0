//! Numerical integration used by the kernel tables and the inequality oracles.
//!
//! Two families live here: tensor Gauss-Legendre cubature with recursive
//! bisection over boxes in up to three dimensions, and tanh-sinh (double
//! exponential) quadrature on finite intervals. The latter tolerates
//! integrable endpoint singularities, which is what the radial reductions in
//! the oracles produce.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Settings for [`adaptive_box`].
#[derive(Clone, Copy, Debug)]
pub struct CubatureOptions {
    pub rel_tol: f64,
    pub max_depth: usize,
    pub order: usize,
}

impl Default for CubatureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_depth: 24,
            order: 4,
        }
    }
}

/// Result of an adaptive cubature: integral per component plus whether every
/// leaf met its tolerance before `max_depth`.
#[derive(Clone, Debug)]
pub struct Cubature {
    pub values: Vec<f64>,
    pub converged: bool,
}

struct BoxRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl BoxRule {
    fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    /// Tensor rule over `[lo, hi]`, accumulating into `out`.
    fn apply<F>(&self, f: &F, lo: &[f64], hi: &[f64], scratch: &mut [f64], out: &mut [f64])
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let dim = lo.len();
        let q = self.nodes.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut idx = [0usize; 3];
        let mut point = [0.0; 3];
        let total = q.pow(dim as u32);
        let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b + a)).collect();
        let jac: f64 = half.iter().product();
        for flat in 0..total {
            let mut rem = flat;
            let mut w = jac;
            for ax in 0..dim {
                idx[ax] = rem % q;
                rem /= q;
                point[ax] = mid[ax] + half[ax] * self.nodes[idx[ax]];
                w *= self.weights[idx[ax]];
            }
            f(&point[..dim], scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += w * s;
            }
        }
    }
}

/// Adaptive tensor Gauss-Legendre cubature of a vector-valued integrand over
/// an axis-aligned box in 1 to 3 dimensions.
///
/// A box is accepted when the estimate from its 2^d children agrees with the
/// parent estimate to within its volume share of the global tolerance.
pub fn adaptive_box<F>(f: F, lo: &[f64], hi: &[f64], ncomp: usize, opts: CubatureOptions) -> Cubature
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = lo.len();
    assert!((1..=3).contains(&dim) && hi.len() == dim);
    let rule = BoxRule::new(opts.order);
    let mut scratch = vec![0.0; ncomp];
    let mut whole = vec![0.0; ncomp];
    rule.apply(&f, lo, hi, &mut scratch, &mut whole);
    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| (b - a).abs()).product();
    if volume == 0.0 {
        return Cubature {
            values: vec![0.0; ncomp],
            converged: true,
        };
    }
    let scale = whole.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let abs_tol = (opts.rel_tol * scale).max(f64::MIN_POSITIVE);
    let mut values = vec![0.0; ncomp];
    let mut converged = true;
    refine(
        &f,
        &rule,
        lo,
        hi,
        &whole,
        abs_tol / volume,
        0,
        opts.max_depth,
        &mut scratch,
        &mut values,
        &mut converged,
    );
    Cubature { values, converged }
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &F,
    rule: &BoxRule,
    lo: &[f64],
    hi: &[f64],
    parent: &[f64],
    tol_density: f64,
    depth: usize,
    max_depth: usize,
    scratch: &mut [f64],
    acc: &mut [f64],
    converged: &mut bool,
) where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = lo.len();
    let ncomp = parent.len();
    let nchild = 1usize << dim;
    let mut children = vec![vec![0.0; ncomp]; nchild];
    let mut bounds = Vec::with_capacity(nchild);
    let mut sum = vec![0.0; ncomp];
    for (c, child) in children.iter_mut().enumerate() {
        let mut clo = [0.0; 3];
        let mut chi = [0.0; 3];
        for ax in 0..dim {
            let m = 0.5 * (lo[ax] + hi[ax]);
            if c >> ax & 1 == 0 {
                clo[ax] = lo[ax];
                chi[ax] = m;
            } else {
                clo[ax] = m;
                chi[ax] = hi[ax];
            }
        }
        rule.apply(f, &clo[..dim], &chi[..dim], scratch, child);
        for (s, v) in sum.iter_mut().zip(child.iter()) {
            *s += v;
        }
        bounds.push((clo, chi));
    }
    let err = parent
        .iter()
        .zip(&sum)
        .fold(0.0f64, |m, (p, s)| m.max((p - s).abs()));
    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| (b - a).abs()).product();
    if err <= tol_density * volume || depth + 1 >= max_depth {
        if err > tol_density * volume {
            *converged = false;
        }
        for (a, s) in acc.iter_mut().zip(&sum) {
            *a += s;
        }
        return;
    }
    for (child, (clo, chi)) in children.iter().zip(bounds.iter()) {
        refine(
            f,
            rule,
            &clo[..dim],
            &chi[..dim],
            child,
            tol_density,
            depth + 1,
            max_depth,
            scratch,
            acc,
            converged,
        );
    }
}

/// Integral over the box `[0, h_1] x ... x [0, h_d]` of an integrand that is
/// positively homogeneous of `degree` and singular only at the origin.
///
/// Halving the box reproduces the corner sub-box as a scaled copy, so
/// `I = R / (1 - 2^{-(d + degree)})` where `R` covers the remaining
/// `2^d - 1` sub-boxes, none of which touch the origin.
pub fn homogeneous_corner_box<F>(
    f: F,
    extent: &[f64],
    degree: f64,
    ncomp: usize,
    opts: CubatureOptions,
) -> Cubature
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = extent.len();
    let scale_factor = 1.0 - 0.5f64.powf(dim as f64 + degree);
    assert!(scale_factor > 0.0, "integrand is not integrable at the origin");
    let mut rest = vec![0.0; ncomp];
    let mut converged = true;
    if extent.iter().any(|&h| h == 0.0) {
        return Cubature {
            values: rest,
            converged,
        };
    }
    for c in 1..(1usize << dim) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for ax in 0..dim {
            let m = 0.5 * extent[ax];
            if c >> ax & 1 == 0 {
                lo[ax] = 0.0;
                hi[ax] = m;
            } else {
                lo[ax] = m;
                hi[ax] = extent[ax];
            }
        }
        let part = adaptive_box(&f, &lo[..dim], &hi[..dim], ncomp, opts);
        converged &= part.converged;
        for (r, p) in rest.iter_mut().zip(part.values) {
            *r += p;
        }
    }
    Cubature {
        values: rest.into_iter().map(|r| r / scale_factor).collect(),
        converged,
    }
}

/// Tanh-sinh quadrature of `f` over `[a, b]` with step `2^{-level}`.
///
/// Abscissae are produced as distances from the nearer endpoint so that
/// integrable endpoint singularities are sampled without cancellation.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, level: u32) -> f64
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let h = 0.5f64.powi(level as i32);
    let mut sum = 0.0;
    // centre node
    sum += f(a + half) * PI / 2.0;
    let mut k = 1usize;
    loop {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let cu = u.cosh();
        let w = 0.5 * PI * t.cosh() / (cu * cu);
        // 1 - tanh(u) = exp(-u) / cosh(u)
        let dist = half * (-u).exp() / cu;
        if w < 1e-300 || dist <= 0.0 || dist.abs() < f64::MIN_POSITIVE * 16.0 {
            break;
        }
        let left = a + dist;
        let right = b - dist;
        let mut contrib = 0.0;
        if left > a && left < b {
            contrib += f(left);
        }
        if right > a && right < b {
            contrib += f(right);
        }
        sum += w * contrib;
        if t > 6.5 {
            break;
        }
        k += 1;
    }
    sum * h * half
}

/// Tanh-sinh over `[a, inf)` via `x = a + s / (1 - s)`.
pub fn tanh_sinh_semi_infinite<F>(f: F, a: f64, level: u32) -> f64
where
    F: Fn(f64) -> f64,
{
    tanh_sinh(
        |s| {
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v / (one_minus * one_minus)
            }
        },
        0.0,
        1.0,
        level,
    )
}

/// Piecewise tanh-sinh over consecutive breakpoints, so interior kinks and
/// singularities land on panel endpoints.
pub fn tanh_sinh_panels<F>(f: F, breakpoints: &[f64], level: u32) -> f64
where
    F: Fn(f64) -> f64,
{
    breakpoints
        .windows(2)
        .map(|w| tanh_sinh(&f, w[0], w[1], level))
        .sum()
}
