//! Phase-space grid, sampled distribution, and the weights `⟨v⟩`, `⟨x−tv⟩`,
//! `e^{d(t)⟨v⟩²}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest exponent whose `exp` is finite in f64.
pub const EXP_LIMIT: f64 = 709.0;

/// Uniform grid on `[−L_x/2, L_x/2)^{d_x} × [−v_max, v_max)^{d_v}`.
///
/// Spatial nodes sit at `−L_x/2 + iΔx` (periodic), velocity nodes at cell
/// centres `−v_max + (j+½)Δv`. Storage is spatial-cell-major with the
/// velocity block contiguous; within each block the axes are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d_x: usize,
    pub d_v: usize,
    pub n_x: usize,
    pub n_v: usize,
    pub l_x: f64,
    pub v_max: f64,
}

impl Grid {
    pub fn new(d_x: usize, d_v: usize, n_x: usize, n_v: usize, l_x: f64, v_max: f64) -> Result<Self> {
        if !(d_v == 2 || d_v == 3) {
            return Err(Error::UnsupportedDimension(format!("d_v = {d_v} (expected 2 or 3)")));
        }
        Self::build(d_x, d_v, n_x, n_v, l_x, v_max)
    }

    /// Grid with `d_v = 1` permitted, for transport-only experiments where the
    /// collision kernel is never evaluated.
    pub fn transport_only(d_x: usize, d_v: usize, n_x: usize, n_v: usize, l_x: f64, v_max: f64) -> Result<Self> {
        if !(1..=3).contains(&d_v) {
            return Err(Error::UnsupportedDimension(format!("d_v = {d_v}")));
        }
        Self::build(d_x, d_v, n_x, n_v, l_x, v_max)
    }

    fn build(d_x: usize, d_v: usize, n_x: usize, n_v: usize, l_x: f64, v_max: f64) -> Result<Self> {
        if d_x > 3 {
            return Err(Error::UnsupportedDimension(format!("d_x = {d_x} (expected 0..=3)")));
        }
        if d_x > d_v {
            return Err(Error::UnsupportedDimension(format!(
                "d_x = {d_x} exceeds d_v = {d_v}; transport needs a velocity per spatial axis"
            )));
        }
        if n_v == 0 || (d_x > 0 && n_x == 0) {
            return Err(Error::ConfigInvalid("cell counts must be positive".into()));
        }
        if !(v_max > 0.0 && v_max.is_finite()) || (d_x > 0 && !(l_x > 0.0 && l_x.is_finite())) {
            return Err(Error::ConfigInvalid("box sizes must be positive and finite".into()));
        }
        let (n_x, l_x) = if d_x == 0 { (1, 1.0) } else { (n_x, l_x) };
        Ok(Self {
            d_x,
            d_v,
            n_x,
            n_v,
            l_x,
            v_max,
        })
    }

    pub fn dx(&self) -> f64 {
        self.l_x / self.n_x as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.n_v as f64
    }

    pub fn x_cells(&self) -> usize {
        self.n_x.pow(self.d_x as u32)
    }

    pub fn v_cells(&self) -> usize {
        self.n_v.pow(self.d_v as u32)
    }

    pub fn len(&self) -> usize {
        self.x_cells() * self.v_cells()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Δx^{d_x}` (1 in the homogeneous mode).
    pub fn x_volume(&self) -> f64 {
        self.dx().powi(self.d_x as i32)
    }

    pub fn v_volume(&self) -> f64 {
        self.dv().powi(self.d_v as i32)
    }

    pub fn x_node(&self, i: usize) -> f64 {
        -0.5 * self.l_x + i as f64 * self.dx()
    }

    pub fn v_node(&self, j: usize) -> f64 {
        -self.v_max + (j as f64 + 0.5) * self.dv()
    }

    /// Per-axis indices of a flat index over `dims` axes of size `n`.
    pub fn unflatten(flat: usize, n: usize, dims: usize, out: &mut [usize]) {
        let mut rem = flat;
        for ax in (0..dims).rev() {
            out[ax] = rem % n;
            rem /= n;
        }
    }

    pub fn x_of(&self, cell: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        Self::unflatten(cell, self.n_x, self.d_x, &mut idx);
        for ax in 0..self.d_x {
            out[ax] = self.x_node(idx[ax]);
        }
    }

    pub fn v_of(&self, cell: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        Self::unflatten(cell, self.n_v, self.d_v, &mut idx);
        for ax in 0..self.d_v {
            out[ax] = self.v_node(idx[ax]);
        }
    }

    /// All velocity-cell centres, `v_cells × d_v`, row-major.
    pub fn v_table(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.v_cells() * self.d_v];
        for (c, chunk) in out.chunks_mut(self.d_v).enumerate() {
            self.v_of(c, chunk);
        }
        out
    }

    /// All spatial nodes, `x_cells × d_x`, row-major.
    pub fn x_table(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.x_cells() * self.d_x];
        if self.d_x > 0 {
            for (c, chunk) in out.chunks_mut(self.d_x).enumerate() {
                self.x_of(c, chunk);
            }
        }
        out
    }

    /// Largest `|v|²` over velocity-cell centres.
    pub fn max_v_squared(&self) -> f64 {
        let edge = self.v_max - 0.5 * self.dv();
        self.d_v as f64 * edge * edge
    }

    /// Wrap a displacement to the minimal image on the periodic box.
    pub fn minimal_image(&self, u: f64) -> f64 {
        wrap_periodic(u, self.l_x)
    }
}

pub fn wrap_periodic(u: f64, period: f64) -> f64 {
    u - period * (u / period).round()
}

/// `⟨u⟩ = (1+|u|²)^{1/2}`.
pub fn bracket(u: &[f64]) -> f64 {
    (1.0 + u.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Sampled `f(t, ·, ·)` on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField {
    pub time: f64,
    pub values: Vec<f64>,
    pub grid: Grid,
}

impl DistributionField {
    pub fn zeros(grid: &Grid, time: f64) -> Self {
        Self {
            time,
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn from_values(grid: &Grid, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            time,
            values,
            grid: grid.clone(),
        })
    }

    /// Sample `f(x, v)` at every grid point.
    pub fn from_fn<F>(grid: &Grid, time: f64, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64,
    {
        let nv = grid.v_cells();
        let vt = grid.v_table();
        let xt = grid.x_table();
        let mut values = vec![0.0; grid.len()];
        for (ix, block) in values.chunks_mut(nv).enumerate() {
            let x = &xt[ix * grid.d_x..(ix + 1) * grid.d_x];
            for (iv, out) in block.iter_mut().enumerate() {
                *out = f(x, &vt[iv * grid.d_v..(iv + 1) * grid.d_v]);
            }
        }
        Self {
            time,
            values,
            grid: grid.clone(),
        }
    }

    pub fn slice(&self, ix: usize) -> &[f64] {
        let nv = self.grid.v_cells();
        &self.values[ix * nv..(ix + 1) * nv]
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.x_volume() * self.grid.v_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NanDetected(self.time))
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= lambda);
        out
    }

    /// Largest value on the outermost velocity cells, over all spatial cells.
    pub fn velocity_boundary_max(&self) -> f64 {
        let g = &self.grid;
        let nv = g.v_cells();
        let mut idx = [0usize; 3];
        let mut best: f64 = 0.0;
        for iv in 0..nv {
            Grid::unflatten(iv, g.n_v, g.d_v, &mut idx);
            if idx[..g.d_v].iter().any(|&i| i == 0 || i + 1 == g.n_v) {
                for ix in 0..g.x_cells() {
                    best = best.max(self.values[ix * nv + iv].abs());
                }
            }
        }
        best
    }
}

/// Weight `⟨v⟩^ℓ ⟨x−tv⟩^m e^{d(t)⟨v⟩²}` with `d(t) = d0(1+(1+t)^{−δ})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub v_power: u32,
    pub xtv_power: f64,
    pub gaussian: bool,
    pub d0: f64,
    pub delta: f64,
}

/// `δ = min{(2+γ)/4, 1/10}`.
pub fn delta_from_gamma(gamma: f64) -> f64 {
    ((2.0 + gamma) / 4.0).min(0.1)
}

impl WeightSpec {
    pub fn from_gamma(gamma: f64, d0: f64, v_power: u32, xtv_power: f64, gaussian: bool) -> Self {
        Self {
            v_power,
            xtv_power,
            gaussian,
            d0,
            delta: delta_from_gamma(gamma),
        }
    }

    /// Gaussian factor only.
    pub fn gaussian_only(gamma: f64, d0: f64) -> Self {
        Self::from_gamma(gamma, d0, 0, 0.0, true)
    }
}

pub fn gaussian_exponent(t: f64, spec: &WeightSpec) -> f64 {
    spec.d0 * (1.0 + (1.0 + t).powf(-spec.delta))
}

/// Weight at `(t, x, v)`; `x − tv` uses `v`'s first `x.len()` components and
/// is wrapped to the minimal image when `period` is given.
pub fn weight_value(t: f64, x: &[f64], v: &[f64], spec: &WeightSpec, period: Option<f64>) -> f64 {
    let v2: f64 = v.iter().map(|a| a * a).sum();
    let mut w = 1.0;
    if spec.v_power > 0 {
        w *= (1.0 + v2).sqrt().powi(spec.v_power as i32);
    }
    if spec.xtv_power != 0.0 {
        let mut s = 1.0;
        for (i, xi) in x.iter().enumerate() {
            let mut u = xi - t * v[i];
            if let Some(p) = period {
                u = wrap_periodic(u, p);
            }
            s += u * u;
        }
        w *= s.powf(0.5 * spec.xtv_power);
    }
    if spec.gaussian {
        w *= (gaussian_exponent(t, spec) * (1.0 + v2)).exp();
    }
    w
}

fn gaussian_factors(f: &DistributionField, spec: &WeightSpec, sign: f64) -> Result<Vec<f64>> {
    let d = gaussian_exponent(f.time, spec);
    let worst = d * (1.0 + f.grid.max_v_squared());
    if worst > EXP_LIMIT {
        return Err(Error::Overflow(worst));
    }
    let vt = f.grid.v_table();
    Ok(vt
        .chunks(f.grid.d_v)
        .map(|v| (sign * d * (1.0 + v.iter().map(|a| a * a).sum::<f64>())).exp())
        .collect())
}

/// `g = e^{d(t)⟨v⟩²} f`.
pub fn to_g(f: &DistributionField, spec: &WeightSpec) -> Result<DistributionField> {
    apply_factors(f, &gaussian_factors(f, spec, 1.0)?)
}

/// `f = e^{−d(t)⟨v⟩²} g`.
pub fn from_g(g: &DistributionField, spec: &WeightSpec) -> Result<DistributionField> {
    // divide by the same factors as to_g so the round trip is exact up to one rounding
    let fac = gaussian_factors(g, spec, 1.0)?;
    let nv = g.grid.v_cells();
    let mut out = g.clone();
    for block in out.values.chunks_mut(nv) {
        for (v, w) in block.iter_mut().zip(&fac) {
            *v /= w;
        }
    }
    Ok(out)
}

fn apply_factors(f: &DistributionField, fac: &[f64]) -> Result<DistributionField> {
    let nv = f.grid.v_cells();
    let mut out = f.clone();
    for block in out.values.chunks_mut(nv) {
        for (v, w) in block.iter_mut().zip(fac) {
            *v *= w;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_exponent_examples() {
        let s = WeightSpec::from_gamma(-1.0, 1.0, 0, 0.0, true);
        assert_eq!(s.delta, 0.1);
        assert_eq!(gaussian_exponent(0.0, &s), 2.0);
        assert!((gaussian_exponent(1e12, &s) - 1.0).abs() < 0.1);
        let mut prev = gaussian_exponent(0.0, &s);
        for k in 1..200 {
            let d = gaussian_exponent(k as f64 * 0.5, &s);
            assert!(d < prev && d >= 1.0);
            prev = d;
        }
        assert!((delta_from_gamma(-1.8) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn weight_examples() {
        let s = WeightSpec::from_gamma(-1.0, 1.0, 1, 1.0, false);
        let v = [0.0, 0.0];
        assert!((weight_value(3.0, &[0.0], &v, &s, None) - 1.0).abs() < 1e-15);
        let v = [0.7, -0.2];
        let t = 2.5;
        let x = [t * v[0]];
        let expect = (1.0 + 0.49 + 0.04f64).sqrt();
        assert!((weight_value(t, &x, &v, &s, None) - expect).abs() < 1e-14);

        let s = WeightSpec::from_gamma(-1.0, 1.0, 0, 2.0, false);
        let r = 3f64.sqrt();
        let w = weight_value(0.0, &[r, 0.0], &[0.0, 0.0], &s, None);
        assert!((w - 4.0).abs() < 1e-13);

        let s = WeightSpec::from_gamma(-1.0, 1.0, 2, 0.0, true);
        let w = weight_value(0.0, &[], &[1.0, 0.0], &s, None);
        assert!((w - 2.0 * 4f64.exp()).abs() < 1e-12 * w);
    }

    #[test]
    fn to_g_examples() {
        let grid = Grid::new(0, 2, 1, 16, 1.0, 3.0).unwrap();
        let spec = WeightSpec::gaussian_only(-1.0, 1.0);
        let z = DistributionField::zeros(&grid, 0.0);
        assert!(to_g(&z, &spec).unwrap().values.iter().all(|&v| v == 0.0));
        let d0 = gaussian_exponent(0.0, &spec);
        let f = DistributionField::from_fn(&grid, 0.0, |_, v| {
            (-2.0 * d0 * (1.0 + v[0] * v[0] + v[1] * v[1])).exp()
        });
        let g = to_g(&f, &spec).unwrap();
        let vt = grid.v_table();
        for (i, v) in vt.chunks(2).enumerate() {
            let expect = (-d0 * (1.0 + v[0] * v[0] + v[1] * v[1])).exp();
            assert!((g.values[i] - expect).abs() <= 1e-13 * expect);
        }
    }

    #[test]
    fn to_g_overflow() {
        let grid = Grid::new(0, 3, 1, 8, 1.0, 20.0).unwrap();
        let spec = WeightSpec::gaussian_only(-1.0, 1.0);
        let f = DistributionField::zeros(&grid, 0.0);
        assert!(matches!(to_g(&f, &spec), Err(Error::Overflow(_))));
    }

    #[test]
    fn grid_layout() {
        let g = Grid::new(1, 2, 4, 4, 8.0, 2.0).unwrap();
        assert_eq!(g.dx(), 2.0);
        assert_eq!(g.dv(), 1.0);
        assert_eq!(g.x_node(0), -4.0);
        assert_eq!(g.v_node(0), -1.5);
        let mut v = [0.0; 2];
        g.v_of(1, &mut v);
        assert_eq!(v, [-1.5, -0.5]);
        assert!(Grid::new(1, 1, 4, 4, 1.0, 1.0).is_err());
        assert!(Grid::new(3, 2, 4, 4, 1.0, 1.0).is_err());
        let h = Grid::new(0, 2, 99, 4, 5.0, 1.0).unwrap();
        assert_eq!(h.x_cells(), 1);
        assert_eq!(h.x_volume(), 1.0);
    }

    proptest! {
        #[test]
        fn g_round_trip(vals in proptest::collection::vec(0.0f64..10.0, 64), t in 0.0f64..20.0) {
            let grid = Grid::new(0, 2, 1, 8, 1.0, 4.0).unwrap();
            let f = DistributionField::from_values(&grid, t, vals).unwrap();
            let spec = WeightSpec::gaussian_only(-0.7, 0.8);
            let back = from_g(&to_g(&f, &spec).unwrap(), &spec).unwrap();
            for (a, b) in f.values.iter().zip(&back.values) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }

        #[test]
        fn xtv_weight_rides_characteristics(
            x0 in -3.0f64..3.0, v in -2.0f64..2.0, vy in -2.0f64..2.0, t in 0.0f64..10.0
        ) {
            let s = WeightSpec::from_gamma(-1.0, 1.0, 0, 3.0, false);
            let w0 = weight_value(0.0, &[x0], &[v, vy], &s, Some(100.0));
            let wt = weight_value(t, &[x0 + t * v], &[v, vy], &s, Some(100.0));
            prop_assert!((w0 - wt).abs() <= 1e-9 * w0);
        }

        #[test]
        fn gaussian_exponent_bounded(t in 0.0f64..1e6, gamma in -1.99f64..-0.01, d0 in 0.01f64..3.0) {
            let s = WeightSpec::gaussian_only(gamma, d0);
            let d = gaussian_exponent(t, &s);
            prop_assert!(d >= d0 && d <= 2.0 * d0);
        }
    }
}
