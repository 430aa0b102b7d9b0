//! Exact free transport `∂_t f + v·∇_x f = 0` on the periodic box by
//! Fourier phase shifts, one spatial slice per velocity cell.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::fft::{signed_frequency, FftNd};
use crate::phase::{DistributionField, Grid};

/// Reusable transport operator for one grid.
#[derive(Clone, Debug)]
pub struct Transport {
    grid: Grid,
    fft: Option<FftNd>,
    /// Per velocity cell, the first `d_x` components divided by `L_x`.
    scaled_v: Vec<f64>,
}

impl Transport {
    pub fn new(grid: &Grid) -> Self {
        let fft = (grid.d_x > 0).then(|| FftNd::new(grid.n_x, grid.d_x));
        let vt = grid.v_table();
        let mut scaled_v = Vec::with_capacity(grid.v_cells() * grid.d_x);
        for v in vt.chunks(grid.d_v) {
            for &c in &v[..grid.d_x] {
                scaled_v.push(c / grid.l_x);
            }
        }
        Self {
            grid: grid.clone(),
            fft,
            scaled_v,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Translate every spatial slice by `v·dt` and advance the time stamp.
    pub fn shift(&self, f: &DistributionField, dt: f64) -> DistributionField {
        let mut out = f.clone();
        self.shift_values(&mut out.values, dt);
        out.time += dt;
        out
    }

    /// In-place slice translation without touching any time stamp.
    pub fn shift_values(&self, values: &mut [f64], dt: f64) {
        let g = &self.grid;
        let Some(fft) = &self.fft else { return };
        if dt == 0.0 {
            return;
        }
        assert_eq!(values.len(), g.len());
        let nx = g.x_cells();
        let nv = g.v_cells();
        let dx = g.d_x;
        let n = g.n_x;
        let mut vmajor = transpose(values, nx, nv);
        vmajor.par_chunks_mut(nx).enumerate().for_each(|(iv, slice)| {
            let mut frac = [0.0f64; 3];
            for a in 0..dx {
                frac[a] = (self.scaled_v[iv * dx + a] * dt).rem_euclid(1.0);
            }
            if frac[..dx].iter().all(|&q| q == 0.0) {
                return;
            }
            let mut buf: Vec<Complex64> = slice.iter().map(|&r| Complex64::new(r, 0.0)).collect();
            fft.forward(&mut buf);
            // per-axis phase tables; the Nyquist mode is left unshifted so the
            // operator stays an exact group action
            let mut tables = [Vec::new(), Vec::new(), Vec::new()];
            for a in 0..dx {
                tables[a] = (0..n)
                    .map(|k| match signed_frequency(k, n) {
                        Some(m) => {
                            let ph = -2.0 * std::f64::consts::PI * (m as f64 * frac[a]).rem_euclid(1.0);
                            Complex64::new(ph.cos(), ph.sin())
                        }
                        None => Complex64::new(1.0, 0.0),
                    })
                    .collect();
            }
            let mut idx = [0usize; 3];
            for (flat, c) in buf.iter_mut().enumerate() {
                Grid::unflatten(flat, n, dx, &mut idx);
                let mut ph = tables[0][idx[0]];
                for a in 1..dx {
                    ph *= tables[a][idx[a]];
                }
                *c *= ph;
            }
            fft.inverse(&mut buf);
            for (s, c) in slice.iter_mut().zip(&buf) {
                *s = c.re;
            }
        });
        let back = transpose(&vmajor, nv, nx);
        values.copy_from_slice(&back);
    }
}

/// Transpose a row-major `rows × cols` array.
pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    out[c * rows + r] = a[r * cols + c];
                }
            }
        }
    }
    out
}

pub fn transport_shift(f: &DistributionField, dt: f64) -> DistributionField {
    Transport::new(&f.grid).shift(f, dt)
}

/// `f_free(t, x, v) = f_data(x − tv, v)` by one shift of the data.
pub fn free_solution(data: &DistributionField, t: f64) -> DistributionField {
    let mut out = transport_shift(data, t);
    out.time = data.time + t;
    out
}

/// `f♯(x, v) = f(t, x + tv, v)`; the time stamp is kept.
pub fn pullback_sharp(f: &DistributionField) -> DistributionField {
    let mut out = f.clone();
    Transport::new(&f.grid).shift_values(&mut out.values, -f.time);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_1x2v() -> DistributionField {
        let g = Grid::new(1, 2, 64, 12, 40.0, 3.0).unwrap();
        DistributionField::from_fn(&g, 0.0, |x, v| {
            (-(x[0] - 1.0).powi(2) - 2.0 * v[0] * v[0] - v[1] * v[1]).exp()
        })
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn zero_shift_is_identity() {
        let f = gaussian_1x2v();
        let s = transport_shift(&f, 0.0);
        assert_eq!(s.values, f.values);
    }

    #[test]
    fn shift_and_back() {
        let f = gaussian_1x2v();
        let back = transport_shift(&transport_shift(&f, 3.7), -3.7);
        assert!(max_diff(&back.values, &f.values) <= 1e-12);
        assert_eq!(back.time, 0.0);
    }

    #[test]
    fn integer_cell_shift_is_exact_translation() {
        // v·dt = 2Δx moves every slice by exactly two nodes
        let g = Grid::new(1, 2, 16, 2, 16.0, 1.0).unwrap();
        let f = DistributionField::from_fn(&g, 0.0, |x, _| (-(x[0] * x[0]) / 4.0).exp());
        let dt = 2.0 / 0.5;
        let s = transport_shift(&f, dt);
        let nv = g.v_cells();
        for iv in 0..nv {
            let mut v = [0.0; 2];
            g.v_of(iv, &mut v);
            let cells = (v[0] * dt).round() as i64;
            for ix in 0..16i64 {
                let src = (ix - cells).rem_euclid(16) as usize;
                let got = s.values[ix as usize * nv + iv];
                let want = f.values[src * nv + iv];
                assert!((got - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sharp_of_free_solution_is_data() {
        let f = gaussian_1x2v();
        let ft = free_solution(&f, 6.25);
        assert_eq!(ft.time, 6.25);
        let sharp = pullback_sharp(&ft);
        assert_eq!(sharp.time, 6.25);
        assert!(max_diff(&sharp.values, &f.values) <= 1e-12);
        assert_eq!(pullback_sharp(&f).values, f.values);
    }

    #[test]
    fn homogeneous_mode_only_advances_time() {
        let g = Grid::new(0, 2, 1, 6, 1.0, 2.0).unwrap();
        let f = DistributionField::from_fn(&g, 0.0, |_, v| (-v[0] * v[0]).exp());
        let s = transport_shift(&f, 1.5);
        assert_eq!(s.values, f.values);
        assert_eq!(s.time, 1.5);
    }

    #[test]
    fn two_dimensional_shift_round_trip() {
        let g = Grid::new(2, 2, 16, 6, 20.0, 2.0).unwrap();
        let f = DistributionField::from_fn(&g, 0.0, |x, v| {
            (-(x[0] * x[0] + x[1] * x[1]) / 3.0 - v[0] * v[0] - v[1] * v[1]).exp()
        });
        let back = transport_shift(&transport_shift(&f, 2.3), -2.3);
        assert!(max_diff(&back.values, &f.values) <= 1e-12);
    }

    proptest! {
        #[test]
        fn group_property(t1 in -5.0f64..5.0, t2 in -5.0f64..5.0) {
            let f = gaussian_1x2v();
            let a = free_solution(&f, t1 + t2);
            let b = transport_shift(&free_solution(&f, t1), t2);
            prop_assert!(max_diff(&a.values, &b.values) <= 1e-12);
        }

        #[test]
        fn transport_preserves_v_sums(dt in -8.0f64..8.0) {
            let f = gaussian_1x2v();
            let s = transport_shift(&f, dt);
            let nv = f.grid.v_cells();
            for iv in 0..nv {
                let a: f64 = (0..f.grid.x_cells()).map(|ix| f.values[ix * nv + iv]).sum();
                let b: f64 = (0..f.grid.x_cells()).map(|ix| s.values[ix * nv + iv]).sum();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-15);
            }
        }
    }
}
