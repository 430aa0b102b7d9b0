//! Velocity convolutions `ā = a∗f`, `b̄ = b∗f`, `c̄ = c∗f` per spatial cell.
//!
//! The kernel is tabulated as cell averages over the difference lattice
//! `k·Δv`, `k ∈ (−n_v, n_v)^{d_v}`, laid out on the zero-padded `(2n_v)^{d_v}`
//! torus so that circular convolution reproduces the open-box sum exactly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::kernel::{cell_averaged_kernel, sym_len, KernelComponent, KernelParams};
use crate::phase::{wrap_periodic, DistributionField, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvolutionMethod {
    Direct,
    Fft,
}

/// Tabulated kernel for one `(d_v, n_v, Δv, γ)`.
#[derive(Debug)]
pub struct KernelTables {
    d: usize,
    n: usize,
    ncomp: usize,
    /// `ncomp` real tables over the padded lattice, component-major.
    table: Vec<f64>,
    /// Spectra of `T_{2p} + i T_{2p+1}`.
    spectra: Vec<Vec<Complex64>>,
    fft: FftNd,
}

impl KernelTables {
    pub fn new(d: usize, n: usize, dv: f64, p: &KernelParams) -> Self {
        assert_eq!(d, p.d());
        let nsym = sym_len(d);
        let ncomp = nsym + d + 1;
        let np = 2 * n;
        let len = np.pow(d as u32);
        let spacing = vec![dv; d];
        let entries: Vec<Vec<f64>> = (0..len)
            .into_par_iter()
            .map(|flat| {
                let mut idx = [0usize; 3];
                Grid::unflatten(flat, np, d, &mut idx);
                let mut out = vec![0.0; ncomp];
                if idx[..d].contains(&n) {
                    return out;
                }
                let mut center = [0.0; 3];
                for a in 0..d {
                    let k = if idx[a] < n { idx[a] as f64 } else { idx[a] as f64 - np as f64 };
                    center[a] = k * dv;
                }
                let c = &center[..d];
                let am = cell_averaged_kernel(c, &spacing, p, KernelComponent::Matrix);
                let bm = cell_averaged_kernel(c, &spacing, p, KernelComponent::Divergence);
                let cm = cell_averaged_kernel(c, &spacing, p, KernelComponent::Contraction);
                out[..nsym].copy_from_slice(&am);
                out[nsym..nsym + d].copy_from_slice(&bm);
                out[nsym + d] = cm[0];
                out
            })
            .collect();
        let mut table = vec![0.0; ncomp * len];
        for (flat, e) in entries.iter().enumerate() {
            for (c, v) in e.iter().enumerate() {
                table[c * len + flat] = *v;
            }
        }
        let fft = FftNd::new(np, d);
        let spectra = (0..ncomp / 2)
            .map(|pair| {
                let re = &table[2 * pair * len..(2 * pair + 1) * len];
                let im = &table[(2 * pair + 1) * len..(2 * pair + 2) * len];
                let mut buf: Vec<Complex64> =
                    re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect();
                fft.forward(&mut buf);
                buf
            })
            .collect();
        Self {
            d,
            n,
            ncomp,
            table,
            spectra,
            fft,
        }
    }

    /// Shared tables for a grid and kernel, built on first use.
    pub fn cached(grid: &Grid, p: &KernelParams) -> Arc<KernelTables> {
        type Key = (usize, usize, u64, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<KernelTables>>>> = OnceLock::new();
        let key = (grid.d_v, grid.n_v, grid.dv().to_bits(), p.gamma().to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap().get(&key) {
            return t.clone();
        }
        let t = Arc::new(KernelTables::new(grid.d_v, grid.n_v, grid.dv(), p));
        cache.lock().unwrap().entry(key).or_insert(t).clone()
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    fn padded_index(&self, idx: &[usize]) -> usize {
        let np = 2 * self.n;
        idx.iter().fold(0, |acc, &i| acc * np + i)
    }

    /// All `ncomp` convolutions of one velocity slice, laid out `[iv][comp]`
    /// and not yet scaled by `Δv^d`.
    fn convolve_fft(&self, f: &[f64], out: &mut [f64]) {
        let d = self.d;
        let n = self.n;
        let nv = f.len();
        let mut padded = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        let mut idx = [0usize; 3];
        let mut pos = Vec::with_capacity(nv);
        for (iv, &val) in f.iter().enumerate() {
            Grid::unflatten(iv, n, d, &mut idx);
            let p = self.padded_index(&idx[..d]);
            pos.push(p);
            padded[p] = Complex64::new(val, 0.0);
        }
        self.fft.forward(&mut padded);
        let mut work = vec![Complex64::new(0.0, 0.0); padded.len()];
        for (pair, spec) in self.spectra.iter().enumerate() {
            for ((w, a), b) in work.iter_mut().zip(&padded).zip(spec) {
                *w = a * b;
            }
            self.fft.inverse(&mut work);
            for (iv, &p) in pos.iter().enumerate() {
                out[iv * self.ncomp + 2 * pair] = work[p].re;
                out[iv * self.ncomp + 2 * pair + 1] = work[p].im;
            }
        }
    }

    fn convolve_direct(&self, f: &[f64], out: &mut [f64]) {
        let d = self.d;
        let n = self.n;
        let np = 2 * n;
        let len = self.fft.len();
        let nv = f.len();
        let mut ii = [0usize; 3];
        let mut jj = [0usize; 3];
        let mut off = [0usize; 3];
        for i in 0..nv {
            Grid::unflatten(i, n, d, &mut ii);
            let acc = &mut out[i * self.ncomp..(i + 1) * self.ncomp];
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (j, &fj) in f.iter().enumerate() {
                if fj == 0.0 {
                    continue;
                }
                Grid::unflatten(j, n, d, &mut jj);
                for a in 0..d {
                    off[a] = (ii[a] + np - jj[a]) % np;
                }
                let p = self.padded_index(&off[..d]);
                for (c, slot) in acc.iter_mut().enumerate() {
                    *slot += self.table[c * len + p] * fj;
                }
            }
        }
    }
}

/// `ā`, `b̄`, `c̄` over the whole grid, indexed by the global cell index
/// `ix·n_vcells + iv`.
#[derive(Clone, Debug)]
pub struct CoefficientFields {
    pub time: f64,
    pub grid: Grid,
    /// Packed symmetric entries, `sym_len(d_v)` per cell.
    pub a_bar: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub c_bar: Vec<f64>,
}

impl CoefficientFields {
    pub fn nsym(&self) -> usize {
        sym_len(self.grid.d_v)
    }

    pub fn a_cell(&self, cell: usize) -> &[f64] {
        let s = self.nsym();
        &self.a_bar[cell * s..(cell + 1) * s]
    }

    pub fn b_cell(&self, cell: usize) -> &[f64] {
        let d = self.grid.d_v;
        &self.b_bar[cell * d..(cell + 1) * d]
    }

    pub fn zeros(grid: &Grid, time: f64) -> Self {
        let cells = grid.len();
        Self {
            time,
            grid: grid.clone(),
            a_bar: vec![0.0; cells * sym_len(grid.d_v)],
            b_bar: vec![0.0; cells * grid.d_v],
            c_bar: vec![0.0; cells],
        }
    }

    /// Largest entry magnitude of `ā` and of `c̄`.
    pub fn max_entries(&self) -> (f64, f64) {
        let a = self.a_bar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let c = self.c_bar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (a, c)
    }
}

/// Reject fields with values below `−1e−14·max`.
pub fn check_nonnegative(f: &DistributionField) -> Result<()> {
    let max = f.max_abs();
    let min = f.min_value();
    if min < -1e-14 * max {
        return Err(Error::NegativeInput { value: min, max });
    }
    Ok(())
}

pub fn compute_coefficients(
    f: &DistributionField,
    p: &KernelParams,
    method: ConvolutionMethod,
) -> Result<CoefficientFields> {
    let tables = KernelTables::cached(&f.grid, p);
    compute_with_tables(f, &tables, method)
}

pub fn compute_with_tables(
    f: &DistributionField,
    tables: &KernelTables,
    method: ConvolutionMethod,
) -> Result<CoefficientFields> {
    let g = &f.grid;
    if tables.d != g.d_v || tables.n != g.n_v {
        return Err(Error::GridMismatch("kernel tables built for another grid".into()));
    }
    check_nonnegative(f)?;
    let d = g.d_v;
    let nsym = sym_len(d);
    let nv = g.v_cells();
    let ncomp = tables.ncomp;
    let vol = g.v_volume();
    let mut out = CoefficientFields::zeros(g, f.time);
    out.a_bar
        .par_chunks_mut(nv * nsym)
        .zip(out.b_bar.par_chunks_mut(nv * d))
        .zip(out.c_bar.par_chunks_mut(nv))
        .enumerate()
        .for_each(|(ix, ((a, b), c))| {
            let slice = f.slice(ix);
            if slice.iter().all(|&x| x == 0.0) {
                return;
            }
            let mut buf = vec![0.0; nv * ncomp];
            match method {
                ConvolutionMethod::Fft => tables.convolve_fft(slice, &mut buf),
                ConvolutionMethod::Direct => tables.convolve_direct(slice, &mut buf),
            }
            for iv in 0..nv {
                let row = &buf[iv * ncomp..(iv + 1) * ncomp];
                for s in 0..nsym {
                    a[iv * nsym + s] = row[s] * vol;
                }
                for i in 0..d {
                    b[iv * d + i] = row[nsym + i] * vol;
                }
                c[iv] = row[nsym + d] * vol;
            }
        });
    Ok(out)
}

/// Suprema used as decay series for the coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoefficientNorms {
    /// `sup ⟨v⟩^{−(2+γ)} |ā|`.
    pub plain: f64,
    /// `sup ⟨x−tv⟩^{−min(1,2+γ)} ⟨v⟩^{−max(0,1+γ)} |ā|`.
    pub weighted_down: f64,
    /// `sup |c̄|`.
    pub c_sup: f64,
}

pub fn coefficient_sup_norms(c: &CoefficientFields, gamma: f64) -> CoefficientNorms {
    let g = &c.grid;
    let nsym = c.nsym();
    let nv = g.v_cells();
    let vt = g.v_table();
    let xt = g.x_table();
    let t = c.time;
    let p_plain = -0.5 * (2.0 + gamma);
    let p_x = -0.5 * (2.0 + gamma).min(1.0);
    let p_v = -0.5 * (1.0 + gamma).max(0.0);
    let per_x: Vec<(f64, f64, f64)> = (0..g.x_cells())
        .into_par_iter()
        .map(|ix| {
            let x = &xt[ix * g.d_x..(ix + 1) * g.d_x];
            let mut acc = (0.0f64, 0.0f64, 0.0f64);
            for iv in 0..nv {
                let cell = ix * nv + iv;
                let amax = c.a_bar[cell * nsym..(cell + 1) * nsym]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                let v = &vt[iv * g.d_v..(iv + 1) * g.d_v];
                let v2 = 1.0 + v.iter().map(|a| a * a).sum::<f64>();
                let mut u2 = 1.0;
                for (a, xa) in x.iter().enumerate() {
                    let u = wrap_periodic(xa - t * v[a], g.l_x);
                    u2 += u * u;
                }
                acc.0 = acc.0.max(v2.powf(p_plain) * amax);
                acc.1 = acc.1.max(u2.powf(p_x) * v2.powf(p_v) * amax);
                acc.2 = acc.2.max(c.c_bar[cell].abs());
            }
            acc
        })
        .collect();
    let mut out = CoefficientNorms::default();
    for (a, b, cc) in per_x {
        out.plain = out.plain.max(a);
        out.weighted_down = out.weighted_down.max(b);
        out.c_sup = out.c_sup.max(cc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{sym_index, KernelMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn homog(d: usize, n: usize, vmax: f64) -> Grid {
        Grid::new(0, d, 1, n, 1.0, vmax).unwrap()
    }

    #[test]
    fn fft_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, n) in [(2usize, 12usize), (3, 6)] {
            let g = Grid::new(1, d, 2, n, 4.0, 2.0).unwrap();
            let vals: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>()).collect();
            let f = DistributionField::from_values(&g, 0.0, vals).unwrap();
            let p = KernelParams::new(-1.3, d).unwrap();
            let a = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
            let b = compute_coefficients(&f, &p, ConvolutionMethod::Direct).unwrap();
            for (x, y) in [(&a.a_bar, &b.a_bar), (&a.b_bar, &b.b_bar), (&a.c_bar, &b.c_bar)] {
                let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (u, w) in x.iter().zip(y.iter()) {
                    assert!((u - w).abs() <= 1e-10 * scale, "{u} vs {w}");
                }
            }
        }
    }

    #[test]
    fn zero_field_gives_zero() {
        let g = homog(2, 8, 2.0);
        let f = DistributionField::zeros(&g, 0.0);
        let p = KernelParams::new(-1.0, 2).unwrap();
        let c = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
        let n = coefficient_sup_norms(&c, -1.0);
        assert_eq!(n, CoefficientNorms::default());
    }

    #[test]
    fn negative_input_rejected() {
        let g = homog(2, 4, 2.0);
        let mut f = DistributionField::from_fn(&g, 0.0, |_, _| 1.0);
        f.values[3] = -0.1;
        let p = KernelParams::new(-1.0, 2).unwrap();
        assert!(matches!(
            compute_coefficients(&f, &p, ConvolutionMethod::Fft),
            Err(Error::NegativeInput { .. })
        ));
    }

    #[test]
    fn point_mass_reproduces_kernel() {
        let g = homog(2, 10, 2.0);
        let mut f = DistributionField::zeros(&g, 0.0);
        let j0 = 3 * 10 + 6;
        f.values[j0] = 2.5;
        let p = KernelParams::new(-1.0, 2).unwrap();
        let c = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
        let vt = g.v_table();
        let m = 2.5 * g.v_volume();
        let amax = c.max_entries().0;
        for iv in 0..g.v_cells() {
            if iv == j0 {
                continue;
            }
            let z = [vt[2 * iv] - vt[2 * j0], vt[2 * iv + 1] - vt[2 * j0 + 1]];
            let avg = cell_averaged_kernel(&z, &[g.dv(); 2], &p, KernelComponent::Matrix);
            for s in 0..3 {
                assert!((c.a_cell(iv)[s] - m * avg[s]).abs() < 1e-13 * amax, "{} vs {}", c.a_cell(iv)[s], m * avg[s]);
            }
        }
    }

    #[test]
    fn radial_field_gives_isotropic_a_at_origin() {
        // even n puts v = 0 on a vertex; average the four central cells
        let g = homog(2, 16, 4.0);
        let f = DistributionField::from_fn(&g, 0.0, |_, v| (-(v[0] * v[0] + v[1] * v[1])).exp());
        let p = KernelParams::new(-1.0, 2).unwrap();
        let c = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
        let mut m = [0.0; 3];
        for (i, j) in [(7, 7), (7, 8), (8, 7), (8, 8)] {
            let a = c.a_cell(i * 16 + j);
            for s in 0..3 {
                m[s] += a[s];
            }
        }
        let trace = m[0] + m[2];
        assert!(m[1].abs() <= 1e-10 * trace);
        assert!((m[0] - m[2]).abs() <= 1e-10 * trace);
    }

    #[test]
    fn c_bar_near_origin_converges_to_radial_quadrature() {
        // compare at the cell centre nearest v = 0 with -4 ∫|v-v*|^{-1} e^{-|v*|²} dv*
        let p = KernelParams::new(-1.0, 3).unwrap();
        let mut errs = Vec::new();
        for n in [12usize, 24, 48] {
            let g = homog(3, n, 3.0);
            let f = DistributionField::from_fn(&g, 0.0, |_, v| {
                (-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).exp()
            });
            let c = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
            let r0 = 3f64.sqrt() * g.dv() / 2.0;
            let target = -4.0
                * crate::oracles::radial_riesz(|r| (-r * r).exp(), 1.0, r0, f64::INFINITY, 7).unwrap();
            let iv = (n / 2) * n * n + (n / 2) * n + n / 2;
            errs.push((c.c_bar[iv] - target).abs() / target.abs());
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order >= 1.8, "{errs:?}");
        assert!(errs[2] < errs[1] && errs[1] < errs[0]);
    }

    #[test]
    fn psd_and_sign_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = homog(2, 12, 3.0);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>()).collect();
        let f = DistributionField::from_values(&g, 0.0, vals).unwrap();
        for gamma in [-1.8, -1.0, -0.2] {
            let p = KernelParams::new(gamma, 2).unwrap();
            let c = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
            for cell in 0..g.len() {
                let m = KernelMatrix::from_packed(2, c.a_cell(cell));
                let tr = m.trace();
                let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
                let disc = ((m.get(0, 0) - m.get(1, 1)).powi(2) / 4.0 + m.get(0, 1).powi(2)).sqrt();
                let lmin = tr / 2.0 - disc;
                assert!(lmin >= -1e-12 * tr, "lmin {lmin} det {det}");
                assert!(c.c_bar[cell] <= 0.0);
            }
        }
    }

    #[test]
    fn pointwise_bound_on_a() {
        let g = homog(3, 8, 2.0);
        let f = DistributionField::from_fn(&g, 0.0, |_, v| (-(v[0] * v[0] + 2.0 * v[1] * v[1] + v[2] * v[2])).exp());
        let p = KernelParams::new(-0.5, 3).unwrap();
        let c = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
        let vt = g.v_table();
        let vol = g.v_volume();
        for i in (0..g.v_cells()).step_by(7) {
            let mut bound = 0.0;
            for j in 0..g.v_cells() {
                let z2: f64 = (0..3).map(|a| (vt[3 * i + a] - vt[3 * j + a]).powi(2)).sum();
                bound += z2.powf(0.75) * f.values[j] * vol;
            }
            let a = c.a_cell(i);
            for s in 0..6 {
                // origin-cell averages differ from the midpoint bound by O(h^{2+γ})
                assert!(a[s].abs() <= bound * 1.05, "{} > {bound}", a[s]);
            }
            let _ = sym_index(3, 0, 0);
        }
    }

    #[test]
    fn divergence_consistency() {
        // b̄ ≈ row divergence of ā and c̄ ≈ divergence of b̄, second order in Δv
        let p = KernelParams::new(-0.5, 2).unwrap();
        let mut errs_b = Vec::new();
        let mut errs_c = Vec::new();
        for n in [16usize, 32] {
            let g = homog(2, n, 4.0);
            let f = DistributionField::from_fn(&g, 0.0, |_, v| {
                (-(v[0] - 0.3).powi(2) - 0.7 * v[1] * v[1]).exp()
            });
            let c = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
            let h = g.dv();
            let mut eb: f64 = 0.0;
            let mut ec: f64 = 0.0;
            let mut sb: f64 = 0.0;
            let mut sc: f64 = 0.0;
            let at = |i: usize, j: usize| i * n + j;
            // probe a fixed physical point inside the bulk
            let i0 = n / 2 + n / 8;
            let j0 = n / 2 - n / 8;
            for (i, j) in [(i0, j0)] {
                for comp in 0..2 {
                    let mut div = 0.0;
                    for k in 0..2 {
                        let s = sym_index(2, comp, k);
                        let (ip, im) = if k == 0 { (at(i + 1, j), at(i - 1, j)) } else { (at(i, j + 1), at(i, j - 1)) };
                        div += (c.a_cell(ip)[s] - c.a_cell(im)[s]) / (2.0 * h);
                    }
                    let bb = c.b_cell(at(i, j))[comp];
                    eb = eb.max((div - bb).abs());
                    sb = sb.max(bb.abs());
                }
                let mut div = 0.0;
                for k in 0..2 {
                    let (ip, im) = if k == 0 { (at(i + 1, j), at(i - 1, j)) } else { (at(i, j + 1), at(i, j - 1)) };
                    div += (c.b_cell(ip)[k] - c.b_cell(im)[k]) / (2.0 * h);
                }
                ec = ec.max((div - c.c_bar[at(i, j)]).abs());
                sc = sc.max(c.c_bar[at(i, j)].abs());
            }
            errs_b.push(eb / sb);
            errs_c.push(ec / sc);
        }
        assert!(errs_b[1] < 0.05 && errs_b[1] < errs_b[0], "{errs_b:?}");
        assert!(errs_c[1] < 0.1 && errs_c[1] < errs_c[0], "{errs_c:?}");
    }

    #[test]
    fn linear_scaling_of_norms() {
        let g = Grid::new(1, 2, 8, 8, 10.0, 3.0).unwrap();
        let f = DistributionField::from_fn(&g, 1.0, |x, v| (-(x[0] * x[0]) - v[0] * v[0] - v[1] * v[1]).exp());
        let p = KernelParams::new(-1.0, 2).unwrap();
        let a = coefficient_sup_norms(&compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap(), -1.0);
        let b = coefficient_sup_norms(
            &compute_coefficients(&f.scaled(3.0), &p, ConvolutionMethod::Fft).unwrap(),
            -1.0,
        );
        assert!((b.plain - 3.0 * a.plain).abs() <= 1e-14 * b.plain);
        assert!((b.weighted_down - 3.0 * a.weighted_down).abs() <= 1e-14 * b.weighted_down);
        assert!((b.c_sup - 3.0 * a.c_sup).abs() <= 1e-14 * b.c_sup);
    }
}
