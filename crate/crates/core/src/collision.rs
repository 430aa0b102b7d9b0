//! Discrete Landau operator per spatial cell in divergence form
//! `∇·(ā∇f − b̄f)` and nonconservative form `ā:D²f − c̄f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientFields;
use crate::kernel::{sym_index, sym_len};
use crate::phase::{DistributionField, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollisionForm {
    Divergence,
    Nonconservative,
}

#[derive(Clone, Debug)]
pub struct CollisionOutput {
    pub q_values: Vec<f64>,
    pub form: CollisionForm,
}

/// Velocity-block geometry shared by the stencils.
struct Block {
    d: usize,
    n: usize,
    strides: [usize; 3],
    h: f64,
}

impl Block {
    fn new(grid: &Grid) -> Self {
        let d = grid.d_v;
        let n = grid.n_v;
        let mut strides = [0usize; 3];
        for (a, s) in strides.iter_mut().enumerate().take(d) {
            *s = n.pow((d - 1 - a) as u32);
        }
        Self {
            d,
            n,
            strides,
            h: grid.dv(),
        }
    }

    fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Centred first differences with zero ghost values, `[axis][cell]`.
    fn centred(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let mut idx = [0usize; 3];
        (0..self.d)
            .map(|a| {
                let s = self.strides[a];
                (0..self.len())
                    .map(|c| {
                        Grid::unflatten(c, self.n, self.d, &mut idx);
                        let up = if idx[a] + 1 < self.n { f[c + s] } else { 0.0 };
                        let dn = if idx[a] > 0 { f[c - s] } else { 0.0 };
                        (up - dn) / (2.0 * self.h)
                    })
                    .collect()
            })
            .collect()
    }
}

/// `∇·(ā∇f − b̄f)` on one velocity block with zero flux through the box edge.
///
/// `a` holds `sym_len(d)` packed entries per cell, `b` holds `d` per cell.
pub fn apply_collision_divergence(f: &[f64], a: &[f64], b: &[f64], grid: &Grid) -> Vec<f64> {
    let blk = Block::new(grid);
    let d = blk.d;
    let nsym = sym_len(d);
    let h = blk.h;
    let mut q = vec![0.0; f.len()];
    if f.iter().all(|&x| x == 0.0) {
        return q;
    }
    let grads = blk.centred(f);
    let mut idx = [0usize; 3];
    for c in 0..f.len() {
        Grid::unflatten(c, blk.n, d, &mut idx);
        for k in 0..d {
            if idx[k] + 1 >= blk.n {
                continue;
            }
            let e = c + blk.strides[k];
            let mut flux = 0.0;
            for j in 0..d {
                let s = sym_index(d, k, j);
                let a_face = 0.5 * (a[c * nsym + s] + a[e * nsym + s]);
                let df = if j == k {
                    (f[e] - f[c]) / h
                } else {
                    0.5 * (grads[j][c] + grads[j][e])
                };
                flux += a_face * df;
            }
            let b_face = 0.5 * (b[c * d + k] + b[e * d + k]);
            flux -= b_face * 0.5 * (f[c] + f[e]);
            let flux = flux / h;
            q[c] += flux;
            q[e] -= flux;
        }
    }
    q
}

/// `ā_ij D²_ij f − c̄ f` with centred second differences and zero ghosts.
pub fn apply_collision_nonconservative(f: &[f64], a: &[f64], c_bar: &[f64], grid: &Grid) -> Vec<f64> {
    let blk = Block::new(grid);
    let d = blk.d;
    let nsym = sym_len(d);
    let h2 = blk.h * blk.h;
    let mut q = vec![0.0; f.len()];
    let mut idx = [0usize; 3];
    let at = |c: usize, idx: &[usize], shifts: &[(usize, i64)]| -> f64 {
        let mut cell = c as i64;
        for &(ax, s) in shifts {
            let i = idx[ax] as i64 + s;
            if i < 0 || i >= blk.n as i64 {
                return 0.0;
            }
            cell += s * blk.strides[ax] as i64;
        }
        f[cell as usize]
    };
    for cell in 0..f.len() {
        Grid::unflatten(cell, blk.n, d, &mut idx);
        let mut acc = 0.0;
        for i in 0..d {
            for j in i..d {
                let aij = a[cell * nsym + sym_index(d, i, j)];
                if aij == 0.0 {
                    continue;
                }
                let second = if i == j {
                    (at(cell, &idx, &[(i, 1)]) - 2.0 * f[cell] + at(cell, &idx, &[(i, -1)])) / h2
                } else {
                    (at(cell, &idx, &[(i, 1), (j, 1)]) - at(cell, &idx, &[(i, 1), (j, -1)])
                        - at(cell, &idx, &[(i, -1), (j, 1)])
                        + at(cell, &idx, &[(i, -1), (j, -1)]))
                        / (4.0 * h2)
                };
                let mult = if i == j { 1.0 } else { 2.0 };
                acc += mult * aij * second;
            }
        }
        q[cell] = acc - c_bar[cell] * f[cell];
    }
    q
}

/// Collision operator over every spatial cell.
pub fn collision_operator(f: &DistributionField, coeffs: &CoefficientFields, form: CollisionForm) -> CollisionOutput {
    let g = &f.grid;
    let nv = g.v_cells();
    let d = g.d_v;
    let nsym = sym_len(d);
    let mut q = vec![0.0; f.values.len()];
    q.par_chunks_mut(nv).enumerate().for_each(|(ix, out)| {
        let fs = f.slice(ix);
        let a = &coeffs.a_bar[ix * nv * nsym..(ix + 1) * nv * nsym];
        let r = match form {
            CollisionForm::Divergence => {
                let b = &coeffs.b_bar[ix * nv * d..(ix + 1) * nv * d];
                apply_collision_divergence(fs, a, b, g)
            }
            CollisionForm::Nonconservative => {
                let c = &coeffs.c_bar[ix * nv..(ix + 1) * nv];
                apply_collision_nonconservative(fs, a, c, g)
            }
        };
        out.copy_from_slice(&r);
    });
    CollisionOutput { q_values: q, form }
}

/// Mass, momentum and energy of a velocity block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub energy: f64,
}

pub fn conserved_moments(field: &[f64], grid: &Grid) -> Moments {
    let d = grid.d_v;
    let vol = grid.v_volume();
    let vt = grid.v_table();
    let mut mass = 0.0;
    let mut momentum = vec![0.0; d];
    let mut energy = 0.0;
    for (iv, &f) in field.iter().enumerate() {
        let v = &vt[iv * d..(iv + 1) * d];
        mass += f;
        let mut v2 = 0.0;
        for a in 0..d {
            momentum[a] += v[a] * f;
            v2 += v[a] * v[a];
        }
        energy += 0.5 * v2 * f;
    }
    Moments {
        mass: mass * vol,
        momentum: momentum.into_iter().map(|m| m * vol).collect(),
        energy: energy * vol,
    }
}

/// `Σ f log f Δx^{d_x} Δv^{d_v}` with `0 log 0 = 0`.
pub fn h_functional(f: &DistributionField) -> f64 {
    let s: f64 = f
        .values
        .iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum();
    s * f.grid.x_volume() * f.grid.v_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{compute_coefficients, ConvolutionMethod};
    use crate::kernel::KernelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn homog(n: usize, vmax: f64) -> Grid {
        Grid::new(0, 2, 1, n, 1.0, vmax).unwrap()
    }

    fn q_of(f: &DistributionField, gamma: f64, form: CollisionForm) -> Vec<f64> {
        let p = KernelParams::new(gamma, f.grid.d_v).unwrap();
        let c = compute_coefficients(f, &p, ConvolutionMethod::Fft).unwrap();
        collision_operator(f, &c, form).q_values
    }

    #[test]
    fn zero_field() {
        let g = homog(8, 3.0);
        let f = DistributionField::zeros(&g, 0.0);
        assert!(q_of(&f, -1.0, CollisionForm::Divergence).iter().all(|&q| q == 0.0));
        assert!(q_of(&f, -1.0, CollisionForm::Nonconservative).iter().all(|&q| q == 0.0));
    }

    #[test]
    fn random_field_mass_is_conserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = homog(16, 3.0);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>()).collect();
        let f = DistributionField::from_values(&g, 0.0, vals).unwrap();
        let q = q_of(&f, -1.0, CollisionForm::Divergence);
        let m = conserved_moments(&q, &g).mass;
        assert!(m.abs() <= 1e-13, "{m}");
    }

    #[test]
    fn moments_examples() {
        let g = Grid::new(0, 2, 1, 10, 1.0, 1.0).unwrap();
        let ones = vec![1.0; g.v_cells()];
        assert!((conserved_moments(&ones, &g).mass - 4.0).abs() < 1e-14);
        let g = homog(64, 6.0);
        let f = DistributionField::from_fn(&g, 0.0, |_, v| (-(v[0] * v[0] + v[1] * v[1])).exp());
        let m = conserved_moments(&f.values, &g);
        assert!((m.mass - std::f64::consts::PI).abs() < 1e-10);
        let odd = DistributionField::from_fn(&g, 0.0, |_, v| v[0] * (-(v[0] * v[0] + v[1] * v[1])).exp());
        let m = conserved_moments(&odd.values, &g);
        assert!(m.momentum[1].abs() < 1e-13);
        let even = DistributionField::from_fn(&g, 0.0, |_, v| (-(v[0] * v[0] + 3.0 * v[1] * v[1])).exp());
        let m = conserved_moments(&even.values, &g);
        assert!(m.momentum[0].abs() < 1e-13);
    }

    #[test]
    fn h_examples() {
        let g = Grid::new(0, 2, 1, 4, 1.0, 0.5).unwrap();
        assert_eq!(h_functional(&DistributionField::zeros(&g, 0.0)), 0.0);
        let e = std::f64::consts::E;
        let f = DistributionField::from_fn(&g, 0.0, |_, _| e);
        assert!((h_functional(&f) - e).abs() < 1e-14);
    }

    #[test]
    fn forms_agree_under_refinement() {
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = homog(n, 5.0);
            let f = DistributionField::from_fn(&g, 0.0, |_, v| {
                (-(v[0] - 0.5).powi(2) / 0.8 - v[1] * v[1] / 1.5).exp()
            });
            let a = q_of(&f, -1.0, CollisionForm::Divergence);
            let b = q_of(&f, -1.0, CollisionForm::Nonconservative);
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let e = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            errs.push(e / scale);
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order >= 0.9, "{errs:?}");
    }

    #[test]
    fn sign_of_reaction_term() {
        let g = homog(12, 3.0);
        let f = DistributionField::from_fn(&g, 0.0, |_, v| (-(v[0] * v[0] + v[1] * v[1])).exp());
        let p = KernelParams::new(-1.5, 2).unwrap();
        let c = compute_coefficients(&f, &p, ConvolutionMethod::Fft).unwrap();
        for (cb, fv) in c.c_bar.iter().zip(&f.values) {
            assert!(-cb * fv >= 0.0);
        }
    }
}
