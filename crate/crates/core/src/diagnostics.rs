//! Hierarchy constants, weighted norms, macroscopic densities, decay fits
//! and the per-output diagnostic record.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{coefficient_sup_norms, compute_with_tables, CoefficientFields, ConvolutionMethod, KernelTables};
use crate::collision::{apply_collision_nonconservative, conserved_moments, h_functional};
use crate::error::{Error, Result};
use crate::kernel::{sym_len, KernelParams};
use crate::phase::{delta_from_gamma, to_g, wrap_periodic, DistributionField, Grid, WeightSpec};
use crate::transport::pullback_sharp;

/// Hard cap on derivative order in the norms.
pub const MAX_DIAG_ORDER: usize = 2;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > -2.0 && gamma < 0.0 {
        Ok(())
    } else {
        Err(Error::GammaOutOfRange(gamma))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyParams {
    pub gamma: f64,
    pub delta: f64,
    pub m_max: usize,
    pub m_int: usize,
    /// `ζ_k` for `k = 0..=M_max−4`.
    pub zeta: Vec<f64>,
    pub theta: Vec<f64>,
    /// `None` stands for `∞`.
    pub p_star: Option<f64>,
    pub p_star_star: Option<f64>,
}

pub fn hierarchy_params(gamma: f64) -> Result<HierarchyParams> {
    check_gamma(gamma)?;
    let low = gamma <= -1.0;
    let gap = if low {
        (2.0 / (2.0 + gamma) + 4.0).ceil() as usize
    } else {
        (1.0 / gamma.abs() + 4.0).ceil() as usize
    };
    let m_max = 2 + 2 * gap;
    let m_int = m_max - gap;
    let top = m_max - 4;
    let mut zeta = vec![0.0; top + 1];
    let mut theta = vec![0.0; top + 1];
    for k in (m_int + 1)..=top {
        let (z, th) = if k == top {
            (1.5, 1.0)
        } else if low {
            (1.5 - 0.75 * (2.0 + gamma) * (top - k) as f64, 0.0)
        } else if k == m_max - 5 {
            (0.75, 1.0 + gamma)
        } else {
            (0.0, 1.0 + (top - k) as f64 * gamma)
        };
        zeta[k] = z;
        theta[k] = th;
    }
    let p_star = if gamma >= -1.0 { None } else { Some(-15.0 / (4.0 * (gamma + 1.0))) };
    let p_star_star = if gamma >= -1.5 { Some(-15.0 / (4.0 * gamma)) } else { Some(2.0) };
    Ok(HierarchyParams {
        gamma,
        delta: delta_from_gamma(gamma),
        m_max,
        m_int,
        zeta,
        theta,
        p_star,
        p_star_star,
    })
}

/// Orders of `∂_x^α ∂_v^β Y^σ`; `α` has `d_x` entries, `β` and `σ` have `d_v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub alpha: Vec<u8>,
    pub beta: Vec<u8>,
    pub sigma: Vec<u8>,
}

impl MultiIndex {
    pub fn zero(d_x: usize, d_v: usize) -> Self {
        Self {
            alpha: vec![0; d_x],
            beta: vec![0; d_v],
            sigma: vec![0; d_v],
        }
    }

    pub fn order(&self) -> usize {
        self.alpha_order() + self.beta_order() + self.sigma_order()
    }

    pub fn alpha_order(&self) -> usize {
        self.alpha.iter().map(|&a| a as usize).sum()
    }

    pub fn beta_order(&self) -> usize {
        self.beta.iter().map(|&a| a as usize).sum()
    }

    pub fn sigma_order(&self) -> usize {
        self.sigma.iter().map(|&a| a as usize).sum()
    }

    /// Every multi-index of total order `k`.
    pub fn all_of_order(d_x: usize, d_v: usize, k: usize) -> Vec<Self> {
        let slots = d_x + 2 * d_v;
        let mut out = Vec::new();
        let mut counts = vec![0u8; slots];
        fn rec(pos: usize, left: usize, counts: &mut [u8], out: &mut Vec<Vec<u8>>) {
            if pos + 1 == counts.len() {
                counts[pos] = left as u8;
                out.push(counts.to_vec());
                return;
            }
            for c in (0..=left).rev() {
                counts[pos] = c as u8;
                rec(pos + 1, left - c, counts, out);
            }
        }
        let mut raw = Vec::new();
        if slots == 0 {
            return out;
        }
        rec(0, k, &mut counts, &mut raw);
        for c in raw {
            out.push(Self {
                alpha: c[..d_x].to_vec(),
                beta: c[d_x..d_x + d_v].to_vec(),
                sigma: c[d_x + d_v..].to_vec(),
            });
        }
        out
    }
}

/// Centred difference in `x_axis` (periodic).
pub fn diff_x(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let nv = grid.v_cells();
    let n = grid.n_x;
    let stride = n.pow((grid.d_x - 1 - axis) as u32);
    let h2 = 2.0 * grid.dx();
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(nv).enumerate().for_each(|(ix, o)| {
        let i = (ix / stride) % n;
        let up = ix - i * stride + ((i + 1) % n) * stride;
        let dn = ix - i * stride + ((i + n - 1) % n) * stride;
        let a = &values[up * nv..(up + 1) * nv];
        let b = &values[dn * nv..(dn + 1) * nv];
        for ((o, x), y) in o.iter_mut().zip(a).zip(b) {
            *o = (x - y) / h2;
        }
    });
    out
}

/// Centred difference in `v_axis` with zero ghost values.
pub fn diff_v(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let nv = grid.v_cells();
    let n = grid.n_v;
    let stride = n.pow((grid.d_v - 1 - axis) as u32);
    let h2 = 2.0 * grid.dv();
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(nv)
        .zip(values.par_chunks(nv))
        .for_each(|(o, f)| {
            for iv in 0..nv {
                let i = (iv / stride) % n;
                let up = if i + 1 < n { f[iv + stride] } else { 0.0 };
                let dn = if i > 0 { f[iv - stride] } else { 0.0 };
                o[iv] = (up - dn) / h2;
            }
        });
    out
}

/// `∂_x^α ∂_v^β Y^σ` applied to sampled values at time `t`, where
/// `Y_i = t D_{x_i} + D_{v_i}` for `i < d_x` and `Y_i = D_{v_i}` otherwise.
pub fn apply_derivatives(values: &[f64], grid: &Grid, t: f64, mi: &MultiIndex) -> Vec<f64> {
    let mut cur = values.to_vec();
    for (a, &k) in mi.alpha.iter().enumerate() {
        for _ in 0..k {
            cur = diff_x(&cur, grid, a);
        }
    }
    for (a, &k) in mi.beta.iter().enumerate() {
        for _ in 0..k {
            cur = diff_v(&cur, grid, a);
        }
    }
    for (a, &k) in mi.sigma.iter().enumerate() {
        for _ in 0..k {
            let dv = diff_v(&cur, grid, a);
            cur = if a < grid.d_x && t != 0.0 {
                let dx = diff_x(&cur, grid, a);
                dx.iter().zip(&dv).map(|(x, v)| t * x + v).collect()
            } else {
                dv
            };
        }
    }
    cur
}

fn check_order(mi: &MultiIndex, limit: usize) -> Result<()> {
    let limit = limit.min(MAX_DIAG_ORDER);
    if mi.order() > limit {
        return Err(Error::OrderTooHigh {
            order: mi.order(),
            limit,
        });
    }
    Ok(())
}

/// `⟨v⟩^{pv} ⟨x−tv⟩^{px}` over the grid.
fn weight_table(grid: &Grid, t: f64, pv: f64, px: f64) -> Vec<f64> {
    let nv = grid.v_cells();
    let vt = grid.v_table();
    let xt = grid.x_table();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(nv).enumerate().for_each(|(ix, o)| {
        let x = &xt[ix * grid.d_x..(ix + 1) * grid.d_x];
        for (iv, w) in o.iter_mut().enumerate() {
            let v = &vt[iv * grid.d_v..(iv + 1) * grid.d_v];
            let v2 = 1.0 + v.iter().map(|a| a * a).sum::<f64>();
            let mut u2 = 1.0;
            for (a, xa) in x.iter().enumerate() {
                let u = wrap_periodic(xa - t * v[a], grid.l_x);
                u2 += u * u;
            }
            *w = v2.powf(0.5 * pv) * u2.powf(0.5 * px);
        }
    });
    out
}

/// `sup (1+t)^{−ζ−|β|} ⟨v⟩^{1−θ} ⟨x−tv⟩^{M_max+5−|σ|} |∂^α∂^βY^σ g|`.
pub fn z_norm(
    g: &DistributionField,
    mi: &MultiIndex,
    hp: &HierarchyParams,
    zeta: f64,
    theta: f64,
    k_diag: usize,
) -> Result<f64> {
    check_order(mi, k_diag)?;
    let t = g.time;
    let d = apply_derivatives(&g.values, &g.grid, t, mi);
    let px = (hp.m_max + 5) as f64 - mi.sigma_order() as f64;
    let w = weight_table(&g.grid, t, 1.0 - theta, px);
    let pre = (1.0 + t).powf(-zeta - mi.beta_order() as f64);
    let sup = d
        .par_iter()
        .zip(w.par_iter())
        .map(|(a, b)| (a * b).abs())
        .reduce(|| 0.0, f64::max);
    Ok(pre * sup)
}

/// Fixed-time energy piece `(1+t)^{−|β|} ‖⟨x−tv⟩^{M_max+5−|σ|} ∂g‖_{L²}` and
/// the integrand `‖⟨v⟩ ⟨x−tv⟩^{M_max+5−|σ|} ∂g‖²_{L²}` of the time-integrated
/// piece, before the `(1+t)^{−1−δ}` time weight.
pub fn e_norm_pieces(g: &DistributionField, mi: &MultiIndex, hp: &HierarchyParams, k_diag: usize) -> Result<(f64, f64, f64)> {
    check_order(mi, k_diag)?;
    let t = g.time;
    let d = apply_derivatives(&g.values, &g.grid, t, mi);
    let px = (hp.m_max + 5) as f64 - mi.sigma_order() as f64;
    let w = weight_table(&g.grid, t, 0.0, px);
    let vt = g.grid.v_table();
    let nv = g.grid.v_cells();
    let dvol = g.grid.x_volume() * g.grid.v_volume();
    let (plain, with_v) = d
        .par_chunks(nv)
        .zip(w.par_chunks(nv))
        .map(|(dd, ww)| {
            let mut a = 0.0;
            let mut b = 0.0;
            for iv in 0..nv {
                let q = (dd[iv] * ww[iv]).powi(2);
                let v2: f64 = 1.0 + vt[iv * g.grid.d_v..(iv + 1) * g.grid.d_v].iter().map(|x| x * x).sum::<f64>();
                a += q;
                b += q * v2;
            }
            (a, b)
        })
        .collect::<Vec<_>>()
        .into_iter()
        // sequential sum keeps the result independent of the thread count
        .fold((0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let beta = mi.beta_order() as f64;
    Ok(((1.0 + t).powf(-beta) * (plain * dvol).sqrt(), plain * dvol, with_v * dvol))
}

/// `e_norm` result: the fixed-time piece and the running integrated piece.
pub fn e_norm(g: &DistributionField, mi: &MultiIndex, hp: &HierarchyParams, acc: &mut EnergyAccumulator, k_diag: usize) -> Result<(f64, f64)> {
    let (fixed, plain_sq, with_v_sq) = e_norm_pieces(g, mi, hp, k_diag)?;
    acc.push(g.time, plain_sq.sqrt(), with_v_sq * (1.0 + g.time).powf(-1.0 - hp.delta));
    let beta = mi.beta_order() as f64;
    Ok((fixed, (1.0 + g.time).powf(-beta) * acc.integral().sqrt()))
}

/// Running `L^∞_t` and trapezoid `L²_t` accumulators for one multi-index.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnergyAccumulator {
    last: Option<(f64, f64)>,
    integral: f64,
    sup: f64,
}

impl EnergyAccumulator {
    /// Add a sample: `norm` enters the sup, `density` the time integral.
    pub fn push(&mut self, t: f64, norm: f64, density: f64) {
        if let Some((t0, d0)) = self.last {
            if t > t0 {
                self.integral += 0.5 * (t - t0) * (d0 + density);
            }
        }
        self.last = Some((t, density));
        self.sup = self.sup.max(norm);
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }
}

/// Per-cell densities and their suprema.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MacroscopicFields {
    pub rho: Vec<f64>,
    /// `x_cells × d_v`.
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
    pub rho_sup: f64,
    pub m_sup: f64,
    pub e_sup: f64,
}

pub fn macroscopic_fields(f: &DistributionField) -> MacroscopicFields {
    let g = &f.grid;
    let d = g.d_v;
    let per: Vec<_> = (0..g.x_cells())
        .into_par_iter()
        .map(|ix| conserved_moments(f.slice(ix), g))
        .collect();
    let rho: Vec<f64> = per.iter().map(|m| m.mass).collect();
    let momentum: Vec<f64> = per.iter().flat_map(|m| m.momentum.clone()).collect();
    let energy: Vec<f64> = per.iter().map(|m| m.energy).collect();
    let rho_sup = rho.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let m_sup = momentum
        .chunks(d)
        .map(|m| m.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    let e_sup = energy.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    MacroscopicFields {
        rho,
        momentum,
        energy,
        rho_sup,
        m_sup,
        e_sup,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares slope of `ln value` against `ln(1+t)` over `window`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientPoints {
            found: pts.len(),
            needed: 5,
        });
    }
    if let Some(&(t, value)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositiveValue { t, value });
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(DecayFit {
        slope,
        stderr,
        intercept,
        points: pts.len(),
    })
}

/// `slope(plain) − slope(weighted)` of the two `ā` sup-norm series.
pub fn null_structure_gain(plain: &[(f64, f64)], weighted: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let a = fit_decay_rate(plain, window)?;
    let b = fit_decay_rate(weighted, window)?;
    Ok(a.slope - b.slope)
}

/// `sup ⟨v⟩^ℓ ⟨x⟩^m |f♯(T₁) − f♯(T₂)|`.
pub fn sharp_cauchy_diff(a: &DistributionField, b: &DistributionField, l: f64, m: f64) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("f♯ fields live on different grids".into()));
    }
    let g = &a.grid;
    let w = weight_table(g, 0.0, l, m);
    Ok(a.values
        .par_iter()
        .zip(b.values.par_iter())
        .zip(w.par_iter())
        .map(|((x, y), w)| (w * (x - y)).abs())
        .reduce(|| 0.0, f64::max))
}

/// `sup ⟨v⟩^{−(2+γ)} |ā_ij D²_ij f|`.
pub fn null_term_sup(f: &DistributionField, coeffs: &CoefficientFields, gamma: f64) -> f64 {
    let g = &f.grid;
    let nv = g.v_cells();
    let nsym = sym_len(g.d_v);
    let zero_c = vec![0.0; nv];
    let vt = g.v_table();
    (0..g.x_cells())
        .into_par_iter()
        .map(|ix| {
            let a = &coeffs.a_bar[ix * nv * nsym..(ix + 1) * nv * nsym];
            let q = apply_collision_nonconservative(f.slice(ix), a, &zero_c, g);
            q.iter()
                .enumerate()
                .map(|(iv, v)| {
                    let v2: f64 = 1.0 + vt[iv * g.d_v..(iv + 1) * g.d_v].iter().map(|x| x * x).sum::<f64>();
                    (v2.powf(-0.5 * (2.0 + gamma)) * v).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// One output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub energy: f64,
    pub rho_sup: f64,
    pub m_sup: f64,
    pub e_sup: f64,
    #[serde(rename = "E_norms")]
    pub e_norms: Vec<f64>,
    #[serde(rename = "Z_norms")]
    pub z_norms: Vec<f64>,
    pub a_bar_plain_sup: f64,
    pub a_bar_weighted_sup: f64,
    pub c_bar_sup: f64,
    pub null_term_sup: f64,
    pub sharp_diff_vs_t0: f64,
    pub h_value: f64,
    pub clipped_mass: f64,
}

impl DiagnosticRecord {
    /// Column names in CSV order; vectors expand to indexed columns.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string(), "mass".into()];
        h.extend((0..self.momentum.len()).map(|i| format!("momentum_{i}")));
        h.extend(["energy", "rho_sup", "m_sup", "e_sup"].map(String::from));
        h.extend((0..self.e_norms.len()).map(|i| format!("E_norms_{i}")));
        h.extend((0..self.z_norms.len()).map(|i| format!("Z_norms_{i}")));
        h.extend(
            [
                "a_bar_plain_sup",
                "a_bar_weighted_sup",
                "c_bar_sup",
                "null_term_sup",
                "sharp_diff_vs_t0",
                "h_value",
                "clipped_mass",
            ]
            .map(String::from),
        );
        h
    }

    pub fn csv_row(&self) -> Vec<f64> {
        let mut r = vec![self.t, self.mass];
        r.extend(&self.momentum);
        r.extend([self.energy, self.rho_sup, self.m_sup, self.e_sup]);
        r.extend(&self.e_norms);
        r.extend(&self.z_norms);
        r.extend([
            self.a_bar_plain_sup,
            self.a_bar_weighted_sup,
            self.c_bar_sup,
            self.null_term_sup,
            self.sharp_diff_vs_t0,
            self.h_value,
            self.clipped_mass,
        ]);
        r
    }
}

/// Settings for [`RecordBuilder`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSettings {
    pub gamma: f64,
    pub d0: f64,
    pub k_diag: usize,
    /// `(ℓ, m)` of the `f♯` comparison weight.
    pub weight_powers: (f64, f64),
    /// Skip the `ā`/`c̄` convolutions (they report zero).
    pub coefficient_norms: bool,
}

/// Builds records along a run, carrying the energy accumulators and `f♯(0)`.
#[derive(Clone, Debug)]
pub struct RecordBuilder {
    pub settings: DiagnosticSettings,
    pub hierarchy: HierarchyParams,
    sharp0: DistributionField,
    accumulators: Vec<Vec<(MultiIndex, EnergyAccumulator)>>,
}

impl RecordBuilder {
    pub fn new(settings: DiagnosticSettings, initial: &DistributionField) -> Result<Self> {
        let hierarchy = hierarchy_params(settings.gamma)?;
        if settings.k_diag > MAX_DIAG_ORDER {
            return Err(Error::OrderTooHigh {
                order: settings.k_diag,
                limit: MAX_DIAG_ORDER,
            });
        }
        let g = &initial.grid;
        let accumulators = (0..=settings.k_diag)
            .map(|k| {
                MultiIndex::all_of_order(g.d_x, g.d_v, k)
                    .into_iter()
                    .map(|m| (m, EnergyAccumulator::default()))
                    .collect()
            })
            .collect();
        Ok(Self {
            settings,
            hierarchy,
            sharp0: pullback_sharp(initial),
            accumulators,
        })
    }

    pub fn record(&mut self, f: &DistributionField, clipped_mass: f64) -> Result<DiagnosticRecord> {
        let s = &self.settings;
        let grid = &f.grid;
        let xv = grid.x_volume();
        let macro_ = macroscopic_fields(f);
        let mut momentum = vec![0.0; grid.d_v];
        for m in macro_.momentum.chunks(grid.d_v) {
            for (a, b) in momentum.iter_mut().zip(m) {
                *a += b * xv;
            }
        }
        let spec = WeightSpec::gaussian_only(s.gamma, s.d0);
        let g = to_g(f, &spec)?;
        let t = f.time;
        let mut z_norms = Vec::with_capacity(s.k_diag + 1);
        let mut e_norms = Vec::with_capacity(s.k_diag + 1);
        for (k, accs) in self.accumulators.iter_mut().enumerate() {
            let zeta = self.hierarchy.zeta[k];
            let theta = self.hierarchy.theta[k];
            let mut zs = 0.0;
            let mut es = 0.0;
            for (mi, acc) in accs.iter_mut() {
                zs += z_norm(&g, mi, &self.hierarchy, zeta, theta, s.k_diag)?;
                let (_, plain_sq, with_v_sq) = e_norm_pieces(&g, mi, &self.hierarchy, s.k_diag)?;
                acc.push(t, plain_sq.sqrt(), with_v_sq * (1.0 + t).powf(-1.0 - self.hierarchy.delta));
                let pre = (1.0 + t).powf(-(mi.beta_order() as f64));
                es += pre * (acc.sup() + acc.integral().sqrt());
            }
            z_norms.push(zs);
            e_norms.push(es);
        }
        let (plain, weighted, c_sup, null_sup) = if s.coefficient_norms && (grid.d_v == 2 || grid.d_v == 3) {
            let p = KernelParams::new(s.gamma, grid.d_v)?;
            // transport ringing leaves tiny negatives; coefficients see the positive part
            let mut pos = f.clone();
            pos.values.iter_mut().for_each(|v| *v = v.max(0.0));
            let c = compute_with_tables(&pos, &KernelTables::cached(grid, &p), ConvolutionMethod::Fft)?;
            let n = coefficient_sup_norms(&c, s.gamma);
            (n.plain, n.weighted_down, n.c_sup, null_term_sup(f, &c, s.gamma))
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        let sharp = pullback_sharp(f);
        let sharp_diff = sharp_cauchy_diff(&sharp, &self.sharp0, s.weight_powers.0, s.weight_powers.1)?;
        Ok(DiagnosticRecord {
            t,
            mass: macro_.rho.iter().sum::<f64>() * xv,
            momentum,
            energy: macro_.energy.iter().sum::<f64>() * xv,
            rho_sup: macro_.rho_sup,
            m_sup: macro_.m_sup,
            e_sup: macro_.e_sup,
            e_norms,
            z_norms,
            a_bar_plain_sup: plain,
            a_bar_weighted_sup: weighted,
            c_bar_sup: c_sup,
            null_term_sup: null_sup,
            sharp_diff_vs_t0: sharp_diff,
            h_value: h_functional(f),
            clipped_mass,
        })
    }
}
