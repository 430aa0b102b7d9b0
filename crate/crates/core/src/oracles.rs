//! Brute-force checks of the three-dimensional convolution inequalities on
//! analytic radial test functions.
//!
//! For radial `h`, the Riesz potential reduces to a one-dimensional integral:
//! `∫|v−v*|^{−ν} h(|v*|) dv* = 2π ∫ h(r) r² K_ν(|v|, r) dr` with
//! `K_ν(s, r) = ((s+r)^{2−ν} − |s−r|^{2−ν}) / (s r (2−ν))`, or
//! `ln((s+r)/|s−r|)/(s r)` at `ν = 2`. Each radial integral is evaluated by
//! tanh-sinh quadrature on panels whose ends sit on the kinks `r = |v|` and
//! `r = support radius`; "resolution" means the tanh-sinh level.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{tanh_sinh_panels, tanh_sinh_semi_infinite};

/// Default tanh-sinh level for oracle quadrature.
pub const DEFAULT_LEVEL: u32 = 5;

/// `r² K_ν(s, r)` from the module docs, arranged so that no factor
/// overflows near `r = 0`; the removable point `r = s` contributes nothing.
fn riesz_radial_weight(s: f64, r: f64, nu: f64) -> f64 {
    if s == 0.0 {
        return 2.0 * r.powf(2.0 - nu);
    }
    let diff = (s - r).abs();
    if diff == 0.0 {
        return if nu < 2.0 { r * (2.0 * s).powf(2.0 - nu) / (s * (2.0 - nu)) } else { 0.0 };
    }
    if (nu - 2.0).abs() < 1e-12 {
        r * ((s + r) / diff).ln() / s
    } else {
        r * ((s + r).powf(2.0 - nu) - diff.powf(2.0 - nu)) / (s * (2.0 - nu))
    }
}

/// `∫_{|v*|<support} |v−v*|^{−ν} h(|v*|) dv*` at `|v| = s` in three dimensions.
pub fn radial_riesz<H>(h: H, nu: f64, s: f64, support: f64, level: u32) -> Result<f64>
where
    H: Fn(f64) -> f64,
{
    let integrand = |r: f64| {
        let hv = h(r);
        if hv == 0.0 {
            0.0
        } else {
            hv * riesz_radial_weight(s, r, nu)
        }
    };
    let val = if support.is_finite() {
        let mut bp = vec![0.0];
        if s > 0.0 && s < support {
            bp.push(s);
        }
        bp.push(support);
        tanh_sinh_panels(integrand, &bp, level)
    } else {
        let mut total = 0.0;
        let mut start = 0.0;
        if s > 0.0 {
            total += tanh_sinh_panels(&integrand, &[0.0, s], level);
            start = s;
        }
        total + tanh_sinh_semi_infinite(&integrand, start, level)
    };
    let val = 2.0 * PI * val;
    if !val.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "non-finite Riesz potential at |v| = {s}, nu = {nu}"
        )));
    }
    Ok(val)
}

/// Radial profiles in the test catalog.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RadialShape {
    /// `e^{−r²/w²}`
    Gaussian { width: f64 },
    /// `1_{r ≤ R}`
    Ball { radius: f64 },
    /// `(1 − r²/R²)_+^k`
    Bump { radius: f64, power: i32 },
    /// `e^{−r²} + c e^{−r²/w²}`
    GaussianPair { coeff: f64, width: f64 },
    /// `(r/w)² e^{−r²/w²}`
    Shell { width: f64 },
}

impl RadialShape {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            RadialShape::Gaussian { width } => (-(r / width).powi(2)).exp(),
            RadialShape::Ball { radius } => {
                if r <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            RadialShape::Bump { radius, power } => {
                let u = 1.0 - (r / radius).powi(2);
                if u > 0.0 {
                    u.powi(power)
                } else {
                    0.0
                }
            }
            RadialShape::GaussianPair { coeff, width } => {
                (-r * r).exp() + coeff * (-(r / width).powi(2)).exp()
            }
            RadialShape::Shell { width } => {
                let u = (r / width).powi(2);
                u * (-u).exp()
            }
        }
    }

    /// Radius beyond which the profile vanishes (infinite for Gaussians).
    pub fn support(&self) -> f64 {
        match *self {
            RadialShape::Ball { radius } | RadialShape::Bump { radius, .. } => radius,
            _ => f64::INFINITY,
        }
    }

    /// A length scale that brackets where the mass sits.
    pub fn scale(&self) -> f64 {
        match *self {
            RadialShape::Gaussian { width } | RadialShape::Shell { width } => width,
            RadialShape::Ball { radius } | RadialShape::Bump { radius, .. } => radius,
            RadialShape::GaussianPair { width, .. } => width.max(1.0),
        }
    }

    /// Supremum of the profile (closed form).
    pub fn sup(&self) -> f64 {
        match *self {
            RadialShape::Gaussian { .. } | RadialShape::Ball { .. } | RadialShape::Bump { .. } => 1.0,
            RadialShape::GaussianPair { coeff, .. } => {
                // both terms peak at the origin when coeff ≥ 0
                1.0 + coeff
            }
            RadialShape::Shell { .. } => (-1.0f64).exp(),
        }
    }
}

/// Catalog entry: amplitude times a radial profile centred at `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub shape: RadialShape,
    pub amplitude: f64,
    pub center: [f64; 3],
}

impl TestFunction {
    pub fn new(shape: RadialShape) -> Self {
        Self {
            shape,
            amplitude: 1.0,
            center: [0.0; 3],
        }
    }

    pub fn scaled(mut self, lambda: f64) -> Self {
        self.amplitude *= lambda;
        self
    }

    pub fn translated(mut self, by: [f64; 3]) -> Self {
        for a in 0..3 {
            self.center[a] += by[a];
        }
        self
    }

    pub fn radial(&self, r: f64) -> f64 {
        self.amplitude * self.shape.value(r)
    }

    /// `‖h‖_{L^p}` by radial quadrature.
    pub fn lp_norm(&self, p: f64, level: u32) -> f64 {
        let a = self.amplitude.abs();
        if p.is_infinite() {
            return a * self.shape.sup();
        }
        let f = |r: f64| self.shape.value(r).abs().powf(p) * r * r;
        let sup = self.shape.support();
        let integral = if sup.is_finite() {
            tanh_sinh_panels(f, &[0.0, sup], level)
        } else {
            tanh_sinh_semi_infinite(f, 0.0, level)
        };
        a * (4.0 * PI * integral).powf(1.0 / p)
    }

    /// Riesz potential `∫|v−v*|^{−ν} h(v*) dv*` at a point.
    pub fn riesz_at(&self, v: [f64; 3], nu: f64, level: u32) -> Result<f64> {
        let s = ((v[0] - self.center[0]).powi(2)
            + (v[1] - self.center[1]).powi(2)
            + (v[2] - self.center[2]).powi(2))
        .sqrt();
        Ok(self.amplitude.abs() * radial_riesz(|r| self.shape.value(r).abs(), nu, s, self.shape.support(), level)?)
    }
}

/// The standard catalog of twenty radial test functions.
pub fn catalog() -> Vec<TestFunction> {
    let mut out = Vec::new();
    for w in [0.5, 1.0, 2.0, 3.5] {
        out.push(RadialShape::Gaussian { width: w });
    }
    for r in [0.5, 1.0, 2.0] {
        out.push(RadialShape::Ball { radius: r });
    }
    for (r, k) in [(1.0, 1), (1.0, 2), (1.0, 4), (2.0, 2), (0.7, 3)] {
        out.push(RadialShape::Bump { radius: r, power: k });
    }
    for (c, w) in [(0.5, 3.0), (2.0, 0.3), (1.0, 1.5), (0.1, 5.0)] {
        out.push(RadialShape::GaussianPair { coeff: c, width: w });
    }
    for w in [0.5, 1.0, 2.0, 4.0] {
        out.push(RadialShape::Shell { width: w });
    }
    out.into_iter().map(TestFunction::new).collect()
}

/// Maximise a function of `s ≥ 0` by a coarse scan and golden-section polish.
fn maximise_radial<F>(f: F, s_max: f64, samples: usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut vals = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let s = s_max * i as f64 / samples as f64;
        let v = f(s)?;
        vals.push(v);
        if v > best.1 {
            best = (s, v);
        }
    }
    let i = (best.0 / s_max * samples as f64).round() as usize;
    let lo = s_max * i.saturating_sub(1) as f64 / samples as f64;
    let hi = s_max * (i + 1).min(samples) as f64 / samples as f64;
    let (mut a, mut b) = (lo, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    for (s, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (s, v);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub nu: f64,
    /// `sup_v ∫|v−v*|^{−ν}|h| dv*`.
    pub lhs: f64,
    /// Same supremum at the next tanh-sinh level.
    pub lhs_refined: f64,
    /// `‖h‖₁^{1−ν/3} ‖h‖_∞^{ν/3}`.
    pub rhs: f64,
    pub ratio: f64,
    /// Distance from the centre where the supremum is attained.
    pub argmax: f64,
    /// `|lhs_refined − lhs| / lhs`.
    pub refinement_change: f64,
}

fn sup_riesz(h: &TestFunction, nu: f64, level: u32) -> Result<(f64, f64)> {
    let scan_to = if h.shape.support().is_finite() {
        1.5 * h.shape.support()
    } else {
        4.0 * h.shape.scale()
    };
    maximise_radial(
        |s| {
            Ok(h.amplitude.abs()
                * radial_riesz(|r| h.shape.value(r).abs(), nu, s, h.shape.support(), level)?)
        },
        scan_to,
        48,
    )
}

pub fn check_interpolation(h: &TestFunction, nu: f64, level: u32) -> Result<InterpolationReport> {
    if !(nu > 0.0 && nu < 3.0) {
        return Err(Error::BranchMismatch {
            nu,
            branch: "interpolation (0,3)",
        });
    }
    let (argmax, lhs) = sup_riesz(h, nu, level)?;
    let s = ((argmax * argmax) / 3.0).sqrt();
    let lhs_refined = h.riesz_at(
        [h.center[0] + s, h.center[1] + s, h.center[2] + s],
        nu,
        level + 1,
    )?;
    let l1 = h.lp_norm(1.0, level + 2);
    let linf = h.lp_norm(f64::INFINITY, level);
    let rhs = l1.powf(1.0 - nu / 3.0) * linf.powf(nu / 3.0);
    let ratio = lhs / rhs;
    if !ratio.is_finite() {
        return Err(Error::QuadratureFailure(format!("ratio {ratio} for nu = {nu}")));
    }
    Ok(InterpolationReport {
        nu,
        lhs,
        lhs_refined,
        rhs,
        ratio,
        argmax,
        refinement_change: (lhs_refined - lhs).abs() / lhs,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub t: f64,
    /// `sup_x ∫ h dv`.
    pub lhs: f64,
    /// `‖⟨v⟩⁴ h‖_∞`.
    pub v_weighted_sup: f64,
    /// `‖⟨x−tv⟩⁴ h‖_∞`.
    pub xtv_weighted_sup: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `(π/(1+t²))^{3/2} (1+t)³ e / 8`, the exact ratio for this family.
    pub closed_form_ratio: f64,
}

/// `h(t,x,v) = A e^{−|x−tv|² − |v|²}` in three dimensions.
pub fn check_dispersion(times: &[f64], amplitude: f64, level: u32) -> Result<Vec<DispersionPoint>> {
    let a = amplitude.abs();
    times
        .iter()
        .map(|&t| {
            if t < 0.0 {
                return Err(Error::QuadratureFailure(format!("negative time {t}")));
            }
            // one axis of the separable velocity integral, maximised over x
            let axis = |x: f64| -> f64 {
                let f = |v: f64| (-(x - t * v).powi(2) - v * v).exp();
                let c = x * t / (1.0 + t * t);
                tanh_sinh_semi_infinite(|u| f(c + u), 0.0, level)
                    + tanh_sinh_semi_infinite(|u| f(c - u), 0.0, level)
            };
            let (_, per_axis) = maximise_radial(|x| Ok(axis(x)), 3.0, 30)?;
            let (_, per_axis_neg) = maximise_radial(|x| Ok(axis(-x)), 3.0, 30)?;
            let lhs = a * per_axis.max(per_axis_neg).powi(3);
            // sup of (1+r²)² e^{−r²} at fixed x − tv = 0 (resp. v = 0)
            let (_, wsup) = maximise_radial(|r| Ok((1.0 + r * r).powi(2) * (-r * r).exp()), 4.0, 64)?;
            let v_weighted_sup = a * wsup;
            let xtv_weighted_sup = a * wsup;
            let rhs = (1.0 + t).powi(-3) * (v_weighted_sup + xtv_weighted_sup);
            let ratio = lhs / rhs;
            if !ratio.is_finite() {
                return Err(Error::QuadratureFailure(format!("dispersion ratio at t = {t}")));
            }
            let closed_form_ratio =
                (PI / (1.0 + t * t)).powf(1.5) * (1.0 + t).powi(3) * std::f64::consts::E / 8.0;
            Ok(DispersionPoint {
                t,
                lhs,
                v_weighted_sup,
                xtv_weighted_sup,
                rhs,
                ratio,
                closed_form_ratio,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HlsBranch {
    /// `‖U‖_{L²}` for `ν ∈ (3/2, 3)`.
    L2,
    /// `‖U‖_{L^{15/(4ν)}}` for `ν ∈ [0, 3/2]`.
    L15Over4Nu,
}

impl HlsBranch {
    /// Branch that owns `ν`; `ν = 3/2` belongs to the second.
    pub fn for_nu(nu: f64) -> Option<Self> {
        if nu > 1.5 && nu < 3.0 {
            Some(HlsBranch::L2)
        } else if (0.0..=1.5).contains(&nu) {
            Some(HlsBranch::L15Over4Nu)
        } else {
            None
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HlsBranch::L2 => "L2",
            HlsBranch::L15Over4Nu => "L15over4nu",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HlsReport {
    pub nu: f64,
    pub branch: HlsBranch,
    /// Lebesgue exponent of the left side (infinite at ν = 0).
    pub exponent: f64,
    pub lhs: f64,
    pub lhs_refined: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub refinement_change: f64,
}

fn potential_lp_norm(h: &TestFunction, nu: f64, p: f64, level: u32) -> Result<f64> {
    let sup = h.shape.support();
    let amp = h.amplitude.abs();
    let u = |s: f64| -> f64 {
        radial_riesz(|r| h.shape.value(r).abs(), nu, s, sup, level).unwrap_or(f64::NAN)
    };
    let integrand = |s: f64| u(s).powf(p) * s * s;
    let split = if sup.is_finite() { sup } else { 2.0 * h.shape.scale() };
    let inner = tanh_sinh_panels(&integrand, &[0.0, split], level);
    let outer = tanh_sinh_semi_infinite(&integrand, split, level);
    let val = amp * (4.0 * PI * (inner + outer)).powf(1.0 / p);
    if !val.is_finite() {
        return Err(Error::QuadratureFailure(format!("potential norm at nu = {nu}")));
    }
    Ok(val)
}

pub fn check_hls(h: &TestFunction, nu: f64, branch: HlsBranch, level: u32) -> Result<HlsReport> {
    match HlsBranch::for_nu(nu) {
        Some(b) if b == branch => {}
        _ => {
            return Err(Error::BranchMismatch {
                nu,
                branch: branch.name(),
            })
        }
    }
    let l1 = h.lp_norm(1.0, level + 2);
    let l2 = h.lp_norm(2.0, level + 2);
    let (exponent, rhs) = match branch {
        HlsBranch::L2 => (2.0, l1.powf(2.0 - 2.0 * nu / 3.0) * l2.powf(2.0 * nu / 3.0 - 1.0)),
        HlsBranch::L15Over4Nu => {
            let p = if nu == 0.0 { f64::INFINITY } else { 15.0 / (4.0 * nu) };
            (p, l1.powf(1.0 - 2.0 * nu / 15.0) * l2.powf(2.0 * nu / 15.0))
        }
    };
    let (lhs, lhs_refined) = if exponent.is_infinite() {
        // ν = 0: the potential is the constant ‖h‖₁
        (l1, h.lp_norm(1.0, level + 3))
    } else {
        (
            potential_lp_norm(h, nu, exponent, level)?,
            potential_lp_norm(h, nu, exponent, level + 1)?,
        )
    };
    let ratio = lhs / rhs;
    if !ratio.is_finite() {
        return Err(Error::QuadratureFailure(format!("HLS ratio {ratio} at nu = {nu}")));
    }
    Ok(HlsReport {
        nu,
        branch,
        exponent,
        lhs,
        lhs_refined,
        rhs,
        ratio,
        refinement_change: (lhs_refined - lhs).abs() / lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_potential_at_origin_is_two_pi() {
        let h = TestFunction::new(RadialShape::Ball { radius: 1.0 });
        let v = h.riesz_at([0.0; 3], 1.0, DEFAULT_LEVEL).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-3);
        assert!((v - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn potential_off_centre_matches_shell_formula() {
        // unit ball, ν = 1, |v| = s < 1: 2π(1 − s²/3)
        let h = TestFunction::new(RadialShape::Ball { radius: 1.0 });
        for s in [0.2, 0.5, 0.9] {
            let v = h.riesz_at([s, 0.0, 0.0], 1.0, DEFAULT_LEVEL).unwrap();
            let exact = 2.0 * PI * (1.0 - s * s / 3.0);
            assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
        }
        // outside: (4π/3)/s
        let v = h.riesz_at([0.0, 2.0, 0.0], 1.0, DEFAULT_LEVEL).unwrap();
        assert!((v - 4.0 * PI / 6.0).abs() < 1e-9);
    }

    #[test]
    fn log_branch_at_nu_two() {
        // Gaussian: continuity of the potential across ν = 2
        let h = TestFunction::new(RadialShape::Gaussian { width: 1.0 });
        let a = h.riesz_at([0.7, 0.0, 0.0], 2.0, 6).unwrap();
        let b = h.riesz_at([0.7, 0.0, 0.0], 2.0 + 1e-7, 6).unwrap();
        assert!((a - b).abs() < 1e-5 * a);
    }

    #[test]
    fn gaussian_norms() {
        let h = TestFunction::new(RadialShape::Gaussian { width: 1.0 });
        assert!((h.lp_norm(1.0, 6) - PI.powf(1.5)).abs() < 1e-10);
        assert!((h.lp_norm(2.0, 6) - (PI / 2.0).powf(0.75)).abs() < 1e-10);
    }

    #[test]
    fn interpolation_scale_invariance() {
        let h = TestFunction::new(RadialShape::Bump { radius: 1.0, power: 2 });
        let a = check_interpolation(&h, 1.5, DEFAULT_LEVEL).unwrap();
        let b = check_interpolation(&h.scaled(7.5), 1.5, DEFAULT_LEVEL).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-12 * a.ratio);
        let c = check_interpolation(&h.translated([1.0, -2.0, 0.5]), 1.5, DEFAULT_LEVEL).unwrap();
        assert!((a.ratio - c.ratio).abs() < 1e-12 * a.ratio);
        assert!(check_interpolation(&h, 3.0, DEFAULT_LEVEL).is_err());
    }

    #[test]
    fn dispersion_closed_form() {
        let pts = check_dispersion(&[0.0, 1.0, 10.0], 1.0, 6).unwrap();
        for p in &pts {
            assert!((p.ratio - p.closed_form_ratio).abs() < 1e-6 * p.closed_form_ratio);
        }
        // t = 0: Hölder with ∫⟨v⟩^{-4} dv = π²
        assert!(pts[0].lhs <= PI * PI * pts[0].v_weighted_sup);
        let scaled = check_dispersion(&[3.0], 4.0, 6).unwrap();
        let base = check_dispersion(&[3.0], 1.0, 6).unwrap();
        assert!((scaled[0].ratio - base[0].ratio).abs() < 1e-12 * base[0].ratio);
    }

    #[test]
    fn hls_branch_gate() {
        let h = TestFunction::new(RadialShape::Gaussian { width: 1.0 });
        assert!(check_hls(&h, 1.5 + 1e-6, HlsBranch::L2, 4).is_ok());
        assert!(matches!(
            check_hls(&h, 1.5, HlsBranch::L2, 4),
            Err(Error::BranchMismatch { .. })
        ));
        assert_eq!(HlsBranch::for_nu(1.5), Some(HlsBranch::L15Over4Nu));
        assert!(check_hls(&h, 1.5, HlsBranch::L15Over4Nu, 4).is_ok());
        let r = check_hls(&h, 0.0, HlsBranch::L15Over4Nu, 4).unwrap();
        assert!(r.exponent.is_infinite());
    }

    #[test]
    fn hls_gaussian_nu_two() {
        let h = TestFunction::new(RadialShape::Gaussian { width: 1.0 });
        let r = check_hls(&h, 2.0, HlsBranch::L2, DEFAULT_LEVEL).unwrap();
        assert!(r.ratio <= 10.0 && r.ratio > 0.0);
        assert!(r.refinement_change <= 1e-3);
        let s = check_hls(&h.scaled(0.01), 2.0, HlsBranch::L2, DEFAULT_LEVEL).unwrap();
        assert!((s.ratio - r.ratio).abs() < 1e-12 * r.ratio);
    }
}
