//! Run configuration: TOML schema, defaults and the gate checks applied
//! before any time stepping.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collision::CollisionForm;
use crate::diagnostics::MAX_DIAG_ORDER;
use crate::error::{Error, Result};
use crate::maxwellian::{sample_sharp, TravelingMaxwellianParams};
use crate::phase::{DistributionField, Grid, EXP_LIMIT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub d_x: usize,
    pub d_v: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_x: usize,
    pub n_v: usize,
    #[serde(rename = "L_x")]
    pub l_x: f64,
    pub v_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub output_every: f64,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_dt_max() -> f64 {
    0.25
}

/// Parameters of the initial data; only the keys of the chosen kind matter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialParameters {
    /// Gaussian centre in `x` (missing components are zero).
    #[serde(default)]
    pub center_x: Vec<f64>,
    #[serde(default)]
    pub center_v: Vec<f64>,
    #[serde(default = "one")]
    pub width_x: f64,
    #[serde(default = "one")]
    pub width_v: f64,
    /// Seed data: distance between the two bumps along the first axis.
    #[serde(default = "default_separation")]
    pub separation_x: f64,
    #[serde(default)]
    pub separation_v: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub beta: f64,
    /// Strictly-upper entries of the skew matrix, row order.
    #[serde(default)]
    pub skew: Vec<f64>,
}

impl Default for InitialParameters {
    fn default() -> Self {
        Self {
            center_x: Vec::new(),
            center_v: Vec::new(),
            width_x: 1.0,
            width_v: 1.0,
            separation_x: default_separation(),
            separation_v: 0.0,
            alpha: 1.0,
            sigma: 1.0,
            beta: 0.0,
            skew: Vec::new(),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_separation() -> f64 {
    3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Gaussian,
    Seed,
    Maxwellian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub kind: InitialKind,
    #[serde(default)]
    pub parameters: InitialParameters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(rename = "K_diag", default = "default_k")]
    pub k_diag: usize,
    /// `[t_lo, t_hi]`; defaults to `[5, 0.8 t_final]`.
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
    /// `(ℓ, m)` for the `⟨v⟩^ℓ⟨x⟩^m` weight of the `f♯` comparisons.
    #[serde(default = "default_powers")]
    pub weight_powers: [f64; 2],
    #[serde(default = "yes")]
    pub coefficient_norms: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            k_diag: default_k(),
            fit_window: None,
            weight_powers: default_powers(),
            coefficient_norms: true,
        }
    }
}

fn default_k() -> usize {
    2
}

fn default_powers() -> [f64; 2] {
    [2.0, 2.0]
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<String>,
    /// Time between checkpoints; zero disables them.
    #[serde(default)]
    pub checkpoint_every: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// `false` gives pure free transport.
    #[serde(default = "yes")]
    pub collisions: bool,
    #[serde(default = "default_form")]
    pub form: CollisionForm,
    #[serde(default = "default_subcycles")]
    pub max_subcycles: usize,
    /// Abort once clipped mass exceeds this fraction of the initial mass.
    #[serde(default = "default_clip")]
    pub clip_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            collisions: true,
            form: default_form(),
            max_subcycles: default_subcycles(),
            clip_limit: default_clip(),
        }
    }
}

fn default_form() -> CollisionForm {
    CollisionForm::Divergence
}

fn default_subcycles() -> usize {
    10_000
}

fn default_clip() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub gamma: f64,
    #[serde(default = "default_d0")]
    pub d0: f64,
    pub epsilon: f64,
    pub dims: Dims,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial_data: InitialData,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_d0() -> f64 {
    0.1
}

/// Relative level below which a Gaussian tail counts as outside the support.
const SUPPORT_LEVEL: f64 = 1e-16;

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config_str(text: &str) -> Result<SimulationConfig> {
    let cfg: SimulationConfig = toml::from_str(text).map_err(|e| Error::ParseError {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn gate(ok: bool, name: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(name.to_string()))
    }
}

impl SimulationConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn fit_window(&self) -> (f64, f64) {
        match self.diagnostics.fit_window {
            Some([a, b]) => (a, b),
            None => (5.0, 0.8 * self.time.t_final),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        if self.solver.collisions {
            Grid::new(self.dims.d_x, self.dims.d_v, g.n_x, g.n_v, g.l_x, g.v_max)
        } else {
            Grid::transport_only(self.dims.d_x, self.dims.d_v, g.n_x, g.n_v, g.l_x, g.v_max)
        }
    }

    /// Radius in `x` outside which the initial data is below `1e−16` of its peak.
    pub fn support_radius(&self) -> f64 {
        let p = &self.initial_data.parameters;
        let tail = (1.0 / SUPPORT_LEVEL).ln().sqrt();
        let centre = p.center_x.iter().map(|c| c * c).sum::<f64>().sqrt();
        match self.initial_data.kind {
            InitialKind::Gaussian => centre + p.width_x * tail,
            InitialKind::Seed => 0.5 * p.separation_x.abs() + p.width_x * tail,
            // sup over v leaves the rate λ_min(Q)/(2σ) in x
            InitialKind::Maxwellian => match self.q_min_eigen() {
                Some(l) => (2.0 * p.sigma / l).sqrt() * tail,
                None => f64::INFINITY,
            },
        }
    }

    /// Rate `a` such that the data decays like `e^{−a|v|²}`.
    fn velocity_decay_rate(&self) -> f64 {
        let p = &self.initial_data.parameters;
        match self.initial_data.kind {
            InitialKind::Gaussian | InitialKind::Seed => 1.0 / (p.width_v * p.width_v),
            // sup over x leaves the rate λ_min(Q)/(2α) in v
            InitialKind::Maxwellian => match self.q_min_eigen() {
                Some(l) => 0.5 * l / p.alpha,
                None => 0.0,
            },
        }
    }

    fn q_min_eigen(&self) -> Option<f64> {
        let m = self.maxwellian_params().ok()?;
        let eig = nalgebra::SymmetricEigen::new(m.q_matrix());
        Some(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    pub fn maxwellian_params(&self) -> Result<TravelingMaxwellianParams> {
        let p = &self.initial_data.parameters;
        let d = self.dims.d_v;
        let need = d * d.saturating_sub(1) / 2;
        let mut skew = p.skew.clone();
        skew.resize(need, 0.0);
        let mut m = TravelingMaxwellianParams::isotropic(d, 1.0, p.alpha, p.sigma).with_skew(&skew);
        m.beta = p.beta;
        m.validate()?;
        Ok(m)
    }

    /// Gate checks; the error names the first violated gate.
    pub fn validate(&self) -> Result<()> {
        gate(self.gamma > -2.0 && self.gamma < 0.0, "gamma must lie in (-2,0)")?;
        gate(self.d0 > 0.0 && self.d0.is_finite(), "d0 must be positive")?;
        gate(self.epsilon >= 0.0 && self.epsilon.is_finite(), "epsilon must be non-negative")?;
        let d = &self.dims;
        let dv_ok = if self.solver.collisions { (2..=3).contains(&d.d_v) } else { (1..=3).contains(&d.d_v) };
        gate(dv_ok && d.d_x <= d.d_v, "dims")?;
        let g = &self.grid;
        gate(
            g.n_v >= 2 && g.v_max > 0.0 && (d.d_x == 0 || (g.n_x >= 1 && g.l_x > 0.0)),
            "grid",
        )?;
        let t = &self.time;
        gate(
            t.t_final >= 0.0
                && t.cfl_safety > 0.0
                && t.cfl_safety <= 1.0
                && t.dt_max > 0.0
                && t.output_every > 0.0,
            "time",
        )?;
        gate(self.diagnostics.k_diag <= MAX_DIAG_ORDER, "K_diag must be at most 2")?;
        if let Some([a, b]) = self.diagnostics.fit_window {
            gate(a < b, "fit_window")?;
        }
        gate(self.output.checkpoint_every >= 0.0, "checkpoint_every")?;
        gate(self.solver.clip_limit >= 0.0 && self.solver.max_subcycles >= 1, "solver")?;
        if d.d_x > 0 {
            gate(
                g.v_max * t.t_final + self.support_radius() <= 0.5 * g.l_x,
                "no-wrap",
            )?;
        }
        let p = &self.initial_data.parameters;
        gate(p.width_x > 0.0 && p.width_v > 0.0, "initial_data")?;
        if self.initial_data.kind == InitialKind::Maxwellian {
            gate(d.d_x == d.d_v, "maxwellian data needs d_x = d_v")?;
            self.maxwellian_params()
                .map_err(|_| Error::ConfigInvalid("maxwellian parameters".into()))?;
        }
        // the Gaussian weight e^{d(0)⟨v⟩²} with d(0) = 2 d0 must stay bounded on the data
        gate(self.velocity_decay_rate() >= 2.0 * self.d0, "gaussian-dominated")?;
        gate(2.0 * self.d0 * (1.0 + d.d_v as f64 * g.v_max * g.v_max) <= EXP_LIMIT, "weight overflow")?;
        let f0 = self.initial_field()?;
        gate(
            f0.velocity_boundary_max() <= 1e-12 * f0.max_abs().max(f64::MIN_POSITIVE),
            "boundary",
        )?;
        Ok(())
    }

    /// `f_in` sampled on the grid at `t = 0`.
    pub fn initial_field(&self) -> Result<DistributionField> {
        let grid = self.grid()?;
        let p = &self.initial_data.parameters;
        let eps = self.epsilon;
        let comp = |c: &[f64], i: usize| c.get(i).copied().unwrap_or(0.0);
        let field = match self.initial_data.kind {
            InitialKind::Gaussian => DistributionField::from_fn(&grid, 0.0, |x, v| {
                let mut e = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    e += ((xi - comp(&p.center_x, i)) / p.width_x).powi(2);
                }
                for (i, vi) in v.iter().enumerate() {
                    e += ((vi - comp(&p.center_v, i)) / p.width_v).powi(2);
                }
                eps * (-e).exp()
            }),
            InitialKind::Seed => DistributionField::from_fn(&grid, 0.0, |x, v| {
                let bump = |s: f64| {
                    let mut e = 0.0;
                    for (i, xi) in x.iter().enumerate() {
                        let c = if i == 0 { 0.5 * s * p.separation_x } else { 0.0 };
                        e += ((xi - c) / p.width_x).powi(2);
                    }
                    for (i, vi) in v.iter().enumerate() {
                        let c = if i == 0 { 0.5 * s * p.separation_v } else { 0.0 };
                        e += ((vi - c) / p.width_v).powi(2);
                    }
                    (-e).exp()
                };
                eps * (bump(1.0) + bump(-1.0))
            }),
            InitialKind::Maxwellian => {
                let mut m = self.maxwellian_params()?;
                m.m = eps;
                sample_sharp(&m, &grid, 0.0)?
            }
        };
        Ok(field)
    }
}
