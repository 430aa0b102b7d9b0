//! Strang splitting `T(dt/2) C(dt) T(dt/2)` with an explicit midpoint
//! collision substep, plus the run driver.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{compute_with_tables, CoefficientFields, ConvolutionMethod, KernelTables};
use crate::collision::{collision_operator, CollisionForm};
use crate::config::SimulationConfig;
use crate::diagnostics::{DiagnosticRecord, DiagnosticSettings, RecordBuilder};
use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::phase::{wrap_periodic, DistributionField, Grid};
use crate::transport::{free_solution, Transport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub t_final: f64,
    pub output_every: f64,
    pub max_subcycles: usize,
}

impl StepControl {
    pub fn from_config(c: &SimulationConfig) -> Self {
        Self {
            cfl_safety: c.time.cfl_safety,
            dt_max: c.time.dt_max,
            t_final: c.time.t_final,
            output_every: c.time.output_every,
            max_subcycles: c.solver.max_subcycles,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub field: DistributionField,
    pub clipped_mass: f64,
    pub subcycles: usize,
}

/// Operators and tables reused across steps on one grid.
#[derive(Clone)]
pub struct Stepper {
    pub params: Option<KernelParams>,
    pub form: CollisionForm,
    pub control: StepControl,
    transport: Transport,
    tables: Option<Arc<KernelTables>>,
}

/// Relative depth below which collision-created negatives are clipped.
pub const NEGATIVITY_TOL: f64 = 1e-13;

fn positive_part(f: &DistributionField) -> DistributionField {
    let mut p = f.clone();
    p.values.iter_mut().for_each(|v| *v = v.max(0.0));
    p
}

impl Stepper {
    /// `gamma = None` switches collisions off.
    pub fn new(grid: &Grid, gamma: Option<f64>, form: CollisionForm, control: StepControl) -> Result<Self> {
        let params = gamma.map(|g| KernelParams::new(g, grid.d_v)).transpose()?;
        let tables = params.as_ref().map(|p| KernelTables::cached(grid, p));
        Ok(Self {
            params,
            form,
            control,
            transport: Transport::new(grid),
            tables,
        })
    }

    pub fn from_config(c: &SimulationConfig) -> Result<Self> {
        let grid = c.grid()?;
        let gamma = c.solver.collisions.then_some(c.gamma);
        Self::new(&grid, gamma, c.solver.form, StepControl::from_config(c))
    }

    /// Coefficients from the positive part of `f` (stages may dip below zero).
    pub fn coefficients(&self, f: &DistributionField) -> Result<CoefficientFields> {
        match &self.tables {
            Some(t) => compute_with_tables(&positive_part(f), t, ConvolutionMethod::Fft),
            None => Ok(CoefficientFields::zeros(&f.grid, f.time)),
        }
    }

    /// Largest stable collision step for these coefficients.
    pub fn cfl_dt(&self, c: &CoefficientFields) -> f64 {
        let g = &c.grid;
        let (a, cc) = c.max_entries();
        let mut dt = f64::INFINITY;
        if a > 0.0 {
            dt = dt.min(g.dv() * g.dv() / (2.0 * g.d_v as f64 * a));
        }
        if cc > 0.0 {
            dt = dt.min(1.0 / cc);
        }
        self.control.cfl_safety * dt
    }

    fn rhs(&self, f: &DistributionField, c: Option<CoefficientFields>) -> Result<Vec<f64>> {
        let c = match c {
            Some(c) => c,
            None => self.coefficients(f)?,
        };
        Ok(collision_operator(f, &c, self.form).q_values)
    }

    /// Explicit midpoint over `dt`, sub-cycled to respect the CFL bound.
    pub fn collision_substep(&self, f: &DistributionField, dt: f64) -> Result<(DistributionField, usize)> {
        if self.tables.is_none() || dt == 0.0 {
            return Ok((f.clone(), 0));
        }
        let c0 = self.coefficients(f)?;
        let limit = self.cfl_dt(&c0);
        let n = if limit.is_finite() { (dt / limit).ceil().max(1.0) } else { 1.0 };
        if n > self.control.max_subcycles as f64 {
            return Err(Error::CflViolation {
                needed: n.min(usize::MAX as f64) as usize,
                cap: self.control.max_subcycles,
            });
        }
        let n = n as usize;
        let h = dt / n as f64;
        let mut cur = f.clone();
        let mut first = Some(c0);
        for _ in 0..n {
            let k1 = self.rhs(&cur, first.take())?;
            let mut mid = cur.clone();
            for (m, k) in mid.values.iter_mut().zip(&k1) {
                *m += 0.5 * h * k;
            }
            let k2 = self.rhs(&mid, None)?;
            for (v, k) in cur.values.iter_mut().zip(&k2) {
                *v += h * k;
            }
        }
        Ok((cur, n))
    }

    /// One Strang step; negative values created by the collision stage are clipped.
    pub fn strang_step(&self, f: &DistributionField, dt: f64) -> Result<StepOutcome> {
        let half = self.transport.shift(f, 0.5 * dt);
        let (mut mid, subcycles) = self.collision_substep(&half, dt)?;
        mid.check_finite()?;
        // clip cells the collision stage pushed below the tolerance band from
        // a non-negative start; cells already negative carry transport ringing
        // and are left alone, as are shallow dips, since clipping those makes
        // the scheme nonlinear at roundoff scale and the weighted norms amplify it
        let tol = NEGATIVITY_TOL * half.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut clipped = 0.0;
        for (m, h) in mid.values.iter_mut().zip(&half.values) {
            if *h >= 0.0 && *m < -tol {
                clipped -= *m;
                *m = 0.0;
            }
        }
        clipped *= mid.grid.x_volume() * mid.grid.v_volume();
        let out = self.transport.shift(&mid, 0.5 * dt);
        out.check_finite()?;
        Ok(StepOutcome {
            field: out,
            clipped_mass: clipped,
            subcycles,
        })
    }

    /// Advance from `f.time` to `t_end` in equal steps no longer than `dt_max`.
    pub fn advance(&self, f: &DistributionField, t_end: f64) -> Result<(DistributionField, f64, usize)> {
        let span = t_end - f.time;
        let mut cur = f.clone();
        if span <= 0.0 {
            return Ok((cur, 0.0, 0));
        }
        let steps = (span / self.control.dt_max - 1e-12).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        let mut clipped = 0.0;
        for _ in 0..steps {
            let o = self.strang_step(&cur, dt)?;
            clipped += o.clipped_mass;
            cur = o.field;
        }
        cur.time = t_end;
        Ok((cur, clipped, steps))
    }
}

/// Output times `0, Δ, 2Δ, …` capped by and ending at `t_final`.
pub fn output_times(t_final: f64, every: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut k = 1usize;
    loop {
        let t = k as f64 * every;
        if t >= t_final - 1e-9 * every {
            break;
        }
        out.push(t);
        k += 1;
    }
    if t_final > 0.0 {
        out.push(t_final);
    }
    out
}

pub enum RunEvent<'a> {
    Record(&'a DiagnosticRecord),
    /// The field at the output time of the record just emitted.
    Output(&'a DistributionField),
    Checkpoint { index: usize, field: &'a DistributionField },
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub records: Vec<DiagnosticRecord>,
    pub final_field: DistributionField,
    pub initial_field: DistributionField,
    pub clipped_mass: f64,
    pub steps: usize,
}

pub fn diagnostic_settings(c: &SimulationConfig) -> DiagnosticSettings {
    DiagnosticSettings {
        gamma: c.gamma,
        d0: c.d0,
        k_diag: c.diagnostics.k_diag,
        weight_powers: (c.diagnostics.weight_powers[0], c.diagnostics.weight_powers[1]),
        coefficient_norms: c.diagnostics.coefficient_norms && c.dims.d_v >= 2,
    }
}

/// Runs the configuration, handing each record and checkpoint to `sink`.
/// A resumed run emits only output times after the checkpoint time.
pub fn run<F>(config: &SimulationConfig, resume: Option<DistributionField>, mut sink: F) -> Result<RunSummary>
where
    F: FnMut(RunEvent<'_>) -> Result<()>,
{
    config.validate()?;
    let initial = config.initial_field()?;
    let stepper = Stepper::from_config(config)?;
    let mut builder = RecordBuilder::new(diagnostic_settings(config), &initial)?;
    let start = match resume {
        Some(f) => {
            if f.grid != initial.grid {
                return Err(Error::GridMismatch("checkpoint grid differs from the configuration".into()));
            }
            f
        }
        None => initial.clone(),
    };
    let mass0 = initial.total_mass();
    let clip_cap = config.solver.clip_limit * mass0;
    let every_ckpt = config.output.checkpoint_every;
    let mut next_ckpt = if every_ckpt > 0.0 { (start.time / every_ckpt).floor() * every_ckpt + every_ckpt } else { f64::INFINITY };
    let mut ckpt_index = if every_ckpt > 0.0 { (start.time / every_ckpt).floor() as usize } else { 0 };
    let resumed = start.time > 0.0;
    let mut cur = start;
    let mut clipped = 0.0;
    let mut steps = 0;
    let mut records = Vec::new();
    for t in output_times(config.time.t_final, config.time.output_every) {
        if resumed && t <= cur.time + 1e-12 {
            continue;
        }
        let (next, c, s) = stepper.advance(&cur, t)?;
        cur = next;
        clipped += c;
        steps += s;
        if clipped > clip_cap {
            return Err(Error::ClippingExceeded { clipped, limit: clip_cap });
        }
        let rec = builder.record(&cur, clipped)?;
        sink(RunEvent::Record(&rec))?;
        sink(RunEvent::Output(&cur))?;
        records.push(rec);
        if t >= next_ckpt - 1e-9 * every_ckpt {
            ckpt_index += 1;
            sink(RunEvent::Checkpoint { index: ckpt_index, field: &cur })?;
            while next_ckpt <= t + 1e-9 * every_ckpt {
                next_ckpt += every_ckpt;
            }
        }
    }
    Ok(RunSummary {
        records,
        final_field: cur,
        initial_field: initial,
        clipped_mass: clipped,
        steps,
    })
}

/// `sup ⟨v⟩^ℓ ⟨x−tv⟩^m |f − f_free|` against the free solution of `initial`.
pub fn free_deviation(f: &DistributionField, initial: &DistributionField, l: f64, m: f64) -> Result<f64> {
    if f.grid != initial.grid {
        return Err(Error::GridMismatch("field and data live on different grids".into()));
    }
    let free = free_solution(initial, f.time - initial.time);
    let g = &f.grid;
    let nv = g.v_cells();
    let vt = g.v_table();
    let xt = g.x_table();
    let t = f.time;
    let mut best: f64 = 0.0;
    for ix in 0..g.x_cells() {
        let x = &xt[ix * g.d_x..(ix + 1) * g.d_x];
        for iv in 0..nv {
            let v = &vt[iv * g.d_v..(iv + 1) * g.d_v];
            let v2: f64 = v.iter().map(|a| a * a).sum();
            let mut u2 = 1.0;
            for (a, xa) in x.iter().enumerate() {
                let u = wrap_periodic(xa - t * v[a], g.l_x);
                u2 += u * u;
            }
            let c = ix * nv + iv;
            let w = (1.0 + v2).powf(0.5 * l) * u2.powf(0.5 * m);
            best = best.max(w * (f.values[c] - free.values[c]).abs());
        }
    }
    Ok(best)
}
