//! Time integration of the potential-level Calabi flow `∂φ/∂t = R_φ − R̄`.
//!
//! The stiff principal part is modeled by the constant-coefficient operator
//! `c·Δ_c²` and treated implicitly; the remainder
//! `G(φ) = R_φ − R̄ + c·Δ_c²φ` is explicit:
//!
//! ```text
//! imex-be   φ⁺ = (1 + dt·cL)⁻¹ (φ + dt·G(φ))
//! imex-cn   p  = (1 + dt/2·cL)⁻¹ (φ + dt/2·G(φ))
//!           φ⁺ = (1 + dt/2·cL)⁻¹ ((1 − dt/2·cL)φ + dt·G(p))
//! ```
//!
//! with `L = Δ_c²`. The `cn` variant is a midpoint predictor–corrector: second
//! order, and unconditionally stable on the linearization for principal
//! symbols in `[0, 2c]`. `explicit-rk4` is intended for cross-checks at small
//! `dt` only.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GlobalIntegrals, Metric};
use crate::grid::{ScalarField, TorusGrid};
use crate::monitor;
use crate::operators;
use crate::spectral::Torus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitRk4,
    ImexBe,
    ImexCn,
}

impl Scheme {
    pub fn order(self) -> i32 {
        match self {
            Scheme::ExplicitRk4 => 4,
            Scheme::ImexBe => 1,
            Scheme::ImexCn => 2,
        }
    }
}

/// Margin in the automatic splitting constant `c = (1 + margin)·max(Λ², λ⁻²)`.
pub const SPLITTING_MARGIN: f64 = 0.1;
/// Relative change of `λ` or `Λ` that triggers a refresh of the automatic `c`.
pub const SPLITTING_REFRESH: f64 = 0.1;
/// A state is stationary once `C̃a < STATIONARY_RATIO · V`.
pub const STATIONARY_RATIO: f64 = 1e-16;
/// Slack of the per-step monotonicity check, relative to `C̃a(0)`.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Fixed splitting constant; `None` selects the automatic rule.
    pub splitting: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    /// With `false`, steps use `dt_init` (clamped to output times) and only
    /// admissibility failures shrink them.
    pub adaptive: bool,
    pub t_end: f64,
    /// Time between diagnostics records.
    pub cadence: f64,
    pub snapshot_times: Vec<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::ImexCn,
            dt_init: 1e-2,
            dt_min: 1e-10,
            dt_max: 1.0,
            splitting: None,
            rtol: 1e-6,
            atol: 1e-12,
            adaptive: true,
            t_end: 1.0,
            cadence: 0.1,
            snapshot_times: Vec::new(),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let finite = [self.dt_init, self.dt_min, self.dt_max, self.rtol, self.atol, self.t_end, self.cadence];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("integrator parameters must be finite".into());
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min ≤ dt_init ≤ dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if let Some(c) = self.splitting {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("splitting constant must be positive, got {c}"));
            }
        }
        if !(self.rtol >= 0.0 && self.atol >= 0.0 && self.rtol + self.atol > 0.0) {
            return bad("error tolerances must be non-negative and not both zero".into());
        }
        if self.t_end < 0.0 {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if !(self.cadence > 0.0) {
            return bad(format!("cadence must be positive, got {}", self.cadence));
        }
        if self.snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("snapshot times must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// One Fourier term `amplitude·cos(k·x + phase)` of an initial potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    /// Integer wavenumbers, one per real axis in the order `(x₁, y₁, …)`.
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

pub fn modes_potential(grid: TorusGrid, modes: &[Mode]) -> Result<ScalarField> {
    for m in modes {
        if m.k.len() != grid.axes() {
            return Err(Error::Config(format!("mode has {} wavenumbers, grid has {} axes", m.k.len(), grid.axes())));
        }
        if !(m.amplitude.is_finite() && m.phase.is_finite()) {
            return Err(Error::Config("mode amplitude and phase must be finite".into()));
        }
    }
    Ok(ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|m| {
                let arg: f64 = m.k.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
                m.amplitude * (arg + m.phase).cos()
            })
            .sum()
    }))
}

/// Random-phase spectrum with `|φ̂(k)| ∝ |k|^{−decay}`, scaled so that
/// `sup|Δ_c φ| = amplitude`. The zero mode and every mode touching the
/// Nyquist wavenumber are left empty.
pub fn random_spectrum(torus: &Torus, decay: f64, seed: u64, amplitude: f64) -> Result<ScalarField> {
    if !(decay.is_finite() && amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::Config("random spectrum needs finite decay and non-negative amplitude".into()));
    }
    let grid = torus.grid();
    let pts = grid.points_per_axis();
    let axes = grid.axes();
    let nyq = (pts / 2) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![C64::default(); grid.len()];
    for i in 0..grid.len() {
        let m = grid.multi_index(i);
        let k: Vec<i64> = (0..axes).map(|a| grid.wavenumber(m[a])).collect();
        if k.iter().all(|&v| v == 0) || k.iter().any(|&v| v == nyq) {
            continue;
        }
        let mut mirror = [0usize; 4];
        for a in 0..axes {
            mirror[a] = (pts - m[a]) % pts;
        }
        let j = grid.flat_index(&mirror[..axes]);
        if i > j {
            continue;
        }
        let norm = (k.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt();
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let c = C64::from_polar(norm.powf(-decay), theta);
        spec[i] = c;
        spec[j] = c.conj();
    }
    let phi = torus.inverse_real(spec);
    if amplitude == 0.0 {
        return Ok(ScalarField::zeros(grid));
    }
    let lap = torus.laplace_flat(&phi)?.sup_norm();
    let scale = amplitude / lap;
    Ok(phi.map(|v| v * scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub ca: f64,
    pub cam: f64,
    pub volume: f64,
    pub total_scalar: f64,
    pub dissipation: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    pub sup_phi: f64,
    pub sup_ric: f64,
    /// `sup|F|`, `F = log det h`.
    pub sup_f: f64,
    /// Spectral tail norm of `φ` above `N/4`.
    pub tail: f64,
    /// Step size of the last accepted step (0 before the first).
    pub dt: f64,
}

/// Current point of a trajectory together with cached geometry.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub phi: ScalarField,
    pub last_dt: f64,
    pub step_index: usize,
    pub integrals: GlobalIntegrals,
    metric: Arc<Metric>,
    /// `R − R̄` at `φ`.
    drift: ScalarField,
    splitting: f64,
    splitting_ref: (f64, f64),
    next_dt: f64,
    err_prev: f64,
}

impl FlowState {
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// `R_φ − R̄`, the velocity of the flow.
    pub fn velocity(&self) -> &ScalarField {
        &self.drift
    }

    pub fn splitting(&self) -> f64 {
        self.splitting
    }
}

/// Machine-readable reason a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum HaltCause {
    TEnd,
    Stationary { t: f64 },
    NonAdmissible { t: f64, min_eig: f64, index: usize },
    StepFailure { t: f64, reason: String },
}

impl HaltCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            HaltCause::TEnd => "t_end",
            HaltCause::Stationary { .. } => "stationary",
            HaltCause::NonAdmissible { .. } => "non_admissible",
            HaltCause::StepFailure { .. } => "step_failure",
        }
    }

    /// `true` for degeneration halts (the run did not reach `t_end`).
    pub fn is_failure(&self) -> bool {
        matches!(self, HaltCause::NonAdmissible { .. } | HaltCause::StepFailure { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub t: f64,
    pub cam: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonotonicityStats {
    pub steps: usize,
    pub violations: usize,
    /// Largest `C̃a(t⁺) − C̃a(t)` seen, relative to `C̃a(0)` (≤ 0 when monotone).
    pub worst_increase: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub steps: Vec<StepSample>,
    pub cause: HaltCause,
    pub final_state: FlowState,
    pub monotonicity: MonotonicityStats,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub rejected_steps: usize,
}

/// Integrator bound to one torus and configuration.
#[derive(Debug, Clone)]
pub struct Flow {
    torus: Torus,
    config: IntegratorConfig,
}

enum Rejection {
    Error,
    NonAdmissible { min_eig: f64, index: usize },
}

impl Flow {
    pub fn new(torus: Torus, config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Flow { torus, config })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Builds the state at `t = 0`; fails if `φ₀` is not admissible.
    pub fn initial_state(&self, phi: ScalarField) -> Result<FlowState> {
        let metric = Metric::assemble(&self.torus, &phi)?;
        let (drift, integrals) = velocity_of(&metric);
        let (lo, hi) = metric.equivalence_constants();
        let splitting = self.config.splitting.unwrap_or_else(|| auto_splitting(lo, hi));
        Ok(FlowState {
            t: 0.0,
            phi,
            last_dt: 0.0,
            step_index: 0,
            integrals,
            metric: Arc::new(metric),
            drift,
            splitting,
            splitting_ref: (lo, hi),
            next_dt: self.config.dt_init,
            err_prev: 1.0,
        })
    }

    /// One update of the configured scheme from `φ` with step `dt` and
    /// splitting constant `c`, no error control. `velocity` is `R − R̄` at `φ`.
    ///
    /// The result is filtered of Nyquist modes, which the discrete curvature
    /// leaves undamped.
    pub fn scheme_update(&self, phi: &ScalarField, velocity: &ScalarField, dt: f64, c: f64) -> Result<ScalarField> {
        let raw = self.raw_update(phi, velocity, dt, c)?;
        Ok(self.torus.drop_nyquist(&raw))
    }

    fn raw_update(&self, phi: &ScalarField, velocity: &ScalarField, dt: f64, c: f64) -> Result<ScalarField> {
        let t = &self.torus;
        match self.config.scheme {
            Scheme::ImexBe => {
                let rhs = axpy(phi, dt, &explicit_part(t, phi, velocity, c));
                t.biharmonic_shift_solve(&rhs, dt * c)
            }
            Scheme::ImexCn => {
                let half = 0.5 * dt * c;
                let rhs = axpy(phi, 0.5 * dt, &explicit_part(t, phi, velocity, c));
                let p = t.biharmonic_shift_solve(&rhs, half)?;
                let vp = self.velocity(&p)?;
                let gp = explicit_part(t, &p, &vp, c);
                let lhs = t.biharmonic_shift_apply(phi, -half);
                t.biharmonic_shift_solve(&axpy(&lhs, dt, &gp), half)
            }
            Scheme::ExplicitRk4 => {
                let k1 = velocity.clone();
                let k2 = self.velocity(&axpy(phi, 0.5 * dt, &k1))?;
                let k3 = self.velocity(&axpy(phi, 0.5 * dt, &k2))?;
                let k4 = self.velocity(&axpy(phi, dt, &k3))?;
                let v: Vec<f64> = (0..phi.values().len())
                    .map(|i| {
                        phi.values()[i]
                            + dt / 6.0
                                * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i])
                    })
                    .collect();
                ScalarField::new(phi.grid(), v)
            }
        }
    }

    /// `R_φ − R̄` at an arbitrary potential.
    pub fn velocity(&self, phi: &ScalarField) -> Result<ScalarField> {
        let m = Metric::assemble(&self.torus, phi)?;
        Ok(velocity_of(&m).0)
    }

    /// Advances by one accepted step, aiming for the proposed step size but
    /// never past `t_stop`. Rejected attempts halve `dt` down to `dt_min`.
    pub fn step(&self, state: &FlowState, t_stop: f64) -> Result<(FlowState, usize)> {
        let cfg = &self.config;
        let remaining = t_stop - state.t;
        if !(remaining > 0.0) {
            return Err(Error::InvalidArgument(format!("t_stop {t_stop} is not after t = {}", state.t)));
        }
        let proposal = if cfg.adaptive { state.next_dt } else { cfg.dt_init };
        let mut dt = proposal.min(cfg.dt_max).min(remaining);
        let floor = cfg.dt_min.min(remaining);
        let mut rejected = 0;
        loop {
            match self.attempt(state, dt) {
                Ok((phi, metric, err)) => {
                    let (drift, integrals) = velocity_of(&metric);
                    let t_new = if dt == remaining { t_stop } else { state.t + dt };
                    let p = cfg.scheme.order() as f64;
                    let (next_dt, err_prev) = if cfg.adaptive {
                        let e = err.max(1e-10);
                        let fac = 0.9 * e.powf(-0.7 / (p + 1.0)) * state.err_prev.powf(0.4 / (p + 1.0));
                        // a step shortened only to land on an output time keeps its proposal
                        let base = if dt < proposal.min(cfg.dt_max) && dt == remaining { proposal } else { dt };
                        ((base * fac.clamp(0.2, 5.0)).clamp(cfg.dt_min, cfg.dt_max), e)
                    } else {
                        (cfg.dt_init, 1.0)
                    };
                    let (lo, hi) = metric.equivalence_constants();
                    let (mut splitting, mut splitting_ref) = (state.splitting, state.splitting_ref);
                    if cfg.splitting.is_none() {
                        let moved = |a: f64, b: f64| (a - b).abs() > SPLITTING_REFRESH * b;
                        if moved(lo, splitting_ref.0) || moved(hi, splitting_ref.1) {
                            splitting = auto_splitting(lo, hi);
                            splitting_ref = (lo, hi);
                        }
                    }
                    let next = FlowState {
                        t: t_new,
                        phi,
                        last_dt: dt,
                        step_index: state.step_index + 1,
                        integrals,
                        metric: Arc::new(metric),
                        drift,
                        splitting,
                        splitting_ref,
                        next_dt,
                        err_prev,
                    };
                    return Ok((next, rejected));
                }
                Err(why) => {
                    rejected += 1;
                    if dt <= floor * (1.0 + 1e-12) {
                        return Err(match why {
                            Rejection::NonAdmissible { min_eig, index } => Error::NonAdmissible { min_eig, index },
                            Rejection::Error => Error::StepFailure {
                                t: state.t,
                                dt_min: cfg.dt_min,
                                reason: "local error above tolerance".into(),
                            },
                        });
                    }
                    dt = (0.5 * dt).max(floor);
                }
            }
        }
    }

    fn attempt(&self, state: &FlowState, dt: f64) -> std::result::Result<(ScalarField, Metric, f64), Rejection> {
        let cfg = &self.config;
        let c = state.splitting;
        let lift = |r: Result<ScalarField>| match r {
            Ok(v) => Ok(v),
            Err(Error::NonAdmissible { min_eig, index }) => Err(Rejection::NonAdmissible { min_eig, index }),
            Err(_) => Err(Rejection::Error),
        };
        let full = lift(self.scheme_update(&state.phi, &state.drift, dt, c))?;
        let (candidate, err) = if cfg.adaptive {
            let h1 = lift(self.scheme_update(&state.phi, &state.drift, 0.5 * dt, c))?;
            let v1 = lift(self.velocity(&h1))?;
            let h2 = lift(self.scheme_update(&h1, &v1, 0.5 * dt, c))?;
            let p = cfg.scheme.order();
            let diff = full.values().iter().zip(h2.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let est = diff / (2f64.powi(p) - 1.0);
            let scale = cfg.atol + cfg.rtol * h2.sup_norm();
            (h2, est / scale)
        } else {
            (full, 0.0)
        };
        if !(err <= 1.0) {
            return Err(Rejection::Error);
        }
        match Metric::assemble(&self.torus, &candidate) {
            Ok(m) => Ok((candidate, m, err)),
            Err(Error::NonAdmissible { min_eig, index }) => Err(Rejection::NonAdmissible { min_eig, index }),
            Err(_) => Err(Rejection::Error),
        }
    }

    /// Diagnostics of a state.
    pub fn record(&self, state: &FlowState) -> Result<DiagnosticsRecord> {
        let m = state.metric();
        let r = m.scalar_curvature();
        let dissipation = operators::dissipation(m, &r)?;
        let rep = monitor::report(m);
        let k_cut = self.torus.grid().points_per_axis() / 4;
        let tail = self.torus.spectral_tail_norm(&state.phi, k_cut)?;
        let g = &state.integrals;
        Ok(DiagnosticsRecord {
            t: state.t,
            ca: g.calabi,
            cam: g.modified_calabi,
            volume: g.volume,
            total_scalar: g.total_scalar,
            dissipation,
            lambda: rep.lambda,
            big_lambda: rep.big_lambda,
            sup_phi: rep.sup_phi,
            sup_ric: rep.sup_ric,
            sup_f: rep.sup_f.abs().max(rep.inf_f.abs()),
            tail,
            dt: state.last_dt,
        })
    }

    /// Integrates from `φ₀` to `t_end`, recording at the configured cadence.
    ///
    /// Degeneration (loss of admissibility, step size collapse) ends the run
    /// early with a final record and the cause; only an inadmissible `φ₀` or a
    /// solver failure in the diagnostics is an `Err`.
    pub fn run(&self, phi0: ScalarField) -> Result<RunOutcome> {
        let cfg = &self.config;
        let mut state = self.initial_state(phi0)?;
        let mut records = vec![self.record(&state)?];
        let cam0 = state.integrals.modified_calabi;
        let mut steps = vec![StepSample { t: 0.0, cam: cam0, dt: 0.0 }];
        let mut mono = MonotonicityStats { worst_increase: f64::NEG_INFINITY, ..Default::default() };
        let mut snapshot_times = cfg.snapshot_times.clone();
        snapshot_times.sort_by(f64::total_cmp);
        snapshot_times.dedup();
        let mut snapshots = Vec::new();
        let mut snap_i = 0;
        while snap_i < snapshot_times.len() && snapshot_times[snap_i] <= 0.0 {
            snapshots.push((0.0, state.phi.clone()));
            snap_i += 1;
        }
        let mut rejected_steps = 0;
        let mut record_k = 1usize;
        let record_time = |k: usize| (k as f64 * cfg.cadence).min(cfg.t_end);

        let cause = loop {
            if state.t >= cfg.t_end {
                break HaltCause::TEnd;
            }
            if state.integrals.modified_calabi < STATIONARY_RATIO * state.integrals.volume {
                // the state no longer moves: emit the remaining records unchanged
                let t_stat = state.t;
                let frozen = self.record(&state)?;
                loop {
                    let tr = record_time(record_k);
                    if tr > records.last().map_or(-1.0, |r| r.t) {
                        records.push(DiagnosticsRecord { t: tr, ..frozen });
                    }
                    if tr >= cfg.t_end {
                        break;
                    }
                    record_k += 1;
                }
                while snap_i < snapshot_times.len() && snapshot_times[snap_i] <= cfg.t_end {
                    snapshots.push((snapshot_times[snap_i], state.phi.clone()));
                    snap_i += 1;
                }
                state.t = cfg.t_end;
                break HaltCause::Stationary { t: t_stat };
            }
            let mut target = record_time(record_k);
            if snap_i < snapshot_times.len() {
                target = target.min(snapshot_times[snap_i]);
            }
            match self.step(&state, target) {
                Ok((next, rej)) => {
                    rejected_steps += rej;
                    let inc = next.integrals.modified_calabi - state.integrals.modified_calabi;
                    let rel = if cam0 > 0.0 { inc / cam0 } else { inc };
                    mono.steps += 1;
                    mono.worst_increase = mono.worst_increase.max(rel);
                    if inc > MONOTONE_SLACK * cam0 {
                        mono.violations += 1;
                    }
                    state = next;
                    steps.push(StepSample { t: state.t, cam: state.integrals.modified_calabi, dt: state.last_dt });
                    while snap_i < snapshot_times.len() && snapshot_times[snap_i] <= state.t {
                        snapshots.push((state.t, state.phi.clone()));
                        snap_i += 1;
                    }
                    if state.t >= record_time(record_k) {
                        records.push(self.record(&state)?);
                        record_k += 1;
                    }
                }
                Err(Error::NonAdmissible { min_eig, index }) => {
                    break HaltCause::NonAdmissible { t: state.t, min_eig, index };
                }
                Err(Error::StepFailure { t, reason, .. }) => {
                    break HaltCause::StepFailure { t, reason };
                }
                Err(e) => return Err(e),
            }
        };
        if cause.is_failure() && records.last().map(|r| r.t) != Some(state.t) {
            records.push(self.record(&state)?);
        }
        if mono.steps == 0 {
            mono.worst_increase = 0.0;
        }
        Ok(RunOutcome { records, steps, cause, final_state: state, monotonicity: mono, snapshots, rejected_steps })
    }
}

fn auto_splitting(lo: f64, hi: f64) -> f64 {
    (1.0 + SPLITTING_MARGIN) * (hi * hi).max(1.0 / (lo * lo))
}

fn velocity_of(m: &Metric) -> (ScalarField, GlobalIntegrals) {
    let r = m.scalar_curvature();
    let g = m.global_integrals(&r);
    (r.map(|v| v - g.mean_scalar), g)
}

/// `G(φ) = (R − R̄) + c·Δ_c²φ`.
fn explicit_part(t: &Torus, phi: &ScalarField, velocity: &ScalarField, c: f64) -> ScalarField {
    let shifted = t.biharmonic_shift_apply(phi, c);
    let v: Vec<f64> = (0..phi.values().len())
        .map(|i| velocity.values()[i] + shifted.values()[i] - phi.values()[i])
        .collect();
    ScalarField::from_vec_unchecked(phi.grid(), v)
}

fn axpy(x: &ScalarField, a: f64, y: &ScalarField) -> ScalarField {
    x.zip_map(y, |u, v| u + a * v)
}

/// Least-squares decay rate of `Ca` over records with `t ∈ [t0, t1]`:
/// returns `(δ, rms residual)` for `log Ca ≈ a − δt`.
pub fn decay_rate_fit(records: &[DiagnosticsRecord], window: (f64, f64)) -> Result<(f64, f64)> {
    let sel: Vec<(usize, &DiagnosticsRecord)> =
        records.iter().enumerate().filter(|(_, r)| r.t >= window.0 && r.t <= window.1).collect();
    if sel.len() < 10 {
        return Err(Error::InsufficientData(format!("{} records in window, need at least 10", sel.len())));
    }
    if let Some((i, r)) = sel.iter().find(|(_, r)| !(r.ca > 0.0)) {
        return Err(Error::NonPositiveEnergy { index: *i, value: r.ca });
    }
    let n = sel.len() as f64;
    let tm = sel.iter().map(|(_, r)| r.t).sum::<f64>() / n;
    let ym = sel.iter().map(|(_, r)| r.ca.ln()).sum::<f64>() / n;
    let sxy: f64 = sel.iter().map(|(_, r)| (r.t - tm) * (r.ca.ln() - ym)).sum();
    let sxx: f64 = sel.iter().map(|(_, r)| (r.t - tm) * (r.t - tm)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("window spans a single time".into()));
    }
    let slope = sxy / sxx;
    let res: f64 = sel
        .iter()
        .map(|(_, r)| {
            let e = r.ca.ln() - (ym + slope * (r.t - tm));
            e * e
        })
        .sum::<f64>();
    Ok((-slope, (res / n).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityDefect {
    pub defect: f64,
    /// Set when every energy and dissipation value is zero (flat run); the
    /// defect is then reported as 0.
    pub degenerate: bool,
}

/// `max |dC̃a/dt + 2·dissipation| / (1 + 2·dissipation)` over interior records,
/// with centered differences on uniformly spaced records.
pub fn dissipation_identity_check(records: &[DiagnosticsRecord]) -> Result<IdentityDefect> {
    if records.len() < 3 {
        return Err(Error::InsufficientData(format!("{} records, need at least 3", records.len())));
    }
    let h = records[1].t - records[0].t;
    if !(h > 0.0) || records.windows(2).any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.max(w[1].t.abs())) {
        return Err(Error::InsufficientData("records are not uniformly spaced".into()));
    }
    if records.iter().all(|r| r.cam == 0.0 && r.dissipation == 0.0) {
        return Ok(IdentityDefect { defect: 0.0, degenerate: true });
    }
    let defect = records
        .windows(3)
        .map(|w| {
            let d = (w[2].cam - w[0].cam) / (2.0 * h);
            (d + 2.0 * w[1].dissipation).abs() / (1.0 + 2.0 * w[1].dissipation)
        })
        .fold(0.0, f64::max);
    Ok(IdentityDefect { defect, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(n: usize, pts: usize) -> Torus {
        Torus::new(TorusGrid::new(n, pts).unwrap())
    }

    #[test]
    fn flat_is_fixed_for_every_scheme() {
        let t = torus(1, 16);
        for scheme in [Scheme::ImexBe, Scheme::ImexCn, Scheme::ExplicitRk4] {
            let cfg = IntegratorConfig { scheme, splitting: Some(1.0), ..Default::default() };
            let flow = Flow::new(t.clone(), cfg).unwrap();
            let zero = ScalarField::zeros(t.grid());
            let v = flow.velocity(&zero).unwrap();
            for dt in [1e-3, 0.1, 10.0] {
                let next = flow.scheme_update(&zero, &v, dt, 1.0).unwrap();
                assert_eq!(next.sup_norm(), 0.0);
            }
        }
    }

    #[test]
    fn backward_euler_linearized_update() {
        let t = torus(1, 32);
        let eps = 1e-6;
        let phi = ScalarField::from_fn(t.grid(), |x| eps * x[0].cos());
        for c in [1.0, 2.0] {
            let cfg = IntegratorConfig { scheme: Scheme::ImexBe, splitting: Some(c), ..Default::default() };
            let flow = Flow::new(t.clone(), cfg).unwrap();
            let v = flow.velocity(&phi).unwrap();
            let next = flow.scheme_update(&phi, &v, 1.0, c).unwrap();
            let factor = (1.0 + (c - 1.0) / 16.0) / (1.0 + c / 16.0);
            let expect = phi.map(|u| u * factor);
            let err = next.values().iter().zip(expect.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 10.0 * eps * eps, "c = {c}: {err}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        let bad = IntegratorConfig { dt_min: 1.0, dt_init: 0.1, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = IntegratorConfig { splitting: Some(0.0), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn exact_exponential_fit() {
        let records: Vec<DiagnosticsRecord> = (0..20)
            .map(|i| {
                let t = 0.5 * i as f64;
                DiagnosticsRecord {
                    t,
                    ca: (-t / 8.0).exp(),
                    cam: 0.0,
                    volume: 0.0,
                    total_scalar: 0.0,
                    dissipation: 0.0,
                    lambda: 1.0,
                    big_lambda: 1.0,
                    sup_phi: 0.0,
                    sup_ric: 0.0,
                    sup_f: 0.0,
                    tail: 0.0,
                    dt: 0.5,
                }
            })
            .collect();
        let (delta, res) = decay_rate_fit(&records, (0.0, 100.0)).unwrap();
        assert!((delta - 0.125).abs() < 1e-12);
        assert!(res < 1e-12);
        assert!(matches!(decay_rate_fit(&records[..5], (0.0, 100.0)), Err(Error::InsufficientData(_))));
        let mut bad = records.clone();
        bad[3].ca = 0.0;
        assert!(matches!(decay_rate_fit(&bad, (0.0, 100.0)), Err(Error::NonPositiveEnergy { index: 3, .. })));
    }

    #[test]
    fn random_spectrum_is_scaled_and_seeded() {
        let t = torus(1, 32);
        let a = random_spectrum(&t, 4.0, 7, 0.5).unwrap();
        let b = random_spectrum(&t, 4.0, 7, 0.5).unwrap();
        let c = random_spectrum(&t, 4.0, 8, 0.5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((t.laplace_flat(&a).unwrap().sup_norm() - 0.5).abs() < 1e-12);
        assert!(a.mean().abs() < 1e-14);
    }
}
