//! Nonperturbative reference: the time-dependent Schrödinger equation for
//! the full three-manifold state under all five explicit pulse fields,
//! followed by phase cycling to isolate the signature components.
//!
//! The state is integrated in the interaction picture of the field-free
//! Hamiltonian (eigenbasis coefficients), where it is constant outside the
//! pulse windows; only the windows are integrated. A Dormand–Prince 5(4)
//! run with adaptive steps on a reference field configuration fixes the
//! step schedule, which is then replayed for every phase configuration so
//! that all runs share one discretisation.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{DimerModel, DipoleSite, Manifold, PulseLabel, PulseSpec, PulseTrain};
use crate::propagation::envelope;
use crate::signal::{phase_cycle, Components};
use crate::units::CM_TO_RAD_PER_FS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct OracleSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Envelope standard deviations integrated on each side of a pulse.
    pub window_sigmas: f64,
    pub max_steps_per_window: usize,
    /// Number of pair-global phases (per pulse pair) averaged over.
    pub global_phases: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-22, window_sigmas: 6.0, max_steps_per_window: 200_000, global_phases: 3 }
    }
}

/// Largest tolerated drift of the squared norm over one run.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Maps a dimensionless field scale s to pulse areas in the run's own
/// units (ħ = 1, |μ| = 1, frequencies in rad/fs): pulse X has peak
/// coupling s·κ_X rad/fs, hence area θ_X = s·κ_X·√(2π)·σ_X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldScale {
    pub scale: f64,
    /// κ for P, A, B, C, D.
    pub kappa: [f64; 5],
}

impl FieldScale {
    pub fn uniform(scale: f64) -> Self {
        Self { scale, kappa: [1.0; 5] }
    }

    pub fn area(&self, pulse: &PulseSpec) -> f64 {
        self.scale * self.kappa[pulse.label.index()] * (2.0 * PI).sqrt() * pulse.sigma()
    }

    /// `train` with its field amplitudes replaced by the scaled areas.
    pub fn apply(&self, train: &PulseTrain) -> PulseTrain {
        let mut t = train.clone();
        for p in t.pulses.iter_mut() {
            p.field_amplitude = self.area(p);
        }
        t
    }
}

/// Full state: coefficients of the ground, one-exciton and two-exciton
/// blocks in their eigenbases, in the interaction picture.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub ground: DVector<Complex64>,
    pub one: DVector<Complex64>,
    pub two: DVector<Complex64>,
    pub time: f64,
}

impl FullState {
    pub fn initial(model: &DimerModel, time: f64) -> Self {
        let mut ground = DVector::zeros(model.dimension(Manifold::Ground));
        ground[0] = Complex64::new(1.0, 0.0);
        Self {
            ground,
            one: DVector::zeros(model.dimension(Manifold::OneExciton)),
            two: DVector::zeros(model.dimension(Manifold::TwoExciton)),
            time,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.ground.norm_squared() + self.one.norm_squared() + self.two.norm_squared()
    }

    /// Total one-exciton population (invariant under field-free evolution).
    pub fn one_exciton_population(&self) -> f64 {
        self.one.norm_squared()
    }

    fn axpy(&self, h: f64, k: &[&Deriv], coeffs: &[f64]) -> Self {
        let mut out = self.clone();
        for (d, &c) in k.iter().zip(coeffs) {
            if c != 0.0 {
                let s = Complex64::new(h * c, 0.0);
                out.ground.axpy(s, &d.ground, Complex64::new(1.0, 0.0));
                out.one.axpy(s, &d.one, Complex64::new(1.0, 0.0));
                out.two.axpy(s, &d.two, Complex64::new(1.0, 0.0));
            }
        }
        out
    }
}

struct Deriv {
    ground: DVector<Complex64>,
    one: DVector<Complex64>,
    two: DVector<Complex64>,
}

/// A pulse as seen by the integrator.
#[derive(Debug, Clone)]
struct Field {
    center: f64,
    sigma: f64,
    omega: f64,
    half_area: f64,
    phase: f64,
}

impl Field {
    fn new(p: &PulseSpec) -> Self {
        Self {
            center: p.center_time,
            sigma: p.sigma(),
            omega: p.carrier_freq * CM_TO_RAD_PER_FS,
            half_area: 0.5 * p.field_amplitude,
            phase: p.phase,
        }
    }

    /// Absorption coefficient (θ/2) f(t − t_X) e^{−i(Ω(t − t_X) + φ)}.
    fn absorption(&self, t: f64) -> Complex64 {
        let tau = t - self.center;
        Complex64::from_polar(self.half_area * envelope(tau, self.sigma), -(self.omega * tau + self.phase))
    }
}

/// Field-free energies and dipole couplings in the eigenbases.
pub struct Tdse<'m> {
    model: &'m DimerModel,
    e_ground: DVector<f64>,
    e_one: DVector<f64>,
    e_two: DVector<f64>,
    /// one ← ground
    mu_1g: DMatrix<f64>,
    /// two ← one
    mu_21: DMatrix<f64>,
}

fn scaled_energies(block: &crate::model::Block) -> DVector<f64> {
    block.energies.map(|e| e * CM_TO_RAD_PER_FS)
}

impl<'m> Tdse<'m> {
    pub fn new(model: &'m DimerModel) -> Self {
        let b = &model.blocks;
        let up_g = model.dipoles.up(Manifold::Ground, DipoleSite::Total).expect("ground has an up map");
        let up_e = model.dipoles.up(Manifold::OneExciton, DipoleSite::Total).expect("one-exciton has an up map");
        Self {
            model,
            e_ground: scaled_energies(&b.ground),
            e_one: scaled_energies(&b.one_exciton),
            e_two: scaled_energies(&b.two_exciton),
            mu_1g: b.one_exciton.vectors.transpose() * up_g * &b.ground.vectors,
            mu_21: b.two_exciton.vectors.transpose() * up_e * &b.one_exciton.vectors,
        }
    }

    /// dc/dt = −i V_I(t) c with V(t) = a(t) μ↑ + a(t)* μ↓.
    fn rhs(&self, t: f64, c: &FullState, fields: &[Field]) -> Deriv {
        let a: Complex64 = fields.iter().map(|f| f.absorption(t)).sum();
        let rot = |e: &DVector<f64>, sign: f64| e.map(|x| Complex64::from_polar(1.0, sign * x * t));
        // Work in Schrödinger-picture amplitudes x = e^{−iEt} c.
        let xg = c.ground.component_mul(&rot(&self.e_ground, -1.0));
        let x1 = c.one.component_mul(&rot(&self.e_one, -1.0));
        let x2 = c.two.component_mul(&rot(&self.e_two, -1.0));
        let real_mul = |m: &DMatrix<f64>, v: &DVector<Complex64>, transpose: bool| -> DVector<Complex64> {
            let re = v.map(|z| z.re);
            let im = v.map(|z| z.im);
            let (r, i) = if transpose { (m.tr_mul(&re), m.tr_mul(&im)) } else { (m * re, m * im) };
            r.zip_map(&i, Complex64::new)
        };
        let minus_i = Complex64::new(0.0, -1.0);
        let vg = real_mul(&self.mu_1g, &x1, true) * (a.conj() * minus_i);
        let v1 = (real_mul(&self.mu_1g, &xg, false) * a + real_mul(&self.mu_21, &x2, true) * a.conj()) * minus_i;
        let v2 = real_mul(&self.mu_21, &x1, false) * (a * minus_i);
        Deriv {
            ground: vg.component_mul(&rot(&self.e_ground, 1.0)),
            one: v1.component_mul(&rot(&self.e_one, 1.0)),
            two: v2.component_mul(&rot(&self.e_two, 1.0)),
        }
    }

    pub fn model(&self) -> &DimerModel {
        self.model
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One DP5 step; returns the new state and the error estimate vector norm
/// (scaled, RMS).
fn dp5_step(tdse: &Tdse, y: &FullState, h: f64, fields: &[Field], tol: Option<(f64, f64)>) -> (FullState, f64) {
    let mut k: Vec<Deriv> = Vec::with_capacity(7);
    k.push(tdse.rhs(y.time, y, fields));
    for s in 1..7 {
        let refs: Vec<&Deriv> = k.iter().collect();
        let ys = y.axpy(h, &refs, &A[s][..s]);
        k.push(tdse.rhs(y.time + C[s] * h, &ys, fields));
    }
    let refs: Vec<&Deriv> = k.iter().collect();
    let mut next = y.axpy(h, &refs, &B5);
    next.time = y.time + h;
    let err = match tol {
        None => 0.0,
        Some((rtol, atol)) => {
            let diff: Vec<f64> = (0..7).map(|i| B5[i] - B4[i]).collect();
            let e = y.axpy(h, &refs, &diff);
            let mut acc = 0.0;
            let mut n = 0usize;
            for (err_blk, old, new) in [(&e.ground, &y.ground, &next.ground), (&e.one, &y.one, &next.one), (&e.two, &y.two, &next.two)] {
                for i in 0..err_blk.len() {
                    // e = y + hΣ(b5−b4)k, so the estimate is e − y
                    let delta = (err_blk[i] - old[i]).norm();
                    let scale = atol + rtol * old[i].norm().max(new[i].norm());
                    acc += (delta / scale).powi(2);
                    n += 1;
                }
            }
            (acc / n as f64).sqrt()
        }
    };
    (next, err)
}

/// Integration interval containing one or more pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub pulses: Vec<PulseLabel>,
}

/// Windows of ±`window_sigmas` around each pulse, merged where they overlap.
pub fn pulse_windows(train: &PulseTrain, settings: &OracleSettings) -> Vec<Window> {
    let mut out: Vec<Window> = Vec::new();
    for p in &train.pulses {
        let w = settings.window_sigmas * p.sigma();
        let (start, end) = (p.center_time - w, p.center_time + w);
        match out.last_mut() {
            Some(last) if start < last.end => {
                last.end = last.end.max(end);
                last.pulses.push(p.label);
            }
            _ => out.push(Window { start, end, pulses: vec![p.label] }),
        }
    }
    out
}

/// Accepted step sizes of each window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub windows: Vec<Window>,
    pub steps: Vec<Vec<f64>>,
}

impl StepSchedule {
    pub fn total_steps(&self) -> usize {
        self.steps.iter().map(|s| s.len()).sum()
    }
}

fn fields_of(train: &PulseTrain, window: &Window) -> Vec<Field> {
    window.pulses.iter().map(|&l| Field::new(train.pulse(l))).collect()
}

fn integrate_adaptive(tdse: &Tdse, y0: &FullState, window: &Window, fields: &[Field], settings: &OracleSettings) -> Result<(FullState, Vec<f64>)> {
    let mut y = y0.clone();
    y.time = window.start;
    let span = window.end - window.start;
    let mut h = span / 200.0;
    let mut steps = Vec::new();
    while y.time < window.end {
        if steps.len() >= settings.max_steps_per_window {
            return Err(Error::StepUnderflow { t: y.time });
        }
        let last = window.end - y.time <= h * (1.0 + 1e-12);
        let step = if last { window.end - y.time } else { h };
        let (next, err) = dp5_step(tdse, &y, step, fields, Some((settings.rtol, settings.atol)));
        if err <= 1.0 {
            y = next;
            if last {
                y.time = window.end;
            }
            steps.push(step);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
        if h < 1e-10 * span {
            return Err(Error::StepUnderflow { t: y.time });
        }
    }
    Ok((y, steps))
}

fn integrate_fixed(tdse: &Tdse, y0: &FullState, window: &Window, fields: &[Field], steps: &[f64]) -> FullState {
    let mut y = y0.clone();
    y.time = window.start;
    for &h in steps {
        y = dp5_step(tdse, &y, h, fields, None).0;
    }
    y.time = window.end;
    y
}

/// One adaptive run through all windows; returns the final state (at the
/// end of the last window) and the step schedule it chose.
pub fn integrate_tdse(tdse: &Tdse, train: &PulseTrain, settings: &OracleSettings) -> Result<(FullState, StepSchedule)> {
    let windows = pulse_windows(train, settings);
    let mut y = FullState::initial(tdse.model, windows[0].start);
    let mut steps = Vec::with_capacity(windows.len());
    for w in &windows {
        let (next, s) = integrate_adaptive(tdse, &y, w, &fields_of(train, w), settings)?;
        y = next;
        steps.push(s);
    }
    Ok((y, StepSchedule { windows, steps }))
}

/// Replays a frozen schedule with the given train (same centers and shapes).
pub fn integrate_with_schedule(tdse: &Tdse, train: &PulseTrain, schedule: &StepSchedule) -> FullState {
    let mut y = FullState::initial(tdse.model, schedule.windows[0].start);
    for (w, s) in schedule.windows.iter().zip(&schedule.steps) {
        y = integrate_fixed(tdse, &y, w, &fields_of(train, w), s);
    }
    y
}

/// Phase configuration of one run: phases of P, A, B, C, D.
type Phases = [f64; 5];

/// The control-off state and the control-induced difference δ = ψ_on − ψ_off.
/// Both obey the same linear equation once the control window has passed,
/// so they are propagated side by side and the population difference is
/// formed without cancelling two nearly equal numbers.
#[derive(Clone)]
struct Pair {
    off: FullState,
    delta: FullState,
}

impl Pair {
    fn signal(&self) -> f64 {
        2.0 * self.off.one.dotc(&self.delta.one).re + self.delta.one.norm_squared()
    }
}

/// Runs every phase configuration through the frozen schedule, sharing the
/// state after each window among runs whose phases agree so far. Returns
/// the control-induced one-exciton population change per run.
fn run_phase_tree(tdse: &Tdse, train: &PulseTrain, schedule: &StepSchedule, runs: &[Phases]) -> Result<Vec<f64>> {
    let first = &schedule.windows[0];
    if first.pulses != [PulseLabel::P] {
        return Err(invalid("train", "the control pulse window must not overlap the A pulse window"));
    }
    let start = FullState::initial(tdse.model, first.start);
    let on = integrate_fixed(tdse, &start, first, &fields_of(train, first), &schedule.steps[0]);
    let mut off = start;
    off.time = first.end;
    let mut delta = on;
    delta.ground[0] -= Complex64::new(1.0, 0.0);
    let mut out = vec![0.0; runs.len()];
    let idx: Vec<usize> = (0..runs.len()).collect();
    recurse(tdse, train, schedule, runs, 1, &Pair { off, delta }, &idx, &mut out);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tdse: &Tdse,
    train: &PulseTrain,
    schedule: &StepSchedule,
    runs: &[Phases],
    w: usize,
    y: &Pair,
    members: &[usize],
    out: &mut [f64],
) {
    if w == schedule.windows.len() {
        let v = y.signal();
        for &m in members {
            out[m] = v;
        }
        return;
    }
    let window = &schedule.windows[w];
    // group members by the phases of this window's pulses, first-seen order
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for &m in members {
        let key: Vec<f64> = window.pulses.iter().map(|l| runs[m][l.index()]).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(m),
            None => groups.push((key, vec![m])),
        }
    }
    for (key, group) in groups {
        let mut t = train.clone();
        for (l, ph) in window.pulses.iter().zip(&key) {
            t.pulse_mut(*l).phase = *ph;
        }
        let fields = fields_of(&t, window);
        let steps = &schedule.steps[w];
        let next = Pair {
            off: integrate_fixed(tdse, &y.off, window, &fields, steps),
            delta: integrate_fixed(tdse, &y.delta, window, &fields, steps),
        };
        recurse(tdse, train, schedule, runs, w + 1, &next, &group, out);
    }
}

/// Components extracted from the nonperturbative signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComponents {
    /// ++, +−, −+, −− of the control-induced part.
    pub components: Components,
    pub runs: usize,
    pub steps: usize,
    pub max_norm_defect: f64,
}

/// Phase-cycled extraction of the control-induced signature components at
/// one pulse train (amplitudes as given).
pub fn phase_cycle_extract(model: &DimerModel, train: &PulseTrain, settings: &OracleSettings) -> Result<OracleComponents> {
    if settings.global_phases == 0 {
        return Err(invalid("global_phases", "must be >= 1"));
    }
    train.validate()?;
    let tdse = Tdse::new(model);
    let mut reference = train.clone();
    for p in reference.pulses.iter_mut() {
        p.phase = 0.0;
    }
    let (final_state, schedule) = integrate_tdse(&tdse, &reference, settings)?;
    let norm_defect = (final_state.norm_sqr() - 1.0).abs();
    if norm_defect > NORM_TOLERANCE {
        return Err(Error::Invariant { name: "norm", detail: format!("norm drift {norm_defect:e} over the pulse train") });
    }

    let g = settings.global_phases;
    let mut runs: Vec<Phases> = Vec::new();
    for ga in 0..g {
        for gc in 0..g {
            let phi_a = 2.0 * PI * ga as f64 / g as f64;
            let phi_c = 2.0 * PI * gc as f64 / g as f64;
            for a in 0..4 {
                for b in 0..4 {
                    runs.push([0.0, phi_a, phi_a + a as f64 * FRAC_PI_2, phi_c, phi_c + b as f64 * FRAC_PI_2]);
                }
            }
        }
    }
    let diff = run_phase_tree(&tdse, &reference, &schedule, &runs)?;
    let mut grid = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (k, x) in diff.iter().enumerate() {
        let ab = k % 16;
        grid[ab / 4][ab % 4] += Complex64::new(x / (g * g) as f64, 0.0);
    }
    Ok(OracleComponents {
        components: phase_cycle(&grid),
        runs: runs.len(),
        steps: schedule.total_steps(),
        max_norm_defect: norm_defect,
    })
}

/// Detuning of the oracle's control pulse below the lowest one-exciton
/// transition (cm⁻¹); far enough that single-sided control absorption is
/// negligible next to the Raman process.
pub const ORACLE_CONTROL_DETUNING: f64 = 3000.0;

/// Default train with the given delays and the control pulse detuned by
/// [`ORACLE_CONTROL_DETUNING`].
pub fn oracle_train(model: &DimerModel, t_ba: f64, t_ca: f64, t_dc: f64) -> Result<PulseTrain> {
    let mut train = PulseTrain::default_for(&model.params).with_delays(t_ba, t_ca, t_dc)?;
    train.pulse_mut(PulseLabel::P).carrier_freq = model.lowest_one_exciton_transition() - ORACLE_CONTROL_DETUNING;
    train.validate()?;
    Ok(train)
}

/// One field scale at one delay point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub delays: (f64, f64, f64),
    pub scale: f64,
    /// ++ and +−.
    pub oracle: [Complex64; 2],
    pub perturbative: [Complex64; 2],
    pub rel_error: [f64; 2],
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<LadderRow>,
    /// Per delay point and component, the smaller of the observed orders
    /// log₂(e_k / e_{k+1}) along the ladder.
    pub orders: Vec<[f64; 2]>,
    pub min_order: f64,
    /// Largest relative error at the largest field scale.
    pub max_error_top: f64,
}

/// Compares oracle and perturbative ++ / +− components over a ladder of
/// field scales (largest first) at each delay point. The perturbative side
/// uses finite pulses with transfer during the pulses, like the oracle.
pub fn convergence_ladder(
    model: &DimerModel,
    points: &[(f64, f64, f64)],
    scales: &[f64],
    settings: &OracleSettings,
) -> Result<ConvergenceReport> {
    use crate::pathways::Signature;
    use crate::propagation::{EvalContext, PropagationSettings, PulseMode};
    use crate::signal::{component_at_direct, relative_difference, without_phases, Detection, Evaluator};
    use rayon::prelude::*;

    if scales.len() < 2 || scales.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(invalid("scales", "need at least two positive, strictly decreasing field scales"));
    }
    let jobs: Vec<((f64, f64, f64), f64)> = points.iter().flat_map(|&p| scales.iter().map(move |&s| (p, s))).collect();
    let prop = PropagationSettings { mode: PulseMode::Finite, include_transfer_during_pulses: true, ..Default::default() };
    let rows = jobs
        .par_iter()
        .map(|&(p, s)| -> Result<LadderRow> {
            let train = without_phases(&FieldScale::uniform(s).apply(&oracle_train(model, p.0, p.1, p.2)?));
            let orc = phase_cycle_extract(model, &train, settings)?;
            let ctx = EvalContext::new(model, &train, prop.clone())?;
            let ev = Evaluator::new(&ctx, Detection::TotalPopulation)?;
            let mut pert = [Complex64::new(0.0, 0.0); 2];
            for (k, sig) in ["++", "+-"].into_iter().enumerate() {
                pert[k] = component_at_direct(&ev, Signature::parse(sig)?, &train, false)?;
            }
            let oracle = [orc.components[0], orc.components[1]];
            Ok(LadderRow {
                delays: p,
                scale: s,
                oracle,
                perturbative: pert,
                rel_error: [relative_difference(oracle[0], pert[0]), relative_difference(oracle[1], pert[1])],
                steps: orc.steps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = scales.len();
    let mut orders = Vec::with_capacity(points.len());
    for chunk in rows.chunks(n) {
        let mut o = [f64::INFINITY; 2];
        for w in chunk.windows(2) {
            let ratio = w[0].scale / w[1].scale;
            for (k, o) in o.iter_mut().enumerate() {
                *o = o.min((w[0].rel_error[k] / w[1].rel_error[k]).ln() / ratio.ln());
            }
        }
        orders.push(o);
    }
    let min_order = orders.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let max_error_top = rows.chunks(n).flat_map(|c| c[0].rel_error).fold(0.0, f64::max);
    Ok(ConvergenceReport { rows, orders, min_order, max_error_top })
}
