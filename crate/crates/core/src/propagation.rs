//! Wave packets, free evolution, single-pulse interactions and the
//! effective two-photon control operator.
//!
//! Packets are stored as coefficients in the eigenbasis of their manifold's
//! block, so free evolution is a phase per coefficient. Every interaction is
//! reduced to an instantaneous operator acting at the pulse center: the
//! first-order (or, for the control pulse, second-order) amplitude of the
//! field envelope is folded into the operator's matrix elements.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{site_projector, Block, DimerModel, DipoleSite, Direction, Manifold, PulseLabel, PulseSpec, PulseTrain, Site};
use crate::special::{faddeeva_real, GaussLegendre};
use crate::units::CM_TO_RAD_PER_FS;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum PulseMode {
    Impulsive,
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSettings {
    pub mode: PulseMode,
    /// Gauss–Legendre order for finite-pulse integrals.
    pub quadrature_order: usize,
    /// Half-width of a pulse window in envelope standard deviations.
    pub window_sigmas: f64,
    /// Keep the coupling J on inside pulse windows. Off by default: the
    /// one-exciton evolution during a pulse is then site-local.
    pub include_transfer_during_pulses: bool,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self { mode: PulseMode::Impulsive, quadrature_order: 64, window_sigmas: 6.0, include_transfer_during_pulses: false }
    }
}

impl PropagationSettings {
    pub fn validate(&self) -> Result<()> {
        if self.quadrature_order < 2 {
            return Err(invalid("quadrature_order", "must be >= 2"));
        }
        if !(self.window_sigmas > 0.0 && self.window_sigmas.is_finite()) {
            return Err(invalid("window_sigmas", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub manifold: Manifold,
    /// Coefficients in the eigenbasis of the manifold's block.
    pub coefficients: DVector<Complex64>,
    /// fs
    pub timestamp: f64,
    pub prefactor: Complex64,
}

impl WavePacket {
    /// Vibrationless ground state |0, 0⟩ (the lowest ground eigenstate).
    pub fn ground(model: &DimerModel, timestamp: f64) -> Self {
        let n = model.dimension(Manifold::Ground);
        let mut coefficients = DVector::zeros(n);
        coefficients[0] = Complex64::new(1.0, 0.0);
        Self { manifold: Manifold::Ground, coefficients, timestamp, prefactor: Complex64::new(1.0, 0.0) }
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.norm()
    }

    /// Prefactor folded into the coefficients.
    pub fn amplitudes(&self) -> DVector<Complex64> {
        &self.coefficients * self.prefactor
    }
}

/// exp(−iHt) on a packet, using the cached eigensystem.
pub fn evolve(model: &DimerModel, packet: &WavePacket, duration: f64) -> Result<WavePacket> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(invalid("duration", format!("must be finite and non-negative, got {duration}")));
    }
    let energies = &model.blocks.block(packet.manifold).energies;
    let mut out = packet.clone();
    if duration > 0.0 {
        for (c, e) in out.coefficients.iter_mut().zip(energies.iter()) {
            *c *= Complex64::from_polar(1.0, -e * CM_TO_RAD_PER_FS * duration);
        }
    }
    out.timestamp += duration;
    Ok(out)
}

pub fn evolve_to(model: &DimerModel, packet: &WavePacket, time: f64) -> Result<WavePacket> {
    let dt = time - packet.timestamp;
    if dt < 0.0 && dt > -1e-9 {
        let mut out = packet.clone();
        out.timestamp = time;
        return Ok(out);
    }
    evolve(model, packet, dt)
}

/// ⟨bra|ket⟩ including both prefactors.
pub fn overlap(bra: &WavePacket, ket: &WavePacket) -> Result<Complex64> {
    if bra.manifold != ket.manifold {
        return Err(Error::ManifoldMismatch { expected: bra.manifold, found: ket.manifold });
    }
    if (bra.timestamp - ket.timestamp).abs() > 1e-9 {
        return Err(Error::TimestampMismatch { bra: bra.timestamp, ket: ket.timestamp });
    }
    Ok(bra.coefficients.dotc(&ket.coefficients) * bra.prefactor.conj() * ket.prefactor)
}

/// Unit-area Gaussian envelope.
pub fn envelope(t: f64, sigma: f64) -> f64 {
    (-0.5 * (t / sigma).powi(2)).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Second-order kernel of two interactions with the same Gaussian envelope:
/// ∫dt₂ f(t₂) e^{−iαt₂} ∫_{−∞}^{t₂} dt₁ f(t₁) e^{iβt₁}, α and β in rad/fs.
pub fn two_photon_kernel(alpha: f64, beta: f64, sigma: f64) -> Complex64 {
    let diff = (alpha - beta) * sigma;
    0.5 * (-0.25 * diff * diff).exp() * faddeeva_real(-0.5 * (alpha + beta) * sigma)
}

fn complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// The basis a pulse acts in for one manifold, with the maps between it and
/// the packet eigenbasis. With J off during pulses, the one-exciton pulse
/// basis is the site-local eigenbasis: the pulse operator is the first-order
/// integral in the interaction picture of the local Hamiltonian about the
/// pulse center, applied instantaneously at that center.
struct PulseFrame {
    energies: DVector<f64>,
    /// packet eigenbasis → pulse basis
    enter: DMatrix<Complex64>,
    /// pulse basis → packet eigenbasis
    leave: DMatrix<Complex64>,
    /// Site projectors in the pulse basis (one-exciton manifold only).
    projectors: Option<[DMatrix<Complex64>; 2]>,
    /// Pulse-basis eigenvectors in the site/vibration basis.
    vectors: DMatrix<f64>,
}

impl PulseFrame {
    fn new(model: &DimerModel, manifold: Manifold, settings: &PropagationSettings) -> Self {
        let full: &Block = model.blocks.block(manifold);
        let local: &Block = model.blocks.pulse_block(manifold, settings.include_transfer_during_pulses);
        let (enter, leave) = if std::ptr::eq(full, local) {
            let n = full.dimension();
            (DMatrix::identity(n, n), DMatrix::identity(n, n))
        } else {
            let enter = complex(&local.vectors.tr_mul(&full.vectors));
            let leave = enter.adjoint();
            (enter, leave)
        };
        let projectors = (manifold == Manifold::OneExciton).then(|| {
            Site::BOTH.map(|s| complex(&(local.vectors.transpose() * site_projector(&model.params, s) * &local.vectors)))
        });
        Self { energies: local.energies.clone(), enter, leave, projectors, vectors: local.vectors.clone() }
    }
}

fn above(m: Manifold) -> Option<Manifold> {
    match m {
        Manifold::Ground => Some(Manifold::OneExciton),
        Manifold::OneExciton => Some(Manifold::TwoExciton),
        Manifold::TwoExciton => None,
    }
}

fn below(m: Manifold) -> Option<Manifold> {
    match m {
        Manifold::Ground => None,
        Manifold::OneExciton => Some(Manifold::Ground),
        Manifold::TwoExciton => Some(Manifold::OneExciton),
    }
}

pub fn target_manifold(from: Manifold, direction: Direction) -> Result<Manifold> {
    match direction {
        Direction::Up => above(from),
        Direction::Down => below(from),
    }
    .ok_or(Error::IncompatibleTransition { manifold: from, direction: direction.name() })
}

/// Dense map `from` → `to` through the total dipole, in the site basis.
fn dipole_matrix(model: &DimerModel, from: Manifold, direction: Direction) -> Result<DMatrix<f64>> {
    let m = match direction {
        Direction::Up => model.dipoles.up(from, DipoleSite::Total),
        Direction::Down => model.dipoles.down(from, DipoleSite::Total),
    };
    m.ok_or(Error::IncompatibleTransition { manifold: from, direction: direction.name() })
}

/// F(β) = ∫ f(τ) e^{iβτ} dτ over the pulse window for every pair of
/// target/source pulse-basis energies, by Gauss–Legendre quadrature, with
/// β = E_to − E_from ∓ Ω (absorption / emission).
fn spectral_weights(
    to: &DVector<f64>,
    from: &DVector<f64>,
    pulse: &PulseSpec,
    direction: Direction,
    settings: &PropagationSettings,
) -> DMatrix<Complex64> {
    let sigma = pulse.sigma();
    let w = settings.window_sigmas * sigma;
    let gl = GaussLegendre::new(settings.quadrature_order);
    let nodes: Vec<(f64, f64)> = gl.on_interval(-w, w).collect();
    let omega = match direction {
        Direction::Up => pulse.carrier_freq,
        Direction::Down => -pulse.carrier_freq,
    } * CM_TO_RAD_PER_FS;
    let a = DMatrix::from_fn(to.len(), nodes.len(), |k, i| Complex64::from_polar(1.0, to[k] * CM_TO_RAD_PER_FS * nodes[i].0));
    let b = DMatrix::from_fn(nodes.len(), from.len(), |i, j| {
        let (tau, wt) = nodes[i];
        Complex64::from_polar(wt * envelope(tau, sigma), -(from[j] * CM_TO_RAD_PER_FS + omega) * tau)
    });
    a * b
}

/// Instantaneous first-order operator of `pulse` in the packet eigenbases,
/// without the scalar −i(θ/2)e^{∓iφ}. `projector` selects a site projector
/// on the one-exciton side of the transition.
pub fn interaction_operator(
    model: &DimerModel,
    settings: &PropagationSettings,
    pulse: &PulseSpec,
    from: Manifold,
    direction: Direction,
    projector: Option<Site>,
) -> Result<DMatrix<Complex64>> {
    if pulse.label == PulseLabel::P {
        return Err(Error::ControlPulseAsFirstOrder);
    }
    let to = target_manifold(from, direction)?;
    let f_from = PulseFrame::new(model, from, settings);
    let f_to = PulseFrame::new(model, to, settings);
    let dip = dipole_matrix(model, from, direction)?;
    let mut core = complex(&(f_to.vectors.transpose() * dip * &f_from.vectors));
    if settings.mode == PulseMode::Finite {
        core.component_mul_assign(&spectral_weights(&f_to.energies, &f_from.energies, pulse, direction, settings));
    }
    if let Some(site) = projector {
        core = if to == Manifold::OneExciton {
            &f_to.projectors.as_ref().expect("one-exciton frame")[site.index()] * core
        } else if from == Manifold::OneExciton {
            core * &f_from.projectors.as_ref().expect("one-exciton frame")[site.index()]
        } else {
            unreachable!("every transition touches the one-exciton manifold")
        };
    }
    Ok(&f_to.leave * core * &f_from.enter)
}

/// The control pulse acting twice on a ground-manifold packet:
/// Σ_k μ↓|k⟩⟨k|Q μ↑ weighted by the exact two-photon Gaussian kernel,
/// with an optional site projector Q on the intermediate one-exciton state.
#[derive(Debug, Clone)]
pub struct EffectiveRamanOperator {
    pub operator: DMatrix<Complex64>,
    pub pulse: PulseSpec,
}

impl EffectiveRamanOperator {
    pub fn new(model: &DimerModel, settings: &PropagationSettings, pulse: &PulseSpec, projector: Option<Site>) -> Result<Self> {
        if pulse.label != PulseLabel::P {
            return Err(invalid("pulse", format!("effective control operator built from pulse {:?}", pulse.label)));
        }
        let ground = &model.blocks.ground;
        let frame = PulseFrame::new(model, Manifold::OneExciton, settings);
        let up = dipole_matrix(model, Manifold::Ground, Direction::Up)?;
        let mu_up = complex(&(frame.vectors.transpose() * &up * &ground.vectors));
        let mu_down = mu_up.transpose();
        let projected_up = match projector {
            Some(s) => &frame.projectors.as_ref().expect("one-exciton frame")[s.index()] * &mu_up,
            None => mu_up,
        };
        let sigma = pulse.sigma();
        let omega = pulse.carrier_freq;
        let ng = ground.dimension();
        let ne = frame.energies.len();
        let mut op = DMatrix::zeros(ng, ng);
        for jp in 0..ng {
            for j in 0..ng {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..ne {
                    let alpha = (frame.energies[k] - ground.energies[jp] - omega) * CM_TO_RAD_PER_FS;
                    let beta = (frame.energies[k] - ground.energies[j] - omega) * CM_TO_RAD_PER_FS;
                    acc += mu_down[(jp, k)] * two_photon_kernel(alpha, beta, sigma) * projected_up[(k, j)];
                }
                op[(jp, j)] = acc;
            }
        }
        Ok(Self { operator: op, pulse: pulse.clone() })
    }
}

/// −i(θ/2)e^{−iφ} for absorption, −i(θ/2)e^{+iφ} for emission.
pub fn interaction_scalar(pulse: &PulseSpec, direction: Direction) -> Complex64 {
    let sign = match direction {
        Direction::Up => -1.0,
        Direction::Down => 1.0,
    };
    -I * (0.5 * pulse.field_amplitude) * Complex64::from_polar(1.0, sign * pulse.phase)
}

/// −(θ_P/2)²; the two control phases cancel.
pub fn control_scalar(pulse: &PulseSpec) -> Complex64 {
    Complex64::new(-0.25 * pulse.field_amplitude * pulse.field_amplitude, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct OpKey {
    pulse: PulseLabel,
    from: Manifold,
    direction: Direction,
    projector: Option<Site>,
}

/// Precomputed pulse operators for one model and pulse shape set. The
/// operators depend on carriers and envelopes only; center times,
/// amplitudes and phases enter at application time.
pub struct EvalContext<'m> {
    pub model: &'m DimerModel,
    pub settings: PropagationSettings,
    shapes: [(f64, f64); 5],
    ops: HashMap<OpKey, DMatrix<Complex64>>,
    raman: [DMatrix<Complex64>; 3],
}

impl<'m> EvalContext<'m> {
    pub fn new(model: &'m DimerModel, train: &PulseTrain, settings: PropagationSettings) -> Result<Self> {
        settings.validate()?;
        train.validate()?;
        let mut ops = HashMap::new();
        let projectors = [None, Some(Site::Site1), Some(Site::Site2)];
        for label in [PulseLabel::A, PulseLabel::B, PulseLabel::C, PulseLabel::D] {
            let pulse = train.pulse(label);
            for (from, direction) in [
                (Manifold::Ground, Direction::Up),
                (Manifold::OneExciton, Direction::Down),
                (Manifold::OneExciton, Direction::Up),
                (Manifold::TwoExciton, Direction::Down),
            ] {
                for projector in projectors {
                    let m = interaction_operator(model, &settings, pulse, from, direction, projector)?;
                    ops.insert(OpKey { pulse: label, from, direction, projector }, m);
                }
            }
        }
        let p = train.pulse(PulseLabel::P);
        let raman = projectors.map(|s| EffectiveRamanOperator::new(model, &settings, p, s).map(|r| r.operator));
        let [r0, r1, r2] = raman;
        let shapes = train.pulses.clone().map(|p| (p.carrier_freq, p.envelope_fwhm));
        Ok(Self { model, settings, shapes, ops, raman: [r0?, r1?, r2?] })
    }

    /// Whether `train` has the carriers and envelopes this context was built for.
    pub fn matches(&self, train: &PulseTrain) -> bool {
        train.pulses.iter().zip(&self.shapes).all(|(p, &(c, w))| p.carrier_freq == c && p.envelope_fwhm == w)
    }

    fn check_shape(&self, pulse: &PulseSpec) -> Result<()> {
        let (c, w) = self.shapes[pulse.label.index()];
        if pulse.carrier_freq != c || pulse.envelope_fwhm != w {
            return Err(invalid("pulse", format!("pulse {:?} differs from the one the operators were built for", pulse.label)));
        }
        Ok(())
    }

    /// Moves the packet to the pulse center and applies one interaction.
    pub fn interact(&self, packet: &WavePacket, pulse: &PulseSpec, direction: Direction, projector: Option<Site>) -> Result<WavePacket> {
        self.check_shape(pulse)?;
        if pulse.label == PulseLabel::P {
            return Err(Error::ControlPulseAsFirstOrder);
        }
        let to = target_manifold(packet.manifold, direction)?;
        let key = OpKey { pulse: pulse.label, from: packet.manifold, direction, projector };
        let op = &self.ops[&key];
        let at = evolve_to(self.model, packet, pulse.center_time)?;
        Ok(WavePacket {
            manifold: to,
            coefficients: op * at.coefficients,
            timestamp: pulse.center_time,
            prefactor: at.prefactor * interaction_scalar(pulse, direction),
        })
    }

    /// Applies the control pulse pair to a ground-manifold packet.
    pub fn apply_control(&self, packet: &WavePacket, pulse: &PulseSpec, projector: Option<Site>) -> Result<WavePacket> {
        self.check_shape(pulse)?;
        if packet.manifold != Manifold::Ground {
            return Err(Error::ManifoldMismatch { expected: Manifold::Ground, found: packet.manifold });
        }
        let op = &self.raman[projector.map_or(0, |s| s.index() + 1)];
        let at = evolve_to(self.model, packet, pulse.center_time)?;
        Ok(WavePacket {
            manifold: Manifold::Ground,
            coefficients: op * at.coefficients,
            timestamp: pulse.center_time,
            prefactor: at.prefactor * control_scalar(pulse),
        })
    }
}

/// Applies the control operator outside a context.
pub fn apply_control(packet: &WavePacket, raman: &EffectiveRamanOperator) -> Result<WavePacket> {
    if packet.manifold != Manifold::Ground {
        return Err(Error::ManifoldMismatch { expected: Manifold::Ground, found: packet.manifold });
    }
    Ok(WavePacket {
        manifold: Manifold::Ground,
        coefficients: &raman.operator * &packet.coefficients,
        timestamp: packet.timestamp,
        prefactor: packet.prefactor * control_scalar(&raman.pulse),
    })
}
