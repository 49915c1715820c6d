//! Vibronic Frenkel-exciton dimer: Hamiltonian blocks, transition dipoles,
//! site projectors and the five-pulse field specification.
//!
//! Each monomer is a two-level system carrying one harmonic mode whose
//! excited surface is displaced. The vibrational basis is the product
//! number basis |n₁, n₂⟩ with index `n₁ · n + n₂`; the one-exciton block
//! stacks the site-1 and site-2 vibrational copies.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::units::envelope_bandwidth_cm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    Ground,
    OneExciton,
    TwoExciton,
}

impl Manifold {
    pub fn index(self) -> usize {
        match self {
            Manifold::Ground => 0,
            Manifold::OneExciton => 1,
            Manifold::TwoExciton => 2,
        }
    }
}

/// A manifold together with the size of its vibronic basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElectronicManifold {
    pub tag: Manifold,
    pub dimension: usize,
}

/// Monomer index within the one-exciton manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum Site {
    Site1,
    Site2,
}

impl Site {
    pub const BOTH: [Site; 2] = [Site::Site1, Site::Site2];

    pub fn index(self) -> usize {
        match self {
            Site::Site1 => 0,
            Site::Site2 => 1,
        }
    }

    pub fn other(self) -> Site {
        match self {
            Site::Site1 => Site::Site2,
            Site::Site2 => Site::Site1,
        }
    }
}

/// Which monomer dipole a transition uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DipoleSite {
    Site1,
    Site2,
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// Dimer parameters. Energies in cm⁻¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct DimerParams {
    pub site_energy_1: f64,
    pub site_energy_2: f64,
    pub coupling_j: f64,
    pub mode_freq_1: f64,
    pub mode_freq_2: f64,
    pub displacement_1: f64,
    pub displacement_2: f64,
    pub biexciton_shift: f64,
    pub dipole_1: f64,
    pub dipole_2: f64,
    pub n_vib_per_mode: usize,
}

impl Default for DimerParams {
    fn default() -> Self {
        Self {
            site_energy_1: 12500.0,
            site_energy_2: 12350.0,
            coupling_j: 100.0,
            mode_freq_1: 200.0,
            mode_freq_2: 200.0,
            displacement_1: 1.0,
            displacement_2: 1.0,
            biexciton_shift: 0.0,
            dipole_1: 1.0,
            dipole_2: 1.0,
            n_vib_per_mode: 8,
        }
    }
}

impl DimerParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("site_energy_1", self.site_energy_1),
            ("site_energy_2", self.site_energy_2),
            ("coupling_j", self.coupling_j),
            ("mode_freq_1", self.mode_freq_1),
            ("mode_freq_2", self.mode_freq_2),
            ("displacement_1", self.displacement_1),
            ("displacement_2", self.displacement_2),
            ("biexciton_shift", self.biexciton_shift),
            ("dipole_1", self.dipole_1),
            ("dipole_2", self.dipole_2),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if self.mode_freq_1 <= 0.0 {
            return Err(invalid("mode_freq_1", "must be positive"));
        }
        if self.mode_freq_2 <= 0.0 {
            return Err(invalid("mode_freq_2", "must be positive"));
        }
        if self.site_energy_1 <= 0.0 || self.site_energy_2 <= 0.0 {
            return Err(invalid("site_energy", "must be positive"));
        }
        if self.n_vib_per_mode < 2 {
            return Err(invalid("n_vib_per_mode", format!("must be >= 2, got {}", self.n_vib_per_mode)));
        }
        Ok(())
    }

    pub fn vib_dimension(&self) -> usize {
        self.n_vib_per_mode * self.n_vib_per_mode
    }

    pub fn dipole(&self, site: Site) -> f64 {
        match site {
            Site::Site1 => self.dipole_1,
            Site::Site2 => self.dipole_2,
        }
    }

    pub fn manifold(&self, tag: Manifold) -> ElectronicManifold {
        let nv = self.vib_dimension();
        let dimension = match tag {
            Manifold::OneExciton => 2 * nv,
            _ => nv,
        };
        ElectronicManifold { tag, dimension }
    }
}

/// A Hermitian block with its cached eigensystem (ascending energies).
#[derive(Debug, Clone)]
pub struct Block {
    pub hamiltonian: DMatrix<f64>,
    pub energies: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub(crate) vectors_c: DMatrix<Complex64>,
}

impl Block {
    pub fn new(hamiltonian: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(hamiltonian.clone());
        let n = hamiltonian.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (col, &i) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(i));
        }
        let vectors_c = vectors.map(|v| Complex64::new(v, 0.0));
        Self { hamiltonian, energies, vectors, vectors_c }
    }

    /// Block-diagonal assembly of independently diagonalised parts, keeping
    /// each part's eigenvectors inside its own index range.
    pub fn block_diagonal(parts: &[DMatrix<f64>]) -> Self {
        let n: usize = parts.iter().map(|p| p.nrows()).sum();
        let mut hamiltonian = DMatrix::zeros(n, n);
        let mut vectors = DMatrix::zeros(n, n);
        let mut energies = DVector::zeros(n);
        let mut off = 0;
        for p in parts {
            let m = p.nrows();
            let b = Block::new(p.clone());
            hamiltonian.view_mut((off, off), (m, m)).copy_from(p);
            vectors.view_mut((off, off), (m, m)).copy_from(&b.vectors);
            energies.rows_mut(off, m).copy_from(&b.energies);
            off += m;
        }
        let vectors_c = vectors.map(|v| Complex64::new(v, 0.0));
        Self { hamiltonian, energies, vectors, vectors_c }
    }

    pub fn dimension(&self) -> usize {
        self.energies.len()
    }

    /// Coefficients in the eigenbasis → basis-state amplitudes.
    pub fn to_basis(&self, eig: &DVector<Complex64>) -> DVector<Complex64> {
        &self.vectors_c * eig
    }

    /// Basis-state amplitudes → coefficients in the eigenbasis.
    pub fn to_eigen(&self, basis: &DVector<Complex64>) -> DVector<Complex64> {
        self.vectors_c.tr_mul(basis)
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianBlocks {
    pub ground: Block,
    pub one_exciton: Block,
    /// One-exciton block with the coupling switched off, diagonalised site by
    /// site (the first half of its eigenvectors lives on site 1); used inside
    /// pulse windows when transfer during the pulse is neglected.
    pub one_exciton_local: Block,
    pub two_exciton: Block,
}

impl HamiltonianBlocks {
    pub fn block(&self, manifold: Manifold) -> &Block {
        match manifold {
            Manifold::Ground => &self.ground,
            Manifold::OneExciton => &self.one_exciton,
            Manifold::TwoExciton => &self.two_exciton,
        }
    }

    /// Block governing evolution inside a pulse window.
    pub fn pulse_block(&self, manifold: Manifold, include_transfer: bool) -> &Block {
        match manifold {
            Manifold::OneExciton if !include_transfer => &self.one_exciton_local,
            m => self.block(m),
        }
    }
}

fn number_op(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { i as f64 } else { 0.0 })
}

/// b + b† in the truncated number basis.
fn position_op(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            (j as f64).sqrt()
        } else if j + 1 == i {
            (i as f64).sqrt()
        } else {
            0.0
        }
    })
}

/// ω (b - d)†(b - d) = ω (b†b - d(b + b†) + d²): the displaced oscillator with
/// its minimum at zero energy.
fn displaced_oscillator(n: usize, freq: f64, d: f64) -> DMatrix<f64> {
    let id = DMatrix::<f64>::identity(n, n);
    (number_op(n) - position_op(n) * d + id * (d * d)) * freq
}

fn vib_hamiltonian(params: &DimerParams, excited1: bool, excited2: bool) -> DMatrix<f64> {
    let n = params.n_vib_per_mode;
    let id = DMatrix::<f64>::identity(n, n);
    let d1 = if excited1 { params.displacement_1 } else { 0.0 };
    let d2 = if excited2 { params.displacement_2 } else { 0.0 };
    let h1 = displaced_oscillator(n, params.mode_freq_1, d1);
    let h2 = displaced_oscillator(n, params.mode_freq_2, d2);
    h1.kronecker(&id) + id.kronecker(&h2)
}

fn one_exciton_hamiltonian(params: &DimerParams, coupling: f64) -> DMatrix<f64> {
    let nv = params.vib_dimension();
    let id = DMatrix::<f64>::identity(nv, nv);
    let mut h = DMatrix::zeros(2 * nv, 2 * nv);
    let h1 = vib_hamiltonian(params, true, false) + &id * params.site_energy_1;
    let h2 = vib_hamiltonian(params, false, true) + &id * params.site_energy_2;
    h.view_mut((0, 0), (nv, nv)).copy_from(&h1);
    h.view_mut((nv, nv), (nv, nv)).copy_from(&h2);
    h.view_mut((0, nv), (nv, nv)).copy_from(&(&id * coupling));
    h.view_mut((nv, 0), (nv, nv)).copy_from(&(&id * coupling));
    h
}

fn local_one_exciton_block(params: &DimerParams) -> Block {
    let nv = params.vib_dimension();
    let id = DMatrix::<f64>::identity(nv, nv);
    Block::block_diagonal(&[
        vib_hamiltonian(params, true, false) + &id * params.site_energy_1,
        vib_hamiltonian(params, false, true) + &id * params.site_energy_2,
    ])
}

/// Builds the ground, one-exciton and two-exciton blocks (cm⁻¹) and caches
/// their eigensystems.
pub fn build_blocks(params: &DimerParams) -> Result<HamiltonianBlocks> {
    params.validate()?;
    let nv = params.vib_dimension();
    let id = DMatrix::<f64>::identity(nv, nv);
    let ground = vib_hamiltonian(params, false, false);
    let two = vib_hamiltonian(params, true, true)
        + id * (params.site_energy_1 + params.site_energy_2 + params.biexciton_shift);
    Ok(HamiltonianBlocks {
        ground: Block::new(ground),
        one_exciton: Block::new(one_exciton_hamiltonian(params, params.coupling_j)),
        one_exciton_local: local_one_exciton_block(params),
        two_exciton: Block::new(two),
    })
}

/// Condon transition dipoles. Down maps are the transposes of the up maps.
#[derive(Debug, Clone)]
pub struct DipoleMaps {
    /// `ground_to_site[s]`: Ground → OneExciton, excites monomer `s`.
    pub ground_to_site: [DMatrix<f64>; 2],
    /// `site_to_biexciton[s]`: OneExciton → TwoExciton, excites monomer `s`
    /// (acts on the component where the other monomer is excited).
    pub site_to_biexciton: [DMatrix<f64>; 2],
}

impl DipoleMaps {
    pub fn new(params: &DimerParams) -> Self {
        let nv = params.vib_dimension();
        let mk_up = |s: Site| {
            let mut m = DMatrix::zeros(2 * nv, nv);
            let off = s.index() * nv;
            for i in 0..nv {
                m[(off + i, i)] = params.dipole(s);
            }
            m
        };
        let mk_f = |s: Site| {
            let mut m = DMatrix::zeros(nv, 2 * nv);
            let off = s.other().index() * nv;
            for i in 0..nv {
                m[(i, off + i)] = params.dipole(s);
            }
            m
        };
        Self {
            ground_to_site: [mk_up(Site::Site1), mk_up(Site::Site2)],
            site_to_biexciton: [mk_f(Site::Site1), mk_f(Site::Site2)],
        }
    }

    /// Up map out of `from` through the selected dipole(s).
    pub fn up(&self, from: Manifold, site: DipoleSite) -> Option<DMatrix<f64>> {
        let pick = |maps: &[DMatrix<f64>; 2]| match site {
            DipoleSite::Site1 => maps[0].clone(),
            DipoleSite::Site2 => maps[1].clone(),
            DipoleSite::Total => &maps[0] + &maps[1],
        };
        match from {
            Manifold::Ground => Some(pick(&self.ground_to_site)),
            Manifold::OneExciton => Some(pick(&self.site_to_biexciton)),
            Manifold::TwoExciton => None,
        }
    }

    /// Down map out of `from`; the adjoint of the matching up map.
    pub fn down(&self, from: Manifold, site: DipoleSite) -> Option<DMatrix<f64>> {
        let below = match from {
            Manifold::Ground => return None,
            Manifold::OneExciton => Manifold::Ground,
            Manifold::TwoExciton => Manifold::OneExciton,
        };
        self.up(below, site).map(|m| m.transpose())
    }
}

/// Orthogonal projector onto one site's component of the one-exciton block.
pub fn site_projector(params: &DimerParams, site: Site) -> DMatrix<f64> {
    let nv = params.vib_dimension();
    let off = site.index() * nv;
    DMatrix::from_fn(2 * nv, 2 * nv, |i, j| {
        if i == j && i >= off && i < off + nv {
            1.0
        } else {
            0.0
        }
    })
}

/// In-place application of a site projector to one-exciton coefficients.
pub fn project_site(coeffs: &mut DVector<Complex64>, site: Site) {
    let nv = coeffs.len() / 2;
    let keep = site.index() * nv..(site.index() + 1) * nv;
    for (i, c) in coeffs.iter_mut().enumerate() {
        if !keep.contains(&i) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// Applies a bare transition dipole to a packet, moving it to the adjacent
/// manifold. The prefactor and timestamp are carried over unchanged.
pub fn apply_dipole(
    model: &DimerModel,
    packet: &crate::propagation::WavePacket,
    direction: Direction,
    site: DipoleSite,
) -> Result<crate::propagation::WavePacket> {
    let to = crate::propagation::target_manifold(packet.manifold, direction)?;
    let map = match direction {
        Direction::Up => model.dipoles.up(packet.manifold, site),
        Direction::Down => model.dipoles.down(packet.manifold, site),
    }
    .expect("target manifold exists");
    let basis = model.blocks.block(packet.manifold).to_basis(&packet.coefficients);
    let moved = map.map(|v| Complex64::new(v, 0.0)) * basis;
    Ok(crate::propagation::WavePacket {
        manifold: to,
        coefficients: model.blocks.block(to).to_eigen(&moved),
        ..packet.clone()
    })
}

/// Model parameters together with everything derived from them.
#[derive(Debug, Clone)]
pub struct DimerModel {
    pub params: DimerParams,
    pub blocks: HamiltonianBlocks,
    pub dipoles: DipoleMaps,
}

impl DimerModel {
    pub fn new(params: DimerParams) -> Result<Self> {
        let blocks = build_blocks(&params)?;
        let dipoles = DipoleMaps::new(&params);
        Ok(Self { params, blocks, dipoles })
    }

    pub fn dimension(&self, manifold: Manifold) -> usize {
        self.params.manifold(manifold).dimension
    }

    /// Lowest vertical transition from the vibrationless ground state into
    /// the one-exciton block (cm⁻¹).
    pub fn lowest_one_exciton_transition(&self) -> f64 {
        self.blocks.one_exciton.energies[0] - self.blocks.ground.energies[0]
    }

    /// Vibrationless ground state |0, 0⟩.
    pub fn ground_state(&self) -> DVector<Complex64> {
        let v = self.blocks.ground.vectors.column(0);
        let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
        DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(sign * x, 0.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum PulseLabel {
    P,
    A,
    B,
    C,
    D,
}

impl PulseLabel {
    pub const ORDER: [PulseLabel; 5] = [PulseLabel::P, PulseLabel::A, PulseLabel::B, PulseLabel::C, PulseLabel::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            PulseLabel::P => 'P',
            PulseLabel::A => 'A',
            PulseLabel::B => 'B',
            PulseLabel::C => 'C',
            PulseLabel::D => 'D',
        }
    }
}

/// One pulse. `field_amplitude` is the dimensionless pulse area θ: the
/// envelope has unit time integral and the coupling is (θ/2) f(t) μ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub label: PulseLabel,
    /// fs, relative to the center of pulse A
    pub center_time: f64,
    /// cm⁻¹
    pub carrier_freq: f64,
    /// fs
    pub envelope_fwhm: f64,
    pub field_amplitude: f64,
    /// rad
    pub phase: f64,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.envelope_fwhm > 0.0 && self.envelope_fwhm.is_finite()) {
            return Err(invalid("envelope_fwhm", format!("pulse {:?}: must be positive", self.label)));
        }
        for (name, v) in [
            ("center_time", self.center_time),
            ("carrier_freq", self.carrier_freq),
            ("field_amplitude", self.field_amplitude),
            ("phase", self.phase),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, format!("pulse {:?}: must be finite", self.label)));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        crate::units::fwhm_to_sigma(self.envelope_fwhm)
    }
}

/// Five pulses in the order P, A, B, C, D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct PulseTrain {
    pub pulses: [PulseSpec; 5],
}

impl PulseTrain {
    pub fn new(pulses: [PulseSpec; 5]) -> Result<Self> {
        let train = Self { pulses };
        train.validate()?;
        Ok(train)
    }

    pub fn validate(&self) -> Result<()> {
        for (p, expected) in self.pulses.iter().zip(PulseLabel::ORDER) {
            if p.label != expected {
                return Err(invalid("pulses", format!("expected {expected:?} in slot {}, found {:?}", expected.index(), p.label)));
            }
            p.validate()?;
        }
        for w in self.pulses.windows(2) {
            if w[0].center_time > w[1].center_time {
                return Err(invalid(
                    "center_time",
                    format!("pulses out of order: {:?} at {} fs after {:?} at {} fs", w[0].label, w[0].center_time, w[1].label, w[1].center_time),
                ));
            }
        }
        Ok(())
    }

    /// Checks that the control pulse sits below the lowest one-exciton
    /// vibronic transition by at least one envelope bandwidth.
    pub fn validate_control(&self, model: &DimerModel) -> Result<()> {
        let p = self.pulse(PulseLabel::P);
        let lowest = model.lowest_one_exciton_transition();
        let bw = envelope_bandwidth_cm(p.envelope_fwhm);
        if p.carrier_freq > lowest - bw {
            return Err(invalid(
                "carrier_freq",
                format!(
                    "control pulse carrier {} cm⁻¹ is not pre-resonant (lowest transition {lowest:.1} cm⁻¹, bandwidth {bw:.1} cm⁻¹)",
                    p.carrier_freq
                ),
            ));
        }
        Ok(())
    }

    pub fn pulse(&self, label: PulseLabel) -> &PulseSpec {
        &self.pulses[label.index()]
    }

    pub fn pulse_mut(&mut self, label: PulseLabel) -> &mut PulseSpec {
        &mut self.pulses[label.index()]
    }

    pub fn t_ba(&self) -> f64 {
        self.pulse(PulseLabel::B).center_time - self.pulse(PulseLabel::A).center_time
    }

    pub fn t_ca(&self) -> f64 {
        self.pulse(PulseLabel::C).center_time - self.pulse(PulseLabel::A).center_time
    }

    pub fn t_dc(&self) -> f64 {
        self.pulse(PulseLabel::D).center_time - self.pulse(PulseLabel::C).center_time
    }

    /// φ_BA and φ_DC.
    pub fn phase_differences(&self) -> (f64, f64) {
        (
            self.pulse(PulseLabel::B).phase - self.pulse(PulseLabel::A).phase,
            self.pulse(PulseLabel::D).phase - self.pulse(PulseLabel::C).phase,
        )
    }

    /// Moves pulses B, C, D to the given delays with A held at t = 0.
    pub fn with_delays(&self, t_ba: f64, t_ca: f64, t_dc: f64) -> Result<Self> {
        let mut t = self.clone();
        let shift = t.pulse(PulseLabel::A).center_time;
        t.pulse_mut(PulseLabel::P).center_time -= shift;
        t.pulse_mut(PulseLabel::A).center_time = 0.0;
        t.pulse_mut(PulseLabel::B).center_time = t_ba;
        t.pulse_mut(PulseLabel::C).center_time = t_ca;
        t.pulse_mut(PulseLabel::D).center_time = t_ca + t_dc;
        t.validate()?;
        Ok(t)
    }

    /// Time after which all envelopes have vanished.
    pub fn detection_time(&self) -> f64 {
        let fwhm_max = self.pulses.iter().map(|p| p.envelope_fwhm).fold(0.0, f64::max);
        self.pulse(PulseLabel::D).center_time + 5.0 * fwhm_max
    }

    /// Desk-scale default train: resonant 10 fs pulses A–D and a 25 fs
    /// control pulse two envelope bandwidths below the lowest site energy
    /// less |J|.
    pub fn default_for(params: &DimerParams) -> Self {
        let mean = 0.5 * (params.site_energy_1 + params.site_energy_2);
        let mk = |label, t, carrier, fwhm, amp| PulseSpec {
            label,
            center_time: t,
            carrier_freq: carrier,
            envelope_fwhm: fwhm,
            field_amplitude: amp,
            phase: 0.0,
        };
        let lowest = params.site_energy_1.min(params.site_energy_2) - params.coupling_j.abs();
        Self {
            pulses: [
                mk(PulseLabel::P, -120.0, lowest - 2.0 * envelope_bandwidth_cm(25.0), 25.0, 1.0),
                mk(PulseLabel::A, 0.0, mean, 10.0, 1.0),
                mk(PulseLabel::B, 60.0, mean, 10.0, 1.0),
                mk(PulseLabel::C, 200.0, mean, 10.0, 1.0),
                mk(PulseLabel::D, 260.0, mean, 10.0, 1.0),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(j: f64, d: f64) -> DimerParams {
        DimerParams {
            coupling_j: j,
            displacement_1: d,
            displacement_2: d,
            n_vib_per_mode: 5,
            ..DimerParams::default()
        }
    }

    fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / a.norm().max(1e-300)
    }

    #[test]
    fn blocks_are_symmetric_and_eigenvectors_orthogonal() {
        let b = build_blocks(&small(100.0, 1.0)).unwrap();
        for blk in [&b.ground, &b.one_exciton, &b.two_exciton, &b.one_exciton_local] {
            assert!(rel_frobenius(&blk.hamiltonian, &blk.hamiltonian.transpose()) < 1e-12);
            let n = blk.dimension();
            let g = blk.vectors.transpose() * &blk.vectors;
            assert!((g - DMatrix::<f64>::identity(n, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn manifold_dimensions() {
        let p = small(100.0, 1.0);
        assert_eq!(p.manifold(Manifold::Ground).dimension, 25);
        assert_eq!(p.manifold(Manifold::OneExciton).dimension, 50);
        assert_eq!(p.manifold(Manifold::TwoExciton).dimension, 25);
    }

    #[test]
    fn uncoupled_identical_monomers_double_the_site_spectrum() {
        let p = DimerParams {
            site_energy_2: 12500.0,
            ..small(0.0, 1.0)
        };
        let b = build_blocks(&p).unwrap();
        let mut site = Block::new(vib_hamiltonian(&p, true, false)).energies.iter().map(|e| e + 12500.0).collect::<Vec<_>>();
        site.extend(site.clone());
        site.sort_by(f64::total_cmp);
        for (a, b) in b.one_exciton.energies.iter().zip(&site) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn undisplaced_uncoupled_blocks_are_diagonal_harmonic() {
        let p = small(0.0, 0.0);
        let b = build_blocks(&p).unwrap();
        for blk in [&b.ground, &b.one_exciton, &b.two_exciton] {
            let h = &blk.hamiltonian;
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    if i != j {
                        assert_eq!(h[(i, j)], 0.0);
                    }
                }
            }
        }
        let g: Vec<f64> = b.ground.energies.iter().copied().collect();
        assert_eq!(g[0], 0.0);
        assert!(g.iter().all(|e| (e / 200.0 - (e / 200.0).round()).abs() < 1e-12));
    }

    #[test]
    fn projector_algebra() {
        let p = small(100.0, 1.0);
        let p1 = site_projector(&p, Site::Site1);
        let p2 = site_projector(&p, Site::Site2);
        let n = p1.nrows();
        assert_eq!(&p1 + &p2, DMatrix::identity(n, n));
        assert_eq!(&p1 * &p2, DMatrix::zeros(n, n));
        assert_eq!(&p1 * &p1, p1);
        assert_eq!(p1.transpose(), p1);
    }

    #[test]
    fn projected_eigenstate_overlaps_several_eigenstates() {
        // With J ≠ 0 the electronic part of an eigenstate is a superposition
        // of both sites, so P₁|ψ⟩ is not an eigenstate.
        let p = small(100.0, 0.0);
        let b = build_blocks(&p).unwrap();
        let psi = b.one_exciton.vectors.column(0).into_owned();
        let mut proj = &site_projector(&p, Site::Site1) * &psi;
        let norm = proj.norm();
        assert!(norm > 0.1 && norm < 0.99);
        proj /= norm;
        let c = b.one_exciton.vectors.transpose() * proj;
        let significant = c.iter().filter(|x| x.abs() > 1e-3).count();
        assert!(significant >= 2);
        // analytic 2×2 mixing: tan 2θ = 2J / (ε₁ - ε₂)
        let theta = 0.5 * (2.0 * 100.0f64).atan2(12500.0 - 12350.0);
        let expected = theta.sin().powi(2);
        assert!((norm * norm - expected).abs() < 1e-10, "{} vs {}", norm * norm, expected);
    }

    #[test]
    fn dipole_maps_are_adjoint_and_condon() {
        let p = DimerParams { dipole_1: 0.7, dipole_2: 1.3, ..small(50.0, 1.0) };
        let d = DipoleMaps::new(&p);
        for from in [Manifold::Ground, Manifold::OneExciton] {
            for s in [DipoleSite::Site1, DipoleSite::Site2, DipoleSite::Total] {
                let up = d.up(from, s).unwrap();
                let above = if from == Manifold::Ground { Manifold::OneExciton } else { Manifold::TwoExciton };
                let down = d.down(above, s).unwrap();
                assert_eq!(up.transpose(), down);
            }
        }
        // pure site map scales norms by the dipole weight
        let up = d.up(Manifold::Ground, DipoleSite::Site2).unwrap();
        let x = DVector::from_fn(25, |i, _| (i as f64 * 0.37).sin());
        assert!(((&up * &x).norm() - 1.3 * x.norm()).abs() < 1e-12);
        assert!(d.up(Manifold::TwoExciton, DipoleSite::Total).is_none());
        assert!(d.down(Manifold::Ground, DipoleSite::Total).is_none());
    }

    #[test]
    fn dipole_round_trip_and_adjointness() {
        use crate::propagation::WavePacket;
        let p = DimerParams { dipole_1: 1.0, dipole_2: 0.0, ..small(80.0, 1.0) };
        let m = DimerModel::new(p).unwrap();
        let g = WavePacket::ground(&m, 0.0);
        let e = apply_dipole(&m, &g, Direction::Up, DipoleSite::Total).unwrap();
        let basis = m.blocks.one_exciton.to_basis(&e.coefficients);
        assert!(basis.rows(25, 25).norm() < 1e-12);
        let back = apply_dipole(&m, &e, Direction::Down, DipoleSite::Site1).unwrap();
        assert!((back.coefficients - g.coefficients.clone()).norm() < 1e-12);
        assert!(apply_dipole(&m, &g, Direction::Down, DipoleSite::Total).is_err());

        let p = DimerParams { dipole_1: 0.6, dipole_2: 1.4, ..small(80.0, 1.0) };
        let m = DimerModel::new(p).unwrap();
        for (lo, hi) in [(Manifold::Ground, Manifold::OneExciton), (Manifold::OneExciton, Manifold::TwoExciton)] {
            for s in [DipoleSite::Site1, DipoleSite::Site2, DipoleSite::Total] {
                for i in (0..m.dimension(lo)).step_by(7) {
                    for j in (0..m.dimension(hi)).step_by(11) {
                        let basis = |mf: Manifold, k: usize| {
                            let mut c = DVector::zeros(m.dimension(mf));
                            c[k] = Complex64::new(1.0, 0.0);
                            WavePacket { manifold: mf, coefficients: c, timestamp: 0.0, prefactor: Complex64::new(1.0, 0.0) }
                        };
                        let x = basis(lo, i);
                        let y = basis(hi, j);
                        let ux = apply_dipole(&m, &x, Direction::Up, s).unwrap();
                        let dy = apply_dipole(&m, &y, Direction::Down, s).unwrap();
                        let lhs = ux.coefficients.dotc(&y.coefficients);
                        let rhs = x.coefficients.dotc(&dy.coefficients);
                        assert!((lhs - rhs).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn local_block_keeps_sites_apart() {
        let p = DimerParams { site_energy_2: 12500.0, ..small(100.0, 1.0) };
        let b = build_blocks(&p).unwrap();
        let v = &b.one_exciton_local.vectors;
        assert!(v.view((0, 25), (25, 25)).norm() == 0.0);
        assert!(v.view((25, 0), (25, 25)).norm() == 0.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut p = small(0.0, 0.0);
        p.n_vib_per_mode = 1;
        assert!(build_blocks(&p).is_err());
        let mut p = small(0.0, 0.0);
        p.coupling_j = f64::NAN;
        assert!(build_blocks(&p).is_err());
        let mut p = small(0.0, 0.0);
        p.mode_freq_1 = 0.0;
        assert!(build_blocks(&p).is_err());
    }

    #[test]
    fn train_ordering_and_control_detuning() {
        let params = small(100.0, 1.0);
        let model = DimerModel::new(params.clone()).unwrap();
        let train = PulseTrain::default_for(&params);
        train.validate().unwrap();
        train.validate_control(&model).unwrap();
        let mut bad = train.clone();
        bad.pulse_mut(PulseLabel::C).center_time = 10.0;
        assert!(bad.validate().is_err());
        let mut resonant = train.clone();
        resonant.pulse_mut(PulseLabel::P).carrier_freq = 12400.0;
        assert!(resonant.validate_control(&model).is_err());
        let moved = train.with_delays(30.0, 100.0, 20.0).unwrap();
        assert_eq!((moved.t_ba(), moved.t_ca(), moved.t_dc()), (30.0, 100.0, 20.0));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn blocks_and_projectors_for_arbitrary_dimers(
            j in -300.0f64..300.0,
            d1 in 0.0f64..1.5,
            d2 in 0.0f64..1.5,
            w1 in 100.0f64..400.0,
            n in 2usize..5,
        ) {
            let p = DimerParams { coupling_j: j, displacement_1: d1, displacement_2: d2, mode_freq_1: w1, n_vib_per_mode: n, ..DimerParams::default() };
            let b = build_blocks(&p).unwrap();
            for m in [Manifold::Ground, Manifold::OneExciton, Manifold::TwoExciton] {
                let blk = b.block(m);
                let v = &blk.vectors;
                let dim = blk.dimension();
                proptest::prop_assert!((v.transpose() * v - DMatrix::<f64>::identity(dim, dim)).norm() < 1e-10);
                let back = v * DMatrix::from_diagonal(&blk.energies) * v.transpose();
                proptest::prop_assert!((back - &blk.hamiltonian).norm() < 1e-9 * blk.hamiltonian.norm().max(1.0));
            }
            let (p1, p2) = (site_projector(&p, Site::Site1), site_projector(&p, Site::Site2));
            let dim = 2 * p.vib_dimension();
            proptest::prop_assert_eq!(&p1 + &p2, DMatrix::<f64>::identity(dim, dim));
            proptest::prop_assert_eq!(&p1 * &p1, p1.clone());
            proptest::prop_assert!((&p1 * &p2).iter().all(|&x| x == 0.0));
        }
    }
}
