//! Pathway sums: term and family amplitudes, the four phase-signature
//! components, the assembled interferogram and the pump-probe limit.
//!
//! Family amplitudes are evaluated with all pulse phases set to zero; the
//! phase dependence is restored by [`assemble`]. Each side of a family is
//! built once per label assignment of its own slots (sharing prefixes), so a
//! 32-term family costs a handful of packet propagations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{DimerModel, Manifold, PulseLabel, PulseTrain, Site};
use crate::pathways::{
    conjugate_family, expand, families_for_signature, pump_probe_families, ComponentClass, Label, OverlapFamily,
    PathwayTerm, Side, Signature, Token,
};
use crate::propagation::{evolve_to, EvalContext, WavePacket};

/// What the final bra–ket overlap measures in the one-exciton manifold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Total one-exciton population (the identity on the block).
    #[default]
    TotalPopulation,
    /// Population of one site.
    Site(Site),
    /// Population of one electronic exciton state: 0 = lower, 1 = upper.
    Exciton(usize),
}


/// The detection operator in the one-exciton eigenbasis, or None for the identity.
pub fn detection_operator(model: &DimerModel, detection: Detection) -> Result<Option<DMatrix<Complex64>>> {
    let p = &model.params;
    let nv = p.vib_dimension();
    let electronic = match detection {
        Detection::TotalPopulation => return Ok(None),
        Detection::Site(s) => {
            let mut e = nalgebra::Matrix2::zeros();
            e[(s.index(), s.index())] = 1.0;
            e
        }
        Detection::Exciton(k) => {
            if k > 1 {
                return Err(invalid("detection", format!("exciton index {k} out of range")));
            }
            let h = nalgebra::Matrix2::new(p.site_energy_1, p.coupling_j, p.coupling_j, p.site_energy_2);
            let eig = h.symmetric_eigen();
            let order = if eig.eigenvalues[0] <= eig.eigenvalues[1] { [0, 1] } else { [1, 0] };
            let v = eig.eigenvectors.column(order[k]).into_owned();
            v * v.transpose()
        }
    };
    let block = &model.blocks.one_exciton;
    let basis = DMatrix::from_fn(2 * nv, 2 * nv, |i, j| {
        if i % nv == j % nv {
            electronic[(i / nv, j / nv)]
        } else {
            0.0
        }
    });
    let eig = block.vectors.transpose() * basis * &block.vectors;
    Ok(Some(eig.map(|v| Complex64::new(v, 0.0))))
}

/// Product of the pairwise time-order weights along each side: 1 for
/// strictly increasing centers, ½ for coincident centers, 0 otherwise.
pub fn order_weight(family: &OverlapFamily, train: &PulseTrain) -> f64 {
    let mut w = 1.0;
    for side in [Side::Bra, Side::Ket] {
        for pair in family.side(side).windows(2) {
            let t0 = train.pulse(pair[0].pulse()).center_time;
            let t1 = train.pulse(pair[1].pulse()).center_time;
            w *= if t0 < t1 {
                1.0
            } else if t0 == t1 {
                0.5
            } else {
                0.0
            };
        }
    }
    w
}

/// All packets of one side at the detection time. With `labelled` the
/// packets are indexed by the labels of the side's slots (in time order,
/// bit k = the k-th token primed); otherwise a single unprojected packet.
fn side_packets(
    ctx: &EvalContext,
    family: &OverlapFamily,
    side: Side,
    train: &PulseTrain,
    labelled: bool,
    t_detect: f64,
) -> Result<Vec<WavePacket>> {
    let tokens = family.side(side);
    let start = WavePacket::ground(ctx.model, train.pulse(PulseLabel::P).center_time);
    let mut frontier = vec![start];
    for &t in tokens {
        let choices: &[Option<Site>] = if labelled { &[Some(Site::Site1), Some(Site::Site2)] } else { &[None] };
        let pulse = train.pulse(t.pulse());
        let mut next = Vec::with_capacity(frontier.len() * choices.len());
        // bit order: earlier tokens are the high bits
        for p in &frontier {
            for &proj in choices {
                let out = if t == Token::PP {
                    ctx.apply_control(p, pulse, proj)?
                } else {
                    ctx.interact(p, pulse, family.direction(t), proj)?
                };
                next.push(out);
            }
        }
        frontier = next;
    }
    frontier.into_iter().map(|p| evolve_to(ctx.model, &p, t_detect)).collect()
}

fn side_index(family: &OverlapFamily, side: Side, labels: &[Label; 5]) -> usize {
    family
        .side(side)
        .iter()
        .fold(0, |acc, t| (acc << 1) | usize::from(labels[t.slot()] == Label::Primed))
}

fn detect(bra: &WavePacket, ket: &WavePacket, op: Option<&DMatrix<Complex64>>) -> Result<Complex64> {
    if bra.manifold != ket.manifold {
        return Err(Error::ManifoldMismatch { expected: bra.manifold, found: ket.manifold });
    }
    if (bra.timestamp - ket.timestamp).abs() > 1e-9 {
        return Err(Error::TimestampMismatch { bra: bra.timestamp, ket: ket.timestamp });
    }
    let scalar = bra.prefactor.conj() * ket.prefactor;
    let inner = match op {
        Some(m) if bra.manifold == Manifold::OneExciton => bra.coefficients.dotc(&(m * &ket.coefficients)),
        _ => bra.coefficients.dotc(&ket.coefficients),
    };
    Ok(inner * scalar)
}

/// Evaluation of families against one pulse train.
pub struct Evaluator<'c, 'm> {
    pub ctx: &'c EvalContext<'m>,
    pub detection: Detection,
    detect_op: Option<DMatrix<Complex64>>,
}

/// Family amplitude with its per-term breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAmplitude {
    pub family: String,
    pub total: Complex64,
    pub terms: Vec<Complex64>,
}

impl<'c, 'm> Evaluator<'c, 'm> {
    pub fn new(ctx: &'c EvalContext<'m>, detection: Detection) -> Result<Self> {
        let detect_op = detection_operator(ctx.model, detection)?;
        Ok(Self { ctx, detection, detect_op })
    }

    fn check(&self, train: &PulseTrain) -> Result<()> {
        train.validate()?;
        if !self.ctx.matches(train) {
            return Err(invalid("pulses", "carriers or envelopes differ from the evaluation context"));
        }
        Ok(())
    }

    /// Amplitude of the listed terms of a family.
    pub fn family_terms(&self, family: &OverlapFamily, terms: &[PathwayTerm], train: &PulseTrain) -> Result<FamilyAmplitude> {
        self.check(train)?;
        let weight = order_weight(family, train);
        if weight == 0.0 {
            return Ok(FamilyAmplitude { family: family.id(), total: Complex64::new(0.0, 0.0), terms: vec![Complex64::new(0.0, 0.0); terms.len()] });
        }
        let t_detect = train.detection_time();
        let bra = side_packets(self.ctx, family, Side::Bra, train, true, t_detect)?;
        let ket = side_packets(self.ctx, family, Side::Ket, train, true, t_detect)?;
        let mut total = Complex64::new(0.0, 0.0);
        let mut values = Vec::with_capacity(terms.len());
        for term in terms {
            let b = &bra[side_index(family, Side::Bra, &term.labels)];
            let k = &ket[side_index(family, Side::Ket, &term.labels)];
            let v = detect(b, k, self.detect_op.as_ref())? * weight;
            total += v;
            values.push(v);
        }
        Ok(FamilyAmplitude { family: family.id(), total, terms: values })
    }

    /// Sum over the family's expansion.
    pub fn family_amplitude(&self, family: &OverlapFamily, train: &PulseTrain, include_stray: bool) -> Result<FamilyAmplitude> {
        let terms = expand(family, include_stray)?;
        self.family_terms(family, &terms, train)
    }

    /// The family with no site projectors at all.
    pub fn unprojected_amplitude(&self, family: &OverlapFamily, train: &PulseTrain) -> Result<Complex64> {
        self.check(train)?;
        let weight = order_weight(family, train);
        if weight == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let t_detect = train.detection_time();
        let bra = side_packets(self.ctx, family, Side::Bra, train, false, t_detect)?;
        let ket = side_packets(self.ctx, family, Side::Ket, train, false, t_detect)?;
        Ok(detect(&bra[0], &ket[0], self.detect_op.as_ref())? * weight)
    }

    /// One term on its own.
    pub fn term_amplitude(&self, family: &OverlapFamily, term: &PathwayTerm, train: &PulseTrain) -> Result<Complex64> {
        Ok(self.family_terms(family, std::slice::from_ref(term), train)?.total)
    }
}

/// Phase-free copy of a train.
pub fn without_phases(train: &PulseTrain) -> PulseTrain {
    let mut t = train.clone();
    for p in t.pulses.iter_mut() {
        p.phase = 0.0;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayGrid {
    pub t_ba: Vec<f64>,
    pub t_dc: Vec<f64>,
    pub t_ca: f64,
}

impl DelayGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_ba", &self.t_ba), ("t_dc", &self.t_dc)] {
            if v.is_empty() {
                return Err(invalid(name, "grid is empty"));
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(invalid(name, "delays must be finite and non-negative"));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(name, "grid must be strictly increasing"));
            }
        }
        if !(self.t_ca.is_finite() && self.t_ca >= 0.0) {
            return Err(invalid("t_ca", "must be finite and non-negative"));
        }
        if self.t_ba.last().copied().unwrap_or(0.0) > self.t_ca {
            return Err(invalid("t_ba", "pulse B may not follow pulse C"));
        }
        Ok(())
    }

    /// Grid points in row-major order (t_BA outer, t_DC inner).
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.t_ba.iter().flat_map(|&a| self.t_dc.iter().map(move |&d| (a, d))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalComponent {
    pub signature: Signature,
    /// Row-major over the grid points.
    pub values: Vec<Complex64>,
    /// Family id → values, in listing order.
    pub per_family: Vec<(String, Vec<Complex64>)>,
}

impl SignalComponent {
    pub fn conjugate(&self) -> Self {
        let conj = |v: &Vec<Complex64>| v.iter().map(|z| z.conj()).collect::<Vec<_>>();
        Self {
            signature: self.signature.conjugate(),
            values: conj(&self.values),
            per_family: self.per_family.iter().map(|(f, v)| (format!("conj({f})"), conj(v))).collect(),
        }
    }
}

/// Sum of `families` at one train; returns the total and per-family values.
pub fn families_sum(
    eval: &Evaluator,
    families: &[OverlapFamily],
    train: &PulseTrain,
    include_stray: bool,
) -> Result<(Complex64, Vec<Complex64>)> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut parts = Vec::with_capacity(families.len());
    for f in families {
        let a = eval.family_amplitude(f, train, include_stray)?.total;
        total += a;
        parts.push(a);
    }
    Ok((total, parts))
}

/// S^{sig} over the grid. `--` and `-+` are filled by conjugation.
pub fn component(
    eval: &Evaluator,
    sig: Signature,
    train: &PulseTrain,
    grid: &DelayGrid,
    include_stray: bool,
) -> Result<SignalComponent> {
    match sig {
        Signature::MinusMinus | Signature::MinusPlus => {
            return Ok(component(eval, sig.conjugate(), train, grid, include_stray)?.conjugate());
        }
        _ => {}
    }
    grid.validate()?;
    let families = families_for_signature(sig)?;
    let base = without_phases(train);
    let points = grid.points();
    let rows: Vec<Result<(Complex64, Vec<Complex64>)>> = points
        .par_iter()
        .map(|&(t_ba, t_dc)| {
            let t = base.with_delays(t_ba, grid.t_ca, t_dc)?;
            families_sum(eval, &families, &t, include_stray)
        })
        .collect();
    let mut values = Vec::with_capacity(points.len());
    let mut per_family: Vec<(String, Vec<Complex64>)> = families.iter().map(|f| (f.id(), Vec::new())).collect();
    for r in rows {
        let (total, parts) = r?;
        values.push(total);
        for (slot, v) in per_family.iter_mut().zip(parts) {
            slot.1.push(v);
        }
    }
    Ok(SignalComponent { signature: sig, values, per_family })
}

/// S^{sig} at one train, evaluating the conjugate signatures from their own
/// (side-swapped) families rather than by conjugation.
pub fn component_at_direct(eval: &Evaluator, sig: Signature, train: &PulseTrain, include_stray: bool) -> Result<Complex64> {
    let families = match sig {
        Signature::PlusPlus | Signature::PlusMinus => families_for_signature(sig)?,
        other => families_for_signature(other.conjugate())?.iter().map(conjugate_family).collect(),
    };
    Ok(families_sum(eval, &families, &without_phases(train), include_stray)?.0)
}

/// The four components at one point, ordered ++, +−, −+, −−.
pub type Components = [Complex64; 4];

pub fn signature_index(sig: Signature) -> usize {
    match sig {
        Signature::PlusPlus => 0,
        Signature::PlusMinus => 1,
        Signature::MinusPlus => 2,
        Signature::MinusMinus => 3,
    }
}

/// Relative imaginary residue tolerated by [`assemble`].
pub const REALNESS_TOLERANCE: f64 = 1e-12;

/// Complex sum Σ e^{i(s₁φ_BA + s₂φ_DC)} S^{s₁s₂}.
pub fn assemble_complex(phi_ba: f64, phi_dc: f64, c: &Components) -> Complex64 {
    Signature::ALL
        .iter()
        .map(|&s| {
            let (s1, s2) = s.signs();
            Complex64::from_polar(1.0, s1 as f64 * phi_ba + s2 as f64 * phi_dc) * c[signature_index(s)]
        })
        .sum()
}

/// Real interferogram value; errors when the imaginary residue exceeds
/// [`REALNESS_TOLERANCE`] relative to the component scale.
pub fn assemble(phi_ba: f64, phi_dc: f64, c: &Components) -> Result<f64> {
    let s = assemble_complex(phi_ba, phi_dc, c);
    let scale = c.iter().map(|z| z.norm()).sum::<f64>();
    if s.im.abs() > REALNESS_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Invariant {
            name: "realness",
            detail: format!("imaginary residue {:e} against component scale {:e}", s.im, scale),
        });
    }
    Ok(s.re)
}

/// Recovers the four components from signals on the quarter-period grid
/// φ = 0, π/2, π, 3π/2 in each pair phase; `signal[a][b]` is taken at
/// (φ_BA, φ_DC) = (aπ/2, bπ/2).
pub fn phase_cycle(signal: &[[Complex64; 4]; 4]) -> Components {
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for sig in Signature::ALL {
        let (s1, s2) = sig.signs();
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, row) in signal.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                let phase = -(s1 as f64 * a as f64 + s2 as f64 * b as f64) * std::f64::consts::FRAC_PI_2;
                acc += v * Complex64::from_polar(1.0, phase);
            }
        }
        out[signature_index(sig)] = acc / 16.0;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpProbeSignal {
    pub t_ca: Vec<f64>,
    pub gsb: Vec<f64>,
    pub esa: Vec<f64>,
    pub se: Vec<f64>,
    pub total: Vec<f64>,
    pub detection: Detection,
    /// Family id → complex amplitude per delay.
    pub per_family: Vec<(String, Vec<Complex64>)>,
}

/// Checks that A/B and C/D coincide.
pub fn check_pump_probe(train: &PulseTrain) -> Result<()> {
    if train.t_ba() != 0.0 || train.t_dc() != 0.0 {
        return Err(Error::NotPumpProbe(format!("t_BA = {} fs, t_DC = {} fs; both must be 0", train.t_ba(), train.t_dc())));
    }
    Ok(())
}

/// Θ^{GSB}, Θ^{ESA}, Θ^{SE} and their sum over a t_CA scan; each class is
/// 8·Re of its family pair.
pub fn pump_probe(eval: &Evaluator, train: &PulseTrain, t_ca: &[f64]) -> Result<PumpProbeSignal> {
    if t_ca.is_empty() || t_ca.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("t_ca", "scan must be non-empty with finite non-negative delays"));
    }
    check_pump_probe(train)?;
    let fams = pump_probe_families();
    let base = without_phases(train);
    let rows: Vec<Result<[(Complex64, Complex64); 3]>> = t_ca
        .par_iter()
        .map(|&t| {
            let tr = base.with_delays(0.0, t, 0.0)?;
            let mut out = [(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); 3];
            for (slot, (_, pair)) in out.iter_mut().zip(fams.pairs()) {
                *slot = (
                    eval.family_amplitude(&pair.0, &tr, false)?.total,
                    eval.family_amplitude(&pair.1, &tr, false)?.total,
                );
            }
            Ok(out)
        })
        .collect();
    let mut sig = PumpProbeSignal {
        t_ca: t_ca.to_vec(),
        gsb: Vec::new(),
        esa: Vec::new(),
        se: Vec::new(),
        total: Vec::new(),
        detection: eval.detection,
        per_family: fams
            .pairs()
            .iter()
            .flat_map(|(_, p)| [(p.0.id(), Vec::new()), (p.1.id(), Vec::new())])
            .collect(),
    };
    for r in rows {
        let r = r?;
        let theta = |(a, b): (Complex64, Complex64)| 8.0 * (a + b).re;
        let (g, e, s) = (theta(r[0]), theta(r[1]), theta(r[2]));
        sig.gsb.push(g);
        sig.esa.push(e);
        sig.se.push(s);
        sig.total.push(g + e + s);
        for (k, (a, b)) in r.iter().enumerate() {
            sig.per_family[2 * k].1.push(*a);
            sig.per_family[2 * k + 1].1.push(*b);
        }
    }
    Ok(sig)
}

impl PumpProbeSignal {
    pub fn class(&self, class: ComponentClass) -> &[f64] {
        match class {
            ComponentClass::Gsb => &self.gsb,
            ComponentClass::Esa => &self.esa,
            ComponentClass::Se => &self.se,
            ComponentClass::Generic => &self.total,
        }
    }
}

/// Relative difference |a − b| / max(|a|, |b|), 0 when both vanish.
pub fn relative_difference(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}
