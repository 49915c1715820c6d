//! Overlap families and their primed/unprimed term expansions.
//!
//! A family ⟨bra|ket⟩ is written with the interaction sequence of each side
//! read right-to-left in time order, so ⟨B|DCAPP⟩ has the control pair PP
//! acting first on the ket, followed by A, C and D; the bra carries B alone.
//! Each of the five label slots belongs to one pulse token (1 = A, 2 = B,
//! 3 = C, 4 = D, 5 = PP) and selects the site projector inserted next to
//! that interaction on its one-exciton side.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Direction, Manifold, PulseLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Token {
    A,
    B,
    C,
    D,
    PP,
}

impl Token {
    pub const ALL: [Token; 5] = [Token::A, Token::B, Token::C, Token::D, Token::PP];

    pub fn pulse(self) -> PulseLabel {
        match self {
            Token::A => PulseLabel::A,
            Token::B => PulseLabel::B,
            Token::C => PulseLabel::C,
            Token::D => PulseLabel::D,
            Token::PP => PulseLabel::P,
        }
    }

    pub fn multiplicity(self) -> usize {
        if self == Token::PP {
            2
        } else {
            1
        }
    }

    /// Label slot, 0-based (slot 1 of the listings is index 0).
    pub fn slot(self) -> usize {
        match self {
            Token::A => 0,
            Token::B => 1,
            Token::C => 2,
            Token::D => 3,
            Token::PP => 4,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Token::A => "A",
            Token::B => "B",
            Token::C => "C",
            Token::D => "D",
            Token::PP => "PP",
        }
    }
}

/// Phase signature: S^{s₁s₂} multiplies exp(i(s₁ φ_BA + s₂ φ_DC)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Signature {
    #[serde(rename = "++")]
    PlusPlus,
    #[serde(rename = "+-")]
    PlusMinus,
    #[serde(rename = "-+")]
    MinusPlus,
    #[serde(rename = "--")]
    MinusMinus,
}

impl Signature {
    pub const ALL: [Signature; 4] = [Signature::PlusPlus, Signature::PlusMinus, Signature::MinusPlus, Signature::MinusMinus];

    pub fn signs(self) -> (i32, i32) {
        match self {
            Signature::PlusPlus => (1, 1),
            Signature::PlusMinus => (1, -1),
            Signature::MinusPlus => (-1, 1),
            Signature::MinusMinus => (-1, -1),
        }
    }

    pub fn from_signs(s1: i32, s2: i32) -> Self {
        match (s1 > 0, s2 > 0) {
            (true, true) => Signature::PlusPlus,
            (true, false) => Signature::PlusMinus,
            (false, true) => Signature::MinusPlus,
            (false, false) => Signature::MinusMinus,
        }
    }

    pub fn conjugate(self) -> Self {
        let (a, b) = self.signs();
        Self::from_signs(-a, -b)
    }

    /// Net power of exp(iφ_X) that pulse `token` must contribute.
    pub fn net_phase(self, token: Token) -> i32 {
        let (s1, s2) = self.signs();
        match token {
            Token::A => -s1,
            Token::B => s1,
            Token::C => -s2,
            Token::D => s2,
            Token::PP => 0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Signature::PlusPlus => "++",
            Signature::PlusMinus => "+-",
            Signature::MinusPlus => "-+",
            Signature::MinusMinus => "--",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "++" | "pp" => Ok(Signature::PlusPlus),
            "+-" | "pm" => Ok(Signature::PlusMinus),
            "-+" | "mp" => Ok(Signature::MinusPlus),
            "--" | "mm" => Ok(Signature::MinusMinus),
            _ => Err(Error::InvalidParameter { name: "signature", reason: format!("unknown signature {s:?}") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bra,
    Ket,
}

impl Side {
    /// Direction of a single interaction of the given net phase on this side:
    /// absorption on the ket carries exp(-iφ), on the bra exp(+iφ).
    pub fn direction(self, net_phase: i32) -> Direction {
        match (self, net_phase < 0) {
            (Side::Ket, true) | (Side::Bra, false) => Direction::Up,
            _ => Direction::Down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Context {
    Wpi,
    PumpProbe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ComponentClass {
    Gsb,
    Esa,
    Se,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Unprimed,
    Primed,
}

impl Label {
    pub fn site(self) -> crate::model::Site {
        match self {
            Label::Unprimed => crate::model::Site::Site1,
            Label::Primed => crate::model::Site::Site2,
        }
    }

    fn bit(self) -> char {
        match self {
            Label::Unprimed => '0',
            Label::Primed => '1',
        }
    }
}

/// Listing orders, one label string per term (slot 1 first, '1' = primed).
const FREE32: [&str; 32] = [
    "00000", "10000", "11000", "10100", "10010", "11100", "10110", "11010", "11110", "01000", "00100", "00010", "01100",
    "00110", "01010", "01110", "00001", "10001", "11001", "10101", "10011", "11101", "10111", "11011", "11111", "01001",
    "00101", "00011", "01101", "00111", "01011", "01111",
];

const LOCK16: [&str; 16] = [
    "00000", "11000", "11100", "11010", "11110", "00100", "00010", "00110", "00001", "11001", "11101", "11011", "11111",
    "00101", "00011", "00111",
];

/// The ⟨DAB|CPP⟩⁺⁺ listing: LOCK16 plus one line that breaks the lock.
const LOCK16_WITH_STRAY: [&str; 17] = [
    "00000", "11000", "10100", "11100", "11010", "11110", "00100", "00010", "00110", "00001", "11001", "11101", "11011",
    "11111", "00101", "00011", "00111",
];
const STRAY_INDEX: usize = 2;

const GSB8: [&str; 8] = ["00000", "11000", "11110", "00110", "00001", "11001", "11111", "00111"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Listing {
    Free32,
    Lock16,
    Lock16WithStray,
    Gsb8,
}

impl Listing {
    fn lock_groups(self) -> Vec<Vec<usize>> {
        match self {
            Listing::Free32 => (0..5).map(|s| vec![s]).collect(),
            Listing::Lock16 | Listing::Lock16WithStray => vec![vec![0, 1], vec![2], vec![3], vec![4]],
            Listing::Gsb8 => vec![vec![0, 1], vec![2, 3], vec![4]],
        }
    }

    fn lines(self) -> &'static [&'static str] {
        match self {
            Listing::Free32 => &FREE32,
            Listing::Lock16 => &LOCK16,
            Listing::Lock16WithStray => &LOCK16_WITH_STRAY,
            Listing::Gsb8 => &GSB8,
        }
    }
}

struct Entry {
    name: &'static str,
    signature: Signature,
    context: Context,
    class: ComponentClass,
    listing: Listing,
}

const fn wpi(name: &'static str, signature: Signature, listing: Listing) -> Entry {
    Entry { name, signature, context: Context::Wpi, class: ComponentClass::Generic, listing }
}

const fn pp(name: &'static str, class: ComponentClass, listing: Listing) -> Entry {
    Entry { name, signature: Signature::PlusMinus, context: Context::PumpProbe, class, listing }
}

use Listing::*;
use Signature::{PlusMinus as PM, PlusPlus as PPS};

const TABLE: [Entry; 30] = [
    wpi("B|DCAPP", PPS, Free32),
    wpi("B|CDAPP", PPS, Free32),
    wpi("BPP|DCA", PPS, Free32),
    wpi("BPP|CDA", PPS, Free32),
    wpi("DCBPP|A", PPS, Free32),
    wpi("CDBPP|A", PPS, Free32),
    wpi("DCB|APP", PPS, Free32),
    wpi("CDB|APP", PPS, Free32),
    wpi("D|CBAPP", PPS, Free32),
    wpi("DPP|CBA", PPS, Free32),
    wpi("DABPP|C", PPS, Lock16),
    wpi("DAB|CPP", PPS, Lock16WithStray),
    wpi("B|DCAPP", PM, Free32),
    wpi("B|CDAPP", PM, Free32),
    wpi("BPP|DCA", PM, Free32),
    wpi("BPP|CDA", PM, Free32),
    wpi("DCBPP|A", PM, Free32),
    wpi("CDBPP|A", PM, Free32),
    wpi("DCB|APP", PM, Free32),
    wpi("CDB|APP", PM, Free32),
    wpi("C|DBAPP", PM, Free32),
    wpi("CPP|DBA", PM, Free32),
    wpi("CABPP|D", PM, Lock16),
    wpi("CAB|DPP", PM, Lock16),
    pp("C|DBAPP", ComponentClass::Gsb, Gsb8),
    pp("CPP|DBA", ComponentClass::Gsb, Gsb8),
    pp("B|CDAPP", ComponentClass::Esa, Free32),
    pp("BPP|CDA", ComponentClass::Esa, Free32),
    pp("B|DCAPP", ComponentClass::Se, Free32),
    pp("BPP|DCA", ComponentClass::Se, Free32),
];

/// Tokens of one side written right-to-left, returned in time order.
fn parse_side(s: &str) -> Result<Vec<Token>> {
    let mut written = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let t = match chars[i] {
            'A' => Token::A,
            'B' => Token::B,
            'C' => Token::C,
            'D' => Token::D,
            'P' if chars.get(i + 1) == Some(&'P') => {
                i += 1;
                Token::PP
            }
            _ => return Err(Error::UnknownFamily(s.to_string())),
        };
        written.push(t);
        i += 1;
    }
    written.reverse();
    Ok(written)
}

fn render_side(tokens: &[Token]) -> String {
    tokens.iter().rev().map(|t| t.symbol()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapFamily {
    /// Time-ordered bra interactions.
    pub bra: Vec<Token>,
    /// Time-ordered ket interactions.
    pub ket: Vec<Token>,
    pub signature: Signature,
    pub context: Context,
    pub class: ComponentClass,
    /// Slots (0-based) that must share one label.
    pub lock_groups: Vec<Vec<usize>>,
    /// Listing, one label string per term.
    listing: Vec<String>,
    /// Position of a listed line that violates the lock pattern, if any.
    stray: Option<usize>,
}

impl OverlapFamily {
    fn from_entry(e: &Entry) -> Self {
        let (bra, ket) = e.name.split_once('|').expect("table names contain one bar");
        Self {
            bra: parse_side(bra).expect("table names parse"),
            ket: parse_side(ket).expect("table names parse"),
            signature: e.signature,
            context: e.context,
            class: e.class,
            lock_groups: e.listing.lock_groups(),
            listing: e.listing.lines().iter().map(|s| s.to_string()).collect(),
            stray: (e.listing == Lock16WithStray).then_some(STRAY_INDEX),
        }
    }

    /// `B|DCAPP` style name.
    pub fn name(&self) -> String {
        format!("{}|{}", render_side(&self.bra), render_side(&self.ket))
    }

    /// Stable identifier, e.g. `++:B|DCAPP` or `pp-SE:B|DCAPP`.
    pub fn id(&self) -> String {
        match self.context {
            Context::Wpi => format!("{}:{}", self.signature.symbol(), self.name()),
            Context::PumpProbe => {
                let class = match self.class {
                    ComponentClass::Gsb => "GSB",
                    ComponentClass::Esa => "ESA",
                    ComponentClass::Se => "SE",
                    ComponentClass::Generic => "GEN",
                };
                format!("pp-{class}:{}", self.name())
            }
        }
    }

    pub fn side(&self, side: Side) -> &[Token] {
        match side {
            Side::Bra => &self.bra,
            Side::Ket => &self.ket,
        }
    }

    pub fn side_of(&self, token: Token) -> Side {
        if self.bra.contains(&token) {
            Side::Bra
        } else {
            Side::Ket
        }
    }

    pub fn free_slot_count(&self) -> usize {
        self.lock_groups.len()
    }

    pub fn expected_count(&self, include_stray: bool) -> usize {
        (1usize << self.lock_groups.len()) + usize::from(include_stray && self.stray.is_some())
    }

    pub fn has_stray_line(&self) -> bool {
        self.stray.is_some()
    }

    /// Direction of `token` on its side under this family's signature.
    pub fn direction(&self, token: Token) -> Direction {
        self.side_of(token).direction(self.signature.net_phase(token))
    }

    /// Manifolds visited on one side: entry `k` is the manifold after the
    /// first `k` interactions. The control pair leaves the manifold unchanged.
    pub fn manifold_walk(&self, side: Side) -> Result<Vec<Manifold>> {
        let mut level = 0i32;
        let mut walk = vec![Manifold::Ground];
        for (k, &t) in self.side(side).iter().enumerate() {
            if t == Token::PP {
                if k != 0 {
                    return Err(self.defect("control pair must be the first interaction on its side"));
                }
            } else {
                level += match self.direction(t) {
                    Direction::Up => 1,
                    Direction::Down => -1,
                };
            }
            walk.push(match level {
                0 => Manifold::Ground,
                1 => Manifold::OneExciton,
                2 => Manifold::TwoExciton,
                _ => return Err(self.defect(&format!("interaction {} leaves the three manifolds", t.symbol()))),
            });
        }
        Ok(walk)
    }

    fn defect(&self, reason: &str) -> Error {
        Error::ScheduleDefect { family: self.id(), reason: reason.to_string() }
    }

    /// Checks token conservation, the manifold walks and the lock pattern.
    pub fn validate(&self) -> Result<()> {
        let mut seen = [0usize; 5];
        for t in self.bra.iter().chain(&self.ket) {
            seen[t.slot()] += 1;
        }
        if seen != [1; 5] {
            return Err(self.defect("each of A, B, C, D, PP must appear exactly once"));
        }
        for side in [Side::Bra, Side::Ket] {
            let walk = self.manifold_walk(side)?;
            if walk.last() != Some(&Manifold::OneExciton) {
                return Err(self.defect("both sides must end in the one-exciton manifold"));
            }
        }
        let mut covered = [false; 5];
        for g in &self.lock_groups {
            for &s in g {
                if covered[s] {
                    return Err(self.defect("slot in two lock groups"));
                }
                covered[s] = true;
            }
        }
        if covered != [true; 5] {
            return Err(self.defect("lock groups must cover all five slots"));
        }
        Ok(())
    }

    fn respects_locks(&self, labels: &[Label; 5]) -> bool {
        self.lock_groups.iter().all(|g| g.iter().all(|&s| labels[s] == labels[g[0]]))
    }
}

impl fmt::Display for OverlapFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}|{}⟩{}", render_side(&self.bra), render_side(&self.ket), self.signature.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayTerm {
    pub family: String,
    pub labels: [Label; 5],
    pub term_index: usize,
    /// Set on a listed line that does not satisfy the lock pattern.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub anomalous: bool,
}

impl PathwayTerm {
    pub fn label_string(&self) -> String {
        self.labels.iter().map(|l| l.bit()).collect()
    }
}

fn parse_labels(s: &str) -> [Label; 5] {
    let mut out = [Label::Unprimed; 5];
    for (o, c) in out.iter_mut().zip(s.chars()) {
        *o = if c == '1' { Label::Primed } else { Label::Unprimed };
    }
    out
}

/// All 30 families: 12 for ++, 12 for +−, then the six pump-probe entries.
pub fn all_families() -> Vec<OverlapFamily> {
    TABLE.iter().map(OverlapFamily::from_entry).collect()
}

/// The twelve families of S^{++} or S^{+−}, in listing order.
pub fn families_for_signature(sig: Signature) -> Result<Vec<OverlapFamily>> {
    match sig {
        Signature::PlusPlus | Signature::PlusMinus => Ok(TABLE
            .iter()
            .filter(|e| e.context == Context::Wpi && e.signature == sig)
            .map(OverlapFamily::from_entry)
            .collect()),
        other => Err(Error::ConjugateSignature(format!(
            "S^{} is the complex conjugate of S^{}; it is not enumerated directly",
            other.symbol(),
            other.conjugate().symbol()
        ))),
    }
}

pub fn find_family(id: &str) -> Result<OverlapFamily> {
    all_families().into_iter().find(|f| f.id() == id).ok_or_else(|| Error::UnknownFamily(id.to_string()))
}

/// How a component is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentSource {
    Enumerated(Signature),
    ConjugateOf(Signature),
}

/// S^{−−} and S^{−+} are served as conjugates of S^{++} and S^{+−}.
pub fn conjugate_component(sig: Signature) -> ComponentSource {
    match sig {
        Signature::PlusPlus | Signature::PlusMinus => ComponentSource::Enumerated(sig),
        other => ComponentSource::ConjugateOf(other.conjugate()),
    }
}

/// ⟨Y|X⟩ for ⟨X|Y⟩ with the opposite signature; its amplitude is the complex
/// conjugate of the original's.
pub fn conjugate_family(f: &OverlapFamily) -> OverlapFamily {
    OverlapFamily {
        bra: f.ket.clone(),
        ket: f.bra.clone(),
        signature: f.signature.conjugate(),
        ..f.clone()
    }
}

/// Terms of a family in listing order. The line of the ⟨DAB|CPP⟩⁺⁺ listing
/// that breaks its lock pattern is kept only when `include_stray` is set.
pub fn expand(family: &OverlapFamily, include_stray: bool) -> Result<Vec<PathwayTerm>> {
    family.validate()?;
    let id = family.id();
    let mut terms = Vec::with_capacity(family.listing.len());
    for (k, line) in family.listing.iter().enumerate() {
        let labels = parse_labels(line);
        let anomalous = Some(k) == family.stray;
        if anomalous && !include_stray {
            continue;
        }
        if !anomalous && !family.respects_locks(&labels) {
            return Err(family.defect(&format!("listed line {line} violates the lock pattern")));
        }
        terms.push(PathwayTerm { family: id.clone(), labels, term_index: k, anomalous });
    }
    Ok(terms)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PumpProbeFamilies {
    pub gsb: (OverlapFamily, OverlapFamily),
    pub esa: (OverlapFamily, OverlapFamily),
    pub se: (OverlapFamily, OverlapFamily),
}

impl PumpProbeFamilies {
    pub fn pairs(&self) -> [(ComponentClass, &(OverlapFamily, OverlapFamily)); 3] {
        [(ComponentClass::Gsb, &self.gsb), (ComponentClass::Esa, &self.esa), (ComponentClass::Se, &self.se)]
    }
}

pub fn pump_probe_families() -> PumpProbeFamilies {
    let mut it = TABLE.iter().filter(|e| e.context == Context::PumpProbe).map(OverlapFamily::from_entry);
    let mut pair = || (it.next().expect("six entries"), it.next().expect("six entries"));
    let gsb = pair();
    let esa = pair();
    let se = pair();
    PumpProbeFamilies { gsb, esa, se }
}

/// Serializable listing of every family and its terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermListing {
    pub schema_version: u32,
    pub include_anomalous_term: bool,
    pub families: Vec<FamilyListing>,
    pub pump_probe_total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyListing {
    pub id: String,
    pub name: String,
    pub signature: Signature,
    pub context: Context,
    pub class: ComponentClass,
    pub count: usize,
    /// Label strings in listing order, slots A B C D PP, 1 = primed.
    pub terms: Vec<String>,
}

pub fn term_listing(include_stray: bool) -> Result<TermListing> {
    let mut families = Vec::new();
    let mut pump_probe_total = 0;
    for f in all_families() {
        let terms = expand(&f, include_stray)?;
        if f.context == Context::PumpProbe {
            pump_probe_total += terms.len();
        }
        families.push(FamilyListing {
            id: f.id(),
            name: f.name(),
            signature: f.signature,
            context: f.context,
            class: f.class,
            count: terms.len(),
            terms: terms.iter().map(PathwayTerm::label_string).collect(),
        });
    }
    Ok(TermListing { schema_version: crate::SCHEMA_VERSION, include_anomalous_term: include_stray, families, pump_probe_total })
}

/// Where a slot's site projector sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// On the one-exciton residence that this interaction opens.
    After,
    /// On the one-exciton residence that this interaction closes.
    Before,
    /// On the virtual one-exciton state between the two control interactions.
    InsideControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotBinding {
    pub token: Token,
    pub side: Side,
    pub placement: Placement,
    /// One-exciton residence: from this interaction (None = start) ...
    pub opened_by: Option<Token>,
    /// ... to this one (None = detection).
    pub closed_by: Option<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchedule {
    pub family: String,
    pub labels: [Label; 5],
    pub bindings: [SlotBinding; 5],
}

impl LabelSchedule {
    pub fn binding(&self, token: Token) -> &SlotBinding {
        &self.bindings[token.slot()]
    }
}

/// Binds each slot to the one-exciton residence interval its projector acts on.
pub fn label_schedule(family: &OverlapFamily, term: &PathwayTerm) -> Result<LabelSchedule> {
    family.validate()?;
    let mut bindings: [Option<SlotBinding>; 5] = [None; 5];
    for side in [Side::Bra, Side::Ket] {
        let tokens = family.side(side);
        let walk = family.manifold_walk(side)?;
        for (k, &t) in tokens.iter().enumerate() {
            let (before, after) = (walk[k], walk[k + 1]);
            let binding = if t == Token::PP {
                SlotBinding { token: t, side, placement: Placement::InsideControl, opened_by: Some(t), closed_by: Some(t) }
            } else {
                let (placement, opened_by, closed_by) = match (before, after) {
                    (Manifold::Ground, Manifold::OneExciton) | (Manifold::TwoExciton, Manifold::OneExciton) => {
                        (Placement::After, Some(t), tokens.get(k + 1).copied())
                    }
                    (Manifold::OneExciton, _) => {
                        (Placement::Before, if k == 0 { None } else { Some(tokens[k - 1]) }, Some(t))
                    }
                    _ => return Err(family.defect(&format!("slot {} never visits the one-exciton manifold", t.symbol()))),
                };
                SlotBinding { token: t, side, placement, opened_by, closed_by }
            };
            bindings[t.slot()] = Some(binding);
        }
    }
    // Locked slots must act within a single pulse instant: the same
    // coincident pulse pair.
    for g in &family.lock_groups {
        let pair = |t: Token| match t {
            Token::A | Token::B => 0,
            Token::C | Token::D => 1,
            Token::PP => 2,
        };
        let tokens: Vec<Token> = g.iter().map(|&s| Token::ALL[s]).collect();
        if tokens.iter().any(|&t| pair(t) != pair(tokens[0])) {
            return Err(family.defect("lock group spans different pulse pairs"));
        }
    }
    Ok(LabelSchedule {
        family: family.id(),
        labels: term.labels,
        bindings: bindings.map(|b| b.expect("token conservation checked")),
    })
}

/// Families of a signature re-derived from the interaction rules alone:
/// every split of {A, B, C, D, PP} into bra and ket sequences such that the
/// control pair acts first, the pulse order is P < A ≤ B < C ≤ D (A/B and
/// C/D may swap because they can coincide), each side climbs from the
/// ground state without leaving the three manifolds and ends in the
/// one-exciton manifold. Returned as sorted names.
pub fn derive_family_names(sig: Signature) -> Vec<String> {
    let orders: [[Token; 4]; 4] = [
        [Token::A, Token::B, Token::C, Token::D],
        [Token::B, Token::A, Token::C, Token::D],
        [Token::A, Token::B, Token::D, Token::C],
        [Token::B, Token::A, Token::D, Token::C],
    ];
    let mut names = Vec::new();
    for order in orders {
        for mask in 0u32..16 {
            for pp_on_ket in [false, true] {
                let mut bra = Vec::new();
                let mut ket = Vec::new();
                if pp_on_ket {
                    ket.push(Token::PP);
                } else {
                    bra.push(Token::PP);
                }
                for (i, &t) in order.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        ket.push(t);
                    } else {
                        bra.push(t);
                    }
                }
                // A swapped pair must sit on one side, adjacent, or the swap
                // is indistinguishable from the unswapped order.
                let swapped: Vec<(Token, Token)> = order
                    .windows(2)
                    .filter(|w| w[0] > w[1])
                    .map(|w| (w[0], w[1]))
                    .collect();
                let adjacent = |seq: &[Token], a: Token, b: Token| seq.windows(2).any(|w| w[0] == a && w[1] == b);
                if swapped.iter().any(|&(a, b)| !(adjacent(&bra, a, b) || adjacent(&ket, a, b))) {
                    continue;
                }
                let f = OverlapFamily {
                    bra,
                    ket,
                    signature: sig,
                    context: Context::Wpi,
                    class: ComponentClass::Generic,
                    lock_groups: Listing::Free32.lock_groups(),
                    listing: Vec::new(),
                    stray: None,
                };
                if f.validate().is_ok() {
                    names.push(f.name());
                }
            }
        }
    }
    names.sort();
    names.dedup();
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_order_and_first_entries() {
        let pp = families_for_signature(Signature::PlusPlus).unwrap();
        assert_eq!(pp.len(), 12);
        assert_eq!(pp[0].name(), "B|DCAPP");
        assert_eq!(pp[0].to_string(), "⟨B|DCAPP⟩++");
        assert_eq!(pp[0].ket, vec![Token::PP, Token::A, Token::C, Token::D]);
        let pm = families_for_signature(Signature::PlusMinus).unwrap();
        assert_eq!(pm[8].name(), "C|DBAPP");
    }

    #[test]
    fn conjugate_signatures_are_not_enumerated() {
        assert!(matches!(families_for_signature(Signature::MinusMinus), Err(Error::ConjugateSignature(_))));
        assert!(families_for_signature(Signature::MinusPlus).is_err());
        assert_eq!(conjugate_component(Signature::MinusMinus), ComponentSource::ConjugateOf(Signature::PlusPlus));
        assert_eq!(conjugate_component(Signature::MinusPlus), ComponentSource::ConjugateOf(Signature::PlusMinus));
    }

    #[test]
    fn every_family_conserves_tokens_and_walks_validly() {
        for f in all_families() {
            f.validate().unwrap_or_else(|e| panic!("{f}: {e}"));
            assert!((3..=5).contains(&f.free_slot_count()));
        }
    }

    #[test]
    fn table_matches_first_principles_derivation() {
        for sig in [Signature::PlusPlus, Signature::PlusMinus] {
            let mut table: Vec<String> = families_for_signature(sig).unwrap().iter().map(|f| f.name()).collect();
            table.sort();
            assert_eq!(table, derive_family_names(sig), "{sig:?}");
        }
    }

    #[test]
    fn expansions_are_cartesian_products_over_lock_groups() {
        for f in all_families() {
            let terms = expand(&f, false).unwrap();
            assert_eq!(terms.len(), 1 << f.lock_groups.len(), "{}", f.id());
            let mut seen: Vec<String> = terms.iter().map(|t| t.label_string()).collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), terms.len(), "duplicates in {}", f.id());
            assert!(terms.iter().all(|t| f.respects_locks(&t.labels)));
        }
    }

    #[test]
    fn stray_line_only_on_request() {
        let f = find_family("++:DAB|CPP").unwrap();
        assert_eq!(expand(&f, false).unwrap().len(), 16);
        let with = expand(&f, true).unwrap();
        assert_eq!(with.len(), 17);
        assert!(with[2].anomalous);
        assert_eq!(with[2].label_string(), "10100");
        assert_eq!(f.expected_count(true), 17);
    }

    #[test]
    fn locked_families() {
        let f = find_family("++:DABPP|C").unwrap();
        let terms = expand(&f, false).unwrap();
        assert_eq!(terms.len(), 16);
        assert!(terms.iter().all(|t| t.labels[0] == t.labels[1]));
    }

    #[test]
    fn pump_probe_counts() {
        let pp = pump_probe_families();
        let count = |f: &OverlapFamily| expand(f, false).unwrap().len();
        assert_eq!((count(&pp.gsb.0), count(&pp.gsb.1)), (8, 8));
        assert_eq!((count(&pp.se.0), count(&pp.se.1)), (32, 32));
        assert_eq!((count(&pp.esa.0), count(&pp.esa.1)), (32, 32));
        let total: usize = pp.pairs().iter().map(|(_, p)| count(&p.0) + count(&p.1)).sum();
        assert_eq!(total, 144);
        assert_eq!(pp.gsb.0.name(), "C|DBAPP");
        assert_eq!(pp.esa.1.name(), "BPP|CDA");
        assert!(pp.pairs().iter().all(|(_, p)| p.0.signature == Signature::PlusMinus));
    }

    #[test]
    fn gsb_schedule() {
        let f = pump_probe_families().gsb.0;
        let t = &expand(&f, false).unwrap()[0];
        let s = label_schedule(&f, t).unwrap();
        // ket: PP A↑ B↓ D↑ ; bra: C↑
        let a = s.binding(Token::A);
        assert_eq!((a.side, a.placement, a.closed_by), (Side::Ket, Placement::After, Some(Token::B)));
        assert_eq!(s.binding(Token::B).placement, Placement::Before);
        assert_eq!(s.binding(Token::C).side, Side::Bra);
        assert_eq!(s.binding(Token::D).closed_by, None);
        assert_eq!(s.binding(Token::PP).placement, Placement::InsideControl);
    }

    #[test]
    fn esa_schedule_places_projectors_below_the_biexciton() {
        let f = pump_probe_families().esa.0;
        let t = &expand(&f, false).unwrap()[0];
        let s = label_schedule(&f, t).unwrap();
        // ket: PP A↑ D↑ C↓ — D climbs to f, C returns
        assert_eq!(s.binding(Token::D).placement, Placement::Before);
        assert_eq!(s.binding(Token::C).placement, Placement::After);
    }

    #[test]
    fn conjugate_family_swaps_sides() {
        let f = &families_for_signature(Signature::PlusPlus).unwrap()[0];
        let c = conjugate_family(f);
        assert_eq!(c.name(), "DCAPP|B");
        assert_eq!(c.signature, Signature::MinusMinus);
        c.validate().unwrap();
        for t in Token::ALL {
            if t != Token::PP {
                assert_eq!(c.direction(t), f.direction(t));
            }
        }
    }
}
