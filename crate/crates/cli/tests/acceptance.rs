//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nlwpi_core::model::{DimerModel, DimerParams, PulseLabel, PulseTrain};
use nlwpi_core::oracle::{convergence_ladder, OracleSettings};
use nlwpi_core::pathways::{all_families, term_listing, ComponentClass, Context, Signature, TermListing};
use nlwpi_core::propagation::{EvalContext, PropagationSettings, PulseMode};
use nlwpi_core::signal::{
    assemble, assemble_complex, component_at_direct, pump_probe, relative_difference, Detection, Evaluator,
};
use nlwpi_core::model::Site;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn term_counts() -> Verdict {
    let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/golden/terms.json");
    let golden: TermListing = serde_json::from_str(&fs::read_to_string(golden_path).unwrap()).unwrap();
    let listing = term_listing(false).unwrap();
    let locked = ["DABPP|C", "DAB|CPP", "CABPP|D", "CAB|DPP"];
    let mut bad = Vec::new();
    for f in &listing.families {
        let expected = match (f.context, f.class) {
            (Context::PumpProbe, ComponentClass::Gsb) => 8,
            (Context::PumpProbe, _) => 32,
            (Context::Wpi, _) if locked.contains(&f.name.as_str()) => 16,
            (Context::Wpi, _) => 32,
        };
        if f.count != expected {
            bad.push(format!("{} has {} (expected {expected})", f.id, f.count));
        }
    }
    let golden_ok = listing == golden;
    verdict(
        bad.is_empty() && golden_ok && listing.pump_probe_total == 144,
        format!(
            "{} families, pump-probe total {}, golden match {golden_ok}{}",
            listing.families.len(),
            listing.pump_probe_total,
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    )
}

fn random_params(rng: &mut ChaCha8Rng) -> DimerParams {
    DimerParams {
        site_energy_1: rng.random_range(12200.0..12800.0),
        site_energy_2: rng.random_range(12100.0..12600.0),
        coupling_j: rng.random_range(-200.0..200.0),
        mode_freq_1: rng.random_range(150.0..300.0),
        mode_freq_2: rng.random_range(150.0..300.0),
        displacement_1: rng.random_range(0.3..1.2),
        displacement_2: rng.random_range(0.3..1.2),
        biexciton_shift: rng.random_range(-100.0..100.0),
        dipole_1: rng.random_range(0.5..1.5),
        dipole_2: rng.random_range(0.5..1.5),
        n_vib_per_mode: 6,
    }
}

fn random_train(rng: &mut ChaCha8Rng, params: &DimerParams) -> PulseTrain {
    let t_ba = rng.random_range(0.0..100.0);
    let t_ca = t_ba + rng.random_range(40.0..250.0);
    let t_dc = rng.random_range(0.0..100.0);
    let mut train = PulseTrain::default_for(params).with_delays(t_ba, t_ca, t_dc).unwrap();
    for p in train.pulses.iter_mut() {
        p.phase = rng.random_range(0.0..std::f64::consts::TAU);
        p.field_amplitude = rng.random_range(0.5..1.5);
    }
    train
}

fn settings_for(k: usize) -> PropagationSettings {
    match k % 3 {
        0 => PropagationSettings::default(),
        1 => PropagationSettings { mode: PulseMode::Finite, ..Default::default() },
        _ => PropagationSettings { mode: PulseMode::Finite, include_transfer_during_pulses: true, ..Default::default() },
    }
}

fn conjugation_and_realness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_conj, mut worst_real) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let params = random_params(&mut rng);
        let model = DimerModel::new(params.clone()).unwrap();
        let train = random_train(&mut rng, &params);
        let detection = [Detection::TotalPopulation, Detection::Site(Site::Site2), Detection::Exciton(0)][k % 3];
        let ctx = EvalContext::new(&model, &train, settings_for(k)).unwrap();
        let ev = Evaluator::new(&ctx, detection).unwrap();
        let mut c = [Complex64::new(0.0, 0.0); 4];
        for (slot, sig) in c.iter_mut().zip(Signature::ALL) {
            *slot = component_at_direct(&ev, sig, &train, false).unwrap();
        }
        worst_conj = worst_conj.max(relative_difference(c[3], c[0].conj())).max(relative_difference(c[2], c[1].conj()));
        let scale: f64 = c.iter().map(|z| z.norm()).sum();
        for _ in 0..10 {
            let (a, b) = (rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU));
            worst_real = worst_real.max(assemble_complex(a, b, &c).im.abs() / scale);
        }
    }
    verdict(
        worst_conj < 1e-12 && worst_real < 1e-12,
        format!("20 configurations: max conjugation deviation {worst_conj:.1e}, max imaginary residue {worst_real:.1e}"),
    )
}

fn completeness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = DimerModel::new(DimerParams { n_vib_per_mode: 6, ..DimerParams::default() }).unwrap();
    let base = PulseTrain::default_for(&model.params);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 0..5 {
        let t_ba = if k == 0 { 0.0 } else { rng.random_range(0.0..80.0) };
        let t_dc = if k == 0 { 0.0 } else { rng.random_range(0.0..80.0) };
        let t_ca = t_ba + rng.random_range(40.0..200.0);
        let ctx = EvalContext::new(&model, &base, settings_for(k)).unwrap();
        let ev = Evaluator::new(&ctx, Detection::TotalPopulation).unwrap();
        for f in all_families() {
            // pump-probe families are defined for coincident pulse pairs
            let train = if f.context == Context::PumpProbe {
                base.with_delays(0.0, t_ca, 0.0).unwrap()
            } else {
                base.with_delays(t_ba, t_ca, t_dc).unwrap()
            };
            let sum = ev.family_amplitude(&f, &train, false).unwrap().total;
            let whole = ev.unprojected_amplitude(&f, &train).unwrap();
            worst = worst.max(relative_difference(sum, whole));
            checked += 1;
        }
    }
    verdict(worst < 1e-12, format!("{checked} family evaluations at 5 delay points: max relative deviation {worst:.1e}"))
}

fn gsb_insensitivity() -> Verdict {
    let scan: Vec<f64> = (0..20).map(|k| 20.0 + 15.0 * k as f64).collect();
    let reference = DimerParams { n_vib_per_mode: 6, ..DimerParams::default() };
    let train = PulseTrain::default_for(&reference).with_delays(0.0, scan[0], 0.0).unwrap();
    let run = |j: f64| {
        let model = DimerModel::new(DimerParams { coupling_j: j, ..reference.clone() }).unwrap();
        let ctx = EvalContext::new(&model, &train, PropagationSettings::default()).unwrap();
        let ev = Evaluator::new(&ctx, Detection::TotalPopulation).unwrap();
        pump_probe(&ev, &train, &scan).unwrap()
    };
    let (a, b) = (run(100.0), run(0.0));
    let gsb_dev = (0..scan.len()).map(|k| relative_difference(a.gsb[k].into(), b.gsb[k].into())).fold(0.0, f64::max);
    let excited = |s: &nlwpi_core::signal::PumpProbeSignal, k: usize| Complex64::from(s.se[k] + s.esa[k]);
    let exc_dev = (0..scan.len()).map(|k| relative_difference(excited(&a, k), excited(&b, k))).fold(0.0, f64::max);
    let gsb_scale = a.gsb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    verdict(
        gsb_dev <= 1e-10 && exc_dev >= 1e-3 && gsb_scale > 0.0,
        format!("20-point scan: GSB max relative change {gsb_dev:.1e} (|GSB| up to {gsb_scale:.2e}), SE+ESA max relative change {exc_dev:.2e}"),
    )
}

fn oracle_equivalence() -> Verdict {
    let model = DimerModel::new(DimerParams { n_vib_per_mode: 6, ..DimerParams::default() }).unwrap();
    let points = [(60.0, 180.0, 60.0), (75.0, 210.0, 90.0), (110.0, 300.0, 55.0)];
    let report = convergence_ladder(&model, &points, &[1e-3, 5e-4, 2.5e-4], &OracleSettings::default()).unwrap();
    verdict(
        report.max_error_top < 1e-3 && report.min_order >= 1.8,
        format!(
            "3 delay points, ++ and +-: max relative error at scale 1e-3 {:.2e}, min observed order {:.2}",
            report.max_error_top, report.min_order
        ),
    )
}

fn scaling_laws() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = DimerParams { n_vib_per_mode: 6, ..DimerParams::default() };
    let model = DimerModel::new(params.clone()).unwrap();
    let mut worst = 0.0f64;
    for k in 0..3 {
        let train = random_train(&mut rng, &params);
        let ctx = EvalContext::new(&model, &train, settings_for(k)).unwrap();
        let ev = Evaluator::new(&ctx, Detection::TotalPopulation).unwrap();
        let s = |t: &PulseTrain| {
            let mut c = [Complex64::new(0.0, 0.0); 4];
            for (slot, sig) in c.iter_mut().zip(Signature::ALL) {
                *slot = component_at_direct(&ev, sig, t, false).unwrap();
            }
            let (a, b) = t.phase_differences();
            assemble(a, b, &c).unwrap()
        };
        let s0 = s(&train);
        for (label, factor) in [
            (PulseLabel::A, 2.0),
            (PulseLabel::B, 2.0),
            (PulseLabel::C, 2.0),
            (PulseLabel::D, 2.0),
            (PulseLabel::P, 4.0),
        ] {
            let mut t = train.clone();
            t.pulse_mut(label).field_amplitude *= 2.0;
            worst = worst.max(((s(&t) - factor * s0) / (factor * s0)).abs());
        }
    }
    verdict(worst < 1e-12, format!("3 configurations x 5 pulses: max relative deviation {worst:.1e}"))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run.log")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[model]\nn_vib_per_mode = 6\n\n[scan]\nt_ba = [0.0, 15.0, 30.0]\nt_dc = [0.0, 20.0]\n\n[pump_probe]\nt_ca = [80.0, 120.0, 160.0]\n";
    fs::write(tmp.path().join("run.toml"), cfg).unwrap();
    let mut compared = 0;
    for cmd in ["signal", "pump-probe", "terms"] {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let status = Command::new(env!("CARGO_BIN_EXE_nlwpi"))
                .args([cmd, "--config", "run.toml", "--threads", "4", "--out", "o"])
                .current_dir(tmp.path())
                .output()
                .unwrap()
                .status;
            if !status.success() {
                return verdict(false, format!("`nlwpi {cmd}` exited with {status}"));
            }
            runs.push(snapshot(&tmp.path().join("o")));
            fs::remove_dir_all(tmp.path().join("o")).unwrap();
        }
        if runs[0] != runs[1] {
            return verdict(false, format!("`nlwpi {cmd}` artifacts differ between runs"));
        }
        compared += runs[0].len();
    }
    verdict(true, format!("{compared} CSV/JSON/TOML artifacts byte-identical across two runs at 4 threads"))
}

/// Name, check, runtime limit in seconds.
type Criterion = (&'static str, fn() -> Verdict, f64);

fn main() {
    let criteria: [Criterion; 7] = [
        ("term-count reproduction", term_counts, 1.0),
        ("conjugation and realness", conjugation_and_realness, 60.0),
        ("projector completeness", completeness, 120.0),
        ("GSB J-insensitivity", gsb_insensitivity, 120.0),
        ("oracle equivalence", oracle_equivalence, 900.0),
        ("scaling laws", scaling_laws, 60.0),
        ("determinism", determinism, f64::INFINITY),
    ];
    let mut failed = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = check();
        let elapsed = started.elapsed();
        let timely = within(elapsed, *limit);
        let pass = v.pass && timely;
        if !pass {
            failed += 1;
        }
        let budget = if limit.is_finite() { format!(" (limit {limit} s)") } else { String::new() };
        println!(
            "criterion {}: {} {name} - {}; {:.2} s{budget}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
