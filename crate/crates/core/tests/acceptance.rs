//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits nonzero if any fails.
//!
//! Expensive criteria (5, 6) simulate the full preset at 2^16 symbols and
//! take several minutes on one core.

mod common;

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestError, TestRunner};
use rayon::ThreadPoolBuilder;
use satlink::channel::{
    ssfm_propagate, FiberSpec, PowerEvolution, PowerProfile, SsfmSteps, MANAKOV_FACTOR,
};
use satlink::cli::{constellation_rows, curve_rows, gray_violations, CurveRequest, CurveRow};
use satlink::config::{ExperimentConfig, LinkConfig};
use satlink::metrics::{acceptable_loss, acceptable_loss_for, propagate, random_frame, run_point};
use satlink::modem::{tx_waveform, DemapScratch, SoftDemapper};
use satlink::nlpr::{apply_rx_nlpr, apply_tx_nlpr, NlprSpec};
use satlink::shaping::{AmplitudeAlphabet, SphereCodebook};
use satlink::signal::{
    apply_filter_freq, matched_filter_and_decimate, upsample, Fft, FilterSpec, Symbols, Waveform,
};
use satlink::C64;

use common::{brute_force_codebook, max_abs_diff, preset_path, qam_bmd_gmi};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Outcome {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    // `cargo test -- --list` and filters from the harness protocol: nothing
    // to enumerate, so treat listing as a no-op.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria = [
        Criterion {
            id: 1,
            name: "lut sizes",
            budget: secs(1),
            run: lut_sizes,
        },
        Criterion {
            id: 2,
            name: "codebook enumeration",
            budget: secs(1),
            run: codebook_equivalence,
        },
        Criterion {
            id: 3,
            name: "ssfm analytic limits",
            budget: secs(30),
            run: ssfm_limits,
        },
        Criterion {
            id: 4,
            name: "linear gmi oracle",
            budget: secs(120),
            run: linear_gmi_oracle,
        },
        Criterion {
            id: 5,
            name: "ideal nlpr recovery",
            budget: secs(20 * 60),
            run: ideal_recovery,
        },
        Criterion {
            id: 6,
            name: "mode ordering and gains",
            budget: secs(15 * 60),
            run: mode_ordering,
        },
        Criterion {
            id: 7,
            name: "property suites",
            budget: secs(5 * 60),
            run: properties,
        },
        Criterion {
            id: 8,
            name: "determinism",
            budget: secs(5 * 60),
            run: determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let passed = outcome.passed && in_budget;
        failed += usize::from(!passed);
        println!(
            "criterion {} ({}): {} {} [{:.1} s{}]",
            c.id,
            c.name,
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            if in_budget {
                String::new()
            } else {
                format!(", over {} s budget", c.budget.as_secs())
            },
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn codebook(order: u32, k: usize) -> SphereCodebook {
    SphereCodebook::build(AmplitudeAlphabet::for_qam(order).unwrap(), 4, k).unwrap()
}

fn lut_sizes() -> Outcome {
    let a = codebook(64, 5).lut_size_bits();
    let b = codebook(256, 9).lut_size_bits();
    let ok = a == (256, 1280) && b == (6144, 36864);
    Outcome::new(ok, format!("64QAM tx/rx {a:?}, 256QAM tx/rx {b:?}"))
}

fn codebook_equivalence() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (order, levels, k) in [
        (64u32, vec![1u16, 3, 5, 7], 5usize),
        (256, (0..8).map(|i| 2 * i + 1).collect(), 9),
    ] {
        let cb = codebook(order, k);
        let oracle = brute_force_codebook(&levels, 4, k);
        let same = cb.len() == oracle.len()
            && oracle
                .iter()
                .enumerate()
                .all(|(i, b)| cb.entry(i) == b.as_slice());
        ok &= same;
        details.push(format!(
            "{order}QAM k={k}: {} blocks {}",
            cb.len(),
            if same { "equal" } else { "differ" }
        ));
    }
    Outcome::new(ok, details.join("; "))
}

fn relative_rms(a: &Waveform, b: &Waveform) -> f64 {
    let diff: f64 = a
        .pol_x()
        .iter()
        .zip(b.pol_x())
        .chain(a.pol_y().iter().zip(b.pol_y()))
        .map(|(p, q)| (p - q).norm_sqr())
        .sum();
    (diff / b.energy()).sqrt()
}

/// Preset TX waveform (shaped 256QAM, band-limited DAC).
fn preset_waveform(n_symbols: usize, seed: u64) -> Waveform {
    let cfg = LinkConfig::paper_default();
    let frame = random_frame(&cfg, n_symbols, seed).unwrap();
    tx_waveform(&frame, &cfg.tx_params()).unwrap()
}

fn ssfm_limits() -> Outcome {
    // (a) Gaussian pulse, dispersion only: RMS width grows by
    // sqrt(1 + (beta2 L / T0^2)^2).
    let fiber = FiberSpec {
        alpha_db_per_km: 0.0,
        gamma_per_w_km: 0.0,
        ..FiberSpec::smf(200.0)
    };
    let (n, fs, t0) = (2048usize, 8e12, 3e-12);
    let t = |k: usize| (k as f64 - n as f64 / 2.0) / fs;
    let pulse: Vec<C64> = (0..n)
        .map(|k| C64::new((-t(k).powi(2) / (2.0 * t0 * t0)).exp(), 0.0))
        .collect();
    let w = Waveform::new(pulse.clone(), pulse, fs).unwrap();
    let out = ssfm_propagate(&w, &fiber, PowerEvolution::Passive, 1, 1.0).unwrap();
    let width = |w: &Waveform| {
        let p: Vec<f64> = w.instantaneous_power();
        let e: f64 = p.iter().sum();
        let m: f64 = p.iter().enumerate().map(|(k, v)| t(k) * v).sum::<f64>() / e;
        (p.iter()
            .enumerate()
            .map(|(k, v)| (t(k) - m).powi(2) * v)
            .sum::<f64>()
            / e)
            .sqrt()
    };
    let expected = (1.0 + (fiber.accumulated_dispersion() / (t0 * t0)).powi(2)).sqrt();
    let broadening_err = (width(&out) / width(&w) / expected - 1.0).abs();

    // (b) Constant envelope, no dispersion: Manakov phase (8/9) gamma P l,
    // for a lossless fiber and for the amplifier's growing power.
    let spm_fiber = FiberSpec {
        alpha_db_per_km: 0.0,
        dispersion_ps_nm_km: 0.0,
        ..FiberSpec::smf(30.0)
    };
    let constant = |p_total: f64| {
        let a = (p_total / 2.0).sqrt();
        Waveform::new(
            vec![C64::new(a, 0.0); 64],
            vec![C64::new(0.0, a); 64],
            800e9,
        )
        .unwrap()
    };
    // Phase relative to the input sample, so wrapping never enters.
    let phase_err = |input: &Waveform, out: &Waveform, expected: f64| {
        out.pol_x()
            .iter()
            .zip(input.pol_x())
            .chain(out.pol_y().iter().zip(input.pol_y()))
            .map(|(o, i)| ((o * i.conj()).arg() - expected).abs())
            .fold(0.0, f64::max)
    };
    let p = 20.0;
    let flat = constant(p);
    let lossless = ssfm_propagate(
        &flat,
        &spm_fiber,
        PowerEvolution::Passive,
        50,
        MANAKOV_FACTOR,
    )
    .unwrap();
    let expected_lossless = MANAKOV_FACTOR * spm_fiber.gamma_per_w_m() * p * 30.0;
    let profile = PowerProfile::exponential(30.0, 30.0, 46.0).unwrap();
    let ramp = constant(profile.power_w(0.0));
    let amplified = ssfm_propagate(
        &ramp,
        &spm_fiber,
        PowerEvolution::Profile(&profile),
        SsfmSteps::default().hpoa,
        MANAKOV_FACTOR,
    )
    .unwrap();
    let expected_amplified =
        MANAKOV_FACTOR * spm_fiber.gamma_per_w_m() * profile.integral_w_m(0.0, 30.0);
    let spm_err = phase_err(&flat, &lossless, expected_lossless).max(phase_err(
        &ramp,
        &amplified,
        expected_amplified,
    ));

    // (c) Lossless fiber with dispersion and Kerr effect conserves energy.
    let kerr_fiber = FiberSpec {
        alpha_db_per_km: 0.0,
        ..FiberSpec::smf(30.0)
    };
    let w = preset_waveform(1024, 3).scale_to_power(100.0).unwrap();
    let out = ssfm_propagate(
        &w,
        &kerr_fiber,
        PowerEvolution::Passive,
        100,
        MANAKOV_FACTOR,
    )
    .unwrap();
    let energy_err = (out.energy() / w.energy() - 1.0).abs();

    // (d) HPOA at 50 dBm: default steps against twice as many.
    let hpoa = FiberSpec::smf(30.0);
    let profile = PowerProfile::exponential(30.0, 30.0, 50.0).unwrap();
    let w = preset_waveform(1024, 4)
        .scale_to_power(profile.power_w(0.0))
        .unwrap();
    let steps = SsfmSteps::default().hpoa;
    let run = |s| {
        ssfm_propagate(
            &w,
            &hpoa,
            PowerEvolution::Profile(&profile),
            s,
            MANAKOV_FACTOR,
        )
        .unwrap()
    };
    let halving_err = relative_rms(&run(steps), &run(2 * steps));

    let ok = broadening_err < 5e-3 && spm_err < 1e-6 && energy_err < 1e-10 && halving_err < 1e-6;
    Outcome::new(
        ok,
        format!(
            "(a) width err {broadening_err:.2e} < 5e-3, (b) phase err {spm_err:.2e} < 1e-6 rad, \
             (c) energy err {energy_err:.2e} < 1e-10, (d) halving rms {halving_err:.2e} < 1e-6"
        ),
    )
}

fn linear_gmi_oracle() -> Outcome {
    let mut cfg = LinkConfig::paper_default();
    cfg.modulation.order = 64;
    cfg.modulation.shaping = None;
    cfg.hpoa.fiber.gamma_per_w_km = 0.0;
    cfg.hpoa.pigtail.gamma_per_w_km = 0.0;
    cfg.sim.n_symbols = 1 << 16;
    let launch = 20.0;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for snr_db in [10.0, 15.0, 20.0] {
        let loss = cfg.link_noise(0.0).snr_db(launch) - snr_db;
        let g = run_point(&cfg, launch, loss, 100 + snr_db as u64)
            .unwrap()
            .gmi_bits_per_2d;
        let oracle = qam_bmd_gmi(8, 10f64.powf(snr_db / 10.0));
        worst = worst.max((g - oracle).abs());
        parts.push(format!("{snr_db} dB {g:.4}/{oracle:.4}"));
    }
    Outcome::new(
        worst < 0.02,
        format!("{} (max err {worst:.4} < 0.02)", parts.join(", ")),
    )
}

fn preset() -> ExperimentConfig {
    ExperimentConfig::load(&preset_path()).unwrap()
}

fn curve(modes: &[&str], powers: &[f64]) -> Vec<CurveRow> {
    let exp = preset();
    let req = CurveRequest {
        target_gmi: Some(5.0),
        powers_dbm: powers.to_vec(),
        modes: modes.iter().map(|m| m.to_string()).collect(),
        tol_db: exp.curve.tol_db,
        timing: false,
    };
    curve_rows(&exp, &req).unwrap()
}

/// Acceptable loss per (mode, power bits); infeasible is minus infinity.
fn loss_table(rows: &[CurveRow]) -> BTreeMap<(String, u64), f64> {
    rows.iter()
        .map(|r| {
            (
                (r.mode.clone(), r.power_dbm.to_bits()),
                r.result.loss_db().unwrap_or(f64::NEG_INFINITY),
            )
        })
        .collect()
}

fn ideal_recovery() -> Outcome {
    let powers = [30.0, 34.0, 38.0, 42.0, 46.0];
    let table = loss_table(&curve(&["ideal", "linear"], &powers));
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for p in powers {
        let ideal = table[&("ideal".to_string(), p.to_bits())];
        let linear = table[&("linear".to_string(), p.to_bits())];
        let d = (ideal - linear).abs();
        worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        parts.push(format!("{p} dBm {ideal:.2}/{linear:.2}"));
    }
    Outcome::new(
        worst <= 0.2,
        format!(
            "ideal/linear loss dB: {} (max gap {worst:.3} <= 0.2)",
            parts.join(", ")
        ),
    )
}

fn mode_ordering() -> Outcome {
    let modes = [
        "uniform",
        "shaped",
        "shaped-tx-nlpr",
        "shaped-split-nlpr",
        "ideal",
    ];
    let powers = [40.0, 45.0, 50.0];
    let table = loss_table(&curve(&modes, &powers));
    let at = |m: &str, p: f64| table[&(m.to_string(), p.to_bits())];
    let fmt = |v: f64| {
        if v.is_finite() {
            format!("{v:.2}")
        } else {
            "inf".into()
        }
    };

    let mut ordered = true;
    let mut rows = Vec::new();
    for p in powers {
        let l: Vec<f64> = modes.iter().map(|m| at(m, p)).collect();
        ordered &= l[0] < l[1] && l[1] < l[2] && l[2] < l[3] && l[3] <= l[4];
        rows.push(format!(
            "{p} dBm [{}]",
            l.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" ")
        ));
    }
    // "Up to" gains: the largest difference over the grid among powers where
    // both curves are feasible.
    let gain = |a: &str, b: &str| {
        powers
            .iter()
            .map(|&p| at(a, p) - at(b, p))
            .filter(|d| d.is_finite())
            .fold(f64::NAN, f64::max)
    };
    let shaping = gain("shaped", "uniform");
    let tx = gain("shaped-tx-nlpr", "shaped");
    let combined = gain("shaped-split-nlpr", "uniform");
    let within = |v: f64, lo: f64, hi: f64| (lo..=hi).contains(&v);
    let ok =
        ordered && within(shaping, 0.3, 2.0) && within(tx, 1.0, 6.0) && within(combined, 3.0, 8.0);
    Outcome::new(
        ok,
        format!(
            "losses (uniform shaped tx split ideal): {}; ordering {}; gains shaped-uniform {} in [0.3, 2], \
             tx-shaped {} in [1, 6], split-uniform {} in [3, 8]",
            rows.join(", "),
            if ordered { "holds" } else { "violated" },
            fmt(shaping),
            fmt(tx),
            fmt(combined)
        ),
    )
}

fn nlpr(kappa: f64) -> NlprSpec {
    NlprSpec {
        kappa,
        gamma_eff: MANAKOV_FACTOR * 3.6e-3,
        l_eff: 7.34,
        reference_power: 30.0,
    }
}

fn complex_vec(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)),
        n,
    )
}

fn properties() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 128,
        ..Config::default()
    });
    let mut results: Vec<(&str, Result<(), String>)> = Vec::new();
    let mut record = |name, r| results.push((name, r));

    record(
        "parseval",
        flat(runner.run(&complex_vec(1..200), |x| {
            let mut buf = x.clone();
            Fft::new(x.len()).forward(&mut buf);
            let t: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let f: f64 = buf.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
            prop_assert!((t - f).abs() <= 1e-10 * t.max(1.0));
            Ok(())
        })),
    );

    record(
        "matched-filter identity",
        flat(runner.run(
            &(
                complex_vec(32..33),
                complex_vec(32..33),
                2usize..9,
                0.0f64..1.0,
            ),
            |(x, y, sps, rolloff)| {
                let s = Symbols::new(x, y).unwrap();
                let f = FilterSpec::rrc(rolloff, 1e9);
                let w = apply_filter_freq(&upsample(&s, sps, 1e9).unwrap(), &f).unwrap();
                let back = matched_filter_and_decimate(&w, &f, sps, 0).unwrap();
                prop_assert!(
                    max_abs_diff(&back.x, &s.x) < 1e-9 && max_abs_diff(&back.y, &s.y) < 1e-9
                );
                Ok(())
            },
        )),
    );

    record(
        "phase-only nlpr",
        flat(
            runner.run(&(complex_vec(2..64), 0.0f64..=1.0), |(x, kappa)| {
                let y: Vec<C64> = x.iter().rev().map(|v| v * 0.7).collect();
                let w = Waveform::new(x, y, 1.0).unwrap();
                prop_assume!(w.mean_power() > 1e-6);
                for out in [
                    apply_tx_nlpr(&w, &nlpr(kappa)).unwrap(),
                    apply_rx_nlpr(&w, &nlpr(kappa)).unwrap(),
                ] {
                    for (a, b) in out
                        .instantaneous_power()
                        .iter()
                        .zip(w.instantaneous_power())
                    {
                        prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
                    }
                }
                Ok(())
            }),
        ),
    );

    record(
        "gray labeling",
        flat(
            runner.run(&prop::sample::select(vec![4u32, 16, 64, 256]), |order| {
                let points = constellation_rows(order, None).unwrap();
                prop_assert_eq!(points.len(), order as usize);
                prop_assert!(gray_violations(&points).is_empty());
                Ok(())
            }),
        ),
    );

    let shaped_64 = {
        let mut cfg = LinkConfig::paper_default();
        cfg.modulation.order = 64;
        cfg.modulation.shaping.as_mut().unwrap().k_bits = 5;
        cfg.modulation.constellation().unwrap()
    };
    record(
        "posterior normalization",
        flat(runner.run(
            &(prop::array::uniform4(-1.5f64..1.5), -4.0f64..1.0),
            |(y, log_var)| {
                let dm = SoftDemapper::new(&shaped_64, 10f64.powf(log_var)).unwrap();
                let mut out = vec![[0.0; 2]; dm.label_bits()];
                dm.log_posteriors(y, &mut DemapScratch::default(), &mut out);
                for l in out {
                    prop_assert!((l[0].exp() + l[1].exp() - 1.0).abs() < 1e-9);
                }
                Ok(())
            },
        )),
    );

    let mut slow = TestRunner::new(Config {
        cases: 6,
        ..Config::default()
    });
    let mut cfg = LinkConfig::paper_default();
    cfg.sim.n_symbols = 1 << 10;
    cfg.nlpr.enabled = true;
    record(
        "bisection reproducibility",
        flat(slow.run(&(0u64..1000, 40.0f64..46.0), |(seed, launch)| {
            let burst = propagate(&cfg, launch, seed).unwrap();
            let a = acceptable_loss_for(&burst, 6.5, 5.0, 0.1).unwrap();
            let b = acceptable_loss(&cfg, launch, 5.0, 0.1, seed).unwrap();
            prop_assert_eq!(a, b);
            Ok(())
        })),
    );

    let failures: Vec<String> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| *n).collect();
    if failures.is_empty() {
        Outcome::new(
            true,
            format!("{} properties held: {}", names.len(), names.join(", ")),
        )
    } else {
        Outcome::new(false, failures.join("; "))
    }
}

fn flat<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = preset_path();
    let run = |jobs: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_satlink"))
            .args(["curve", path.to_str().unwrap(), "--target-gmi", "5"])
            .args([
                "--modes",
                "uniform,shaped-split-nlpr,ideal",
                "--powers",
                "44,36",
            ])
            .args([
                "--n-symbols",
                "4096",
                "--jobs",
                jobs,
                "--out",
                out.to_str().unwrap(),
            ])
            .env_remove("SATLINK_JOBS")
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let first = run("1", "a.csv");
    let second = run("1", "b.csv");
    let parallel = run("4", "c.csv");
    // The library path with a differently sized pool must agree as well.
    let pool = ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let exp = {
        let mut e = preset();
        e.set_n_symbols(4096).unwrap();
        e
    };
    let req = CurveRequest {
        target_gmi: Some(5.0),
        powers_dbm: vec![44.0, 36.0],
        modes: vec!["uniform".into(), "shaped-split-nlpr".into(), "ideal".into()],
        tol_db: exp.curve.tol_db,
        timing: false,
    };
    let mut lib = Vec::new();
    satlink::cli::write_curve_csv(
        &mut lib,
        &pool.install(|| curve_rows(&exp, &req)).unwrap(),
        true,
    )
    .unwrap();
    let rows = first.iter().filter(|&&b| b == b'\n').count() - 1;
    let ok = first == second && first == parallel && first == lib && rows == 6;
    Outcome::new(
        ok,
        format!(
            "{rows} rows; repeat run {}, --jobs 1 vs 4 {}, library on 3 threads {}",
            same(&first, &second),
            same(&first, &parallel),
            same(&first, &lib)
        ),
    )
}

fn same(a: &[u8], b: &[u8]) -> &'static str {
    if a == b {
        "identical"
    } else {
        "differ"
    }
}
