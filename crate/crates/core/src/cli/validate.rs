//! Self-test suite behind `satlink validate`. Every check compares the
//! implementation against a closed form or an exhaustive enumeration.

use crate::channel::{
    ssfm_propagate, FiberSpec, PowerEvolution, PowerProfile, SsfmSteps, MANAKOV_FACTOR,
};
use crate::config::{LinkConfig, ShapingConfig};
use crate::metrics::{gmi_per_2d, random_frame};
use crate::modem::{rx_frontend, tx_waveform, RxParams, TxParams};
use crate::shaping::{AmplitudeAlphabet, SphereCodebook};
use crate::signal::Waveform;
use crate::C64;

use super::tables::{constellation_rows, gray_violations};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        passed: value < limit,
        detail: format!("error {value:.3e} (limit {limit:.0e})"),
    }
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

fn lut_sizes() -> Check {
    let size = |order, k| {
        SphereCodebook::build(AmplitudeAlphabet::for_qam(order).unwrap(), 4, k)
            .map(|cb| cb.lut_size_bits())
            .ok()
    };
    let got = [size(64, 5), size(256, 9)];
    Check {
        name: "lut-sizes",
        passed: got == [Some((256, 1280)), Some((6144, 36864))],
        detail: format!("{got:?}"),
    }
}

fn codebook_enumeration() -> Check {
    let mut ok = true;
    for (order, k) in [(64u32, 5usize), (256, 9)] {
        let alphabet = AmplitudeAlphabet::for_qam(order).unwrap();
        let levels = alphabet.levels().to_vec();
        let cb = SphereCodebook::build(alphabet, 4, k).unwrap();
        let mut all: Vec<[u16; 4]> = Vec::new();
        for &a in &levels {
            for &b in &levels {
                for &c in &levels {
                    for &d in &levels {
                        all.push([a, b, c, d]);
                    }
                }
            }
        }
        all.sort_by_key(|v| {
            (
                v.iter().map(|&x| u32::from(x) * u32::from(x)).sum::<u32>(),
                *v,
            )
        });
        all.truncate(1 << k);
        ok &= all.iter().enumerate().all(|(i, v)| cb.entry(i) == v);
    }
    Check {
        name: "codebook-enumeration",
        passed: ok,
        detail: "64QAM k=5 and 256QAM k=9 against sorted enumeration".into(),
    }
}

fn spm_phase() -> Check {
    let fiber = FiberSpec {
        dispersion_ps_nm_km: 0.0,
        ..FiberSpec::smf(30.0)
    };
    let profile = PowerProfile::exponential(30.0, 30.0, 45.0).unwrap();
    let p0 = profile.power_w(0.0);
    let a = (p0 / 2.0).sqrt();
    let w = Waveform::new(
        vec![C64::new(a, 0.0); 64],
        vec![C64::new(a, 0.0); 64],
        800e9,
    )
    .unwrap();
    let out = ssfm_propagate(
        &w,
        &fiber,
        PowerEvolution::Profile(&profile),
        200,
        MANAKOV_FACTOR,
    )
    .unwrap();
    let expected = MANAKOV_FACTOR * fiber.gamma_per_w_m() * profile.integral_w_m(0.0, 30.0);
    let err = out
        .pol_x()
        .iter()
        .map(|s| (s.arg() - expected).abs())
        .fold(0.0, f64::max);
    check("spm-phase", err, 1e-6)
}

/// Gaussian pulse through a dispersive linear fiber; RMS width against
/// `T0 sqrt(1 + (beta2 L / T0^2)^2)`.
fn dispersion_broadening() -> Check {
    let fiber = FiberSpec {
        alpha_db_per_km: 0.0,
        gamma_per_w_km: 0.0,
        ..FiberSpec::smf(100.0)
    };
    let (n, fs, t0) = (1024, 8e12, 2e-12);
    let t = |k: usize| (k as f64 - n as f64 / 2.0) / fs;
    let x: Vec<C64> = (0..n)
        .map(|k| C64::new((-t(k).powi(2) / (2.0 * t0 * t0)).exp(), 0.0))
        .collect();
    let w = Waveform::new(x, vec![C64::new(0.0, 0.0); n], fs).unwrap();
    let out = ssfm_propagate(&w, &fiber, PowerEvolution::Passive, 1, 1.0).unwrap();
    let rms = |w: &Waveform| {
        let p: Vec<f64> = w.pol_x().iter().map(|s| s.norm_sqr()).collect();
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
    let err = (rms(&out) / rms(&w) / expected - 1.0).abs();
    check("dispersion-broadening", err, 5e-3)
}

fn test_signal(n_symbols: usize) -> Waveform {
    let mut cfg = LinkConfig::paper_default();
    cfg.modulation.order = 16;
    cfg.modulation.shaping = None;
    let frame = random_frame(&cfg, n_symbols, 7).unwrap();
    tx_waveform(&frame, &cfg.tx_params()).unwrap()
}

fn energy_conservation() -> Check {
    let fiber = FiberSpec {
        alpha_db_per_km: 0.0,
        ..FiberSpec::smf(30.0)
    };
    let w = test_signal(512).scale_to_power(10.0).unwrap();
    let out = ssfm_propagate(&w, &fiber, PowerEvolution::Passive, 100, MANAKOV_FACTOR).unwrap();
    check(
        "energy-conservation",
        (out.energy() / w.energy() - 1.0).abs(),
        1e-10,
    )
}

/// HPOA at 50 dBm with the default step count against twice as many steps.
fn step_halving() -> Check {
    let fiber = FiberSpec::smf(30.0);
    let profile = PowerProfile::exponential(30.0, 30.0, 50.0).unwrap();
    let w = test_signal(512)
        .scale_to_power(profile.power_w(0.0))
        .unwrap();
    let steps = SsfmSteps::default().hpoa;
    let run = |s| {
        ssfm_propagate(
            &w,
            &fiber,
            PowerEvolution::Profile(&profile),
            s,
            MANAKOV_FACTOR,
        )
        .unwrap()
    };
    check(
        "step-halving",
        relative_rms(&run(steps), &run(2 * steps)),
        1e-6,
    )
}

fn back_to_back() -> Check {
    let mut cfg = LinkConfig::paper_default();
    cfg.modulation.shaping = None;
    let frame = random_frame(&cfg, 256, 3).unwrap();
    let tx = TxParams {
        dac_cutoff: None,
        ..cfg.tx_params()
    };
    let w = tx_waveform(&frame, &tx).unwrap();
    let rx = rx_frontend(
        &w,
        &RxParams {
            adc_cutoff: None,
            cd_compensation: None,
            reference_power: 2.0,
            ..cfg.rx_params(1.0)
        },
        None,
    )
    .unwrap();
    let err =
        rx.x.iter()
            .zip(&frame.symbols.x)
            .chain(rx.y.iter().zip(&frame.symbols.y))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
    check("back-to-back", err, 1e-9)
}

fn gray_labels() -> Check {
    let bad: usize = [4u32, 16, 64, 256]
        .iter()
        .map(|&m| gray_violations(&constellation_rows(m, None).unwrap()).len())
        .sum();
    Check {
        name: "gray-labels",
        passed: bad == 0,
        detail: format!("{bad} violating neighbour pairs"),
    }
}

fn noiseless_gmi() -> Check {
    let mut worst = 0.0f64;
    for (order, k, expected) in [(64u32, None, 6.0), (64, Some(5), 4.5), (256, Some(9), 6.5)] {
        let mut cfg = LinkConfig::paper_default();
        cfg.modulation.order = order;
        cfg.modulation.shaping = k.map(|k_bits| ShapingConfig {
            block_len: 4,
            k_bits,
        });
        let frame = random_frame(&cfg, 1024, 1).unwrap();
        let g = gmi_per_2d(&frame.symbols, &frame, 0.0).unwrap();
        worst = worst.max((g - expected).abs());
    }
    check("noiseless-gmi", worst, 1e-6)
}

fn rrc_nyquist() -> Check {
    // Folded RRC^2 spectrum is flat: sum_k H(f + k R)^2 = 1.
    let r = 100e9;
    let worst = (0..200)
        .map(|i| {
            let f = -r / 2.0 + r * i as f64 / 200.0;
            let s: f64 = (-2..=2)
                .map(|k| crate::signal::rrc_response(f + k as f64 * r, r, 0.05).powi(2))
                .sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max);
    check("rrc-nyquist", worst, 1e-12)
}

pub fn run_checks() -> Vec<Check> {
    vec![
        lut_sizes(),
        codebook_enumeration(),
        spm_phase(),
        dispersion_broadening(),
        energy_conservation(),
        step_halving(),
        back_to_back(),
        gray_labels(),
        noiseless_gmi(),
        rrc_nyquist(),
    ]
}
