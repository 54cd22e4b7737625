//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use satlink::C64;

pub fn preset_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_fig1b.toml")
}

/// BMD rate of square `side^2`-QAM with per-rail binary-reflected Gray
/// labels over AWGN, in bit per 2D symbol, at `snr` = Es / N0 (linear).
///
/// Each rail is a `side`-PAM with levels `2i - side + 1`; the expectation
/// over the noise uses a dense trapezoid rule on `[-12 s, 12 s]`.
pub fn qam_bmd_gmi(side: usize, snr: f64) -> f64 {
    let levels: Vec<f64> = (0..side)
        .map(|i| (2 * i) as f64 - (side - 1) as f64)
        .collect();
    let es_rail = levels.iter().map(|l| l * l).sum::<f64>() / side as f64;
    // Es per 2D is 2 es_rail, N0 per real dimension is N0 / 2.
    let sigma2 = 2.0 * es_rail / snr / 2.0;
    let s = sigma2.sqrt();
    let bits = side.trailing_zeros() as usize;
    let label = |i: usize| i ^ (i >> 1);
    let grid = 6001;
    let lo = -12.0 * s;
    let dn = 24.0 * s / (grid - 1) as f64;
    let mut rate = 0.0;
    for b in 0..bits {
        let shift = bits - 1 - b;
        let mut h = 0.0;
        for (j, &x) in levels.iter().enumerate() {
            let bj = (label(j) >> shift) & 1;
            let mut acc = 0.0;
            for k in 0..grid {
                let n = lo + k as f64 * dn;
                let w =
                    (-n * n / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt();
                let y = x + n;
                let (mut all, mut same) = (0.0, 0.0);
                for (i, &xi) in levels.iter().enumerate() {
                    let d = y - xi;
                    let q = (-(d * d - n * n) / (2.0 * sigma2)).exp();
                    all += q;
                    if (label(i) >> shift) & 1 == bj {
                        same += q;
                    }
                }
                let trap = if k == 0 || k == grid - 1 { 0.5 } else { 1.0 };
                acc += trap * w * (all / same).log2() * dn;
            }
            h += acc / side as f64;
        }
        rate += 1.0 - h;
    }
    2.0 * rate
}

/// SNR (linear) at which [`qam_bmd_gmi`] equals `target`.
pub fn qam_required_snr(side: usize, target: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0f64, 60.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if qam_bmd_gmi(side, 10f64.powf(mid / 10.0)) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    10f64.powf(0.5 * (lo + hi) / 10.0)
}

/// All `levels^n` blocks sorted by (energy, lexicographic order), first
/// `2^k` kept.
pub fn brute_force_codebook(levels: &[u16], n: usize, k: usize) -> Vec<Vec<u16>> {
    let mut all: Vec<Vec<u16>> = vec![vec![]];
    for _ in 0..n {
        all = all
            .into_iter()
            .flat_map(|p| {
                levels.iter().map(move |&l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    all.sort_by_key(|b| {
        (
            b.iter().map(|&a| u64::from(a) * u64::from(a)).sum::<u64>(),
            b.clone(),
        )
    });
    all.truncate(1 << k);
    all
}

/// Direct O(n^2) DFT; `sign = -1` forward, `+1` inverse (unnormalized).
pub fn dft(x: &[C64], sign: f64) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| {
                    v * C64::from_polar(
                        1.0,
                        sign * 2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64,
                    )
                })
                .sum()
        })
        .collect()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}
