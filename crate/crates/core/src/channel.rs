//! Nonlinear propagation through the HPOA and its pigtail, and the
//! ASE-limited receiver noise.
//!
//! The field obeys the Manakov-type propagation equation
//!
//! ```text
//! dE/dz = (g(z) - alpha)/2 E - j beta2/2 d^2E/dt^2 + j f gamma (|Ex|^2 + |Ey|^2) E
//! ```
//!
//! with `f = 8/9` by default. Inside the amplifier the net gain `g - alpha`
//! is whatever realises the configured [`PowerProfile`]; a passive fiber
//! only attenuates.
//!
//! Spectra use the `exp(+j w t)` synthesis convention of the inverse DFT, so
//! the dispersion operator is `exp(+j beta2 w^2 z / 2)` in frequency.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::signal::{Fft, Symbols, Waveform};
use crate::C64;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Nonlinear coefficient scaling for random birefringence.
pub const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}

pub fn w_to_dbm(w: f64) -> f64 {
    lin_to_db(w / 1e-3)
}

/// Photon energy `h c / lambda` (J).
pub fn photon_energy(wavelength_nm: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

/// Dispersion phase `beta2 L (2 pi f)^2 / 2` for accumulated `beta2_l` (s^2).
pub fn dispersion_phase(f_hz: f64, beta2_l: f64) -> f64 {
    let w = 2.0 * PI * f_hz;
    0.5 * beta2_l * w * w
}

/// Physical parameters of a fiber section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub length_m: f64,
    pub alpha_db_per_km: f64,
    pub gamma_per_w_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub wavelength_nm: f64,
}

impl FiberSpec {
    /// Standard single-mode fiber at 1550 nm of the given length.
    pub fn smf(length_m: f64) -> FiberSpec {
        FiberSpec {
            length_m,
            alpha_db_per_km: 0.2,
            gamma_per_w_km: 3.6,
            dispersion_ps_nm_km: 17.0,
            wavelength_nm: 1550.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return Err(invalid(format!(
                "fiber length must be positive, got {}",
                self.length_m
            )));
        }
        if !(self.alpha_db_per_km >= 0.0) || !(self.gamma_per_w_km >= 0.0) {
            return Err(invalid("fiber attenuation and nonlinearity must be >= 0"));
        }
        if !(self.wavelength_nm > 0.0) || !self.dispersion_ps_nm_km.is_finite() {
            return Err(invalid(
                "fiber wavelength must be positive and dispersion finite",
            ));
        }
        Ok(())
    }

    /// Group-velocity dispersion `beta2 = -D lambda^2 / (2 pi c)` in s^2/m.
    pub fn beta2(&self) -> f64 {
        let d = self.dispersion_ps_nm_km * 1e-12 / (1e-9 * 1e3);
        let lambda = self.wavelength_nm * 1e-9;
        -d * lambda * lambda / (2.0 * PI * SPEED_OF_LIGHT)
    }

    /// Accumulated dispersion `beta2 L` (s^2).
    pub fn accumulated_dispersion(&self) -> f64 {
        self.beta2() * self.length_m
    }

    /// Power attenuation coefficient in 1/m.
    pub fn alpha_per_m(&self) -> f64 {
        self.alpha_db_per_km * 10f64.ln() / 10.0 / 1e3
    }

    pub fn gamma_per_w_m(&self) -> f64 {
        self.gamma_per_w_km * 1e-3
    }

    /// Transmission `P(L)/P(0)` of a passive fiber.
    pub fn transmission(&self) -> f64 {
        (-self.alpha_per_m() * self.length_m).exp()
    }

    /// `(1 - exp(-alpha L)) / alpha`, or `L` when lossless.
    pub fn passive_effective_length(&self) -> f64 {
        let a = self.alpha_per_m();
        if a == 0.0 {
            self.length_m
        } else {
            -(-a * self.length_m).exp_m1() / a
        }
    }
}

/// Power evolution along the amplifier, piecewise linear in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    /// `(z in m, power in dBm)`, z strictly increasing from 0.
    breakpoints: Vec<(f64, f64)>,
}

impl PowerProfile {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(invalid("power profile needs at least two breakpoints"));
        }
        if breakpoints[0].0 != 0.0 {
            return Err(invalid("power profile must start at z = 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(invalid(
                "power profile positions must be strictly increasing",
            ));
        }
        if breakpoints
            .iter()
            .any(|(z, p)| !z.is_finite() || !p.is_finite())
        {
            return Err(invalid("power profile values must be finite"));
        }
        Ok(PowerProfile { breakpoints })
    }

    /// Single exponential segment gaining `gain_db` over `length_m` and
    /// ending at `output_dbm`.
    pub fn exponential(length_m: f64, gain_db: f64, output_dbm: f64) -> Result<Self> {
        Self::new(vec![(0.0, output_dbm - gain_db), (length_m, output_dbm)])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn length(&self) -> f64 {
        self.breakpoints.last().unwrap().0
    }

    pub fn input_dbm(&self) -> f64 {
        self.breakpoints[0].1
    }

    pub fn output_dbm(&self) -> f64 {
        self.breakpoints.last().unwrap().1
    }

    /// Same shape, shifted so that it ends at `output_dbm`.
    pub fn anchored(&self, output_dbm: f64) -> PowerProfile {
        let shift = output_dbm - self.output_dbm();
        PowerProfile {
            breakpoints: self
                .breakpoints
                .iter()
                .map(|&(z, p)| (z, p + shift))
                .collect(),
        }
    }

    fn segment(&self, z: f64) -> usize {
        let n = self.breakpoints.len();
        self.breakpoints[1..n - 1]
            .iter()
            .take_while(|(zb, _)| *zb <= z)
            .count()
    }

    /// Power at `z` in W (clamped to the profile ends).
    pub fn power_w(&self, z: f64) -> f64 {
        let z = z.clamp(0.0, self.length());
        let i = self.segment(z);
        let (za, pa) = self.breakpoints[i];
        let (zb, pb) = self.breakpoints[i + 1];
        dbm_to_w(pa + (pb - pa) * (z - za) / (zb - za))
    }

    /// Exact `int_{z0}^{z1} P(z) dz` in W m.
    pub fn integral_w_m(&self, z0: f64, z1: f64) -> f64 {
        let (z0, z1) = (z0.clamp(0.0, self.length()), z1.clamp(0.0, self.length()));
        if z1 <= z0 {
            return 0.0;
        }
        let mut total = 0.0;
        for w in self.breakpoints.windows(2) {
            let (za, zb) = (w[0].0.max(z0), w[1].0.min(z1));
            if zb <= za {
                continue;
            }
            let pa = self.power_w(za);
            let pb = self.power_w(zb);
            let len = zb - za;
            let ratio = pb / pa;
            total += if (ratio - 1.0).abs() < 1e-12 {
                pa * len
            } else {
                len * (pb - pa) / ratio.ln()
            };
        }
        total
    }
}

/// How mean power evolves along a fiber section.
#[derive(Debug, Clone, Copy)]
pub enum PowerEvolution<'a> {
    /// Attenuation only.
    Passive,
    /// Net gain realising the profile.
    Profile(&'a PowerProfile),
}

impl PowerEvolution<'_> {
    /// `P(z) / P(0)`.
    fn relative(&self, fiber: &FiberSpec, z: f64) -> f64 {
        match self {
            PowerEvolution::Passive => (-fiber.alpha_per_m() * z).exp(),
            PowerEvolution::Profile(p) => p.power_w(z) / p.power_w(0.0),
        }
    }

    /// `int_{z0}^{z1} P(z)/P(0) dz`.
    fn relative_integral(&self, fiber: &FiberSpec, z0: f64, z1: f64) -> f64 {
        match self {
            PowerEvolution::Passive => {
                let a = fiber.alpha_per_m();
                if a == 0.0 {
                    z1 - z0
                } else {
                    ((-a * z0).exp() - (-a * z1).exp()) / a
                }
            }
            PowerEvolution::Profile(p) => p.integral_w_m(z0, z1) / p.power_w(0.0),
        }
    }
}

/// Symmetric split-step Fourier integration over `steps` steps laid out by
/// [`step_boundaries`].
///
/// Gain is applied as an exact scalar power ratio between step points, and
/// each nonlinear sub-step uses the exact integral of the power profile over
/// its step, so the accumulated nonlinear phase of a dispersionless field is
/// exact. `nl_factor` scales `gamma` (8/9 for Manakov, 1 for a single
/// polarization model).
pub fn ssfm_propagate(
    w: &Waveform,
    fiber: &FiberSpec,
    evolution: PowerEvolution<'_>,
    steps: usize,
    nl_factor: f64,
) -> Result<Waveform> {
    fiber.validate()?;
    if steps == 0 {
        return Err(invalid("SSFM needs at least one step"));
    }
    if let PowerEvolution::Profile(p) = evolution {
        if (p.length() - fiber.length_m).abs() > 1e-9 * fiber.length_m {
            return Err(invalid(format!(
                "power profile spans {} m but the fiber is {} m long",
                p.length(),
                fiber.length_m
            )));
        }
    }
    let n = w.len();
    let fft = Fft::new(n);
    let freqs = w.frequencies();
    let beta2 = fiber.beta2();
    let gamma = nl_factor * fiber.gamma_per_w_m();
    let len = fiber.length_m;
    let (mut x, mut y) = w.clone().into_pols();

    let dispersion = |dz: f64| -> Vec<C64> {
        freqs
            .iter()
            .map(|&f| C64::from_polar(1.0, dispersion_phase(f, beta2 * dz)))
            .collect()
    };
    let apply = |buf: &mut [C64], h: &[C64]| buf.iter_mut().zip(h).for_each(|(s, h)| *s *= h);

    if gamma == 0.0 {
        // Purely linear: one exact step.
        let d = dispersion(len);
        let g = evolution.relative(fiber, len).sqrt();
        for pol in [&mut x, &mut y] {
            fft.forward(pol);
            apply(pol, &d);
            fft.inverse(pol);
            pol.iter_mut().for_each(|s| *s *= g);
        }
    } else {
        let grid = step_boundaries(fiber, evolution, steps);
        let phase: Vec<f64> = freqs.iter().map(|&f| dispersion_phase(f, beta2)).collect();
        let mut d = vec![C64::new(1.0, 0.0); n];
        let mut advance = |x: &mut [C64], y: &mut [C64], dz: f64| {
            d.iter_mut()
                .zip(&phase)
                .for_each(|(d, p)| *d = C64::from_polar(1.0, p * dz));
            apply(x, &d);
            apply(y, &d);
        };
        fft.forward(&mut x);
        fft.forward(&mut y);
        let mut z_prev = 0.0;
        for win in grid.windows(2) {
            let (z0, z1) = (win[0], win[1]);
            let zm = 0.5 * (z0 + z1);
            advance(&mut x, &mut y, zm - z_prev);
            fft.inverse(&mut x);
            fft.inverse(&mut y);

            let g = (evolution.relative(fiber, zm) / evolution.relative(fiber, z_prev)).sqrt();
            let h_eff = evolution.relative_integral(fiber, z0, z1) / evolution.relative(fiber, zm);
            let k = gamma * h_eff;
            for (a, b) in x.iter_mut().zip(y.iter_mut()) {
                *a *= g;
                *b *= g;
                let rot = C64::from_polar(1.0, k * (a.norm_sqr() + b.norm_sqr()));
                *a *= rot;
                *b *= rot;
            }
            z_prev = zm;

            fft.forward(&mut x);
            fft.forward(&mut y);
        }
        advance(&mut x, &mut y, len - z_prev);
        fft.inverse(&mut x);
        fft.inverse(&mut y);
        let g = (evolution.relative(fiber, len) / evolution.relative(fiber, z_prev)).sqrt();
        x.iter_mut().chain(y.iter_mut()).for_each(|s| *s *= g);
    }

    if x.iter()
        .chain(&y)
        .any(|s| !s.re.is_finite() || !s.im.is_finite())
    {
        return Err(Error::NonFinite(format!(
            "{} m fiber, mean input power {:.3e} W",
            fiber.length_m,
            w.mean_power()
        )));
    }
    Ok(Waveform::new(x, y, w.sample_rate())?.with_t0(w.t0()))
}

/// Step boundaries `0 = z_0 < ... < z_steps = L` with local step length
/// proportional to `P(z)^(-2/3)`. This equalizes the leading splitting error
/// term, which scales with `h^3 P^2`; a flat power gives uniform steps.
pub fn step_boundaries(fiber: &FiberSpec, evolution: PowerEvolution<'_>, steps: usize) -> Vec<f64> {
    let len = fiber.length_m;
    let fine = 64 * steps;
    let dz = len / fine as f64;
    let density = |z: f64| evolution.relative(fiber, z).powf(2.0 / 3.0);
    let mut cum = Vec::with_capacity(fine + 1);
    cum.push(0.0);
    let mut prev = density(0.0);
    for i in 1..=fine {
        let next = density(i as f64 * dz);
        cum.push(cum[i - 1] + 0.5 * (prev + next) * dz);
        prev = next;
    }
    let total = cum[fine];
    let mut grid = Vec::with_capacity(steps + 1);
    grid.push(0.0);
    let mut j = 0;
    for s in 1..steps {
        let target = total * s as f64 / steps as f64;
        while cum[j + 1] < target {
            j += 1;
        }
        let frac = (target - cum[j]) / (cum[j + 1] - cum[j]);
        grid.push((j as f64 + frac) * dz);
    }
    grid.push(len);
    grid
}

/// Step counts for the two fiber sections of the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsfmSteps {
    pub hpoa: usize,
    pub pigtail: usize,
}

impl Default for SsfmSteps {
    fn default() -> Self {
        SsfmSteps {
            hpoa: 300,
            pigtail: 20,
        }
    }
}

/// Amplifies a unit-power waveform through the HPOA (gain following
/// `profile`, which must end at the launch power) and its passive pigtail.
pub fn hpoa_transmit(
    w: &Waveform,
    hpoa: &FiberSpec,
    profile: &PowerProfile,
    pigtail: &FiberSpec,
    launch_power_dbm: f64,
    steps: SsfmSteps,
    nl_factor: f64,
) -> Result<Waveform> {
    if (profile.output_dbm() - launch_power_dbm).abs() > 1e-9 {
        return Err(invalid(format!(
            "power profile ends at {} dBm, launch power is {launch_power_dbm} dBm",
            profile.output_dbm()
        )));
    }
    let w = w.scale_to_power(dbm_to_w(profile.input_dbm()))?;
    let w = ssfm_propagate(
        &w,
        hpoa,
        PowerEvolution::Profile(profile),
        steps.hpoa,
        nl_factor,
    )?;
    ssfm_propagate(
        &w,
        pigtail,
        PowerEvolution::Passive,
        steps.pigtail,
        nl_factor,
    )
}

/// `(1/P_out) int P(z) dz` over the HPOA plus the pigtail, in m, with
/// `P_out` the profile's end (launch) power.
pub fn effective_length(profile: &PowerProfile, pigtail: &FiberSpec) -> f64 {
    let p_out = profile.power_w(profile.length());
    profile.integral_w_m(0.0, profile.length()) / p_out + pigtail.passive_effective_length()
}

/// Free-space loss and receiver amplifier parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkNoise {
    pub loss_db: f64,
    pub noise_figure_db: f64,
    pub symbol_rate: f64,
    /// `h nu` at the carrier (J).
    pub photon_energy: f64,
}

impl LinkNoise {
    pub fn validate(&self) -> Result<()> {
        if !(self.loss_db >= 0.0) || !(self.noise_figure_db >= 0.0) {
            return Err(invalid("loss and noise figure must be >= 0 dB"));
        }
        if !(self.symbol_rate > 0.0) || !(self.photon_energy > 0.0) {
            return Err(invalid("symbol rate and photon energy must be positive"));
        }
        Ok(())
    }

    /// `P / (R L h nu N_F)`.
    pub fn snr_linear(&self, launch_power_dbm: f64) -> f64 {
        dbm_to_w(launch_power_dbm)
            / (self.symbol_rate
                * db_to_lin(self.loss_db)
                * self.photon_energy
                * db_to_lin(self.noise_figure_db))
    }

    pub fn snr_db(&self, launch_power_dbm: f64) -> f64 {
        lin_to_db(self.snr_linear(launch_power_dbm))
    }
}

/// SNR above which [`receiver_noise`] logs a warning.
pub const SNR_WARN_DB: f64 = 60.0;

/// Unit-variance circular Gaussian samples, pol X then pol Y, drawn from the
/// stream of `seed`. Scaling this sequence gives paired noise across SNRs.
pub fn standard_noise(n: usize, seed: u64) -> Symbols {
    let mut rng = seed::rng(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut draw = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re * s, im * s)
    };
    let x = (0..n).map(|_| draw()).collect();
    let y = (0..n).map(|_| draw()).collect();
    Symbols { x, y }
}

/// Adds ASE noise to unit-energy symbols: per 2D symbol the complex noise
/// variance is `1 / SNR`. Returns the noisy symbols and the linear SNR.
pub fn receiver_noise(
    symbols: &Symbols,
    launch_power_dbm: f64,
    link: &LinkNoise,
    seed: u64,
) -> Result<(Symbols, f64)> {
    link.validate()?;
    let snr = link.snr_linear(launch_power_dbm);
    if lin_to_db(snr) > SNR_WARN_DB {
        log::warn!("SNR of {:.1} dB is implausibly high", lin_to_db(snr));
    }
    let noise = standard_noise(symbols.len(), seed);
    Ok((add_scaled_noise(symbols, &noise, (1.0 / snr).sqrt()), snr))
}

pub(crate) fn add_scaled_noise(symbols: &Symbols, noise: &Symbols, sigma: f64) -> Symbols {
    let add = |s: &[C64], n: &[C64]| s.iter().zip(n).map(|(s, n)| s + n * sigma).collect();
    Symbols {
        x: add(&symbols.x, &noise.x),
        y: add(&symbols.y, &noise.y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta2_of_standard_fiber() {
        let b2 = FiberSpec::smf(1.0).beta2();
        // -21.68 ps^2/km
        assert!((b2 * 1e27 + 21.68).abs() < 0.01, "{b2}");
    }

    #[test]
    fn effective_length_closed_forms() {
        let lossless = FiberSpec {
            alpha_db_per_km: 0.0,
            ..FiberSpec::smf(3.0)
        };
        let flat = PowerProfile::exponential(30.0, 0.0, 40.0).unwrap();
        assert!((effective_length(&flat, &lossless) - 33.0).abs() < 1e-12);

        let g30 = PowerProfile::exponential(30.0, 30.0, 40.0).unwrap();
        let hpoa = 30.0 * (1.0 - 1e-3) / 1000f64.ln();
        assert!((effective_length(&g30, &lossless) - (hpoa + 3.0)).abs() < 1e-9);
        assert!((hpoa - 4.338).abs() < 1e-3);

        let g20 = PowerProfile::exponential(30.0, 20.0, 40.0).unwrap();
        let hpoa = 30.0 * (1.0 - 1e-2) / 100f64.ln();
        assert!((hpoa - 6.449).abs() < 1e-3);
        assert!((effective_length(&g20, &lossless) - (hpoa + 3.0)).abs() < 1e-9);
    }

    #[test]
    fn profile_integral_matches_quadrature() {
        let p = PowerProfile::new(vec![(0.0, 10.0), (12.0, 25.0), (30.0, 40.0)]).unwrap();
        let n = 200_000;
        let h = 30.0 / n as f64;
        let quad: f64 = (0..n).map(|i| p.power_w((i as f64 + 0.5) * h) * h).sum();
        let exact = p.integral_w_m(0.0, 30.0);
        assert!((quad - exact).abs() / exact < 1e-8);
        assert!(
            (p.integral_w_m(5.0, 20.0) + p.integral_w_m(20.0, 30.0) - p.integral_w_m(5.0, 30.0))
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn profile_validation_and_anchor() {
        assert!(PowerProfile::new(vec![(0.0, 1.0)]).is_err());
        assert!(PowerProfile::new(vec![(1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(PowerProfile::new(vec![(0.0, 1.0), (0.0, 1.0)]).is_err());
        let p = PowerProfile::exponential(30.0, 30.0, 0.0)
            .unwrap()
            .anchored(45.0);
        assert_eq!(p.breakpoints(), &[(0.0, 15.0), (30.0, 45.0)]);
    }

    #[test]
    fn snr_formula() {
        let link = LinkNoise {
            loss_db: 60.0,
            noise_figure_db: 4.0,
            symbol_rate: 100e9,
            photon_energy: photon_energy(1550.0),
        };
        let snr = link.snr_linear(40.0);
        assert!((snr - 310.9).abs() / 310.9 < 2e-3, "{snr}");
        let worse = LinkNoise {
            loss_db: 63.0,
            ..link
        };
        assert!((link.snr_db(40.0) - worse.snr_db(40.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn noise_is_deterministic_and_paired() {
        let s = Symbols::new(vec![C64::new(1.0, 0.0); 16], vec![C64::new(0.0, 1.0); 16]).unwrap();
        let link = LinkNoise {
            loss_db: 60.0,
            noise_figure_db: 4.0,
            symbol_rate: 100e9,
            photon_energy: photon_energy(1550.0),
        };
        let (a, _) = receiver_noise(&s, 40.0, &link, 7).unwrap();
        let (b, _) = receiver_noise(&s, 40.0, &link, 7).unwrap();
        assert_eq!(a, b);
        let (c, snr_c) = receiver_noise(&s, 43.0, &link, 7).unwrap();
        let (_, snr_a) = receiver_noise(&s, 40.0, &link, 7).unwrap();
        let ratio = (snr_a / snr_c).sqrt();
        for (na, nc) in a.x.iter().zip(&c.x) {
            let da = na - C64::new(1.0, 0.0);
            let dc = nc - C64::new(1.0, 0.0);
            assert!((dc - da * ratio).norm() < 1e-12);
        }
    }

    #[test]
    fn ssfm_rejects_bad_input() {
        let w = Waveform::new(
            vec![C64::new(1.0, 0.0); 8],
            vec![C64::new(0.0, 0.0); 8],
            1e12,
        )
        .unwrap();
        let f = FiberSpec::smf(30.0);
        assert!(ssfm_propagate(&w, &f, PowerEvolution::Passive, 0, 1.0).is_err());
        let p = PowerProfile::exponential(20.0, 10.0, 0.0).unwrap();
        assert!(ssfm_propagate(&w, &f, PowerEvolution::Profile(&p), 4, 1.0).is_err());
        let huge = w.scaled(1e200);
        let err = ssfm_propagate(&huge, &f, PowerEvolution::Passive, 4, 1.0).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn passive_attenuation_three_meters() {
        let w = Waveform::new(
            vec![C64::new(1.0, 0.0); 8],
            vec![C64::new(0.0, 0.0); 8],
            1e12,
        )
        .unwrap();
        let f = FiberSpec {
            gamma_per_w_km: 0.0,
            ..FiberSpec::smf(3.0)
        };
        let out = ssfm_propagate(&w, &f, PowerEvolution::Passive, 5, 1.0).unwrap();
        let loss_db = -lin_to_db(out.mean_power() / w.mean_power());
        assert!((loss_db - 0.0006).abs() < 1e-12, "{loss_db}");
    }
}
