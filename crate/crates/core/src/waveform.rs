//! Source current waveform and its analytic spectrum.
//!
//! The drive is `J(t) = J0 [4 (g t)^3 - (g t)^4] e^{-g t}` for `t >= 0`:
//! zero at `t = 0` with continuous first and second derivatives, and damped
//! beyond `t ~ 25/g` so late-time fields ring down inside the window.
//!
//! Transform convention used throughout the crate:
//! `f(t) = (1/2pi) \int dw f(w) e^{-iwt}`, hence
//! `f(w) = \int dt f(t) e^{+iwt}`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceWaveform {
    pub j0: f64,
    /// Cut-off rate `g` (`c/L0`).
    pub gamma: f64,
    pub dt: f64,
    /// Samples at the half steps `(n + 1/2) dt` where the current enters
    /// the discrete Ampere update.
    pub samples: Vec<f64>,
}

impl SourceWaveform {
    /// Build `n` injection samples. Errors when the window `n*dt` ends
    /// before the waveform has decayed (`< 25/g`).
    pub fn build(gamma: f64, j0: f64, dt: f64, n: usize) -> Result<SourceWaveform> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidConfig("source gamma must be positive".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig("source dt must be positive".into()));
        }
        if (n as f64) * dt < 25.0 / gamma {
            return Err(Error::InvalidConfig(format!(
                "source window {:.3} shorter than decay time {:.3}",
                n as f64 * dt,
                25.0 / gamma
            )));
        }
        let samples = (0..n).map(|k| eval(gamma, j0, (k as f64 + 0.5) * dt)).collect();
        Ok(SourceWaveform { j0, gamma, dt, samples })
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Analytic continuous-time spectrum `J(w) = 24 J0 g^3 (-iw) / (g - iw)^5`.
    pub fn spectrum(&self, omega: f64) -> Complex64 {
        spectrum(self.gamma, self.j0, omega)
    }

    /// `w / J(w) = i (g - iw)^5 / (24 J0 g^3)`, finite at `w = 0`.
    pub fn omega_over_spectrum(&self, omega: f64) -> Complex64 {
        let g = Complex64::new(self.gamma, -omega);
        Complex64::new(0.0, 1.0) * g.powu(5) / (24.0 * self.j0 * self.gamma.powi(3))
    }
}

/// Closed-form waveform value at time `t` (zero for `t < 0`).
pub fn eval(gamma: f64, j0: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let x = gamma * t;
    j0 * (4.0 * x.powi(3) - x.powi(4)) * (-x).exp()
}

/// Analytic spectrum of the closed-form waveform (see module docs for the
/// sign convention).
pub fn spectrum(gamma: f64, j0: f64, omega: f64) -> Complex64 {
    let g = Complex64::new(gamma, -omega);
    24.0 * j0 * gamma.powi(3) * Complex64::new(0.0, -omega) / g.powu(5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero_with_flat_leading_derivatives() {
        assert_eq!(eval(2.5, 1.0, 0.0), 0.0);
        // J ~ 4 g^3 t^3 near zero: first and second divided differences at
        // t = 0 vanish to O(dt^3) and O(dt^2) respectively.
        let g = 2.5;
        let dt = 1e-3;
        let j1 = eval(g, 1.0, dt);
        let j2 = eval(g, 1.0, 2.0 * dt);
        assert!((j1 / dt).abs() < 10.0 * dt * dt * g.powi(3));
        assert!(((j2 - 2.0 * j1) / (dt * dt)).abs() < 50.0 * dt * g.powi(3));
    }

    #[test]
    fn peak_location_matches_derivative_root() {
        // dJ/dt = 0 at x^2 (x^2 - 8x + 12) = 0 -> x = 2 (global max of |J|
        // on the positive lobe is at x = 2... the deepest extremum overall
        // is checked by dense sampling).
        let g = 2.5;
        let mut best_t = 0.0;
        let mut best = 0.0;
        let mut t = 0.0;
        while t < 20.0 {
            let v = eval(g, 1.0, t).abs();
            if v > best {
                best = v;
                best_t = t;
            }
            t += 1e-5;
        }
        let x = g * best_t;
        // roots of x^2 - 8x + 12: x = 2 and x = 6
        let r1 = 2.0;
        let r2 = 6.0;
        assert!(
            (x - r1).abs() < 1e-3 || (x - r2).abs() < 1e-3,
            "peak at x = {x}, expected a root of x^2 - 8x + 12"
        );
    }

    #[test]
    fn decay_threshold_by_cutoff_time() {
        // gamma = 2.5 c/L0: |J| has fallen below ~2.2e-6 of its peak by
        // t = 10 L0/c (= 25/gamma) and below 1e-6 shortly after.
        let g = 2.5;
        let peak = eval(g, 1.0, 2.0 / g).abs().max(eval(g, 1.0, 6.0 / g).abs());
        let at_cutoff = eval(g, 1.0, 25.0 / g).abs() / peak;
        assert!(at_cutoff < 3e-6, "ratio at cutoff {at_cutoff}");
        assert!(eval(g, 1.0, 26.0 / g).abs() / peak < 1e-6);
        // and it keeps decaying
        assert!(eval(g, 1.0, 30.0 / g).abs() / peak < 1e-7);
    }

    #[test]
    fn window_too_short_is_rejected() {
        assert!(SourceWaveform::build(2.5, 1.0, 0.05, 100).is_err());
        assert!(SourceWaveform::build(2.5, 1.0, 0.05, 400).is_ok());
    }

    #[test]
    fn zero_mean_in_time() {
        // J(w=0) = 0 forced by the iw factor; check by quadrature.
        let g = 2.5;
        let dt = 1e-4;
        let mut integral = 0.0;
        let mut t = 0.0;
        while t < 60.0 {
            integral += eval(g, 1.0, t) * dt;
            t += dt;
        }
        let scale: f64 = 1.0 / g; // natural area scale of one lobe
        assert!(integral.abs() < 1e-3 * scale, "integral {integral}");
        assert!(spectrum(g, 1.0, 0.0).norm() == 0.0);
    }

    #[test]
    fn spectrum_matches_discrete_transform_over_source_band() {
        // Riemann transform of the sampled waveform against the closed form,
        // relative error < 1e-3 over [0, 10 gamma].
        let g: f64 = 2.5;
        let dt = 2e-4;
        let n = (60.0 / dt) as usize;
        let mut max_rel: f64 = 0.0;
        let mut w = 0.25;
        while w <= 10.0 * g {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let t = (k as f64 + 0.5) * dt;
                acc += eval(g, 1.0, t) * Complex64::new(0.0, w * t).exp() * dt;
            }
            let exact = spectrum(g, 1.0, w);
            let rel = (acc - exact).norm() / exact.norm();
            max_rel = max_rel.max(rel);
            w += 0.25;
        }
        assert!(max_rel < 1e-3, "max relative error {max_rel}");
    }

    #[test]
    fn spectrum_high_frequency_rolloff_is_fourth_power() {
        let g = 2.5;
        let a = spectrum(g, 1.0, 100.0).norm();
        let b = spectrum(g, 1.0, 200.0).norm();
        let slope = (b / a).log2();
        assert!((slope + 4.0).abs() < 0.1, "rolloff slope {slope}");
    }

    #[test]
    fn omega_over_spectrum_finite_at_zero() {
        let w = SourceWaveform::build(2.5, 1.0, 0.05, 1200).unwrap();
        let v = w.omega_over_spectrum(0.0);
        assert!(v.norm().is_finite() && v.norm() > 0.0);
        // consistency with the spectrum away from zero
        let at = 1.7;
        let direct = Complex64::new(at, 0.0) / w.spectrum(at);
        let closed = w.omega_over_spectrum(at);
        assert!((direct - closed).norm() < 1e-9 * closed.norm());
    }
}
