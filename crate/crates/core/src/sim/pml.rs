//! Complex-frequency-shifted convolutional PML.
//!
//! Coefficients follow Roden & Gedney's recursive-convolution form with
//! polynomial conductivity grading and a linearly graded shift `alpha`
//! (largest at the vacuum interface). Stretching `kappa` is fixed at 1:
//! structures are kept away from the absorber, so the layer only has to
//! swallow traveling waves.

/// Grading exponent of the conductivity profile.
const GRADE: f64 = 3.0;
/// Multiplier on the textbook optimal conductivity `0.8 (m+1) / dx`.
const SIGMA_SCALE: f64 = 1.0;
/// Peak of the complex-frequency shift at the interface.
const ALPHA_MAX: f64 = 0.05;

/// Recursive-convolution coefficients along one axis, tabulated on the
/// integer and half-offset lattices.
#[derive(Debug, Clone)]
pub struct AxisCoeffs {
    pub b_int: Vec<f64>,
    pub c_int: Vec<f64>,
    pub b_half: Vec<f64>,
    pub c_half: Vec<f64>,
    /// Index ranges (lo, hi) that cover the two absorber slabs, padded by
    /// one cell; outside these ranges every `c` is zero.
    pub slabs: [(usize, usize); 2],
}

impl AxisCoeffs {
    pub fn build(n: usize, n_pml: usize, h: f64, dt: f64) -> AxisCoeffs {
        let sigma_max = SIGMA_SCALE * 0.8 * (GRADE + 1.0) / h;

        // Depth measured in cells keeps mirrored lattice positions bitwise
        // identical, which the vacuum-symmetry contract relies on.
        let coeff_at = |pos_cells: f64| -> (f64, f64) {
            if n_pml == 0 {
                return (1.0, 0.0);
            }
            let depth = n_pml as f64;
            let d = (depth - pos_cells).max(pos_cells - (n as f64 - depth)).max(0.0);
            if d <= 0.0 {
                return (1.0, 0.0);
            }
            let rho = (d / depth).min(1.0);
            let sigma = sigma_max * rho.powf(GRADE);
            let alpha = ALPHA_MAX * (1.0 - rho);
            let b = (-(sigma + alpha) * dt).exp();
            let c = if sigma + alpha > 0.0 { sigma * (b - 1.0) / (sigma + alpha) } else { 0.0 };
            (b, c)
        };

        let mut b_int = vec![1.0; n];
        let mut c_int = vec![0.0; n];
        let mut b_half = vec![1.0; n];
        let mut c_half = vec![0.0; n];
        for i in 0..n {
            let (b, c) = coeff_at(i as f64);
            b_int[i] = b;
            c_int[i] = c;
            let (b, c) = coeff_at(i as f64 + 0.5);
            b_half[i] = b;
            c_half[i] = c;
        }

        let pad = (n_pml + 2).min(n);
        AxisCoeffs {
            b_int,
            c_int,
            b_half,
            c_half,
            slabs: [(0, pad), (n.saturating_sub(pad), n)],
        }
    }
}
