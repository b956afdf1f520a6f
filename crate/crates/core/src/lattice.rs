//! Periodic one-dimensional lattice: grid geometry, sampled fields, discrete
//! norms, spectral differentiation and the scaled pair-interaction family.
//!
//! Grid points sit at `x_i = -L/2 + i h` with `h = L/M`, so the domain is
//! `[-L/2, L/2)` with periodic wrap. All integrals are rectangle-rule
//! quadratures with weight `h`, which is exact for trigonometric polynomials
//! resolved by the grid.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-L/2, L/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    points: usize,
    length: f64,
    spacing: f64,
    wavenumbers: Vec<f64>,
}

impl Grid {
    pub fn new(points: usize, length: f64) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {points}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        let spacing = length / points as f64;
        let base = 2.0 * PI / length;
        let wavenumbers = (0..points)
            .map(|j| {
                let j = j as i64;
                let signed = if 2 * j < points as i64 { j } else { j - points as i64 };
                base * signed as f64
            })
            .collect();
        Ok(Self { points, length, spacing, wavenumbers })
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Angular wavenumbers in FFT order (non-negative first, then negative).
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    #[inline]
    pub fn position(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.position(i)).collect()
    }

    /// Wraps a displacement into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length;
        let y = (x + 0.5 * l).rem_euclid(l);
        y - 0.5 * l
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.points == other.points && self.length == other.length {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid(M={}, L={}, h={})", self.points, self.length, self.spacing)
    }
}

/// Complex samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<C64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.points()
            )));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.points()] }
    }

    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Quadrature inner product `h Σ conj(self) other`.
    pub fn inner(&self, other: &Field) -> Result<C64> {
        self.grid.ensure_same(&other.grid)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.spacing())
    }

    pub fn norm(&self) -> f64 {
        discrete_norms(self).l2
    }

    pub fn scale(&mut self, c: C64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Spectral Laplacian `Δf` (wavenumber multiplier `-k²`).
    pub fn spectral_laplacian(&self) -> Field {
        let spectral = Spectral::new(&self.grid);
        let mut out = self.values.clone();
        let mult: Vec<C64> = self.grid.wavenumbers().iter().map(|k| C64::new(-k * k, 0.0)).collect();
        let mut scratch = spectral.scratch();
        spectral.apply_multiplier(&mut out, &mult, &mut scratch);
        Field { grid: self.grid.clone(), values: out }
    }
}

/// Samples a real function at the grid points.
pub fn sample(grid: &Grid, f: impl Fn(f64) -> f64) -> Field {
    let values = grid.positions().into_iter().map(|x| C64::new(f(x), 0.0)).collect();
    Field { grid: grid.clone(), values }
}

/// Samples a complex function at the grid points.
pub fn sample_complex(grid: &Grid, f: impl Fn(f64) -> C64) -> Field {
    let values = grid.positions().into_iter().map(f).collect();
    Field { grid: grid.clone(), values }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub l1: f64,
    pub linf: f64,
}

/// Quadrature-weighted `(l2, l1, linf)` norms.
pub fn discrete_norms(f: &Field) -> Norms {
    let h = f.grid.spacing();
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut max = 0.0f64;
    for v in &f.values {
        let a = v.norm();
        sq += a * a;
        abs += a;
        max = max.max(a);
    }
    Norms { l2: (h * sq).sqrt(), l1: h * abs, linf: max }
}

/// FFT plans for one grid, applied along contiguous buffers of length `M`.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    points: usize,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("points", &self.points).finish()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points());
        let inverse = planner.plan_fft_inverse(grid.points());
        Self { forward, inverse, points: grid.points() }
    }

    pub fn scratch(&self) -> Vec<C64> {
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        vec![C64::new(0.0, 0.0); len]
    }

    /// `buf <- IFFT(mult · FFT(buf))`, normalized.
    pub fn apply_multiplier(&self, buf: &mut [C64], mult: &[C64], scratch: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.points);
        self.forward.process_with_scratch(buf, scratch);
        let norm = 1.0 / self.points as f64;
        for (b, m) in buf.iter_mut().zip(mult) {
            *b *= m * norm;
        }
        self.inverse.process_with_scratch(buf, scratch);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionShape {
    /// `A` on `|x| <= R`.
    Box,
    /// `A exp(-x²/(2σ²))` with `σ = R/3`, truncated at `|x| <= R`.
    Gaussian,
    /// `A` on `|x| <= R/2` and `-A/2` on `R/2 < |x| <= R`; net area `A R / 2`.
    DoubleWellSigned,
}

/// Even, bounded, compactly supported pair-interaction profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub shape: InteractionShape,
    pub amplitude: f64,
    pub radius: f64,
}

impl InteractionSpec {
    pub fn new(shape: InteractionShape, amplitude: f64, radius: f64) -> Result<Self> {
        let spec = Self { shape, amplitude, radius };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "interaction radius must be positive, got {}",
                self.radius
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter("interaction amplitude must be finite".into()));
        }
        Ok(())
    }

    /// Unscaled profile `v(x)`.
    pub fn profile(&self, x: f64) -> f64 {
        let r = x.abs();
        if r > self.radius {
            return 0.0;
        }
        match self.shape {
            InteractionShape::Box => self.amplitude,
            InteractionShape::Gaussian => {
                let sigma = self.radius / 3.0;
                self.amplitude * (-0.5 * (x / sigma).powi(2)).exp()
            }
            InteractionShape::DoubleWellSigned => {
                if r <= 0.5 * self.radius {
                    self.amplitude
                } else {
                    -0.5 * self.amplitude
                }
            }
        }
    }

    /// Closed-form `∫ v dx`.
    pub fn exact_integral(&self) -> f64 {
        match self.shape {
            InteractionShape::Box => 2.0 * self.amplitude * self.radius,
            InteractionShape::Gaussian => {
                // ∫_{-R}^{R} exp(-x²/2σ²) = σ √(2π) erf(R / (σ√2)) with R = 3σ.
                let sigma = self.radius / 3.0;
                self.amplitude * sigma * (2.0 * PI).sqrt() * erf(3.0 / 2f64.sqrt())
            }
            InteractionShape::DoubleWellSigned => 0.5 * self.amplitude * self.radius,
        }
    }
}

// Maclaurin series; only evaluated at x = 3/√2.
fn erf(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-17 {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

/// Samples `v_N^β(x) = N^{-1+β} v(N^β x)` (one spatial dimension).
pub fn scaled_interaction(spec: &InteractionSpec, particles: usize, beta: f64, grid: &Grid) -> Result<Field> {
    spec.validate()?;
    if particles == 0 {
        return Err(Error::InvalidParameter("particle number must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must lie in [0, 1), got {beta}")));
    }
    let n = particles as f64;
    let stretch = n.powf(beta);
    let support = spec.radius / stretch;
    if support > 0.5 * grid.length() {
        return Err(Error::InvalidParameter(format!(
            "scaled support {support} exceeds half the domain {}",
            0.5 * grid.length()
        )));
    }
    let prefactor = n.powf(-1.0 + beta);
    Ok(sample(grid, |x| prefactor * spec.profile(stretch * x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_construction() {
        let g = Grid::new(4, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.positions(), vec![-2.0, -1.0, 0.0, 1.0]);
        assert_eq!(Grid::new(2, 1.0).unwrap().spacing(), 0.5);
        assert!(Grid::new(1, 1.0).is_err());
        assert!(Grid::new(4, 0.0).is_err());
        assert!(Grid::new(4, -1.0).is_err());
        let g = Grid::new(7, 3.3).unwrap();
        assert_abs_diff_eq!(g.spacing() * 7.0, 3.3, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_of_cosine_is_eigenfunction() {
        let g = Grid::new(16, 8.0).unwrap();
        let k = 2.0 * PI / 8.0;
        let f = sample(&g, |x| (k * x).cos());
        let lap = f.spectral_laplacian();
        let err = f
            .values()
            .iter()
            .zip(lap.values())
            .map(|(a, b)| (b - a * (-k * k)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = Grid::new(9, 5.0).unwrap();
        let lap = sample(&g, |_| 3.0).spectral_laplacian();
        assert!(discrete_norms(&lap).linf < 1e-13);
    }

    #[test]
    fn sampling_examples() {
        let g = Grid::new(8, 8.0).unwrap();
        assert!(sample(&g, |_| 1.0).values().iter().all(|v| *v == C64::new(1.0, 0.0)));
        let ind = sample(&g, |x| if x.abs() <= 0.5 { 1.0 } else { 0.0 });
        for (x, v) in g.positions().iter().zip(ind.values()) {
            assert_eq!(v.re, if x.abs() <= 0.5 { 1.0 } else { 0.0 });
        }
        let fine = Grid::new(64, 8.0).unwrap();
        let spec = InteractionSpec::new(InteractionShape::Gaussian, 1.0, 1.0).unwrap();
        let gauss = sample(&fine, |x| spec.profile(x));
        for (x, v) in fine.positions().iter().zip(gauss.values()) {
            if x.abs() > 1.0 {
                assert_eq!(v.re, 0.0);
            }
        }
    }

    #[test]
    fn norms_examples() {
        let g = Grid::new(4, 4.0).unwrap();
        let n = discrete_norms(&sample(&g, |_| 1.0));
        assert_eq!((n.l2, n.l1, n.linf), (2.0, 4.0, 1.0));
        let z = discrete_norms(&Field::zeros(&g));
        assert_eq!((z.l2, z.l1, z.linf), (0.0, 0.0, 0.0));

        let g = Grid::new(8, 8.0).unwrap();
        let mut spike = Field::zeros(&g);
        spike.values_mut()[3] = C64::new(1.0 / g.spacing(), 0.0);
        assert_abs_diff_eq!(discrete_norms(&spike).l1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn scaled_interaction_examples() {
        let g = Grid::new(64, 8.0).unwrap();
        let box_ = InteractionSpec::new(InteractionShape::Box, 2.0, 0.5).unwrap();
        let base = sample(&g, |x| box_.profile(x));

        // beta = 0 divides by N pointwise.
        let v = scaled_interaction(&box_, 5, 0.0, &g).unwrap();
        for (a, b) in v.values().iter().zip(base.values()) {
            assert_abs_diff_eq!(a.re, b.re / 5.0, epsilon = 1e-15);
        }
        // N = 1 is the identity for every beta.
        for beta in [0.0, 0.3, 0.9] {
            assert_eq!(scaled_interaction(&box_, 1, beta, &g).unwrap(), base);
        }
        // analytic: scaled box has amplitude 2·16^-0.75 and radius 0.25, area 1/8
        let fine = Grid::new(4096, 8.0).unwrap();
        let scaled = scaled_interaction(&box_, 16, 0.25, &fine).unwrap();
        let base_l1 = 2.0 * 2.0 * 0.5;
        let ratio = discrete_norms(&scaled).l1 / base_l1;
        assert!((ratio * 16.0 - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn scaled_interaction_errors() {
        let g = Grid::new(16, 4.0).unwrap();
        let wide = InteractionSpec::new(InteractionShape::Box, 1.0, 3.0).unwrap();
        assert!(scaled_interaction(&wide, 1, 0.2, &g).is_err());
        assert!(scaled_interaction(&wide, 4, 0.9, &g).is_ok());
        assert!(scaled_interaction(&wide, 4, 1.0, &g).is_err());
        assert!(scaled_interaction(&wide, 4, -0.1, &g).is_err());
        assert!(InteractionSpec::new(InteractionShape::Box, 1.0, 0.0).is_err());
    }

    #[test]
    fn scaled_l1_converges_to_coupling() {
        // N · ∫ v_N quadrature approaches ∫ v as the grid is refined.
        let spec = InteractionSpec::new(InteractionShape::Box, 1.3, 0.7).unwrap();
        let exact = spec.exact_integral();
        let mut errs = Vec::new();
        for m in [128usize, 256, 512, 1024, 2048] {
            let g = Grid::new(m, 7.3).unwrap();
            let v = scaled_interaction(&spec, 4, 0.3, &g).unwrap();
            let integral: f64 = v.values().iter().map(|c| c.re).sum::<f64>() * g.spacing() * 4.0;
            errs.push((integral - exact).abs());
        }
        assert!(errs.last().unwrap() < &5e-3, "{errs:?}");
        assert!(errs[errs.len() - 1] < errs[0]);
    }

    #[test]
    fn exact_integrals() {
        let g = Grid::new(1 << 14, 8.0).unwrap();
        for shape in [InteractionShape::Box, InteractionShape::Gaussian, InteractionShape::DoubleWellSigned] {
            let spec = InteractionSpec::new(shape, 1.7, 1.1).unwrap();
            let q: f64 = sample(&g, |x| spec.profile(x)).values().iter().map(|c| c.re).sum::<f64>() * g.spacing();
            assert!((q / spec.exact_integral() - 1.0).abs() < 1e-3, "{shape:?}");
        }
    }

    fn random_field(g: &Grid, seed: &[f64]) -> Field {
        let vals = (0..g.points())
            .map(|i| C64::new(seed[(2 * i) % seed.len()], seed[(2 * i + 1) % seed.len()]))
            .collect();
        Field::new(g, vals).unwrap()
    }

    proptest! {
        #[test]
        fn laplacian_is_self_adjoint(
            m in 2usize..24,
            l in 0.5f64..20.0,
            a in prop::collection::vec(-1.0f64..1.0, 48),
            b in prop::collection::vec(-1.0f64..1.0, 48),
        ) {
            let g = Grid::new(m, l).unwrap();
            let f = random_field(&g, &a);
            let h = random_field(&g, &b);
            let lhs = f.inner(&h.spectral_laplacian()).unwrap();
            let rhs = f.spectral_laplacian().inner(&h).unwrap();
            let scale = 1.0 + lhs.norm();
            prop_assert!((lhs - rhs).norm() < 1e-12 * scale);
        }

        #[test]
        fn scaled_interaction_is_even(
            half in 2usize..40,
            beta in 0.0f64..0.9,
            n in 1usize..8,
            shape in prop_oneof![
                Just(InteractionShape::Box),
                Just(InteractionShape::Gaussian),
                Just(InteractionShape::DoubleWellSigned)
            ],
        ) {
            let m = 2 * half;
            let g = Grid::new(m, 10.0).unwrap();
            let spec = InteractionSpec::new(shape, 1.5, 2.0).unwrap();
            let v = scaled_interaction(&spec, n, beta, &g).unwrap();
            // x_i = -L/2 + i h is mirrored by index M - i (and 0 by M/2 offset).
            let center = m / 2;
            for d in 1..center {
                let plus = v.values()[center + d];
                let minus = v.values()[center - d];
                prop_assert!((plus - minus).norm() <= 1e-14 * plus.norm().max(1.0));
            }
        }

        #[test]
        fn scaled_l2_scaling(beta in 0.0f64..0.6, n in 2usize..10) {
            // refine enough that the sampled box width is resolved on both scales
            let g = Grid::new(1 << 14, 8.0).unwrap();
            let spec = InteractionSpec::new(InteractionShape::Box, 1.0, 1.0).unwrap();
            let base = discrete_norms(&sample(&g, |x| spec.profile(x))).l2;
            let scaled = discrete_norms(&scaled_interaction(&spec, n, beta, &g).unwrap()).l2;
            let expected = (n as f64).powf(-1.0 + beta / 2.0) * base;
            prop_assert!((scaled / expected - 1.0).abs() < 2e-3);
        }
    }
}
