//! The counting functional's time derivative `γ`, its three summands, the
//! rate `δ_λ`, the constant `K^φ`, the Grönwall envelope and the term bounds.
//!
//! Inner products written `⟨⟨Ψ, XΨ⟩⟩` below are linear in the first slot,
//! i.e. `⟨⟨Ψ, XΨ⟩⟩ = ⟨XΨ, Ψ⟩` with the physics bracket of
//! [`ManyBodyState::inner`]. With that convention `α̇ = γ` along the coupled
//! flow when φ obeys `i∂ₜφ = (-Δ + A + a|φ|²)φ`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{Orbital, OrbitalDiagnostics};
use crate::lattice::Field;
use crate::manybody::{ManyBodyState, PairPotential};
use crate::projector::{alpha_lambda, apply_p, apply_q, m_lambda_value, sector_decompose};
use crate::tensor;

/// `h_{1,2} Ψ` with `h_{1,2} = N(N-1) v_N(x₁-x₂) - aN|φ|²(x₁) - aN|φ|²(x₂)`.
pub fn h12_apply(psi: &ManyBodyState, phi: &Orbital, v_n: &Field, a: f64) -> Result<ManyBodyState> {
    psi.grid().ensure_same(phi.grid())?;
    psi.grid().ensure_same(v_n.grid())?;
    let n = psi.particles();
    if n < 2 {
        return Err(Error::InvalidParameter("h_12 needs at least two particles".into()));
    }
    let m = psi.points();
    let pair = PairPotential::from_field(v_n)?;
    let rho = phi.density();
    let nf = n as f64;
    let pair_w = nf * (nf - 1.0);
    let s1 = tensor::stride(m, n, 0);
    let s2 = tensor::stride(m, n, 1);
    let mut amps = psi.amplitudes().to_vec();
    for (flat, c) in amps.iter_mut().enumerate() {
        let i = flat / s1;
        let j = (flat / s2) % m;
        *c *= pair_w * pair.value(i, j) - a * nf * (rho[i] + rho[j]);
    }
    Ok(ManyBodyState::from_amplitudes(psi.grid(), n, amps)?)
}

fn weight_diff(psi: &ManyBodyState, phi: &Orbital, lambda: f64, shift: i64) -> Result<ManyBodyState> {
    // (m̂_shift - m̂) with the out-of-range convention m(k) = 0
    let n = psi.particles();
    let m = |k: i64| {
        if k < 0 || k > n as i64 {
            0.0
        } else {
            m_lambda_value(k as usize, n, lambda)
        }
    };
    let dec = sector_decompose(psi, phi)?;
    Ok(dec.weighted(|k| m(k as i64 + shift) - m(k as i64)))
}

/// The three inner products of `γ` and their signed combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaBreakdown {
    /// `⟨⟨Ψ, (m̂₋₁ - m̂) p₁q₂ h₁₂ p₁p₂ Ψ⟩⟩`
    pub inner_a: C64,
    /// `⟨⟨Ψ, q₁q₂ h₁₂ (m̂ - m̂₂) p₁p₂ Ψ⟩⟩`
    pub inner_b: C64,
    /// `⟨⟨Ψ, (m̂₋₁ - m̂) q₁q₂ h₁₂ p₁q₂ Ψ⟩⟩`
    pub inner_c: C64,
    /// `2 Im inner_a`
    pub term_a: f64,
    /// `Im inner_b`
    pub term_b: f64,
    /// `2 Im inner_c`
    pub term_c: f64,
    pub gamma: f64,
}

impl GammaBreakdown {
    fn assemble(inner_a: C64, inner_b: C64, inner_c: C64) -> Self {
        let term_a = 2.0 * inner_a.im;
        let term_b = inner_b.im;
        let term_c = 2.0 * inner_c.im;
        GammaBreakdown { inner_a, inner_b, inner_c, term_a, term_b, term_c, gamma: term_a + term_b + term_c }
    }
}

fn bracket(psi: &ManyBodyState, x_psi: &ManyBodyState) -> Result<C64> {
    x_psi.inner(psi)
}

/// `γ_N^λ(Ψ, φ)` and its three summands.
pub fn gamma_lambda(psi: &ManyBodyState, phi: &Orbital, lambda: f64, v_n: &Field, a: f64) -> Result<GammaBreakdown> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let p2 = apply_p(psi, phi, 2)?;
    let p1p2 = apply_p(&p2, phi, 1)?;
    let q2 = apply_q(psi, phi, 2)?;
    let p1q2 = apply_p(&q2, phi, 1)?;

    let x = h12_apply(&p1p2, phi, v_n, a)?;
    let x = apply_p(&apply_q(&x, phi, 2)?, phi, 1)?;
    let xa = weight_diff(&x, phi, lambda, -1)?;

    let x = weight_diff(&p1p2, phi, lambda, 2)?;
    // m̂ - m̂₂ = -(m̂₂ - m̂)
    let mut x = h12_apply(&x, phi, v_n, a)?;
    x.scale(C64::new(-1.0, 0.0));
    let xb = apply_q(&apply_q(&x, phi, 2)?, phi, 1)?;

    let x = h12_apply(&p1q2, phi, v_n, a)?;
    let x = apply_q(&apply_q(&x, phi, 2)?, phi, 1)?;
    let xc = weight_diff(&x, phi, lambda, -1)?;

    Ok(GammaBreakdown::assemble(bracket(psi, &xa)?, bracket(psi, &xb)?, bracket(psi, &xc)?))
}

/// Centered difference of `α` compared with `γ` at one interior sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivativeSample {
    pub index: usize,
    pub fd_derivative: f64,
    pub gamma: f64,
    pub mismatch: f64,
}

/// Centered differences of a uniformly sampled series against `gamma` at the
/// interior samples.
pub fn centered_mismatch(alpha: &[f64], gamma: &[f64], spacing: f64) -> Result<Vec<DerivativeSample>> {
    if alpha.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: alpha.len() });
    }
    if gamma.len() != alpha.len() {
        return Err(Error::InvalidParameter("alpha and gamma series differ in length".into()));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter(format!("sample spacing must be positive, got {spacing}")));
    }
    Ok((1..alpha.len() - 1)
        .map(|i| {
            let fd = (alpha[i + 1] - alpha[i - 1]) / (2.0 * spacing);
            DerivativeSample { index: i, fd_derivative: fd, gamma: gamma[i], mismatch: (fd - gamma[i]).abs() }
        })
        .collect())
}

/// Compares the centered difference of `α` along synchronized trajectories
/// with `γ` at every interior sample.
pub fn alpha_derivative_check(
    psi_traj: &[ManyBodyState],
    phi_traj: &[Orbital],
    lambda: f64,
    v_n: &Field,
    a: f64,
    spacing: f64,
) -> Result<Vec<DerivativeSample>> {
    if psi_traj.len() != phi_traj.len() {
        return Err(Error::InvalidParameter("trajectories are not synchronized".into()));
    }
    if psi_traj.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: psi_traj.len() });
    }
    let mut alpha = Vec::with_capacity(psi_traj.len());
    let mut gamma = Vec::with_capacity(psi_traj.len());
    for (psi, phi) in psi_traj.iter().zip(phi_traj) {
        alpha.push(alpha_lambda(psi, phi, lambda)?);
        gamma.push(gamma_lambda(psi, phi, lambda, v_n, a)?.gamma);
    }
    centered_mismatch(&alpha, &gamma, spacing)
}

/// `δ_λ = ½ max{1 - λ - 4β, -1 + λ + 3β}`.
pub fn delta_lambda(lambda: f64, beta: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must lie in [0, 1), got {beta}")));
    }
    Ok(0.5 * (1.0 - lambda - 4.0 * beta).max(-1.0 + lambda + 3.0 * beta))
}

/// `(‖Δ|φ|²‖ + ‖φ‖_∞ + 1) ‖φ‖_∞`, i.e. `K^φ` without the factor `C_v`.
pub fn k_phi_shape(diag: &OrbitalDiagnostics) -> f64 {
    (diag.laplacian_density_l2 + diag.linf + 1.0) * diag.linf
}

/// `K^φ = C_v (‖Δ|φ|²‖ + ‖φ‖_∞ + 1) ‖φ‖_∞`.
pub fn k_phi(diag: &OrbitalDiagnostics, c_v: f64) -> Result<f64> {
    if !(c_v > 0.0) || !c_v.is_finite() {
        return Err(Error::InvalidParameter(format!("C_v must be positive, got {c_v}")));
    }
    Ok(c_v * k_phi_shape(diag))
}

/// Which sign the `N^{±δ_λ}` factor of the envelope carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentConvention {
    /// `K N^{-δ_λ}` as in the theorem statement.
    PaperTheoremMinus,
    /// `K N^{+δ_λ}` as in the term bounds; decays when `δ_λ < 0`.
    #[default]
    LemmaPlus,
}

impl ExponentConvention {
    pub fn factor(self, particles: usize, delta: f64) -> f64 {
        let n = particles as f64;
        match self {
            ExponentConvention::PaperTheoremMinus => n.powf(-delta),
            ExponentConvention::LemmaPlus => n.powf(delta),
        }
    }
}

/// Parameters entering the envelope at one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeParams {
    pub c_v: f64,
    pub delta_lambda: f64,
    pub exponent_convention: ExponentConvention,
}

/// Cumulative trapezoid `∫₀ᵗ f`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::UnsortedTimes);
    }
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    Ok(out)
}

/// `E(t) = e^{G(t)} α₀ + (e^{G(t)} - 1) K(t) N^{±δ}` with
/// `G(t) = C_v ∫₀ᵗ ‖φˢ‖_∞² ds` by the trapezoid rule.
#[allow(clippy::too_many_arguments)]
pub fn gronwall_envelope(
    alpha0: f64,
    times: &[f64],
    linf: &[f64],
    c_v: f64,
    k_series: &[f64],
    delta: f64,
    particles: usize,
    convention: ExponentConvention,
) -> Result<Vec<f64>> {
    if k_series.len() != times.len() {
        return Err(Error::InvalidParameter("K series and times differ in length".into()));
    }
    let sq: Vec<f64> = linf.iter().map(|l| l * l).collect();
    let integral = cumulative_trapezoid(times, &sq)?;
    let scale = convention.factor(particles, delta);
    Ok(integral
        .iter()
        .zip(k_series)
        .map(|(g, k)| {
            let e = (c_v * g).exp();
            e * alpha0 + (e - 1.0) * k * scale
        })
        .collect())
}

/// Left-hand sides of the three term bounds and their right-hand sides at a
/// supplied constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LemmaTerms {
    /// `|inner_a|, |inner_b|, |inner_c|`
    pub lhs: [f64; 3],
    /// `K N^{±δ}`, `C‖φ‖_∞² α + K N^{±δ}`, `K N^{±δ}`
    pub bounds: [f64; 3],
    pub alpha: f64,
    pub phi_linf: f64,
    /// `K^φ / C`
    pub k_shape: f64,
    /// `N^{±δ_λ}`
    pub n_factor: f64,
}

impl LemmaTerms {
    /// Smallest `C` (used both as the bound constant and as `C_v` inside
    /// `K^φ`) for which all three bounds hold.
    pub fn min_constant(&self) -> f64 {
        let kn = self.k_shape * self.n_factor;
        let ca = self.lhs[0] / kn;
        let cb = self.lhs[1] / (self.phi_linf * self.phi_linf * self.alpha + kn);
        let cc = self.lhs[2] / kn;
        ca.max(cb).max(cc)
    }

    pub fn holds(&self) -> [bool; 3] {
        [self.lhs[0] <= self.bounds[0], self.lhs[1] <= self.bounds[1], self.lhs[2] <= self.bounds[2]]
    }
}

impl LemmaTerms {
    /// Assembles the terms from an already computed breakdown.
    pub fn from_parts(g: &GammaBreakdown, alpha: f64, diag: &OrbitalDiagnostics, c: f64, n_factor: f64) -> Result<Self> {
        let kn = k_phi(diag, c)? * n_factor;
        Ok(LemmaTerms {
            lhs: [g.inner_a.norm(), g.inner_b.norm(), g.inner_c.norm()],
            bounds: [kn, c * diag.linf * diag.linf * alpha + kn, kn],
            alpha,
            phi_linf: diag.linf,
            k_shape: k_phi_shape(diag),
            n_factor,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn lemma_terms(
    psi: &ManyBodyState,
    phi: &Orbital,
    lambda: f64,
    beta: f64,
    v_n: &Field,
    a: f64,
    c: f64,
    convention: ExponentConvention,
) -> Result<LemmaTerms> {
    let g = gamma_lambda(psi, phi, lambda, v_n, a)?;
    let alpha = alpha_lambda(psi, phi, lambda)?;
    let diag = crate::gp::orbital_diagnostics(phi);
    let n_factor = convention.factor(psi.particles(), delta_lambda(lambda, beta)?);
    LemmaTerms::from_parts(&g, alpha, &diag, c, n_factor)
}

/// Smallest `C_v` with `|γ| <= C_v ‖φ‖_∞² α + C_v k_shape N^{±δ}` at every
/// sample. Returns 0 when `γ` vanishes identically.
pub fn fit_rate_constant(gamma: &[f64], alpha: &[f64], linf: &[f64], k_shape: &[f64], n_factor: f64) -> f64 {
    gamma
        .iter()
        .zip(alpha)
        .zip(linf.iter().zip(k_shape))
        .map(|((g, a), (l, k))| g.abs() / (l * l * a + k * n_factor))
        .fold(0.0, f64::max)
}

/// Operator norms `‖f(x₁-x₂) p₁‖` and `‖p₁ g(x₁-x₂) p₁‖` on the two-particle
/// lattice space and their bounds `‖φ‖_∞‖f‖`, `‖φ‖_∞²‖g‖₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairNormCheck {
    pub f_p: f64,
    pub f_bound: f64,
    pub pgp: f64,
    pub g_bound: f64,
}

/// `f` and `g` are tables over periodic separations: `f[d]` is the value at
/// `x₁ - x₂ = d·h (mod L)`.
pub fn pair_operator_norms(f: &[C64], g: &[C64], phi: &Orbital) -> Result<PairNormCheck> {
    let m = phi.grid().points();
    if f.len() != m || g.len() != m {
        return Err(Error::GridMismatch);
    }
    let h = phi.grid().spacing();
    let u: Vec<C64> = phi.values().iter().map(|v| v * h.sqrt()).collect();
    let mm = m * m;
    // orthonormal lattice basis e_{i1} ⊗ e_{i2}, flat index i1 * m + i2
    let p1 = DMatrix::from_fn(mm, mm, |r, c| {
        let (r1, r2) = (r / m, r % m);
        let (c1, c2) = (c / m, c % m);
        if r2 == c2 {
            u[r1] * u[c1].conj()
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let diag = |t: &[C64]| DMatrix::from_fn(mm, mm, |r, c| if r == c { t[(r / m + m - r % m) % m] } else { C64::new(0.0, 0.0) });
    let fp = diag(f) * &p1;
    let pgp = &p1 * diag(g) * &p1;
    let opnorm = |a: DMatrix<C64>| a.singular_values().iter().copied().fold(0.0, f64::max);
    let linf = phi.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let f_l2 = (h * f.iter().map(|x| x.norm_sqr()).sum::<f64>()).sqrt();
    let g_l1 = h * g.iter().map(|x| x.norm()).sum::<f64>();
    Ok(PairNormCheck { f_p: opnorm(fp), f_bound: linf * f_l2, pgp: opnorm(pgp), g_bound: linf * linf * g_l1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::orbital_diagnostics;
    use crate::lattice::{sample, scaled_interaction, Grid, InteractionShape, InteractionSpec};
    use crate::manybody::{product_state, random_symmetric_state};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box_potential(grid: &Grid, n: usize) -> Field {
        let spec = InteractionSpec::new(InteractionShape::Box, 1.0, 1.0).unwrap();
        scaled_interaction(&spec, n, 0.2, grid).unwrap()
    }

    #[test]
    fn h12_reduces_without_interaction() {
        let g = Grid::new(4, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_symmetric_state(&g, 3, &mut rng).unwrap();
        let phi = Orbital::gaussian(&g, 1.0, 0.0).unwrap();
        let zero = Field::zeros(&g);
        assert!(h12_apply(&psi, &phi, &zero, 0.0).unwrap().norm() == 0.0);

        let a = 0.7;
        let out = h12_apply(&psi, &phi, &zero, a).unwrap();
        let rho = phi.density();
        for (flat, (o, p)) in out.amplitudes().iter().zip(psi.amplitudes()).enumerate() {
            let (i, j) = (flat / 16, (flat / 4) % 4);
            let expected = p * (-a * 3.0 * (rho[i] + rho[j]));
            assert!((o - expected).norm() < 1e-14);
        }
        let one = product_state(&phi, 1).unwrap();
        assert!(h12_apply(&one, &phi, &zero, a).is_err());
    }

    #[test]
    fn gamma_vanishes_on_product_states() {
        let g = Grid::new(8, 8.0).unwrap();
        let phi = Orbital::gaussian(&g, 1.0, 0.3).unwrap();
        let v = box_potential(&g, 3);
        let psi = product_state(&phi, 3).unwrap();
        let b = gamma_lambda(&psi, &phi, 0.5, &v, 1.0).unwrap();
        assert!(b.term_a.abs() < 1e-12 && b.term_b.abs() < 1e-12 && b.term_c.abs() < 1e-12);
    }

    #[test]
    fn gamma_vanishes_without_interaction() {
        let g = Grid::new(4, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = random_symmetric_state(&g, 3, &mut rng).unwrap();
        let phi = Orbital::gaussian(&g, 1.0, 0.0).unwrap();
        let b = gamma_lambda(&psi, &phi, 0.5, &Field::zeros(&g), 0.0).unwrap();
        assert_eq!(b.gamma, 0.0);
    }

    #[test]
    fn gamma_assembles_its_terms() {
        let g = Grid::new(4, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let psi = random_symmetric_state(&g, 3, &mut rng).unwrap();
        let phi = Orbital::gaussian(&g, 0.8, 0.2).unwrap();
        let b = gamma_lambda(&psi, &phi, 0.4, &box_potential(&g, 3), 1.3).unwrap();
        assert_eq!(b.gamma, b.term_a + b.term_b + b.term_c);
        assert_eq!(b.term_a, 2.0 * b.inner_a.im);
        assert!(b.gamma.abs() > 1e-6);
    }

    #[test]
    fn delta_examples() {
        assert_abs_diff_eq!(delta_lambda(0.5, 0.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(delta_lambda(0.3, 0.2).unwrap(), -0.05, epsilon = 1e-15);
        assert!(delta_lambda(1.0, 0.2).is_err());
        assert!(delta_lambda(0.5, 1.0).is_err());
        let min = (1..1000).map(|i| delta_lambda(i as f64 / 1000.0, 1.0 / 3.0).unwrap()).fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-12);
    }

    #[test]
    fn delta_branches_cross() {
        for beta in [0.05f64, 0.1, 0.2] {
            let lambda = 1.0 - 3.5 * beta;
            let a = 1.0 - lambda - 4.0 * beta;
            let b = -1.0 + lambda + 3.0 * beta;
            assert!((a - b).abs() < 1e-12);
            assert_abs_diff_eq!(delta_lambda(lambda, beta).unwrap(), 0.5 * a, epsilon = 1e-12);
        }
    }

    #[test]
    fn k_phi_examples() {
        let g = Grid::new(16, 1.0).unwrap();
        let flat = Orbital::normalized(sample(&g, |_| 1.0)).unwrap();
        assert_abs_diff_eq!(k_phi(&orbital_diagnostics(&flat), 1.0).unwrap(), 2.0, epsilon = 1e-12);
        assert!(k_phi(&orbital_diagnostics(&flat), 0.0).is_err());

        let g = Grid::new(256, 20.0).unwrap();
        let s: f64 = 1.0;
        let phi = Orbital::gaussian(&g, s, 0.0).unwrap();
        let linf = (2.0 * std::f64::consts::PI * s * s).powf(-0.25);
        let lap = (3.0 / (8.0 * std::f64::consts::PI.sqrt())).sqrt() * s.powf(-2.5);
        let expected = 2.0 * (lap + linf + 1.0) * linf;
        let k = k_phi(&orbital_diagnostics(&phi), 2.0).unwrap();
        assert!((k / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn envelope_examples() {
        let times = [0.0, 0.5, 1.0];
        let linf = [1.0; 3];
        let zero = gronwall_envelope(0.0, &times, &linf, 1.0, &[0.0; 3], 0.1, 4, ExponentConvention::LemmaPlus).unwrap();
        assert!(zero.iter().all(|e| *e == 0.0));
        let e = gronwall_envelope(0.3, &times, &linf, 2.0, &[1.0; 3], 0.1, 4, ExponentConvention::LemmaPlus).unwrap();
        assert_eq!(e[0], 0.3);
        assert!(gronwall_envelope(0.3, &[0.0, 1.0, 0.5], &linf, 1.0, &[1.0; 3], 0.1, 4, ExponentConvention::LemmaPlus).is_err());
    }

    #[test]
    fn envelope_constant_linf_closed_form() {
        let c: f64 = 0.49;
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let linf = vec![c.sqrt(); times.len()];
        let k = vec![0.8; times.len()];
        let (cv, a0, delta, n) = (1.7, 0.02, -0.05, 5usize);
        for conv in [ExponentConvention::LemmaPlus, ExponentConvention::PaperTheoremMinus] {
            let e = gronwall_envelope(a0, &times, &linf, cv, &k, delta, n, conv).unwrap();
            let sign = if conv == ExponentConvention::LemmaPlus { 1.0 } else { -1.0 };
            for (t, ei) in times.iter().zip(&e) {
                let g = (cv * c * t).exp();
                let closed = g * a0 + (g - 1.0) * 0.8 * (n as f64).powf(sign * delta);
                assert!((ei - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lemma_terms_vanish_on_product() {
        let g = Grid::new(8, 8.0).unwrap();
        let phi = Orbital::gaussian(&g, 1.0, 0.0).unwrap();
        let psi = product_state(&phi, 3).unwrap();
        let t = lemma_terms(&psi, &phi, 0.3, 0.2, &box_potential(&g, 3), 1.0, 1.0, ExponentConvention::LemmaPlus).unwrap();
        assert!(t.lhs.iter().all(|x| *x < 1e-12));
        assert!(t.bounds.iter().all(|x| *x >= 0.0));
        assert_eq!(t.min_constant(), t.min_constant().max(0.0));
        let t = lemma_terms(&psi, &phi, 0.3, 0.2, &Field::zeros(&g), 0.0, 1.0, ExponentConvention::LemmaPlus).unwrap();
        assert!(t.lhs.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn min_constant_is_tight() {
        let g = Grid::new(4, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let psi = random_symmetric_state(&g, 3, &mut rng).unwrap();
        let phi = Orbital::gaussian(&g, 1.0, 0.0).unwrap();
        let v = box_potential(&g, 3);
        let probe = lemma_terms(&psi, &phi, 0.3, 0.2, &v, 1.0, 1.0, ExponentConvention::LemmaPlus).unwrap();
        let c = probe.min_constant();
        let at = lemma_terms(&psi, &phi, 0.3, 0.2, &v, 1.0, c * (1.0 + 1e-9), ExponentConvention::LemmaPlus).unwrap();
        assert!(at.holds().iter().all(|h| *h));
        let below = lemma_terms(&psi, &phi, 0.3, 0.2, &v, 1.0, c * 0.99, ExponentConvention::LemmaPlus).unwrap();
        assert!(below.holds().iter().any(|h| !*h));
    }

    #[test]
    fn centered_mismatch_of_quadratic_is_exact() {
        let dt = 0.1;
        let alpha: Vec<f64> = (0..6).map(|i| (i as f64 * dt).powi(2)).collect();
        let gamma: Vec<f64> = (0..6).map(|i| 2.0 * i as f64 * dt).collect();
        let out = centered_mismatch(&alpha, &gamma, dt).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|s| s.mismatch < 1e-12));
        assert!(matches!(centered_mismatch(&alpha[..2], &gamma[..2], dt), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn pair_norms_match_closed_forms() {
        // sup over x₂ of the weighted column norms
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Grid::new(5, 2.0).unwrap();
        let h = g.spacing();
        let vals = (0..5).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let phi = Orbital::normalized(Field::new(&g, vals).unwrap()).unwrap();
        let f: Vec<C64> = (0..5).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let gg: Vec<C64> = (0..5).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let check = pair_operator_norms(&f, &gg, &phi).unwrap();
        let rho = phi.density();
        let fp = (0..5)
            .map(|j| (h * (0..5).map(|i| f[(i + 5 - j) % 5].norm_sqr() * rho[i]).sum::<f64>()).sqrt())
            .fold(0.0, f64::max);
        let pgp = (0..5).map(|j| (h * (0..5).map(|i| gg[(i + 5 - j) % 5] * rho[i]).sum::<C64>()).norm()).fold(0.0, f64::max);
        assert_abs_diff_eq!(check.f_p, fp, epsilon = 1e-12);
        assert_abs_diff_eq!(check.pgp, pgp, epsilon = 1e-12);
    }
}
