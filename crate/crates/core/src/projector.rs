//! Counting operators relative to a condensate orbital φ.
//!
//! `p_j = |φ(x_j)⟩⟨φ(x_j)|`, `q_j = 1 - p_j`, the sector projectors `P_k`
//! onto states with exactly `k` particles outside φ, and the weight operators
//! `f̂_d = Σ_k f(k + d) P_k`.
//!
//! The fast path rotates every particle axis into an orthonormal basis whose
//! first vector is φ. In that basis each `P_k` is diagonal: a basis tuple lies
//! in sector `k` when exactly `k` of its entries are non-zero. The single
//! projectors `p_j`, `q_j` and the brute-force `P_{j,k}` enumeration work
//! directly in the position basis and serve as the independent route.

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::gp::Orbital;
use crate::manybody::ManyBodyState;
use crate::tensor;

/// Nonnegative function on `{0, …, N}`. Evaluation outside that range gives 0.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    values: Vec<f64>,
}

impl WeightFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("weight function needs at least one value".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("weights must be finite and >= 0, got {bad}")));
        }
        Ok(Self { values })
    }

    pub fn from_fn(particles: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((0..=particles).map(f).collect())
    }

    pub fn ones(particles: usize) -> Self {
        Self { values: vec![1.0; particles + 1] }
    }

    /// `n(k) = √(k/N)`.
    pub fn n_hat(particles: usize) -> Self {
        let n = particles as f64;
        Self { values: (0..=particles).map(|k| (k as f64 / n).sqrt()).collect() }
    }

    /// `m^λ(k) = k / N^λ` for `k <= N^λ`, else 1.
    pub fn m_lambda(particles: usize, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { values: (0..=particles).map(|k| m_lambda_value(k, particles, lambda)).collect() })
    }

    pub fn particles(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `f(k)`, zero for `k` outside `{0, …, N}`.
    pub fn at(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        self.values.get(k as usize).copied().unwrap_or(0.0)
    }

    /// Pointwise product `f g`.
    pub fn product(&self, other: &WeightFunction) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(Error::ParticleMismatch { expected: self.particles(), found: other.particles() });
        }
        Self::new(self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must lie in (0, 1), got {lambda}")))
    }
}

pub fn m_lambda_value(k: usize, particles: usize, lambda: f64) -> f64 {
    let threshold = (particles as f64).powf(lambda);
    let k = k as f64;
    if k <= threshold {
        k / threshold
    } else {
        1.0
    }
}

/// Unitary `M × M` change of basis whose first column is `√h φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitalBasis {
    points: usize,
    /// Row-major `U[i][b]`.
    unitary: Vec<C64>,
    /// Row-major `U†`.
    adjoint: Vec<C64>,
}

impl OrbitalBasis {
    pub fn points(&self) -> usize {
        self.points
    }

    /// Row-major unitary, columns are the (Euclidean-normalized) basis vectors.
    pub fn unitary(&self) -> &[C64] {
        &self.unitary
    }

    pub fn column(&self, b: usize) -> Vec<C64> {
        (0..self.points).map(|i| self.unitary[i * self.points + b]).collect()
    }

    /// Coefficients of `psi` in the rotated basis on every particle axis.
    pub fn to_basis(&self, psi: &ManyBodyState) -> Vec<C64> {
        let mut c = psi.amplitudes().to_vec();
        for axis in 0..psi.particles() {
            tensor::apply_one_body(&mut c, self.points, psi.particles(), axis, &self.adjoint);
        }
        c
    }

    /// Inverse of [`OrbitalBasis::to_basis`].
    pub fn from_basis(&self, like: &ManyBodyState, mut coeffs: Vec<C64>) -> ManyBodyState {
        for axis in 0..like.particles() {
            tensor::apply_one_body(&mut coeffs, self.points, like.particles(), axis, &self.unitary);
        }
        like.with_amplitudes(coeffs)
    }
}

/// Householder completion of φ to an orthonormal basis.
pub fn orthonormal_completion(phi: &Orbital) -> Result<OrbitalBasis> {
    let norm = phi.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Unnormalized { norm });
    }
    let m = phi.grid().points();
    let root_h = phi.grid().spacing().sqrt();
    let u: Vec<C64> = phi.values().iter().map(|v| v * root_h).collect();

    // H = I - 2 w w† / (w† w) with w = u - α e_0 maps α e_0 to u when α u_0 is
    // real. Then U = H diag(α, 1, …, 1) has U e_0 = u.
    let alpha = if u[0].norm() > 0.0 { u[0] / u[0].norm() } else { C64::new(1.0, 0.0) };
    let mut w = u.clone();
    w[0] -= alpha;
    let wn: f64 = w.iter().map(|x| x.norm_sqr()).sum();
    let mut unitary = vec![C64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            let id = if i == j { 1.0 } else { 0.0 };
            let refl = if wn > 0.0 { 2.0 * w[i] * w[j].conj() / wn } else { C64::new(0.0, 0.0) };
            unitary[i * m + j] = C64::new(id, 0.0) - refl;
        }
    }
    for i in 0..m {
        unitary[i * m] *= alpha;
    }
    // pin the first column exactly
    for i in 0..m {
        unitary[i * m] = u[i];
    }
    let mut adjoint = vec![C64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            adjoint[j * m + i] = unitary[i * m + j].conj();
        }
    }
    Ok(OrbitalBasis { points: m, unitary, adjoint })
}

fn ensure_orbital_grid(psi: &ManyBodyState, phi: &Orbital) -> Result<()> {
    psi.grid().ensure_same(phi.grid())
}

/// Number of non-φ entries of each rotated basis tuple.
fn defect_counts(m: usize, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; m.pow(n as u32)];
    tensor::for_each_index(m, n, |flat, d| {
        out[flat] = d.iter().filter(|&&i| i != 0).count() as u8;
    });
    out
}

/// All sector components `P_k Ψ`, held in the rotated basis.
#[derive(Clone, Debug)]
pub struct SectorDecomposition {
    basis: OrbitalBasis,
    like: ManyBodyState,
    coefficients: Vec<C64>,
    defects: Vec<u8>,
    weights: Vec<f64>,
}

impl SectorDecomposition {
    pub fn particles(&self) -> usize {
        self.like.particles()
    }

    /// `‖P_k Ψ‖²` for `k = 0..=N`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn defects(&self) -> &[u8] {
        &self.defects
    }

    pub fn basis(&self) -> &OrbitalBasis {
        &self.basis
    }

    /// `P_k Ψ` in the position basis (zero outside `0..=N`).
    pub fn component(&self, k: i64) -> ManyBodyState {
        let masked = self
            .coefficients
            .iter()
            .zip(&self.defects)
            .map(|(c, &d)| if d as i64 == k { *c } else { C64::new(0.0, 0.0) })
            .collect();
        self.basis.from_basis(&self.like, masked)
    }

    /// `Σ_k g(k) P_k Ψ`.
    pub fn weighted(&self, g: impl Fn(usize) -> f64) -> ManyBodyState {
        let table: Vec<f64> = (0..=self.particles()).map(g).collect();
        let scaled = self
            .coefficients
            .iter()
            .zip(&self.defects)
            .map(|(c, &d)| c * table[d as usize])
            .collect();
        self.basis.from_basis(&self.like, scaled)
    }

    /// `Σ_k g(k) ‖P_k Ψ‖²`.
    pub fn expectation(&self, g: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(k, w)| g(k) * w).sum()
    }
}

pub fn sector_decompose(psi: &ManyBodyState, phi: &Orbital) -> Result<SectorDecomposition> {
    ensure_orbital_grid(psi, phi)?;
    let basis = orthonormal_completion(phi)?;
    let n = psi.particles();
    let coefficients = basis.to_basis(psi);
    let defects = defect_counts(psi.points(), n);
    let h_n = psi.grid().spacing().powi(n as i32);
    let mut weights = vec![0.0; n + 1];
    for (c, &d) in coefficients.iter().zip(&defects) {
        weights[d as usize] += c.norm_sqr();
    }
    weights.iter_mut().for_each(|w| *w *= h_n);
    Ok(SectorDecomposition { basis, like: psi.clone(), coefficients, defects, weights })
}

/// `‖P_k Ψ‖²` for `k = 0..=N`.
pub fn sector_weights(psi: &ManyBodyState, phi: &Orbital) -> Result<Vec<f64>> {
    Ok(sector_decompose(psi, phi)?.weights)
}

fn check_particle(psi: &ManyBodyState, j: usize) -> Result<usize> {
    if j == 0 || j > psi.particles() {
        return Err(Error::IndexOutOfRange { index: j, particles: psi.particles() });
    }
    Ok(j - 1)
}

fn project_axis(amps: &mut [C64], phi: &Orbital, n: usize, axis: usize, keep_p: bool) {
    let m = phi.grid().points();
    let h = phi.grid().spacing();
    let p = phi.values();
    tensor::for_each_fiber(amps, m, n, axis, |fiber| {
        let overlap: C64 = p.iter().zip(fiber.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() * h;
        for (f, pv) in fiber.iter_mut().zip(p) {
            let along = pv * overlap;
            *f = if keep_p { along } else { *f - along };
        }
    });
}

/// `p_j Ψ` for particle `j` (1-based).
pub fn apply_p(psi: &ManyBodyState, phi: &Orbital, j: usize) -> Result<ManyBodyState> {
    ensure_orbital_grid(psi, phi)?;
    let axis = check_particle(psi, j)?;
    let mut amps = psi.amplitudes().to_vec();
    project_axis(&mut amps, phi, psi.particles(), axis, true);
    Ok(psi.with_amplitudes(amps))
}

/// `q_j Ψ = Ψ - p_j Ψ` for particle `j` (1-based).
pub fn apply_q(psi: &ManyBodyState, phi: &Orbital, j: usize) -> Result<ManyBodyState> {
    ensure_orbital_grid(psi, phi)?;
    let axis = check_particle(psi, j)?;
    let mut amps = psi.amplitudes().to_vec();
    project_axis(&mut amps, phi, psi.particles(), axis, false);
    Ok(psi.with_amplitudes(amps))
}

/// `P_{j,k} Ψ` by literal enumeration of the `C(j, k)` products of `p`/`q`
/// on the last `j` particles. Limited to `N <= 5`, `M <= 6`.
pub fn brute_force_sector(psi: &ManyBodyState, phi: &Orbital, j: usize, k: i64) -> Result<ManyBodyState> {
    ensure_orbital_grid(psi, phi)?;
    let n = psi.particles();
    if n > 5 || psi.points() > 6 {
        return Err(Error::ScaleGuard { particles: n, points: psi.points() });
    }
    if j > n {
        return Err(Error::IndexOutOfRange { index: j, particles: n });
    }
    let mut out = ManyBodyState::zeros(psi.grid(), n)?;
    if k < 0 || k as usize > j {
        return Ok(out);
    }
    let tail: Vec<usize> = (n - j..n).collect();
    for defects in tail.iter().copied().combinations(k as usize) {
        let mut amps = psi.amplitudes().to_vec();
        for &axis in &tail {
            project_axis(&mut amps, phi, n, axis, !defects.contains(&axis));
        }
        out.add_scaled(C64::new(1.0, 0.0), &psi.with_amplitudes(amps))?;
    }
    Ok(out)
}

/// `f̂_d Ψ = Σ_k f(k + d) P_k Ψ`.
pub fn apply_weight(psi: &ManyBodyState, phi: &Orbital, f: &WeightFunction, shift: i64) -> Result<ManyBodyState> {
    if f.particles() != psi.particles() {
        return Err(Error::ParticleMismatch { expected: psi.particles(), found: f.particles() });
    }
    let dec = sector_decompose(psi, phi)?;
    Ok(dec.weighted(|k| f.at(k as i64 + shift)))
}

/// `α_N^λ(Ψ, φ) = ⟨Ψ, m̂^λ Ψ⟩`.
pub fn alpha_lambda(psi: &ManyBodyState, phi: &Orbital, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let n = psi.particles();
    Ok(sector_decompose(psi, phi)?.expectation(|k| m_lambda_value(k, n, lambda)))
}

/// `⟨Ψ, n̂² Ψ⟩ = Σ_k (k/N) ‖P_k Ψ‖²`.
pub fn n_hat_squared_expectation(psi: &ManyBodyState, phi: &Orbital) -> Result<f64> {
    let n = psi.particles() as f64;
    Ok(sector_decompose(psi, phi)?.expectation(|k| k as f64 / n))
}

/// `N^{-1} Σ_j ⟨Ψ, q_j Ψ⟩`, the same quantity through single-particle projectors.
pub fn n_hat_squared_via_q(psi: &ManyBodyState, phi: &Orbital) -> Result<f64> {
    let n = psi.particles();
    let mut sum = 0.0;
    for j in 1..=n {
        sum += psi.inner(&apply_q(psi, phi, j)?)?.re;
    }
    Ok(sum / n as f64)
}

/// One-particle reduced density kernel `μ(x, y) = ∫ Ψ(x, ·) Ψ*(y, ·)` over
/// particles `2..N`, as an `M × M` matrix of kernel values.
pub fn reduced_density(psi: &ManyBodyState) -> DMatrix<C64> {
    let m = psi.points();
    let rest = psi.len() / m;
    let w = psi.grid().spacing().powi(psi.particles() as i32 - 1);
    let a = DMatrix::from_row_slice(m, rest, psi.amplitudes());
    (&a * a.adjoint()) * C64::new(w, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityDistances {
    pub opnorm: f64,
    pub trace_norm: f64,
}

/// Eigenvalues of the operator with kernel `mu` (quadrature weighted).
pub fn kernel_spectrum(mu: &DMatrix<C64>, spacing: f64) -> Result<Vec<f64>> {
    let deviation = (mu - mu.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
    if deviation > 1e-8 {
        return Err(Error::NonHermitian { deviation });
    }
    let herm = (mu + mu.adjoint()) * C64::new(0.5 * spacing, 0.0);
    Ok(herm.symmetric_eigenvalues().iter().copied().collect())
}

/// Operator and trace norm of `μ - |φ⟩⟨φ|`.
pub fn density_distances(mu: &DMatrix<C64>, phi: &Orbital) -> Result<DensityDistances> {
    let m = phi.grid().points();
    if mu.nrows() != m || mu.ncols() != m {
        return Err(Error::GridMismatch);
    }
    let p = DMatrix::from_column_slice(m, 1, phi.values());
    let diff = mu - &p * p.adjoint();
    let eig = kernel_spectrum(&diff, phi.grid().spacing())?;
    let opnorm = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let trace_norm = eig.iter().map(|e| e.abs()).sum();
    Ok(DensityDistances { opnorm, trace_norm })
}
