//! Exact N-boson states on the lattice, the many-body Hamiltonian
//! `H = -Σ Δ_j + Σ_{j<k} v(x_j - x_k) + Σ A^t(x_j)` and its Strang-split
//! unitary propagator.
//!
//! A state is a dense `M^N` tensor stored row-major with particle 1 as the
//! slowest index. Inner products carry the quadrature weight `h^N`.

use itertools::Itertools;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Orbital;
use crate::lattice::{Field, Grid, Spectral};
use crate::tensor;

/// Largest tensor the crate will allocate.
pub const MAX_AMPLITUDES: usize = 1 << 27;

/// Number of amplitudes for `n` particles on `m` points, subject to [`MAX_AMPLITUDES`].
pub fn checked_amplitudes(m: usize, n: usize) -> Result<usize> {
    match tensor::checked_len(m, n) {
        Some(len) if len <= MAX_AMPLITUDES => Ok(len),
        _ => Err(Error::MemoryGuard {
            amplitudes: (m as u128).saturating_pow(n as u32),
            limit: MAX_AMPLITUDES,
        }),
    }
}

/// Time-dependent external potential `A^t(x) = ω(t)² x² / 4`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrapSpec {
    #[default]
    None,
    Harmonic { omega: f64 },
    /// Linear ramp of the frequency from `omega_start` to `omega_end` over `ramp_time`, then constant.
    HarmonicRamped { omega_start: f64, omega_end: f64, ramp_time: f64 },
}

impl TrapSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TrapSpec::None => true,
            TrapSpec::Harmonic { omega } => omega.is_finite(),
            TrapSpec::HarmonicRamped { omega_start, omega_end, ramp_time } => {
                omega_start.is_finite() && omega_end.is_finite() && ramp_time > 0.0 && ramp_time.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid trap {self:?}")))
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, TrapSpec::HarmonicRamped { omega_start, omega_end, .. } if omega_start != omega_end)
    }

    pub fn omega(&self, t: f64) -> f64 {
        match *self {
            TrapSpec::None => 0.0,
            TrapSpec::Harmonic { omega } => omega,
            TrapSpec::HarmonicRamped { omega_start, omega_end, ramp_time } => {
                let s = (t / ramp_time).clamp(0.0, 1.0);
                omega_start + (omega_end - omega_start) * s
            }
        }
    }

    pub fn potential(&self, x: f64, t: f64) -> f64 {
        match self {
            TrapSpec::None => 0.0,
            _ => {
                let w = self.omega(t);
                0.25 * w * w * x * x
            }
        }
    }

    pub fn sample(&self, grid: &Grid, t: f64) -> Vec<f64> {
        grid.positions().into_iter().map(|x| self.potential(x, t)).collect()
    }
}

/// Dense `M^N` amplitude tensor.
///
/// States built by the constructors in this module are permutation symmetric;
/// operator images (projections, Hamiltonian action) use the same type without
/// that guarantee.
#[derive(Clone, Debug, PartialEq)]
pub struct ManyBodyState {
    grid: Grid,
    particles: usize,
    amps: Vec<C64>,
}

impl ManyBodyState {
    pub fn from_amplitudes(grid: &Grid, particles: usize, amps: Vec<C64>) -> Result<Self> {
        if particles == 0 {
            return Err(Error::InvalidParameter("particle number must be at least 1".into()));
        }
        let len = checked_amplitudes(grid.points(), particles)?;
        if amps.len() != len {
            return Err(Error::InvalidParameter(format!(
                "expected {len} amplitudes, got {}",
                amps.len()
            )));
        }
        Ok(Self { grid: grid.clone(), particles, amps })
    }

    pub fn zeros(grid: &Grid, particles: usize) -> Result<Self> {
        let len = checked_amplitudes(grid.points(), particles)?;
        Self::from_amplitudes(grid, particles, vec![C64::new(0.0, 0.0); len])
    }

    pub(crate) fn with_amplitudes(&self, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), self.amps.len());
        Self { grid: self.grid.clone(), particles: self.particles, amps }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn points(&self) -> usize {
        self.grid.points()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    fn weight(&self) -> f64 {
        self.grid.spacing().powi(self.particles as i32)
    }

    pub fn ensure_compatible(&self, other: &ManyBodyState) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        if self.particles != other.particles {
            return Err(Error::ParticleMismatch { expected: self.particles, found: other.particles });
        }
        Ok(())
    }

    /// Quadrature inner product `h^N Σ conj(self) other`.
    pub fn inner(&self, other: &ManyBodyState) -> Result<C64> {
        self.ensure_compatible(other)?;
        let s: C64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.weight())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.weight()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter(format!("cannot normalize state of norm {n}")));
        }
        self.scale(C64::new(1.0 / n, 0.0));
        Ok(())
    }

    pub fn scale(&mut self, c: C64) {
        self.amps.iter_mut().for_each(|a| *a *= c);
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: C64, other: &ManyBodyState) -> Result<()> {
        self.ensure_compatible(other)?;
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &ManyBodyState) -> Result<ManyBodyState> {
        let mut out = self.clone();
        out.add_scaled(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// Largest elementwise deviation.
    pub fn max_abs_diff(&self, other: &ManyBodyState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Quadrature distance `‖self - other‖`.
    pub fn distance(&self, other: &ManyBodyState) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// Tensor with particle axes `a` and `b` exchanged.
    pub fn swapped(&self, a: usize, b: usize) -> ManyBodyState {
        let m = self.points();
        let n = self.particles;
        let (sa, sb) = (tensor::stride(m, n, a), tensor::stride(m, n, b));
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        tensor::for_each_index(m, n, |flat, d| {
            let target = flat + (d[b] * sa + d[a] * sb) - (d[a] * sa + d[b] * sb);
            out[target] = self.amps[flat];
        });
        self.with_amplitudes(out)
    }

    /// Largest elementwise change under any transposition of two particles.
    pub fn symmetry_residual(&self) -> f64 {
        (0..self.particles)
            .tuple_combinations()
            .map(|(a, b)| self.max_abs_diff(&self.swapped(a, b)))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// `Ψ = ∏_j φ(x_j)`.
pub fn product_state(phi: &Orbital, particles: usize) -> Result<ManyBodyState> {
    let norm = phi.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Unnormalized { norm });
    }
    let grid = phi.grid();
    checked_amplitudes(grid.points(), particles)?;
    let mut amps = vec![C64::new(1.0, 0.0)];
    for _ in 0..particles {
        amps = amps
            .iter()
            .flat_map(|a| phi.values().iter().map(move |p| a * p))
            .collect();
    }
    ManyBodyState::from_amplitudes(grid, particles, amps)
}

fn permutation_average(psi: &ManyBodyState) -> ManyBodyState {
    let m = psi.points();
    let n = psi.particles();
    let strides: Vec<usize> = (0..n).map(|a| tensor::stride(m, n, a)).collect();
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    let mut count = 0usize;
    for perm in (0..n).permutations(n) {
        count += 1;
        tensor::for_each_index(m, n, |flat, d| {
            let src: usize = perm.iter().zip(&strides).map(|(&p, s)| d[p] * s).sum();
            out[flat] += psi.amps[src];
        });
    }
    let inv = 1.0 / count as f64;
    out.iter_mut().for_each(|a| *a *= inv);
    psi.with_amplitudes(out)
}

/// Projects onto the symmetric subspace (average over all `N!` index
/// permutations) and renormalizes.
pub fn symmetrize(psi: &ManyBodyState) -> Result<ManyBodyState> {
    let mut out = permutation_average(psi);
    let norm = out.norm();
    if norm < 1e-12 {
        return Err(Error::ZeroSymmetricComponent { norm });
    }
    out.scale(C64::new(1.0 / norm, 0.0));
    Ok(out)
}

/// `√(1-ε²) φ^{⊗N} + ε Sym(χ ⊗ φ^{⊗(N-1)})`, normalized; the one-defect
/// sector carries weight `ε²`.
pub fn perturbed_state(phi: &Orbital, chi: &Orbital, eps: f64, particles: usize) -> Result<ManyBodyState> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eps must lie in [0, 1], got {eps}")));
    }
    let overlap = phi.inner(chi)?.norm();
    if overlap > 1e-10 {
        return Err(Error::NotOrthogonal { overlap });
    }
    let base = product_state(phi, particles)?;
    if particles == 0 || eps == 0.0 {
        return Ok(base);
    }
    let m = phi.grid().points();
    let mut defect = vec![C64::new(0.0, 0.0); base.len()];
    let scale = 1.0 / (particles as f64).sqrt();
    tensor::for_each_index(m, particles, |flat, d| {
        let mut acc = C64::new(0.0, 0.0);
        for slot in 0..particles {
            let mut term = C64::new(scale, 0.0);
            for (j, &i) in d.iter().enumerate() {
                term *= if j == slot { chi.values()[i] } else { phi.values()[i] };
            }
            acc += term;
        }
        defect[flat] = acc;
    });
    let defect = base.with_amplitudes(defect);
    let mut out = base;
    out.scale(C64::new((1.0 - eps * eps).sqrt(), 0.0));
    out.add_scaled(C64::new(eps, 0.0), &defect)?;
    symmetrize(&out)
}

/// Normalized tensor with independent uniform entries in the unit square.
pub fn random_state<R: Rng + ?Sized>(grid: &Grid, particles: usize, rng: &mut R) -> Result<ManyBodyState> {
    let len = checked_amplitudes(grid.points(), particles)?;
    let amps = (0..len)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut psi = ManyBodyState::from_amplitudes(grid, particles, amps)?;
    psi.normalize()?;
    Ok(psi)
}

/// Symmetrized [`random_state`].
pub fn random_symmetric_state<R: Rng + ?Sized>(grid: &Grid, particles: usize, rng: &mut R) -> Result<ManyBodyState> {
    symmetrize(&random_state(grid, particles, rng)?)
}

/// Pair interaction evaluated at periodic minimal-image displacements.
///
/// Requires an even number of points so that every displacement `(i - j) h`
/// is itself a grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct PairPotential {
    points: usize,
    table: Vec<f64>,
}

impl PairPotential {
    pub fn from_field(v: &Field) -> Result<Self> {
        let m = v.grid().points();
        if m % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "pair interactions need an even number of points, got {m}"
            )));
        }
        let half = m / 2;
        // displacement d·h (mod L) sits at grid index d + M/2 (mod M)
        let table = (0..m).map(|d| v.values()[(d + half) % m].re).collect();
        Ok(Self { points: m, table })
    }

    pub fn zero(points: usize) -> Self {
        Self { points, table: vec![0.0; points] }
    }

    /// `v(x_i - x_j)`.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.table[(i + self.points - j) % self.points]
    }

    /// `Σ_{j<k} v(x_{i_j} - x_{i_k})` for every multi-index.
    pub fn diagonal(&self, particles: usize) -> Vec<f64> {
        let m = self.points;
        let mut out = vec![0.0; m.pow(particles as u32)];
        tensor::for_each_index(m, particles, |flat, d| {
            let mut s = 0.0;
            for a in 0..particles {
                for b in a + 1..particles {
                    s += self.value(d[a], d[b]);
                }
            }
            out[flat] = s;
        });
        out
    }
}

/// `Σ_j A^t(x_{i_j})` for every multi-index.
fn trap_diagonal(trap: &TrapSpec, grid: &Grid, particles: usize, t: f64) -> Vec<f64> {
    let single = trap.sample(grid, t);
    let m = grid.points();
    let mut out = vec![0.0; m.pow(particles as u32)];
    if matches!(trap, TrapSpec::None) {
        return out;
    }
    tensor::for_each_index(m, particles, |flat, d| {
        out[flat] = d.iter().map(|&i| single[i]).sum();
    });
    out
}

/// Returns `H_N Ψ` at time `t`.
pub fn apply_hamiltonian(psi: &ManyBodyState, v: &Field, trap: &TrapSpec, t: f64) -> Result<ManyBodyState> {
    psi.grid().ensure_same(v.grid())?;
    let pair = PairPotential::from_field(v)?;
    apply_hamiltonian_with(psi, &pair, trap, t)
}

pub(crate) fn apply_hamiltonian_with(
    psi: &ManyBodyState,
    pair: &PairPotential,
    trap: &TrapSpec,
    t: f64,
) -> Result<ManyBodyState> {
    let grid = psi.grid();
    let m = grid.points();
    let n = psi.particles();
    let spectral = Spectral::new(grid);
    let mut scratch = spectral.scratch();
    let k2: Vec<C64> = grid.wavenumbers().iter().map(|k| C64::new(k * k, 0.0)).collect();

    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for axis in 0..n {
        let mut work = psi.amps.clone();
        tensor::for_each_fiber(&mut work, m, n, axis, |fiber| {
            spectral.apply_multiplier(fiber, &k2, &mut scratch);
        });
        out.iter_mut().zip(&work).for_each(|(o, w)| *o += w);
    }
    let pair_diag = pair.diagonal(n);
    let trap_diag = trap_diagonal(trap, grid, n, t);
    for (i, o) in out.iter_mut().enumerate() {
        *o += (pair_diag[i] + trap_diag[i]) * psi.amps[i];
    }
    Ok(psi.with_amplitudes(out))
}

/// `⟨Ψ, H Ψ⟩` (real part).
pub fn energy(psi: &ManyBodyState, v: &Field, trap: &TrapSpec, t: f64) -> Result<f64> {
    let h = apply_hamiltonian(psi, v, trap, t)?;
    Ok(psi.inner(&h)?.re)
}

/// Second-order Strang splitting: diagonal half step (interaction plus trap at
/// the interval midpoint), spectral kinetic full step per particle axis,
/// diagonal half step.
#[derive(Clone, Debug)]
pub struct ManyBodyPropagator {
    grid: Grid,
    particles: usize,
    spectral: Spectral,
    kinetic: Vec<C64>,
    pair_diag: Vec<f64>,
    trap: TrapSpec,
    dt: f64,
    static_phase: Option<Vec<C64>>,
}

impl ManyBodyPropagator {
    pub fn new(grid: &Grid, particles: usize, v: &Field, trap: TrapSpec, dt: f64) -> Result<Self> {
        grid.ensure_same(v.grid())?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        trap.validate()?;
        checked_amplitudes(grid.points(), particles)?;
        let pair = PairPotential::from_field(v)?;
        let pair_diag = pair.diagonal(particles);
        let kinetic = grid
            .wavenumbers()
            .iter()
            .map(|k| C64::from_polar(1.0, -k * k * dt))
            .collect();
        let mut prop = Self {
            grid: grid.clone(),
            particles,
            spectral: Spectral::new(grid),
            kinetic,
            pair_diag,
            trap,
            dt,
            static_phase: None,
        };
        if !trap.is_time_dependent() {
            prop.static_phase = Some(prop.half_phase(0.0));
        }
        Ok(prop)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn half_phase(&self, t_mid: f64) -> Vec<C64> {
        let trap = trap_diagonal(&self.trap, &self.grid, self.particles, t_mid);
        let half = 0.5 * self.dt;
        self.pair_diag
            .iter()
            .zip(&trap)
            .map(|(p, a)| C64::from_polar(1.0, -(p + a) * half))
            .collect()
    }

    /// Advances `psi` from `t` to `t + dt`.
    pub fn step(&self, psi: &mut ManyBodyState, t: f64) -> Result<()> {
        psi.grid().ensure_same(&self.grid)?;
        if psi.particles() != self.particles {
            return Err(Error::ParticleMismatch { expected: self.particles, found: psi.particles() });
        }
        let owned;
        let phase = match &self.static_phase {
            Some(p) => p,
            None => {
                owned = self.half_phase(t + 0.5 * self.dt);
                &owned
            }
        };
        let m = self.grid.points();
        let amps = psi.amplitudes_mut();
        amps.iter_mut().zip(phase).for_each(|(a, p)| *a *= p);
        let mut scratch = self.spectral.scratch();
        for axis in 0..self.particles {
            tensor::for_each_fiber(amps, m, self.particles, axis, |fiber| {
                self.spectral.apply_multiplier(fiber, &self.kinetic, &mut scratch);
            });
        }
        amps.iter_mut().zip(phase).for_each(|(a, p)| *a *= p);
        Ok(())
    }
}

/// Propagates `steps` steps of size `dt` from `t = 0`.
pub fn propagate_many_body(
    psi: &ManyBodyState,
    v: &Field,
    trap: TrapSpec,
    dt: f64,
    steps: usize,
) -> Result<ManyBodyState> {
    let prop = ManyBodyPropagator::new(psi.grid(), psi.particles(), v, trap, dt)?;
    let mut out = psi.clone();
    for s in 0..steps {
        prop.step(&mut out, s as f64 * dt)?;
    }
    Ok(out)
}
