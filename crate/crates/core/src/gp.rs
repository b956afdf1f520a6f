//! Mean-field side: condensate orbitals, the coupling constant and the
//! time-dependent Gross-Pitaevskii flow.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{discrete_norms, sample, sample_complex, Field, Grid, Spectral};
use crate::manybody::TrapSpec;

/// Tolerance on the quadrature norm of an orbital.
pub const ORBITAL_NORM_TOL: f64 = 1e-9;

/// Normalized one-particle wave function.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbital {
    field: Field,
}

impl Orbital {
    pub fn new(field: Field) -> Result<Self> {
        let norm = field.norm();
        if (norm - 1.0).abs() > ORBITAL_NORM_TOL {
            return Err(Error::Unnormalized { norm });
        }
        Ok(Self { field })
    }

    pub fn normalized(mut field: Field) -> Result<Self> {
        let norm = field.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Unnormalized { norm });
        }
        field.scale(C64::new(1.0 / norm, 0.0));
        Ok(Self { field })
    }

    /// `∝ exp(-(x - center)² / (4 width²))`, so `|φ|²` has standard deviation `width`.
    pub fn gaussian(grid: &Grid, width: f64, center: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter(format!("width must be positive, got {width}")));
        }
        Self::normalized(sample(grid, |x| (-(x - center).powi(2) / (4.0 * width * width)).exp()))
    }

    /// First excited harmonic profile `∝ x exp(-x² / (4 width²))`.
    pub fn first_excited(grid: &Grid, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter(format!("width must be positive, got {width}")));
        }
        Self::normalized(sample(grid, |x| x * (-x * x / (4.0 * width * width)).exp()))
    }

    /// `exp(2πi·mode·x/L) / √L`.
    pub fn plane_wave(grid: &Grid, mode: i64) -> Self {
        let k = 2.0 * PI * mode as f64 / grid.length();
        let amp = 1.0 / grid.length().sqrt();
        let field = sample_complex(grid, |x| C64::from_polar(amp, k * x));
        Self { field }
    }

    /// Removes the component along `phi` (one Gram-Schmidt pass) and normalizes.
    pub fn orthogonalized_against(field: Field, phi: &Orbital) -> Result<Self> {
        let overlap = phi.field.inner(&field)?;
        let mut values = field.into_values();
        for (v, p) in values.iter_mut().zip(phi.values()) {
            *v -= overlap * p;
        }
        Self::normalized(Field::new(phi.grid(), values)?)
    }

    #[cfg(test)]
    pub(crate) fn from_field_unchecked(field: Field) -> Self {
        Self { field }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn values(&self) -> &[C64] {
        self.field.values()
    }

    pub fn inner(&self, other: &Orbital) -> Result<C64> {
        self.field.inner(&other.field)
    }

    pub fn norm(&self) -> f64 {
        self.field.norm()
    }

    /// Multiplies by a global phase `e^{iθ}`.
    pub fn with_phase(&self, theta: f64) -> Self {
        let c = C64::from_polar(1.0, theta);
        Self { field: self.field.map(|v| v * c) }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values().iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Sign convention for the mean-field equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GpConvention {
    /// `i φ̇ = (-Δ + A + a|φ|²) φ`, the one consistent with the many-body Hamiltonian.
    #[default]
    Standard,
    /// `i φ̇ = -(Δ + A + a|φ|²) φ`, read literally: kinetic sign as above, potential
    /// and cubic term with the opposite sign.
    AsPrinted,
}

impl GpConvention {
    fn potential_sign(self) -> f64 {
        match self {
            GpConvention::Standard => 1.0,
            GpConvention::AsPrinted => -1.0,
        }
    }
}

/// Signed quadrature integral `∫ v dx` (no absolute value).
pub fn coupling_constant(v: &Field) -> f64 {
    v.values().iter().map(|c| c.re).sum::<f64>() * v.grid().spacing()
}

/// Strang split-step integrator for the Gross-Pitaevskii flow.
#[derive(Clone, Debug)]
pub struct GpPropagator {
    grid: Grid,
    spectral: Spectral,
    kinetic: Vec<C64>,
    coupling: f64,
    trap: TrapSpec,
    dt: f64,
    convention: GpConvention,
}

impl GpPropagator {
    pub fn new(grid: &Grid, coupling: f64, trap: TrapSpec, dt: f64, convention: GpConvention) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        trap.validate()?;
        let kinetic = grid
            .wavenumbers()
            .iter()
            .map(|k| C64::from_polar(1.0, -k * k * dt))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            spectral: Spectral::new(grid),
            kinetic,
            coupling,
            trap,
            dt,
            convention,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn half_potential(&self, values: &mut [C64], t_mid: f64) {
        let s = self.convention.potential_sign();
        let half = 0.5 * self.dt;
        for (i, v) in values.iter_mut().enumerate() {
            let x = self.grid.position(i);
            let w = self.trap.potential(x, t_mid) + self.coupling * v.norm_sqr();
            *v *= C64::from_polar(1.0, -s * w * half);
        }
    }

    /// Advances `phi` from `t` to `t + dt`.
    pub fn step(&self, phi: &mut Orbital, t: f64) {
        let t_mid = t + 0.5 * self.dt;
        let values = phi.field.values_mut();
        self.half_potential(values, t_mid);
        let mut scratch = self.spectral.scratch();
        self.spectral.apply_multiplier(values, &self.kinetic, &mut scratch);
        self.half_potential(values, t_mid);
    }
}

/// Integrates `steps` steps from `t = 0`, returning the orbital at every
/// multiple of `sample_every` steps (including the initial one).
pub fn propagate_gp(
    phi: &Orbital,
    coupling: f64,
    trap: TrapSpec,
    dt: f64,
    steps: usize,
    sample_every: usize,
    convention: GpConvention,
) -> Result<Vec<Orbital>> {
    if sample_every == 0 {
        return Err(Error::InvalidParameter("sample_every must be at least 1".into()));
    }
    let prop = GpPropagator::new(phi.grid(), coupling, trap, dt, convention)?;
    let mut current = phi.clone();
    let mut out = vec![current.clone()];
    for step in 0..steps {
        prop.step(&mut current, step as f64 * dt);
        if (step + 1) % sample_every == 0 {
            out.push(current.clone());
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitalDiagnostics {
    /// `‖φ‖_∞`
    pub linf: f64,
    /// `‖Δ|φ|²‖` (quadrature l2)
    pub laplacian_density_l2: f64,
}

pub fn orbital_diagnostics(phi: &Orbital) -> OrbitalDiagnostics {
    let linf = discrete_norms(phi.field()).linf;
    let density = Field::from_real(phi.grid(), &phi.density()).expect("same grid");
    let laplacian_density_l2 = discrete_norms(&density.spectral_laplacian()).l2;
    OrbitalDiagnostics { linf, laplacian_density_l2 }
}

/// `⟨φ, -Δφ⟩ + ⟨φ, A φ⟩ + (a/2) ∫ |φ|⁴`.
pub fn gp_energy(phi: &Orbital, coupling: f64, trap: &TrapSpec, t: f64) -> f64 {
    let grid = phi.grid();
    let h = grid.spacing();
    let lap = phi.field().spectral_laplacian();
    let kinetic: f64 = -phi
        .values()
        .iter()
        .zip(lap.values())
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>()
        * h;
    let mut potential = 0.0;
    let mut quartic = 0.0;
    for (i, v) in phi.values().iter().enumerate() {
        let rho = v.norm_sqr();
        potential += trap.potential(grid.position(i), t) * rho;
        quartic += rho * rho;
    }
    kinetic + potential * h + 0.5 * coupling * quartic * h
}
