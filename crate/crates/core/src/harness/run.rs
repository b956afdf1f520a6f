use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{CvSetting, ExperimentConfig, InitialSpec};
use crate::error::{Error, Result};
use crate::functionals::{
    delta_lambda, fit_rate_constant, gamma_lambda, gronwall_envelope, k_phi_shape, ExponentConvention, LemmaTerms,
};
use crate::gp::{coupling_constant, gp_energy, orbital_diagnostics, GpPropagator, Orbital, OrbitalDiagnostics};
use crate::lattice::{scaled_interaction, Field, Grid};
use crate::manybody::{perturbed_state, product_state, random_symmetric_state, ManyBodyPropagator, ManyBodyState};
use crate::projector::{density_distances, m_lambda_value, reduced_density, sector_decompose};

/// Floor applied to a fitted `C_v` that comes out zero (no dynamics in `α`).
pub const MIN_FITTED_CV: f64 = 1e-12;

/// Observables at one sample time, in output column order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub t: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_c: f64,
    pub n_hat_sq: f64,
    pub opnorm_dist: f64,
    pub trace_dist: f64,
    pub envelope_minus: f64,
    pub envelope_plus: f64,
    pub psi_norm: f64,
    pub phi_linf: f64,
    pub gp_energy: f64,
}

impl ReportRow {
    pub const COLUMNS: [&'static str; 14] = [
        "t",
        "alpha",
        "gamma",
        "gamma_a",
        "gamma_b",
        "gamma_c",
        "n_hat_sq",
        "opnorm_dist",
        "trace_dist",
        "envelope_minus",
        "envelope_plus",
        "psi_norm",
        "phi_linf",
        "gp_energy",
    ];

    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.alpha,
            self.gamma,
            self.gamma_a,
            self.gamma_b,
            self.gamma_c,
            self.n_hat_sq,
            self.opnorm_dist,
            self.trace_dist,
            self.envelope_minus,
            self.envelope_plus,
            self.psi_norm,
            self.phi_linf,
            self.gp_energy,
        ]
    }
}

/// Constants resolved or fitted during a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    /// `a = N ∫ v_N` on the grid.
    pub coupling: f64,
    pub delta_lambda: f64,
    pub c_v_source: &'static str,
    /// `C_v` used for both envelopes.
    pub c_v: f64,
    /// Smallest `C_v` for which the rate inequality holds at every sample
    /// under the configured exponent convention.
    pub c_v_rate: f64,
    /// Smallest `C` for which all three term bounds hold at every sample.
    pub lemma_constant: f64,
    pub alpha_below_envelope: bool,
    pub max_psi_norm_drift: f64,
    pub max_symmetry_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub fit: FitSummary,
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    /// Row value at `t` by linear interpolation between samples.
    pub fn interpolate(&self, t: f64, column: impl Fn(&ReportRow) -> f64) -> f64 {
        let rows = &self.rows;
        if t <= rows[0].t {
            return column(&rows[0]);
        }
        for w in rows.windows(2) {
            if t <= w[1].t {
                let s = (t - w[0].t) / (w[1].t - w[0].t);
                return (1.0 - s) * column(&w[0]) + s * column(&w[1]);
            }
        }
        column(rows.last().expect("non-empty"))
    }
}

struct Sample {
    t: f64,
    alpha: f64,
    n_hat_sq: f64,
    gamma: crate::functionals::GammaBreakdown,
    opnorm: f64,
    trace: f64,
    psi_norm: f64,
    diag: OrbitalDiagnostics,
    energy: f64,
    symmetry: f64,
}

pub struct Setup {
    pub grid: Grid,
    pub v_n: Field,
    pub coupling: f64,
    pub phi: Orbital,
    pub psi: ManyBodyState,
}

/// Grid, scaled interaction, coupling and initial data of a validated config.
pub fn setup(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    let grid = Grid::new(config.points, config.length)?;
    let n = config.particles;
    let v_n = scaled_interaction(&config.interaction, n, config.beta, &grid)?;
    let coupling = n as f64 * coupling_constant(&v_n);
    let phi = config.orbital.build(&grid)?;
    let psi = match config.initial {
        InitialSpec::Product => product_state(&phi, n)?,
        InitialSpec::Perturbed { eps, .. } => {
            let chi = config.initial.chi(&phi, &config.orbital)?.expect("perturbed start has chi");
            perturbed_state(&phi, &chi, eps, n)?
        }
        InitialSpec::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_symmetric_state(&grid, n, &mut rng)?
        }
    };
    Ok(Setup { grid, v_n, coupling, phi, psi })
}

fn observe(
    config: &ExperimentConfig,
    setup: &Setup,
    t: f64,
    psi: &ManyBodyState,
    phi: &Orbital,
) -> Result<Sample> {
    let n = config.particles;
    let dec = sector_decompose(psi, phi)?;
    let alpha = dec.expectation(|k| m_lambda_value(k, n, config.lambda));
    let n_hat_sq = dec.expectation(|k| k as f64 / n as f64);
    let gamma = gamma_lambda(psi, phi, config.lambda, &setup.v_n, setup.coupling)?;
    let dist = density_distances(&reduced_density(psi), phi)?;
    let diag = orbital_diagnostics(phi);
    Ok(Sample {
        t,
        alpha,
        n_hat_sq,
        gamma,
        opnorm: dist.opnorm,
        trace: dist.trace_norm,
        psi_norm: psi.norm(),
        diag,
        energy: gp_energy(phi, setup.coupling, &config.trap, t),
        symmetry: psi.symmetry_residual(),
    })
}

fn envelope(
    samples: &[Sample],
    c_v: f64,
    delta: f64,
    n: usize,
    conv: ExponentConvention,
) -> Result<Vec<f64>> {
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let linf: Vec<f64> = samples.iter().map(|s| s.diag.linf).collect();
    let k: Vec<f64> = samples.iter().map(|s| c_v * k_phi_shape(&s.diag)).collect();
    gronwall_envelope(samples[0].alpha, &times, &linf, c_v, &k, delta, n, conv)
}

fn dominates(samples: &[Sample], env: &[f64]) -> bool {
    samples.iter().zip(env).all(|(s, e)| s.alpha <= e + 1e-12)
}

/// Smallest `C_v >= start` whose envelope dominates `α` at every sample.
fn refine_cv(samples: &[Sample], start: f64, delta: f64, n: usize, conv: ExponentConvention) -> Result<f64> {
    let mut hi = start;
    let mut doublings = 0;
    while !dominates(samples, &envelope(samples, hi, delta, n, conv)?) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NumericalAbort { step: 0 });
        }
    }
    if doublings == 0 {
        return Ok(hi);
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dominates(samples, &envelope(samples, mid, delta, n, conv)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Coupled many-body and mean-field evolution with observables at every
/// `sample_every`-th step (including `t = 0`).
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let setup = setup(config)?;
    let n = config.particles;
    let mb = ManyBodyPropagator::new(&setup.grid, n, &setup.v_n, config.trap, config.dt)?;
    let gp = GpPropagator::new(&setup.grid, setup.coupling, config.trap, config.dt, config.gp_convention)?;
    let mut psi = setup.psi.clone();
    let mut phi = setup.phi.clone();
    let mut samples = Vec::with_capacity(config.steps / config.sample_every + 1);
    samples.push(observe(config, &setup, 0.0, &psi, &phi)?);
    for step in 1..=config.steps {
        let t0 = (step - 1) as f64 * config.dt;
        mb.step(&mut psi, t0)?;
        gp.step(&mut phi, t0);
        if !psi.is_finite() || phi.values().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NumericalAbort { step });
        }
        if step % config.sample_every == 0 {
            samples.push(observe(config, &setup, step as f64 * config.dt, &psi, &phi)?);
        }
    }
    finish(config, &setup, samples)
}

fn finish(config: &ExperimentConfig, setup: &Setup, samples: Vec<Sample>) -> Result<RunReport> {
    let n = config.particles;
    let delta = delta_lambda(config.lambda, config.beta)?;
    let conv = config.exponent_convention;
    let gamma: Vec<f64> = samples.iter().map(|s| s.gamma.gamma).collect();
    let alpha: Vec<f64> = samples.iter().map(|s| s.alpha).collect();
    let linf: Vec<f64> = samples.iter().map(|s| s.diag.linf).collect();
    let shape: Vec<f64> = samples.iter().map(|s| k_phi_shape(&s.diag)).collect();
    let c_v_rate = fit_rate_constant(&gamma, &alpha, &linf, &shape, conv.factor(n, delta));
    let (c_v, source) = match config.c_v {
        CvSetting::Fixed(c) => (c, "fixed"),
        CvSetting::Fit => (refine_cv(&samples, c_v_rate.max(MIN_FITTED_CV), delta, n, conv)?, "fit"),
    };
    let minus = envelope(&samples, c_v, delta, n, ExponentConvention::PaperTheoremMinus)?;
    let plus = envelope(&samples, c_v, delta, n, ExponentConvention::LemmaPlus)?;
    let own = if conv == ExponentConvention::LemmaPlus { &plus } else { &minus };

    let mut lemma_constant: f64 = 0.0;
    for s in &samples {
        let terms = LemmaTerms::from_parts(&s.gamma, s.alpha, &s.diag, 1.0, conv.factor(n, delta))?;
        lemma_constant = lemma_constant.max(terms.min_constant());
    }

    let rows: Vec<ReportRow> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| ReportRow {
            t: s.t,
            alpha: s.alpha,
            gamma: s.gamma.gamma,
            gamma_a: s.gamma.term_a,
            gamma_b: s.gamma.term_b,
            gamma_c: s.gamma.term_c,
            n_hat_sq: s.n_hat_sq,
            opnorm_dist: s.opnorm,
            trace_dist: s.trace,
            envelope_minus: minus[i],
            envelope_plus: plus[i],
            psi_norm: s.psi_norm,
            phi_linf: s.diag.linf,
            gp_energy: s.energy,
        })
        .collect();
    if let Some(bad) = rows.iter().position(|r| r.values().iter().any(|v| !v.is_finite())) {
        return Err(Error::NumericalAbort { step: bad * config.sample_every });
    }
    let fit = FitSummary {
        coupling: setup.coupling,
        delta_lambda: delta,
        c_v_source: source,
        c_v,
        c_v_rate,
        lemma_constant,
        alpha_below_envelope: dominates(&samples, own),
        max_psi_norm_drift: samples.iter().map(|s| (s.psi_norm - 1.0).abs()).fold(0.0, f64::max),
        max_symmetry_residual: samples.iter().map(|s| s.symmetry).fold(0.0, f64::max),
    };
    Ok(RunReport { config: config.clone(), fit, rows })
}
