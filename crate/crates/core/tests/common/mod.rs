//! Dense-matrix oracles built independently of the tensor code paths.
#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;

use gplab::gp::Orbital;
use gplab::lattice::{Field, Grid};
use gplab::manybody::ManyBodyState;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `-Δ` on the grid as a dense matrix, `T_ij = (1/M) Σ_k k² e^{ik(x_i - x_j)}`.
pub fn kinetic_matrix(grid: &Grid) -> DMatrix<C64> {
    let m = grid.points();
    let x = grid.positions();
    DMatrix::from_fn(m, m, |i, j| {
        grid.wavenumbers().iter().map(|k| C64::from_polar(k * k, k * (x[i] - x[j]))).sum::<C64>() / m as f64
    })
}

/// `A ⊗ B ⊗ …` with the first factor acting on particle 1 (slowest index).
pub fn kron_all(factors: &[DMatrix<C64>]) -> DMatrix<C64> {
    factors.iter().skip(1).fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// `op` acting on particle `axis` (0-based) of `n`.
pub fn on_axis(op: &DMatrix<C64>, axis: usize, n: usize) -> DMatrix<C64> {
    let m = op.nrows();
    let factors: Vec<DMatrix<C64>> =
        (0..n).map(|a| if a == axis { op.clone() } else { DMatrix::identity(m, m) }).collect();
    kron_all(&factors)
}

/// Multi-index of a flat position, particle 1 first.
pub fn digits(mut flat: usize, m: usize, n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for slot in d.iter_mut().rev() {
        *slot = flat % m;
        flat /= m;
    }
    d
}

/// Periodic pair value `v(x_i - x_j)` read from the sampled field by position.
pub fn pair_value(v: &Field, i: usize, j: usize) -> f64 {
    let grid = v.grid();
    let d = grid.wrap(grid.position(i) - grid.position(j));
    let idx = ((d + 0.5 * grid.length()) / grid.spacing()).round() as usize % grid.points();
    v.values()[idx].re
}

/// Dense `H_N = Σ -Δ_j + Σ_{j<k} v(x_j - x_k) + Σ_j A(x_j)`.
pub fn dense_hamiltonian(grid: &Grid, n: usize, v: &Field, trap: &[f64]) -> DMatrix<C64> {
    let m = grid.points();
    let t = kinetic_matrix(grid);
    let mut h = DMatrix::<C64>::zeros(m.pow(n as u32), m.pow(n as u32));
    for axis in 0..n {
        h += on_axis(&t, axis, n);
    }
    for flat in 0..h.nrows() {
        let d = digits(flat, m, n);
        let mut diag: f64 = d.iter().map(|&i| trap[i]).sum();
        for (a, b) in (0..n).tuple_combinations() {
            diag += pair_value(v, d[a], d[b]);
        }
        h[(flat, flat)] += c(diag);
    }
    h
}

/// `exp(-iHt) ψ` through the eigendecomposition of a Hermitian `H`.
pub fn dense_evolve(h: &DMatrix<C64>, psi: &[C64], t: f64) -> Vec<C64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let coeffs = v.adjoint() * DVector::from_column_slice(psi);
    let phased = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, e)| c * C64::from_polar(1.0, -e * t)),
    );
    (v * phased).iter().copied().collect()
}

/// Dense one-particle projector onto φ acting on amplitude vectors.
pub fn dense_p(phi: &Orbital) -> DMatrix<C64> {
    let h = phi.grid().spacing();
    let u = DVector::from_column_slice(phi.values());
    (&u * u.adjoint()) * c(h)
}

pub fn dense_q(phi: &Orbital) -> DMatrix<C64> {
    let m = phi.grid().points();
    DMatrix::identity(m, m) - dense_p(phi)
}

/// Dense `P_{j,k}` as the sum over defect subsets of the last `j` particles.
pub fn dense_sector(phi: &Orbital, n: usize, j: usize, k: i64) -> DMatrix<C64> {
    let m = phi.grid().points();
    let dim = m.pow(n as u32);
    if k < 0 || k as usize > j {
        return DMatrix::zeros(dim, dim);
    }
    let (p, q) = (dense_p(phi), dense_q(phi));
    let id = DMatrix::<C64>::identity(m, m);
    let mut out = DMatrix::zeros(dim, dim);
    for subset in (n - j..n).combinations(k as usize) {
        let factors: Vec<DMatrix<C64>> = (0..n)
            .map(|a| {
                if a < n - j {
                    id.clone()
                } else if subset.contains(&a) {
                    q.clone()
                } else {
                    p.clone()
                }
            })
            .collect();
        out += kron_all(&factors);
    }
    out
}

/// Dense `Σ_k g(k) P_k` for an arbitrary real `g` on integers.
pub fn dense_weight(phi: &Orbital, n: usize, g: impl Fn(i64) -> f64) -> DMatrix<C64> {
    let mut out = dense_sector(phi, n, n, 0) * c(g(0));
    for k in 1..=n as i64 {
        out += dense_sector(phi, n, n, k) * c(g(k));
    }
    out
}

/// Diagonal `h_{1,2}` built from positions.
pub fn dense_h12(phi: &Orbital, n: usize, v: &Field, a: f64) -> DMatrix<C64> {
    let m = phi.grid().points();
    let rho: Vec<f64> = phi.values().iter().map(|x| x.norm_sqr()).collect();
    let nf = n as f64;
    DMatrix::from_fn(m.pow(n as u32), m.pow(n as u32), |r, col| {
        if r != col {
            return c(0.0);
        }
        let d = digits(r, m, n);
        c(nf * (nf - 1.0) * pair_value(v, d[0], d[1]) - a * nf * (rho[d[0]] + rho[d[1]]))
    })
}

pub fn vec_of(psi: &ManyBodyState) -> DVector<C64> {
    DVector::from_column_slice(psi.amplitudes())
}

pub fn state_of(like: &ManyBodyState, v: &DVector<C64>) -> ManyBodyState {
    ManyBodyState::from_amplitudes(like.grid(), like.particles(), v.iter().copied().collect()).unwrap()
}

/// Physics bracket `⟨a, b⟩ = h^N Σ conj(a) b`.
pub fn bracket(grid: &Grid, n: usize, a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.dotc(b) * grid.spacing().powi(n as i32)
}

pub fn random_orbital<R: Rng>(grid: &Grid, rng: &mut R) -> Orbital {
    let vals = (0..grid.points())
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Orbital::normalized(Field::new(grid, vals).unwrap()).unwrap()
}

pub fn max_abs(v: &DVector<C64>) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}
