//! Reference quantities assembled the slow, obvious way: full Kronecker
//! Hamiltonians, partial traces and dense eigensolves.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use spinchain::model::ModelParams;

fn sx() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0])
}

// i·Sʸ, so Sʸ⊗Sʸ = −(iSʸ)⊗(iSʸ) stays real.
fn isy() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0])
}

fn sz() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.5])
}

pub fn two_site_term(coupling: f64, anisotropy: f64) -> DMatrix<f64> {
    let xx = sx().kronecker(&sx());
    let yy = -isy().kronecker(&isy());
    let zz = sz().kronecker(&sz());
    (xx + yy + zz * anisotropy) * coupling
}

/// Full `2^N × 2^N` Hamiltonian, site 1 as the leftmost Kronecker factor.
pub fn full_hamiltonian(p: &ModelParams) -> DMatrix<f64> {
    let n = p.n_sites;
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 1..n {
        let (coupling, anisotropy) = if i % 2 == 1 {
            (p.j_af, p.delta_af)
        } else {
            (p.j_f, p.delta_f)
        };
        let left = DMatrix::<f64>::identity(1 << (i - 1), 1 << (i - 1));
        let right = DMatrix::<f64>::identity(1 << (n - i - 1), 1 << (n - i - 1));
        h += left.kronecker(&two_site_term(coupling, anisotropy)).kronecker(&right);
    }
    h
}

/// Full-space indices with `n_down` down spins.
pub fn sector_indices(n: usize, n_down: usize) -> Vec<usize> {
    (0..1usize << n).filter(|x| x.count_ones() as usize == n_down).collect()
}

pub fn restrict(h: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])])
}

/// Lowest eigenpair of a symmetric matrix.
pub fn lowest(h: DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(h);
    let k = eig.eigenvalues.imin();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// Sᶻ = 0 ground state embedded in the full space.
pub fn ground_state(p: &ModelParams) -> (f64, Vec<f64>) {
    let n = p.n_sites;
    let idx = sector_indices(n, n / 2);
    let (e, v) = lowest(restrict(&full_hamiltonian(p), &idx));
    let mut full = vec![0.0; 1 << n];
    for (k, &i) in idx.iter().enumerate() {
        full[i] = v[k];
    }
    (e, full)
}

/// Reduced density matrix of the right-hand `l` sites.
pub fn reduced_density_right(psi: &[f64], n: usize, l: usize) -> DMatrix<f64> {
    let rows = 1usize << (n - l);
    let cols = 1usize << l;
    let m = DMatrix::from_row_slice(rows, cols, psi);
    m.transpose() * m
}

/// Reduced density matrix of the left-hand `n − l` sites.
pub fn reduced_density_left(psi: &[f64], n: usize, l: usize) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(1usize << (n - l), 1usize << l, psi);
    &m * m.transpose()
}

/// Entropy of the right-hand `l` sites. The trace runs over the larger
/// block: the eigensolver misbehaves on big, mostly-null density matrices.
pub fn entropy_bits(psi: &[f64], n: usize, l: usize) -> f64 {
    let rho = if 2 * l <= n {
        reduced_density_right(psi, n, l)
    } else {
        reduced_density_left(psi, n, l)
    };
    SymmetricEigen::new(rho)
        .eigenvalues
        .iter()
        .filter(|&&w| w > 1e-300)
        .map(|&w| -w * w.log2())
        .sum()
}

pub fn fidelity(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs()
}

pub fn susceptibility(f: f64, n: usize, delta: f64) -> f64 {
    2.0 * (1.0 - f) / (n as f64 * delta * delta)
}

/// Real eigenvectors are fixed only up to a global sign.
pub fn max_abs_diff_up_to_sign(a: &[f64], b: &[f64]) -> f64 {
    let plus = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let minus = a.iter().zip(b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    plus.min(minus)
}
