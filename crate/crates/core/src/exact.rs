//! Exact diagonalization in a fixed total-Sᶻ sector.
//!
//! Configurations are encoded so that the integer code *is* the index into
//! the full `2^N` vector: site `k` (1-based) lives in bit `N − k` and a set
//! bit means `↓`. Sorting codes therefore orders the sector exactly like the
//! dense Kronecker basis used everywhere else in the crate.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lanczos::{lowest_eigenpair, LanczosOptions};
use crate::linalg::{dot, norm, singular_values, symmetric_eigen};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Largest chain accepted by [`sector_basis`].
pub const DEFAULT_SITE_CAP: usize = 20;
/// Largest sector handled by the dense fallback eigensolver.
pub const DENSE_FALLBACK_CAP: usize = 4096;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_SEED: u64 = 12345;

#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    n_sites: usize,
    total_sz: f64,
    states: Vec<u64>,
}

impl SectorBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn total_sz(&self) -> f64 {
        self.total_sz
    }

    /// Codes in strictly ascending order.
    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Ordinal of a configuration, if it belongs to the sector.
    #[inline]
    pub fn index_of(&self, code: u64) -> Option<usize> {
        self.states.binary_search(&code).ok()
    }

    /// Local state (0 = ↑, 1 = ↓) of `site` (1-based) in `code`.
    #[inline]
    pub fn spin_at(&self, code: u64, site: usize) -> u64 {
        (code >> (self.n_sites - site)) & 1
    }
}

pub fn sector_basis(n_sites: usize, total_sz: f64) -> Result<SectorBasis> {
    sector_basis_with_cap(n_sites, total_sz, DEFAULT_SITE_CAP)
}

pub fn sector_basis_with_cap(n_sites: usize, total_sz: f64, cap: usize) -> Result<SectorBasis> {
    if n_sites > cap || n_sites > 62 {
        return Err(Error::SizeCap {
            what: "exact diagonalization sites",
            size: n_sites,
            cap: cap.min(62),
        });
    }
    let n_up = n_sites as f64 / 2.0 + total_sz;
    if (n_up - n_up.round()).abs() > 1e-9 || n_up < -1e-9 || n_up > n_sites as f64 + 1e-9 {
        return Err(Error::InvalidParams(format!(
            "total_sz = {total_sz} gives a non-integral or impossible up count for {n_sites} sites"
        )));
    }
    let n_down = n_sites - n_up.round() as usize;
    let mut states = Vec::new();
    // Gosper's hack over codes with `n_down` set bits, ascending.
    if n_down == 0 {
        states.push(0);
    } else {
        let limit = 1u64 << n_sites;
        let mut c: u64 = (1u64 << n_down) - 1;
        while c < limit {
            states.push(c);
            let lowest = c & c.wrapping_neg();
            let ripple = c + lowest;
            c = (((ripple ^ c) >> 2) / lowest) | ripple;
        }
    }
    Ok(SectorBasis {
        n_sites,
        total_sz,
        states,
    })
}

#[derive(Debug, Clone)]
pub struct DenseState {
    pub basis: Arc<SectorBasis>,
    pub amplitudes: Vec<f64>,
}

impl DenseState {
    pub fn new(basis: Arc<SectorBasis>, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// Amplitudes embedded in the full `2^N` space.
    pub fn to_full(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1usize << self.n_sites()];
        for (&code, &a) in self.basis.states().iter().zip(&self.amplitudes) {
            out[code as usize] = a;
        }
        out
    }
}

struct Bond {
    hi_bit: u32,
    lo_bit: u32,
    diag_same: f64,
    flip: f64,
}

fn bonds(params: &ModelParams) -> Vec<Bond> {
    let n = params.n_sites;
    (1..n)
        .map(|site| {
            let (_, j, delta) = params.bond(site);
            Bond {
                hi_bit: (n - site) as u32,
                lo_bit: (n - site - 1) as u32,
                diag_same: 0.25 * j * delta,
                flip: 0.5 * j,
            }
        })
        .collect()
}

fn check_basis(params: &ModelParams, basis: &SectorBasis) -> Result<()> {
    params.validate()?;
    if params.n_sites != basis.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: basis.n_sites(),
            found: params.n_sites,
        });
    }
    Ok(())
}

fn apply_into(bonds: &[Bond], basis: &SectorBasis, v: &[f64], out: &mut [f64]) {
    for (k, &code) in basis.states().iter().enumerate() {
        let mut diag = 0.0;
        let mut acc = 0.0;
        for b in bonds {
            let hi = (code >> b.hi_bit) & 1;
            let lo = (code >> b.lo_bit) & 1;
            if hi == lo {
                diag += b.diag_same;
            } else {
                diag -= b.diag_same;
                let flipped = code ^ ((1u64 << b.hi_bit) | (1u64 << b.lo_bit));
                if let Some(j) = basis.index_of(flipped) {
                    acc += b.flip * v[j];
                }
            }
        }
        out[k] = diag * v[k] + acc;
    }
}

/// Matrix-free `H·v` restricted to the sector.
pub fn apply_hamiltonian(params: &ModelParams, basis: &SectorBasis, v: &[f64]) -> Result<Vec<f64>> {
    check_basis(params, basis)?;
    if v.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: v.len(),
        });
    }
    let mut out = vec![0.0; v.len()];
    apply_into(&bonds(params), basis, v, &mut out);
    Ok(out)
}

/// Sector Hamiltonian as a dense row-major matrix (fallback and test oracle).
pub fn dense_sector_hamiltonian(params: &ModelParams, basis: &SectorBasis) -> Result<Vec<f64>> {
    check_basis(params, basis)?;
    let dim = basis.len();
    if dim > DENSE_FALLBACK_CAP {
        return Err(Error::SizeCap {
            what: "dense sector matrix",
            size: dim,
            cap: DENSE_FALLBACK_CAP,
        });
    }
    let bonds = bonds(params);
    let mut h = vec![0.0; dim * dim];
    for (k, &code) in basis.states().iter().enumerate() {
        for b in &bonds {
            let hi = (code >> b.hi_bit) & 1;
            let lo = (code >> b.lo_bit) & 1;
            if hi == lo {
                h[k * dim + k] += b.diag_same;
            } else {
                h[k * dim + k] -= b.diag_same;
                let flipped = code ^ ((1u64 << b.hi_bit) | (1u64 << b.lo_bit));
                if let Some(j) = basis.index_of(flipped) {
                    h[j * dim + k] += b.flip;
                }
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct ExactGroundState {
    pub energy: f64,
    pub state: DenseState,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Lowest eigenpair of the sector by dense diagonalization (`|basis| ≤ 4096`).
pub fn ground_state_dense(params: &ModelParams, basis: Arc<SectorBasis>) -> Result<ExactGroundState> {
    let h = dense_sector_hamiltonian(params, &basis)?;
    let eig = symmetric_eigen(&h, basis.len())?;
    let state = DenseState::new(basis, eig.vector(0))?;
    Ok(ExactGroundState {
        energy: eig.values[0],
        state,
        residual: 0.0,
        iterations: 0,
        converged: true,
    })
}

/// Deterministic pseudo-random start vector.
pub fn random_start(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect()
}

/// Ground state by Lanczos from a seeded random start.
///
/// Non-convergence is not an error: the result carries `converged = false`
/// and the best residual reached, and the caller decides.
pub fn ground_state_lanczos(
    params: &ModelParams,
    basis: Arc<SectorBasis>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<ExactGroundState> {
    let start = random_start(basis.len(), seed);
    ground_state_lanczos_from(params, basis, &start, tol, max_iter)
}

/// Ground state by Lanczos from a caller-supplied start vector (warm start).
pub fn ground_state_lanczos_from(
    params: &ModelParams,
    basis: Arc<SectorBasis>,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ExactGroundState> {
    check_basis(params, &basis)?;
    if basis.is_empty() {
        return Err(Error::InvalidParams("empty sector".into()));
    }
    if start.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: start.len(),
        });
    }
    let bonds = bonds(params);
    let opts = LanczosOptions {
        tol,
        max_iter,
        krylov_dim: 100,
    };
    let pair = lowest_eigenpair(|x, y| apply_into(&bonds, &basis, x, y), start, opts)?;
    if !pair.converged {
        log::warn!(
            "Lanczos not converged after {} iterations (residual {:.3e})",
            pair.iterations,
            pair.residual
        );
    }
    Ok(ExactGroundState {
        energy: pair.value,
        state: DenseState::new(basis, pair.vector)?,
        residual: pair.residual,
        iterations: pair.iterations,
        converged: pair.converged,
    })
}

/// Convenience: Sᶻ = 0 ground state with the default tolerance and seed.
pub fn ground_state(params: &ModelParams) -> Result<ExactGroundState> {
    let basis = Arc::new(sector_basis(params.n_sites, 0.0)?);
    ground_state_lanczos(params, basis, DEFAULT_TOL, DEFAULT_MAX_ITER, DEFAULT_SEED)
}

/// Squared Schmidt values across the cut that separates the right-hand
/// `l_sites` sites from the rest, descending.
pub fn exact_schmidt_weights(state: &DenseState, l_sites: usize) -> Result<Vec<f64>> {
    let n = state.n_sites();
    if l_sites < 1 || l_sites >= n {
        return Err(Error::OutOfRange {
            what: "l_sites",
            value: l_sites as i64,
            min: 1,
            max: n as i64 - 1,
        });
    }
    // The sector state is block diagonal in the Sᶻ of the right block, so
    // each block is decomposed separately.
    let mask = (1u64 << l_sites) - 1;
    let mut weights = Vec::new();
    for downs in 0..=l_sites as u32 {
        let mut rows: Vec<u64> = Vec::new();
        let mut cols: Vec<u64> = Vec::new();
        let mut entries = Vec::new();
        for (&code, &a) in state.basis.states().iter().zip(&state.amplitudes) {
            let right = code & mask;
            if right.count_ones() != downs {
                continue;
            }
            rows.push(code >> l_sites);
            cols.push(right);
            entries.push((code >> l_sites, right, a));
        }
        if entries.is_empty() {
            continue;
        }
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        let (nr, nc) = (rows.len(), cols.len());
        let mut m = vec![0.0; nr * nc];
        for (l, r, a) in entries {
            let i = rows.binary_search(&l).unwrap();
            let j = cols.binary_search(&r).unwrap();
            m[i * nc + j] = a;
        }
        weights.extend(singular_values(&m, nr, nc)?.into_iter().map(|s| s * s));
    }
    weights.sort_by(|a, b| b.total_cmp(a));
    Ok(weights)
}

/// Von Neumann entropy (bits) of the right-hand `l_sites` block.
pub fn exact_entropy(state: &DenseState, l_sites: usize) -> Result<f64> {
    Ok(entropy_bits(&exact_schmidt_weights(state, l_sites)?))
}

/// `−Σ p log₂ p` with `0·log 0 = 0`.
pub fn entropy_bits(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// `|⟨a|b⟩|`
pub fn exact_overlap(a: &DenseState, b: &DenseState) -> Result<f64> {
    if !Arc::ptr_eq(&a.basis, &b.basis) && *a.basis != *b.basis {
        return Err(Error::RepresentationMismatch);
    }
    Ok(dot(&a.amplitudes, &b.amplitudes).abs())
}

/// `⟨Sᶻ_total⟩`
pub fn total_sz(state: &DenseState) -> f64 {
    let n = state.n_sites() as f64;
    state
        .basis
        .states()
        .iter()
        .zip(&state.amplitudes)
        .map(|(&c, &a)| a * a * (n / 2.0 - c.count_ones() as f64))
        .sum()
}
