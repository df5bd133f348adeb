//! The alternating-bond anisotropic Heisenberg Hamiltonian
//!
//! ```text
//! H = J_AF Σ_i (Sˣ₂ᵢ₋₁Sˣ₂ᵢ + Sʸ₂ᵢ₋₁Sʸ₂ᵢ + Δ_AF Sᶻ₂ᵢ₋₁Sᶻ₂ᵢ)
//!   + J_F  Σ_i (Sˣ₂ᵢSˣ₂ᵢ₊₁ + Sʸ₂ᵢSʸ₂ᵢ₊₁ + Δ_F  Sᶻ₂ᵢSᶻ₂ᵢ₊₁)
//! ```
//!
//! on an open chain, as a list of bond terms, as two-site matrices and as a
//! bond-dimension-5 matrix product operator.

use crate::{Error, Result};

/// Local dimension of a spin-1/2.
pub const PHYS_DIM: usize = 2;
/// Bond dimension of the nearest-neighbour XXZ MPO.
pub const MPO_BOND_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Boundary {
    #[default]
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n_sites: usize,
    pub j_af: f64,
    pub j_f: f64,
    pub delta_af: f64,
    pub delta_f: f64,
    pub boundary: Boundary,
}

impl ModelParams {
    /// `J_AF = −J_F = 1`, `Δ_AF = 1`, open chain.
    pub fn with_defaults(n_sites: usize, delta_f: f64) -> Self {
        Self {
            n_sites,
            j_af: 1.0,
            j_f: -1.0,
            delta_af: 1.0,
            delta_f,
            boundary: Boundary::Open,
        }
    }

    pub fn with_delta_f(&self, delta_f: f64) -> Self {
        Self { delta_f, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidParams(format!(
                "n_sites = {} but at least one AF dimer (2 sites) is required",
                self.n_sites
            )));
        }
        if self.n_sites % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "n_sites = {} is odd; the chain must consist of complete AF dimers",
                self.n_sites
            )));
        }
        let finite = [self.j_af, self.j_f, self.delta_af, self.delta_f]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("couplings must be finite".into()));
        }
        Ok(())
    }

    /// Coupling and anisotropy of the bond starting at `left_site` (1-based).
    pub fn bond(&self, left_site: usize) -> (BondKind, f64, f64) {
        if left_site % 2 == 1 {
            (BondKind::AF, self.j_af, self.delta_af)
        } else {
            (BondKind::F, self.j_f, self.delta_f)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondKind {
    AF,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondTerm {
    pub left_site: usize,
    pub right_site: usize,
    pub coupling: f64,
    pub anisotropy: f64,
    pub kind: BondKind,
}

/// All nearest-neighbour bonds of the open chain, ascending by `left_site`.
pub fn build_bond_terms(params: &ModelParams) -> Result<Vec<BondTerm>> {
    params.validate()?;
    Ok((1..params.n_sites)
        .map(|left_site| {
            let (kind, coupling, anisotropy) = params.bond(left_site);
            BondTerm {
                left_site,
                right_site: left_site + 1,
                coupling,
                anisotropy,
                kind,
            }
        })
        .collect())
}

/// Spin-1/2 operators in the `{↑, ↓}` basis, row-major.
pub mod spin {
    pub const IDENTITY: [f64; 4] = [1.0, 0.0, 0.0, 1.0];
    pub const SZ: [f64; 4] = [0.5, 0.0, 0.0, -0.5];
    /// `S⁺|↓⟩ = |↑⟩`
    pub const SPLUS: [f64; 4] = [0.0, 1.0, 0.0, 0.0];
    pub const SMINUS: [f64; 4] = [0.0, 0.0, 1.0, 0.0];
}

/// `J (SˣSˣ + SʸSʸ + Δ SᶻSᶻ)` on the basis `↑↑, ↑↓, ↓↑, ↓↓`, row-major.
pub fn bond_matrix(coupling: f64, anisotropy: f64) -> [f64; 16] {
    let zz = coupling * anisotropy * 0.25;
    let flip = coupling * 0.5;
    #[rustfmt::skip]
    let m = [
        zz,   0.0,  0.0,  0.0,
        0.0, -zz,   flip, 0.0,
        0.0,  flip, -zz,  0.0,
        0.0,  0.0,  0.0,  zz,
    ];
    m
}

/// One MPO site tensor `W[wl, s_out, s_in, wr]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MpoTensor {
    pub left_dim: usize,
    pub right_dim: usize,
    pub data: Vec<f64>,
}

impl MpoTensor {
    fn zeros(left_dim: usize, right_dim: usize) -> Self {
        Self {
            left_dim,
            right_dim,
            data: vec![0.0; left_dim * PHYS_DIM * PHYS_DIM * right_dim],
        }
    }

    #[inline]
    pub fn index(&self, wl: usize, s_out: usize, s_in: usize, wr: usize) -> usize {
        ((wl * PHYS_DIM + s_out) * PHYS_DIM + s_in) * self.right_dim + wr
    }

    pub fn get(&self, wl: usize, s_out: usize, s_in: usize, wr: usize) -> f64 {
        self.data[self.index(wl, s_out, s_in, wr)]
    }

    fn set_block(&mut self, wl: usize, wr: usize, op: &[f64; 4], factor: f64) {
        for so in 0..PHYS_DIM {
            for si in 0..PHYS_DIM {
                let i = self.index(wl, so, si, wr);
                self.data[i] = factor * op[so * PHYS_DIM + si];
            }
        }
    }

    /// The 2×2 operator block `W[wl, ·, ·, wr]`.
    pub fn block(&self, wl: usize, wr: usize) -> [f64; 4] {
        let mut op = [0.0; 4];
        for so in 0..PHYS_DIM {
            for si in 0..PHYS_DIM {
                op[so * PHYS_DIM + si] = self.get(wl, so, si, wr);
            }
        }
        op
    }

    /// Nonzero `(wl, wr, block)` entries.
    pub fn nonzero_blocks(&self) -> Vec<(usize, usize, [f64; 4])> {
        let mut out = Vec::new();
        for wl in 0..self.left_dim {
            for wr in 0..self.right_dim {
                let op = self.block(wl, wr);
                if op.iter().any(|x| *x != 0.0) {
                    out.push((wl, wr, op));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductOperator {
    pub site_tensors: Vec<MpoTensor>,
    pub bond_dimension: usize,
}

/// Lower-triangular MPO: row 4 is "nothing placed yet", column 0 is
/// "interaction completed". Site `i` carries the left half of bond `(i, i+1)`.
pub fn build_mpo(params: &ModelParams) -> Result<MatrixProductOperator> {
    use spin::*;
    params.validate()?;
    let n = params.n_sites;
    let d = MPO_BOND_DIM;
    let mut site_tensors = Vec::with_capacity(n);
    for site in 1..=n {
        let mut w = MpoTensor::zeros(d, d);
        w.set_block(0, 0, &IDENTITY, 1.0);
        w.set_block(1, 0, &SPLUS, 1.0);
        w.set_block(2, 0, &SMINUS, 1.0);
        w.set_block(3, 0, &SZ, 1.0);
        if site < n {
            let (_, j, delta) = params.bond(site);
            w.set_block(4, 1, &SMINUS, 0.5 * j);
            w.set_block(4, 2, &SPLUS, 0.5 * j);
            w.set_block(4, 3, &SZ, j * delta);
        }
        w.set_block(4, 4, &IDENTITY, 1.0);

        let rows: Vec<usize> = if site == 1 { vec![4] } else { (0..d).collect() };
        let cols: Vec<usize> = if site == n { vec![0] } else { (0..d).collect() };
        let mut t = MpoTensor::zeros(rows.len(), cols.len());
        for (a, &wl) in rows.iter().enumerate() {
            for (b, &wr) in cols.iter().enumerate() {
                t.set_block(a, b, &w.block(wl, wr), 1.0);
            }
        }
        site_tensors.push(t);
    }
    Ok(MatrixProductOperator {
        site_tensors,
        bond_dimension: d,
    })
}

impl MatrixProductOperator {
    pub fn n_sites(&self) -> usize {
        self.site_tensors.len()
    }

    /// Full `2^N × 2^N` matrix, row-major, site 1 most significant.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let n = self.n_sites();
        const CAP: usize = 12;
        if n > CAP {
            return Err(Error::SizeCap {
                what: "dense MPO contraction",
                size: n,
                cap: CAP,
            });
        }
        // acc[w] is the (dim × dim) operator accumulated so far ending in MPO bond w.
        let first = &self.site_tensors[0];
        let mut dim = PHYS_DIM;
        let mut acc: Vec<Vec<f64>> = (0..first.right_dim)
            .map(|wr| first.block(0, wr).to_vec())
            .collect();
        for t in &self.site_tensors[1..] {
            let new_dim = dim * PHYS_DIM;
            let mut next = vec![vec![0.0; new_dim * new_dim]; t.right_dim];
            for (wl, prev) in acc.iter().enumerate() {
                for wr in 0..t.right_dim {
                    let op = t.block(wl, wr);
                    if op.iter().all(|x| *x == 0.0) {
                        continue;
                    }
                    let out = &mut next[wr];
                    for r in 0..dim {
                        for c in 0..dim {
                            let p = prev[r * dim + c];
                            if p == 0.0 {
                                continue;
                            }
                            for so in 0..PHYS_DIM {
                                for si in 0..PHYS_DIM {
                                    let row = r * PHYS_DIM + so;
                                    let col = c * PHYS_DIM + si;
                                    out[row * new_dim + col] += p * op[so * PHYS_DIM + si];
                                }
                            }
                        }
                    }
                }
            }
            acc = next;
            dim = new_dim;
        }
        Ok(acc.swap_remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;

    #[test]
    fn bond_terms_small_chains() {
        let t = build_bond_terms(&ModelParams::with_defaults(2, 1.0)).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].left_site, t[0].right_site, t[0].kind), (1, 2, BondKind::AF));

        let t = build_bond_terms(&ModelParams::with_defaults(4, 2.0)).unwrap();
        let kinds: Vec<_> = t.iter().map(|b| (b.left_site, b.right_site, b.kind)).collect();
        assert_eq!(
            kinds,
            vec![(1, 2, BondKind::AF), (2, 3, BondKind::F), (3, 4, BondKind::AF)]
        );
        assert_eq!(t[1].coupling, -1.0);
        assert_eq!(t[1].anisotropy, 2.0);

        let t = build_bond_terms(&ModelParams::with_defaults(78, 2.32)).unwrap();
        assert_eq!(t.len(), 77);
        assert_eq!(t.iter().filter(|b| b.kind == BondKind::AF).count(), 39);
        assert_eq!(t.iter().filter(|b| b.kind == BondKind::F).count(), 38);
        assert!(t.iter().all(|b| b.right_site == b.left_site + 1
            && (b.kind == BondKind::AF) == (b.left_site % 2 == 1)));
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(build_bond_terms(&ModelParams::with_defaults(5, 1.0)).is_err());
        assert!(build_bond_terms(&ModelParams::with_defaults(0, 1.0)).is_err());
        assert!(build_mpo(&ModelParams::with_defaults(3, 1.0)).is_err());
    }

    #[test]
    fn heisenberg_bond_spectrum() {
        let m = bond_matrix(1.0, 1.0);
        let ev = symmetric_eigenvalues(&m, 4).unwrap();
        let expect = [-0.75, 0.25, 0.25, 0.25];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(bond_matrix(0.0, 3.7).iter().all(|x| *x == 0.0));
        let xy = bond_matrix(1.0, 0.0);
        assert_eq!([xy[0], xy[5], xy[10], xy[15]], [0.0; 4]);
        assert_eq!(xy[6], 0.5);
        assert_eq!(xy[9], 0.5);
    }

    #[test]
    fn bond_matrix_is_symmetric() {
        for &(j, d) in &[(1.0, 1.0), (-1.0, 2.3), (0.4, -0.7)] {
            let m = bond_matrix(j, d);
            for r in 0..4 {
                for c in 0..4 {
                    assert_eq!(m[r * 4 + c], m[c * 4 + r]);
                }
            }
        }
    }

    #[test]
    fn two_site_mpo_is_the_bond() {
        let p = ModelParams::with_defaults(2, 1.7);
        let mpo = build_mpo(&p).unwrap();
        assert_eq!(mpo.bond_dimension, 5);
        assert_eq!(mpo.to_dense().unwrap(), bond_matrix(1.0, 1.0).to_vec());
    }

    #[test]
    fn polarized_state_energy() {
        for n in [2usize, 4, 6, 8] {
            let p = ModelParams::with_defaults(n, 2.5);
            let h = build_mpo(&p).unwrap().to_dense().unwrap();
            let expect = 0.25 * (p.j_af * p.delta_af * (n / 2) as f64
                + p.j_f * p.delta_f * (n / 2 - 1) as f64);
            // all-up is basis index 0
            assert!((h[0] - expect).abs() < 1e-14);
        }
    }
}
