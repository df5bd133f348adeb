//! Open-boundary matrix product states with real rank-3 site tensors.
//!
//! A site tensor `A[l, s, r]` is stored row-major, so viewed as a matrix it
//! is either left-grouped `(l·2) × r` or right-grouped `l × (2·r)` without
//! copying. Singular values below [`SINGULAR_FLOOR`] (relative to the largest
//! at that bond) are discarded by every decomposition.

pub mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{gemm, matmul_new, svd, Svd};
use crate::model::PHYS_DIM;
use crate::{Error, Result};

pub const SINGULAR_FLOOR: f64 = 1e-14;
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-12;
const DENSE_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    pub left: usize,
    pub right: usize,
    pub data: Vec<f64>,
}

impl SiteTensor {
    pub fn new(left: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        let expected = left * PHYS_DIM * right;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { left, right, data })
    }

    pub fn zeros(left: usize, right: usize) -> Self {
        Self {
            left,
            right,
            data: vec![0.0; left * PHYS_DIM * right],
        }
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> f64 {
        self.data[(l * PHYS_DIM + s) * self.right + r]
    }

    /// `(l·2) × r` view dimensions.
    pub fn left_grouped(&self) -> (usize, usize) {
        (self.left * PHYS_DIM, self.right)
    }

    /// `l × (2·r)` view dimensions.
    pub fn right_grouped(&self) -> (usize, usize) {
        (self.left, PHYS_DIM * self.right)
    }

    /// `Σ_{l,s} A[l,s,r] A[l,s,r']`; identity for a left-orthonormal tensor.
    pub fn left_gram(&self) -> Vec<f64> {
        matmul_new(&self.data, self.left_grouped(), true, &self.data, self.left_grouped(), false)
    }

    /// `Σ_{s,r} A[l,s,r] A[l',s,r]`; identity for a right-orthonormal tensor.
    pub fn right_gram(&self) -> Vec<f64> {
        matmul_new(&self.data, self.right_grouped(), false, &self.data, self.right_grouped(), true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    /// Cut between the first `cut_bond` sites and the rest.
    pub cut_bond: usize,
    /// Descending, nonnegative.
    pub values: Vec<f64>,
}

impl SchmidtSpectrum {
    pub fn weights(&self) -> Vec<f64> {
        self.values.iter().map(|s| s * s).collect()
    }

    /// Von Neumann entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        crate::exact::entropy_bits(&self.weights())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRecord {
    pub bond: usize,
    pub kept: usize,
    pub discarded_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductState {
    tensors: Vec<SiteTensor>,
    /// 0-based site index of the orthogonality center, if known.
    center: Option<usize>,
}

/// Number of singular values to keep: at most `max_kept`, widened so that a
/// multiplet straddling the cut (values within `degeneracy_tol` of the last
/// kept one) is kept whole, but never beyond `2·max_kept`. Values under the
/// noise floor are never kept.
pub fn select_kept(values: &[f64], max_kept: usize, degeneracy_tol: f64) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    let available = values
        .iter()
        .take_while(|&&s| s > SINGULAR_FLOOR * top)
        .count()
        .max(1)
        .min(values.len());
    let mut keep = max_kept.max(1).min(available);
    let cut_value = values[keep - 1];
    let cap = (2 * max_kept).max(1).min(available);
    while keep < cap && cut_value - values[keep] <= degeneracy_tol {
        keep += 1;
    }
    keep
}

/// Which side of a split receives the singular values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Absorb {
    Left,
    Right,
}

pub(crate) struct Split {
    pub left: SiteTensor,
    pub right: SiteTensor,
    pub record: TruncationRecord,
}

/// Splits a two-site tensor `θ[(l,s1),(s2,r)]` by SVD, truncating to
/// `max_kept` and renormalizing the kept weight to one.
pub(crate) fn split_two_site(
    theta: &[f64],
    dl: usize,
    dr: usize,
    bond: usize,
    max_kept: usize,
    degeneracy_tol: f64,
    absorb: Absorb,
) -> Result<Split> {
    let dec = svd(theta, dl * PHYS_DIM, PHYS_DIM * dr)?;
    let total: f64 = dec.s.iter().map(|s| s * s).sum();
    let keep = select_kept(&dec.s, max_kept, degeneracy_tol);
    let kept_weight: f64 = dec.s[..keep].iter().map(|s| s * s).sum();
    let dropped: f64 = dec.s[keep..].iter().map(|s| s * s).sum();
    let discarded_weight = if total > 0.0 && dropped > 0.0 {
        (dropped / total).min(1.0)
    } else {
        0.0
    };
    let mut dec = dec.truncated(keep);
    let norm = kept_weight.sqrt();
    dec.s.iter_mut().for_each(|s| *s /= norm);
    let Svd { u, s, mut vt, .. } = dec;
    let mut u = u;
    match absorb {
        Absorb::Right => {
            for (row, sv) in vt.chunks_exact_mut(PHYS_DIM * dr).zip(&s) {
                row.iter_mut().for_each(|x| *x *= sv);
            }
        }
        Absorb::Left => {
            for row in u.chunks_exact_mut(keep) {
                row.iter_mut().zip(&s).for_each(|(x, sv)| *x *= sv);
            }
        }
    }
    Ok(Split {
        left: SiteTensor::new(dl, keep, u)?,
        right: SiteTensor::new(keep, dr, vt)?,
        record: TruncationRecord {
            bond,
            kept: keep,
            discarded_weight,
        },
    })
}

/// `θ[(l,s1),(s2,r)] = Σ_m A[l,s1,m] B[m,s2,r]`
pub fn contract_pair(a: &SiteTensor, b: &SiteTensor) -> Vec<f64> {
    debug_assert_eq!(a.right, b.left);
    matmul_new(&a.data, a.left_grouped(), false, &b.data, b.right_grouped(), false)
}

pub fn product_mps(n_sites: usize, configuration: &[Spin]) -> Result<MatrixProductState> {
    if configuration.len() != n_sites {
        return Err(Error::DimensionMismatch {
            expected: n_sites,
            found: configuration.len(),
        });
    }
    if n_sites == 0 {
        return Err(Error::InvalidParams("empty chain".into()));
    }
    let tensors = configuration
        .iter()
        .map(|s| {
            let mut t = SiteTensor::zeros(1, 1);
            t.data[s.index()] = 1.0;
            t
        })
        .collect();
    Ok(MatrixProductState {
        tensors,
        center: Some(0),
    })
}

/// `↑↓↑↓…`
pub fn neel_mps(n_sites: usize) -> Result<MatrixProductState> {
    let conf: Vec<Spin> = (0..n_sites)
        .map(|i| if i % 2 == 0 { Spin::Up } else { Spin::Down })
        .collect();
    product_mps(n_sites, &conf)
}

impl MatrixProductState {
    pub fn from_tensors(tensors: Vec<SiteTensor>, center: Option<usize>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidParams("empty chain".into()));
        }
        if tensors[0].left != 1 || tensors[tensors.len() - 1].right != 1 {
            return Err(Error::InvalidParams("boundary bond dimensions must be 1".into()));
        }
        for w in tensors.windows(2) {
            if w[0].right != w[1].left {
                return Err(Error::DimensionMismatch {
                    expected: w[0].right,
                    found: w[1].left,
                });
            }
        }
        if let Some(c) = center {
            if c >= tensors.len() {
                return Err(center_range(c, tensors.len()));
            }
        }
        Ok(Self { tensors, center })
    }

    /// Normalized random state with bond dimensions `min(2^i, 2^(N−i), max_bond)`.
    pub fn random(n_sites: usize, max_bond: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims: Vec<usize> = (0..=n_sites)
            .map(|i| {
                let e = i.min(n_sites - i).min(30) as u32;
                (1usize << e).min(max_bond.max(1))
            })
            .collect();
        let tensors = (0..n_sites)
            .map(|i| {
                let data = (0..dims[i] * PHYS_DIM * dims[i + 1])
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                SiteTensor::new(dims[i], dims[i + 1], data)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mps = Self::from_tensors(tensors, None)?.canonicalize(0)?;
        let nrm = mps.norm();
        mps.tensors[0].data.iter_mut().for_each(|x| *x /= nrm);
        Ok(mps)
    }

    /// Decomposes a full `2^N` amplitude vector (site 1 most significant).
    pub fn from_dense(amplitudes: &[f64], n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > DENSE_CAP + 4 || amplitudes.len() != 1usize << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1usize << n_sites.min(40),
                found: amplitudes.len(),
            });
        }
        let mut tensors = Vec::with_capacity(n_sites);
        let mut rest = amplitudes.to_vec();
        let mut dl = 1;
        for _ in 0..n_sites - 1 {
            let rows = dl * PHYS_DIM;
            let cols = rest.len() / rows;
            let dec = svd(&rest, rows, cols)?;
            let keep = select_kept(&dec.s, usize::MAX / 4, 0.0);
            let dec = dec.truncated(keep);
            let mut svt = dec.vt;
            for (row, s) in svt.chunks_exact_mut(cols).zip(&dec.s) {
                row.iter_mut().for_each(|x| *x *= s);
            }
            tensors.push(SiteTensor::new(dl, keep, dec.u)?);
            rest = svt;
            dl = keep;
        }
        tensors.push(SiteTensor::new(dl, 1, rest)?);
        Self::from_tensors(tensors, Some(n_sites - 1))
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &SiteTensor {
        &self.tensors[site]
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut Vec<SiteTensor> {
        &mut self.tensors
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub(crate) fn set_center(&mut self, center: Option<usize>) {
        self.center = center;
    }

    /// `N + 1` bond dimensions including the two trivial boundary bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.tensors.iter().map(|t| t.left).collect();
        d.push(self.tensors[self.tensors.len() - 1].right);
        d
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn norm(&self) -> f64 {
        inner(self, self).map(|x| x.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Moves the center one site right using an SVD of the current center.
    fn shift_right(&mut self, i: usize) -> Result<()> {
        let t = &self.tensors[i];
        let (rows, cols) = t.left_grouped();
        let dec = svd(&t.data, rows, cols)?;
        let keep = select_kept(&dec.s, usize::MAX / 4, 0.0);
        let dec = dec.truncated(keep);
        let mut svt = dec.vt;
        for (row, s) in svt.chunks_exact_mut(cols).zip(&dec.s) {
            row.iter_mut().for_each(|x| *x *= s);
        }
        let left = t.left;
        let next = &self.tensors[i + 1];
        let merged = matmul_new(&svt, (keep, cols), false, &next.data, next.right_grouped(), false);
        let next_right = next.right;
        self.tensors[i] = SiteTensor::new(left, keep, dec.u)?;
        self.tensors[i + 1] = SiteTensor::new(keep, next_right, merged)?;
        Ok(())
    }

    /// Moves the center one site left using an SVD of the current center.
    fn shift_left(&mut self, i: usize) -> Result<()> {
        let t = &self.tensors[i];
        let (rows, cols) = t.right_grouped();
        let dec = svd(&t.data, rows, cols)?;
        let keep = select_kept(&dec.s, usize::MAX / 4, 0.0);
        let dec = dec.truncated(keep);
        let mut us = dec.u;
        for row in us.chunks_exact_mut(keep) {
            row.iter_mut().zip(&dec.s).for_each(|(x, s)| *x *= s);
        }
        let right = t.right;
        let prev = &self.tensors[i - 1];
        let merged = matmul_new(&prev.data, prev.left_grouped(), false, &us, (rows, keep), false);
        let prev_left = prev.left;
        self.tensors[i] = SiteTensor::new(keep, right, dec.vt)?;
        self.tensors[i - 1] = SiteTensor::new(prev_left, keep, merged)?;
        Ok(())
    }

    /// Moves the orthogonality center to `target` with the fewest SVD steps.
    /// A state without a known center is fully canonicalized first.
    pub fn move_center(&mut self, target: usize) -> Result<()> {
        let n = self.n_sites();
        if target >= n {
            return Err(center_range(target, n));
        }
        let mut c = match self.center {
            Some(c) => c,
            None => {
                for i in (1..n).rev() {
                    self.shift_left(i)?;
                }
                0
            }
        };
        while c < target {
            self.shift_right(c)?;
            c += 1;
        }
        while c > target {
            self.shift_left(c)?;
            c -= 1;
        }
        self.center = Some(target);
        Ok(())
    }

    /// Same physical state in mixed-canonical form around `center`, with
    /// every bond expressed in its Schmidt basis. The result depends only on
    /// the physical state (for nondegenerate spectra), so canonicalizing
    /// twice is idempotent.
    pub fn canonicalize(&self, center: usize) -> Result<Self> {
        let n = self.n_sites();
        if center >= n {
            return Err(center_range(center, n));
        }
        let mut out = self.clone();
        for i in (1..n).rev() {
            out.shift_left(i)?;
        }
        for i in 0..n - 1 {
            out.shift_right(i)?;
        }
        for i in (center + 1..n).rev() {
            out.shift_left(i)?;
        }
        out.center = Some(center);
        Ok(out)
    }

    /// Singular values across the cut after the first `cut_bond` sites.
    pub fn schmidt_spectrum(&self, cut_bond: usize) -> Result<SchmidtSpectrum> {
        let n = self.n_sites();
        if cut_bond < 1 || cut_bond >= n {
            return Err(Error::OutOfRange {
                what: "cut_bond",
                value: cut_bond as i64,
                min: 1,
                max: n as i64 - 1,
            });
        }
        let mut work = self.clone();
        work.move_center(cut_bond - 1)?;
        let t = &work.tensors[cut_bond - 1];
        let (rows, cols) = t.left_grouped();
        let values = crate::linalg::singular_values(&t.data, rows, cols)?;
        Ok(SchmidtSpectrum { cut_bond, values })
    }

    /// Truncates the bond after the first `bond` sites to at most `max_kept`
    /// Schmidt values (see [`select_kept`]) and renormalizes. The center
    /// must sit on one of the two adjacent sites; afterwards it is on the
    /// right one.
    pub fn truncate_bond(
        &self,
        bond: usize,
        max_kept: usize,
        degeneracy_tol: f64,
    ) -> Result<(Self, TruncationRecord)> {
        let n = self.n_sites();
        if bond < 1 || bond >= n {
            return Err(Error::OutOfRange {
                what: "bond",
                value: bond as i64,
                min: 1,
                max: n as i64 - 1,
            });
        }
        if max_kept < 1 {
            return Err(Error::InvalidParams("max_kept must be at least 1".into()));
        }
        match self.center {
            Some(c) if c + 1 == bond || c == bond => {}
            _ => {
                return Err(Error::InvalidParams(format!(
                    "truncate_bond({bond}) needs the center on site {} or {}",
                    bond - 1,
                    bond
                )))
            }
        }
        let (a, b) = (&self.tensors[bond - 1], &self.tensors[bond]);
        let theta = contract_pair(a, b);
        let split = split_two_site(
            &theta,
            a.left,
            b.right,
            bond,
            max_kept,
            degeneracy_tol,
            Absorb::Right,
        )?;
        let mut out = self.clone();
        out.tensors[bond - 1] = split.left;
        out.tensors[bond] = split.right;
        out.center = Some(bond);
        Ok((out, split.record))
    }

    /// Full amplitude vector, site 1 most significant (`N ≤ 16`).
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let n = self.n_sites();
        if n > DENSE_CAP {
            return Err(Error::SizeCap {
                what: "mps_to_dense sites",
                size: n,
                cap: DENSE_CAP,
            });
        }
        let first = &self.tensors[0];
        let mut acc = first.data.clone();
        let mut rows = PHYS_DIM;
        let mut d = first.right;
        for t in &self.tensors[1..] {
            acc = matmul_new(&acc, (rows, d), false, &t.data, t.right_grouped(), false);
            rows *= PHYS_DIM;
            d = t.right;
        }
        Ok(acc)
    }

    /// `⟨Ô_i⟩ / ⟨ψ|ψ⟩` of a single-site operator on every site.
    pub fn local_expectations(&self, op: &[f64; 4]) -> Vec<f64> {
        let n = self.n_sites();
        let mut lefts = Vec::with_capacity(n + 1);
        lefts.push(vec![1.0]);
        for t in &self.tensors {
            let e = transfer_left(lefts.last().unwrap(), t, t, None);
            lefts.push(e);
        }
        let norm2 = lefts[n][0];
        let mut rights = vec![vec![1.0]; n + 1];
        for i in (0..n).rev() {
            rights[i] = transfer_right(&rights[i + 1], &self.tensors[i], &self.tensors[i], None);
        }
        (0..n)
            .map(|i| {
                let t = &self.tensors[i];
                let e = transfer_left(&lefts[i], t, t, Some(op));
                crate::linalg::dot(&e, &rights[i + 1]) / norm2
            })
            .collect()
    }

    pub fn total_sz(&self) -> f64 {
        self.local_expectations(&crate::model::spin::SZ).iter().sum()
    }
}

fn center_range(c: usize, n: usize) -> Error {
    Error::OutOfRange {
        what: "center",
        value: c as i64,
        min: 0,
        max: n as i64 - 1,
    }
}

/// `E'[a',b'] = Σ A[a,s,a'] op[s,t] E[a,b] B[b,t,b']`
fn transfer_left(e: &[f64], a: &SiteTensor, b: &SiteTensor, op: Option<&[f64; 4]>) -> Vec<f64> {
    let t = matmul_new(e, (a.left, b.left), false, &b.data, b.right_grouped(), false);
    let t = match op {
        None => t,
        Some(op) => {
            let mut out = vec![0.0; t.len()];
            let blk = b.right;
            for row in 0..a.left {
                for so in 0..PHYS_DIM {
                    for si in 0..PHYS_DIM {
                        let c = op[so * PHYS_DIM + si];
                        if c == 0.0 {
                            continue;
                        }
                        let src = &t[(row * PHYS_DIM + si) * blk..][..blk];
                        let dst = &mut out[(row * PHYS_DIM + so) * blk..][..blk];
                        crate::linalg::axpy(c, src, dst);
                    }
                }
            }
            out
        }
    };
    matmul_new(&a.data, a.left_grouped(), true, &t, (a.left * PHYS_DIM, b.right), false)
}

/// `F[a,b] = Σ A[a,s,a'] B[b,s,b'] F'[a',b']`
fn transfer_right(f: &[f64], a: &SiteTensor, b: &SiteTensor, _op: Option<&[f64; 4]>) -> Vec<f64> {
    let x = matmul_new(&a.data, a.left_grouped(), false, f, (a.right, b.right), false);
    let mut out = vec![0.0; a.left * b.left];
    gemm(&mut out, &x, (a.left, PHYS_DIM * b.right), false, &b.data, b.right_grouped(), true, false);
    out
}

/// Signed `⟨a|b⟩` by left-to-right transfer contraction.
pub fn inner(a: &MatrixProductState, b: &MatrixProductState) -> Result<f64> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: a.n_sites(),
            found: b.n_sites(),
        });
    }
    let mut e = vec![1.0];
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        e = transfer_left(&e, ta, tb, None);
    }
    Ok(e[0])
}

/// `|⟨a|b⟩|`, exact for the given tensors.
pub fn overlap(a: &MatrixProductState, b: &MatrixProductState) -> Result<f64> {
    inner(a, b).map(f64::abs)
}

pub fn mps_to_dense(state: &MatrixProductState) -> Result<Vec<f64>> {
    state.to_dense()
}

pub fn canonicalize(state: &MatrixProductState, center: usize) -> Result<MatrixProductState> {
    state.canonicalize(center)
}

pub fn schmidt_spectrum(state: &MatrixProductState, cut_bond: usize) -> Result<SchmidtSpectrum> {
    state.schmidt_spectrum(cut_bond)
}

pub fn truncate_bond(
    state: &MatrixProductState,
    bond: usize,
    max_kept: usize,
    degeneracy_tol: f64,
) -> Result<(MatrixProductState, TruncationRecord)> {
    state.truncate_bond(bond, max_kept, degeneracy_tol)
}
