//! Finite-system two-site DMRG over the chain MPO.
//!
//! The state starts from a Néel product (or a caller-provided warm start)
//! right-canonicalized onto site 0. Each sweep optimizes every bond left to
//! right and then right to left; the two-site tensor is the lowest
//! eigenvector of the effective Hamiltonian, found by Lanczos started from
//! the current tensor, and is split by a truncated SVD.
//!
//! Environments store one `D × D` block per MPO bond index, indexed
//! `[bra][ket]`. The MPO is applied through its nonzero 2×2 blocks only.

use crate::lanczos::{lowest_eigenpair, LanczosOptions};
use crate::linalg::{axpy, gemm, norm};
use crate::model::{build_mpo, ModelParams, MpoTensor, PHYS_DIM};
use crate::mps::{
    contract_pair, neel_mps, split_two_site, Absorb, MatrixProductState, SiteTensor,
    TruncationRecord, DEFAULT_DEGENERACY_TOL,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DmrgConfig {
    pub max_kept_m: usize,
    pub n_sweeps_max: usize,
    pub energy_tol: f64,
    pub local_solver_tol: f64,
    pub local_max_iter: usize,
    pub degeneracy_tol: f64,
    pub seed: u64,
    pub warm_start: Option<MatrixProductState>,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            max_kept_m: 128,
            n_sweeps_max: 20,
            energy_tol: 1e-10,
            local_solver_tol: 1e-11,
            local_max_iter: 200,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            seed: 12345,
            warm_start: None,
        }
    }
}

impl DmrgConfig {
    /// Settings for fidelity runs (m = 128).
    pub fn for_fidelity() -> Self {
        Self::default()
    }

    /// Settings for entropy runs (m = 64).
    pub fn for_entropy() -> Self {
        Self {
            max_kept_m: 64,
            ..Self::default()
        }
    }

    pub fn with_m(self, max_kept_m: usize) -> Self {
        Self { max_kept_m, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_kept_m < 2 {
            return Err(Error::InvalidConfig("max_kept_m must be at least 2".into()));
        }
        if !(self.energy_tol > 0.0) {
            return Err(Error::InvalidConfig("energy_tol must be positive".into()));
        }
        if !(self.local_solver_tol > 0.0) {
            return Err(Error::InvalidConfig("local_solver_tol must be positive".into()));
        }
        if self.n_sweeps_max < 2 {
            return Err(Error::InvalidConfig("n_sweeps_max must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepDiagnostics {
    pub sweep: usize,
    pub energy: f64,
    pub max_discarded_weight: f64,
    pub max_bond_dim: usize,
    pub local_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub energy: f64,
    /// Normalized, canonical with center on site 0.
    pub state: MatrixProductState,
    /// Largest discarded weight of the final sweep.
    pub max_discarded_weight: f64,
    pub sweep_energies: Vec<f64>,
    pub converged: bool,
    pub diagnostics: Vec<SweepDiagnostics>,
    /// Truncations of the final sweep.
    pub truncations: Vec<TruncationRecord>,
    pub total_sz: f64,
}

/// MPO site as its list of nonzero `(wl, wr, op)` blocks.
#[derive(Debug, Clone)]
pub struct MpoSite {
    pub left_dim: usize,
    pub right_dim: usize,
    pub terms: Vec<(usize, usize, [f64; 4])>,
}

impl From<&MpoTensor> for MpoSite {
    fn from(t: &MpoTensor) -> Self {
        Self {
            left_dim: t.left_dim,
            right_dim: t.right_dim,
            terms: t.nonzero_blocks(),
        }
    }
}

/// Contracted operator block `E_w[bra][ket]` for every MPO bond index `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub dim: usize,
    pub blocks: Vec<Option<Vec<f64>>>,
}

impl Environment {
    /// Trivial boundary with MPO bond dimension 1.
    pub fn boundary() -> Self {
        Self {
            dim: 1,
            blocks: vec![Some(vec![1.0])],
        }
    }

    /// Adds site tensor `a` to a left environment.
    pub fn extend_left(&self, a: &SiteTensor, w: &MpoSite) -> Self {
        debug_assert_eq!(self.dim, a.left);
        let (dl, dr) = (a.left, a.right);
        let row = PHYS_DIM * dr;
        let mut xs: Vec<Option<Vec<f64>>> = vec![None; w.left_dim];
        for &(wl, _, _) in &w.terms {
            if xs[wl].is_none() {
                if let Some(l) = &self.blocks[wl] {
                    let mut x = vec![0.0; dl * row];
                    gemm(&mut x, l, (dl, dl), false, &a.data, (dl, row), false, false);
                    xs[wl] = Some(x);
                }
            }
        }
        let mut ys: Vec<Option<Vec<f64>>> = vec![None; w.right_dim];
        for (wl, wr, op) in &w.terms {
            let Some(x) = &xs[*wl] else { continue };
            let y = ys[*wr].get_or_insert_with(|| vec![0.0; dl * row]);
            apply_site_op(op, x, y, dl, dr);
        }
        let blocks = ys
            .into_iter()
            .map(|y| {
                y.map(|y| {
                    let mut out = vec![0.0; dr * dr];
                    gemm(&mut out, &a.data, (dl * PHYS_DIM, dr), true, &y, (dl * PHYS_DIM, dr), false, false);
                    out
                })
            })
            .collect();
        Self { dim: dr, blocks }
    }

    /// Adds site tensor `a` to a right environment.
    pub fn extend_right(&self, a: &SiteTensor, w: &MpoSite) -> Self {
        debug_assert_eq!(self.dim, a.right);
        let (dl, dr) = (a.left, a.right);
        let mut xs: Vec<Option<Vec<f64>>> = vec![None; w.right_dim];
        for &(_, wr, _) in &w.terms {
            if xs[wr].is_none() {
                if let Some(r) = &self.blocks[wr] {
                    let mut x = vec![0.0; dl * PHYS_DIM * dr];
                    gemm(&mut x, &a.data, (dl * PHYS_DIM, dr), false, r, (dr, dr), true, false);
                    xs[wr] = Some(x);
                }
            }
        }
        let mut ys: Vec<Option<Vec<f64>>> = vec![None; w.left_dim];
        for (wl, wr, op) in &w.terms {
            let Some(x) = &xs[*wr] else { continue };
            let y = ys[*wl].get_or_insert_with(|| vec![0.0; dl * PHYS_DIM * dr]);
            apply_site_op(op, x, y, dl, dr);
        }
        let blocks = ys
            .into_iter()
            .map(|y| {
                y.map(|y| {
                    let mut out = vec![0.0; dl * dl];
                    gemm(&mut out, &a.data, (dl, PHYS_DIM * dr), false, &y, (dl, PHYS_DIM * dr), true, false);
                    out
                })
            })
            .collect();
        Self { dim: dl, blocks }
    }
}

/// `y[a, s', tail] += op[s', s] x[a, s, tail]` with `tail` of length `chunk`.
#[inline]
fn apply_site_op(op: &[f64; 4], x: &[f64], y: &mut [f64], outer: usize, chunk: usize) {
    for a in 0..outer {
        for so in 0..PHYS_DIM {
            for si in 0..PHYS_DIM {
                let c = op[so * PHYS_DIM + si];
                if c == 0.0 {
                    continue;
                }
                let src = &x[(a * PHYS_DIM + si) * chunk..][..chunk];
                let dst = &mut y[(a * PHYS_DIM + so) * chunk..][..chunk];
                axpy(c, src, dst);
            }
        }
    }
}

/// Matrix-free effective Hamiltonian of a two-site block `θ[l, s1, s2, r]`.
pub struct EffectiveHamiltonian<'a> {
    pub left: &'a Environment,
    pub site1: &'a MpoSite,
    pub site2: &'a MpoSite,
    pub right: &'a Environment,
}

/// Reusable buffers for [`EffectiveHamiltonian::apply`].
#[derive(Default)]
pub struct Scratch {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

fn take_buffers(pool: &mut Vec<Vec<f64>>, count: usize, len: usize) {
    pool.resize_with(count, Vec::new);
    for b in pool.iter_mut() {
        b.clear();
        b.resize(len, 0.0);
    }
}

impl EffectiveHamiltonian<'_> {
    pub fn dims(&self) -> (usize, usize) {
        (self.left.dim, self.right.dim)
    }

    pub fn len(&self) -> usize {
        self.left.dim * PHYS_DIM * PHYS_DIM * self.right.dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64], scratch: &mut Scratch) {
        let (dl, dr) = self.dims();
        let len = self.len();
        let w1 = self.site1;
        let w2 = self.site2;
        let mut used_l = vec![false; w1.left_dim];
        let mut used_m = vec![false; w1.right_dim];
        let mut used_r = vec![false; w2.right_dim];
        for (wl, wm, _) in &w1.terms {
            if self.left.blocks[*wl].is_some() {
                used_l[*wl] = true;
                used_m[*wm] = true;
            }
        }
        let mut live_m = vec![false; w1.right_dim];
        for (wm, wr, _) in &w2.terms {
            if used_m[*wm] && self.right.blocks[*wr].is_some() {
                used_r[*wr] = true;
                live_m[*wm] = true;
            }
        }
        take_buffers(&mut scratch.x, w1.left_dim, 0);
        take_buffers(&mut scratch.y, w1.right_dim, 0);
        take_buffers(&mut scratch.z, w2.right_dim, 0);

        let row = PHYS_DIM * PHYS_DIM * dr;
        for wl in 0..w1.left_dim {
            if !used_l[wl] {
                continue;
            }
            let l = self.left.blocks[wl].as_ref().unwrap();
            let buf = &mut scratch.x[wl];
            buf.resize(len, 0.0);
            gemm(buf, l, (dl, dl), false, x, (dl, row), false, false);
        }
        for (wl, wm, op) in &w1.terms {
            if !used_l[*wl] || !live_m[*wm] {
                continue;
            }
            let y = &mut scratch.y[*wm];
            if y.is_empty() {
                y.resize(len, 0.0);
            }
            apply_site_op(op, &scratch.x[*wl], y, dl, PHYS_DIM * dr);
        }
        for (wm, wr, op) in &w2.terms {
            if !live_m[*wm] || !used_r[*wr] {
                continue;
            }
            let z = &mut scratch.z[*wr];
            if z.is_empty() {
                z.resize(len, 0.0);
            }
            apply_site_op(op, &scratch.y[*wm], z, dl * PHYS_DIM, dr);
        }
        let mut first = true;
        for wr in 0..w2.right_dim {
            if !used_r[wr] || scratch.z[wr].is_empty() {
                continue;
            }
            let r = self.right.blocks[wr].as_ref().unwrap();
            gemm(out, &scratch.z[wr], (dl * PHYS_DIM * PHYS_DIM, dr), false, r, (dr, dr), true, !first);
            first = false;
        }
        if first {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub energy: f64,
    /// Unit-norm optimized two-site tensor.
    pub tensor: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Lowest eigenpair of the effective two-site problem, Lanczos started from
/// `theta` (or from a seeded random tensor when `theta` vanishes).
pub fn solve_effective(
    theta: &[f64],
    heff: &EffectiveHamiltonian<'_>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<LocalSolution> {
    if theta.len() != heff.len() {
        return Err(Error::DimensionMismatch {
            expected: heff.len(),
            found: theta.len(),
        });
    }
    let start = if norm(theta) > 0.0 {
        theta.to_vec()
    } else {
        crate::exact::random_start(theta.len(), seed)
    };
    let mut scratch = Scratch::default();
    let opts = LanczosOptions {
        tol,
        max_iter,
        krylov_dim: 40,
    };
    let pair = lowest_eigenpair(|x, y| heff.apply(x, y, &mut scratch), &start, opts)?;
    Ok(LocalSolution {
        energy: pair.value,
        tensor: pair.vector,
        iterations: pair.iterations,
        residual: pair.residual,
        converged: pair.converged,
    })
}

struct Sweeper {
    mpo: Vec<MpoSite>,
    state: MatrixProductState,
    lefts: Vec<Option<Environment>>,
    rights: Vec<Option<Environment>>,
}

impl Sweeper {
    fn new(mpo: Vec<MpoSite>, mut state: MatrixProductState) -> Result<Self> {
        let n = state.n_sites();
        // Always re-gauge from scratch so a state restored from a checkpoint
        // (which does not record its center) sweeps bit-identically.
        state.set_center(None);
        state.move_center(0)?;
        let nrm = state.norm();
        if !(nrm > 0.0) {
            return Err(Error::InvalidParams("warm start has zero norm".into()));
        }
        state.tensors_mut()[0].data.iter_mut().for_each(|x| *x /= nrm);
        let mut lefts = vec![None; n + 1];
        let mut rights = vec![None; n + 1];
        lefts[0] = Some(Environment::boundary());
        rights[n] = Some(Environment::boundary());
        for i in (1..n).rev() {
            let env = rights[i + 1].as_ref().unwrap().extend_right(&state.tensors()[i], &mpo[i]);
            rights[i] = Some(env);
        }
        Ok(Self {
            mpo,
            state,
            lefts,
            rights,
        })
    }

    fn optimize_bond(
        &mut self,
        i: usize,
        config: &DmrgConfig,
        absorb: Absorb,
    ) -> Result<(f64, TruncationRecord, usize)> {
        let (a, b) = (&self.state.tensors()[i], &self.state.tensors()[i + 1]);
        let (dl, dr) = (a.left, b.right);
        let theta = contract_pair(a, b);
        let heff = EffectiveHamiltonian {
            left: self.lefts[i].as_ref().unwrap(),
            site1: &self.mpo[i],
            site2: &self.mpo[i + 1],
            right: self.rights[i + 2].as_ref().unwrap(),
        };
        let sol = solve_effective(
            &theta,
            &heff,
            config.local_solver_tol,
            config.local_max_iter,
            config.seed.wrapping_add(i as u64),
        )?;
        if !sol.converged {
            log::debug!(
                "local solve at bond {} not converged (residual {:.3e})",
                i + 1,
                sol.residual
            );
        }
        let split = split_two_site(
            &sol.tensor,
            dl,
            dr,
            i + 1,
            config.max_kept_m,
            config.degeneracy_tol,
            absorb,
        )?;
        let tensors = self.state.tensors_mut();
        tensors[i] = split.left;
        tensors[i + 1] = split.right;
        match absorb {
            Absorb::Right => {
                let env = self.lefts[i]
                    .as_ref()
                    .unwrap()
                    .extend_left(&self.state.tensors()[i], &self.mpo[i]);
                self.lefts[i + 1] = Some(env);
                self.state.set_center(Some(i + 1));
            }
            Absorb::Left => {
                let env = self.rights[i + 2]
                    .as_ref()
                    .unwrap()
                    .extend_right(&self.state.tensors()[i + 1], &self.mpo[i + 1]);
                self.rights[i + 1] = Some(env);
                self.state.set_center(Some(i));
            }
        }
        Ok((sol.energy, split.record, sol.iterations))
    }
}

/// Ground state of `params` by two-site DMRG.
///
/// `converged` is true once two consecutive full sweeps agree in energy to
/// `energy_tol`; otherwise the full trace is returned with `converged = false`.
pub fn run_dmrg(params: &ModelParams, config: &DmrgConfig) -> Result<GroundStateResult> {
    params.validate()?;
    config.validate()?;
    let n = params.n_sites;
    let mpo: Vec<MpoSite> = build_mpo(params)?.site_tensors.iter().map(MpoSite::from).collect();
    let initial = match &config.warm_start {
        Some(ws) => {
            if ws.n_sites() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: ws.n_sites(),
                });
            }
            ws.clone()
        }
        None => neel_mps(n)?,
    };
    let mut sw = Sweeper::new(mpo, initial)?;

    let mut sweep_energies = Vec::new();
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut last_records = Vec::new();
    for sweep in 1..=config.n_sweeps_max {
        let mut records = Vec::with_capacity(2 * (n - 1));
        let mut energy = f64::NAN;
        let mut iterations = 0;
        for i in 0..n - 1 {
            let (e, rec, it) = sw.optimize_bond(i, config, Absorb::Right)?;
            energy = e;
            iterations += it;
            records.push(rec);
        }
        for i in (0..n - 1).rev() {
            let (e, rec, it) = sw.optimize_bond(i, config, Absorb::Left)?;
            energy = e;
            iterations += it;
            records.push(rec);
        }
        let max_dw = records.iter().map(|r| r.discarded_weight).fold(0.0, f64::max);
        let diag = SweepDiagnostics {
            sweep,
            energy,
            max_discarded_weight: max_dw,
            max_bond_dim: sw.state.max_bond_dim(),
            local_iterations: iterations,
        };
        log::info!(
            target: "spinchain::dmrg",
            "n_sites={} delta_f={} sweep={} energy={:.15e} max_discarded_weight={:.3e} max_bond_dim={} lanczos_iterations={}",
            n, params.delta_f, sweep, energy, max_dw, diag.max_bond_dim, iterations
        );
        diagnostics.push(diag);
        let previous = sweep_energies.last().copied();
        sweep_energies.push(energy);
        last_records = records;
        if let Some(prev) = previous {
            if (energy - prev).abs() < config.energy_tol {
                converged = true;
                break;
            }
        }
    }

    let state = sw.state;
    let total_sz = state.total_sz();
    if total_sz.abs() > 1e-6 {
        log::warn!("DMRG state left the Sz = 0 sector: <Sz_total> = {total_sz:.3e}");
    }
    let max_discarded_weight = last_records
        .iter()
        .map(|r| r.discarded_weight)
        .fold(0.0, f64::max);
    Ok(GroundStateResult {
        energy: *sweep_energies.last().unwrap(),
        state,
        max_discarded_weight,
        sweep_energies,
        converged,
        diagnostics,
        truncations: last_records,
        total_sz,
    })
}

/// Re-solves at `new_delta_f`, warm-started from `previous.state` so that
/// both states sit on the same branch.
pub fn continue_in_delta(
    params: &ModelParams,
    previous: &GroundStateResult,
    new_delta_f: f64,
    config: &DmrgConfig,
) -> Result<GroundStateResult> {
    if previous.state.n_sites() != params.n_sites {
        return Err(Error::DimensionMismatch {
            expected: params.n_sites,
            found: previous.state.n_sites(),
        });
    }
    let config = DmrgConfig {
        warm_start: Some(previous.state.clone()),
        ..config.clone()
    };
    run_dmrg(&params.with_delta_f(new_delta_f), &config)
}
