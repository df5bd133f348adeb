//! Sweeps of the ferromagnetic-bond anisotropy `delta_f` at fixed chain
//! length, peak location, and the linear `1/N` extrapolation of peak
//! positions.
//!
//! Along the grid every ground state is warm-started from the previous one,
//! and the partner state at `λ + δ` is warm-started from the state at `λ`,
//! so each fidelity compares two states on the same branch.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::dmrg::{run_dmrg, DmrgConfig, GroundStateResult};
use crate::exact::{self, SectorBasis};
use crate::model::ModelParams;
use crate::mps::MatrixProductState;
use crate::observables::{
    default_block_length, entanglement_entropy, fidelity, fidelity_susceptibility, GroundState,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    FidelitySusceptibility,
    Entropy,
    Both,
}

impl Observable {
    pub fn wants_fidelity(self) -> bool {
        matches!(self, Observable::FidelitySusceptibility | Observable::Both)
    }

    pub fn wants_entropy(self) -> bool {
        matches!(self, Observable::Entropy | Observable::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Exact,
    Dmrg,
}

/// Largest chain the exact backend is used for by automatic selection.
pub const AUTO_EXACT_MAX_SITES: usize = 16;

/// `start, start + step, …` up to `stop` inclusive (rounded to 1e-9 so grid
/// values print cleanly).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return vec![start];
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| ((start + step * i as f64) * 1e9).round() / 1e9)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Chain length and couplings; `delta_f` is overridden along the grid.
    pub model: ModelParams,
    pub delta_f_grid: Vec<f64>,
    pub delta_step: f64,
    pub observable: Observable,
    pub backend: Backend,
    pub dmrg: DmrgConfig,
    pub refine: bool,
    pub refine_width: f64,
    pub refine_points: usize,
    /// Right-hand block size; defaults to `N/2 − 1`.
    pub entropy_l: Option<usize>,
    /// Accept entropy cuts that fall on a ferromagnetic bond.
    pub allow_f_bond_cut: bool,
    /// Diagnostic only: solve the `λ + δ` partner from scratch.
    pub cold_start_pairing: bool,
}

impl ScanConfig {
    /// Grid `[1.6, 3.0]` step 0.05, `δ = 0.001`, refinement of 21 points
    /// over a width of 0.2, DMRG m = 128 (fidelity) or 64 (entropy only).
    pub fn new(model: ModelParams, backend: Backend, observable: Observable) -> Self {
        let dmrg = match observable {
            Observable::Entropy => DmrgConfig::for_entropy(),
            _ => DmrgConfig::for_fidelity(),
        };
        Self {
            model,
            delta_f_grid: uniform_grid(1.6, 3.0, 0.05),
            delta_step: 0.001,
            observable,
            backend,
            dmrg,
            refine: true,
            refine_width: 0.2,
            refine_points: 21,
            entropy_l: None,
            allow_f_bond_cut: false,
            cold_start_pairing: false,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.model.n_sites
    }

    pub fn block_length(&self) -> usize {
        self.entropy_l.unwrap_or_else(|| default_block_length(self.n_sites()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let g = &self.delta_f_grid;
        if g.len() < 3 {
            return Err(Error::InvalidConfig("delta_f grid needs at least 3 points".into()));
        }
        if !g.windows(2).all(|w| w[0] < w[1]) || !g.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidConfig("delta_f grid must be strictly ascending".into()));
        }
        if !(self.delta_step > 0.0) {
            return Err(Error::InvalidConfig("delta_step must be positive".into()));
        }
        if self.refine && (self.refine_points < 5 || !(self.refine_width > 0.0)) {
            return Err(Error::InvalidConfig(
                "refinement needs at least 5 points and a positive width".into(),
            ));
        }
        if self.backend == Backend::Dmrg {
            self.dmrg.validate()?;
        }
        if self.observable.wants_entropy() {
            let n = self.n_sites();
            let l = self.block_length();
            if l < 1 || l >= n {
                return Err(Error::InvalidConfig(format!("entropy block {l} invalid for N = {n}")));
            }
            // The cut sits after site N − L; it crosses an AF bond iff N − L is odd.
            if (n - l) % 2 == 0 && !self.allow_f_bond_cut {
                return Err(Error::InvalidConfig(format!(
                    "entropy cut after site {} crosses a ferromagnetic bond (N = {n}, L = {l}); \
                     use N divisible by 4 or allow_f_bond_cut",
                    n - l
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSample {
    pub delta_f: f64,
    pub energy: f64,
    pub fidelity: Option<f64>,
    pub susceptibility: Option<f64>,
    pub entropy_bits: Option<f64>,
    pub max_discarded_weight: f64,
    pub converged: bool,
    /// Produced by the refinement pass.
    pub refined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub location: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub config: ScanConfig,
    /// Ordered by `delta_f`.
    pub samples: Vec<ScanSample>,
    pub susceptibility_peak: Option<Peak>,
    pub entropy_peak: Option<Peak>,
}

impl ScanResult {
    /// Peak of the scan's primary observable (the susceptibility unless the
    /// scan is entropy-only).
    pub fn peak(&self) -> Option<Peak> {
        match self.config.observable {
            Observable::Entropy => self.entropy_peak,
            _ => self.susceptibility_peak,
        }
    }

    pub fn peak_location(&self) -> Option<f64> {
        self.peak().map(|p| p.location)
    }

    pub fn peak_value(&self) -> Option<f64> {
        self.peak().map(|p| p.value)
    }
}

/// Coarse argmax followed by a least-squares parabola through the five
/// samples nearest to it. A maximum on the first or last sample is an error.
///
/// If the parabola is not concave or its vertex leaves the fitted window, the
/// coarse argmax is returned unchanged.
pub fn locate_peak(points: &[(f64, f64)]) -> Result<Peak> {
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1.is_finite()).collect();
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(format!(
            "peak location needs at least 3 valid samples, got {}",
            pts.len()
        )));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (imax, &(x0, y0)) = pts
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &(f64, f64))>, (i, p)| match best {
            Some((_, b)) if b.1 >= p.1 => best,
            _ => Some((i, p)),
        })
        .unwrap();
    if imax == 0 || imax == pts.len() - 1 {
        return Err(Error::BoundaryPeak { location: x0 });
    }
    let mut near: Vec<(f64, f64)> = pts.clone();
    near.sort_by(|a, b| (a.0 - x0).abs().total_cmp(&(b.0 - x0).abs()).then(a.0.total_cmp(&b.0)));
    near.truncate(5);
    let Some((a, b, c)) = fit_parabola(&near, x0) else {
        return Ok(Peak {
            location: x0,
            value: y0,
        });
    };
    let lo = near.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = near.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if c < 0.0 {
        let t = -b / (2.0 * c);
        let x = x0 + t;
        if x >= lo && x <= hi {
            return Ok(Peak {
                location: x,
                value: a + b * t + c * t * t,
            });
        }
    }
    Ok(Peak {
        location: x0,
        value: y0,
    })
}

/// Least-squares `y ≈ a + b t + c t²` with `t = x − x0`.
fn fit_parabola(points: &[(f64, f64)], x0: f64) -> Option<(f64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    // Normal equations on centred, scaled abscissae.
    let h = points.iter().map(|p| (p.0 - x0).abs()).fold(0.0, f64::max).max(1e-300);
    let mut s = [0.0f64; 5];
    let mut r = [0.0f64; 3];
    for &(x, y) in points {
        let t = (x - x0) / h;
        let mut tp = 1.0;
        for k in 0..5 {
            s[k] += tp;
            if k < 3 {
                r[k] += tp * y;
            }
            tp *= t;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let sol = solve3(m, r)?;
    Some((sol[0], sol[1] / h, sol[2] / (h * h)))
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let acc: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (r[row] - acc) / m[row][row];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    /// `(1/N, delta_f_max)` after merging duplicate sizes.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    /// Extrapolation to `1/N = 0`.
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
}

/// Ordinary least squares of peak positions against `1/N`. Repeated sizes
/// are averaged first.
pub fn finite_size_fit(points: &[(usize, f64)]) -> Result<ScalingFit> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.iter().any(|&n| n == 0) {
        return Err(Error::InvalidParams("chain length 0 in fit input".into()));
    }
    if sizes.len() < 2 {
        return Err(Error::TooFewPoints(format!(
            "finite-size fit needs at least 2 distinct sizes, got {}",
            sizes.len()
        )));
    }
    let merged: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| {
            let ys: Vec<f64> = points.iter().filter(|p| p.0 == n).map(|p| p.1).collect();
            (1.0 / n as f64, ys.iter().sum::<f64>() / ys.len() as f64)
        })
        .collect();
    let k = merged.len() as f64;
    let mx = merged.iter().map(|p| p.0).sum::<f64>() / k;
    let my = merged.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = merged.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = merged.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = merged.iter().map(|p| p.1 - (intercept + slope * p.0)).collect();
    let rms_residual = (residuals.iter().map(|r| r * r).sum::<f64>() / k).sqrt();
    Ok(ScalingFit {
        points: merged,
        slope,
        intercept,
        residuals,
        rms_residual,
    })
}

/// Snapshot handed to the progress callback after every completed point.
pub struct ScanProgress<'a> {
    pub config: &'a ScanConfig,
    /// Everything computed so far, in computation order.
    pub samples: &'a [ScanSample],
    /// Warm start for the next point (DMRG only).
    pub next_warm_start: Option<&'a MatrixProductState>,
}

/// Previously completed work to continue from.
#[derive(Debug, Clone, Default)]
pub struct Resume {
    /// Samples in computation order (coarse first, then refinement).
    pub samples: Vec<ScanSample>,
    pub warm_start: Option<MatrixProductState>,
}

pub fn scan_delta_f(config: &ScanConfig) -> Result<ScanResult> {
    scan_delta_f_with(config, None, |_| Ok(()))
}

struct Solver<'a> {
    config: &'a ScanConfig,
    basis: Option<Arc<SectorBasis>>,
}

impl Solver<'_> {
    fn ground(&self, delta_f: f64, warm: Option<&GroundState>) -> Result<GroundState> {
        let params = self.config.model.with_delta_f(delta_f);
        match self.config.backend {
            Backend::Exact => {
                let basis = self.basis.clone().unwrap();
                let gs = match warm.and_then(GroundState::dense) {
                    Some(prev) => exact::ground_state_lanczos_from(
                        &params,
                        basis,
                        &prev.amplitudes,
                        exact::DEFAULT_TOL,
                        exact::DEFAULT_MAX_ITER,
                    )?,
                    None => exact::ground_state_lanczos(
                        &params,
                        basis,
                        exact::DEFAULT_TOL,
                        exact::DEFAULT_MAX_ITER,
                        exact::DEFAULT_SEED,
                    )?,
                };
                Ok(GroundState::from_exact(params, gs))
            }
            Backend::Dmrg => {
                let cfg = DmrgConfig {
                    warm_start: warm.and_then(GroundState::mps).cloned(),
                    ..self.config.dmrg.clone()
                };
                let r: GroundStateResult = run_dmrg(&params, &cfg)?;
                Ok(GroundState::from_dmrg(params, r))
            }
        }
    }

    fn sample(&self, delta_f: f64, warm: Option<&GroundState>, refined: bool) -> Result<(ScanSample, GroundState)> {
        let cfg = self.config;
        let gs = self.ground(delta_f, warm)?;
        let mut s = ScanSample {
            delta_f,
            energy: gs.energy,
            fidelity: None,
            susceptibility: None,
            entropy_bits: None,
            max_discarded_weight: gs.max_discarded_weight,
            converged: gs.converged,
            refined,
        };
        if cfg.observable.wants_fidelity() {
            let partner_warm = if cfg.cold_start_pairing { None } else { Some(&gs) };
            let partner = self.ground(delta_f + cfg.delta_step, partner_warm)?;
            let f = fidelity(&gs, &partner)?;
            s.fidelity = Some(f);
            s.susceptibility = Some(fidelity_susceptibility(f, cfg.n_sites(), cfg.delta_step)?);
            s.max_discarded_weight = s.max_discarded_weight.max(partner.max_discarded_weight);
            s.converged &= partner.converged;
        }
        if cfg.observable.wants_entropy() {
            s.entropy_bits = Some(entanglement_entropy(&gs, cfg.block_length())?.entropy_bits);
        }
        log::info!(
            target: "spinchain::scan",
            "n_sites={} delta_f={} energy={:.15e} susceptibility={:?} entropy_bits={:?} max_discarded_weight={:.3e} converged={}",
            cfg.n_sites(), delta_f, s.energy, s.susceptibility, s.entropy_bits, s.max_discarded_weight, s.converged
        );
        Ok((s, gs))
    }
}

fn warm_of(gs: &Option<GroundState>) -> Option<&MatrixProductState> {
    gs.as_ref().and_then(GroundState::mps)
}

fn restore(config: &ScanConfig, mps: Option<MatrixProductState>) -> Option<GroundState> {
    let mps = mps?;
    Some(GroundState {
        params: config.model,
        energy: f64::NAN,
        repr: crate::observables::Representation::Mps(mps),
        converged: true,
        max_discarded_weight: 0.0,
    })
}

fn primary_series(config: &ScanConfig, samples: &[ScanSample]) -> Vec<(f64, f64)> {
    samples
        .iter()
        .filter(|s| s.converged)
        .filter_map(|s| {
            let y = match config.observable {
                Observable::Entropy => s.entropy_bits,
                _ => s.susceptibility,
            };
            y.map(|y| (s.delta_f, y))
        })
        .collect()
}

fn coarse_argmax(config: &ScanConfig, samples: &[ScanSample]) -> Result<usize> {
    let series = primary_series(config, samples);
    let (x, _) = series
        .iter()
        .copied()
        .fold(None, |b: Option<(f64, f64)>, p| match b {
            Some(q) if q.1 >= p.1 => Some(q),
            _ => Some(p),
        })
        .ok_or_else(|| Error::TooFewPoints("no converged samples".into()))?;
    let first = series.first().unwrap().0;
    let last = series.last().unwrap().0;
    if x == first || x == last {
        return Err(Error::BoundaryPeak { location: x });
    }
    Ok(config.delta_f_grid.iter().position(|g| *g == x).unwrap())
}

/// Points of the refinement pass, centred on `center`.
pub fn refinement_grid(config: &ScanConfig, center: f64) -> Vec<f64> {
    let half = config.refine_width / 2.0;
    let n = config.refine_points.max(2);
    (0..n)
        .map(|i| {
            let x = center - half + config.refine_width * i as f64 / (n - 1) as f64;
            (x * 1e9).round() / 1e9
        })
        .collect()
}

/// Full scan with optional resume data and a progress callback that fires
/// after every completed point (used for checkpointing).
pub fn scan_delta_f_with<F>(config: &ScanConfig, resume: Option<Resume>, mut on_point: F) -> Result<ScanResult>
where
    F: FnMut(&ScanProgress<'_>) -> Result<()>,
{
    config.validate()?;
    let basis = match config.backend {
        Backend::Exact => Some(Arc::new(exact::sector_basis(config.n_sites(), 0.0)?)),
        Backend::Dmrg => None,
    };
    let solver = Solver { config, basis };
    let grid = &config.delta_f_grid;
    let total_planned = grid.len() + if config.refine { config.refine_points } else { 0 };
    let flag_limit = total_planned / 5;

    let resume = resume.unwrap_or_default();
    let mut samples = resume.samples;
    let coarse_done = samples.iter().filter(|s| !s.refined).count().min(grid.len());
    let mut chain = restore(config, resume.warm_start);

    let check_flags = |samples: &[ScanSample]| -> Result<()> {
        let flagged = samples.iter().filter(|s| !s.converged).count();
        if flagged > flag_limit {
            return Err(Error::ScanAborted {
                flagged,
                total: total_planned,
            });
        }
        Ok(())
    };

    for &x in grid.iter().skip(coarse_done) {
        let (s, gs) = solver.sample(x, chain.as_ref(), false)?;
        samples.push(s);
        check_flags(&samples)?;
        chain = Some(gs);
        on_point(&ScanProgress {
            config,
            samples: &samples,
            next_warm_start: warm_of(&chain),
        })?;
    }

    if config.refine {
        let coarse: Vec<ScanSample> = samples.iter().filter(|s| !s.refined).cloned().collect();
        let k = coarse_argmax(config, &coarse)?;
        let rgrid = refinement_grid(config, grid[k]);
        // The refinement chain continues from the last coarse state, which
        // is also what a checkpoint holds, so resumed runs are bit-identical.
        let refined_done = samples.iter().filter(|s| s.refined).count();
        for &x in rgrid.iter().skip(refined_done) {
            let (s, gs) = solver.sample(x, chain.as_ref(), true)?;
            samples.push(s);
            check_flags(&samples)?;
            chain = Some(gs);
            on_point(&ScanProgress {
                config,
                samples: &samples,
                next_warm_start: warm_of(&chain),
            })?;
        }
    }

    finish(config, samples)
}

/// Orders samples and locates the peaks.
pub fn finish(config: &ScanConfig, mut samples: Vec<ScanSample>) -> Result<ScanResult> {
    samples.sort_by(|a, b| a.delta_f.total_cmp(&b.delta_f).then(a.refined.cmp(&b.refined)));
    let series = |f: fn(&ScanSample) -> Option<f64>| -> Vec<(f64, f64)> {
        samples
            .iter()
            .filter(|s| s.converged)
            .filter_map(|s| f(s).map(|y| (s.delta_f, y)))
            .collect()
    };
    let chi = series(|s| s.susceptibility);
    let ent = series(|s| s.entropy_bits);
    let (mut susceptibility_peak, mut entropy_peak) = (None, None);
    match config.observable {
        Observable::FidelitySusceptibility => susceptibility_peak = Some(locate_peak(&chi)?),
        Observable::Entropy => entropy_peak = Some(locate_peak(&ent)?),
        Observable::Both => {
            susceptibility_peak = Some(locate_peak(&chi)?);
            entropy_peak = match locate_peak(&ent) {
                Ok(p) => Some(p),
                Err(e) => {
                    log::warn!("entropy peak not located: {e}");
                    None
                }
            };
        }
    }
    Ok(ScanResult {
        config: config.clone(),
        samples,
        susceptibility_peak,
        entropy_peak,
    })
}

pub const CSV_HEADER: &str =
    "n_sites,delta_f,energy,fidelity,susceptibility,entropy_bits,max_discarded_weight,converged";

/// 17 significant digits; absent values are written as `nan`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    format_float(x.unwrap_or(f64::NAN))
}

/// CSV rendering of a sample list with the fixed column set.
pub fn samples_to_csv(n_sites: usize, samples: &[ScanSample]) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            n_sites,
            format_float(s.delta_f),
            format_float(s.energy),
            opt(s.fidelity),
            opt(s.susceptibility),
            opt(s.entropy_bits),
            format_float(s.max_discarded_weight),
            s.converged
        );
    }
    out
}

pub fn to_csv(result: &ScanResult) -> String {
    samples_to_csv(result.config.n_sites(), &result.samples)
}

/// Parses rows written by [`samples_to_csv`]; the `refined` flag is not
/// part of the CSV and is supplied by the caller's bookkeeping.
pub fn parse_csv_row(line: &str) -> Result<(usize, ScanSample)> {
    let f: Vec<&str> = line.trim().split(',').collect();
    if f.len() != 8 {
        return Err(Error::InvalidConfig(format!("malformed CSV row: {line}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidConfig(format!("bad number {s:?} in CSV row")))
    };
    let optional = |s: &str| -> Result<Option<f64>> {
        let v = num(s)?;
        Ok(if v.is_nan() { None } else { Some(v) })
    };
    let n = f[0]
        .parse::<usize>()
        .map_err(|_| Error::InvalidConfig(format!("bad n_sites in CSV row: {line}")))?;
    Ok((
        n,
        ScanSample {
            delta_f: num(f[1])?,
            energy: num(f[2])?,
            fidelity: optional(f[3])?,
            susceptibility: optional(f[4])?,
            entropy_bits: optional(f[5])?,
            max_discarded_weight: num(f[6])?,
            converged: f[7] == "true",
            refined: false,
        },
    ))
}
