//! Subcommand implementations. Each returns the records it wrote; every file
//! goes through the run's [`Writer`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use spinchain::dmrg::{continue_in_delta, run_dmrg, DmrgConfig};
use spinchain::exact::{self, ground_state_lanczos_from};
use spinchain::model::ModelParams;
use spinchain::mps::checkpoint::{load, write_checkpoint};
use spinchain::mps::MatrixProductState;
use spinchain::observables::{
    default_block_length, entanglement_entropy, entropy_profile as profile, fidelity, GroundState,
};
use spinchain::scan::{
    finite_size_fit, format_float, parse_csv_row, samples_to_csv, scan_delta_f_with,
    to_csv, Backend, Observable, Resume, ScanConfig, ScanResult, ScanSample, CSV_HEADER,
};

use crate::config::RunConfig;
use crate::output::{Summary, Writer, WriterHandle};
use crate::CliError;

/// `--out` wins over `[run] output_dir`; the directory is created if needed.
pub fn output_dir(config: Option<&RunConfig>, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.and_then(|c| c.run.output_dir.clone()))
        .ok_or_else(|| {
            CliError::Usage("no output directory: set [run] output_dir or pass --out".into())
        })?;
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::Usage(format!("cannot create output directory {}: {e}", dir.display()))
    })?;
    Ok(dir)
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Exact => "ed",
        Backend::Dmrg => "dmrg",
    }
}

fn observable_name(o: Observable) -> &'static str {
    match o {
        Observable::FidelitySusceptibility => "susceptibility",
        Observable::Entropy => "entropy",
        Observable::Both => "both",
    }
}

fn checkpoint_bytes(state: &MatrixProductState) -> Result<Vec<u8>, CliError> {
    let mut bytes = Vec::new();
    write_checkpoint(state, &mut bytes)?;
    Ok(bytes)
}

fn solve(
    params: &ModelParams,
    backend: Backend,
    dmrg: &DmrgConfig,
) -> Result<(GroundState, Summary), CliError> {
    params.validate()?;
    let mut summary = Summary::new()
        .text("n_sites", params.n_sites)
        .float("delta_f", params.delta_f)
        .text("backend", backend_name(backend));
    let gs = match backend {
        Backend::Exact => {
            let r = exact::ground_state(params)?;
            summary = summary.float("residual", r.residual).text("iterations", r.iterations);
            GroundState::from_exact(*params, r)
        }
        Backend::Dmrg => {
            let r = run_dmrg(params, dmrg)?;
            summary = summary
                .text("max_kept_m", dmrg.max_kept_m)
                .text("sweeps", r.sweep_energies.len());
            GroundState::from_dmrg(*params, r)
        }
    };
    Ok((gs, summary))
}

/// Single ground state at `[model] delta_f`.
pub fn ground(config: &RunConfig, out: &Path, writer: &WriterHandle) -> Result<Summary, CliError> {
    let n = config.model.n_sites;
    let params = config.model.params(n);
    let backend = config.backend(n);
    let (gs, summary) = solve(&params, backend, &config.dmrg_config(Observable::FidelitySusceptibility))?;
    let l = default_block_length(n);
    let entropy = entanglement_entropy(&gs, l)?.entropy_bits;
    let total_sz = match gs.mps() {
        Some(m) => m.total_sz(),
        None => exact::total_sz(gs.dense().expect("exact state")),
    };
    let summary = summary
        .float("energy", gs.energy)
        .text("converged", gs.converged)
        .float("max_discarded_weight", gs.max_discarded_weight)
        .text("l_sites", l)
        .float("entropy_bits", entropy)
        .float("total_sz", total_sz);
    writer.write(&out.join(format!("ground_N{n}.summary")), summary.render().into_bytes());
    if config.run.checkpoint {
        if let Some(state) = gs.mps() {
            writer.write(&out.join(format!("ground_N{n}.mps")), checkpoint_bytes(state)?);
        }
    }
    if !gs.converged {
        return Err(CliError::Compute(format!("ground state for N = {n} did not converge")));
    }
    Ok(summary)
}

struct ScanFiles {
    csv: PathBuf,
    summary: PathBuf,
    partial: PathBuf,
    checkpoint: PathBuf,
}

impl ScanFiles {
    fn new(out: &Path, n: usize) -> Self {
        Self {
            csv: out.join(format!("scan_N{n}.csv")),
            summary: out.join(format!("scan_N{n}.summary")),
            partial: out.join(format!("scan_N{n}.partial.csv")),
            checkpoint: out.join(format!("scan_N{n}.ckpt")),
        }
    }
}

/// Reads the rows of an interrupted scan. Rows past the coarse grid belong
/// to the refinement pass.
fn read_partial(config: &ScanConfig, path: &Path) -> Result<Vec<ScanSample>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Usage(format!("{} is not a scan CSV", path.display())));
    }
    let grid = &config.delta_f_grid;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let (n, mut s) = parse_csv_row(line)?;
        if n != config.n_sites() || (i < grid.len() && s.delta_f != grid[i]) {
            return Err(CliError::Usage(format!(
                "{} does not match the configured scan (row {})",
                path.display(),
                i + 1
            )));
        }
        s.refined = i >= grid.len();
        samples.push(s);
    }
    Ok(samples)
}

fn resume_state(config: &ScanConfig, files: &ScanFiles) -> Result<Option<Resume>, CliError> {
    if !files.partial.exists() {
        log::info!("no partial scan at {}; starting fresh", files.partial.display());
        return Ok(None);
    }
    let samples = read_partial(config, &files.partial)?;
    let warm_start = if config.backend == Backend::Dmrg && files.checkpoint.exists() {
        Some(load(&files.checkpoint)?)
    } else {
        None
    };
    if warm_start.is_none() && config.backend == Backend::Dmrg && !samples.is_empty() {
        log::warn!("no checkpoint state next to {}; continuing cold", files.partial.display());
    }
    log::info!("resuming N = {} after {} points", config.n_sites(), samples.len());
    Ok(Some(Resume { samples, warm_start }))
}

fn peak_fields(summary: Summary, prefix: &str, peak: Option<spinchain::scan::Peak>) -> Summary {
    let (x, y) = peak.map_or((f64::NAN, f64::NAN), |p| (p.location, p.value));
    summary
        .float(&format!("{prefix}location"), x)
        .float(&format!("{prefix}value"), y)
}

fn scan_summary(result: &ScanResult) -> Summary {
    let c = &result.config;
    let flagged = result.samples.iter().filter(|s| !s.converged).count();
    let dw = result.samples.iter().map(|s| s.max_discarded_weight).fold(0.0, f64::max);
    let mut s = Summary::new()
        .text("n_sites", c.n_sites())
        .text("backend", backend_name(c.backend))
        .text("observable", observable_name(c.observable))
        .text("points", result.samples.len())
        .text("refined_points", result.samples.iter().filter(|s| s.refined).count())
        .text("flagged", flagged)
        .float("delta_step", c.delta_step);
    if c.backend == Backend::Dmrg {
        s = s.text("max_kept_m", c.dmrg.max_kept_m);
    }
    if c.observable.wants_entropy() {
        s = s.text("l_sites", c.block_length());
    }
    s = peak_fields(s, "peak_", result.peak());
    s = peak_fields(s, "susceptibility_peak_", result.susceptibility_peak);
    s = peak_fields(s, "entropy_peak_", result.entropy_peak);
    s.float("max_discarded_weight", dw).text("status", "ok")
}

fn scan_one(
    config: &ScanConfig,
    out: &Path,
    writer: &WriterHandle,
    checkpoint: bool,
    resume: bool,
) -> Result<Summary, CliError> {
    let n = config.n_sites();
    let files = ScanFiles::new(out, n);
    let previous = if resume { resume_state(config, &files)? } else { None };
    let mut computed: Vec<ScanSample> = Vec::new();
    let mut write_error = None;
    let outcome = scan_delta_f_with(config, previous, |progress| {
        computed = progress.samples.to_vec();
        if checkpoint {
            if let Some(state) = progress.next_warm_start {
                match checkpoint_bytes(state) {
                    Ok(bytes) => writer.write(&files.checkpoint, bytes),
                    Err(e) => write_error = Some(e),
                }
            }
            writer.write(&files.partial, samples_to_csv(n, progress.samples).into_bytes());
        }
        Ok(())
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    match outcome {
        Ok(result) => {
            let summary = scan_summary(&result);
            writer.write(&files.csv, to_csv(&result).into_bytes());
            writer.write(&files.summary, summary.render().into_bytes());
            if checkpoint {
                writer.remove(&files.partial);
                writer.remove(&files.checkpoint);
            }
            Ok(summary)
        }
        Err(e @ spinchain::Error::BoundaryPeak { .. }) => {
            // The data are complete; only the peak is missing. Keep them so
            // the grid can be widened with the samples in view.
            let mut samples = computed;
            samples.sort_by(|a, b| a.delta_f.total_cmp(&b.delta_f));
            writer.write(&files.csv, samples_to_csv(n, &samples).into_bytes());
            let summary = Summary::new()
                .text("n_sites", n)
                .text("points", samples.len())
                .text("status", "boundary_peak");
            writer.write(&files.summary, summary.render().into_bytes());
            Err(CliError::Compute(format!("N = {n}: {e}")))
        }
        Err(e) => Err(match CliError::from(e) {
            CliError::Compute(m) => CliError::Compute(format!("N = {n}: {m}")),
            CliError::Usage(m) => CliError::Usage(format!("N = {n}: {m}")),
        }),
    }
}

/// Scans every configured chain length on a pool of `workers` threads.
pub fn scan(
    config: &RunConfig,
    out: &Path,
    writer: &WriterHandle,
    workers: usize,
    resume: bool,
) -> Result<Vec<Summary>, CliError> {
    // Validate every size before any work starts.
    let configs = config
        .sizes()
        .into_iter()
        .map(|n| config.scan_config(n))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let checkpoint = config.run.checkpoint;
    let results: Vec<Result<Summary, CliError>> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| scan_one(c, out, writer, checkpoint, resume))
            .collect()
    });
    let mut summaries = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(s) => summaries.push(s),
            Err(e) => {
                log::error!("{e}");
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(summaries), Err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakKind {
    /// The scan's own observable.
    Primary,
    Susceptibility,
    Entropy,
}

impl PeakKind {
    fn field(self) -> &'static str {
        match self {
            PeakKind::Primary => "peak_location",
            PeakKind::Susceptibility => "susceptibility_peak_location",
            PeakKind::Entropy => "entropy_peak_location",
        }
    }
}

/// Linear fit of peak locations against `1/N` from scan summary files.
pub fn fit(files: &[PathBuf], kind: PeakKind, out: &Path, writer: &WriterHandle) -> Result<Summary, CliError> {
    if files.len() < 2 {
        return Err(CliError::Usage(format!(
            "fit needs at least 2 peak files, got {}",
            files.len()
        )));
    }
    let mut points = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let record = Summary::parse(text.lines().next().unwrap_or(""))?;
        let n = record.float_field("n_sites")? as usize;
        let x = record.float_field(kind.field())?;
        if !x.is_finite() {
            return Err(CliError::Usage(format!("{} has no {}", path.display(), kind.field())));
        }
        points.push((n, x));
    }
    let fit = finite_size_fit(&points)?;
    let residuals: Vec<String> = fit.residuals.iter().map(|&r| format_float(r)).collect();
    let summary = Summary::new()
        .text("points", fit.points.len())
        .text("peak", kind.field())
        .float("slope", fit.slope)
        .float("intercept", fit.intercept)
        .float("rms_residual", fit.rms_residual)
        .text("residuals", residuals.join(","));
    let mut plot = String::from("# inverse_n delta_f_max\n");
    for (x, y) in &fit.points {
        plot.push_str(&format!("{} {}\n", format_float(*x), format_float(*y)));
    }
    writer.write(&out.join("fit.summary"), summary.render().into_bytes());
    writer.write(&out.join("fit_points.dat"), plot.into_bytes());
    Ok(summary)
}

/// Entropy of every right-hand block at `[model] delta_f`.
pub fn entropy_profile(config: &RunConfig, out: &Path, writer: &WriterHandle) -> Result<Summary, CliError> {
    let n = config.model.n_sites;
    let params = config.model.params(n);
    let (gs, summary) = solve(&params, config.backend(n), &config.dmrg_config(Observable::Entropy))?;
    let mut csv = String::from("n_sites,delta_f,l_sites,entropy_bits\n");
    for p in profile(&gs)? {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            n,
            format_float(params.delta_f),
            p.l_sites,
            format_float(p.entropy_bits)
        ));
    }
    let summary = summary
        .float("energy", gs.energy)
        .text("converged", gs.converged)
        .float("max_discarded_weight", gs.max_discarded_weight);
    writer.write(&out.join(format!("entropy_profile_N{n}.csv")), csv.into_bytes());
    writer.write(&out.join(format!("entropy_profile_N{n}.summary")), summary.render().into_bytes());
    if !gs.converged {
        return Err(CliError::Compute(format!("ground state for N = {n} did not converge")));
    }
    Ok(summary)
}

pub const VALIDATE_SIZES: [usize; 3] = [8, 10, 12];
pub const VALIDATE_DELTA_F: [f64; 4] = [1.0, 1.8, 2.3, 2.8];
const VALIDATE_STEP: f64 = 0.001;

/// ED-vs-DMRG comparison on small chains: energy, entropy at `L = N/2 − 1`
/// and fidelity at `δ = 0.001`.
pub fn validate(config: Option<&RunConfig>, out: &Path, writer: &WriterHandle) -> Result<Summary, CliError> {
    let base = DmrgConfig::default().with_m(64);
    let dmrg = config.map_or(base.clone(), |c| c.dmrg.apply(base));
    let mut csv = String::from(
        "n_sites,delta_f,energy_ed,energy_dmrg,energy_error,entropy_error,fidelity_error,pass\n",
    );
    let (mut worst_e, mut worst_s, mut worst_f) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for n in VALIDATE_SIZES {
        for delta_f in VALIDATE_DELTA_F {
            let p = ModelParams::with_defaults(n, delta_f);
            let q = p.with_delta_f(delta_f + VALIDATE_STEP);
            let ed = exact::ground_state(&p)?;
            let ed_next = ground_state_lanczos_from(
                &q,
                ed.state.basis.clone(),
                &ed.state.amplitudes,
                exact::DEFAULT_TOL,
                exact::DEFAULT_MAX_ITER,
            )?;
            let dm = run_dmrg(&p, &dmrg)?;
            let dm_next = continue_in_delta(&p, &dm, delta_f + VALIDATE_STEP, &dmrg)?;
            let converged = ed.converged && ed_next.converged && dm.converged && dm_next.converged;
            let (ea, eb) = (GroundState::from_exact(p, ed), GroundState::from_exact(q, ed_next));
            let (da, db) = (GroundState::from_dmrg(p, dm), GroundState::from_dmrg(q, dm_next));
            let l = default_block_length(n);
            let de = (da.energy - ea.energy).abs();
            let ds = (entanglement_entropy(&da, l)?.entropy_bits - entanglement_entropy(&ea, l)?.entropy_bits).abs();
            let df = (fidelity(&da, &db)? - fidelity(&ea, &eb)?).abs();
            let pass = converged && de < 1e-8 && ds < 1e-6 && df < 1e-6 && da.energy >= ea.energy - 1e-10;
            failures += usize::from(!pass);
            worst_e = worst_e.max(de);
            worst_s = worst_s.max(ds);
            worst_f = worst_f.max(df);
            csv.push_str(&format!(
                "{n},{},{},{},{},{},{},{pass}\n",
                format_float(delta_f),
                format_float(ea.energy),
                format_float(da.energy),
                format_float(de),
                format_float(ds),
                format_float(df)
            ));
        }
    }
    let summary = Summary::new()
        .text("cases", VALIDATE_SIZES.len() * VALIDATE_DELTA_F.len())
        .text("failures", failures)
        .text("max_kept_m", dmrg.max_kept_m)
        .float("max_energy_error", worst_e)
        .float("max_entropy_error", worst_s)
        .float("max_fidelity_error", worst_f)
        .text("pass", failures == 0);
    writer.write(&out.join("validate.csv"), csv.into_bytes());
    writer.write(&out.join("validate.summary"), summary.render().into_bytes());
    if failures > 0 {
        return Err(CliError::Compute(format!("{failures} validation cases failed")));
    }
    Ok(summary)
}

/// Runs `f` with a fresh writer and waits for every file to land.
pub fn with_writer<T>(f: impl FnOnce(&WriterHandle) -> Result<T, CliError>) -> Result<T, CliError> {
    let writer = Writer::spawn();
    let result = f(&writer.handle());
    let flushed = writer.finish();
    let value = result?;
    flushed?;
    Ok(value)
}
