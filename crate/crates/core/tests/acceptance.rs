//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always
//! printed. The full-scale N = 78 scan and the four-size entropy fit take
//! hours on one core; they run only with `SPINCHAIN_ACCEPTANCE_FULL=1`.

mod oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinchain::dmrg::{continue_in_delta, run_dmrg, DmrgConfig, GroundStateResult};
use spinchain::exact::{exact_entropy, ground_state, ground_state_lanczos_from, ExactGroundState};
use spinchain::model::ModelParams;
use spinchain::observables::{
    default_block_length, entanglement_entropy, fidelity, GroundState,
};
use spinchain::scan::{
    finite_size_fit, scan_delta_f, to_csv, uniform_grid, Backend, Observable, ScanConfig,
    ScanResult,
};

const DELTA: f64 = 0.001;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn full_scale() -> bool {
    std::env::var("SPINCHAIN_ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

struct OracleCase {
    n: usize,
    delta_f: f64,
    ed: ExactGroundState,
    ed_fidelity: f64,
    dmrg: GroundStateResult,
    dmrg_fidelity: f64,
}

fn oracle_cases() -> &'static [OracleCase] {
    static CASES: OnceLock<Vec<OracleCase>> = OnceLock::new();
    CASES.get_or_init(|| {
        let config = DmrgConfig::default().with_m(64);
        let mut cases = Vec::new();
        for n in [8, 10, 12] {
            for delta_f in [1.0, 1.8, 2.3, 2.8] {
                let p = ModelParams::with_defaults(n, delta_f);
                let q = p.with_delta_f(delta_f + DELTA);
                let ed = ground_state(&p).unwrap();
                let ed_partner =
                    ground_state_lanczos_from(&q, ed.state.basis.clone(), &ed.state.amplitudes, 1e-12, 500)
                        .unwrap();
                let ed_fidelity = fidelity(
                    &GroundState::from_exact(p, ed.clone()),
                    &GroundState::from_exact(q, ed_partner),
                )
                .unwrap();
                let dmrg = run_dmrg(&p, &config).unwrap();
                let partner = continue_in_delta(&p, &dmrg, delta_f + DELTA, &config).unwrap();
                let dmrg_fidelity = spinchain::mps::overlap(&dmrg.state, &partner.state).unwrap();
                cases.push(OracleCase {
                    n,
                    delta_f,
                    ed,
                    ed_fidelity,
                    dmrg,
                    dmrg_fidelity,
                });
            }
        }
        cases
    })
}

fn oracle_equivalence() -> Verdict {
    let (mut de, mut ds, mut df, mut dref) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for c in oracle_cases() {
        let p = ModelParams::with_defaults(c.n, c.delta_f);
        let (e_ref, _) = oracle::ground_state(&p);
        dref = dref.max((c.ed.energy - e_ref).abs());
        let l = default_block_length(c.n);
        let s_ed = exact_entropy(&c.ed.state, l).unwrap();
        let s_dmrg = c.dmrg.state.schmidt_spectrum(c.n - l).unwrap().entropy_bits();
        de = de.max((c.dmrg.energy - c.ed.energy).abs());
        ds = ds.max((s_dmrg - s_ed).abs());
        df = df.max((c.dmrg_fidelity - c.ed_fidelity).abs());
    }
    check(
        de < 1e-8 && ds < 1e-6 && df < 1e-6 && dref < 1e-10,
        format!("max |ΔE| = {de:.2e}, |ΔS| = {ds:.2e} bits, |ΔF| = {df:.2e}, ED vs dense = {dref:.2e}"),
    )
}

fn two_site_analytics() -> Verdict {
    let p = ModelParams::with_defaults(2, 1.0);
    let ed = ground_state(&p).unwrap();
    let dmrg = run_dmrg(&p, &DmrgConfig::default()).unwrap();
    let s_ed = exact_entropy(&ed.state, 1).unwrap();
    let s_dmrg = entanglement_entropy(&GroundState::from_dmrg(p, dmrg.clone()), 1)
        .unwrap()
        .entropy_bits;
    let worst = [
        (ed.energy + 0.75).abs(),
        (dmrg.energy + 0.75).abs(),
        (s_ed - 1.0).abs(),
        (s_dmrg - 1.0).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    check(
        worst <= 1e-12,
        format!("E = {:.15}, S = {s_ed:.15} bits, worst deviation {worst:.1e}", ed.energy),
    )
}

/// Number of interior local maxima of the converged coarse samples.
fn local_maxima(result: &ScanResult, value: fn(&spinchain::scan::ScanSample) -> Option<f64>) -> usize {
    let ys: Vec<f64> = result
        .samples
        .iter()
        .filter(|s| !s.refined && s.converged)
        .filter_map(value)
        .collect();
    ys.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

fn fidelity_scan(n: usize, grid: Vec<f64>) -> Result<ScanResult, String> {
    let mut c = ScanConfig::new(
        ModelParams::with_defaults(n, 2.0),
        Backend::Dmrg,
        Observable::FidelitySusceptibility,
    );
    c.delta_f_grid = grid;
    scan_delta_f(&c).map_err(|e| format!("N = {n}: {e}"))
}

fn max_discarded(result: &ScanResult) -> f64 {
    result.samples.iter().map(|s| s.max_discarded_weight).fold(0.0, f64::max)
}

fn susceptibility_peak_reduced() -> Verdict {
    let grid = uniform_grid(2.0, 2.8, 0.05);
    let small = match fidelity_scan(20, grid.clone()) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e),
    };
    let large = match fidelity_scan(38, grid) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e),
    };
    let x20 = small.peak_location().unwrap();
    let x38 = large.peak_location().unwrap();
    let dw = max_discarded(&large);
    let maxima = local_maxima(&large, |s| s.susceptibility);
    // Between the N = 20 location and the N = 78 target (2.32 − 0.02).
    let on_trend = x38 <= x20 && x38 >= 2.30;
    check(
        maxima == 1 && on_trend && dw < 1e-12,
        format!(
            "N=38 peak at {x38:.4} (N=20: {x20:.4}), {maxima} interior maximum, max discarded weight {dw:.1e}"
        ),
    )
}

fn susceptibility_peak_full() -> Verdict {
    if !full_scale() {
        return Verdict::Skip("N=78 scan is long-running; set SPINCHAIN_ACCEPTANCE_FULL=1".into());
    }
    let result = match fidelity_scan(78, uniform_grid(1.6, 3.0, 0.05)) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e),
    };
    let x = result.peak_location().unwrap();
    let dw = max_discarded(&result);
    let maxima = local_maxima(&result, |s| s.susceptibility);
    check(
        maxima == 1 && (x - 2.32).abs() <= 0.02 && dw < 1e-12,
        format!("N=78 peak at {x:.4}, {maxima} interior maximum, max discarded weight {dw:.1e}"),
    )
}

/// Entropy scans at m = 64, `L = N/2 − 1`, cached across criteria.
fn entropy_scan(n: usize) -> Result<ScanResult, String> {
    static CACHE: OnceLock<Mutex<Vec<(usize, Result<ScanResult, String>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap();
    if let Some((_, r)) = guard.iter().find(|(k, _)| *k == n) {
        return r.clone();
    }
    let mut c = ScanConfig::new(ModelParams::with_defaults(n, 2.0), Backend::Dmrg, Observable::Entropy);
    c.delta_f_grid = uniform_grid(2.2, 3.6, 0.05);
    let r = scan_delta_f(&c).map_err(|e| format!("N = {n}: {e}"));
    guard.push((n, r.clone()));
    r
}

fn entropy_peaks_qualitative() -> Verdict {
    let (a, b) = match (entropy_scan(20), entropy_scan(40)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Verdict::Fail(e),
    };
    let (pa, pb) = (a.entropy_peak.unwrap(), b.entropy_peak.unwrap());
    let maxima = (local_maxima(&a, |s| s.entropy_bits), local_maxima(&b, |s| s.entropy_bits));
    check(
        maxima == (1, 1) && pb.value > pa.value && pb.location < pa.location,
        format!(
            "N=20: E_max {:.5} at {:.4}; N=40: E_max {:.5} at {:.4}; interior maxima {maxima:?}",
            pa.value, pa.location, pb.value, pb.location
        ),
    )
}

fn entropy_extrapolation(sizes: &[usize], tolerance: f64) -> Verdict {
    let mut points = Vec::new();
    for &n in sizes {
        match entropy_scan(n) {
            Ok(r) => points.push((n, r.entropy_peak.unwrap().location)),
            Err(e) => return Verdict::Fail(e),
        }
    }
    let fit = finite_size_fit(&points).unwrap();
    let locations: Vec<String> = points.iter().map(|(n, x)| format!("{n}:{x:.4}")).collect();
    check(
        (fit.intercept - 2.3).abs() <= tolerance,
        format!(
            "intercept {:.4} (target 2.3 ± {tolerance}), slope {:.3}, peaks [{}]",
            fit.intercept,
            fit.slope,
            locations.join(", ")
        ),
    )
}

fn quadratic_regime() -> Verdict {
    let p = ModelParams::with_defaults(12, 2.0);
    let a = ground_state(&p).unwrap();
    let ratios: Vec<f64> = [0.0005, 0.001, 0.002]
        .iter()
        .map(|&d| {
            let q = p.with_delta_f(2.0 + d);
            let b = ground_state_lanczos_from(&q, a.state.basis.clone(), &a.state.amplitudes, 1e-12, 500)
                .unwrap();
            let f = fidelity(&GroundState::from_exact(p, a.clone()), &GroundState::from_exact(q, b)).unwrap();
            (1.0 - f) / (d * d)
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().map(|r| (r / mean - 1.0).abs()).fold(0.0, f64::max);
    check(
        spread < 0.05,
        format!("(1−F)/δ² = {ratios:.6?}, max relative spread {spread:.2e}"),
    )
}

fn invariant_suites() -> Verdict {
    let mut failures = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_sym = 0.0f64;
    for _ in 0..20 {
        let n = 2 * rng.random_range(2..=6);
        let delta_f = rng.random_range(0.5..3.0);
        let gs = ground_state(&ModelParams::with_defaults(n, delta_f)).unwrap();
        for l in 1..n {
            let d = (exact_entropy(&gs.state, l).unwrap() - exact_entropy(&gs.state, n - l).unwrap()).abs();
            worst_sym = worst_sym.max(d);
        }
    }
    if worst_sym > 1e-8 {
        failures.push(format!("entropy symmetry off by {worst_sym:.1e}"));
    }

    let mut worst_norm = 0.0f64;
    let mut fidelity_ok = true;
    let mut bound_ok = true;
    for c in oracle_cases() {
        for f in [c.ed_fidelity, c.dmrg_fidelity] {
            fidelity_ok &= (0.0..=1.0 + 1e-10).contains(&f);
        }
        bound_ok &= c.dmrg.energy >= c.ed.energy - 1e-10;
        for cut in 1..c.n {
            let total: f64 = c.dmrg.state.schmidt_spectrum(cut).unwrap().weights().iter().sum();
            worst_norm = worst_norm.max((total - 1.0).abs());
        }
    }
    if !fidelity_ok {
        failures.push("fidelity outside [0, 1]".into());
    }
    if !bound_ok {
        failures.push("DMRG energy below ED".into());
    }
    if worst_norm > 1e-10 {
        failures.push(format!("Schmidt weights off by {worst_norm:.1e}"));
    }

    let mut c = ScanConfig::new(ModelParams::with_defaults(16, 2.0), Backend::Dmrg, Observable::Both);
    c.delta_f_grid = uniform_grid(2.0, 2.8, 0.1);
    c.dmrg = c.dmrg.with_m(64);
    c.refine_points = 9;
    c.allow_f_bond_cut = true;
    let first = to_csv(&scan_delta_f(&c).unwrap());
    let second = to_csv(&scan_delta_f(&c).unwrap());
    if first != second {
        failures.push("scan CSV differs between reruns".into());
    }

    let summary = format!(
        "symmetry {worst_sym:.1e}, Schmidt normalization {worst_norm:.1e}, fidelity bounds {fidelity_ok}, variational bound {bound_ok}, CSV rerun identical {}",
        first == second
    );
    if failures.is_empty() {
        Verdict::Pass(summary)
    } else {
        Verdict::Fail(format!("{}; {summary}", failures.join("; ")))
    }
}

fn main() -> ExitCode {
    let full = full_scale();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("1 oracle equivalence", Box::new(oracle_equivalence)),
        ("2 two-site analytics", Box::new(two_site_analytics)),
        ("3 susceptibility peak, reduced (N=20, 38)", Box::new(susceptibility_peak_reduced)),
        ("3 susceptibility peak, full scale (N=78)", Box::new(susceptibility_peak_full)),
        ("4 entropy peaks (N=20, 40)", Box::new(entropy_peaks_qualitative)),
        ("5 entropy extrapolation (N=20, 40, 60)", Box::new(|| entropy_extrapolation(&[20, 40, 60], 0.1))),
        (
            "5 entropy extrapolation, full (N=20, 40, 60, 80)",
            Box::new(move || {
                if full {
                    entropy_extrapolation(&[20, 40, 60, 80], 0.05)
                } else {
                    Verdict::Skip("N=80 scan is long-running; set SPINCHAIN_ACCEPTANCE_FULL=1".into())
                }
            }),
        ),
        ("6 quadratic regime", Box::new(quadratic_regime)),
        ("7 invariant suites", Box::new(invariant_suites)),
    ];

    let mut failed = 0;
    for (name, run) in &criteria {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|_| Verdict::Fail("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(d) => println!("criterion {name}: PASS [{secs:.1}s] {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("criterion {name}: FAIL [{secs:.1}s] {d}");
            }
            Verdict::Skip(d) => println!("criterion {name}: SKIP {d}"),
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
