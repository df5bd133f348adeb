use std::path::Path;
use std::process::{Command, Output};

use spinchain::scan::{parse_csv_row, CSV_HEADER};
use spinchain_cli::config::RunConfig;
use spinchain_cli::output::Summary;

fn spinchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinchain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn summary(path: &Path) -> Summary {
    Summary::parse(std::fs::read_to_string(path).unwrap().lines().next().unwrap()).unwrap()
}

#[test]
fn two_site_ground_state_is_the_singlet() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!("[model]\nn_sites = 2\ndelta_f = 1.0\n[run]\noutput_dir = {:?}\n", out),
    );
    let o = spinchain(&["ground", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out.join("ground_N2.summary"));
    assert_eq!(s.get("backend"), Some("ed"));
    assert!((s.float_field("energy").unwrap() + 0.75).abs() < 1e-12);
    assert!((s.float_field("entropy_bits").unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn auto_backend_agrees_with_dmrg() {
    let dir = tempfile::tempdir().unwrap();
    let base = "[model]\nn_sites = 12\ndelta_f = 2.3\n[dmrg]\nmax_kept_m = 64\n";
    let auto = write_config(dir.path(), &format!("{base}[run]\nbackend = \"auto\"\n"));
    let o = spinchain(&["ground", "--config", &auto, "--out", dir.path().join("auto").to_str().unwrap()]);
    assert!(o.status.success());
    let dmrg = write_config(dir.path(), &format!("{base}[run]\nbackend = \"dmrg\"\ncheckpoint = true\n"));
    let o = spinchain(&["ground", "--config", &dmrg, "--out", dir.path().join("dmrg").to_str().unwrap()]);
    assert!(o.status.success());
    let a = summary(&dir.path().join("auto/ground_N12.summary"));
    let d = summary(&dir.path().join("dmrg/ground_N12.summary"));
    assert_eq!(a.get("backend"), Some("ed"));
    assert_eq!(d.get("backend"), Some("dmrg"));
    let diff = (a.float_field("energy").unwrap() - d.float_field("energy").unwrap()).abs();
    assert!(diff < 1e-8, "{diff}");
    let state = spinchain::mps::checkpoint::load(&dir.path().join("dmrg/ground_N12.mps")).unwrap();
    assert_eq!(state.n_sites(), 12);
}

#[test]
fn missing_output_dir_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nn_sites = 4\n");
    let o = spinchain(&["ground", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1, "only the config should exist");
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let odd = write_config(dir.path(), "[model]\nn_sites = 7\n");
    assert_eq!(spinchain(&["ground", "--config", &odd, "--out", out]).status.code(), Some(2));
    let unknown = write_config(dir.path(), "[model]\nn_sites = 8\nbogus = 1\n");
    assert_eq!(spinchain(&["ground", "--config", &unknown, "--out", out]).status.code(), Some(2));
    assert_eq!(spinchain(&["ground", "--out", out]).status.code(), Some(2));
    assert_eq!(spinchain(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn exact_scan_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            "[model]\nn_sites = 12\n[run]\noutput_dir = {:?}\n[scan]\nstart = 1.6\nstop = 3.0\nstep = 0.1\nobservable = \"both\"\n",
            out
        ),
    );
    let o = spinchain(&["scan", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("scan_N12.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<_> = lines.map(|l| parse_csv_row(l).unwrap().1).collect();
    assert_eq!(rows.len(), 15 + 21);
    assert!(rows.windows(2).all(|w| w[0].delta_f <= w[1].delta_f));
    let s = summary(&out.join("scan_N12.summary"));
    let x = s.float_field("susceptibility_peak_location").unwrap();
    assert!((x - 2.325).abs() < 0.01, "{x}");
    assert!(!out.join("scan_N12.partial.csv").exists());
}

#[test]
fn scans_over_several_sizes_feed_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            "[model]\nn_sites = 8\n[run]\noutput_dir = {:?}\n[scan]\nsizes = [8, 12]\nstart = 1.8\nstop = 3.0\nstep = 0.1\nrefine = false\n",
            out
        ),
    );
    let o = spinchain(&["scan", "--config", &cfg, "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = [out.join("scan_N8.summary"), out.join("scan_N12.summary")];
    let o = spinchain(&[
        "fit",
        "--out",
        out.to_str().unwrap(),
        files[0].to_str().unwrap(),
        files[1].to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = summary(&out.join("fit.summary"));
    assert_eq!(fit.get("points"), Some("2"));
    assert!(fit.float_field("rms_residual").unwrap() < 1e-12);
    let plot = std::fs::read_to_string(out.join("fit_points.dat")).unwrap();
    assert_eq!(plot.lines().count(), 3);

    let o = spinchain(&["fit", "--out", out.to_str().unwrap(), files[0].to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn collinear_peaks_fit_without_residual() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for n in [20usize, 40, 60, 80] {
        let path = dir.path().join(format!("scan_N{n}.summary"));
        let line = Summary::new()
            .text("n_sites", n)
            .float("peak_location", 2.3 + 5.0 / n as f64)
            .render();
        std::fs::write(&path, line).unwrap();
        files.push(path.to_str().unwrap().to_string());
    }
    let mut args = vec!["fit", "--out", dir.path().to_str().unwrap()];
    args.extend(files.iter().map(String::as_str));
    let o = spinchain(&args);
    assert!(o.status.success());
    let fit = summary(&dir.path().join("fit.summary"));
    assert!((fit.float_field("intercept").unwrap() - 2.3).abs() < 1e-12);
    assert!(fit.float_field("rms_residual").unwrap() < 1e-13);
}

#[test]
fn resumed_scan_matches_an_uninterrupted_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = |out: &Path| {
        format!(
            "[model]\nn_sites = 12\n[run]\nbackend = \"dmrg\"\ncheckpoint = true\noutput_dir = {:?}\n[dmrg]\nmax_kept_m = 32\n[scan]\nstart = 2.0\nstop = 2.6\nstep = 0.1\nrefine_points = 5\nrefine_width = 0.08\n",
            out
        )
    };
    let full = dir.path().join("full");
    let cfg = write_config(dir.path(), &body(&full));
    assert!(spinchain(&["scan", "--config", &cfg]).status.success());
    let reference = std::fs::read_to_string(full.join("scan_N12.csv")).unwrap();

    // Produce the checkpoint an interrupted run leaves behind: run the same
    // scan in-process and stop it after four points.
    let part = dir.path().join("part");
    std::fs::create_dir_all(&part).unwrap();
    let config = RunConfig::parse(&body(&part)).unwrap();
    let scan = config.scan_config(12).unwrap();
    let _ = spinchain::scan::scan_delta_f_with(&scan, None, |p| {
        let csv = spinchain::scan::samples_to_csv(12, p.samples);
        std::fs::write(part.join("scan_N12.partial.csv"), csv).unwrap();
        if let Some(state) = p.next_warm_start {
            spinchain::mps::checkpoint::save(state, &part.join("scan_N12.ckpt")).unwrap();
        }
        if p.samples.len() == 4 {
            return Err(spinchain::Error::Checkpoint("interrupted".into()));
        }
        Ok(())
    });
    assert!(!part.join("scan_N12.csv").exists());
    let cfg = write_config(dir.path(), &body(&part));
    let o = spinchain(&["scan", "--config", &cfg, "--resume"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(part.join("scan_N12.csv")).unwrap(), reference);
    assert!(!part.join("scan_N12.partial.csv").exists());
    assert!(!part.join("scan_N12.ckpt").exists());
}

#[test]
fn entropy_profile_is_mirror_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nn_sites = 10\ndelta_f = 2.3\n");
    let out = dir.path().join("out");
    let o = spinchain(&["entropy-profile", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("entropy_profile_N10.csv")).unwrap();
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 9);
    for l in 0..9 {
        assert!((values[l] - values[8 - l]).abs() < 1e-10);
    }
}

#[test]
fn validate_passes_on_small_chains() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinchain(&["validate", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir.path().join("validate.summary"));
    assert_eq!(s.get("pass"), Some("true"));
    assert_eq!(s.get("cases"), Some("12"));
}
