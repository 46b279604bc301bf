//! End-to-end checks of the command drivers against the library they wrap,
//! and of the run plumbing (config validation, artifacts, exit codes).

use std::path::PathBuf;

use tempfile::TempDir;

use mrock::brownian::BrownianGrid;
use mrock::skrock::mskrock_step;
use mrock::stages::{StageParams, DEFAULT_EPS};
use mrock::Workspace;
use mrock_cli::cli::{run_from, RunEnv};
use mrock_cli::commands;
use mrock_cli::config::RunConfig;
use mrock_cli::csvio::read_csv;
use mrock_cli::meta::Metadata;

fn env_from(toml: &str, seed: Option<u64>, dir: &TempDir) -> RunEnv {
    RunEnv { config: RunConfig::from_toml(toml).unwrap(), seed, out: dir.path().to_path_buf() }
}

#[test]
fn integrate_single_step_matches_the_library_call() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
version = 1

[problem]
id = "multirate-test"
lambda = -80.0
zeta = -3.0
mu = 1.5

[method]
s = 4
m = 4

[integrate]
tau = 1.0
"#;
    let env = env_from(toml, Some(11), &dir);
    let failures = commands::integrate::run(&env).unwrap();
    assert!(failures.is_empty(), "{failures:?}");

    // Reproduce the run by hand: same seed, same path, same stage choice.
    let grid = BrownianGrid::new(11, 1.0, 1, 1).unwrap();
    let path = grid.path(0);
    let mut dw = [0.0];
    path.increment_into(0, 1, &mut dw);
    let problem = mrock::problems::make_multirate_test(-80.0, -3.0, 1.5).unwrap();
    let params = StageParams::coupled_from_counts(1.0, 4, 4, DEFAULT_EPS).unwrap();
    let mut ws = Workspace::for_problem(&problem);
    let (expected, _) =
        mskrock_step(&problem.drift, &problem.diffusion, &params, &[1.0], 0.0, 1.0, &dw, &mut ws)
            .unwrap();

    let snapshot = read_csv(&dir.path().join("snapshot.csv")).unwrap();
    let steps_col = snapshot.column("step").unwrap();
    let values = snapshot.column("value").unwrap();
    assert_eq!(steps_col, vec![0.0, 1.0]);
    assert_eq!(values[0], 1.0);
    assert_eq!(values[1], expected[0], "CLI terminal state differs from the library step");

    let steps = read_csv(&dir.path().join("steps.csv")).unwrap();
    assert_eq!(steps.rows.len(), 1);
    assert_eq!(steps.column("s").unwrap(), vec![4.0]);
    assert_eq!(steps.column("m").unwrap(), vec![4.0]);
    assert_eq!(steps.column("n_ff").unwrap(), vec![20.0]);
    assert_eq!(steps.column("eta").unwrap()[0], params.eta);

    let meta = Metadata::read(&dir.path().join("steps.meta")).unwrap();
    assert_eq!(meta.get("seed"), Some("11"));
    assert_eq!(meta.get("selection"), Some("fixed(4,4)"));
}

#[test]
fn stochastic_commands_refuse_to_run_unseeded() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
version = 1

[problem]
id = "sinh"

[integrate]
tau = 0.5
"#;
    let env = env_from(toml, None, &dir);
    let err = commands::integrate::run(&env).unwrap_err().to_string();
    assert!(err.contains("seed"), "{err}");
}

#[test]
fn noiseless_sourceless_heat_holds_its_state() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
version = 1

[problem]
id = "refined-heat"
delta = 0.25
h_coarse = 0.0625
sigma = 0.0
source = 0.0

[integrate]
tau = 0.01
"#;
    let env = env_from(toml, Some(3), &dir);
    let failures = commands::integrate::run(&env).unwrap();
    assert!(failures.is_empty(), "{failures:?}");

    let steps = read_csv(&dir.path().join("steps.csv")).unwrap();
    assert_eq!(steps.rows.len(), 32);
    // Automatic selection records the radius estimates it acted on.
    assert!(steps.column("rho_f").unwrap().iter().all(|r| r.is_finite() && *r > 0.0));
    let snapshot = read_csv(&dir.path().join("snapshot.csv")).unwrap();
    let steps_col = snapshot.column("step").unwrap();
    let values = snapshot.column("value").unwrap();
    for (step, value) in steps_col.iter().zip(&values) {
        if *step == 32.0 {
            assert!((value - 1.0).abs() <= 1e-10);
        }
    }
}

#[test]
fn converge_writes_table_slopes_and_metadata() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
version = 1

[problem]
id = "multirate-test"
lambda = -2.0
zeta = -0.5
mu = 1.0

[method]
s = 4
m = 4

[converge]
taus = [0.25, 0.125, 0.0625, 0.03125]
n_paths = 300
expect_strong_slope = [0.2, 1.0]
"#;
    let env = env_from(toml, Some(77), &dir);
    let failures = commands::converge::run(&env).unwrap();
    assert!(failures.is_empty(), "{failures:?}");

    let table = read_csv(&dir.path().join("errors.csv")).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert_eq!(table.column("tau").unwrap(), vec![0.25, 0.125, 0.0625, 0.03125]);
    let errors = table.column("strong_error").unwrap();
    assert!(errors.iter().all(|e| e.is_finite() && *e > 0.0));
    assert!(errors.last().unwrap() < errors.first().unwrap());

    let meta = Metadata::read(&dir.path().join("errors.meta")).unwrap();
    assert_eq!(meta.get("seed"), Some("77"));
    assert_eq!(meta.get("reference"), Some("exact"));
    let slope: f64 = meta.get("strong_slope").unwrap().parse().unwrap();
    assert!((0.2..=1.0).contains(&slope), "slope {slope}");
}

#[test]
fn converge_accepts_a_fine_reference_and_validates_the_rest() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
version = 1

[problem]
id = "multirate-test"
lambda = -4.0
zeta = -0.5
mu = 1.0

[converge]
taus = [0.5, 0.25]
n_paths = 50
reference = "fine"
fine_factor = 4
"#;
    let env = env_from(toml, Some(5), &dir);
    let failures = commands::converge::run(&env).unwrap();
    assert!(failures.is_empty(), "{failures:?}");
    let meta = Metadata::read(&dir.path().join("errors.meta")).unwrap();
    assert_eq!(meta.get("reference"), Some("fine(factor=4)"));

    // fine_factor without the fine reference is a config contradiction.
    let bad = toml.replace("reference = \"fine\"\n", "");
    let env = env_from(&bad, Some(5), &dir);
    let err = commands::converge::run(&env).unwrap_err().to_string();
    assert!(err.contains("fine_factor"), "{err}");

    // And no seed from either source is refused.
    let env = env_from(toml, None, &dir);
    assert!(commands::converge::run(&env).is_err());
}

#[test]
fn stability_scan_emits_polynomials_and_a_certified_region() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
version = 1

[stability_scan]
s = 6
m = 4
n_z = 101
n_lambda = 6
n_zeta = 5
n_mu = 4
tau = 0.1
"#;
    let env = env_from(toml, None, &dir);
    let failures = commands::stability::run_scan(&env).unwrap();
    assert!(failures.is_empty(), "{failures:?}");

    let poly = read_csv(&dir.path().join("polynomials.csv")).unwrap();
    assert_eq!(poly.rows.len(), 101);
    let z = poly.column("z").unwrap();
    let phi = poly.column("phi_m").unwrap();
    let flag = poly.column("psi_sq_le_phi").unwrap();
    assert_eq!(*z.last().unwrap(), 0.0);
    assert_eq!(*phi.last().unwrap(), 1.0);
    assert!(flag.iter().all(|f| *f == 1.0));

    let region = read_csv(&dir.path().join("region.csv")).unwrap();
    assert_eq!(region.rows.len(), 6 * 5 * 4);
    assert!(region.column("stable").unwrap().iter().all(|s| *s == 1.0));
    // Noise-free points can sit exactly on an inner polynomial zero, where
    // the step is an isometry; certification allows that marginal case.
    assert!(region.column("amplification").unwrap().iter().all(|a| *a <= 1.0 + 1e-12));

    let meta = Metadata::read(&dir.path().join("polynomials.meta")).unwrap();
    assert_eq!(meta.get("violations"), Some("0"));

    // An odd inner stage count has no noise chain; the config is rejected.
    let env = env_from(&toml.replace("m = 4", "m = 3"), None, &dir);
    assert!(commands::stability::run_scan(&env).is_err());
}

#[test]
fn certify_reports_a_clean_grid() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
version = 1

[certify]
n_lambda = 5
n_zeta = 5
n_mu = 5
tau = 0.05
"#;
    let env = env_from(toml, None, &dir);
    let failures = commands::stability::run_certify(&env).unwrap();
    assert!(failures.is_empty(), "{failures:?}");
    let table = read_csv(&dir.path().join("certification.csv")).unwrap();
    assert_eq!(table.rows.len(), 125);
    let meta = Metadata::read(&dir.path().join("certification.meta")).unwrap();
    assert_eq!(meta.get("violations"), Some("0"));
    let max_amp: f64 = meta.get("max_amplification").unwrap().parse().unwrap();
    assert!(max_amp <= 1.0 + 1e-12, "max amplification {max_amp}");
}

#[test]
fn reaction_sweep_degenerates_to_single_rate_at_zero_fast() {
    let dir = TempDir::new().unwrap();
    let net = dir.path().join("net.txt");
    std::fs::write(
        &net,
        "species 2\nrate 5.0 | orders 2 0 | stoich -2 1\nrate 0.2 | orders 0 1 | stoich 2 -1\nfast 1\n",
    )
    .unwrap();
    let toml = format!(
        r#"
version = 1

[speedup]
sweep = "reaction"
path = "{}"
x0 = [50.0, 10.0]
tau = 0.01
fast_counts = [0, 1, 2]
"#,
        net.display()
    );
    let env = env_from(&toml, None, &dir);
    let failures = commands::speedup::run(&env).unwrap();
    assert!(failures.is_empty(), "{failures:?}");

    let table = read_csv(&dir.path().join("speedup_reaction.csv")).unwrap();
    assert_eq!(table.column("r").unwrap(), vec![0.0, 1.0, 2.0]);
    let cost_msk = table.column("cost_msk").unwrap();
    let cost_sk = table.column("cost_sk").unwrap();
    assert_eq!(cost_msk[0], cost_sk[0], "empty fast set must cost exactly the single-rate run");
    assert_eq!(table.column("speedup").unwrap()[0], 1.0);
    assert!(table.column("rho_f").unwrap()[0] == 0.0);
    assert!(table.column("rho_f").unwrap()[2] > 0.0);
}

#[test]
fn delta_sweep_shows_increasing_payoff() {
    let dir = TempDir::new().unwrap();
    let toml = r#"
version = 1

[speedup]
sweep = "delta"
deltas = [0.25, 0.0625]
h_coarse = 0.0625
sigma = 0.1
tau = 0.01
n_paths = 2
"#;
    let env = env_from(toml, Some(5), &dir);
    let failures = commands::speedup::run(&env).unwrap();
    assert!(failures.is_empty(), "{failures:?}");
    let table = read_csv(&dir.path().join("speedup_delta.csv")).unwrap();
    let speedups = table.column("speedup").unwrap();
    assert_eq!(speedups.len(), 2);
    assert!(speedups[1] > speedups[0], "{speedups:?}");
    assert!(speedups[1] > 1.0);

    // The sweep draws paths, so it needs a seed too.
    let env = env_from(toml, None, &dir);
    assert!(commands::speedup::run(&env).is_err());
}

#[test]
fn config_validation_rejects_bad_inputs() {
    assert!(RunConfig::from_toml("version = 2\n").is_err());
    assert!(RunConfig::from_toml("").is_err());
    assert!(RunConfig::from_toml("version = 1\n[integrate]\ntau = 0.1\nbogus = 1\n").is_err());
    let cfg = RunConfig::from_toml("version = 1\n[method]\ns = 4\n").unwrap();
    assert!(cfg.method_or_default().selection().is_err());
    let cfg = RunConfig::from_toml("version = 1\n[method]\nscheme = \"leapfrog\"\n").unwrap();
    assert!(cfg.method_or_default().scheme().is_err());
    let cfg = RunConfig::from_toml("version = 1\n[problem]\nid = \"multirate-test\"\n").unwrap();
    let err = cfg.problem().unwrap().build().unwrap_err().to_string();
    assert!(err.contains("problem.lambda"), "{err}");
}

#[test]
fn exit_codes_separate_failed_checks_from_broken_runs() {
    let dir = TempDir::new().unwrap();
    let cfg_ok = dir.path().join("ok.toml");
    std::fs::write(
        &cfg_ok,
        r#"
version = 1
seed = 11

[problem]
id = "multirate-test"
lambda = -80.0
zeta = -3.0
mu = 1.5

[method]
s = 4
m = 4

[integrate]
tau = 1.0
"#,
    )
    .unwrap();
    let out_ok = dir.path().join("run-ok");
    let code = run_from([
        "mrock",
        "--config",
        cfg_ok.to_str().unwrap(),
        "--out",
        out_ok.to_str().unwrap(),
        "integrate",
    ]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(out_ok.join("failures.txt")).unwrap(), "");

    // An unsatisfiable slope window is a failed in-run check, not a crash.
    let cfg_fail = dir.path().join("fail.toml");
    std::fs::write(
        &cfg_fail,
        r#"
version = 1
seed = 11

[problem]
id = "multirate-test"
lambda = -4.0
zeta = -0.5
mu = 1.0

[converge]
taus = [0.5, 0.25, 0.125]
n_paths = 40
expect_weak_slope = [5.0, 6.0]
"#,
    )
    .unwrap();
    let out_fail = dir.path().join("run-fail");
    let code = run_from([
        "mrock",
        "--config",
        cfg_fail.to_str().unwrap(),
        "--out",
        out_fail.to_str().unwrap(),
        "converge",
    ]);
    assert_eq!(code, 1);
    let listing = std::fs::read_to_string(out_fail.join("failures.txt")).unwrap();
    assert!(listing.contains("weak-slope-window"), "{listing}");

    // No config at all: the run cannot start.
    let missing: [&str; 2] = ["mrock", "integrate"];
    assert_eq!(run_from(missing), 2);

    // Help and version are not failed runs.
    assert_eq!(run_from(["mrock", "--help"]), 0);
    assert_eq!(run_from(["mrock", "--version"]), 0);
    assert_eq!(run_from(["mrock", "no-such-command"]), 2);

    let bogus = dir.path().join("bogus.toml");
    std::fs::write(&bogus, "version = 1\n[problem]\nid = \"nonsense\"\n[integrate]\ntau = 0.5\n")
        .unwrap();
    let out_bogus: PathBuf = dir.path().join("run-bogus");
    let code = run_from([
        "mrock",
        "--config",
        bogus.to_str().unwrap(),
        "--out",
        out_bogus.to_str().unwrap(),
        "--seed",
        "1",
        "integrate",
    ]);
    assert_eq!(code, 2);
}
