//! End-to-end checks of the binary surface: generate a landscape, run each
//! simulator, evaluate bounds and query the oracle, all through the CLI.

use std::fs;
use std::path::Path;
use std::process::Command;

fn metapop() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metapop"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawning metapop");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_rates(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("rates.cfg");
    fs::write(
        &path,
        "colonisation = linear(1.0)\nextinction = const(0.5)\n",
    )
    .unwrap();
    path
}

#[test]
fn landscape_gen_and_simulators_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let land_path = dir.path().join("ring.txt");
    run_ok(
        metapop()
            .args([
                "landscape",
                "gen",
                "--kind",
                "ring",
                "--n",
                "6",
                "--kernel",
                "ring",
                "-o",
            ])
            .arg(&land_path),
    );
    let text = fs::read_to_string(&land_path).unwrap();
    assert!(text.starts_with("1 6"));
    assert!(text.contains("kernel ring"));

    let rates = write_rates(dir.path());

    let disc = dir.path().join("disc");
    run_ok(
        metapop()
            .args(["simulate", "discrete", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args([
                "--T",
                "3",
                "--m",
                "1",
                "--reps",
                "2",
                "--seed",
                "9",
                "--coupled",
                "-o",
            ])
            .arg(&disc),
    );
    let x_csv = fs::read_to_string(disc.join("rep0000_x.csv")).unwrap();
    assert!(x_csv.starts_with("t,X_1,X_2,X_3,X_4,X_5,X_6"));
    assert_eq!(x_csv.lines().count(), 5); // header + 4 states
    let coupled_csv = fs::read_to_string(disc.join("rep0001_coupled.csv")).unwrap();
    assert!(coupled_csv.starts_with("t,sumJ_weighted,l1_XW,tv_Xp,sup_rect_Xp"));

    let ct = dir.path().join("ct");
    run_ok(
        metapop()
            .args(["simulate", "ctmc", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args(["--T", "2", "--reps", "1", "--seed", "4", "-o"])
            .arg(&ct),
    );
    let events = fs::read_to_string(ct.join("rep0000_events.csv")).unwrap();
    assert!(events.starts_with("time,patch,new_value"));

    let ode_dir = dir.path().join("ode");
    run_ok(
        metapop()
            .args(["simulate", "ode", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args(["--T", "1", "-o"])
            .arg(&ode_dir),
    );
    let ode_csv = fs::read_to_string(ode_dir.join("ode.csv")).unwrap();
    assert!(ode_csv.starts_with("t,p_1,p_2"));

    let cct = dir.path().join("cct");
    run_ok(
        metapop()
            .args(["simulate", "coupled-ct", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args(["--T", "1", "--reps", "1", "--seed", "4", "-o"])
            .arg(&cct),
    );
    let disc_csv = fs::read_to_string(cct.join("rep0000_discrepancy.csv")).unwrap();
    assert!(disc_csv.starts_with("t,family,sup,exact_flag,witness_params,tv"));
    assert!(disc_csv.contains("exact"));
}

#[test]
fn bounds_and_oracle_commands() {
    let dir = tempfile::tempdir().unwrap();
    let land_path = dir.path().join("pair.txt");
    fs::write(&land_path, "1 2\n0 1\n1 1\nkernel matrix\n0 1\n1 0\n").unwrap();
    let rates = write_rates(dir.path());

    let json = run_ok(
        metapop()
            .args(["bounds", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args([
                "--theorem",
                "2",
                "--T",
                "2",
                "--m",
                "1",
                "--r",
                "2",
                "--json",
            ]),
    );
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(parsed["constants"]["a"].is_number());
    assert_eq!(parsed["bounds"][0]["id"], "T2");

    let dist = run_ok(
        metapop()
            .args(["oracle", "chain", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args(["--m", "1", "--T", "3", "--x0", "11"]),
    );
    assert!(dist.starts_with("state,probability"));
    // the frozen reference distribution for this instance
    assert!(dist.contains("00,0.578125"));

    let moments = run_ok(
        metapop()
            .args(["oracle", "coupled", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args(["--m", "1", "--T", "3", "--x0", "11"]),
    );
    let parsed: serde_json::Value = serde_json::from_str(&moments).unwrap();
    let mean = parsed["mean_weighted_disagreement"].as_f64().unwrap();
    assert!((mean - 0.5078125).abs() < 1e-12);

    let uni = run_ok(
        metapop()
            .args(["oracle", "ctmc", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args(["--T", "1", "--x0", "10"]),
    );
    let exp = run_ok(
        metapop()
            .args(["oracle", "ctmc", "--landscape"])
            .arg(&land_path)
            .args(["--rates"])
            .arg(&rates)
            .args(["--T", "1", "--x0", "10", "--method", "expm"]),
    );
    assert!(uni.starts_with("state,probability"));
    assert!(exp.starts_with("state,probability"));
}

#[test]
fn experiment_command_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("contact.cfg");
    fs::write(&cfg, "n = 10\nlambda = 1.0\nreps = 3\nseed = 2\n").unwrap();
    let out = dir.path().join("out");
    run_ok(
        metapop()
            .args(["experiment", "contact", "--config"])
            .arg(&cfg)
            .args(["-o"])
            .arg(&out),
    );
    for file in [
        "results.csv",
        "discrepancy.csv",
        "bounds.json",
        "manifest.json",
    ] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "contact");
    assert_eq!(manifest["seed"], 2);
    assert!(manifest["config_sha256"].as_str().unwrap().len() == 64);

    // bound sweep tabulates the grid and reports usable corners
    let sweep_cfg = dir.path().join("sweep.cfg");
    fs::write(
        &sweep_cfg,
        "kind = bound-sweep
n = 500
lambda = 0.05
T = 1
",
    )
    .unwrap();
    let sweep_out = dir.path().join("sweep");
    run_ok(
        metapop()
            .args(["experiment", "bound-sweep", "--config"])
            .arg(&sweep_cfg)
            .args(["-o"])
            .arg(&sweep_out),
    );
    let sweep_csv = fs::read_to_string(sweep_out.join("results.csv")).unwrap();
    assert!(
        sweep_csv.starts_with("theorem,theta,eta,r,threshold,probability,vacuous,preconditions_ok")
    );
    assert!(sweep_csv.contains("T1"));
    assert!(sweep_csv.contains("T3b"));
    let sweep_bounds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sweep_out.join("bounds.json")).unwrap()).unwrap();
    assert!(sweep_bounds["constants"]["h"].is_number());

    // a config without an explicit kind adopts the CLI kind
    let adopted = metapop()
        .args(["experiment", "poisson", "--config"])
        .arg(&cfg)
        .args(["-o"])
        .arg(dir.path().join("out2"))
        .output()
        .unwrap();
    assert!(adopted.status.success());
    // an explicit kind must agree with the CLI kind
    let cfg2 = dir.path().join("verify.cfg");
    fs::write(&cfg2, "kind = verify\nreps = 1\n").unwrap();
    let conflict = metapop()
        .args(["experiment", "contact", "--config"])
        .arg(&cfg2)
        .args(["-o"])
        .arg(dir.path().join("out3"))
        .output()
        .unwrap();
    assert!(!conflict.status.success());
}
