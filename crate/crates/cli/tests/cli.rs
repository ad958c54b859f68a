use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SUBCOMMANDS: [&str; 7] = ["race", "density", "explicit", "independence", "barrier", "chebyshev", "shanks"];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_primerace"));
    c.env_remove("PRIMERACE_THREADS");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().arg("-o").arg(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

/// Compares `--help` output with tests/golden; set UPDATE_GOLDEN=1 to rewrite.
#[test]
fn help_matches_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut names = vec![None];
    names.extend(SUBCOMMANDS.iter().map(Some));
    for name in names {
        let mut c = bin();
        if let Some(n) = name {
            c.arg(n);
        }
        let o = c.arg("--help").output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        let file = golden.join(format!("{}.txt", name.unwrap_or(&"primerace")));
        if update {
            fs::create_dir_all(&golden).unwrap();
            fs::write(&file, &text).unwrap();
        } else {
            let want = fs::read_to_string(&file).unwrap_or_else(|e| panic!("{}: {e}", file.display()));
            assert_eq!(text, want, "{}", file.display());
        }
    }
}

#[test]
fn race_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["race", "-k", "4", "-r", "3,1", "-x", "30000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("first_negative(3,1) = 26861"));
    let race = json(dir.path().join("race.json"));
    assert_eq!(race["pairs"][0]["first_negative"], 26861);
    assert_eq!(race["total_primes"], 3245);
    let events = fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(events.lines().any(|l| l.starts_with("26861,")));
    let m = json(dir.path().join("manifest.json"));
    assert_eq!(m["command"], "race");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let outs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outs.contains(&"events.csv") && outs.contains(&"race.json") && outs.contains(&"snapshot.json"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# mod 4 race\nmodulus = 4\nresidues = 3,1\nlimit = 30000\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = run(dir.path(), &["race", "--config", cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("= 26861"));
    let o = run(dir.path(), &["race", "--config", cfg, "-x", "20000"]);
    assert!(stdout(&o).contains("none up to 20000"));
    let m = json(dir.path().join("manifest.json"));
    assert_eq!(m["inputs"][0]["path"], cfg);
}

#[test]
fn checkpoint_resume_matches_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.json");
    let ck = ck.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run(&a, &["race", "-k", "4", "-r", "3,1", "-x", "50000", "--checkpoint", ck, "--checkpoint-every", "7000"]);
    assert_eq!(o.status.code(), Some(0));
    run(&a, &["race", "-k", "4", "-r", "3,1", "-x", "200000", "--resume", ck]);
    run(&b, &["race", "-k", "4", "-r", "3,1", "-x", "200000"]);
    assert_eq!(json(a.join("race.json")), json(b.join("race.json")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(run(p, &["race", "-k", "4"]).status.code(), Some(2));
    assert_eq!(run(p, &["race", "-k", "4", "-r", "3,1", "-x", "1"]).status.code(), Some(2));
    assert_eq!(run(p, &["race", "-k", "4", "-r", "3,2", "-x", "100"]).status.code(), Some(2));
    let missing = p.join("missing.txt");
    let o = run(p, &["independence", "--zeros", missing.to_str().unwrap(), "--subset", "1", "-N", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let bad = p.join("bad.spec");
    fs::write(&bad, "#barrier\n#modulus 5\n#residues 1,2\n#beta1 0.5\n[1] 0.75 abc 1\n").unwrap();
    let o = run(p, &["barrier", "--spec", bad.to_str().unwrap(), "--check-ordering", "1,2"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(p, &["barrier", "--builtin", "k5", "--check-ordering", "1,4,2,3"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(p.join("verdict.json").exists() && p.join("manifest.json").exists());
}

#[test]
fn failed_run_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("no/such/dir/ck.json");
    let o = run(dir.path(), &["race", "-k", "4", "-r", "3,1", "-x", "1000", "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn density_is_reproducible_across_threads() {
    let zeros = data("zeros_mod4.txt");
    let z = zeros.to_str().unwrap();
    let args = ["density", "-k", "4", "-r", "3,1", "--gsh", "--zeros", z, "-T", "500", "-n", "20000", "--seed", "3"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path(), &args).status.code(), Some(0));
    let o = bin().arg("-o").arg(b.path()).args(args).env("PRIMERACE_THREADS", "3").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let (da, db) = (json(a.path().join("density.json")), json(b.path().join("density.json")));
    assert_eq!(da, db);
    assert_eq!(da["method"], "gsh_monte_carlo");
    assert_eq!(da["T"], 500.0);
    let m = json(b.path().join("manifest.json"));
    assert_eq!(m["seed"], 3);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn explicit_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let zeros = data("zeros_mod4.txt");
    let o = run(
        dir.path(),
        &["--plot", "explicit", "-k", "4", "-r", "3,1", "--zeros", zeros.to_str().unwrap(), "-T", "50,200", "--points", "20", "--oscillation"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,value,T,curve"));
    assert_eq!(csv.lines().count(), 1 + 3 * 20);
    let e = json(dir.path().join("explicit.json"));
    assert_eq!(e["truncations"].as_array().unwrap().len(), 2);
    let osc = json(dir.path().join("oscillation.json"));
    assert_eq!(osc["a0"], 0.0);
    assert!(osc["term_count"].as_u64().unwrap() > 0);
    for f in ["explicit.svg", "oscillation.svg"] {
        assert!(fs::read_to_string(dir.path().join(f)).unwrap().starts_with("<svg"));
    }
}

#[test]
fn small_commands() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = run(p, &["shanks", "-x", "1e5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(p.join("shanks.json"))["holds"], true);
    run(p, &["chebyshev", "-x", "100"]);
    assert!(json(p.join("chebyshev.json"))["value"].as_f64().unwrap() < 0.0);
    let zeros = data("zeros_mod4.txt");
    let o = run(p, &["independence", "--zeros", zeros.to_str().unwrap(), "--subset", "1,2,3", "-N", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(p.join("independence.json"))["verdict"]["passed"], true);
    let o = run(p, &["independence", "--zeros", zeros.to_str().unwrap(), "--subset", "0", "-N", "2"]);
    assert_eq!(o.status.code(), Some(2));
}
