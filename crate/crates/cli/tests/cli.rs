use std::path::PathBuf;
use std::process::{Command, Output};

use thermoflow_cli::{cache_key, CACHE_ENV};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn thermoflow(args: &[&str], cache: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoflow")).args(args).env(CACHE_ENV, cache).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn pressure_of_full_shift() {
    let cache = tempfile::tempdir().unwrap();
    let sys = config("full2.cfg");
    let o = thermoflow(&["pressure", "--system", sys.to_str().unwrap()], cache.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let p: f64 = out.lines().next().unwrap().strip_prefix("pressure ").unwrap().parse().unwrap();
    assert!((p - 2f64.ln()).abs() < 1e-12, "{out}");
}

#[test]
fn prime_orbit_count_constant_roof() {
    let cache = tempfile::tempdir().unwrap();
    let sys = config("full2.cfg");
    let o = thermoflow(&["count", "--system", sys.to_str().unwrap(), "--roof", "const1", "--lambda", "3.5"], cache.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    // Binary necklaces of length 1, 2, 3: 2 + 1 + 2.
    assert!(out.contains("3.5,5,"), "{out}");
    assert!(out.contains("lattice roof"), "{out}");
}

#[test]
fn exit_codes() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    let text = std::fs::read_to_string(config("full2.cfg")).unwrap().replace("alphabet = 2", "alphabet = 2\ncolour = red");
    std::fs::write(&bad, text).unwrap();
    let o = thermoflow(&["pressure", "--system", bad.to_str().unwrap()], cache.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let sys = config("full2.cfg");
    let o = thermoflow(&["dolgopyat", "--system", sys.to_str().unwrap(), "--roof", "const1", "--b", "20"], cache.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("DegenerateRoof"));

    let o = thermoflow(&["pressure", "--system", sys.to_str().unwrap(), "--roof", "missing"], cache.path());
    assert_eq!(o.status.code(), Some(2));
    let o = thermoflow(&["no-such-command"], cache.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cache_keys() {
    let a = cache_key(&["version = 1", "Pressure { depth: 10 }"]);
    assert_eq!(a, cache_key(&["version = 1", "Pressure { depth: 10 }"]));
    assert_ne!(a, cache_key(&["version = 1", "Pressure { depth: 11 }"]));
    assert_ne!(cache_key(&["ab", "c"]), cache_key(&["a", "bc"]));
}

#[test]
fn whitespace_edits_hit_the_cache() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("full2.cfg")).unwrap();
    let a = dir.path().join("a.cfg");
    let b = dir.path().join("b.cfg");
    std::fs::write(&a, &text).unwrap();
    std::fs::write(&b, text.replace("1 1 ; 1 1", "1  1;1 1") + "\n# extra comment\n").unwrap();
    let args = |p: &PathBuf| vec!["pressure".to_string(), "--system".into(), p.to_str().unwrap().into(), "--depth".into(), "6".into()];
    let run = |p: &PathBuf| {
        let v = args(p);
        thermoflow(&v.iter().map(String::as_str).collect::<Vec<_>>(), cache.path())
    };
    assert_eq!(run(&a).status.code(), Some(0));
    let entries = || std::fs::read_dir(cache.path()).unwrap().count();
    assert_eq!(entries(), 1);
    let o = run(&b);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(entries(), 1);
    std::fs::write(&b, text.replace("potential zero = const 0", "potential zero = const 0.5")).unwrap();
    assert_eq!(run(&b).status.code(), Some(0));
    assert_eq!(entries(), 2);
}

#[test]
fn correlation_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sys = config("full2.cfg");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_thermoflow"))
            .args(["corr", "--system", sys.to_str().unwrap(), "--roof", "quad", "--obs-a", "eh", "--obs-b", "ehc"])
            .args(["--len", "20000", "--seed", "5", "--t-max", "4", "--no-cache", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    assert!(a.starts_with("t,c_re,c_im,abs_c,stderr\n"));
    assert_eq!(a.lines().count(), 1 + 9);
}

#[test]
fn selftest_passes() {
    let cache = tempfile::tempdir().unwrap();
    let o = thermoflow(&["selftest"], cache.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn value_lists_and_ranges() {
    assert_eq!(thermoflow_cli::parse_values("--b", "1,2.5").unwrap(), vec![1.0, 2.5]);
    assert_eq!(thermoflow_cli::parse_values("--b", "0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(thermoflow_cli::parse_values("--b", "0:1").unwrap_err().key, "--b");
    assert!(thermoflow_cli::parse_values("--b", "x").is_err());
}
