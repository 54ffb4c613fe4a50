use std::path::Path;
use std::process::{Command, Output};

fn twistlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistlab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

const SMALL: &str = "\
precision_bits = 128
cache_dir = cache
checks = invariants, sum-lemma, twist-decomp, expansion, tau-search
threads = THREADS

[invariants]
functions = zeta2, level11
[sum-lemma]
pairs = zeta2:2, zeta_chi3:6, level11:11
points = 3, 1.8+3i
[twist-decomp]
functions = zeta_chi3
primes = 2, 3
points = 2
[expansion]
functions = zeta2
nu_max = 3
[tau-search]
moduli = 6
k = 20
shifts = 0, 2
";

#[test]
fn empty_campaign_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.conf", "# nothing to do\nchecks =\n");
    let o = twistlab(dir.path(), &["campaign", "--config", &cfg, "--out", "rep"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("rep.csv")).unwrap();
    assert_eq!(
        csv,
        "# twistlab report precision_bits=256\ncheck,fname,q_or_p,s_re,s_im,n_terms,residual,tail_radius,pass\n"
    );
    assert!(stdout(&o).contains("overall: PASS (0 rows)"));
}

#[test]
fn config_errors_name_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "checks = sum-lemma\n\n[sum-lemma]\npairs = zeta2:2, zeta5:5\n");
    let o = twistlab(dir.path(), &["campaign", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 4: key `pairs`: unknown L-function `zeta5`"), "{err}");

    let cfg = write(dir.path(), "bad2.conf", "precision_bits = 128\nchecks = gk\nverbose = yes\n");
    let err = stderr(&twistlab(dir.path(), &["campaign", "--config", &cfg]));
    assert!(err.contains("line 3: unknown key `verbose`"), "{err}");
}

#[test]
fn campaign_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.conf", &SMALL.replace("THREADS", "1"));
    let four = write(dir.path(), "four.conf", &SMALL.replace("THREADS", "4"));
    let a = twistlab(dir.path(), &["campaign", "--config", &one, "--out", "a"]);
    assert_eq!(a.status.code(), Some(0), "{}{}", stdout(&a), stderr(&a));
    // second run reads the expansion tables back from the cache
    assert!(dir.path().join("cache/zeta2-n3-p128.exptable").exists());
    let b = twistlab(dir.path(), &["campaign", "--config", &four, "--out", "b"]);
    assert_eq!(b.status.code(), Some(0));
    for ext in ["csv", "txt"] {
        let x = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let y = std::fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(x, y, "{ext} differs");
    }
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2 + 6 + 2 + 1 + 2);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    assert!(rows[2].starts_with("sum-lemma,zeta2,2,3,0,"));
    assert!(rows.iter().all(|r| r.split(',').count() == 9));
}

#[test]
fn failing_rows_give_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tight.conf",
        "precision_bits = 128\nchecks = sum-lemma\n[sum-lemma]\npairs = zeta2:6\npoints = 2\nresidual_tol = 0\n",
    );
    let o = twistlab(dir.path(), &["campaign", "--config", &cfg, "--out", "t"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL sum-lemma: 0/1"));
}

#[test]
fn single_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = twistlab(dir.path(), &["check", "sum-lemma", "--name", "zeta2", "--q", "2", "--s", "3,0"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "# twistlab check precision_bits=256");
    assert!(lines[2].starts_with("sum-lemma,zeta2,2,3,0,") && lines[2].ends_with(",true"));

    let o = twistlab(dir.path(), &["check", "gk", "--name", "zeta_chi3", "--q", "3", "--s", "2+1i", "--tau", "1000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("gk,zeta_chi3,3,2,1001,"));

    // direct truncation cannot certify the tail at sigma = 2
    let o = twistlab(
        dir.path(),
        &["check", "twist-decomp", "--name", "zeta2", "--p", "3", "--s", "2,0", "--direct", "1000"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).trim_end().ends_with(",false"));

    let o = twistlab(dir.path(), &["--precision", "128", "invariants", "zeta_chi3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("# twistlab invariants precision_bits=128\n"));
    assert!(out.contains("conductor = 3.0"));

    let o = twistlab(dir.path(), &["invariants", "zeta7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tau_and_expansion_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = twistlab(dir.path(), &["tau-search", "--q", "6", "--eps", "0,1/3", "--k", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("pass = true"));

    let o = twistlab(dir.path(), &["expansion", "--name", "zeta2", "--nu-max", "2", "--emit", "cache", "--out", "t.exptable"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("t.exptable")).unwrap();
    assert!(text.starts_with("# exptable v1\n"));

    let o = twistlab(dir.path(), &["expansion", "--name", "zeta2", "--nu-max", "1"]);
    let out = stdout(&o);
    // R_1 = 2 s^2 for zeta^2
    assert!(out.lines().any(|l| l.starts_with("R,1,2,2.0")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("Q,1,2,-1.0")), "{out}");
}

#[test]
fn probe_and_extraction_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = twistlab(
        dir.path(),
        &["--precision", "128", "probe-theorem2", "--name", "zeta2", "--alpha", "1/3", "--K", "2", "--t-max", "20", "--points", "3"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("# growth_slope = "));

    let o = twistlab(
        dir.path(),
        &["--precision", "128", "extract-euler", "--name", "zeta_chi3", "--p", "3", "--m", "1", "--s", "2,0", "--grid", "8", "--k", "50"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let err: f64 = out.lines().find_map(|l| l.strip_prefix("error = ")).unwrap().parse().unwrap();
    assert!(err < 5e-2, "{out}");
}
