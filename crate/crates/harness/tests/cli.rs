use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn soficlab(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soficlab")).args(args).env("SOFICLAB_CACHE_DIR", cache).output().expect("binary runs")
}

const EQUALITY: &str = r#"
id = "eq"
kind = "equality-check"
d_list = [2, 4, 6]

[group]
family = "cyclic"
n = 2

[sofic]
quotient = "regular"

[action]
type = "algebraic"
f = "2 + t"
q = 3

[window]
delta = "1"

[entropy]
eps = "1/10"
"#;

const CURVE: &str = r#"
id = "curve"
kind = "entropy-curve"
d_list = [4, 6]

[group]
family = "integers"

[sofic]
quotient = "cyclic"

[action]
type = "algebraic"
f = "t - 2"
q = 32
tol = "1/16"

[window]
f_set = ["e", "t"]
delta = "1/2"

[entropy]
eps = "1/8"
mode = "greedy"
"#;

fn write_spec(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn records(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_clock_ms");
            v
        })
        .collect()
}

#[test]
fn equality_check_reproduces_half_log_three() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "eq.toml", EQUALITY);
    let out = soficlab(&dir.path().join("cache"), &["run", &spec]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("results/eq.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let target = 0.5 * 3f64.ln();
    let mut rows = 0;
    for row in rdr.records() {
        let row = row.unwrap();
        for name in ["h_top", "h_meas", "fk_det"] {
            let v: f64 = row[col(name)].parse().unwrap();
            assert!((v - target).abs() <= 1e-9, "{name} = {v}");
        }
        assert_eq!(&row[col("equal")], "true");
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn invalid_spec_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CURVE.replace("f_set = [\"e\", \"t\"]", "f_set = [\"e\", \"t^5\"]");
    let spec = write_spec(dir.path(), "bad.toml", &bad);
    let out = soficlab(&dir.path().join("cache"), &["run", &spec]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the sofic support"));
    assert!(!dir.path().join("results").exists());
    assert!(!dir.path().join("cache").exists());

    let unknown = write_spec(dir.path(), "unknown.toml", &CURVE.replace("[entropy]", "[entropy]\nepsilon = \"1\""));
    assert_eq!(soficlab(&dir.path().join("cache"), &["run", &unknown]).status.code(), Some(2));
    assert!(!dir.path().join("results").exists());
}

#[test]
fn budget_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "b.toml", &CURVE.replace("mode = \"greedy\"", "mode = \"greedy\"\nbudget = 10"));
    let out = soficlab(&dir.path().join("cache"), &["run", &spec]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("results").exists());
}

#[test]
fn identical_runs_give_identical_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "curve.toml", CURVE);
    let cache = dir.path().join("cache");
    assert!(soficlab(&cache, &["run", &spec]).status.success());
    let first = fs::read(dir.path().join("results/curve.csv")).unwrap();
    assert!(soficlab(&cache, &["run", &spec]).status.success());
    let recs = records(&dir.path().join("results/curve.jsonl"));
    assert_eq!(recs.len(), 4);
    assert_eq!(recs[..2], recs[2..]);
    assert_eq!(first, fs::read(dir.path().join("results/curve.csv")).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let text = r#"
id = "bat"
kind = "convergence-battery"
d_list = [16]
seeds = [3]

[battery]
scenarios = ["bernoulli", "negation"]
"#;
    let mut outs = vec![];
    for threads in ["1", "4"] {
        let dir = tempfile::tempdir().unwrap();
        let spec = write_spec(dir.path(), "bat.toml", text);
        let out = Command::new(env!("CARGO_BIN_EXE_soficlab"))
            .args(["run", &spec])
            .env("SOFICLAB_CACHE_DIR", dir.path().join("cache"))
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outs.push(records(&dir.path().join("results/bat.jsonl")));
    }
    assert_eq!(outs[0].len(), 8);
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn record_cell_spec_reruns_in_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "curve.toml", CURVE);
    let cache = dir.path().join("cache");
    assert!(soficlab(&cache, &["run", &spec]).status.success());
    let recs = records(&dir.path().join("results/curve.jsonl"));
    let cell: serde_json::Value = recs[1]["cell_spec"].clone();
    let mut cell_toml: toml::Value = serde_json::from_value(cell).unwrap();
    cell_toml.as_table_mut().unwrap().insert("id".into(), "cell".into());
    let single = write_spec(dir.path(), "cell.toml", &toml::to_string(&cell_toml).unwrap());
    assert!(soficlab(&cache, &["run", &single]).status.success());
    let again = records(&dir.path().join("results/cell.jsonl"));
    assert_eq!(again.len(), 1);
    assert_eq!(again[0]["stats"], recs[1]["stats"]);
    assert_eq!(again[0]["d"], recs[1]["d"]);
}

#[test]
fn cache_list_verify_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = soficlab(&cache, &["cache", "list"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);

    let spec = write_spec(dir.path(), "eq.toml", EQUALITY);
    assert!(soficlab(&cache, &["run", &spec]).status.success());
    let listed = String::from_utf8_lossy(&soficlab(&cache, &["cache", "list"]).stdout).to_string();
    assert_eq!(listed.lines().count(), 4);
    assert!(soficlab(&cache, &["cache", "verify"]).status.success());

    let mut entries: Vec<_> = fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    let victim = &entries[0];
    let key = victim.file_stem().unwrap().to_str().unwrap().to_string();
    let mut bytes = fs::read(victim).unwrap();
    let at = bytes.windows(13).position(|w| w == b"approximation").unwrap();
    let digit = at + bytes[at..].iter().position(|b| b.is_ascii_digit()).unwrap();
    bytes[digit] = if bytes[digit] == b'0' { b'1' } else { b'0' };
    fs::write(victim, bytes).unwrap();
    let out = soficlab(&cache, &["cache", "verify"]);
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains(&key)), "{text}");

    assert!(soficlab(&cache, &["cache", "clear"]).status.success());
    assert_eq!(String::from_utf8_lossy(&soficlab(&cache, &["cache", "list"]).stdout).lines().count(), 1);
}

#[test]
fn plot_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "eq.toml", EQUALITY);
    let cache = dir.path().join("cache");
    assert!(soficlab(&cache, &["run", &spec]).status.success());
    let svg = dir.path().join("eq.svg");
    let out = soficlab(&cache, &["plot", dir.path().join("results/eq.jsonl").to_str().unwrap(), svg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("polyline") && text.contains("h_top"));
}
