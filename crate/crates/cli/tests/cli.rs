use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lattice-hasimoto"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_documents_every_flag() {
    let cases: &[(&str, &[&str])] = &[
        ("sample", &["--measure", "--beta", "--half-width", "-K", "--out", "--seed", "--config", "--workers", "--log-level"]),
        ("transform", &["--in", "--out", "--to", "--method", "--haar"]),
        ("evolve", &["--model", "--in", "--out", "--tfinal", "--samples", "--boundary", "--diagnostics", "--rtol", "--atol", "--max-step"]),
        ("verify", &["--suite", "--radius", "--samples", "--tol", "--out"]),
        ("invariance", &["--measure", "--beta", "-K", "-N", "--members", "--tfinal", "--times", "--out", "--rtol"]),
        ("converge", &["--beta", "--Ks", "--tfinal", "--repeats", "--out"]),
        ("probe", &["--beta", "-K", "--tfinal", "--perturbation", "--threshold", "--out"]),
        ("spectrum", &["--beta", "--lmax"]),
    ];
    for (sub, flags) in cases {
        let o = run(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        let text = String::from_utf8(o.stdout).unwrap();
        for f in *flags {
            assert!(text.contains(f), "{sub} --help lacks {f}:\n{text}");
        }
    }
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn version_embeds_table_hash() {
    let o = run(&["--version"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let hash = text.split("bracket tables ").nth(1).unwrap().trim().trim_end_matches(')');
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn usage_errors_exit_two() {
    let o = run(&["sample", "--measure", "wn", "--beta", "0"]);
    assert_eq!(code(&o), 2);
    let o = run(&["sample", "--measure", "wn", "--beta", "1", "--frobnicate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(code(&run(&["nonsense"])), 2);
    assert_eq!(code(&run(&["invariance", "--measure", "wn", "--beta", "1", "--times", "0,2", "--seed", "1"])), 2);
}

#[test]
fn verify_jacobi_passes() {
    let o = run(&["verify", "--suite", "jacobi"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["jacobi_alpha"]["pass"], true);
    assert_eq!(v["jacobi_standard"]["triples"], 560);
    let o = run(&["verify", "--suite", "hamilton", "--radius", "4"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn evolve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.jsonl");
    let g = dir.path().join("g.jsonl");
    let csv = dir.path().join("d.csv");
    assert_eq!(code(&run(&["sample", "--measure", "wn", "--beta", "1", "-K", "8", "--seed", "3", "--out", p(&f)])), 0);
    let args = ["evolve", "--model", "al", "--tfinal", "1", "--in", p(&f), "--out", p(&g), "--seed", "3"];
    assert_eq!(code(&run(&args)), 0);
    let first = std::fs::read(&g).unwrap();
    assert_eq!(code(&run(&args)), 0);
    assert_eq!(first, std::fs::read(&g).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 21);

    let mut with_csv = args.to_vec();
    with_csv.extend(["--diagnostics", p(&csv)]);
    assert_eq!(code(&run(&with_csv)), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,name,value\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 21);
}

#[test]
fn omitted_seed_is_printed_and_replays() {
    let o = run(&["sample", "--measure", "gibbs", "--beta", "2", "-K", "3"]);
    assert_eq!(code(&o), 0);
    let err = stderr(&o);
    let seed = err.lines().find_map(|l| l.strip_prefix("seed: ")).expect("seed printed").trim().to_string();
    let again = run(&["sample", "--measure", "gibbs", "--beta", "2", "-K", "3", "--seed", &seed]);
    assert_eq!(o.stdout, again.stdout);
    assert!(!stderr(&again).contains("seed:"));
}

#[test]
fn transform_round_trip_and_kind_errors() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.jsonl");
    let a = dir.path().join("a.jsonl");
    let s2 = dir.path().join("s2.jsonl");
    assert_eq!(code(&run(&["sample", "--measure", "gibbs", "--beta", "1", "-K", "5", "--seed", "9", "--out", p(&s)])), 0);
    assert_eq!(code(&run(&["transform", "--in", p(&s), "--to", "alpha", "--out", p(&a)])), 0);
    assert_eq!(code(&run(&["transform", "--in", p(&a), "--to", "spins", "--out", p(&s2)])), 0);
    let read = |path: &Path| -> Vec<f64> {
        let v: serde_json::Value = serde_json::from_str(std::fs::read_to_string(path).unwrap().trim()).unwrap();
        v["values"].as_array().unwrap().iter().flat_map(|x| x.as_array().unwrap().iter().map(|c| c.as_f64().unwrap())).collect()
    };
    // the frame through the first spin differs from the identity used on the way back
    let (x, y) = (read(&s), read(&s2));
    assert_eq!(x.len(), y.len());
    let dots = |v: &[f64]| -> Vec<f64> { v.chunks(3).collect::<Vec<_>>().windows(2).map(|w| w[0].iter().zip(w[1]).map(|(p, q)| p * q).sum()).collect() };
    for (d1, d2) in dots(&x).iter().zip(dots(&y)) {
        assert!((d1 - d2).abs() < 1e-12);
    }
    assert_eq!(code(&run(&["transform", "--in", p(&a), "--to", "alpha"])), 2);
    assert_eq!(code(&run(&["transform", "--in", p(&a), "--to", "spins", "--method", "angles"])), 2);
    assert_eq!(code(&run(&["transform", "--in", "/nonexistent/x.jsonl", "--to", "alpha"])), 2);
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.jsonl");
    std::fs::write(&f, "{\"t\":0,\"kind\":\"spin\",\"lo\":0,\"values\":[[0,0,1],[0,0,-1],[1,0,0]]}\n").unwrap();
    let o = run(&["evolve", "--model", "lhm", "--in", p(&f), "--tfinal", "1"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(code(&run(&["evolve", "--model", "al", "--in", p(&f), "--tfinal", "1"])), 2);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[global]\nseed = 17\n\n[sample]\nmeasure = \"wn\"\nbeta = 0.0\nhalf-width = 4\n").unwrap();
    let direct = run(&["sample", "--measure", "wn", "--beta", "2", "-K", "4", "--seed", "17"]);
    assert_eq!(code(&direct), 0);
    let merged = run(&["sample", "--beta", "2", "--config", p(&cfg)]);
    assert_eq!(code(&merged), 0, "{}", stderr(&merged));
    assert_eq!(direct.stdout, merged.stdout);
    // the config's beta = 0 applies when the flag is absent
    assert_eq!(code(&run(&["sample", "--config", p(&cfg)])), 2);
    std::fs::write(&cfg, "[sample]\nno-such-flag = 1\n").unwrap();
    assert_eq!(code(&run(&["sample", "--measure", "wn", "--beta", "1", "--config", p(&cfg)])), 2);
    std::fs::write(&cfg, "[invariance]\ntimes = [0.0, 0.5]\nmembers = 50\nhalf-width = 6\ntfinal = 0.5\n").unwrap();
    let o = run(&["invariance", "--measure", "wn", "--beta", "1", "--seed", "4", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n_ensembles"], 50);
    assert_eq!(v["window"][1], 6);
}

#[test]
fn experiments_report_json_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&[
        "invariance", "--measure", "gibbs", "--beta", "1", "-K", "8", "-N", "300", "--tfinal", "0.5", "--times", "0,0.5",
        "--seed", "2", "--out", p(&out), "--workers", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for verdict in v["verdicts"].as_array().unwrap() {
        for key in ["criterion", "value", "target", "tolerance", "pass"] {
            assert!(verdict.get(key).is_some());
        }
    }
    let o = run(&["converge", "--beta", "1", "--Ks", "8,16,32", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["strictly_decreasing"], true);
    let o = run(&["converge", "--beta", "1", "--Ks", "8,16,32", "--seed", "1", "--repeats", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["probe", "--beta", "1", "-K", "32", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // an interior this close to the edge sees the perturbation
    let o = run(&["probe", "--beta", "1", "-K", "9", "--seed", "1", "--threshold", "1e-30"]);
    assert_eq!(code(&o), 1);
    let o = run(&["spectrum", "--beta", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["eigenvalues"][1].as_f64().unwrap() - 0.5).abs() < 1e-8);
}
