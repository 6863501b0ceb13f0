use std::fs;
use std::path::Path;

use rrif_auth::cli::run;

fn rrif(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rrif").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_is_reproducible_and_labels_roles() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let (code, _, err) = rrif(&["gen", "--out", p(d), "--seed", "42", "--duration-s", "20"]);
        assert_eq!(code, 0, "{err}");
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 13);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert_eq!(manifest.matches("\"role\": \"unknown\"").count(), 2);
    assert_eq!(manifest.matches("\"role\": \"enrolled\"").count(), 10);

    let (code, _, _) = rrif(&["gen", "--out", p(&dir.path().join("c")), "--enrolled", "0"]);
    assert_eq!(code, 1);
}

#[test]
fn enroll_auth_eval_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let fresh = dir.path().join("fresh");
    let db = dir.path().join("db.json");
    let manifest = data.join("manifest.json");

    let gen = ["--seed", "5", "--enrolled", "4", "--unknown", "1"];
    assert_eq!(rrif(&[&["gen", "--out", p(&data)], &gen[..], &["--duration-s", "80"]].concat()).0, 0);
    assert_eq!(
        rrif(&[&["gen", "--out", p(&fresh)], &gen[..], &["--session", "1", "--duration-s", "15"]].concat()).0,
        0
    );

    let (code, out, err) = rrif(&["enroll", "--db", p(&db), "--manifest", p(&manifest), "--enrolled-at", "1"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.matches("enrolled id=").count(), 4);
    assert!(out.starts_with("# frame_len=220 train_window_s=50 test_window_s=15"));

    // Enrolling again is a domain error and leaves the database untouched.
    let before = fs::read(&db).unwrap();
    let (code, _, err) = rrif(&["enroll", "--db", p(&db), p(&data.join("S01.csv"))]);
    assert_eq!(code, 1);
    assert!(err.contains("enroll") && err.contains("S01"));
    assert_eq!(fs::read(&db).unwrap(), before);

    let (code, out, _) = rrif(&["auth", "--db", p(&db), p(&fresh.join("S02.csv"))]);
    assert_eq!(code, 0);
    assert!(out.starts_with("decision=Known:S02 score="), "{out}");
    assert!(out.trim_end().ends_with("apr=1"));

    let (code, out, _) = rrif(&["auth", "--db", p(&db), "--gate-ucl", "0", p(&fresh.join("S02.csv"))]);
    assert_eq!(code, 0);
    assert_eq!(out, "decision=Rejected apr=0\n");

    let (code, out, _) = rrif(&["eval", "--db", p(&db), "--manifest", p(&manifest), "--trials", "40"]);
    assert_eq!(code, 0);
    let summary = out.lines().find(|l| l.starts_with("accuracy=")).unwrap();
    assert!(summary.contains("N=40"), "{summary}");
    let cells: usize = out
        .lines()
        .filter(|l| l.starts_with("Known") || l.starts_with("Unknown"))
        .flat_map(|l| l.split_whitespace().filter_map(|t| t.parse::<usize>().ok()))
        .sum();
    let rejected: usize = out
        .split("rejected=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .unwrap();
    assert_eq!(cells + rejected, 40);

    let out_dir = dir.path().join("sweep");
    let sweep = ["sweep", "--db", p(&db), "--manifest", p(&manifest), "--grid", "0:0.01:7", "--out", p(&out_dir)];
    let (code, _, err) = rrif(&sweep);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("ucl,phi,N,accuracy,op"));
    assert_eq!(csv.lines().count(), 8);
    rrif(&sweep);
    assert_eq!(fs::read_to_string(out_dir.join("sweep.csv")).unwrap(), csv);

    let (code, out, _) = rrif(&["sweep", "--db", p(&db), "--manifest", p(&manifest), "--grid-auto", "--grid-steps", "12"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l.starts_with("best ucl=")));

    assert_eq!(rrif(&["sweep", "--db", p(&db), "--manifest", p(&manifest), "--grid", "1:2"]).0, 2);
    assert_eq!(rrif(&["sweep", "--db", p(&db), "--manifest", p(&manifest), "--grid", "0:1:3", "--grid-auto"]).0, 2);
}

#[test]
fn rank_bench_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(rrif(&["gen", "--out", p(&data), "--enrolled", "3", "--unknown", "0", "--duration-s", "50"]).0, 0);
    let manifest = data.join("manifest.json");

    let out_dir = dir.path().join("out");
    let (code, _, err) = rrif(&["rank", "--manifest", p(&manifest), "--k", "5", "--out", p(&out_dir)]);
    assert_eq!(code, 0, "{err}");
    let rank = fs::read_to_string(out_dir.join("rank.csv")).unwrap();
    assert_eq!(rank.lines().next(), Some("position,mi_bits"));
    assert_eq!(rank.lines().count(), 6);

    let (code, out, err) = rrif(&["bench", "--manifest", p(&manifest), "--max-pairs", "300", "--out", p(&out_dir)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("RMSE (mV)") && out.contains("Training Time (s)"));
    let bench = fs::read_to_string(out_dir.join("bench.csv")).unwrap();
    assert!(bench.starts_with("metric,dt,svr\nrmse_mv,"));

    let dump = dir.path().join("frames.csv");
    let (code, _, _) = rrif(&["frames", p(&data.join("S01.csv")), "--dump", p(&dump), "--frame-len", "50"]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&dump).unwrap();
    assert!(text.lines().count() > 30);
    assert!(text.lines().all(|l| l.split(',').count() == 50));
}

#[test]
fn missing_db_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = rrif(&["auth", "--db", p(&dir.path().join("nope.json")), "x.csv"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error: auth:"));
    assert_eq!(rrif(&["auth", "x.csv"]).0, 2);
}
