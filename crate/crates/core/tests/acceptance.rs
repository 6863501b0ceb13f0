//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rrif_auth::authcore::{
    compute_ucl, enroll, extract_frames, load_db, save_db, AuthParams, EnrollParams, FrameParams,
    ReferenceDb,
};
use rrif_auth::beat::{detect_rpeaks, DetectParams};
use rrif_auth::cohort::{generate_cohort, CohortSpec, Role};
use rrif_auth::evalx::{
    accuracy, linear_grid, overall_performance, ConfusionMatrix, LabeledRecord, PreparedPool,
    DEFAULT_AUTO_GRID_POINTS, DEFAULT_TRIALS,
};
use rrif_auth::infotheory::{
    conditional_entropy, entropy, mutual_information, Histogram, JointHistogram,
};
use rrif_auth::learners::bench::compare;
use rrif_auth::learners::{
    predict_dt, train_dt, train_svm_binary, train_svr, DtParams, FeatureMap, KernelParams, Node,
};
use rrif_auth::signal::{preprocess, synth_ecg, SubjectProfile};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget_s: u64) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= Duration::from_secs(budget_s), || {
        format!("took {:.1} s, budget {budget_s} s", t.as_secs_f64())
    })
}

fn op_arithmetic() -> Check {
    let a = overall_performance(100, 100, 0.81).map_err(|e| e.to_string())?;
    ensure(a == 0.81, || format!("(100,100,0.81) -> {a}"))?;
    let b = overall_performance(92, 100, 88.0 / 92.0).map_err(|e| e.to_string())?;
    ensure((b - 0.88).abs() <= 0.005, || format!("(92,100,88/92) -> {b}"))?;
    let c = overall_performance(61, 70, 0.95).map_err(|e| e.to_string())?;
    ensure((c - 0.8279).abs() <= 0.0005, || format!("(61,70,0.95) -> {c}"))?;
    Ok(format!("{a}, {b:.4}, {c:.4}"))
}

fn matrix_arithmetic() -> Check {
    let first = ConfusionMatrix {
        kk_correct: 72,
        kk_wrong: 0,
        ku: 10,
        uk: 9,
        uu: 9,
        rejected: 0,
    };
    let a = accuracy(&first).value;
    ensure(a == 0.81, || format!("72+9 of 100 -> {a}"))?;
    let second = ConfusionMatrix {
        kk_correct: 79,
        kk_wrong: 0,
        ku: 3,
        uk: 1,
        uu: 9,
        rejected: 8,
    };
    ensure(second.accepted() == 92, || "second matrix should accept 92".into())?;
    let b = accuracy(&second).value;
    ensure((b - 0.956522).abs() <= 1e-6, || format!("79+9 of 92 -> {b}"))?;
    Ok(format!("{a}, {b:.6}"))
}

fn ucl_definition() -> Check {
    let u = compute_ucl(&[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure(u == 5.0, || format!("ucl(1,2,3) = {u}"))?;
    let c = compute_ucl(&[0.37; 9]).map_err(|e| e.to_string())?;
    ensure(c == 0.37, || format!("constant list -> {c}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..60);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.01)).collect();
        let k: f64 = rng.random_range(0.01..100.0);
        let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
        let base = compute_ucl(&xs).map_err(|e| e.to_string())?;
        let got = compute_ucl(&scaled).map_err(|e| e.to_string())?;
        worst = worst.max((got - k * base).abs());
    }
    ensure(worst <= 1e-12, || format!("scaling error {worst:e}"))?;
    Ok(format!("scaling error {worst:.1e} over 100 lists"))
}

const COHORT_SEED: u64 = 2024;

fn cohort_pool(seed: u64) -> Result<(ReferenceDb, Vec<LabeledRecord>), String> {
    let cohort = generate_cohort(&CohortSpec::new(10, 2, seed)).map_err(|e| e.to_string())?;
    let mut db = ReferenceDb::default();
    let mut pool = Vec::new();
    for m in &cohort {
        let probes = m.record(60.0, 360.0, 1).map_err(|e| e.to_string())?.split(15.0);
        match m.role {
            Role::Enrolled => {
                let rec = m.record(50.0, 360.0, 0).map_err(|e| e.to_string())?;
                enroll(&mut db, &m.id, &rec, &EnrollParams::default()).map_err(|e| e.to_string())?;
                pool.extend(probes.into_iter().map(|r| LabeledRecord::enrolled(r, &m.id)));
            }
            Role::Unknown => pool.extend(probes.into_iter().map(LabeledRecord::unknown)),
        }
    }
    Ok((db, pool))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let (db, pool) = cohort_pool(COHORT_SEED)?;
    let prepared = PreparedPool::new(&db, &pool, &AuthParams::default()).map_err(|e| e.to_string())?;
    let grid = prepared
        .auto_grid(&db, DEFAULT_AUTO_GRID_POINTS)
        .map_err(|e| e.to_string())?;
    let sweep = prepared
        .sweep(&grid, DEFAULT_TRIALS, COHORT_SEED)
        .map_err(|e| e.to_string())?;
    let best = sweep.best();
    let m = best.matrix;
    ensure(m.uu + m.ku > 0, || "no unknown probe was accepted at the best UCL".into())?;
    ensure(best.accuracy >= 0.90, || format!("accuracy {} < 0.90", best.accuracy))?;
    ensure(best.op >= 0.80, || format!("OP {} < 0.80", best.op))?;
    within_budget(start, 60)?;
    Ok(format!(
        "best ucl={:.5} mV² phi={}/{} accuracy={:.3} OP={:.3} ({:.1} s)",
        best.ucl,
        best.phi,
        best.n,
        best.accuracy,
        best.op,
        start.elapsed().as_secs_f64()
    ))
}

fn sweep_monotone() -> Check {
    let start = Instant::now();
    let (db, pool) = cohort_pool(COHORT_SEED + 1)?;
    let prepared = PreparedPool::new(&db, &pool, &AuthParams::default()).map_err(|e| e.to_string())?;
    let hi = 2.0 * db.max_ucl().unwrap_or(1.0);
    let grids = [
        linear_grid(0.0, hi, 40).map_err(|e| e.to_string())?,
        prepared.auto_grid(&db, 40).map_err(|e| e.to_string())?,
    ];
    let mut violations = 0;
    for (k, grid) in grids.iter().enumerate() {
        let sweep = prepared.sweep(grid, DEFAULT_TRIALS, 11 + k as u64).map_err(|e| e.to_string())?;
        violations += sweep.points.windows(2).filter(|w| w[1].phi < w[0].phi).count();
    }
    ensure(violations == 0, || format!("{violations} decreases in phi"))?;
    within_budget(start, 60)?;
    Ok("0 violations over two 40-point grids".into())
}

/// `Σ_x Σ_y p(x,y) log2(p(x,y) / (p(x) p(y)))` straight from the counts.
fn mi_double_sum(counts: &[Vec<u64>]) -> f64 {
    let n: u64 = counts.iter().flatten().sum();
    let n = n as f64;
    let px: Vec<f64> = counts.iter().map(|r| r.iter().sum::<u64>() as f64 / n).collect();
    let py: Vec<f64> = (0..counts[0].len())
        .map(|j| counts.iter().map(|r| r[j]).sum::<u64>() as f64 / n)
        .collect();
    let mut s = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let p = c as f64 / n;
                s += p * (p / (px[i] * py[j])).log2();
            }
        }
    }
    s
}

fn information_theory() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_self: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(10..400);
        let bins = rng.random_range(2..20);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let h = entropy(&Histogram::from_values(&xs, bins).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let i = mutual_information(&xs, &xs, bins, bins).map_err(|e| e.to_string())?;
        worst_self = worst_self.max((i - h).abs());
    }
    ensure(worst_self <= 1e-9, || format!("|I(x;x) - H(x)| = {worst_self:e}"))?;

    let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let indep = mutual_information(&xs, &ys, 8, 8).map_err(|e| e.to_string())?;
    ensure(indep <= 0.02, || format!("independent MI {indep}"))?;

    let mut worst_sum: f64 = 0.0;
    for _ in 0..20 {
        let (bx, by) = (rng.random_range(1..9), rng.random_range(1..9));
        let counts: Vec<Vec<u64>> = (0..bx)
            .map(|_| (0..by).map(|_| rng.random_range(0..30)).collect())
            .collect();
        if counts.iter().flatten().all(|&c| c == 0) {
            continue;
        }
        let joint = JointHistogram::from_counts(counts.clone()).map_err(|e| e.to_string())?;
        let via_entropies = entropy(&joint.marginal_x()).map_err(|e| e.to_string())?
            - conditional_entropy(&joint).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((mi_double_sum(&counts) - via_entropies).abs());
    }
    ensure(worst_sum <= 1e-9, || format!("double sum vs H - H(X|Y): {worst_sum:e}"))?;
    Ok(format!(
        "self {worst_self:.1e}, independent {indep:.4} bits, double sum {worst_sum:.1e}"
    ))
}

/// Exhaustive root split: every feature, every midpoint between distinct
/// values, SSE recomputed from scratch. Returns the gains of all candidates in
/// (feature, threshold) order.
fn brute_force_splits(x: &[Vec<f64>], y: &[f64]) -> Vec<(usize, f64, f64)> {
    let sse = |idx: &[usize]| {
        let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum::<f64>()
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let parent = sse(&all);
    let mut out = Vec::new();
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[i][f] <= t);
            out.push((f, t, parent - sse(&l) - sse(&r)));
        }
    }
    out
}

fn tree_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = DtParams {
        min_leaf_size: 1,
        max_depth: 64,
    };
    let mut near_ties = 0;
    for case in 0..30 {
        let n = rng.random_range(2..=64);
        let d = rng.random_range(1..=4);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0..1000) as f64 / 10.0).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut uniq = x.clone();
        uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        uniq.dedup();
        let tree = train_dt(&x, &y, params).map_err(|e| e.to_string())?;

        if uniq.len() == n {
            let mut sq = 0.0;
            for (r, t) in x.iter().zip(&y) {
                let p = predict_dt(&tree, r).map_err(|e| e.to_string())?;
                sq += (p - t) * (p - t);
            }
            let rmse = (sq / n as f64).sqrt();
            ensure(rmse == 0.0, || format!("case {case}: training RMSE {rmse:e}"))?;
        }

        let cands = brute_force_splits(&x, &y);
        let best_gain = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        let Node::Split { feature, threshold, .. } = tree.nodes()[0] else {
            ensure(cands.is_empty() || best_gain <= 0.0, || format!("case {case}: root is a leaf"))?;
            continue;
        };
        let tol = 1e-9 * best_gain.abs().max(1e-12);
        let expected = cands
            .iter()
            .find(|c| c.2 >= best_gain - tol)
            .expect("a best split exists");
        if (feature, threshold) != (expected.0, expected.1) {
            let theirs = cands
                .iter()
                .find(|c| c.0 == feature && c.1 == threshold)
                .map(|c| c.2);
            ensure(theirs.is_some_and(|g| g >= best_gain - tol), || {
                format!(
                    "case {case}: root ({feature}, {threshold}) vs exhaustive ({}, {})",
                    expected.0, expected.1
                )
            })?;
            near_ties += 1;
        }
    }
    Ok(format!("30 datasets, {near_ties} rounding-level ties"))
}

fn kernel_feasibility() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_eq: f64 = 0.0;
    for case in 0..20 {
        let n = rng.random_range(8..60);
        let d = rng.random_range(1..4);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let c = rng.random_range(0.1..10.0);
        let params = KernelParams {
            c,
            kernel_scale: rng.random_range(0.2..2.0),
            ..KernelParams::default()
        };

        let mut labels: Vec<f64> = x
            .iter()
            .map(|r| if r[0] + 0.3 * rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 })
            .collect();
        labels[0] = 1.0;
        labels[1] = -1.0;
        let svm = train_svm_binary(&x, &labels, params).map_err(|e| e.to_string())?;
        let a = svm.dual_coefficients();
        ensure(a.iter().all(|&v| (0.0..=c).contains(&v)), || format!("case {case}: a outside [0, C]"))?;
        let eq: f64 = a.iter().zip(&labels).map(|(a, y)| a * y).sum();
        ensure(eq.abs() <= 1e-9, || format!("case {case}: |Σ a y| = {eq:e}"))?;
        monotone(svm.dual_trace(), case, "classification")?;

        let targets: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>().sin() + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let svr = train_svr(&x, &targets, params).map_err(|e| e.to_string())?;
        let beta = svr.dual_coefficients();
        ensure(beta.iter().all(|&b| b.abs() <= c + 1e-12), || format!("case {case}: β outside [-C, C]"))?;
        let s: f64 = beta.iter().sum();
        ensure(s.abs() <= 1e-9, || format!("case {case}: |Σ β| = {s:e}"))?;
        monotone(svr.dual_trace(), case, "regression")?;
        worst_eq = worst_eq.max(eq.abs()).max(s.abs());
    }
    within_budget(start, 30)?;
    Ok(format!("40 problems, worst equality residual {worst_eq:.1e}"))
}

fn monotone(trace: &[f64], case: usize, what: &str) -> Result<(), String> {
    ensure(!trace.is_empty(), || format!("case {case}: empty {what} trace"))?;
    for w in trace.windows(2) {
        let slack = 1e-12 * w[0].abs().max(1.0);
        ensure(w[1] >= w[0] - slack, || {
            format!("case {case}: {what} dual fell from {} to {}", w[0], w[1])
        })?;
    }
    Ok(())
}

fn detection() -> Check {
    let tol = (0.010 * 360.0_f64).floor() as usize;
    let mut summary = Vec::new();
    for hr in [50.0, 60.0, 90.0, 150.0] {
        let profile = SubjectProfile {
            noise_sd: 0.02,
            ..SubjectProfile::typical(hr, hr as u64)
        };
        let (rec, truth) = synth_ecg(&profile, 60.0, 360.0).map_err(|e| e.to_string())?;
        let clean = preprocess(&rec, 0.6).map_err(|e| e.to_string())?;
        let params = DetectParams::default();
        let peaks = detect_rpeaks(&clean, params).map_err(|e| e.to_string())?;
        let det = peaks.indices();
        let near = |p: usize, set: &[usize]| set.iter().any(|&q| p.abs_diff(q) <= tol);
        let found = truth.iter().filter(|&&t| near(t, det)).count();
        let genuine = det.iter().filter(|&&p| near(p, &truth)).count();
        let recall = found as f64 / truth.len() as f64;
        let precision = genuine as f64 / det.len().max(1) as f64;
        ensure(recall >= 0.99 && precision >= 0.99, || {
            format!("hr {hr}: recall {recall:.3}, precision {precision:.3}")
        })?;
        let min_gap = params.refractory_s * rec.fs();
        ensure(det.windows(2).all(|w| (w[1] - w[0]) as f64 >= min_gap), || {
            format!("hr {hr}: peaks closer than the refractory period")
        })?;
        summary.push(format!("{hr}bpm {found}/{}", truth.len()));
    }
    Ok(summary.join(", "))
}

fn persistence() -> Check {
    let cohort = generate_cohort(&CohortSpec::new(3, 0, 10)).map_err(|e| e.to_string())?;
    let mut db = ReferenceDb::default();
    for m in &cohort {
        let rec = m.record(50.0, 360.0, 0).map_err(|e| e.to_string())?;
        enroll(&mut db, &m.id, &rec, &EnrollParams::default()).map_err(|e| e.to_string())?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("db.json");
    save_db(&db, &path).map_err(|e| e.to_string())?;
    let back = load_db(&path).map_err(|e| e.to_string())?;

    let probe = vec![0.0; db.frame_len()];
    let mut worst: f64 = 0.0;
    for (a, b) in db.entries().zip(back.entries()) {
        ensure(a.entity_id == b.entity_id, || "entity order changed".into())?;
        let pa = a.model.predict_frame(&probe).map_err(|e| e.to_string())?;
        let pb = b.model.predict_frame(&probe).map_err(|e| e.to_string())?;
        ensure(pa.len() == 220, || format!("{} positions predicted", pa.len()))?;
        for (p, q) in pa.iter().zip(&pb) {
            worst = worst.max((p - q).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("prediction drift {worst:e}"))?;
    let original = std::fs::read(&path).map_err(|e| e.to_string())?;
    let path2 = dir.path().join("again.json");
    save_db(&back, &path2).map_err(|e| e.to_string())?;
    let again = std::fs::read(&path2).map_err(|e| e.to_string())?;
    ensure(original == again, || "re-serialised bytes differ".into())?;
    Ok(format!("{} entities, drift {worst:e}, {} identical bytes", back.len(), again.len()))
}

fn bench() -> Check {
    let subject = &generate_cohort(&CohortSpec::new(1, 0, 12)).map_err(|e| e.to_string())?[0];
    let rec = subject.record(50.0, 360.0, 0).map_err(|e| e.to_string())?;
    let frames = extract_frames(&rec, 220, &FrameParams::default()).map_err(|e| e.to_string())?;
    let (x, y) = FeatureMap::Position.training_set(frames.frames());
    let step = x.len() / 2000;
    let tx: Vec<Vec<f64>> = x.iter().step_by(step.max(1)).cloned().collect();
    let ty: Vec<f64> = y.iter().step_by(step.max(1)).copied().collect();
    ensure(tx.len() >= 2000, || format!("only {} training pairs", tx.len()))?;
    let kernel = KernelParams {
        standardize: true,
        ..KernelParams::default()
    };
    let r = compare(&tx, &ty, &x, &y, DtParams::default(), kernel).map_err(|e| e.to_string())?;
    let finite = [r.dt.rmse, r.dt.mae, r.dt.train_time_s, r.svr.rmse, r.svr.mae, r.svr.train_time_s]
        .iter()
        .all(|v| v.is_finite());
    ensure(finite, || "non-finite bench row".into())?;
    ensure(r.dt.train_time_s < r.svr.train_time_s, || {
        format!("tree {} s vs kernel {} s", r.dt.train_time_s, r.svr.train_time_s)
    })?;
    Ok(format!(
        "n={} DT rmse {:.4} mV in {:.4} s, SVR rmse {:.4} mV in {:.4} s",
        r.n_train, r.dt.rmse, r.dt.train_time_s, r.svr.rmse, r.svr.train_time_s
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("overall performance arithmetic", op_arithmetic),
        ("confusion-matrix accuracy", matrix_arithmetic),
        ("UCL definition and scaling", ucl_definition),
        ("end-to-end synthetic cohort", end_to_end),
        ("sweep monotonicity", sweep_monotone),
        ("mutual information identities", information_theory),
        ("tree exact fit and root split", tree_oracle),
        ("kernel dual feasibility", kernel_feasibility),
        ("R-peak detection", detection),
        ("database round trip", persistence),
        ("learner benchmark", bench),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
