//! End-to-end acceptance checks. Runs as a plain binary (`harness = false`)
//! and prints one PASS/FAIL line per check:
//!
//! ```text
//! cargo test -p stand-core --test acceptance
//! cargo test -p stand-core --test acceptance -- 4 5 9
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use stand_core::baselines::{random_score, DetectorSpec};
use stand_core::bench::{
    ablation_matrix, gain_sweep, run_experiment, split_label, DatasetSource, DetectorEntry,
    ExperimentConfig, ResultsTable, ABLATION_LABELS,
};
use stand_core::data::{make_windows, prefix_split, DensitySegment, SuiteSpec, TimeSeriesDataset};
use stand_core::metrics::{affiliation_f1, evaluate, EventSet, MetricConfig};
use stand_core::ndcore::{Matrix, Rng};
use stand_core::stand::{
    flop_estimate, gd_loss_trajectory, loss_and_gradient, time_forward, OptimizerKind,
    ParamTensors, StandConfig, StandParams,
};

type Check = std::result::Result<String, String>;

const MIXED: &str = include_str!("../../../configs/mixed.json");
const UTAD: [&str; 4] = ["random", "pca", "knn", "kmeans"];

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mixed_config(out: &Path, detectors: &[&str], thresholds: &[f64]) -> ExperimentConfig {
    let mut cfg: ExperimentConfig = serde_json::from_str(MIXED).expect("configs/mixed.json parses");
    cfg.output_dir = out.to_path_buf();
    cfg.detectors
        .retain(|d| detectors.contains(&d.label.as_str()));
    cfg.thresholds = thresholds.to_vec();
    cfg
}

/// Per-seed values of `metric` ("mean" = mean of six) for one detector and split.
fn per_seed(
    table: &ResultsTable,
    detector: &str,
    threshold: f64,
    metric: &str,
) -> BTreeMap<u64, f64> {
    let split = split_label(threshold);
    table
        .rows
        .iter()
        .filter(|r| r.detector == detector && r.split == split)
        .filter_map(|r| {
            let rep = r.report()?;
            let v = if metric == "mean" {
                rep.mean_of_six()
            } else {
                rep.metric(metric)?
            };
            Some((r.seed, v))
        })
        .collect()
}

fn mean(values: &BTreeMap<u64, f64>) -> f64 {
    values.values().sum::<f64>() / values.len() as f64
}

// 1 ------------------------------------------------------------------------

fn gradient_fidelity() -> Check {
    let cfg = StandConfig {
        d_model: 4,
        mlp_layers: 2,
        tem_layers: 1,
        bidirectional: true,
        window: 6,
        stride: 6,
        train_stride: 6,
        ..StandConfig::new(3)
    };
    let mut rng = Rng::new(42);
    let mut params = StandParams::init(&cfg, &mut rng);
    for t in params.tensors_mut() {
        t.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v += 0.3 * rng.normal());
    }
    let x = Matrix::from_fn(6, 3, |_, _| rng.normal());
    let y = [0u8, 1, 1, 0, 0, 1];
    let loss = |p: &StandParams| loss_and_gradient(&x, &y, p, &cfg).map(|(l, _)| l).unwrap();
    let (_, grads) = loss_and_gradient(&x, &y, &params, &cfg).map_err(|e| e.to_string())?;
    let h = 1e-4;
    let mut worst = 0.0f64;
    for ti in 0..params.tensors().len() {
        let analytic = grads.tensors()[ti].as_slice().to_vec();
        let (mut diff, mut a, mut n) = (0.0, 0.0, 0.0);
        for (k, g) in analytic.iter().enumerate() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].as_mut_slice()[k] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].as_mut_slice()[k] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            diff += (g - numeric).powi(2);
            a += g * g;
            n += numeric * numeric;
        }
        worst = worst.max(diff.sqrt() / a.sqrt().max(n.sqrt()).max(1e-12));
    }
    ensure(
        worst < 1e-4,
        format!(
            "max relative error {worst:.2e} over {} tensors",
            params.tensors().len()
        ),
    )
}

// 2 ------------------------------------------------------------------------

fn descent_property() -> Check {
    let mut rng = Rng::new(7);
    let x = Matrix::from_fn(48, 3, |_, _| rng.normal());
    let y: Vec<u8> = (0..48).map(|t| u8::from((t / 4) % 3 == 0)).collect();
    let ws = make_windows(&x, Some(&y), 12, 12).map_err(|e| e.to_string())?;
    let cfg = StandConfig {
        d_model: 8,
        window: 12,
        stride: 12,
        train_stride: 12,
        optimizer: OptimizerKind::Gd,
        ..StandConfig::new(3)
    };
    let mut lr = 1.0;
    for _ in 0..20 {
        let losses = gd_loss_trajectory(&ws, &cfg, 100, lr).map_err(|e| e.to_string())?;
        let rises = losses.windows(2).filter(|w| w[1] > w[0]).count();
        if rises == 0 {
            let (first, last) = (losses[0], losses[losses.len() - 1]);
            return ensure(
                last < first,
                format!("lr {lr}: 100 steps non-increasing, loss {first:.4} -> {last:.4}"),
            );
        }
        lr /= 2.0;
    }
    Err("no step size in 1..2^-19 gives a monotone trajectory".into())
}

// 3 ------------------------------------------------------------------------

fn complexity_linearity() -> Check {
    let cfg = StandConfig {
        d_model: 64,
        tem_layers: 1,
        ..StandConfig::new(8)
    };
    time_forward(&cfg, 256, 3);
    let short = time_forward(&cfg, 256, 15);
    let long = time_forward(&cfg, 2048, 7);
    let ratio = long.as_secs_f64() / short.as_secs_f64();
    let (f_short, f_long) = (
        flop_estimate(&cfg, 256).total,
        flop_estimate(&cfg, 2048).total,
    );
    ensure(
        (4.0..=16.0).contains(&ratio) && f_long == 8 * f_short,
        format!(
            "time ratio {ratio:.2}, flop ratio {}",
            f_long as f64 / f_short as f64
        ),
    )
}

// 4 ------------------------------------------------------------------------

fn random_labels(len: usize, rng: &mut Rng) -> Vec<u8> {
    loop {
        let mut y = vec![0u8; len];
        let events = 1 + rng.below(6) as usize;
        for _ in 0..events {
            let s = rng.below(len as u64) as usize;
            let d = 1 + rng.below((len / 10).max(1) as u64) as usize;
            y[s..(s + d).min(len)].iter_mut().for_each(|v| *v = 1);
        }
        if y.contains(&0) && y.contains(&1) {
            return y;
        }
    }
}

fn metric_sanity() -> Check {
    let cfg = MetricConfig::default();
    let mut rng = Rng::new(4);
    let mut worst_uaff = f64::INFINITY;
    for case in 0..40 {
        let len = 20 + rng.below(2000) as usize;
        let y = random_labels(len, &mut rng);
        let s: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let r = evaluate(&s, &y, &cfg).map_err(|e| e.to_string())?;
        let exact = [r.f1, r.auc_roc, r.aff_f1, r.vus_pr, r.cce];
        if exact.iter().any(|&v| v != 100.0) {
            return Err(format!(
                "case {case} (T={len}): scores=labels gave {exact:?}"
            ));
        }
        worst_uaff = worst_uaff.min(r.uaff_f1);
    }
    if worst_uaff < 95.0 {
        return Err(format!("scores=labels UAff-F1 {worst_uaff:.2} < 95"));
    }
    let y = random_labels(10_000, &mut Rng::new(5));
    let r = evaluate(&random_score(10_000, 0), &y, &cfg).map_err(|e| e.to_string())?;
    ensure(
        (47.0..=53.0).contains(&r.auc_roc) && (-5.0..=5.0).contains(&r.cce),
        format!(
            "perfect scores exact on 40 series, min UAff-F1 {worst_uaff:.2}; random AUC {:.2}, CCE {:.2}",
            r.auc_roc, r.cce
        ),
    )
}

// 5 ------------------------------------------------------------------------

/// Direct restatement: every timestep belongs to its nearest truth event
/// (earlier event on ties); distances are point-to-set minima.
fn affiliation_oracle(pred: &[u8], truth: &[u8]) -> (f64, f64) {
    let n = truth.len() as i64;
    let mut events: Vec<Vec<i64>> = Vec::new();
    for t in 0..n {
        if truth[t as usize] == 1 {
            if t > 0 && truth[t as usize - 1] == 1 {
                events.last_mut().unwrap().push(t);
            } else {
                events.push(vec![t]);
            }
        }
    }
    let dist = |x: i64, set: &[i64]| set.iter().map(|g| (x - g).abs()).min().unwrap();
    let owner = |t: i64| {
        let ds: Vec<i64> = events.iter().map(|e| dist(t, e)).collect();
        let m = *ds.iter().min().unwrap();
        ds.iter().position(|&d| d == m).unwrap()
    };
    let owners: Vec<usize> = (0..n).map(owner).collect();
    let (mut p_sum, mut p_count, mut r_sum) = (0.0, 0usize, 0.0);
    for (j, ev) in events.iter().enumerate() {
        let zone: Vec<i64> = (0..n).filter(|&t| owners[t as usize] == j).collect();
        let hits: Vec<i64> = zone
            .iter()
            .copied()
            .filter(|&t| pred[t as usize] == 1)
            .collect();
        if hits.is_empty() {
            continue;
        }
        let size = zone.len() as f64;
        let survive = |d: i64, from: &dyn Fn(i64) -> i64| {
            zone.iter().filter(|&&z| from(z) >= d).count() as f64 / size
        };
        let p: f64 = hits
            .iter()
            .map(|&x| survive(dist(x, ev), &|z| dist(z, ev)))
            .sum::<f64>()
            / hits.len() as f64;
        let r: f64 = ev
            .iter()
            .map(|&y| survive(dist(y, &hits), &|z| (z - y).abs()))
            .sum::<f64>()
            / ev.len() as f64;
        p_sum += p;
        p_count += 1;
        r_sum += r;
    }
    let precision = if p_count == 0 {
        0.0
    } else {
        p_sum / p_count as f64
    };
    (precision, r_sum / events.len() as f64)
}

fn affiliation_equivalence() -> Check {
    let mut rng = Rng::new(2024);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let len = 2 + rng.below(199) as usize;
        let truth = random_labels(len.max(4), &mut rng);
        let pred: Vec<u8> = match case % 3 {
            0 => random_labels(truth.len(), &mut rng),
            1 => (0..truth.len())
                .map(|_| u8::from(rng.uniform() < 0.15))
                .collect(),
            _ => vec![0; truth.len()],
        };
        let got = affiliation_f1(
            &EventSet::from_labels(&pred),
            &EventSet::from_labels(&truth),
        )
        .map_err(|e| e.to_string())?;
        let (p, r) = affiliation_oracle(&pred, &truth);
        worst = worst
            .max((got.precision - p).abs())
            .max((got.recall - r).abs());
    }
    ensure(
        worst < 1e-9,
        format!("200 instances, max deviation {worst:.1e}"),
    )
}

// 6, 7 -----------------------------------------------------------------------

fn labels_matter(table: &ResultsTable) -> Check {
    let stand = mean(&per_seed(table, "stand", 0.1, "mean"));
    let auc = mean(&per_seed(table, "stand", 0.1, "auc_roc"));
    let (best, best_utad) = UTAD
        .iter()
        .map(|d| (*d, mean(&per_seed(table, d, 0.1, "mean"))))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    ensure(
        stand - best_utad >= 10.0 && auc > 90.0,
        format!("STAND mean {stand:.2} vs best UTAD {best} {best_utad:.2} (margin {:.2}), STAND AUC {auc:.2}", stand - best_utad),
    )
}

fn supervisory_gain(table: &ResultsTable) -> Check {
    let low = per_seed(table, "stand", 0.1, "mean");
    let high = per_seed(table, "stand", 0.4, "mean");
    if low.len() != 5 || high.len() != 5 {
        return Err(format!(
            "expected 5 seeds per split, got {} and {}",
            low.len(),
            high.len()
        ));
    }
    let wins = low.iter().filter(|(s, v)| high[s] >= **v).count();
    let pairs: Vec<String> = low
        .iter()
        .map(|(s, v)| format!("{v:.1}->{:.1}", high[s]))
        .collect();
    ensure(
        wins >= 4,
        format!("0.40 >= 0.10 in {wins}/5 seeds [{}]", pairs.join(", ")),
    )
}

// 8 ------------------------------------------------------------------------

fn ablation_direction(out: &Path) -> Check {
    let cfg = mixed_config(out, &["stand"], &[0.1]);
    let (table, _) = ablation_matrix(&cfg, &mut |_, _| {}).map_err(|e| e.to_string())?;
    let [full, no_bidir, no_tem] =
        ABLATION_LABELS.map(|l| mean(&per_seed(&table, l, 0.1, "auc_roc")));
    ensure(
        full > no_tem && full >= no_bidir,
        format!("AUC full {full:.2}, no-bidir {no_bidir:.2}, no-TEM {no_tem:.2}"),
    )
}

// 9 ------------------------------------------------------------------------

fn split_oracle(y: &[u8], threshold: f64) -> Option<usize> {
    (1..y.len()).find(|&t| {
        let prefix = &y[..t];
        let rate = prefix.iter().filter(|&&v| v == 1).count() as f64 / t as f64;
        let cuts = y[t - 1] == 1 && y[t] == 1;
        rate >= threshold && !cuts
    })
}

fn split_protocol() -> Check {
    let mut rng = Rng::new(9);
    let mut reachable = 0;
    for case in 0..500 {
        let len = 5 + rng.below(300) as usize;
        let y = random_labels(len, &mut rng);
        let threshold = 0.02 + 0.9 * rng.uniform();
        let ds = TimeSeriesDataset::new("s", Matrix::zeros(len, 1), Some(y.clone()))
            .map_err(|e| e.to_string())?;
        match (prefix_split(&ds, threshold), split_oracle(&y, threshold)) {
            (Ok(s), Some(t)) => {
                let rate = y[..s.train_end].iter().filter(|&&v| v == 1).count() as f64
                    / s.train_end as f64;
                let cuts = y[s.train_end - 1] == 1 && y[s.train_end] == 1;
                if s.train_end != t || rate < threshold || cuts {
                    return Err(format!(
                        "case {case}: train_end {} vs oracle {t}",
                        s.train_end
                    ));
                }
                reachable += 1;
            }
            (Err(_), None) => {}
            (got, want) => return Err(format!("case {case}: {got:?} vs oracle {want:?}")),
        }
    }
    ensure(true, format!("500 sequences agree ({reachable} reachable)"))
}

// 10 -----------------------------------------------------------------------

fn small_config(out: &Path) -> ExperimentConfig {
    let suite = SuiteSpec {
        name: "small".into(),
        length: 3000,
        channels: 3,
        periods: vec![40.0],
        ar_coeff: 0.5,
        noise_scale: 0.5,
        profile: vec![
            DensitySegment {
                fraction: 0.2,
                density: 0.05,
            },
            DensitySegment {
                fraction: 0.15,
                density: 0.7,
            },
            DensitySegment {
                fraction: 0.65,
                density: 0.05,
            },
        ],
        kinds: vec![
            stand_core::data::AnomalyKind::Spike,
            stand_core::data::AnomalyKind::LevelShift,
        ],
        min_duration: 4,
        max_duration: 12,
        spike_magnitude: 4.0,
        shift_magnitude: 1.5,
        burst_magnitude: 2.0,
    };
    let stand = StandConfig {
        d_model: 8,
        window: 16,
        stride: 8,
        train_stride: 8,
        epochs: 3,
        ..StandConfig::new(3)
    };
    ExperimentConfig {
        datasets: vec![DatasetSource::Suite { suite }],
        detectors: vec![
            DetectorEntry::new("random", DetectorSpec::Random),
            DetectorEntry::new("knn", DetectorSpec::from_kind("knn").unwrap()),
            DetectorEntry::new("logreg", DetectorSpec::from_kind("logreg").unwrap()),
            DetectorEntry::new("stand", DetectorSpec::Stand(stand)),
        ],
        thresholds: vec![0.1, 0.3],
        seeds: vec![0, 1],
        output_dir: out.to_path_buf(),
        metrics: Default::default(),
        fair_setting: true,
    }
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn determinism(root: &Path) -> Check {
    let (a, b) = (root.join("a"), root.join("b"));
    let ta = run_experiment(&small_config(&a)).map_err(|e| e.to_string())?;
    run_experiment(&small_config(&b)).map_err(|e| e.to_string())?;
    if ta.failures() > 0 {
        return Err(format!("{} failed cells", ta.failures()));
    }
    let (fa, fb) = (files_under(&a), files_under(&b));
    let rel = |fs: &[PathBuf], base: &Path| -> Vec<PathBuf> {
        fs.iter()
            .map(|p| p.strip_prefix(base).unwrap().to_path_buf())
            .collect()
    };
    if rel(&fa, &a) != rel(&fb, &b) {
        return Err("runs wrote different file sets".into());
    }
    for (x, y) in fa.iter().zip(&fb) {
        if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
            return Err(format!("{} differs", x.strip_prefix(&a).unwrap().display()));
        }
    }
    ensure(true, format!("{} files identical across runs", fa.len()))
}

// -------------------------------------------------------------------------

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let run = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    let mut report = |n: usize, name: &str, budget: Duration, start: Instant, outcome: Check| {
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > budget => Err(format!("{d}; took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("{tag} {n:>2} {name}: {detail} ({:.1}s)", took.as_secs_f64());
    };
    let secs = Duration::from_secs;

    let checks: [(usize, &str, u64, fn() -> Check); 5] = [
        (1, "gradient fidelity", 10, gradient_fidelity),
        (2, "descent property", 30, descent_property),
        (3, "complexity linearity", 60, complexity_linearity),
        (4, "metric sanity", 60, metric_sanity),
        (5, "affiliation oracle", 60, affiliation_equivalence),
    ];
    for (n, name, budget, f) in checks {
        if run(n) {
            let t = Instant::now();
            report(n, name, secs(budget), t, f());
        }
    }
    if run(6) || run(7) {
        let t = Instant::now();
        let mut detectors = UTAD.to_vec();
        detectors.push("stand");
        let cfg = mixed_config(&scratch.path().join("gain"), &detectors, &[0.1, 0.4]);
        match gain_sweep(&cfg, &mut |_, _| {}) {
            Ok((table, _)) => {
                let took = t.elapsed();
                if run(6) {
                    report(
                        6,
                        "labels matter",
                        secs(600),
                        Instant::now() - took,
                        labels_matter(&table),
                    );
                }
                if run(7) {
                    report(
                        7,
                        "supervisory gain",
                        secs(900),
                        Instant::now() - took,
                        supervisory_gain(&table),
                    );
                }
            }
            Err(e) => {
                report(6, "labels matter", secs(600), t, Err(e.to_string()));
                report(7, "supervisory gain", secs(900), t, Err(e.to_string()));
            }
        }
    }
    if run(8) {
        let t = Instant::now();
        report(
            8,
            "ablation direction",
            secs(900),
            t,
            ablation_direction(&scratch.path().join("ablation")),
        );
    }
    if run(9) {
        let t = Instant::now();
        report(9, "split protocol", secs(10), t, split_protocol());
    }
    if run(10) {
        let t = Instant::now();
        report(
            10,
            "determinism",
            secs(600),
            t,
            determinism(&scratch.path().join("det")),
        );
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
