//! Acceptance criteria 1-7. Runs without the libtest harness so that one
//! PASS/FAIL line per criterion is always printed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use jndmap::commands::{self, OutDir};
use jndmap::config::{DecompositionConfig, RunConfig};
use jndmap::report::{render_table, RangesFile};
use jndmap::tables::CorpusPaths;
use jndmap_core::corpus::{Corpus, DcrRating, Recipe, Resolution, Stimulus};
use jndmap_core::evaluate::DEFAULT_THRESHOLDS;
use jndmap_core::fit::MONOTONE_GRID;
use jndmap_core::{
    build_codistribution, decompose_explicit, fit_mapping, invert_at_threshold, psd_points, screen_bt500,
    welch_t_test, Family, FitOptions, PsdPoint, RatedPair, SimSpec, SubQualityRange,
};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

/// SplitMix64, used only to generate inputs here.
struct Mix(u64);

impl Mix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn histogram_conservation() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = Mix(1);
    for set in 0..100 {
        let n = 1 + (rng.next() % 60) as usize;
        let width = 0.5 + 4.5 * rng.unit();
        let pairs: Vec<RatedPair> = (0..n)
            .map(|i| RatedPair {
                content_id: format!("c{set}"),
                recipe_x: format!("a{i}"),
                recipe_y: format!("b{i}"),
                delta_obj: 40.0 * rng.unit(),
                sig: rng.next() % 2 == 0,
                p_value: 0.5,
            })
            .collect();
        let mut range = SubQualityRange::new(0.0, 100.0);
        range.pair_refs = pairs.iter().map(RatedPair::key).collect();
        let cd = build_codistribution(&range, &pairs, width).map_err(|e| e.to_string())?;
        let total: u32 = cd.f_dif.iter().sum::<u32>() + cd.f_sim.iter().sum::<u32>();
        ensure(total as usize == n, || format!("set {set}: {total} of {n} pairs binned"))?;
        for b in 0..cd.bins() {
            let (d, s) = (cd.f_dif[b], cd.f_sim[b]);
            if d + s > 0 {
                let expected = f64::from(d) / f64::from(d + s);
                ensure(cd.p_sd(b) == Some(expected), || format!("set {set} bin {b}: P_SD {:?}", cd.p_sd(b)))?;
            }
        }
        ensure(psd_points(&cd).iter().all(|p| p.support > 0), || "empty bin emitted as a point".into())?;
    }
    let took = within(Duration::from_secs(1), start, "100 pair sets")?;
    Ok(format!("100 pair sets in {took:.1?}"))
}

fn fit_recovery() -> Result<String, String> {
    let start = Instant::now();
    let cases: [(Family, &[f64], usize); 4] = [
        (Family::Logistic5, &[0.8, 0.9, 6.0, 0.002, 0.45], 15),
        (Family::Cubic4, &[0.02, 0.03, 0.001, -0.00002], 10),
        (Family::Logistic2, &[0.5, 8.0], 15),
        (Family::Glm, &[-4.0, 0.5], 15),
    ];
    let mut worst = 0.0_f64;
    let mut gradient = 0.0;
    for (family, truth, n) in cases {
        let pts: Vec<PsdPoint> = (0..n)
            .map(|i| {
                let x = 1.0 + 2.0 * i as f64;
                PsdPoint { delta_obj: x, p_sd: family.value(truth, x), support: 10 }
            })
            .collect();
        let mf = fit_mapping(&pts, family, None, &FitOptions::default()).map_err(|e| format!("{family}: {e}"))?;
        let rms = (mf.params.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64).sqrt();
        ensure(rms < 1e-4, || format!("{family}: parameter RMS error {rms:e}"))?;
        worst = worst.max(rms);
        if family == Family::Glm {
            gradient = mf.fit_report.gradient_norm.unwrap_or(f64::INFINITY);
            ensure(gradient < 1e-8, || format!("GLM gradient norm {gradient:e}"))?;
        }
    }
    let took = within(Duration::from_secs(5), start, "fit recovery")?;
    Ok(format!("max parameter RMS {worst:.1e}, GLM gradient {gradient:.1e}, {took:.1?}"))
}

/// Welch p-values of 10 small vectors from an established statistics
/// package, and the hand-computed t = −1, df = 8 case.
fn statistics_oracle() -> Result<String, String> {
    let cases: [(&[f64], &[f64], f64); 10] = [
        (&[4., 5., 3., 4., 5., 2., 1., 2.], &[1., 5., 4., 1., 4., 4.], 0.9262867902479694),
        (&[4., 2., 5., 3., 3.], &[4., 4., 4., 4.], 0.30455878468053477),
        (&[5., 3., 2., 5., 1., 5.], &[3., 1., 2., 3., 2.], 0.15039102034734433),
        (&[4., 3., 3., 2., 3., 2., 2., 5.], &[2., 1., 1., 4., 4., 5., 2.], 0.6973689061383611),
        (&[2., 5., 5.], &[1., 4., 5., 4., 3., 4.], 0.6897179054285558),
        (&[4., 5., 4., 2., 4., 3., 1.], &[1., 4., 3., 3., 2., 2.], 0.26921252981884775),
        (&[3., 3., 4., 3., 4., 3., 4., 5.], &[1., 3., 4., 1., 2.], 0.07015033969234742),
        (&[2., 1., 4., 1., 2., 3., 5., 1.], &[5., 4., 1., 4., 4., 3., 4., 5.], 0.06989585995259551),
        (&[3., 1., 1., 2., 5., 5., 4., 3.], &[3., 1., 1., 5.], 0.6712896766395473),
        (&[5., 3., 3.], &[5., 3., 4., 1., 4., 3., 1., 2.], 0.39383854527250534),
    ];
    let mut worst = 0.0_f64;
    for (i, (a, b, p)) in cases.iter().enumerate() {
        let r = welch_t_test(a, b, 0.05).map_err(|e| e.to_string())?;
        let err = (r.p - p).abs();
        ensure(err < 2e-2, || format!("vector {i}: p {} vs {p}", r.p))?;
        worst = worst.max(err);
    }
    let r = welch_t_test(&[1., 2., 3., 4., 5.], &[2., 3., 4., 5., 6.], 0.05).map_err(|e| e.to_string())?;
    ensure(r.t == -1.0 && r.df == 8.0, || format!("hand example gave t {}, df {}", r.t, r.df))?;

    let removed = screen_bt500(&planted_table()).map_err(|e| e.to_string())?.removed_observers;
    ensure(removed.len() == 1 && removed.contains("o24"), || format!("screening removed {removed:?}"))?;
    Ok(format!("max |Δp| {worst:.1e}; t = -1, df = 8; removed {{o24}}"))
}

/// 24 observers on 12 stimuli. Odd stimuli split the others evenly between
/// two adjacent scores, even ones are unanimous. `o24` inverts the scale.
fn planted_table() -> Corpus {
    let stimuli = (0..12)
        .map(|s| Stimulus {
            content_id: "c".into(),
            recipe: Recipe { recipe_id: format!("s{s:02}"), resolution: Resolution::P1080, level: 0 },
            vmaf: 95.0 - 5.0 * s as f64,
        })
        .collect();
    let mut ratings = Vec::new();
    for s in 0..12 {
        let (typical, near) = if s < 6 { (5, 4) } else { (1, 2) };
        for o in 0..24 {
            let score = match o {
                23 => 6 - typical,
                _ if s % 2 == 1 && o % 2 == 0 => near,
                _ => typical,
            };
            ratings.push(DcrRating {
                content_id: "c".into(),
                recipe_id: format!("s{s:02}"),
                observer_id: format!("o{:02}", o + 1),
                score,
            });
        }
    }
    Corpus::new(stimuli, ratings, vec![]).expect("valid table")
}

fn default_corpus(dir: &Path) -> Result<CorpusPaths, String> {
    let mut out = OutDir::create(&dir.join("corpus")).map_err(|e| e.to_string())?;
    commands::simulate(&SimSpec::default(), &mut out).map_err(|e| e.to_string())?;
    Ok(CorpusPaths::in_dir(&out.path))
}

/// Criteria 3 and 5 share one run on the default simulated corpus.
fn end_to_end(dir: &Path) -> Result<(commands::RunSummary, Duration), String> {
    let start = Instant::now();
    let inputs = default_corpus(dir)?;
    let mut out = OutDir::create(&dir.join("run")).map_err(|e| e.to_string())?;
    let summary = commands::run(&RunConfig::default(), &inputs, &mut out, 0).map_err(|e| e.to_string())?;
    Ok((summary, start.elapsed()))
}

fn monotone_and_inversion(summary: &commands::RunSummary) -> Result<String, String> {
    let (mut accepted, mut clamped, mut rejected) = (0, 0, 0);
    for (range, fams) in &summary.models.models {
        for (family, mf) in fams {
            if !mf.fit_report.valid {
                rejected += 1;
                continue;
            }
            accepted += 1;
            ensure(mf.is_monotone(), || format!("{range} {family}: accepted but fails the {MONOTONE_GRID}-point check"))?;
            for thr in DEFAULT_THRESHOLDS {
                let (d, flag) = invert_at_threshold(mf, thr).map_err(|e| e.to_string())?;
                let (lo, hi) = mf.domain;
                if flag {
                    clamped += 1;
                    ensure(d == lo || d == hi, || format!("{range} {family}: clamped Δ {d} off the domain ends"))?;
                } else {
                    let err = (mf.eval(d) - thr).abs();
                    ensure(err <= 1e-6, || format!("{range} {family} thr {thr}: |mf(Δ) - thr| = {err:e}"))?;
                }
            }
        }
    }
    ensure(accepted > 0, || "no accepted fits".into())?;
    Ok(format!("{accepted} accepted fits ({rejected} rejected), {clamped} clamped inversions flagged"))
}

fn synthetic_recovery(summary: &commands::RunSummary, took: Duration) -> Result<String, String> {
    let grid = summary.grid.as_ref().ok_or("no evaluation grid")?;
    let best = grid.best_cell().ok_or("no scorable cell")?;
    ensure(best.mae <= 1.5, || format!("best MAE {:.4}", best.mae))?;
    ensure(took < Duration::from_secs(60), || format!("run took {took:?}"))?;
    Ok(format!(
        "best {} {} thr {}: MAE {:.4}, RMSE {:.4} (n = {}); {took:.1?}",
        best.group(),
        best.family.label(),
        best.threshold,
        best.mae,
        best.rmse,
        best.n
    ))
}

fn layout_conformance(summary: &commands::RunSummary) -> Result<String, String> {
    let d = decompose_explicit(&[30.0, 79.0, 86.0, 90.0, 95.0, 100.0]).map_err(|e| e.to_string())?;
    let ids: Vec<String> = d.ranges.iter().map(|r| r.id()).collect();
    let joined = ids.join(", ");
    ensure(joined == "(30,79], (79,86], (86,90], (90,95], (95,100]", || joined.clone())?;
    let file = serde_json::to_string(&RangesFile::from_decomposition(&d)).map_err(|e| e.to_string())?;
    ensure(ids.iter().all(|id| file.contains(id.as_str())), || format!("ranges.json lacks ids: {file}"))?;

    let grid = summary.grid.as_ref().ok_or("no evaluation grid")?;
    let table = render_table(grid);
    let header = format!("thr   {}", ["5-para", "4-para", "2-para", "GLM"].map(|f| format!(" {f:>9}")).concat());
    ensure(table.lines().any(|l| l == header), || format!("table header missing:\n{table}"))?;
    for thr in ["0.75", "0.8", "0.85", "0.9", "0.95"] {
        let rows = table.lines().filter(|l| l.split_whitespace().next() == Some(thr) && l.split_whitespace().count() == 5).count();
        // MAE and RMSE row for every group
        ensure(rows == 2 * grid.groups().len(), || format!("threshold {thr}: {rows} rows"))?;
    }

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let readme = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    for cell in ["3.4963", "4.8471", "3.2493", "3.0491"] {
        ensure(readme.contains(cell), || format!("README lacks {cell}"))?;
    }
    Ok("HD bounds, table layout, reference cells documented".into())
}

fn determinism(dir: &Path) -> Result<String, String> {
    let inputs = CorpusPaths::in_dir(&dir.join("corpus"));
    let cfg = RunConfig {
        decomposition: DecompositionConfig::Explicit { bounds: vec![0.0, 60.0, 80.0, 90.0, 100.0] },
        ..RunConfig::default()
    };
    let mut outputs = Vec::new();
    for jobs in [1, 8] {
        let mut out = OutDir::create(&dir.join(format!("jobs{jobs}"))).map_err(|e| e.to_string())?;
        commands::run(&cfg, &inputs, &mut out, jobs).map_err(|e| e.to_string())?;
        outputs.push(out.path);
    }
    for name in ["metrics.json", "mf_params.json"] {
        let a = std::fs::read(outputs[0].join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(outputs[1].join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between --jobs 1 and 8"))?;
    }
    Ok("metrics.json and mf_params.json identical for --jobs 1 and 8".into())
}

fn report(n: usize, title: &str, result: std::thread::Result<Result<String, String>>) -> bool {
    let (ok, detail) = match result {
        Ok(Ok(d)) => (true, d),
        Ok(Err(e)) => (false, e),
        Err(p) => (false, p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()),
    };
    println!("criterion {n} {}: {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut all = true;

    let simple: [(usize, &str, Check); 3] = [
        (1, "histogram conservation", histogram_conservation),
        (2, "fit recovery", fit_recovery),
        (4, "statistics oracle", statistics_oracle),
    ];
    let mut lines = Vec::new();
    for (n, title, f) in simple {
        lines.push((n, title, catch_unwind(f)));
    }

    let e2e = catch_unwind(AssertUnwindSafe(|| end_to_end(dir.path())));
    let on_run = |f: &dyn Fn(&commands::RunSummary, Duration) -> Result<String, String>| match &e2e {
        Ok(Ok((s, t))) => catch_unwind(AssertUnwindSafe(|| f(s, *t))),
        Ok(Err(e)) => Ok(Err(format!("end-to-end run failed: {e}"))),
        Err(_) => Ok(Err("end-to-end run panicked".into())),
    };
    lines.push((3, "monotonicity and inversion", on_run(&|s, _| monotone_and_inversion(s))));
    lines.push((5, "synthetic recovery", on_run(&synthetic_recovery)));
    lines.push((6, "layout conformance", on_run(&|s, _| layout_conformance(s))));
    lines.push((7, "determinism", catch_unwind(AssertUnwindSafe(|| determinism(dir.path())))));

    lines.sort_by_key(|l| l.0);
    for (n, title, result) in lines {
        all &= report(n, title, result);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
