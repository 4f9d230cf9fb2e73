use std::collections::BTreeSet;

use jndmap_core::codist::{build_codistribution, psd_points};
use jndmap_core::corpus::{Corpus, DcrRating, Direction, JndTruth, Recipe, Resolution, Stimulus};
use jndmap_core::evaluate::{evaluate_grid, GridSpec};
use jndmap_core::fit::{Family, FitReport, MappingFunction};
use jndmap_core::predict::{invert_at_threshold, ModelSet};
use jndmap_core::rangedecomp::{assign_pairs, decompose_balanced, decompose_explicit, BalanceBy, SubQualityRange};
use jndmap_core::screening::{apply_screening, screen_bt500, ScreeningReport};
use jndmap_core::significance::{welch_t_test, RatedPair};
use jndmap_core::stats::student_t_two_sided;
use proptest::prelude::*;

fn stimulus(content: &str, recipe: String, vmaf: f64) -> Stimulus {
    Stimulus { content_id: content.into(), recipe: Recipe { recipe_id: recipe, resolution: Resolution::P1080, level: 0 }, vmaf }
}

fn single_content(vmafs: &[f64]) -> Corpus {
    let stimuli = vmafs.iter().enumerate().map(|(i, &v)| stimulus("c", format!("r{i:03}"), v)).collect();
    Corpus::new(stimuli, vec![], vec![]).unwrap()
}

fn rated(i: usize, delta: f64, sig: bool) -> RatedPair {
    RatedPair {
        content_id: "c".into(),
        recipe_x: format!("x{i:03}"),
        recipe_y: format!("y{i:03}"),
        delta_obj: delta,
        sig,
        p_value: if sig { 0.0 } else { 1.0 },
    }
}

fn glm(b0: f64, b1: f64, hi: f64) -> MappingFunction {
    MappingFunction {
        family: Family::Glm,
        params: vec![b0, b1],
        domain: (0.0, hi),
        fit_report: FitReport { monotone: true, valid: true, ..FitReport::default() },
    }
}

fn distinct_vmafs(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..10_000, min..max).prop_map(|s| s.into_iter().map(|v| f64::from(v) / 100.0).collect())
}

proptest! {
    #[test]
    fn codistribution_conserves_pairs(
        pairs in prop::collection::vec((0.0f64..40.0, any::<bool>()), 1..80),
        width in 0.5f64..5.0,
    ) {
        let pairs: Vec<RatedPair> = pairs.iter().enumerate().map(|(i, &(d, s))| rated(i, d, s)).collect();
        let mut range = SubQualityRange::new(0.0, 100.0);
        range.pair_refs = pairs.iter().map(RatedPair::key).collect();
        let cd = build_codistribution(&range, &pairs, width).unwrap();
        let sig = pairs.iter().filter(|p| p.sig).count() as u32;
        prop_assert_eq!(cd.f_dif.iter().sum::<u32>(), sig);
        prop_assert_eq!(cd.f_sim.iter().sum::<u32>(), pairs.len() as u32 - sig);
        for p in psd_points(&cd) {
            let b = ((p.delta_obj - 0.5 * width) / width).round() as usize;
            let (d, s) = (cd.f_dif[b], cd.f_sim[b]);
            prop_assert_eq!(p.support, d + s);
            prop_assert_eq!(p.p_sd, f64::from(d) / f64::from(d + s));
        }
    }

    #[test]
    fn balanced_ranges_partition_and_balance(vmafs in distinct_vmafs(2, 60), k in 2usize..8) {
        prop_assume!(k <= vmafs.len());
        let corpus = single_content(&vmafs);
        let d = decompose_balanced(&corpus, k, BalanceBy::Stimuli).unwrap();
        prop_assert_eq!(d.ranges.len(), k);
        for w in d.ranges.windows(2) {
            prop_assert_eq!(w[0].hi, w[1].lo);
        }
        let mut counts = vec![0usize; k];
        for &v in &vmafs {
            let hits: Vec<usize> = (0..k).filter(|&i| d.ranges[i].contains(v)).collect();
            prop_assert_eq!(hits.len(), 1);
            counts[hits[0]] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        prop_assert!(hi - lo <= 1, "{:?}", counts);
    }

    #[test]
    fn pair_assignment_is_idempotent(vmafs in distinct_vmafs(3, 25), k in 2usize..4) {
        let corpus = single_content(&vmafs);
        let ids: Vec<String> = corpus.stimuli().iter().map(|s| s.recipe_id().to_string()).collect();
        let pairs: Vec<RatedPair> = ids
            .iter()
            .zip(&ids[1..])
            .map(|(x, y)| RatedPair {
                content_id: "c".into(),
                recipe_x: x.clone(),
                recipe_y: y.clone(),
                delta_obj: 1.0,
                sig: true,
                p_value: 0.0,
            })
            .collect();
        let d = decompose_balanced(&corpus, k.min(vmafs.len()), BalanceBy::Stimuli).unwrap();
        let once = assign_pairs(&pairs, &d, &corpus).unwrap();
        let twice = assign_pairs(&pairs, &once, &corpus).unwrap();
        prop_assert_eq!(&once, &twice);
        let total: BTreeSet<_> = once.ranges.iter().flat_map(|r| r.pair_refs.iter().cloned()).collect();
        prop_assert_eq!(total.len(), pairs.len());
    }

    #[test]
    fn welch_is_antisymmetric(
        a in prop::collection::vec(1u8..=5, 2..30),
        b in prop::collection::vec(1u8..=5, 2..30),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        if let (Ok(ab), Ok(ba)) = (welch_t_test(&a, &b, 0.05), welch_t_test(&b, &a, 0.05)) {
            prop_assert!((ab.t + ba.t).abs() < 1e-12);
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p));
            prop_assert_eq!(ab.sig, ab.p < 0.05);
        }
    }

    #[test]
    fn p_value_falls_with_abs_t(t1 in 0.0f64..20.0, t2 in 0.0f64..20.0, df in 1.0f64..200.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(student_t_two_sided(hi, df) <= student_t_two_sided(lo, df) + 1e-15);
        prop_assert_eq!(student_t_two_sided(-lo, df), student_t_two_sided(lo, df));
    }

    #[test]
    fn screening_ignores_order_and_names(
        scores in prop::collection::vec(1u8..=5, 6 * 8),
        rotate in 0usize..48,
    ) {
        let stimuli: Vec<Stimulus> = (0..6).map(|s| stimulus("c", format!("s{s}"), 10.0 * s as f64)).collect();
        let rating = |s: usize, o: usize, prefix: &str| DcrRating {
            content_id: "c".into(),
            recipe_id: format!("s{s}"),
            observer_id: format!("{prefix}{o}"),
            score: scores[s * 8 + o],
        };
        let base: Vec<DcrRating> = (0..6).flat_map(|s| (0..8).map(move |o| (s, o))).map(|(s, o)| rating(s, o, "a")).collect();
        // reversed observer order under new names, ratings listed in rotated order
        let mut renamed: Vec<DcrRating> = (0..6).flat_map(|s| (0..8).map(move |o| (s, o))).map(|(s, o)| {
            let mut r = rating(s, o, "z");
            r.observer_id = format!("b{}", 7 - o);
            r
        }).collect();
        renamed.rotate_left(rotate);

        let c1 = Corpus::new(stimuli.clone(), base, vec![]).unwrap();
        let c2 = Corpus::new(stimuli, renamed, vec![]).unwrap();
        let r1 = screen_bt500(&c1).unwrap();
        let r2 = screen_bt500(&c2).unwrap();
        let mapped: BTreeSet<String> = r1
            .removed_observers
            .iter()
            .map(|o| format!("b{}", 7 - o[1..].parse::<usize>().unwrap()))
            .collect();
        prop_assert_eq!(mapped, r2.removed_observers.clone());
        prop_assert_eq!(&apply_screening(&c1, &ScreeningReport::default()), &c1);
    }

    #[test]
    fn inversion_round_trips_and_is_monotone(
        b0 in -8.0f64..0.0,
        b1 in 0.05f64..3.0,
        t1 in 0.01f64..0.99,
        t2 in 0.01f64..0.99,
    ) {
        let mf = glm(b0, b1, 40.0);
        let (d1, c1) = invert_at_threshold(&mf, t1).unwrap();
        let (d2, c2) = invert_at_threshold(&mf, t2).unwrap();
        if !c1 {
            prop_assert!((mf.eval(d1) - t1).abs() <= 1e-6);
        }
        if !c2 {
            prop_assert!((mf.eval(d2) - t2).abs() <= 1e-6);
        }
        if t1 <= t2 {
            prop_assert!(d1 <= d2);
        } else {
            prop_assert!(d2 <= d1);
        }
    }

    #[test]
    fn rmse_is_at_least_mae(
        vmafs in distinct_vmafs(4, 15),
        truths in prop::collection::vec((0usize..15, 0usize..15), 1..12),
        b0 in -6.0f64..-1.0,
        b1 in 0.1f64..2.0,
    ) {
        let n = vmafs.len();
        let corpus = single_content(&vmafs);
        let ids: Vec<String> = corpus.stimuli().iter().map(|s| s.recipe_id().to_string()).collect();
        let truths: Vec<JndTruth> = truths
            .into_iter()
            .map(|(a, j)| JndTruth {
                content_id: "c".into(),
                anchor_recipe_id: ids[a % n].clone(),
                // distinct sorted scores: the index order gives the direction
                direction: if j % n >= a % n { Direction::Inc } else { Direction::Dec },
                jnd_recipe_id: ids[j % n].clone(),
                order: 1,
            })
            .collect();
        let corpus = corpus.with_truths(truths).unwrap();
        let decomp = decompose_explicit(&[0.0, 100.0]).unwrap();
        let mut models = ModelSet::default();
        models.insert(decomp.ranges[0].id(), glm(b0, b1, 30.0));
        let spec = GridSpec { families: vec![Family::Glm], ..GridSpec::default() };
        let grid = evaluate_grid(&corpus, &models, &decomp, &spec).unwrap();
        for c in grid.cells.iter().filter(|c| c.n > 0) {
            prop_assert!(c.rmse >= c.mae - 1e-12, "{:?}", c);
        }
    }
}
