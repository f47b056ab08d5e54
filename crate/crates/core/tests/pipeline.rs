use std::fs;

use ufrank::ensemble::EnsembleConfig;
use ufrank::eval::{self, FoldPlan};
use ufrank::synth::{make_planted, SynthSpec, TARGET_NAME};
use ufrank::urelief::UReliefConfig;
use ufrank::{load_csv, Error, ErrorKind, LoadOptions, RankingMethod};

fn spec(seed: u64, separation: f64) -> SynthSpec {
    SynthSpec {
        m: 120,
        n_informative: 4,
        n_noise: 12,
        clusters: 3,
        separation,
        seed,
    }
}

#[test]
fn csv_to_ranking_to_error_curve() {
    let dir = tempfile::tempdir().unwrap();
    let planted = make_planted(&spec(3, 1.5)).unwrap();
    planted.save(dir.path(), "planted").unwrap();

    let data = load_csv(
        dir.path().join("planted.csv"),
        &LoadOptions {
            target: Some(TARGET_NAME.into()),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(data.name(), "planted");
    assert_eq!(data.n(), 16);

    let method = RankingMethod::Genie3(EnsembleConfig {
        trees: 30,
        seed: 3,
        ..EnsembleConfig::default()
    });
    let ranking = method.rank(data.features(), data.name()).unwrap();
    assert_eq!(ranking.order.len(), 16);
    assert_eq!(ranking.attributes, data.features().names());
    assert_eq!(ranking.provenance.dataset, "planted");

    let plan = FoldPlan::new(data.m(), 5, 1).unwrap();
    let curve = eval::error_curve(&data, &method, &plan).unwrap();
    assert_eq!(curve.k_values, vec![1, 2, 4, 8, 16]);
    assert_eq!(curve.per_fold.len(), 5);
    assert!(curve.mean.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(curve.mean[4] > 0.0, "classes overlap at this separation");

    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("planted.truth.json")).unwrap())
            .unwrap();
    assert_eq!(truth["informative_indices"].as_array().unwrap().len(), 4);
}

#[test]
fn ensemble_scores_rank_planted_features_first() {
    let planted = make_planted(&spec(9, 6.0)).unwrap();
    let t = planted.dataset.features();
    let base = EnsembleConfig {
        trees: 40,
        seed: 9,
        ..EnsembleConfig::default()
    };
    for method in [
        RankingMethod::Genie3(base),
        RankingMethod::Symbolic(base),
        RankingMethod::RfScore(base),
    ] {
        let ranking = method.rank(t, "planted").unwrap();
        let top = ranking.top(4);
        assert!(
            planted.informative.iter().all(|i| top.contains(i)),
            "{}: {top:?}",
            method.label()
        );
    }
}

#[test]
fn ingest_errors_name_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "a,b,class\n1,2,0\n3,,1\n").unwrap();
    let e = load_csv(&path, &LoadOptions::default()).unwrap_err();
    match &e {
        Error::Ingest { row, column, .. } => assert_eq!((*row, column.as_str()), (3, "b")),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(e.kind(), ErrorKind::Data);
}

#[test]
fn top_k_bounds_are_checked() {
    let planted = make_planted(&spec(1, 6.0)).unwrap();
    let plan = FoldPlan::new(planted.dataset.m(), 4, 0).unwrap();
    let method = RankingMethod::Urelief(UReliefConfig::default());
    assert!(eval::cv_mse(&planted.dataset, &method, 0, &plan).is_err());
    assert!(eval::cv_mse(&planted.dataset, &method, 17, &plan).is_err());
    assert!(eval::cv_mse(&planted.dataset, &method, 16, &plan).is_ok());
}

#[test]
fn fold_rankings_never_see_test_rows() {
    let planted = make_planted(&spec(5, 3.0)).unwrap();
    let d = &planted.dataset;
    let plan = FoldPlan::new(d.m(), 4, 2).unwrap();
    let (_, test_rows) = plan.split(1);

    // Scramble every feature of the held-out rows.
    let t = d.features();
    let columns = (0..t.n())
        .map(|i| {
            let mut col = t.column(i).to_vec();
            for &r in &test_rows {
                col[r] = col[r] * -3.0 + 100.0;
            }
            col
        })
        .collect();
    let scrambled = ufrank::FeatureTable::new(t.attributes().to_vec(), columns).unwrap();
    let target = d.target().map(|y| (TARGET_NAME.to_owned(), y.to_vec()));
    let mutated = ufrank::Dataset::new(d.name(), scrambled, target).unwrap();

    let base = EnsembleConfig {
        trees: 15,
        seed: 1,
        ..EnsembleConfig::default()
    };
    for method in [
        RankingMethod::Genie3(base),
        RankingMethod::RfScore(base),
        RankingMethod::Urelief(UReliefConfig::default()),
    ] {
        let before = eval::fold_ranking(d, &method, &plan, 1).unwrap();
        let after = eval::fold_ranking(&mutated, &method, &plan, 1).unwrap();
        assert_eq!(before.importance, after.importance, "{}", method.label());
    }
}

#[test]
fn genie3_top16_beats_a_random_ranking() {
    use rand::seq::SliceRandom;

    let mut wins = 0;
    for seed in 0..20u64 {
        let planted = make_planted(&SynthSpec {
            m: 200,
            n_informative: 5,
            n_noise: 45,
            clusters: 4,
            separation: 3.0,
            seed,
        })
        .unwrap();
        let d = &planted.dataset;
        let plan = FoldPlan::new(d.m(), 10, seed).unwrap();
        let method = RankingMethod::Genie3(EnsembleConfig {
            seed,
            ..EnsembleConfig::default()
        });
        let genie3 = eval::cv_mse(d, &method, 16, &plan).unwrap().mean;

        let y = d.target().unwrap();
        let mut random = 0.0;
        for f in 0..plan.folds {
            let (train_rows, test_rows) = plan.split(f);
            let train = d.features().subset(&train_rows).unwrap();
            let train_y: Vec<f64> = train_rows.iter().map(|&r| y[r]).collect();
            let mut attrs: Vec<usize> = (0..d.n()).collect();
            attrs.shuffle(&mut ufrank::rng::stream(seed, &[f as u64]));
            let mut sse = 0.0;
            for &r in &test_rows {
                let p = eval::knn_predict(&train, &train_y, &d.features().row(r), &attrs[..16]).unwrap();
                sse += (p - y[r]).powi(2);
            }
            random += sse / test_rows.len() as f64;
        }
        random /= plan.folds as f64;
        if genie3 < random {
            wins += 1;
        }
    }
    assert!(wins >= 19, "Genie3 beat the random ranking in {wins}/20 seeds");
}
