use std::fmt::Write as _;

use bopnn::dataio::{
    load_model, load_table, load_table_with_encoding, save_model, split_indices, ColumnKind,
    SplitPlan,
};
use bopnn::model::{fit_ensemble, predict, HyperParams};
use bopnn::rng::SplitMix64;
use ndarray::Array1;
use proptest::prelude::*;

const COLOURS: [&str; 3] = ["red", "green", "blue"];
const SHAPES: [&str; 2] = ["round", "square"];

/// Two numeric columns, two categorical columns and a string target.
fn write_table(
    rng: &mut SplitMix64,
    n: usize,
) -> (tempfile::TempDir, std::path::PathBuf, Vec<Vec<String>>) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let mut body = String::from("height,colour,weight,shape,kind\n");
    let mut rows = Vec::new();
    for i in 0..n {
        let row = vec![
            format!("{}", (rng.next_f64() * 100.0).round() / 10.0),
            COLOURS[rng.below(3) as usize].to_string(),
            format!("{}", rng.next_f64() - 0.5),
            SHAPES[rng.below(2) as usize].to_string(),
            if i % 2 == 0 {
                "yes".to_string()
            } else {
                "no".to_string()
            },
        ];
        writeln!(body, "{}", row.join(",")).unwrap();
        rows.push(row);
    }
    std::fs::write(&path, body).unwrap();
    (dir, path, rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encoding_is_one_hot_and_reversible(seed in any::<u64>(), n in 4usize..40) {
        let mut rng = SplitMix64::new(seed);
        let (_dir, path, rows) = write_table(&mut rng, n);
        let ds = load_table(&path, Some("kind"), &[]).unwrap();
        let cat_cols = ds.schema().iter().filter(|c| c.kind == ColumnKind::Categorical).count();
        prop_assert_eq!(cat_cols, 2);
        let cat_positions: Vec<usize> = ds
            .encoding
            .column_names()
            .iter()
            .enumerate()
            .filter(|(_, name)| name.contains('='))
            .map(|(j, _)| j)
            .collect();
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = cat_positions.iter().map(|&j| ds.x[[i, j]]).sum();
            prop_assert_eq!(sum, cat_cols as f64);
            let decoded = ds.encoding.decode_row(ds.x.row(i).as_slice().unwrap()).unwrap();
            prop_assert_eq!(&decoded[..], &row[..4]);
            prop_assert_eq!(&ds.class_names()[ds.y[i]], &row[4]);
        }
        // Same bytes, same dataset.
        prop_assert_eq!(load_table(&path, Some("kind"), &[]).unwrap(), ds.clone());
        let (x, y) = load_table_with_encoding(&path, &ds.encoding).unwrap();
        prop_assert_eq!(x, ds.x.clone());
        prop_assert_eq!(y.unwrap(), ds.y);
    }

    #[test]
    fn splits_partition_the_shuffled_prefix(seed in any::<u64>(), n in 4usize..500, rep in 0usize..5) {
        let plan = SplitPlan::for_n(n);
        let (train, test) = split_indices(n, &plan, rep, seed).unwrap();
        prop_assert_eq!(train.len(), ((n as f64) * 0.7 + 1e-9).floor() as usize);
        prop_assert_eq!(train.len() + test.len(), n);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(split_indices(n, &plan, rep, seed).unwrap(), (train, test));
    }
}

#[test]
fn saved_models_predict_identically() {
    let mut rng = SplitMix64::new(5);
    let (dir, path, _) = write_table(&mut rng, 60);
    let ds = load_table(&path, Some("kind"), &[]).unwrap().standardized();
    let hp = HyperParams {
        n_models: 20,
        ..HyperParams::default_for(ds.d())
    };
    let e = fit_ensemble(&ds, &hp).unwrap();
    let file = dir.path().join("m.bopnn.json");
    save_model(&e, &file).unwrap();
    let back = load_model(&file).unwrap();
    assert_eq!(back, e);
    for _ in 0..100 {
        let x = Array1::from_shape_fn(ds.d(), |_| 4.0 * rng.next_f64() - 2.0);
        let a = predict(&e, x.view()).unwrap();
        let b = predict(&back, x.view()).unwrap();
        assert!(a
            .probs
            .iter()
            .zip(&b.probs)
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
