use std::fs;

use bopnn::dataio::{split, SplitPlan};
use bopnn::evalstats::{
    dataset_score, standardize_minmax, standardize_student, wilcoxon_signed_rank,
};
use bopnn::model::{fit_variant, VariantOptions};
use bopnn::rng::mix64;
use ndarray::Array2;

use crate::args::BenchArgs;
use crate::commands::{csv_writer, load_dataset};
use crate::{say, CliError, CliResult};

pub fn bench(a: &BenchArgs) -> CliResult<()> {
    if a.variants.is_empty() {
        return Err(CliError::Usage("no variants selected".into()));
    }
    let mut data = a.data.clone();
    // Scaling is fitted per split on the training part only.
    data.z_score = false;
    let ds = load_dataset(&data)?;
    let mut plan = SplitPlan::for_n(ds.n());
    if let Some(r) = a.repetitions {
        plan.repetitions = r;
    }
    let dataset = a.data.input.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );

    // acc[[method, split]]
    let mut acc = Array2::<f64>::zeros((a.variants.len(), plan.repetitions));
    for rep in 0..plan.repetitions {
        let (train, test) = split(&ds, &plan, rep, a.seed)?;
        let (train, test) = if a.data.z_score {
            let train = train.standardized();
            let test = test.scaled_like(&train.encoding);
            (train, test)
        } else {
            (train, test)
        };
        let opts = VariantOptions {
            n_draws: a.trials,
            n_models: a.n_models,
            seed: mix64(a.seed ^ rep as u64),
            balanced: a.balanced,
            ..VariantOptions::default()
        };
        for (m, &variant) in a.variants.iter().enumerate() {
            let (e, _) = fit_variant(&train, variant, &opts)?;
            let hits = (0..test.n())
                .filter(|&i| e.classify(test.x.row(i)).is_ok_and(|c| c == test.y[i]))
                .count();
            acc[[m, rep]] = hits as f64 / test.n() as f64;
        }
        eprintln!("split {}/{} done", rep + 1, plan.repetitions);
    }

    fs::create_dir_all(&a.out)?;
    let mut w = csv_writer(Some(&a.out.join("splits.csv")))?;
    w.write_record(["split", "method", "accuracy"])?;
    for rep in 0..plan.repetitions {
        for (m, v) in a.variants.iter().enumerate() {
            w.write_record([
                rep.to_string(),
                v.name().to_string(),
                acc[[m, rep]].to_string(),
            ])?;
        }
    }
    w.flush()?;

    let scores_path = a.out.join("scores.csv");
    let mut w = csv_writer(Some(&scores_path))?;
    w.write_record(["dataset", "method", "score_minmax", "score_student"])?;
    if a.variants.len() >= 2 {
        let mm = standardize_minmax(&acc)?;
        let st = standardize_student(&acc)?;
        for (m, v) in a.variants.iter().enumerate() {
            w.write_record([
                dataset.clone(),
                v.name().to_string(),
                dataset_score(&mm, m)?.to_string(),
                dataset_score(&st, m)?.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(Some(&a.out.join("wilcoxon.csv")))?;
    w.write_record([
        "method_a",
        "method_b",
        "mean_difference",
        "w_plus",
        "p_value",
        "exact",
    ])?;
    for i in 0..a.variants.len() {
        for j in i + 1..a.variants.len() {
            let (ra, rb) = (acc.row(i).to_vec(), acc.row(j).to_vec());
            let r = wilcoxon_signed_rank(&ra, &rb)?;
            let mean_diff = ra.iter().zip(&rb).map(|(x, y)| x - y).sum::<f64>() / ra.len() as f64;
            w.write_record([
                a.variants[i].name().to_string(),
                a.variants[j].name().to_string(),
                mean_diff.to_string(),
                r.w_plus.to_string(),
                r.p_two_sided.to_string(),
                r.exact.to_string(),
            ])?;
        }
    }
    w.flush()?;

    say!("repetitions={}", plan.repetitions);
    for (m, v) in a.variants.iter().enumerate() {
        let mean = acc.row(m).sum() / plan.repetitions as f64;
        say!("mean_accuracy.{}={mean:.6}", v.name());
    }
    say!("results={}", a.out.display());
    Ok(())
}
