use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bopnn::dataio::{load_table_with_encoding, Encoding};
use bopnn::model::{
    fit_ensemble, fit_variant, project_for_view, variable_importance, TuneResult, Variant,
    VariantOptions,
};
use bopnn::{load_model, load_table, save_model, Ensemble, LabeledDataset};
use ndarray::Array2;

use crate::args::{DataArgs, ImportanceArgs, ModelArgs, PredictArgs, ProjectArgs, TrainArgs};
use crate::{say, CliError, CliResult};

pub fn load_dataset(a: &DataArgs) -> CliResult<LabeledDataset> {
    let ds = load_table(&a.input, a.target.as_deref(), &a.categorical)?;
    Ok(if a.z_score { ds.standardized() } else { ds })
}

pub fn variant_options(m: &ModelArgs) -> VariantOptions {
    VariantOptions {
        n_draws: m.trials,
        n_models: m.n_models.unwrap_or(100),
        seed: m.seed,
        balanced: m.balanced,
        ..VariantOptions::default()
    }
}

/// CSV writer on a file, or on stdout when no path is given.
pub fn csv_writer(path: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn report_fit(e: &Ensemble, out: &Path, started: Instant) {
    let oob = e
        .oob_accuracy
        .map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"));
    say!("oob_accuracy={oob}");
    say!("n_models={}", e.models.len());
    say!(
        "k={} q0={} q={} pi_b={}",
        e.hp.k,
        e.hp.q0,
        e.hp.q,
        e.hp.pi_b
    );
    say!("model={}", out.display());
    say!("wall_time={:.3}", started.elapsed().as_secs_f64());
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let started = Instant::now();
    let ds = load_dataset(&a.data)?;
    let e = if a.tune {
        fit_variant(&ds, a.model.variant, &variant_options(&a.model))?.0
    } else {
        fit_ensemble(&ds, &a.model.hyperparams(ds.d())?)?
    };
    save_model(&e, &a.out)?;
    report_fit(&e, &a.out, started);
    Ok(())
}

fn write_trials(path: &Path, r: &TuneResult, with_pi_b: bool) -> CliResult<()> {
    let mut w = csv_writer(Some(path))?;
    let mut header = vec!["trial", "k", "q0", "q"];
    if with_pi_b {
        header.push("pi_b");
    }
    header.push("oob");
    w.write_record(&header)?;
    for (i, t) in r.trials.iter().enumerate() {
        let mut rec = vec![
            (i + 1).to_string(),
            t.hp.k.to_string(),
            t.hp.q0.to_string(),
            t.hp.q.to_string(),
        ];
        if with_pi_b {
            rec.push(t.hp.pi_b.to_string());
        }
        rec.push(format!("{:.6}", t.oob_accuracy));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn tune(a: &TrainArgs) -> CliResult<()> {
    let started = Instant::now();
    let variant = a.model.variant;
    if matches!(variant, Variant::BnnInf | Variant::Knn) {
        return Err(CliError::Usage(format!(
            "variant {} has no search to run; use `train --tune`",
            variant.name()
        )));
    }
    let ds = load_dataset(&a.data)?;
    let (e, result) = fit_variant(&ds, variant, &variant_options(&a.model))?;
    let result = result.ok_or_else(|| CliError::Internal("search produced no trials".into()))?;
    let trials_out = a.trials_out.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".trials.csv");
        PathBuf::from(s)
    });
    write_trials(&trials_out, &result, variant == Variant::Bnn)?;
    save_model(&e, &a.out)?;
    say!("trials={}", result.trials.len());
    say!("best_trial={}", result.chosen + 1);
    say!("trials_csv={}", trials_out.display());
    report_fit(&e, &a.out, started);
    Ok(())
}

/// Reads a table with the model's encoding and applies its scaling.
fn load_like_model(
    path: &Path,
    encoding: &Encoding,
) -> CliResult<(Array2<f64>, Option<Vec<usize>>)> {
    let (x, y) = load_table_with_encoding(path, encoding)?;
    let x = match &encoding.scaling {
        Some(z) => z.apply(&x),
        None => x,
    };
    Ok((x, y))
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    let e = load_model(&a.model)?;
    let (x, y) = load_like_model(&a.input, &e.encoding)?;
    let mut w = csv_writer(a.out.as_deref())?;
    let mut header = vec!["id".to_string(), "predicted_label".to_string()];
    header.extend((1..=e.n_classes).map(|c| format!("prob_{c}")));
    w.write_record(&header)?;
    let mut hits = 0;
    for (i, row) in x.rows().into_iter().enumerate() {
        let dist = e.predict(row)?;
        let label = dist.argmax();
        if y.as_ref().is_some_and(|y| y[i] == label) {
            hits += 1;
        }
        let mut rec = vec![i.to_string(), e.encoding.class_names[label].clone()];
        rec.extend(dist.probs.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    drop(w);
    if let (Some(_), Some(_)) = (&y, &a.out) {
        say!("accuracy={:.6}", hits as f64 / x.nrows() as f64);
    }
    Ok(())
}

pub fn importance(a: &ImportanceArgs) -> CliResult<()> {
    let e = load_model(&a.model)?;
    let imp = variable_importance(&e)?;
    let mut w = csv_writer(a.out.as_deref())?;
    w.write_record(["variable", "importance"])?;
    for (name, v) in e.encoding.column_names().iter().zip(imp.iter()) {
        w.write_record([name.clone(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn project(a: &ProjectArgs) -> CliResult<()> {
    let e = load_model(&a.model)?;
    let (x, y) = match &a.input {
        Some(p) => load_like_model(p, &e.encoding)?,
        None => (e.train_x.clone(), Some(e.train_y.clone())),
    };
    let view = project_for_view(&e, x.view(), a.view_dims)?;
    let mut w = csv_writer(a.out.as_deref())?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=a.view_dims).map(|c| format!("pc{c}")));
    header.push("label".into());
    w.write_record(&header)?;
    for (i, row) in view.rows().into_iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(
            y.as_ref()
                .map_or_else(String::new, |y| e.encoding.class_names[y[i]].clone()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
