use std::path::Path;

use nxs_core::ml::{lda_fit, LdaModel};
use nxs_core::synth::shuffle;
use nxs_core::types::FeatureVector;
use nxs_core::Error;

use crate::{CliError, CliResult};

/// Rows of a feature CSV: every column except `time` and the label column
/// is a numeric feature.
pub fn read_features(path: &Path, label_column: &str) -> CliResult<Vec<FeatureVector>> {
    let bad = |m: String| CliError::parse(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| bad(format!("no column named '{label_column}'")))?;
    let time_idx = header.iter().position(|h| h == "time");
    let feature_idx: Vec<usize> = (0..header.len()).filter(|&i| i != label_idx && Some(i) != time_idx).collect();
    if feature_idx.is_empty() {
        return Err(bad("no feature columns".into()));
    }
    let names: Vec<String> = feature_idx.iter().map(|&i| header[i].clone()).collect();
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = n + 2;
        let values = feature_idx
            .iter()
            .map(|&i| {
                let f = rec.get(i).unwrap_or("");
                f.trim().parse::<f64>().map_err(|_| bad(format!("line {line}: '{f}' in column '{}' is not a number", header[i])))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        let label = rec.get(label_idx).unwrap_or("").trim().to_string();
        if label.is_empty() {
            return Err(bad(format!("line {line}: empty label")));
        }
        let t = time_idx.and_then(|i| rec.get(i)).and_then(|v| v.parse().ok()).unwrap_or(n as f64);
        rows.push(FeatureVector::new(t, values, names.clone(), Some(label)).map_err(|e| bad(e.to_string()))?);
    }
    Ok(rows)
}

pub fn accuracy(model: &LdaModel, rows: &[FeatureVector]) -> CliResult<f64> {
    let mut correct = 0usize;
    for r in rows {
        let k = model.predict_index(&r.values).map_err(|e| CliError::runtime(e.to_string()))?;
        if Some(&model.labels[k]) == r.label.as_ref() {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len().max(1) as f64)
}

pub fn cmd_train(path: &Path, label_column: &str, out: &Path, ridge: f64, test_fraction: f64, seed: u64) -> CliResult {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(CliError::parse("--test-fraction must be in [0, 1)"));
    }
    let mut rows = read_features(path, label_column)?;
    let n_test = (rows.len() as f64 * test_fraction).round() as usize;
    if n_test > 0 {
        shuffle(&mut rows, seed);
    }
    let (test, train) = rows.split_at(n_test);
    let model = lda_fit(train, ridge).map_err(|e| match e {
        Error::TooFewSamples(_) | Error::DimensionMismatch { .. } => CliError::parse(e.to_string()),
        other => CliError::runtime(other.to_string()),
    })?;
    model.save(out).map_err(|e| CliError::runtime(format!("{}: {e}", out.display())))?;
    println!("accuracy={:.4}", accuracy(&model, train)?);
    if !test.is_empty() {
        println!("test_accuracy={:.4}", accuracy(&model, test)?);
    }
    println!("classes={}", model.labels.join(","));
    println!("features={}", model.dim);
    println!("train_samples={}", train.len());
    println!("test_samples={}", test.len());
    println!("model={}", out.display());
    Ok(())
}
