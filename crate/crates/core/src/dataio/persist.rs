//! Versioned JSON model files (`.bopnn.json`).
//!
//! Reals are stored as shortest round-trip decimal strings. The document's
//! `crc32` field holds the CRC-32 (hex) of the canonical serialization: the
//! compact JSON of every other field with object keys sorted.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ColumnSchema, Encoding, ZScore};
use crate::error::{BopnnError, Result};
use crate::model::{BaseModel, Ensemble, HyperParams};
use crate::subspace::DiscriminantBasis;

pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_FIELD: &str = "crc32";

#[derive(Serialize, Deserialize)]
struct HyperParamsFile {
    k: usize,
    q0: usize,
    q: usize,
    n_models: usize,
    pi_b: String,
    projection_enabled: bool,
    balanced: bool,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ScalingFile {
    means: Vec<String>,
    sds: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TrainingFile {
    n: usize,
    d: usize,
    /// Row-major.
    x: Vec<String>,
    y: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct BaseModelFile {
    subset: Vec<usize>,
    /// Number of basis columns; 0 when projection is disabled.
    q: usize,
    /// `subset.len() x q`, row-major.
    basis: Vec<String>,
    values: Vec<String>,
    ridge: String,
    inbag: Vec<usize>,
    inbag_labels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    hyperparams: HyperParamsFile,
    class_names: Vec<String>,
    target: String,
    schema: Vec<ColumnSchema>,
    scaling: Option<ScalingFile>,
    training: TrainingFile,
    models: Vec<BaseModelFile>,
    oob_accuracy: Option<String>,
}

fn real(v: f64) -> String {
    format!("{v:?}")
}

fn reals<'a>(it: impl IntoIterator<Item = &'a f64>) -> Vec<String> {
    it.into_iter().map(|&v| real(v)).collect()
}

fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| BopnnError::CorruptFile(format!("bad real {s:?}")))
}

fn parse_reals(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| parse_real(s)).collect()
}

fn to_file(e: &Ensemble) -> ModelFile {
    let hp = &e.hp;
    ModelFile {
        format_version: FORMAT_VERSION,
        hyperparams: HyperParamsFile {
            k: hp.k,
            q0: hp.q0,
            q: hp.q,
            n_models: hp.n_models,
            pi_b: real(hp.pi_b),
            projection_enabled: hp.projection_enabled,
            balanced: hp.balanced,
            seed: hp.seed,
        },
        class_names: e.encoding.class_names.clone(),
        target: e.encoding.target.clone(),
        schema: e.encoding.schema.clone(),
        scaling: e.encoding.scaling.as_ref().map(|z| ScalingFile {
            means: reals(z.means.iter()),
            sds: reals(z.sds.iter()),
        }),
        training: TrainingFile {
            n: e.train_x.nrows(),
            d: e.train_x.ncols(),
            x: reals(e.train_x.iter()),
            y: e.train_y.clone(),
        },
        models: e
            .models
            .iter()
            .map(|m| BaseModelFile {
                subset: m.subset.clone(),
                q: m.basis.as_ref().map_or(0, DiscriminantBasis::q),
                basis: m
                    .basis
                    .as_ref()
                    .map_or_else(Vec::new, |b| reals(b.basis.iter())),
                values: m
                    .basis
                    .as_ref()
                    .map_or_else(Vec::new, |b| reals(b.values.iter())),
                ridge: real(m.basis.as_ref().map_or(0.0, |b| b.ridge)),
                inbag: m.inbag.clone(),
                inbag_labels: m.inbag_labels().to_vec(),
            })
            .collect(),
        oob_accuracy: e.oob_accuracy.map(real),
    }
}

fn from_file(f: ModelFile) -> Result<Ensemble> {
    let h = f.hyperparams;
    let hp = HyperParams {
        k: h.k,
        q0: h.q0,
        q: h.q,
        n_models: h.n_models,
        pi_b: parse_real(&h.pi_b)?,
        projection_enabled: h.projection_enabled,
        balanced: h.balanced,
        seed: h.seed,
    };
    let corrupt = |m: &str| BopnnError::CorruptFile(m.to_owned());
    let t = f.training;
    let train_x = Array2::from_shape_vec((t.n, t.d), parse_reals(&t.x)?)
        .map_err(|_| corrupt("training matrix shape"))?;
    let scaling = match f.scaling {
        Some(s) => Some(ZScore {
            means: Array1::from(parse_reals(&s.means)?),
            sds: Array1::from(parse_reals(&s.sds)?),
        }),
        None => None,
    };
    let encoding = Encoding {
        schema: f.schema,
        class_names: f.class_names,
        target: f.target,
        scaling,
    };
    if encoding.width() != t.d {
        return Err(corrupt("schema width does not match training matrix"));
    }
    hp.validate(t.d)
        .map_err(|e| BopnnError::CorruptFile(e.to_string()))?;

    let mut models = Vec::with_capacity(f.models.len());
    for m in f.models {
        if m.subset.iter().any(|&j| j >= t.d)
            || m.inbag.iter().any(|&i| i >= t.n)
            || m.inbag.len() != m.inbag_labels.len()
        {
            return Err(corrupt("base model indices out of range"));
        }
        let basis = if m.q > 0 {
            let b = Array2::from_shape_vec((m.subset.len(), m.q), parse_reals(&m.basis)?)
                .map_err(|_| corrupt("basis shape"))?;
            Some(DiscriminantBasis {
                subset: m.subset.clone(),
                basis: b,
                values: Array1::from(parse_reals(&m.values)?),
                ridge: parse_real(&m.ridge)?,
            })
        } else {
            None
        };
        models.push(BaseModel::assemble(
            &train_x,
            m.subset,
            basis,
            m.inbag,
            m.inbag_labels,
        )?);
    }
    Ok(Ensemble {
        models,
        n_classes: encoding.class_names.len(),
        d: t.d,
        hp,
        oob_accuracy: f.oob_accuracy.as_deref().map(parse_real).transpose()?,
        encoding,
        train_x,
        train_y: t.y,
    })
}

fn canonical(v: &Value) -> Result<String> {
    serde_json::to_string(v).map_err(|e| BopnnError::CorruptFile(e.to_string()))
}

fn checksum(v: &Value) -> Result<String> {
    Ok(format!("{:08x}", crc32fast::hash(canonical(v)?.as_bytes())))
}

/// Serializes an ensemble to the model-file document.
pub fn model_to_string(e: &Ensemble) -> Result<String> {
    let mut doc =
        serde_json::to_value(to_file(e)).map_err(|err| BopnnError::Io(err.to_string()))?;
    let crc = checksum(&doc)?;
    doc.as_object_mut()
        .expect("model file is an object")
        .insert(CHECKSUM_FIELD.into(), Value::String(crc));
    serde_json::to_string_pretty(&doc).map_err(|err| BopnnError::Io(err.to_string()))
}

pub fn model_from_str(s: &str) -> Result<Ensemble> {
    let mut doc: Value =
        serde_json::from_str(s).map_err(|e| BopnnError::CorruptFile(e.to_string()))?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| BopnnError::CorruptFile("document is not an object".into()))?;
    let version = obj
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| BopnnError::CorruptFile("missing format_version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(BopnnError::VersionMismatch {
            found: version.min(u32::MAX as u64) as u32,
            expected: FORMAT_VERSION,
        });
    }
    let stored = match obj.remove(CHECKSUM_FIELD) {
        Some(Value::String(s)) => s,
        _ => return Err(BopnnError::CorruptFile("missing checksum".into())),
    };
    let actual = checksum(&doc)?;
    if stored != actual {
        return Err(BopnnError::CorruptFile(format!(
            "checksum mismatch (stored {stored}, computed {actual})"
        )));
    }
    let f: ModelFile =
        serde_json::from_value(doc).map_err(|e| BopnnError::CorruptFile(e.to_string()))?;
    from_file(f)
}

pub fn save_model(e: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_string(e)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Ensemble> {
    model_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fit_ensemble;
    use crate::synth;

    fn small_model() -> Ensemble {
        let ds = synth::informative_plus_noise(50, 2, 2, 2.0, 1);
        let hp = HyperParams {
            n_models: 4,
            ..HyperParams::default_for(ds.d())
        };
        fit_ensemble(&ds, &hp).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let e = small_model();
        let back = model_from_str(&model_to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn tampered_checksum() {
        let s = model_to_string(&small_model()).unwrap();
        let mut v: Value = serde_json::from_str(&s).unwrap();
        v["crc32"] = Value::String("00000000".into());
        let err = model_from_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, BopnnError::CorruptFile(_)));
    }

    #[test]
    fn tampered_payload() {
        let s = model_to_string(&small_model()).unwrap();
        let mut v: Value = serde_json::from_str(&s).unwrap();
        v["hyperparams"]["k"] = Value::from(5);
        assert!(matches!(
            model_from_str(&v.to_string()),
            Err(BopnnError::CorruptFile(_))
        ));
    }

    #[test]
    fn future_version() {
        let s = model_to_string(&small_model()).unwrap();
        let mut v: Value = serde_json::from_str(&s).unwrap();
        v["format_version"] = Value::from(FORMAT_VERSION + 1);
        assert_eq!(
            model_from_str(&v.to_string()),
            Err(BopnnError::VersionMismatch {
                found: FORMAT_VERSION + 1,
                expected: FORMAT_VERSION
            })
        );
    }
}
