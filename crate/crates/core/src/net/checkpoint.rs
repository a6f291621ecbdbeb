//! Parameter tensor (de)serialization for checkpoints.
//!
//! Tensors are stored as nested JSON arrays keyed by subnetwork and tensor
//! name, with shapes recoverable from the arrays themselves and validated
//! against the layout on load. `serde_json` emits shortest round-trip float
//! text, so save/load is value-exact in f64.

use serde_json::{json, Map, Value};

use super::params::{ModelLayout, ParamVec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Serializes the flat parameter vector into `{subnet: {tensor: array}}`.
pub fn params_to_json<T: Scalar>(layout: &ModelLayout, params: &ParamVec<T>) -> Value {
    let mut subnets: Map<String, Value> = Map::new();
    for t in &layout.tensors {
        let (prefix, local) = t.name.split_once('.').unwrap_or(("model", t.name.as_str()));
        let entry = subnets
            .entry(prefix.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        let arr = if t.re.cols == 1 {
            // Bias vector.
            Value::Array(
                (0..t.re.rows)
                    .map(|i| json!(params.data[t.re.idx(i, 0)].to_f64().unwrap()))
                    .collect(),
            )
        } else {
            Value::Array(
                (0..t.re.rows)
                    .map(|i| {
                        Value::Array(
                            (0..t.re.cols)
                                .map(|j| json!(params.data[t.re.idx(i, j)].to_f64().unwrap()))
                                .collect(),
                        )
                    })
                    .collect(),
            )
        };
        entry
            .as_object_mut()
            .unwrap()
            .insert(local.to_string(), arr);
    }
    Value::Object(subnets)
}

fn get_f64(v: &Value, ctx: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Config(format!("checkpoint: {ctx} is not a number")))
}

/// Reconstructs the flat vector, validating every recorded shape.
pub fn params_from_json<T: Scalar>(layout: &ModelLayout, v: &Value) -> Result<ParamVec<T>> {
    let mut params = ParamVec::zeros(layout);
    let subnets = v
        .as_object()
        .ok_or_else(|| Error::Config("checkpoint: parameters must be an object".into()))?;
    for t in &layout.tensors {
        let (prefix, local) = t.name.split_once('.').unwrap_or(("model", t.name.as_str()));
        let arr = subnets
            .get(prefix)
            .and_then(|s| s.get(local))
            .ok_or_else(|| Error::Config(format!("checkpoint: missing tensor {}", t.name)))?;
        let rows = arr
            .as_array()
            .ok_or_else(|| Error::Config(format!("checkpoint: {} is not an array", t.name)))?;
        if rows.len() != t.re.rows {
            return Err(Error::Config(format!(
                "checkpoint: {} has {} rows, expected {}",
                t.name,
                rows.len(),
                t.re.rows
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if t.re.cols == 1 {
                let x = get_f64(row, &t.name)?;
                params.data[t.re.idx(i, 0)] = T::from_f64(x)
                    .ok_or_else(|| Error::Config(format!("checkpoint: {x} unrepresentable")))?;
            } else {
                let cols = row.as_array().ok_or_else(|| {
                    Error::Config(format!("checkpoint: {} row {i} is not an array", t.name))
                })?;
                if cols.len() != t.re.cols {
                    return Err(Error::Config(format!(
                        "checkpoint: {} row {i} has {} cols, expected {}",
                        t.name,
                        cols.len(),
                        t.re.cols
                    )));
                }
                for (j, x) in cols.iter().enumerate() {
                    let x = get_f64(x, &t.name)?;
                    params.data[t.re.idx(i, j)] = T::from_f64(x).ok_or_else(|| {
                        Error::Config(format!("checkpoint: {x} unrepresentable"))
                    })?;
                }
            }
        }
    }
    Ok(params)
}

/// Constraint-class tags, one per tensor, for the checkpoint header.
pub fn constraint_tags(layout: &ModelLayout) -> Value {
    let mut m = Map::new();
    for t in &layout.tensors {
        let tag = match t.lower_bound {
            Some(b) if b > 0.0 => format!("w >= {b:e}"),
            Some(_) => "w >= 0".to_string(),
            None => "free".to_string(),
        };
        m.insert(t.name.clone(), Value::String(tag));
    }
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::init_params;
    use crate::net::NetworkSpec;

    #[test]
    fn roundtrip_is_value_exact() {
        let spec = NetworkSpec::default();
        let layout = ModelLayout::new(&spec);
        let params = init_params::<f64>(&spec, &layout, 123);
        let v = params_to_json(&layout, &params);
        let text = serde_json::to_string(&v).unwrap();
        let v2: Value = serde_json::from_str(&text).unwrap();
        let back: ParamVec<f64> = params_from_json(&layout, &v2).unwrap();
        for (a, b) in params.data.iter().zip(&back.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let spec = NetworkSpec::default();
        let layout = ModelLayout::new(&spec);
        let params = init_params::<f64>(&spec, &layout, 1);
        let mut v = params_to_json(&layout, &params);
        // Drop a column from one matrix row.
        let row = v["ficnn_fs"]["L1.W"][0].as_array_mut().unwrap();
        row.pop();
        assert!(params_from_json::<f64>(&layout, &v).is_err());
    }
}
