//! Model checkpoints: one JSON document with the network spec, normalization
//! constants, constraint tags and all parameter tensors. Round-trips are
//! value-exact in f64.

use std::path::Path;

use serde_json::{json, Value};

use super::{NTMode, Normalization, PotentialModel};
use crate::error::{Error, Result};
use crate::net::checkpoint::{constraint_tags, params_from_json, params_to_json};
use crate::net::{ModelLayout, NetworkSpec};
use crate::scalar::Scalar;

pub const FORMAT: &str = "thermoforge-checkpoint-v1";

impl<T: Scalar> PotentialModel<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "format": FORMAT,
            "network_spec": serde_json::to_value(&self.spec).unwrap(),
            "normalization": {
                "t0_k": self.norm.t0.to_f64().unwrap(),
                "s0": self.norm.s0.to_f64().unwrap(),
                "t_scale": self.norm.t_scale.to_f64().unwrap(),
                "n_t_mode": serde_json::to_value(self.norm.n_t_mode).unwrap(),
                "eps_gr": self.norm.eps_gr.to_f64().unwrap(),
            },
            "constraints": constraint_tags(&self.layout),
            "parameters": params_to_json(&self.layout, &self.params),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        if v.get("format").and_then(|f| f.as_str()) != Some(FORMAT) {
            return Err(Error::Config(format!(
                "checkpoint: unknown format (expected {FORMAT})"
            )));
        }
        let spec: NetworkSpec = serde_json::from_value(v["network_spec"].clone())?;
        spec.validate()?;
        let layout = ModelLayout::new(&spec);
        let n = &v["normalization"];
        let g = |key: &str| -> Result<T> {
            let x = n
                .get(key)
                .and_then(|x| x.as_f64())
                .ok_or_else(|| Error::Config(format!("checkpoint: missing normalization.{key}")))?;
            T::from_f64(x).ok_or_else(|| Error::Config(format!("checkpoint: {key} unrepresentable")))
        };
        let n_t_mode: NTMode = serde_json::from_value(n["n_t_mode"].clone())?;
        let norm = Normalization {
            t0: g("t0_k")?,
            s0: g("s0")?,
            t_scale: g("t_scale")?,
            n_t_mode,
            eps_gr: g("eps_gr")?,
        };
        let params = params_from_json(&layout, &v["parameters"])?;
        Ok(PotentialModel {
            spec,
            layout,
            params,
            norm,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text)?;
        Self::from_json(&v)
    }
}
