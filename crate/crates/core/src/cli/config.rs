//! Flat JSON run configuration with dotted keys.
//!
//! Every key read is recorded together with the value actually used
//! (defaults included), which becomes the run manifest. Keys present in
//! the file but never read are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, Value>,
    resolved: BTreeMap<String, Value>,
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        match value {
            Value::Object(map) => Ok(Self {
                values: map.into_iter().collect(),
                resolved: BTreeMap::new(),
            }),
            _ => Err(Error::config("<root>", "config must be a JSON object of dotted keys")),
        }
    }

    /// Replaces (or adds) a value before it is read.
    pub fn set(&mut self, key: &str, value: Value) {
        self.values.insert(key.to_string(), value);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn take(&mut self, key: &str, default: Option<Value>) -> Result<Value> {
        let v = match (self.values.get(key), default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d,
            (None, None) => return Err(Error::config(key, "required key is missing")),
        };
        self.resolved.insert(key.to_string(), v.clone());
        Ok(v)
    }

    pub fn f64(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = self.take(key, default.map(Value::from))?;
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::config(key, format!("expected a finite number, got {v}")))
    }

    pub fn optional_f64(&mut self, key: &str) -> Result<Option<f64>> {
        if self.values.contains_key(key) {
            self.f64(key, None).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn u64(&mut self, key: &str, default: Option<u64>) -> Result<u64> {
        let v = self.take(key, default.map(Value::from))?;
        v.as_u64()
            .ok_or_else(|| Error::config(key, format!("expected a nonnegative integer, got {v}")))
    }

    pub fn usize(&mut self, key: &str, default: Option<usize>) -> Result<usize> {
        let v = self.u64(key, default.map(|d| d as u64))?;
        usize::try_from(v).map_err(|_| Error::config(key, "value too large"))
    }

    pub fn string(&mut self, key: &str, default: Option<&str>) -> Result<String> {
        let v = self.take(key, default.map(Value::from))?;
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::config(key, format!("expected a string, got {v}")))
    }

    pub fn vector(&mut self, key: &str, default: Option<Vec<f64>>) -> Result<DVector<f64>> {
        let v = self.take(key, default.map(Value::from))?;
        parse_vector(key, &v)
    }

    pub fn optional_vector(&mut self, key: &str) -> Result<Option<DVector<f64>>> {
        if self.values.contains_key(key) {
            self.vector(key, None).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn usize_list(&mut self, key: &str, default: Option<Vec<usize>>) -> Result<Vec<usize>> {
        let v = self.take(key, default.map(Value::from))?;
        v.as_array()
            .and_then(|a| {
                a.iter()
                    .map(|x| x.as_u64().map(|u| u as usize))
                    .collect::<Option<Vec<_>>>()
            })
            .ok_or_else(|| Error::config(key, format!("expected a list of indices, got {v}")))
    }

    pub fn matrix(&mut self, key: &str, default: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
        let v = self.take(key, default.map(matrix_value))?;
        parse_matrix(key, &v)
    }

    pub fn optional_matrix(&mut self, key: &str) -> Result<Option<DMatrix<f64>>> {
        if self.values.contains_key(key) {
            self.matrix(key, None).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Raw value of a structured key (a list of objects).
    pub fn raw(&mut self, key: &str, default: Option<Value>) -> Result<Value> {
        self.take(key, default)
    }

    /// Fails on the first key of the file that was never read; returns the
    /// resolved key/value map.
    pub fn finish(self) -> Result<BTreeMap<String, Value>> {
        if let Some(key) = self.values.keys().find(|k| !self.resolved.contains_key(*k)) {
            return Err(Error::config(key.clone(), "unknown key for this command"));
        }
        Ok(self.resolved)
    }
}

pub(crate) fn parse_vector(key: &str, v: &Value) -> Result<DVector<f64>> {
    let items = v
        .as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| Error::config(key, format!("expected a list of numbers, got {v}")))?;
    Ok(DVector::from_vec(items))
}

pub(crate) fn parse_matrix(key: &str, v: &Value) -> Result<DMatrix<f64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::config(key, "expected a matrix as a list of rows"))?
        .iter()
        .map(|r| parse_vector(key, r))
        .collect::<Result<Vec<_>>>()?;
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::config(key, "matrix rows must be nonempty and of equal length"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_value(m: &DMatrix<f64>) -> Value {
    Value::from(
        (0..m.nrows())
            .map(|i| Value::from((0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<f64>>()))
            .collect::<Vec<_>>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_resolves() {
        let mut c = Config::from_str(r#"{"a.x": 2.5, "a.m": [[1, 0], [0, 2]], "a.s": "hi"}"#).unwrap();
        assert_eq!(c.f64("a.x", None).unwrap(), 2.5);
        assert_eq!(c.matrix("a.m", None).unwrap()[(1, 1)], 2.0);
        assert_eq!(c.string("a.s", None).unwrap(), "hi");
        assert_eq!(c.usize("a.n", Some(7)).unwrap(), 7);
        let resolved = c.finish().unwrap();
        assert_eq!(resolved["a.n"], Value::from(7));
    }

    #[test]
    fn errors_name_the_key() {
        let mut c = Config::from_str(r#"{"a.x": "no", "b.y": 1}"#).unwrap();
        let e = c.f64("a.x", None).unwrap_err().to_string();
        assert!(e.contains("a.x"));
        let e = c.clone().finish().unwrap_err().to_string();
        assert!(e.contains("b.y"));
        assert!(c.f64("c.z", None).unwrap_err().to_string().contains("c.z"));
        let mut bad = Config::from_str(r#"{"m": [[1, 2], [3]]}"#).unwrap();
        assert!(bad.matrix("m", None).is_err());
        assert!(Config::from_str("[1]").is_err());
    }
}
