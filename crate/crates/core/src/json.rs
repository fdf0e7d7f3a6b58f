//! JSON helpers: complex numbers are always `[re, im]` pairs.

use crate::error::{Error, Result};
use crate::linalg::C64;
use serde_json::{json, Value};

pub fn cpx(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn cpx_vec(v: &[C64]) -> Value {
    Value::Array(v.iter().map(|&z| cpx(z)).collect())
}

pub fn parse_cpx(v: &Value, what: &str) -> Result<C64> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Parse(format!("{what}: expected [re, im]")))?;
    let re = arr[0]
        .as_f64()
        .ok_or_else(|| Error::Parse(format!("{what}: real part not a number")))?;
    let im = arr[1]
        .as_f64()
        .ok_or_else(|| Error::Parse(format!("{what}: imaginary part not a number")))?;
    Ok(C64::new(re, im))
}

pub fn parse_cpx_vec(v: &Value, what: &str) -> Result<Vec<C64>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("{what}: expected array")))?
        .iter()
        .enumerate()
        .map(|(i, x)| parse_cpx(x, &format!("{what}[{i}]")))
        .collect()
}

pub fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::Parse(format!("missing field \"{key}\"")))
}

/// Verification report in the common `{test, instance, residuals, fd_steps, pass}` layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub test: String,
    pub instance: Value,
    pub residuals: Value,
    pub fd_steps: Vec<f64>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> Value {
        json!({
            "test": self.test,
            "instance": self.instance,
            "residuals": self.residuals,
            "fd_steps": self.fd_steps,
            "pass": self.pass,
        })
    }
}
