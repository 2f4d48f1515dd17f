use std::ops::{Add, Mul};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sh::SH_COUNT;

/// Nine SH coefficients per color channel. Row `i` holds coefficient
/// `i = l(l+1)+m` for R, G and B.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLight")]
pub struct ShLight {
    pub id: String,
    pub coeffs: [[f64; 3]; SH_COUNT],
}

#[derive(Deserialize)]
struct RawLight {
    id: String,
    coeffs: [[f64; 3]; SH_COUNT],
}

impl TryFrom<RawLight> for ShLight {
    type Error = Error;

    fn try_from(raw: RawLight) -> Result<Self> {
        ShLight::new(raw.id, raw.coeffs)
    }
}

impl ShLight {
    pub fn new(id: impl Into<String>, coeffs: [[f64; 3]; SH_COUNT]) -> Result<Self> {
        if coeffs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("light coefficients must be finite"));
        }
        Ok(ShLight { id: id.into(), coeffs })
    }

    pub fn zero(id: impl Into<String>) -> Self {
        ShLight { id: id.into(), coeffs: [[0.0; 3]; SH_COUNT] }
    }

    /// Uniform environment of the given linear RGB radiance.
    pub fn constant(id: impl Into<String>, radiance: [f64; 3]) -> Self {
        let mut light = Self::zero(id);
        // the projection of a constant c onto Y_00 is c·4π·Y_00 = 2√π·c
        let k = 2.0 * std::f64::consts::PI.sqrt();
        for c in 0..3 {
            light.coeffs[0][c] = k * radiance[c];
        }
        light
    }

    /// One color channel as a 9-vector.
    pub fn channel(&self, c: usize) -> [f64; SH_COUNT] {
        std::array::from_fn(|i| self.coeffs[i][c])
    }

    pub fn from_channels(id: impl Into<String>, channels: [[f64; SH_COUNT]; 3]) -> Result<Self> {
        Self::new(id, std::array::from_fn(|i| [channels[0][i], channels[1][i], channels[2][i]]))
    }

    /// The 27 coefficients in row-major order.
    pub fn flat(&self) -> [f64; 27] {
        let mut out = [0.0; 27];
        for (i, row) in self.coeffs.iter().enumerate() {
            out[i * 3..i * 3 + 3].copy_from_slice(row);
        }
        out
    }

    pub fn from_flat(id: impl Into<String>, flat: &[f64; 27]) -> Result<Self> {
        Self::new(id, std::array::from_fn(|i| [flat[i * 3], flat[i * 3 + 1], flat[i * 3 + 2]]))
    }

    pub fn scaled(&self, s: f64) -> ShLight {
        let mut out = self.clone();
        out.coeffs.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// Load a light from `file.json` (a single light) or `file.json#ID`
    /// (a light picked by id from a file with a top-level `lights` array).
    pub fn load(reference: &str) -> Result<ShLight> {
        let (file, id) = match reference.rsplit_once('#') {
            Some((f, id)) => (f, Some(id)),
            None => (reference, None),
        };
        let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(lights) = value.get("lights").and_then(|l| l.as_array()) {
            let pick = |l: &&serde_json::Value| match id {
                Some(id) => l.get("id").and_then(|v| v.as_str()) == Some(id),
                None => true,
            };
            let found = lights
                .iter()
                .find(pick)
                .ok_or_else(|| Error::Missing(format!("light {:?} in {file}", id.unwrap_or(""))))?;
            return Ok(serde_json::from_value(found.clone())?);
        }
        let light: ShLight = serde_json::from_value(value)?;
        match id {
            Some(id) if id != light.id => Err(Error::Missing(format!("light {id:?} in {file}"))),
            _ => Ok(light),
        }
    }
}

impl Add for &ShLight {
    type Output = ShLight;

    fn add(self, rhs: &ShLight) -> ShLight {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().flatten().zip(rhs.coeffs.iter().flatten()) {
            *a += b;
        }
        out
    }
}

impl Mul<f64> for &ShLight {
    type Output = ShLight;

    fn mul(self, s: f64) -> ShLight {
        self.scaled(s)
    }
}
