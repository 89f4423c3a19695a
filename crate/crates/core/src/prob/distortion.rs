use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::pmf::{Alphabet, JointPmf};
use crate::error::{Error, Result};

/// Per-letter distortion `d(x, x̂)` between a source alphabet and a
/// reconstruction alphabet, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DistortionMatrix {
    rows: Alphabet,
    cols: Alphabet,
    d: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: Alphabet,
    cols: Alphabet,
    d: Vec<f64>,
}

impl TryFrom<RawMatrix> for DistortionMatrix {
    type Error = Error;
    fn try_from(r: RawMatrix) -> Result<Self> {
        DistortionMatrix::new(r.rows, r.cols, r.d)
    }
}

impl DistortionMatrix {
    pub fn new(rows: Alphabet, cols: Alphabet, d: Vec<f64>) -> Result<Self> {
        let expected = rows.size() * cols.size();
        if d.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: d.len(),
            });
        }
        for (i, &v) in d.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistortion {
                    row: i / cols.size(),
                    col: i % cols.size(),
                    value: v,
                });
            }
        }
        Ok(Self { rows, cols, d })
    }

    /// `d(x, x̂) = 1{x != x̂}`; reconstruction symbols beyond the source
    /// alphabet always cost 1.
    pub fn hamming(rows: Alphabet, cols: Alphabet) -> Self {
        let mut d = Vec::with_capacity(rows.size() * cols.size());
        for x in 0..rows.size() {
            for c in 0..cols.size() {
                d.push(if x == c { 0.0 } else { 1.0 });
            }
        }
        Self { rows, cols, d }
    }

    pub fn rows(&self) -> &Alphabet {
        &self.rows
    }

    pub fn cols(&self) -> &Alphabet {
        &self.cols
    }

    pub fn get(&self, x: usize, xhat: usize) -> f64 {
        self.d[x * self.cols.size() + xhat]
    }

    pub fn table(&self) -> &[f64] {
        &self.d
    }

    /// True when every source symbol has some zero-cost reconstruction.
    pub fn admits_lossless(&self) -> bool {
        (0..self.rows.size()).all(|x| (0..self.cols.size()).any(|c| self.get(x, c) == 0.0))
    }
}

/// `Σ p(x, x̂) d(x, x̂)` for a two-axis pmf ordered `(X, X̂)`.
pub fn expected_distortion(p: &JointPmf, d: &DistortionMatrix) -> Result<f64> {
    if p.rank() != 2 {
        return Err(Error::AxisCount {
            expected: 2,
            got: p.rank(),
        });
    }
    if p.axes()[0].size() != d.rows.size() || p.axes()[1].size() != d.cols.size() {
        return Err(Error::AlphabetMismatch(format!(
            "pmf shape {:?} vs distortion {}x{}",
            p.shape(),
            d.rows.size(),
            d.cols.size()
        )));
    }
    Ok(p.mass().iter().zip(&d.d).map(|(a, b)| a * b).sum())
}

/// Distortion levels `(Δy1, Δz1, Δy2, Δz2)`. Infinity means unconstrained
/// and is written as the string `"inf"` in JSON.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionQuad {
    #[serde(serialize_with = "ser_level", deserialize_with = "de_level", default = "inf")]
    pub dy1: f64,
    #[serde(serialize_with = "ser_level", deserialize_with = "de_level", default = "inf")]
    pub dz1: f64,
    #[serde(serialize_with = "ser_level", deserialize_with = "de_level", default = "inf")]
    pub dy2: f64,
    #[serde(serialize_with = "ser_level", deserialize_with = "de_level", default = "inf")]
    pub dz2: f64,
}

fn inf() -> f64 {
    f64::INFINITY
}

fn ser_level<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Level {
    Num(f64),
    Text(String),
}

fn de_level<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = match Level::deserialize(d)? {
        Level::Num(v) => v,
        Level::Text(t) if t == "inf" || t == "Infinity" => f64::INFINITY,
        Level::Text(t) => {
            return Err(serde::de::Error::custom(format!(
                "distortion level must be a number or \"inf\", got {t:?}"
            )))
        }
    };
    if v.is_nan() || v < 0.0 || v == f64::NEG_INFINITY {
        return Err(serde::de::Error::custom("distortion level must be >= 0"));
    }
    Ok(v)
}

impl DistortionQuad {
    pub fn new(dy1: f64, dz1: f64, dy2: f64, dz2: f64) -> Self {
        Self { dy1, dz1, dy2, dz2 }
    }

    pub fn unconstrained() -> Self {
        Self::new(inf(), inf(), inf(), inf())
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v, v)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.dy1, self.dz1, self.dy2, self.dz2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Componentwise `self <= other + tol`.
    pub fn le(&self, other: &DistortionQuad, tol: f64) -> bool {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .all(|(a, b)| *a <= b + tol)
    }

    /// Largest positive excess of `self` over `target`, or 0.
    pub fn violation(&self, target: &DistortionQuad) -> f64 {
        self.as_array()
            .iter()
            .zip(target.as_array())
            .map(|(a, b)| if b.is_infinite() { 0.0 } else { (a - b).max(0.0) })
            .fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| !v.is_nan() && *v >= 0.0)
    }
}
