use serde::{Deserialize, Serialize};

use super::distortion::DistortionMatrix;
use super::info::cmi_axes;
use super::pmf::{compose, Alphabet, CondPmf, JointPmf};
use crate::error::{Error, Result};

/// Names of the four decoders, in `DistortionQuad` order.
pub const DECODER_NAMES: [&str; 4] = ["y1", "z1", "y2", "z2"];

/// A source `P_XYZ` with the four decoders' distortion measures
/// (order: y1, z1, y2, z2). Axes are labelled `X`, `Y`, `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceFile", into = "SourceFile")]
pub struct SourceSpec {
    pxyz: JointPmf,
    d: [DistortionMatrix; 4],
}

impl SourceSpec {
    pub fn new(pxyz: JointPmf, d: [DistortionMatrix; 4]) -> Result<Self> {
        if pxyz.rank() != 3 {
            return Err(Error::AxisCount {
                expected: 3,
                got: pxyz.rank(),
            });
        }
        let sizes = pxyz.shape();
        let axes = vec![
            Alphabet::new("X", sizes[0])?,
            Alphabet::new("Y", sizes[1])?,
            Alphabet::new("Z", sizes[2])?,
        ];
        let pxyz = JointPmf::new(axes, pxyz.mass().to_vec())?;
        let d = d
            .into_iter()
            .zip(DECODER_NAMES)
            .map(|(m, name)| {
                if m.rows().size() != sizes[0] {
                    return Err(Error::AlphabetMismatch(format!(
                        "distortion `{name}` has {} rows, source alphabet has {}",
                        m.rows().size(),
                        sizes[0]
                    )));
                }
                DistortionMatrix::new(
                    Alphabet::new("X", sizes[0])?,
                    Alphabet::new(format!("Xh_{name}"), m.cols().size())?,
                    m.table().to_vec(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let d: [DistortionMatrix; 4] = d.try_into().expect("four matrices");
        Ok(Self { pxyz, d })
    }

    /// Hamming distortion with reconstruction alphabet equal to `X` at all decoders.
    pub fn with_hamming(pxyz: JointPmf) -> Result<Self> {
        let nx = pxyz.axes().first().map(Alphabet::size).unwrap_or(0);
        let x = Alphabet::new("X", nx)?;
        let h = DistortionMatrix::hamming(x.clone(), x.relabeled("Xh"));
        Self::new(pxyz, [h.clone(), h.clone(), h.clone(), h])
    }

    /// Physically degraded source `p(x) p(z|x) p(y|z)` with Hamming distortion.
    pub fn degraded(px: &[f64], z_given_x: &[f64], nz: usize, y_given_z: &[f64], ny: usize) -> Result<Self> {
        let x = Alphabet::new("X", px.len())?;
        let z = Alphabet::new("Z", nz)?;
        let y = Alphabet::new("Y", ny)?;
        let p = JointPmf::new(vec![x.clone()], px.to_vec())?;
        let pz = compose(&p, &CondPmf::new(vec![x], vec![z.clone()], z_given_x.to_vec())?)?;
        let pzy = compose(&pz, &CondPmf::new(vec![z], vec![y], y_given_z.to_vec())?)?;
        Self::with_hamming(pzy.marginalize(&[0, 2, 1])?)
    }

    /// Source without side information (`Y`, `Z` constant), Hamming distortion.
    pub fn without_side_info(px: &[f64]) -> Result<Self> {
        Self::degraded(px, &vec![1.0; px.len()], 1, &[1.0], 1)
    }

    pub fn pxyz(&self) -> &JointPmf {
        &self.pxyz
    }

    pub fn distortions(&self) -> &[DistortionMatrix; 4] {
        &self.d
    }

    pub fn x_size(&self) -> usize {
        self.pxyz.axes()[0].size()
    }

    pub fn y_size(&self) -> usize {
        self.pxyz.axes()[1].size()
    }

    pub fn z_size(&self) -> usize {
        self.pxyz.axes()[2].size()
    }

    /// `I(X;Y|Z)`; zero exactly when `X - Z - Y`.
    pub fn degradedness_residual(&self) -> f64 {
        cmi_axes(&self.pxyz, &[0], &[1], &[2])
    }

    /// Fails with `NotDegraded` when `I(X;Y|Z) > tol`.
    pub fn require_degraded(&self, tol: f64) -> Result<()> {
        let r = self.degradedness_residual();
        if r > tol {
            return Err(Error::NotDegraded(r));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A distortion measure in a source file: `"hamming"` (reconstruction
/// alphabet = source alphabet) or an explicit row-major table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistortionSpec {
    Named(String),
    Table { cols: usize, d: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSizes {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionSet {
    pub y1: DistortionSpec,
    pub z1: DistortionSpec,
    pub y2: DistortionSpec,
    pub z2: DistortionSpec,
}

/// On-disk form of [`SourceSpec`]: `pxyz` is row-major over `(x, y, z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceFile {
    pub sizes: SourceSizes,
    pub pxyz: Vec<f64>,
    pub distortion: DistortionSet,
}

fn matrix_from_spec(spec: &DistortionSpec, nx: usize, name: &str) -> Result<DistortionMatrix> {
    let x = Alphabet::new("X", nx)?;
    match spec {
        DistortionSpec::Named(n) if n == "hamming" => {
            Ok(DistortionMatrix::hamming(x, Alphabet::new(format!("Xh_{name}"), nx)?))
        }
        DistortionSpec::Named(n) => Err(Error::InvalidArgument(format!(
            "unknown distortion measure `{n}` (expected \"hamming\" or a table)"
        ))),
        DistortionSpec::Table { cols, d } => {
            DistortionMatrix::new(x, Alphabet::new(format!("Xh_{name}"), *cols)?, d.clone())
        }
    }
}

impl TryFrom<SourceFile> for SourceSpec {
    type Error = Error;
    fn try_from(f: SourceFile) -> Result<Self> {
        let axes = vec![
            Alphabet::new("X", f.sizes.x)?,
            Alphabet::new("Y", f.sizes.y)?,
            Alphabet::new("Z", f.sizes.z)?,
        ];
        let pxyz = JointPmf::new(axes, f.pxyz)?;
        let ds = [&f.distortion.y1, &f.distortion.z1, &f.distortion.y2, &f.distortion.z2];
        let mut mats = Vec::with_capacity(4);
        for (spec, name) in ds.into_iter().zip(DECODER_NAMES) {
            mats.push(matrix_from_spec(spec, f.sizes.x, name)?);
        }
        SourceSpec::new(pxyz, mats.try_into().expect("four matrices"))
    }
}

impl From<SourceSpec> for SourceFile {
    fn from(s: SourceSpec) -> Self {
        let to_spec = |m: &DistortionMatrix| {
            let h = DistortionMatrix::hamming(m.rows().clone(), m.cols().clone());
            if m.cols().size() == m.rows().size() && h.table() == m.table() {
                DistortionSpec::Named("hamming".into())
            } else {
                DistortionSpec::Table {
                    cols: m.cols().size(),
                    d: m.table().to_vec(),
                }
            }
        };
        SourceFile {
            sizes: SourceSizes {
                x: s.x_size(),
                y: s.y_size(),
                z: s.z_size(),
            },
            pxyz: s.pxyz.mass().to_vec(),
            distortion: DistortionSet {
                y1: to_spec(&s.d[0]),
                z1: to_spec(&s.d[1]),
                y2: to_spec(&s.d[2]),
                z2: to_spec(&s.d[3]),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let s = SourceSpec::degraded(&[0.4, 0.6], &[0.9, 0.1, 0.2, 0.8], 2, &[0.7, 0.3, 0.3, 0.7], 2).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("hamming"));
        let back = SourceSpec::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert!(s.degradedness_residual() < 1e-12);
    }

    #[test]
    fn explicit_tables_and_unknown_fields() {
        let text = r#"{
            "sizes": {"x": 2, "y": 1, "z": 1},
            "pxyz": [0.5, 0.5],
            "distortion": {"y1": "hamming", "z1": {"cols": 3, "d": [0, 1, 0.5, 1, 0, 0.5]},
                           "y2": "hamming", "z2": "hamming"}
        }"#;
        let s = SourceSpec::from_json(text).unwrap();
        assert_eq!(s.distortions()[1].cols().size(), 3);
        let bad = text.replace("\"pxyz\"", "\"extra\": 1, \"pxyz\"");
        assert!(SourceSpec::from_json(&bad).is_err());
        let wrong = text.replace("\"hamming\", \"z1\"", "\"manhattan\", \"z1\"");
        assert!(SourceSpec::from_json(&wrong).is_err());
    }

    #[test]
    fn non_degraded_rejected() {
        // Y = X, Z constant: I(X;Y|Z) = H(X)
        let pxyz = JointPmf::new(
            vec![
                Alphabet::new("X", 2).unwrap(),
                Alphabet::new("Y", 2).unwrap(),
                Alphabet::new("Z", 1).unwrap(),
            ],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let s = SourceSpec::with_hamming(pxyz).unwrap();
        assert!(matches!(s.require_degraded(1e-6), Err(Error::NotDegraded(_))));
    }
}
