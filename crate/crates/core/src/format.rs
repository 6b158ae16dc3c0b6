//! JSON document encodings. Complex scalars are `[re, im]` pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector};

/// Encoded complex scalar.
pub type Scalar = [f64; 2];

pub fn encode_vector(v: &CVector) -> Vec<Scalar> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn decode_vector(v: &[Scalar]) -> Result<CVector> {
    check_finite(v.iter().flatten())?;
    Ok(CVector::from_iterator(v.len(), v.iter().map(|[re, im]| c64(*re, *im))))
}

/// Row-major: outer list is rows.
pub fn encode_matrix(m: &CMatrix) -> Vec<Vec<Scalar>> {
    m.row_iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}

pub fn decode_matrix(rows: &[Vec<Scalar>]) -> Result<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("matrix rows have different lengths".into()));
    }
    check_finite(rows.iter().flatten().flatten())?;
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

fn check_finite<'a>(mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if values.all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Malformed("non-finite number".into()))
    }
}

/// Ensemble file: `states` lists the `m` columns, each with `r` entries.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnsembleDocument {
    pub r: usize,
    pub m: usize,
    pub states: Vec<Vec<Scalar>>,
    /// Missing means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
}

/// Symmetry file: group elements as row-major matrices, generators as vectors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SymmetryDocument {
    pub group: Vec<Vec<Vec<Scalar>>>,
    pub generators: Vec<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_group: Option<Vec<Vec<Vec<Scalar>>>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_encoding_is_row_major() {
        let m = CMatrix::from_fn(2, 3, |i, j| c64(i as f64, j as f64));
        let enc = encode_matrix(&m);
        assert_eq!(enc.len(), 2);
        assert_eq!(enc[1][2], [1.0, 2.0]);
        assert_eq!(decode_matrix(&enc).unwrap(), m);
    }

    #[test]
    fn ragged_matrix_rejected() {
        let rows = vec![vec![[1.0, 0.0]], vec![[1.0, 0.0], [0.0, 0.0]]];
        assert!(matches!(decode_matrix(&rows), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn priors_optional() {
        let doc: EnsembleDocument =
            serde_json::from_str(r#"{"r":1,"m":1,"states":[[[1,0]]]}"#).unwrap();
        assert!(doc.priors.is_none());
    }
}
