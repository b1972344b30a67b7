//! Row-major nested-array (de)serialization for dense matrices.

use ndarray::Array2;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

pub fn to_rows<T: Scalar>(m: &Array2<T>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.iter().map(|x| x.to_f64_lossy()).collect()).collect()
}

/// Builds a matrix from rows; `cols` is used when there are no rows.
pub fn from_rows<T: Scalar>(rows: &[Vec<f64>], cols: usize) -> Result<Array2<T>, String> {
    let c = rows.first().map_or(cols, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err("ragged matrix rows".into());
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err("non-finite matrix entry".into());
    }
    let flat = rows.iter().flatten().map(|&x| T::lit(x)).collect();
    Array2::from_shape_vec((rows.len(), c), flat).map_err(|e| e.to_string())
}

pub mod matrix {
    use super::*;

    pub fn serialize<T: Scalar, S: Serializer>(m: &Array2<T>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Array2<T>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows, 0).map_err(D::Error::custom)
    }
}

pub mod matrices {
    use super::*;

    pub fn serialize<T: Scalar, S: Serializer>(ms: &[Array2<T>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Vec<Array2<T>>, D::Error> {
        let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        all.iter().map(|rows| from_rows(rows, 0).map_err(D::Error::custom)).collect()
    }
}
