//! The shared JSON layout for matrices: `{"rows": r, "cols": c, "data": [row-major]}`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::Mat;
use crate::sympcore::SymplecticMatrix;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Mat> for MatrixDoc {
    fn from(m: &Mat) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { rows, cols, data }
    }
}

impl TryFrom<MatrixDoc> for Mat {
    type Error = Error;
    fn try_from(doc: MatrixDoc) -> Result<Mat, Error> {
        if doc.rows == 0 || doc.cols == 0 || doc.data.len() != doc.rows * doc.cols {
            return Err(Error::Dimension(format!(
                "matrix document declares {}x{} but carries {} entries",
                doc.rows,
                doc.cols,
                doc.data.len()
            )));
        }
        if doc.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix document".into()));
        }
        Ok(Mat::from_row_slice(doc.rows, doc.cols, &doc.data))
    }
}

impl From<SymplecticMatrix> for MatrixDoc {
    fn from(m: SymplecticMatrix) -> Self {
        MatrixDoc::from(m.as_mat())
    }
}

impl TryFrom<MatrixDoc> for SymplecticMatrix {
    type Error = Error;
    fn try_from(doc: MatrixDoc) -> Result<Self, Error> {
        SymplecticMatrix::new(Mat::try_from(doc)?)
    }
}

pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
    MatrixDoc::from(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
    let doc = MatrixDoc::deserialize(d)?;
    Mat::try_from(doc).map_err(serde::de::Error::custom)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(MatrixDoc::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        Option::<MatrixDoc>::deserialize(d)?
            .map(|doc| Mat::try_from(doc).map_err(serde::de::Error::custom))
            .transpose()
    }
}
