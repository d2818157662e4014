//! Serde adapters storing matrices as `{ "rows", "cols", "data" }` with
//! row-major `data`.

use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

use crate::kronlin::{Matrix, Vector};

#[derive(Serialize, Deserialize)]
struct DenseRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&Matrix> for DenseRepr {
    fn from(m: &Matrix) -> Self {
        DenseRepr {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

impl DenseRepr {
    fn into_matrix<E: serde::de::Error>(self) -> Result<Matrix, E> {
        if self.data.len() != self.rows * self.cols {
            return Err(E::custom(format!(
                "matrix data has {} entries, expected {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(Matrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    DenseRepr::from(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
    DenseRepr::deserialize(d)?.into_matrix()
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let data = Vec::<f64>::deserialize(d)?;
        if data.is_empty() {
            return Err(D::Error::custom("empty vector"));
        }
        Ok(Vector::from_vec(data))
    }
}
