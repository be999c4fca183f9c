//! Supervised datasets stored as row-per-sample matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Scalar;

/// Inputs `x` (`N × d_in`) paired row by row with targets `y` (`N × d_out`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    x: Matrix<T>,
    y: Matrix<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Matrix<T>, y: Matrix<T>) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::dim("Dataset::new", x.rows(), y.rows()));
        }
        Ok(Self { x, y })
    }

    pub fn from_pairs(pairs: &[(Vector<T>, Vector<T>)]) -> Result<Self> {
        let xs: Vec<&[T]> = pairs.iter().map(|(x, _)| x.as_slice()).collect();
        let ys: Vec<&[T]> = pairs.iter().map(|(_, y)| y.as_slice()).collect();
        Self::new(Matrix::from_rows(&xs)?, Matrix::from_rows(&ys)?)
    }

    /// An autoencoder dataset: targets equal inputs.
    pub fn reconstruction(x: Matrix<T>) -> Self {
        Self { y: x.clone(), x }
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.y.cols()
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn y(&self) -> &Matrix<T> {
        &self.y
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[T], &[T])> + '_ {
        (0..self.len()).map(move |i| (self.x.row(i), self.y.row(i)))
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick = |m: &Matrix<T>| {
            let mut data = Vec::with_capacity(indices.len() * m.cols());
            for &i in indices {
                data.extend_from_slice(m.row(i));
            }
            Matrix::from_vec(indices.len(), m.cols(), data).expect("subset shape")
        };
        Self {
            x: pick(&self.x),
            y: pick(&self.y),
        }
    }

    pub fn map_x(&self, f: impl Fn(&[T]) -> Vec<T>) -> Result<Self> {
        let rows: Vec<Vec<T>> = (0..self.len()).map(|i| f(self.x.row(i))).collect();
        Self::new(Matrix::from_rows(&rows)?, self.y.clone())
    }

    pub fn map_y(&self, f: impl Fn(&[T]) -> Vec<T>) -> Result<Self> {
        let rows: Vec<Vec<T>> = (0..self.len()).map(|i| f(self.y.row(i))).collect();
        Self::new(self.x.clone(), Matrix::from_rows(&rows)?)
    }
}
