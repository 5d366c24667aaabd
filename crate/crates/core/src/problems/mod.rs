//! Bundled problem instances.

pub mod bid;
pub mod convlasso;
pub mod nmf;

use ndarray::{ArrayView2, ArrayView3, Ix2, Ix3};

use crate::blockmodel::Tensor;
use crate::error::{Error, Result};

pub use bid::{BidParams, BidProblem};
pub use convlasso::{ConvLassoParams, ConvLassoProblem};
pub use nmf::NmfProblem;

pub(crate) fn view2(t: &Tensor) -> Result<ArrayView2<'_, f64>> {
    t.view()
        .into_dimensionality::<Ix2>()
        .map_err(|_| Error::Shape(format!("expected a matrix, got shape {:?}", t.shape())))
}

pub(crate) fn view3(t: &Tensor) -> Result<ArrayView3<'_, f64>> {
    t.view()
        .into_dimensionality::<Ix3>()
        .map_err(|_| Error::Shape(format!("expected a 3-D stack, got shape {:?}", t.shape())))
}

pub(crate) fn sum_sq<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().map(|v| v * v).sum()
}
