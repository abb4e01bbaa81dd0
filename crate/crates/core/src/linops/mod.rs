//! Linear operators of the imaging model: reflexive-boundary Gaussian blur
//! and the forward-difference gradient, each with its adjoint.

mod blur;
mod dct;
mod gradient;

pub use blur::{apply_blur, apply_blur_adjoint, psf_to_spectrum, BlurOperator, GaussianPsf};
pub use dct::Dct2d;
pub use gradient::{grad, grad_adjoint, GRADIENT_NORM_SQ_BOUND};

pub(crate) use gradient::{grad_adjoint_into, grad_into};
