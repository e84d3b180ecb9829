//! Dense tensors, the DCT basis, differentiable orthonormalization, seeded
//! randomness and finite-difference gradient checking.

mod dct;
mod gradcheck;
mod ortho;
mod rng;
pub(crate) mod tensor;

pub use dct::{dct_basis, DctBasis};
pub use gradcheck::{grad_check, grad_check_coords, relative_error};
pub use ortho::{
    orthonormalize, orthonormalize_backward, orthonormalize_cached, GramSchmidtCache,
    DEGENERACY_THRESHOLD,
};
pub use rng::{gaussian, Rng};
pub use tensor::{matmul, Tensor};
