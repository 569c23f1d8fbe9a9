//! Dense kernels shared by the solvers.

mod block_inverse;
mod cubic;
mod ldlt;
mod ruiz;

pub use block_inverse::{extend_block_inverse, BlockInverseCache};
pub use cubic::cubic_real_roots;
pub use ldlt::{sym_factorize, sym_solve, SymmetricFactor};
pub use ruiz::{ruiz_equilibrate, ruiz_with_tolerance, RUIZ_ITERATIONS, RUIZ_TOLERANCE};
