//! Dense kernels: Householder QR, small SVD, sparse truncated SVD and the
//! compact SVD representation shared by the solver.

mod compact;
mod dense;
mod qr;
mod svd;
mod tsvd;

pub(crate) use compact::significant_count;
pub use compact::{truncate_svd, CompactSvd};
pub use dense::DenseMatrix;
pub use qr::reduced_qr;
pub(crate) use qr::thin_qr;
pub use svd::small_svd;
pub use tsvd::{tsvd_sparse, tsvd_sparse_with, TsvdOptions};
