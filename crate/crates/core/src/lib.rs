pub mod ambient;
pub mod barriers;
pub mod curvature;
pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod expr;
pub mod grid;
pub mod homotopy;
pub mod hypersurface;
pub mod pipeline;
pub mod rhs;
pub mod scenario;
pub mod tubular;

pub use error::{Error, Result};
