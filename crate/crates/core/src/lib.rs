//! Level-set uncertainty quantification for prevalence-conditioned classifiers.

pub mod audit;
pub mod consistency;
pub mod demo;
pub mod density;
pub mod density_file;
pub mod error;
pub mod external;
pub mod multiclass;
pub mod oracle;
pub mod par;
pub mod probing;
pub mod sampling;
pub mod simplex;
pub mod training;

pub use density::{DensityModel, ExtendedRatio};
pub use error::{Error, Result};
pub use par::Exec;
pub use probing::{MonotoneClassifier, PrevalenceGrid};
pub use simplex::Simplex;
