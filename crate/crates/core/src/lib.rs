//! Learning finite mixtures of exponential families.
//!
//! The crate is organised bottom-up:
//!
//! - [`exp_family`]: the canonical-form interface, Legendre duality and
//!   single-component estimation;
//! - [`families`]: multivariate Gaussian, Rayleigh and Poisson;
//! - [`bregman`]: Bregman divergences, Jensen diversity, k-means loss;
//! - [`clustering`]: additively weighted Bregman k-means (Lloyd, Hartigan);
//! - [`seeding`]: k-means++ style seeding and other initializations;
//! - [`learners`]: k-MLE, hard EM and soft EM.

pub mod bregman;
pub mod clustering;
pub mod error;
pub mod exp_family;
pub mod families;
pub mod learners;
pub mod seeding;

pub use error::{Error, Result};
pub use exp_family::{ExpFamily, Moment, Natural, SampleSet};
pub use families::Family;
