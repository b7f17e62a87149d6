//! Density selection over a finite hypothesis family.

pub mod density;
pub mod learner;
pub mod screen;
pub mod tournament;

pub use density::{noisy_density, QuadratureSet};
pub use learner::{learn, LearnResult, LearnerConfig, Strategy};
pub use tournament::{min_samples_select, scheffe_select, TournamentOutcome};
