//! Maximal functions, Hajłasz norms, Whitney covers, Calderón–Zygmund and
//! atomic decompositions on finite doubling metric measure spaces.

pub mod atomic;
pub mod czd;
pub mod error;
pub mod field;
pub mod hajlasz;
pub mod io;
pub(crate) mod lp;
pub mod maxfn;
pub mod polytope;
pub mod space;
pub mod whitney;

pub use error::{Error, Result};
pub use field::{GradientField, ScalarField};
pub use space::{
    ball_average, build_space, discrete_gradient, doubling_profile, enumerate_balls,
    poincare_constant, Ball, BallFamily, DoublingProfile, MetricMeasureSpace, SpaceSpec,
};
