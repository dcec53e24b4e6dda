//! Fractional-linear first integrals of geodesic flows on surfaces.
//!
//! Metrics are conformal, `g = e^{2λ}(dx² + dy²)`. The crate derives the
//! polynomial obstruction system for integrals `F = P/Q` with `P`, `Q` linear
//! in momenta, evaluates it on concrete metrics, and checks any integral it
//! finds by integrating geodesics.

pub mod criterion;
pub mod expr;
pub mod flow;
pub mod geometry;
pub mod killing;
pub mod registry;
