//! Numerical workbench for the geodesic flow on a model sphere of revolution.
//!
//! The surface has two unit-sphere caps joined by a symmetric waist of radius
//! `r_min`. Geodesics that cross the waist parallel return to it, and the
//! first-return map on the Birkhoff annulus is an integrable twist map. This
//! crate integrates the flow, tabulates the return map two ways, catalogs
//! the closed geodesics by rotation number, and checks the topological and
//! symplectic bookkeeping attached to them: linking numbers of lifts to the
//! three-sphere, Conley–Zehnder indices, Morse–Bott splittings and growth
//! rates of orbit counts.
//!
//! ```
//! use clairaut::profile::{Profile, ProfileParams};
//! use clairaut::return_map::ReturnMap;
//!
//! let profile = Profile::build(ProfileParams::default())?;
//! let map = ReturnMap::new(&profile);
//! let eta = map.solve_eta(0.5)?;
//! let data = map.flow(eta)?;
//! assert!((data.f - 0.5 * profile.waist_circumference()).abs() < 1e-8);
//! # Ok::<(), clairaut::Error>(())
//! ```

pub mod annulus;
pub mod counting;
pub mod error;
pub mod geodesic;
pub mod io;
pub mod linking;
pub mod numerics;
pub mod orbits;
pub mod pipeline;
pub mod profile;
pub mod return_map;
pub mod symplectic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/profile.md")]
    mod profile {}
    #[doc = include_str!("../../../book/src/geodesic-flow.md")]
    mod geodesic_flow {}
    #[doc = include_str!("../../../book/src/return-map.md")]
    mod return_map {}
    #[doc = include_str!("../../../book/src/orbits.md")]
    mod orbits {}
    #[doc = include_str!("../../../book/src/linking.md")]
    mod linking {}
    #[doc = include_str!("../../../book/src/annulus.md")]
    mod annulus {}
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/conley-zehnder.md")]
    mod conley_zehnder {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
