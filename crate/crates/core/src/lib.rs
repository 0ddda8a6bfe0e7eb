//! Constructive approximation machinery on cusp domains.
//!
//! The crate builds hierarchical cell partitions of domains lying below a
//! graph `x_d = psi(x')` whose modulus of continuity degenerates (outward
//! cusps), including the variant where the singularity set is a fractal
//! h-set. On top of the partitions it provides local L2 polynomial
//! projections, a budgeted adaptive piecewise-polynomial scheme, weighted
//! summation operators on rooted trees, and exact rational evaluation of the
//! decay exponents for entropy numbers and Kolmogorov/linear/Gelfand widths.
//!
//! The crate is `no_std` (with `alloc`); all IO, serialization glue and the
//! command-line front end live in the companion `cuspidal-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod approx;
pub mod domain;
pub mod empirics;
pub mod fields;
pub mod fmath;
pub mod hset;
pub mod partition;
pub mod poly;
pub mod quad;
pub mod rates;
pub mod treeop;
