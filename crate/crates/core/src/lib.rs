pub mod channels;
pub mod error;
pub mod field;
pub mod linalg;
pub mod multicenter;
pub mod one_center;
pub mod specfun;
pub mod twocenter;
pub mod vibro;

pub use error::{Parity, Result, ZrpError};

/// The guide's chapters, compiled so their examples run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/one-center.md")]
    mod one_center {}
    #[doc = include_str!("../../../book/src/two-center.md")]
    mod two_center {}
    #[doc = include_str!("../../../book/src/poles.md")]
    mod poles {}
    #[doc = include_str!("../../../book/src/multicenter.md")]
    mod multicenter {}
    #[doc = include_str!("../../../book/src/vibrational.md")]
    mod vibrational {}
}
