//! Mixed-integer convex minimization by branch-and-bound over Frank-Wolfe
//! relaxations. The guide in `book/` walks through the API.

pub mod bnb;
pub mod error;
pub mod fw;
pub mod heuristics;
pub mod lmo;
pub mod numerics;
pub mod polytopes;
pub mod problems;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
