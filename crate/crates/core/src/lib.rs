pub mod codes;
pub mod cq;
pub mod error;
pub mod lab;
pub mod linalg;
pub mod problem;
pub mod protocol;
pub mod regions;

pub use error::{Error, Result};

/// Book chapters compiled as doc-tests so their snippets stay in sync.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    pub mod states {}
    #[doc = include_str!("../../../book/src/cq_states.md")]
    pub mod cq_states {}
    #[doc = include_str!("../../../book/src/codes.md")]
    pub mod codes {}
    #[doc = include_str!("../../../book/src/regions.md")]
    pub mod regions {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    pub mod protocol {}
    #[doc = include_str!("../../../book/src/lab.md")]
    pub mod lab {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
