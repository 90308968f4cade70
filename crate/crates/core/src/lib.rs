//! Speaker-annotated Datalog over signed, linked statement sets.
//!
//! * [`logic`]: statements, the parser and the prover.
//! * [`cert`]: keys, identifiers and certificate encoding.
//! * [`store`]: the certificate store and context closure.
//! * [`cache`]: set and context caches with refresh.
//! * [`slang`]: the script language and its interpreter.
//! * [`time`]: clocks.

pub mod cert;
pub mod logic;
pub mod time;
pub mod store;
pub mod cache;
pub mod slang;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/logic.md")]
    mod logic {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/contexts.md")]
    mod contexts {}
    #[doc = include_str!("../../../book/src/scripts.md")]
    mod scripts {}
    #[doc = include_str!("../../../book/src/reference/grammar.md")]
    mod grammar {}
    #[doc = include_str!("../../../book/src/reference/certificate-format.md")]
    mod certificate_format {}
    #[doc = include_str!("../../../book/src/reference/store-api.md")]
    mod store_api {}
    #[doc = include_str!("../../../book/src/reference/guardd.md")]
    mod guardd {}
    #[doc = include_str!("../../../book/src/reference/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reference/csv.md")]
    mod csv {}
    #[doc = include_str!("../../../book/src/reference/fixtures.md")]
    mod fixtures {}
}
