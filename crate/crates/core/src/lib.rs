//! Simulated persuasion dialogues between LLM agents, with questionnaire
//! scoring and psychometric analysis.
//!
//! The guide under `book/` walks through each module; its code blocks are
//! compiled as doc-tests below.

pub mod engine;
pub mod gateway;
pub mod instrument;
pub mod persona;
pub mod psychometrics;
pub mod store;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instrument.md")]
    mod instrument {}
    #[doc = include_str!("../../../book/src/psychometrics.md")]
    mod psychometrics {}
    #[doc = include_str!("../../../book/src/personas.md")]
    mod personas {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/run-directory.md")]
    mod run_directory {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
