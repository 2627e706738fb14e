//! Sensing-grounded LLM student simulation.
//!
//! A cohort of student agents lives through a ten-week course. Each week a
//! student writes a journal from its own phone sensing digest, a judge agent
//! updates its six-dimension status, and the status is mapped onto EMA survey
//! scales for comparison with self-reports.
//!
//! | module | role |
//! |---|---|
//! | [`student`] | profiles, Big Five, [`student::StatusVector`] |
//! | [`sensing`] | log parsing, geofencing, [`sensing::WeekGrid`] bucketing |
//! | [`prompts`] | template registry and rendering |
//! | [`gateway`] | providers, sessions, transcripts, reply parsers |
//! | [`assessment`] | weekly exams and project judging |
//! | [`engine`] | configuration, the weekly loop, run logs |
//! | [`evaluation`] | alignment, MAE/RMSE/Spearman, reports |
//! | [`fixtures`] | deterministic synthetic cohorts |
//!
//! The guide in `book/` walks through each stage; its code blocks run as
//! doctests of this crate.

pub mod assessment;
pub mod engine;
pub mod evaluation;
pub mod fixtures;
pub mod gateway;
pub mod prompts;
pub mod sensing;
pub mod student;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/status.md")]
mod book_status {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/sensing.md")]
mod book_sensing {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/prompts.md")]
mod book_prompts {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/providers.md")]
mod book_providers {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/simulation.md")]
mod book_simulation {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/evaluation.md")]
mod book_evaluation {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
