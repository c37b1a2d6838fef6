//! Exact simulation of f(p)-coins from p-coins.
//!
//! Most users start from [`lang::compile_text`] or from a [`schedules::ScheduleSpec`], then
//! run the result with [`combinators::run_plan`] or [`envelope::simulate`] against a
//! [`coin::CoinSource`]. The [`verify`] module holds the exact oracles and Monte Carlo harness.

pub mod cli;
pub mod coin;
pub mod combinators;
pub mod envelope;
pub mod interval;
pub mod lang;
pub mod rational;
pub mod schedules;
pub mod verify;
pub mod walk;
