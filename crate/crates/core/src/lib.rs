//! Platoon verification workbench: timed automata, spatial logic and agent checking.

#![allow(clippy::should_implement_trait)]

pub mod acta;
pub mod bdi;
pub mod mc;
pub mod mlsl;
pub mod platoon;
pub mod pvm;
pub mod report;
pub mod syntax;
pub mod ta;
pub mod zones;
