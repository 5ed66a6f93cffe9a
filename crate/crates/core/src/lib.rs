//! Heterogeneous multi-robot counter-IED mission simulator.
//!
//! A fleet of aerial and ground robots explores a grid world, fuses noisy
//! sensor readings into a threat heatmap and works through detection and
//! confirmation phases, coordinated either by a central command node or by
//! a decentralized mesh of robot "brains" over a lossy radio network.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod fleet;
pub mod fusion;
pub mod mission;
pub mod netsim;
pub mod opserver;
pub mod sensors;
pub mod world;
