//! Incremental truth inference for crowd and game contributions.
//!
//! Players answer rounds of multiple-choice tasks. Each round mixes in a few control tasks
//! with known answers; the player's errors on them give a per-round quality, and every answer
//! of the round adds that quality to its label's score. A task is solved once one label's
//! score is the unique maximum above a threshold, so easy tasks stop collecting answers early
//! and hard ones keep going.
//!
//! Alongside the [`engine`] the crate has ex-post [`baselines`] (majority vote, Dawid-Skene
//! EM, message passing), a [`simulator`] of player populations, [`metrics`] for redundancy
//! and agreement, and the file formats and commands of the `truthinf` binary in [`io`] and
//! [`cli`].
//!
//! # Examples
//!
//! Each capability has a runnable example (`cargo run --release --example <name>`):
//!
//! | example | shows |
//! |---|---|
//! | `incremental_round` | assigning and submitting rounds by hand |
//! | `reliability` | control-task reliability, score updates, completion and ties |
//! | `redundancy` | the fixed-redundancy answer budget and best-case savings |
//! | `simulate_experiment` | a noisy population played to completion |
//! | `baseline_comparison` | MV, EM and message passing against the incremental labels |
//! | `em_recovery` | Dawid-Skene EM on planted confusion matrices |
//! | `replay_log` | the simulate, replay and compare pipeline on disk |
//! | `difficulty_proxy` | contribution counts tracking task confusability |
//!
//! ```
//! use truthinf::config::EngineConfig;
//! use truthinf::simulator::{generate_world, run_experiment, WorldParams};
//!
//! let world = generate_world(&WorldParams { n_tasks: 100, n_players: 40, ..Default::default() }, 1)?;
//! let experiment = run_experiment(&world, &EngineConfig::default(), 1)?;
//! assert!(experiment.report.is_complete());
//! # Ok::<(), truthinf::simulator::SimulatorError>(())
//! ```

pub mod baselines;
pub mod cli;
pub mod config;
pub mod engine;
pub mod io;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod simulator;
