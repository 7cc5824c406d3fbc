//! Solving decision processes with non-Markovian rewards.
//!
//! Rewards are written as $FLTL formulae (future LTL plus a reward constant
//! `$`). Progressing those formulae through the states of a trajectory
//! decides, one stage at a time, which prefixes are rewarded. The same
//! progression labels the states of an expanded MDP that is built lazily
//! while an anytime solver explores it.
//!
//! Module map:
//!
//! - [`formula`], [`parser`]: syntax, negation normal form, canonical form.
//! - [`progression`]: formula and specification progression, reward replay.
//! - [`oracle`]: brute-force semantics used to check progression.
//! - [`domain`]: probabilistic operators, domain files, trajectories.
//! - [`xmdp`]: e-states, lazy expansion, graph export, minimality audit.
//! - [`solver`]: policy evaluation, value iteration, LAO* and RTDP.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod domain;
pub mod error;
pub mod formula;
pub mod oracle;
pub mod parser;
pub mod progression;
pub mod solver;
pub mod state;
pub mod xmdp;

pub use error::{Error, Result};
pub use formula::{canonicalize, render, Formula, PropId, PropositionTable};
pub use parser::{parse, parse_closed};
pub use progression::{dollar_prog, prog, replay, rew, spec_prog, ProgressionStep, RewardEntry, RewardSpec};
pub use state::WorldState;
pub use domain::{load_domain, save_domain, Nmrdp, Outcome, ProbAction};
pub use xmdp::{EState, EStateId, EStateStore, Xmdp};
