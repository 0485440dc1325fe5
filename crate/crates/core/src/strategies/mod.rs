//! Elementary feedback strategies, open-loop adversary controls and the
//! discrete non-anticipativity tester.
//!
//! Everything here lives on the simulation grid: a path is a list of states at
//! grid times `t_0 = s, ..., t_N = T`, and stopping rules return grid indices.

mod check;
mod elementary;
mod feedback;
mod open_loop;
mod path;
mod rules;

pub use check::{check_nonanticipative, Checkable, NonAnticipationReport, PathPairConfig};
pub use elementary::{
    concatenate, constant_strategy, make_grid_strategy, uniform_decision_times, Action, ElementaryStrategy, PathAction,
    Schedule, StrategyRunner,
};
pub use feedback::{FeedbackMap, SpaceAxis};
pub use open_loop::{
    realize_open_loop, Generator, GeneratorState, InfoLevel, NoiseHistory, OpenLoopControl, OpenLoopGenerator,
};
pub use path::PathView;
pub use rules::{PathRule, Region, RuleMonitor, StoppingRule};
