//! Synthetic signal sources and the experiment stimulator.

mod generator;
mod stimulator;

pub use generator::{
    GeneratorConfig, GeneratorMode, SignalGenerator, ALPHA_HZ, DEFAULT_ALPHA_RATIO, PINK_A, PINK_B,
};
pub use stimulator::{
    default_class_code, parse_stim_config, shuffle, ScheduleEntry, StimSchedule, BASELINE, REST, SESSION_END,
    SESSION_START, TASK,
};
