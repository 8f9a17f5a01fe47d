use std::fs;

use restorekit::curriculum::{build_schedule, nodes_from_json, validate_schedule, Schedule};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::fsutil::write_atomic;

/// Reads the task graph at `--input`, prints the table and optionally
/// writes the JSON schedule to `--output`.
pub fn run(cfg: &PipelineConfig) -> CliResult<Schedule> {
    let input = cfg.input()?;
    let text = fs::read_to_string(input).map_err(CliError::io(input))?;
    let nodes = nodes_from_json(&text)?;
    let schedule = build_schedule(&nodes)?;
    validate_schedule(&nodes, &schedule)?;
    print!("{}", schedule.to_table());
    if let Some(out) = &cfg.output {
        let mut json = schedule.to_json()?;
        json.push('\n');
        write_atomic(out, json.as_bytes())?;
    }
    Ok(schedule)
}
