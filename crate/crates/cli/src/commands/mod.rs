pub mod benchmark;
pub mod decompose;
pub mod erc;
pub mod estimate;
pub mod sensitivity;
pub mod simulate;

use std::path::PathBuf;

use crate::output::Format;

/// Where and how a command writes its outputs.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub out: PathBuf,
    pub format: Format,
}

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

/// Metadata lines shared by every output table.
pub fn base_metadata(command: &str) -> Vec<(String, String)> {
    vec![
        ("command".into(), command.into()),
        ("tool".into(), format!("spatial-iv {}", env!("CARGO_PKG_VERSION"))),
        ("schema_version".into(), crate::config::SCHEMA_VERSION.to_string()),
        ("resolved_config".into(), RESOLVED_CONFIG.into()),
    ]
}

pub(crate) fn text(v: impl ToString) -> String {
    v.to_string()
}
