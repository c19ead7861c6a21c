use std::fs::File;
use std::io::BufReader;

use gpdi_core::ingest::{build_panels, read_keying, read_raw_responses, read_scored, Keying, PanelSet, Reject};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::StageWriter;

pub struct Loaded {
    pub records_read: usize,
    pub rejects: Vec<Reject>,
    pub panels: PanelSet,
}

fn open(path: &std::path::Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))
}

/// Reads records, groups them and applies the group-size filter. Fails with
/// EMPTY_ANALYSIS when no group survives.
pub fn load_panels(cfg: &RunConfig, writer: Option<&mut StageWriter>) -> CliResult<Loaded> {
    cfg.require_panel_input()?;
    let outcome = if let Some(path) = &cfg.input {
        let keying = match &cfg.keying {
            Some(k) => read_keying(open(k)?)?,
            None => Keying::cyclic(),
        };
        read_raw_responses(open(path)?, cfg.item_coding, &keying)?
    } else {
        read_scored(open(cfg.scored.as_ref().unwrap())?, cfg.item_coding)?
    };
    if let Some(w) = writer {
        for (role, path) in [("input", &cfg.input), ("scored", &cfg.scored), ("keying", &cfg.keying)] {
            if let Some(p) = path {
                w.record_input(role, p)?;
            }
        }
        w.counts.insert("records_read".into(), outcome.records_read as u64);
        w.counts.insert("records_rejected".into(), outcome.rejects.len() as u64);
    }
    let records_read = outcome.records_read;
    let rejects = outcome.rejects;
    let panels = build_panels(outcome.rows, cfg.min_group_size);
    if panels.panels.is_empty() {
        return Err(CliError::data(
            "EMPTY_ANALYSIS",
            format!(
                "no group has at least {} valid members ({} records read, {} rejected, {} groups excluded)",
                cfg.min_group_size,
                records_read,
                rejects.len(),
                panels.exclusions.len()
            ),
        ));
    }
    Ok(Loaded { records_read, rejects, panels })
}
