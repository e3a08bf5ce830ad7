//! Run-directory layout and persistence: config snapshot, seed record,
//! append-only history log, and controller checkpoint.
//!
//!   <out_dir>/config.toml      resolved configuration snapshot
//!   <out_dir>/seed.txt         master seed
//!   <out_dir>/history.jsonl    one record per episode, append-only
//!   <out_dir>/controller.json  versioned policy checkpoint
//!   <out_dir>/reports/*.csv    report/pareto exports

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xbarnas::controller::ControllerState;
use xbarnas::search::{HistoryRecord, HistorySink, SearchHistory};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.toml";
pub const SEED_FILE: &str = "seed.txt";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const CONTROLLER_FILE: &str = "controller.json";
pub const REPORTS_DIR: &str = "reports";

/// Appends records to `history.jsonl`, flushing after every line so a
/// killed run leaves a readable prefix.
pub struct FileSink {
    file: File,
}

impl FileSink {
    pub fn append(dir: &Path) -> CliResult<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(HISTORY_FILE))?;
        Ok(FileSink { file })
    }
}

impl HistorySink for FileSink {
    fn record(&mut self, rec: &HistoryRecord) -> xbarnas::Result<()> {
        let line = serde_json::to_string(rec)?;
        self.file.write_all(line.as_bytes())?;
        self.file.write_all(b"\n")?;
        self.file.flush()?;
        Ok(())
    }
}

/// Prepares a run directory. A directory that already holds a history is a
/// resume: the stored config snapshot must match the resolved config
/// byte-for-byte, and the existing records are returned for replay.
pub fn prepare(dir: &Path, cfg: &RunConfig) -> CliResult<SearchHistory> {
    fs::create_dir_all(dir)?;
    fs::create_dir_all(dir.join(REPORTS_DIR))?;
    let snapshot = cfg.emit();
    let cfg_path = dir.join(CONFIG_FILE);
    let history_path = dir.join(HISTORY_FILE);
    if history_path.exists() {
        let stored = fs::read_to_string(&cfg_path)
            .map_err(|e| CliError::data(format!("resume without config snapshot: {e}")))?;
        if stored != snapshot {
            return Err(CliError::config(format!(
                "{} exists with a different configuration; refusing to resume",
                dir.display()
            )));
        }
        return load_history(dir);
    }
    fs::write(&cfg_path, snapshot)?;
    fs::write(dir.join(SEED_FILE), format!("{}\n", cfg.seed))?;
    Ok(SearchHistory::new())
}

pub fn load_history(dir: &Path) -> CliResult<SearchHistory> {
    let path = dir.join(HISTORY_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    SearchHistory::from_jsonl(&text).map_err(CliError::from)
}

pub fn load_config(dir: &Path) -> CliResult<RunConfig> {
    RunConfig::load(&dir.join(CONFIG_FILE))
}

/// Versioned controller checkpoint.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub phase: String,
    pub controller: ControllerState,
}

pub fn write_checkpoint(dir: &Path, phase: &str, ctrl: &ControllerState) -> CliResult<()> {
    let ckpt = Checkpoint {
        version: 1,
        phase: phase.to_string(),
        controller: ctrl.clone(),
    };
    let json = serde_json::to_string(&ckpt).map_err(|e| CliError::runtime(e.to_string()))?;
    fs::write(dir.join(CONTROLLER_FILE), json)?;
    Ok(())
}

pub fn reports_dir(dir: &Path) -> PathBuf {
    dir.join(REPORTS_DIR)
}
