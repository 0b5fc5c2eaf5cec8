use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use p2p_core::profiles::write_profiles_csv;

use super::{ensure_dir, write_json};
use crate::manifest::write_manifest;
use crate::scenario::load_community;
use crate::{CliError, RunConfig};

pub fn generate_profiles(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = ensure_dir(&cfg.out_dir.join("profiles"))?;
    let community = load_community(cfg)?;
    write_profiles_csv(BufWriter::new(File::create(dir.join("profiles.csv"))?), &community.profiles)?;
    write_json(&dir.join("specs.json"), &community.specs)?;
    write_manifest(&dir, "generate-profiles", cfg, &["profiles.csv".into(), "specs.json".into()])?;
    Ok(dir)
}
