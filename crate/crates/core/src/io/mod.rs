//! File formats: FVTD token dumps, pruning results, and synthetic inputs.

mod dump;
mod result;
mod svg;
mod synth;

use std::fs;
use std::path::Path;

pub use dump::{
    decode_dump, encode_dump, read_dump, read_dump_from, write_dump, write_dump_to, DUMP_MAGIC,
    DUMP_VERSION, FLAG_ATTENTION, HEADER_LEN,
};
pub use result::{
    decode_result, encode_result, read_result_binary, stats_json, write_result_binary,
    StatsReport, RESULT_MAGIC, RESULT_VERSION, STATS_SCHEMA_VERSION,
};
pub use svg::render_svg;
pub use synth::{parse_scenes, synth_video, Scene, SynthDims, DEFAULT_SPREAD};

use crate::error::Result;
use crate::types::PruneResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Binary,
    JsonStats,
    Svg,
}

pub fn write_result(result: &PruneResult, path: impl AsRef<Path>, format: ResultFormat) -> Result<()> {
    match format {
        ResultFormat::Binary => write_result_binary(result, path),
        ResultFormat::JsonStats => {
            let mut json = stats_json(result)?;
            json.push('\n');
            fs::write(path, json)?;
            Ok(())
        }
        ResultFormat::Svg => {
            fs::write(path, render_svg(result))?;
            Ok(())
        }
    }
}
