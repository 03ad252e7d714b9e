//! Line-delimited JSON scene files: one [`MapFrame`] per line.
//!
//! Writers emit fields in declaration order and floats with shortest
//! round-trip formatting, so `read(write(frame)) == frame` bit for bit.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::types::{normalize_yaw, MapFrame};

/// Parses one JSON record, reporting the failing field path.
pub fn parse_record<R: DeserializeOwned>(line_no: usize, line: &str) -> Result<R> {
    let de = &mut serde_json::Deserializer::from_str(line);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            line: line_no,
            message: if path == "." {
                inner.to_string()
            } else {
                format!("at {path}: {inner}")
            },
        }
    })
}

/// Reads every non-blank line of `reader` as a record.
pub fn read_records<R: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<(usize, R)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, parse_record(i + 1, &line)?));
    }
    Ok(out)
}

pub fn write_record<R: Serialize>(mut writer: impl Write, record: &R) -> Result<()> {
    serde_json::to_writer(&mut writer, record)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_scenes<T: Scalar>(reader: impl BufRead) -> Result<Vec<MapFrame<T>>> {
    read_records::<MapFrame<T>>(reader)?
        .into_iter()
        .map(|(line, mut frame)| {
            frame.validate().map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            frame.ego_pose.yaw = normalize_yaw(frame.ego_pose.yaw);
            Ok(frame)
        })
        .collect()
}

pub fn write_scenes<T: Scalar>(mut writer: impl Write, frames: &[MapFrame<T>]) -> Result<()> {
    for frame in frames {
        write_record(&mut writer, frame)?;
    }
    writer.flush()?;
    Ok(())
}
