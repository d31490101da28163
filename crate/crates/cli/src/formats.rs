//! Tag file formats.
//!
//! CSV: header `channel,t_ps`, then one `channel,t_ps` pair of base-10
//! integers per line.
//!
//! BIN: the 8-byte magic `SPTT0001`, then 9-byte records of one channel
//! byte followed by `t_ps` as an unsigned little-endian u64.
//!
//! Channel 0 is a trigger, 1 a click; anything else is rejected.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use spadcal::{Channel, TagStream, TimeTag};
use thiserror::Error;

pub const BIN_MAGIC: &[u8; 8] = b"SPTT0001";
pub const CSV_HEADER: &str = "channel,t_ps";
const BIN_RECORD_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TagFormat {
    Csv,
    Bin,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("{location}: timestamp {t_ps} ps is earlier than the preceding {prev_ps} ps")]
    Ordering {
        location: String,
        t_ps: u64,
        prev_ps: u64,
    },
}

fn parse_err(location: String, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        location,
        message: message.into(),
    }
}

struct OrderCheck {
    prev: Option<u64>,
}

impl OrderCheck {
    fn check(&mut self, t_ps: u64, location: impl FnOnce() -> String) -> Result<(), FormatError> {
        if let Some(prev_ps) = self.prev {
            if t_ps < prev_ps {
                return Err(FormatError::Ordering {
                    location: location(),
                    t_ps,
                    prev_ps,
                });
            }
        }
        self.prev = Some(t_ps);
        Ok(())
    }
}

fn channel(code: u8, location: impl FnOnce() -> String) -> Result<Channel, FormatError> {
    Channel::try_from(code).map_err(|e| parse_err(location(), e.to_string()))
}

pub fn read_csv<R: BufRead>(reader: R) -> Result<Vec<TimeTag>, FormatError> {
    let mut lines = reader.lines();
    match lines.next() {
        Some(header) => {
            let header = header?;
            if header.trim_end() != CSV_HEADER {
                return Err(parse_err(
                    "line 1".into(),
                    format!("expected header `{CSV_HEADER}`, found `{header}`"),
                ));
            }
        }
        None => return Err(parse_err("line 1".into(), "missing header")),
    }
    let mut tags = Vec::new();
    let mut order = OrderCheck { prev: None };
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        let loc = || format!("line {line_no}");
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (ch, t) = line
            .split_once(',')
            .ok_or_else(|| parse_err(loc(), format!("expected `channel,t_ps`, found `{line}`")))?;
        let code: u8 = ch
            .parse()
            .map_err(|_| parse_err(loc(), format!("bad channel `{ch}`")))?;
        let t_ps: u64 = t
            .parse()
            .map_err(|_| parse_err(loc(), format!("bad timestamp `{t}`")))?;
        let channel = channel(code, loc)?;
        order.check(t_ps, loc)?;
        tags.push(TimeTag { t_ps, channel });
    }
    Ok(tags)
}

pub fn read_bin<R: Read>(mut reader: R) -> Result<Vec<TimeTag>, FormatError> {
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|_| parse_err("byte 0".into(), "file shorter than the magic header"))?;
    if &magic != BIN_MAGIC {
        return Err(parse_err("byte 0".into(), "bad magic, expected SPTT0001"));
    }
    let mut data = Vec::new();
    reader.read_to_end(&mut data)?;
    if data.len() % BIN_RECORD_LEN != 0 {
        let offset = BIN_MAGIC.len() + data.len() / BIN_RECORD_LEN * BIN_RECORD_LEN;
        return Err(parse_err(format!("byte {offset}"), "truncated record"));
    }
    let mut tags = Vec::with_capacity(data.len() / BIN_RECORD_LEN);
    let mut order = OrderCheck { prev: None };
    for (i, rec) in data.chunks_exact(BIN_RECORD_LEN).enumerate() {
        let loc = || {
            format!(
                "byte {} (record {})",
                BIN_MAGIC.len() + i * BIN_RECORD_LEN,
                i + 1
            )
        };
        let channel = channel(rec[0], loc)?;
        let t_ps = u64::from_le_bytes(rec[1..].try_into().expect("record slice is 8 bytes"));
        order.check(t_ps, loc)?;
        tags.push(TimeTag { t_ps, channel });
    }
    Ok(tags)
}

/// Reads a tag file, detecting the format from the BIN magic.
pub fn read_tags(path: &Path, duration_ps: Option<u64>) -> Result<TagStream, FormatError> {
    let mut reader = BufReader::new(File::open(path)?);
    let is_bin = reader.fill_buf()?.starts_with(BIN_MAGIC);
    let tags = if is_bin {
        read_bin(reader)?
    } else {
        read_csv(reader)?
    };
    TagStream::new(tags, duration_ps)
        .map_err(|e| parse_err(path.display().to_string(), e.to_string()))
}

/// Streaming writer for either format.
pub struct TagWriter<W: Write> {
    inner: W,
    format: TagFormat,
    count: u64,
}

impl<W: Write> TagWriter<W> {
    pub fn new(mut inner: W, format: TagFormat) -> io::Result<Self> {
        match format {
            TagFormat::Csv => writeln!(inner, "{CSV_HEADER}")?,
            TagFormat::Bin => inner.write_all(BIN_MAGIC)?,
        }
        Ok(TagWriter {
            inner,
            format,
            count: 0,
        })
    }

    pub fn write(&mut self, tag: &TimeTag) -> io::Result<()> {
        self.count += 1;
        match self.format {
            TagFormat::Csv => writeln!(self.inner, "{},{}", tag.channel.code(), tag.t_ps),
            TagFormat::Bin => {
                let mut rec = [0u8; BIN_RECORD_LEN];
                rec[0] = tag.channel.code();
                rec[1..].copy_from_slice(&tag.t_ps.to_le_bytes());
                self.inner.write_all(&rec)
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_tags<'a>(
    path: &Path,
    format: TagFormat,
    tags: impl IntoIterator<Item = &'a TimeTag>,
) -> io::Result<u64> {
    let mut w = TagWriter::new(BufWriter::new(File::create(path)?), format)?;
    for tag in tags {
        w.write(tag)?;
    }
    let n = w.count();
    w.finish()?;
    Ok(n)
}
