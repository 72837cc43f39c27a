//! Snapshot files.
//!
//! Layout, all little-endian: the magic `SWPT2D\0\0`, a `u32` version, a
//! `u64` header length, the header as UTF-8 JSON, then frames of a `u64`
//! level followed by `nvars * ny * nx` `f64` values in `[var][y][x]` order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldState;

pub const MAGIC: &[u8; 8] = b"SWPT2D\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot I/O: {0}")]
    Io(#[from] io::Error),
    #[error("bad snapshot header: {0}")]
    Header(String),
    #[error("frame for level {level} written twice")]
    DuplicateLevel { level: u64 },
    #[error("frame levels out of order: {level} after {last}")]
    OutOfOrder { level: u64, last: u64 },
    #[error("frame shape {got:?} does not match header {want:?}")]
    Shape {
        got: (usize, usize, usize),
        want: (usize, usize, usize),
    },
    #[error("truncated frame after level {0:?}")]
    Truncated(Option<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub problem: String,
    pub nx: usize,
    pub ny: usize,
    pub nvars: usize,
    pub b: usize,
    pub dt: f64,
    pub dx: f64,
    pub dy: f64,
    pub params: BTreeMap<String, f64>,
}

impl SnapshotHeader {
    fn frame_values(&self) -> usize {
        self.nvars * self.ny * self.nx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub level: u64,
    pub field: FieldState,
}

pub struct SnapshotWriter {
    out: BufWriter<File>,
    header: SnapshotHeader,
    last: Option<u64>,
    frames: usize,
}

impl SnapshotWriter {
    pub fn create(path: &Path, header: SnapshotHeader) -> Result<Self, SnapshotError> {
        let mut out = BufWriter::new(File::create(path)?);
        let json = serde_json::to_vec(&header).map_err(|e| SnapshotError::Header(e.to_string()))?;
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        Ok(SnapshotWriter {
            out,
            header,
            last: None,
            frames: 0,
        })
    }

    pub fn header(&self) -> &SnapshotHeader {
        &self.header
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Appends one frame. Levels must strictly increase.
    pub fn append(&mut self, level: u64, field: &FieldState) -> Result<(), SnapshotError> {
        let want = (self.header.nvars, self.header.nx, self.header.ny);
        let got = (field.nvars, field.nx, field.ny);
        if got != want {
            return Err(SnapshotError::Shape { got, want });
        }
        if let Some(last) = self.last {
            if level == last {
                return Err(SnapshotError::DuplicateLevel { level });
            }
            if level < last {
                return Err(SnapshotError::OutOfOrder { level, last });
            }
        }
        self.out.write_all(&level.to_le_bytes())?;
        let mut buf = Vec::with_capacity(field.data.len() * 8);
        for v in &field.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf)?;
        self.last = Some(level);
        self.frames += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize, SnapshotError> {
        self.out.flush()?;
        Ok(self.frames)
    }
}

fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "partial frame"));
        }
        filled += n;
    }
    Ok(true)
}

/// Reads a whole snapshot file.
pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Vec<Frame>), SnapshotError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::Header("bad magic".into()));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let version = u32::from_le_bytes(u32b);
    if version != VERSION {
        return Err(SnapshotError::Header(format!("unsupported version {version}")));
    }
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b)?;
    let len = u64::from_le_bytes(u64b) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: SnapshotHeader =
        serde_json::from_slice(&json).map_err(|e| SnapshotError::Header(e.to_string()))?;

    let count = header.frame_values();
    let mut frames = Vec::new();
    let mut last = None;
    let mut body = vec![0u8; count * 8];
    loop {
        if !read_exact_or_eof(&mut r, &mut u64b)? {
            break;
        }
        let level = u64::from_le_bytes(u64b);
        r.read_exact(&mut body).map_err(|_| SnapshotError::Truncated(last))?;
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        frames.push(Frame {
            level,
            field: FieldState {
                nvars: header.nvars,
                nx: header.nx,
                ny: header.ny,
                level: level as usize,
                data,
            },
        });
        last = Some(level);
    }
    Ok((header, frames))
}

/// A rank's share of one frame: a block of local columns stored in a frame
/// rotated by `offset` relative to true coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePiece {
    pub level: u64,
    /// True x of local column 0 before the frame offset is applied.
    pub x0: usize,
    pub offset: (i64, i64),
    pub plane: FieldState,
}

impl FramePiece {
    /// Copies the piece into a whole-domain field at true coordinates.
    pub fn place_into(&self, field: &mut FieldState) {
        let (nx, ny) = (field.nx as i64, field.ny as i64);
        let p = &self.plane;
        for v in 0..p.nvars {
            for y in 0..p.ny {
                let ty = (y as i64 + self.offset.1).rem_euclid(ny) as usize;
                let row = &p.data[p.index(v, 0, y)..p.index(v, 0, y) + p.nx];
                let tx0 = (self.x0 as i64 + self.offset.0).rem_euclid(nx) as usize;
                if tx0 + p.nx <= field.nx {
                    let start = field.index(v, tx0, ty);
                    field.data[start..start + p.nx].copy_from_slice(row);
                } else {
                    for (x, val) in row.iter().enumerate() {
                        field.set(v, (tx0 + x) % field.nx, ty, *val);
                    }
                }
            }
        }
    }
}

/// Assembles per-rank frame pieces into whole frames, written in level order
/// once every rank has contributed.
pub struct SnapshotSink {
    writer: SnapshotWriter,
    ranks: usize,
    open: BTreeMap<u64, (FieldState, usize)>,
    path: PathBuf,
}

impl SnapshotSink {
    pub fn create(path: &Path, header: SnapshotHeader, ranks: usize) -> Result<Self, SnapshotError> {
        Ok(SnapshotSink {
            writer: SnapshotWriter::create(path, header)?,
            ranks,
            open: BTreeMap::new(),
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn submit(&mut self, piece: FramePiece) -> Result<(), SnapshotError> {
        let h = self.writer.header();
        let entry = self
            .open
            .entry(piece.level)
            .or_insert_with(|| (FieldState::zeros(h.nvars, h.nx, h.ny), 0));
        piece.place_into(&mut entry.0);
        entry.1 += 1;
        self.flush_ready()
    }

    fn flush_ready(&mut self) -> Result<(), SnapshotError> {
        while let Some((&level, (_, count))) = self.open.iter().next() {
            if *count < self.ranks {
                break;
            }
            let (mut field, _) = self.open.remove(&level).expect("present");
            field.level = level as usize;
            self.writer.append(level, &field)?;
        }
        Ok(())
    }

    /// Closes the file; fails if any frame is still missing pieces.
    pub fn finish(self) -> Result<usize, SnapshotError> {
        if let Some((&level, _)) = self.open.iter().next() {
            return Err(SnapshotError::Truncated(Some(level)));
        }
        self.writer.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(nx: usize, ny: usize) -> SnapshotHeader {
        SnapshotHeader {
            problem: "heat".into(),
            nx,
            ny,
            nvars: 2,
            b: 4,
            dt: 0.1,
            dx: 0.25,
            dy: 0.25,
            params: BTreeMap::from([("alpha".to_string(), 1.0)]),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.swpt");
        let mut w = SnapshotWriter::create(&path, header(3, 2)).unwrap();
        let f0 = FieldState::from_fn(2, 3, 2, |v, x, y| (v * 100 + x * 10 + y) as f64 / 7.0);
        let mut f1 = f0.clone();
        f1.data[3] = f64::from_bits(0x7fef_ffff_ffff_ffff);
        f1.data[4] = -0.0;
        w.append(0, &f0).unwrap();
        w.append(2, &f1).unwrap();
        assert!(matches!(w.append(2, &f1), Err(SnapshotError::DuplicateLevel { level: 2 })));
        assert!(matches!(w.append(1, &f1), Err(SnapshotError::OutOfOrder { .. })));
        assert_eq!(w.finish().unwrap(), 2);

        let (h, frames) = read_snapshot(&path).unwrap();
        assert_eq!(h, header(3, 2));
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].level, 2);
        for (a, b) in frames[1].field.data.iter().zip(&f1.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
    }

    #[test]
    fn sink_reassembles_rotated_pieces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.swpt");
        let truth = FieldState::from_fn(2, 4, 2, |v, x, y| (v * 100 + x * 10 + y) as f64);
        let mut sink = SnapshotSink::create(&path, header(4, 2), 2).unwrap();
        // Frame rotated by (-1, -1): local (x, y) holds true (x0 + x - 1, y - 1).
        let piece = |x0: usize| {
            let plane = FieldState::from_fn(2, 2, 2, |v, x, y| {
                truth.get_wrapped(v, x0 as i64 + x as i64 - 1, y as i64 - 1)
            });
            FramePiece {
                level: 5,
                x0,
                offset: (-1, -1),
                plane,
            }
        };
        sink.submit(piece(2)).unwrap();
        sink.submit(piece(0)).unwrap();
        sink.finish().unwrap();
        let (_, frames) = read_snapshot(&path).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].field.data, truth.data);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.swpt");
        std::fs::write(&path, b"NOTASNAPSHOT").unwrap();
        assert!(read_snapshot(&path).is_err());
    }
}
