//! TRV1 container: an uncompressed little-endian thermal video file.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "TRV1"
//!      4     4  version (u32, = 1)
//!      8     4  width (u32)
//!     12     4  height (u32)
//!     16     8  frame_count (u64)
//!     24     4  fps_num (u32)
//!     28     4  fps_den (u32)
//!     32     8  temp_scale (f64)
//!     40     8  temp_offset (f64)
//!     48     …  frame_count × height × width × u16, row-major
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::video::{check_calibration, FrameRate, ThermalVideo, VideoError};

pub const MAGIC: [u8; 4] = *b"TRV1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 48;

#[derive(Debug, Error)]
pub enum TrvError {
    #[error("I/O error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: io::Error,
    },
    #[error("bad magic {found:?}, expected \"TRV1\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported TRV version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt payload: expected {expected} bytes, found {actual}")]
    Corrupt { expected: u64, actual: u64 },
    #[error("invalid video: {0}")]
    Invariant(#[from] VideoError),
}

/// Header fields of a TRV1 file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrvHeader {
    pub width: u32,
    pub height: u32,
    pub frame_count: u64,
    pub frame_rate: FrameRate,
    pub temp_scale: f64,
    pub temp_offset: f64,
}

impl TrvHeader {
    pub fn payload_len(&self) -> u64 {
        self.frame_count * self.width as u64 * self.height as u64 * 2
    }

    fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut buf = [0u8; HEADER_LEN as usize];
        buf[0..4].copy_from_slice(&MAGIC);
        buf[4..8].copy_from_slice(&VERSION.to_le_bytes());
        buf[8..12].copy_from_slice(&self.width.to_le_bytes());
        buf[12..16].copy_from_slice(&self.height.to_le_bytes());
        buf[16..24].copy_from_slice(&self.frame_count.to_le_bytes());
        buf[24..28].copy_from_slice(&self.frame_rate.num.to_le_bytes());
        buf[28..32].copy_from_slice(&self.frame_rate.den.to_le_bytes());
        buf[32..40].copy_from_slice(&self.temp_scale.to_le_bytes());
        buf[40..48].copy_from_slice(&self.temp_offset.to_le_bytes());
        buf
    }

    fn decode(buf: &[u8; HEADER_LEN as usize]) -> Result<Self, TrvError> {
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        let magic: [u8; 4] = buf[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(TrvError::BadMagic { found: magic });
        }
        let version = u32_at(4);
        if version != VERSION {
            return Err(TrvError::UnsupportedVersion(version));
        }
        let header = TrvHeader {
            width: u32_at(8),
            height: u32_at(12),
            frame_count: u64_at(16),
            frame_rate: FrameRate::new(u32_at(24), u32_at(28))?,
            temp_scale: f64_at(32),
            temp_offset: f64_at(40),
        };
        check_calibration(header.temp_scale, header.temp_offset)?;
        if header.width == 0 || header.height == 0 {
            return Err(VideoError::ZeroGeometry {
                width: header.width,
                height: header.height,
            }
            .into());
        }
        if header.frame_count == 0 {
            return Err(VideoError::Empty.into());
        }
        Ok(header)
    }
}

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> CountingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<(), TrvError> {
        self.inner.write_all(bytes).map_err(|source| TrvError::Io {
            offset: self.written,
            source,
        })?;
        self.written += bytes.len() as u64;
        Ok(())
    }
}

/// Serialize `video` as TRV1, returning the number of bytes written.
pub fn write_trv<W: Write>(video: &ThermalVideo, sink: W) -> Result<u64, TrvError> {
    let header = TrvHeader {
        width: video.width(),
        height: video.height(),
        frame_count: video.frame_count() as u64,
        frame_rate: video.frame_rate(),
        temp_scale: video.temp_scale(),
        temp_offset: video.temp_offset(),
    };
    let mut out = CountingWriter {
        inner: sink,
        written: 0,
    };
    out.put(&header.encode())?;
    let mut chunk = Vec::with_capacity(video.frame_len() * 2);
    for frame in video.frames() {
        chunk.clear();
        for &px in frame {
            chunk.extend_from_slice(&px.to_le_bytes());
        }
        out.put(&chunk)?;
    }
    let offset = out.written;
    out.inner
        .flush()
        .map_err(|source| TrvError::Io { offset, source })?;
    Ok(out.written)
}

/// Read the 48-byte header only.
pub fn read_header<R: Read>(source: &mut R) -> Result<TrvHeader, TrvError> {
    let mut buf = [0u8; HEADER_LEN as usize];
    let got = read_fully(source, &mut buf)?;
    let seen = got.min(4);
    if buf[..seen] != MAGIC[..seen] || got == 0 {
        let mut found = [0u8; 4];
        found[..seen].copy_from_slice(&buf[..seen]);
        return Err(TrvError::BadMagic { found });
    }
    if got < buf.len() {
        return Err(TrvError::Corrupt {
            expected: HEADER_LEN,
            actual: got as u64,
        });
    }
    TrvHeader::decode(&buf)
}

/// Parse a TRV1 stream. The payload must match the declared frame count
/// exactly; trailing bytes are treated as corruption.
pub fn read_trv<R: Read>(mut source: R) -> Result<ThermalVideo, TrvError> {
    let header = read_header(&mut source)?;
    let expected = header.payload_len();
    let mut payload = Vec::with_capacity(expected.min(1 << 30) as usize);
    let actual = (&mut source)
        .take(expected + 1)
        .read_to_end(&mut payload)
        .map_err(|source| TrvError::Io {
            offset: HEADER_LEN + payload.len() as u64,
            source,
        })? as u64;
    if actual != expected {
        return Err(TrvError::Corrupt { expected, actual });
    }
    let pixels = payload
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    Ok(ThermalVideo::from_pixels(
        header.width,
        header.height,
        header.frame_rate,
        header.temp_scale,
        header.temp_offset,
        pixels,
    )?)
}

/// Write a TRV1 file. The video must satisfy its invariants, which
/// [`ThermalVideo`] guarantees by construction.
pub fn write_trv_file(video: &ThermalVideo, path: &Path) -> Result<u64, TrvError> {
    let file = File::create(path).map_err(|source| TrvError::Io { offset: 0, source })?;
    write_trv(video, BufWriter::new(file))
}

/// Read a TRV1 file; the video's `source_id` is set to the file stem.
pub fn read_trv_file(path: &Path) -> Result<ThermalVideo, TrvError> {
    let file = File::open(path).map_err(|source| TrvError::Io { offset: 0, source })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(read_trv(BufReader::new(file))?.with_source_id(id))
}

fn read_fully<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<usize, TrvError> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(source) => {
                return Err(TrvError::Io {
                    offset: filled as u64,
                    source,
                })
            }
        }
    }
    Ok(filled)
}
