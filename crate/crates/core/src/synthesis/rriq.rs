//! `RRIQ` frame-sequence container.
//!
//! All fields little-endian:
//!
//! | offset | type        | field                          |
//! |--------|-------------|--------------------------------|
//! | 0      | `[u8; 4]`   | magic `b"RRIQ"`                |
//! | 4      | `u16`       | version (currently 1)          |
//! | 6      | `f64`       | carrier_start_hz               |
//! | 14     | `f64`       | carrier_stop_hz                |
//! | 22     | `f64`       | bandwidth_hz                   |
//! | 30     | `f64`       | chirp_duration_s               |
//! | 38     | `u32`       | samples_per_chirp              |
//! | 42     | `u32`       | chirps_per_frame               |
//! | 46     | `f64`       | frame_rate_hz                  |
//! | 54     | `u64`       | frame count F                  |
//! | 62     | `f32` pairs | F × chirps × samples × (I, Q)  |
//! | …      | `f64` pairs | F × (breath_rate_bpm, displacement_m) |

use std::io::{self, Read, Write};

use num_complex::Complex;

use super::config::RadarConfig;
use super::frames::{Frame, FrameSequence, TruthRecord};
use crate::error::{Error, Result};
use crate::num::Real;

pub const MAGIC: [u8; 4] = *b"RRIQ";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 62;

pub fn write_rriq<T: Real, W: Write>(seq: &FrameSequence<T>, mut w: W) -> Result<()> {
    seq.validate()?;
    let c = &seq.config;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [
        c.carrier_start_hz,
        c.carrier_stop_hz,
        c.bandwidth_hz,
        c.chirp_duration_s,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(c.samples_per_chirp as u32).to_le_bytes())?;
    w.write_all(&(c.chirps_per_frame as u32).to_le_bytes())?;
    w.write_all(&c.frame_rate_hz.to_le_bytes())?;
    w.write_all(&(seq.frames.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(c.chirps_per_frame * c.samples_per_chirp * 8);
    for f in &seq.frames {
        buf.clear();
        for s in f.data() {
            buf.extend_from_slice(&(s.re.to_f64_lossy() as f32).to_le_bytes());
            buf.extend_from_slice(&(s.im.to_f64_lossy() as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    for t in &seq.truth {
        w.write_all(&t.breath_rate_bpm.to_le_bytes())?;
        w.write_all(&t.displacement_m.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            kind: "RRIQ",
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        match self.inner.read_exact(&mut b) {
            Ok(()) => {
                self.offset += N as u64;
                Ok(b)
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                Err(self.fail(format!("truncated while reading {what}")))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what)?))
    }
}

pub fn read_rriq<T: Real, R: Read>(r: R) -> Result<FrameSequence<T>> {
    let mut cur = Cursor { inner: r, offset: 0 };
    let magic: [u8; 4] = cur.take("magic")?;
    if magic != MAGIC {
        cur.offset = 0;
        return Err(cur.fail("bad magic, expected RRIQ"));
    }
    let version = u16::from_le_bytes(cur.take("version")?);
    if version != VERSION {
        cur.offset -= 2;
        return Err(cur.fail(format!("unsupported version {version}")));
    }
    let config = RadarConfig {
        carrier_start_hz: cur.f64("carrier_start_hz")?,
        carrier_stop_hz: cur.f64("carrier_stop_hz")?,
        bandwidth_hz: cur.f64("bandwidth_hz")?,
        chirp_duration_s: cur.f64("chirp_duration_s")?,
        samples_per_chirp: cur.u32("samples_per_chirp")? as usize,
        chirps_per_frame: cur.u32("chirps_per_frame")? as usize,
        frame_rate_hz: cur.f64("frame_rate_hz")?,
    };
    if let Err(e) = config.validate() {
        return Err(cur.fail(format!("invalid radar header: {e}")));
    }
    let count = u64::from_le_bytes(cur.take("frame count")?) as usize;
    let (nc, ns) = (config.chirps_per_frame, config.samples_per_chirp);
    let mut raw = vec![0u8; nc * ns * 8];
    let mut frames = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        if let Err(e) = cur.inner.read_exact(&mut raw) {
            return Err(if e.kind() == io::ErrorKind::UnexpectedEof {
                cur.fail(format!("truncated in frame {i}"))
            } else {
                e.into()
            });
        }
        cur.offset += raw.len() as u64;
        let data = raw
            .chunks_exact(8)
            .map(|b| {
                let re = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                let im = f32::from_le_bytes([b[4], b[5], b[6], b[7]]);
                Complex::new(T::lit(re as f64), T::lit(im as f64))
            })
            .collect();
        frames.push(Frame::from_vec(nc, ns, data)?);
    }
    let mut truth = Vec::with_capacity(count);
    for _ in 0..count {
        let breath_rate_bpm = cur.f64("truth rate")?;
        let displacement_m = cur.f64("truth displacement")?;
        truth.push(TruthRecord {
            breath_rate_bpm,
            displacement_m,
        });
    }
    let mut probe = [0u8; 1];
    if cur.inner.read(&mut probe)? != 0 {
        return Err(cur.fail("trailing bytes after truth block"));
    }
    Ok(FrameSequence { config, frames, truth })
}

pub fn save_rriq<T: Real>(seq: &FrameSequence<T>, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_rriq(seq, io::BufWriter::new(f))
}

pub fn load_rriq<T: Real>(path: &std::path::Path) -> Result<FrameSequence<T>> {
    let f = std::fs::File::open(path)?;
    read_rriq(io::BufReader::new(f))
}
