//! The chunked motion container.
//!
//! A container is a version number plus an ordered list of tagged chunks; each
//! chunk is an ordered list of named fields holding integers, 64-bit floats or
//! text. The same structure has two encodings:
//!
//! * binary: `b"HOIK"`, `u32` version, `u32` chunk count, then per chunk a
//!   `u16`-length tag, `u32` field count and per field a `u16`-length name, a
//!   kind byte (`0` ints, `1` floats, `2` text), a `u32` row width, a `u64`
//!   element count and the little-endian payload;
//! * text: a `hoikit-container <version>` line, then `chunk <tag>` … `end`
//!   blocks whose fields are written as `<name> <i|f> <count> <width>`
//!   followed by rows of values, or `<name> s <escaped text>`.
//!
//! Floats are written in shortest round-trip form, so both encodings are
//! lossless. Readers reject unknown versions.
//!
//! Chunk tags in use: `motion`, `keyset`, `bps`, `windows`, `rollout`,
//! `condition`.

mod container;
mod records;

pub use container::{Chunk, Container, Encoding, Field, Value, CONTAINER_VERSION};
pub(crate) use records::{
    read_meta, read_skeleton, record_width, write_meta, write_skeleton, FrameRecord,
};
pub use records::{read_sequence, sequence_chunk, sequence_from_chunk, write_sequence};
