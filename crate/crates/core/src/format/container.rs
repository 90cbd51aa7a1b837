use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

pub const CONTAINER_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"HOIK";
const TEXT_MAGIC: &str = "hoikit-container";

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Ints(Vec<i64>),
    Floats(Vec<f64>),
    Text(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub name: String,
    pub value: Value,
    /// Row width used for text layout; 0 means one row.
    pub width: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chunk {
    pub tag: String,
    pub fields: Vec<Field>,
}

impl Chunk {
    pub fn new(tag: &str) -> Self {
        Self {
            tag: tag.to_string(),
            fields: Vec::new(),
        }
    }

    pub fn ints(mut self, name: &str, v: Vec<i64>) -> Self {
        self.fields.push(Field {
            name: name.into(),
            value: Value::Ints(v),
            width: 0,
        });
        self
    }

    pub fn int(self, name: &str, v: i64) -> Self {
        self.ints(name, vec![v])
    }

    pub fn floats(self, name: &str, v: Vec<f64>) -> Self {
        self.floats_rows(name, v, 0)
    }

    pub fn floats_rows(mut self, name: &str, v: Vec<f64>, width: usize) -> Self {
        self.fields.push(Field {
            name: name.into(),
            value: Value::Floats(v),
            width: width as u32,
        });
        self
    }

    pub fn float(self, name: &str, v: f64) -> Self {
        self.floats(name, vec![v])
    }

    pub fn text(mut self, name: &str, v: &str) -> Self {
        self.fields.push(Field {
            name: name.into(),
            value: Value::Text(v.to_string()),
            width: 0,
        });
        self
    }

    fn field(&self, name: &str) -> Result<&Value> {
        self.fields
            .iter()
            .find(|f| f.name == name)
            .map(|f| &f.value)
            .ok_or_else(|| Error::format(format!("chunk `{}` lacks field `{name}`", self.tag)))
    }

    pub fn has(&self, name: &str) -> bool {
        self.fields.iter().any(|f| f.name == name)
    }

    pub fn get_ints(&self, name: &str) -> Result<&[i64]> {
        match self.field(name)? {
            Value::Ints(v) => Ok(v),
            _ => Err(Error::format(format!("field `{name}` is not integer"))),
        }
    }

    pub fn get_int(&self, name: &str) -> Result<i64> {
        match self.get_ints(name)? {
            [v] => Ok(*v),
            _ => Err(Error::format(format!("field `{name}` is not a scalar"))),
        }
    }

    /// Non-negative integer scalar as `usize`.
    pub fn get_usize(&self, name: &str) -> Result<usize> {
        let v = self.get_int(name)?;
        usize::try_from(v).map_err(|_| Error::format(format!("field `{name}` is negative ({v})")))
    }

    pub fn get_floats(&self, name: &str) -> Result<&[f64]> {
        match self.field(name)? {
            Value::Floats(v) => Ok(v),
            _ => Err(Error::format(format!("field `{name}` is not float"))),
        }
    }

    pub fn get_float(&self, name: &str) -> Result<f64> {
        match self.get_floats(name)? {
            [v] => Ok(*v),
            _ => Err(Error::format(format!("field `{name}` is not a scalar"))),
        }
    }

    pub fn get_text(&self, name: &str) -> Result<&str> {
        match self.field(name)? {
            Value::Text(v) => Ok(v),
            _ => Err(Error::format(format!("field `{name}` is not text"))),
        }
    }

    /// Float field that must hold exactly `len` values.
    pub fn get_floats_len(&self, name: &str, len: usize) -> Result<&[f64]> {
        let v = self.get_floats(name)?;
        if v.len() != len {
            return Err(Error::format(format!(
                "field `{name}` has {} values, expected {len}",
                v.len()
            )));
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Binary,
    Text,
}

impl Encoding {
    /// `.hoit` files are text; everything else is binary.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("hoit") => Encoding::Text,
            _ => Encoding::Binary,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub version: u32,
    pub chunks: Vec<Chunk>,
}

impl Default for Container {
    fn default() -> Self {
        Self {
            version: CONTAINER_VERSION,
            chunks: Vec::new(),
        }
    }
}

impl Container {
    pub fn new(chunks: Vec<Chunk>) -> Self {
        Self {
            version: CONTAINER_VERSION,
            chunks,
        }
    }

    pub fn chunks_tagged<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a Chunk> + 'a {
        self.chunks.iter().filter(move |c| c.tag == tag)
    }

    pub fn chunk(&self, tag: &str) -> Result<&Chunk> {
        self.chunks
            .iter()
            .find(|c| c.tag == tag)
            .ok_or_else(|| Error::format(format!("container has no `{tag}` chunk")))
    }

    pub fn encode(&self, enc: Encoding) -> Vec<u8> {
        match enc {
            Encoding::Binary => self.to_binary(),
            Encoding::Text => self.to_text().into_bytes(),
        }
    }

    /// Detects the encoding from the leading bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(MAGIC) {
            Self::from_binary(bytes)
        } else if bytes.starts_with(TEXT_MAGIC.as_bytes()) {
            let s = std::str::from_utf8(bytes)
                .map_err(|_| Error::format("text container is not UTF-8"))?;
            Self::from_text(s)
        } else {
            Err(Error::format("unrecognized container header"))
        }
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode(Encoding::for_path(path)))?;
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.chunks.len() as u32).to_le_bytes());
        for c in &self.chunks {
            put_str16(&mut out, &c.tag);
            out.extend_from_slice(&(c.fields.len() as u32).to_le_bytes());
            for f in &c.fields {
                put_str16(&mut out, &f.name);
                let kind: u8 = match f.value {
                    Value::Ints(_) => 0,
                    Value::Floats(_) => 1,
                    Value::Text(_) => 2,
                };
                out.push(kind);
                out.extend_from_slice(&f.width.to_le_bytes());
                match &f.value {
                    Value::Ints(v) => {
                        out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                        v.iter()
                            .for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
                    }
                    Value::Floats(v) => {
                        out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                        v.iter()
                            .for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
                    }
                    Value::Text(s) => {
                        out.extend_from_slice(&(s.len() as u64).to_le_bytes());
                        out.extend_from_slice(s.as_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("bad magic"));
        }
        let version = r.u32()?;
        if version != CONTAINER_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let n_chunks = r.u32()? as usize;
        let mut chunks = Vec::new();
        for _ in 0..n_chunks {
            let tag = r.str16()?;
            let n_fields = r.u32()? as usize;
            let mut fields = Vec::new();
            for _ in 0..n_fields {
                let name = r.str16()?;
                let kind = r.take(1)?[0];
                let width = r.u32()?;
                let len = usize::try_from(r.u64()?).map_err(|_| Error::format("field too long"))?;
                let value = match kind {
                    0 => Value::Ints(
                        r.take(
                            len.checked_mul(8)
                                .ok_or_else(|| Error::format("field too long"))?,
                        )?
                        .chunks_exact(8)
                        .map(|b| i64::from_le_bytes(b.try_into().unwrap()))
                        .collect(),
                    ),
                    1 => Value::Floats(
                        r.take(
                            len.checked_mul(8)
                                .ok_or_else(|| Error::format("field too long"))?,
                        )?
                        .chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                        .collect(),
                    ),
                    2 => Value::Text(
                        String::from_utf8(r.take(len)?.to_vec())
                            .map_err(|_| Error::format("text field is not UTF-8"))?,
                    ),
                    k => return Err(Error::format(format!("unknown field kind {k}"))),
                };
                fields.push(Field { name, value, width });
            }
            chunks.push(Chunk { tag, fields });
        }
        if r.pos != bytes.len() {
            return Err(Error::format("trailing bytes after last chunk"));
        }
        Ok(Self { version, chunks })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{TEXT_MAGIC} {}", self.version);
        for c in &self.chunks {
            let _ = writeln!(s, "chunk {}", c.tag);
            for f in &c.fields {
                match &f.value {
                    Value::Text(t) => {
                        let _ = writeln!(s, "{} s {}", f.name, escape(t));
                    }
                    Value::Ints(v) => write_rows(&mut s, &f.name, 'i', v, f.width),
                    Value::Floats(v) => write_rows(&mut s, &f.name, 'f', v, f.width),
                }
            }
            s.push_str("end\n");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format("empty text container"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(TEXT_MAGIC) {
            return Err(Error::format("bad text header"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format("text header lacks a version"))?;
        if version != CONTAINER_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let mut chunks = Vec::new();
        let mut current: Option<Chunk> = None;
        let mut pending: Option<(String, char, usize, u32, Vec<String>)> = None;
        for (ln, line) in lines {
            let err = |m: &str| Error::format(format!("line {}: {m}", ln + 1));
            if let Some((_, _, count, _, toks)) = pending.as_mut() {
                toks.extend(line.split_whitespace().map(str::to_string));
                if toks.len() > *count {
                    return Err(err("too many values"));
                }
                if toks.len() == *count {
                    let (name, kind, _, width, toks) = pending.take().unwrap();
                    let value = parse_values(kind, &toks).map_err(|m| err(&m))?;
                    current
                        .as_mut()
                        .unwrap()
                        .fields
                        .push(Field { name, value, width });
                }
                continue;
            }
            if let Some(tag) = line.strip_prefix("chunk ") {
                if current.is_some() {
                    return Err(err("nested chunk"));
                }
                current = Some(Chunk::new(tag.trim()));
                continue;
            }
            if line.trim() == "end" {
                chunks.push(current.take().ok_or_else(|| err("`end` outside chunk"))?);
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let chunk = current.as_mut().ok_or_else(|| err("field outside chunk"))?;
            let mut it = line.splitn(3, ' ');
            let name = it.next().unwrap_or("").to_string();
            let kind = it.next().ok_or_else(|| err("missing field kind"))?;
            let rest = it.next().unwrap_or("");
            match kind {
                "s" => chunk.fields.push(Field {
                    name,
                    value: Value::Text(unescape(rest).map_err(|m| err(&m))?),
                    width: 0,
                }),
                "i" | "f" => {
                    let mut nums = rest.split_whitespace();
                    let count: usize = nums
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err("bad count"))?;
                    let width: u32 = nums
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err("bad width"))?;
                    let kind = kind.chars().next().unwrap();
                    if count == 0 {
                        chunk.fields.push(Field {
                            name,
                            value: parse_values(kind, &[]).unwrap(),
                            width,
                        });
                    } else {
                        pending = Some((name, kind, count, width, Vec::with_capacity(count)));
                    }
                }
                _ => return Err(err("unknown field kind")),
            }
        }
        if pending.is_some() || current.is_some() {
            return Err(Error::format("truncated text container"));
        }
        Ok(Self { version, chunks })
    }
}

fn write_rows<T: std::fmt::Debug>(s: &mut String, name: &str, kind: char, v: &[T], width: u32) {
    let _ = writeln!(s, "{name} {kind} {} {width}", v.len());
    let w = if width == 0 {
        v.len().max(1)
    } else {
        width as usize
    };
    for row in v.chunks(w) {
        let mut line = String::new();
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{x:?}");
        }
        s.push_str(&line);
        s.push('\n');
    }
}

fn parse_values(kind: char, toks: &[String]) -> std::result::Result<Value, String> {
    match kind {
        'i' => toks
            .iter()
            .map(|t| t.parse::<i64>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<std::result::Result<_, _>>()
            .map(Value::Ints),
        _ => toks
            .iter()
            .map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<std::result::Result<_, _>>()
            .map(Value::Floats),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                other => return Err(format!("bad escape {other:?}")),
            }
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

fn put_str16(out: &mut Vec<u8>, s: &str) {
    let b = s.as_bytes();
    out.extend_from_slice(&(b.len().min(u16::MAX as usize) as u16).to_le_bytes());
    out.extend_from_slice(&b[..b.len().min(u16::MAX as usize)]);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(e) => {
                let s = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(Error::format(format!(
                "truncated container at byte {}",
                self.pos
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str16(&mut self) -> Result<String> {
        let n = u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::format("name is not UTF-8"))
    }
}
