//! Self-describing binary container for frames, maps, chirp blocks and
//! latents, plus a descriptor-driven importer for externally recorded raw
//! ADC files.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "RDS1" | version u32
//! config: num_chirps u32, num_tx u32, num_rx u32, samples_per_chirp u32,
//!         start_frequency f64, frequency_slope f64, sample_rate f64,
//!         adc_start_time f64, ramp_end_time f64, idle_time f64, frame_rate f64
//! record_kind u8 | squash flag u8 [+ mean f64 + std f64]
//! gt keys: count u32, per key (len u32, utf-8)
//! dims: ndim u32, dims u32… | count u64
//! records, each: ndim u32, dims u32…, f32 payload, gt f64 × n_keys
//! ```
//!
//! Every record echoes the header dims, so records are fixed-size and any
//! index is addressable without reading its predecessors. Truncated or
//! over-long files are rejected outright.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::config::RadarConfig;
use crate::dsp::{MapKind, MapScale, RadarMap, SquashStats};
use crate::error::Error;
use crate::simsig::AdcFrame;
use crate::Result;

const MAGIC: &[u8; 4] = b"RDS1";
const VERSION: u32 = 1;

/// What one record holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Adc,
    RdMap,
    RaMap,
    ChirpBlock,
    Latent,
}

impl RecordKind {
    pub fn tag(self) -> u8 {
        match self {
            RecordKind::Adc => 0,
            RecordKind::RdMap => 1,
            RecordKind::RaMap => 2,
            RecordKind::ChirpBlock => 3,
            RecordKind::Latent => 4,
        }
    }

    pub fn from_tag(tag: u8, offset: u64) -> Result<Self> {
        Ok(match tag {
            0 => RecordKind::Adc,
            1 => RecordKind::RdMap,
            2 => RecordKind::RaMap,
            3 => RecordKind::ChirpBlock,
            4 => RecordKind::Latent,
            other => return Err(Error::format(offset, format!("unknown record kind {other}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordKind::Adc => "adc",
            RecordKind::RdMap => "rd_map",
            RecordKind::RaMap => "ra_map",
            RecordKind::ChirpBlock => "chirp_block",
            RecordKind::Latent => "latent",
        }
    }
}

/// Container header: configuration, record geometry and optional
/// dataset-level squash statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub config: RadarConfig,
    pub kind: RecordKind,
    pub dims: Vec<usize>,
    pub squash: Option<SquashStats>,
    pub gt_keys: Vec<String>,
}

impl DatasetHeader {
    pub fn record_len(&self) -> usize {
        self.dims.iter().product()
    }

    fn record_bytes(&self) -> u64 {
        4 + 4 * self.dims.len() as u64 + 4 * self.record_len() as u64 + 8 * self.gt_keys.len() as u64
    }

    /// Header for raw ADC frames of `config`.
    pub fn adc(config: &RadarConfig) -> Self {
        DatasetHeader {
            config: config.clone(),
            kind: RecordKind::Adc,
            dims: vec![config.num_chirps, config.num_rx, config.samples_per_chirp],
            squash: None,
            gt_keys: Vec::new(),
        }
    }

    /// Header for radar maps (raw when `squash` is None).
    pub fn map(config: &RadarConfig, kind: MapKind, squash: Option<SquashStats>) -> Self {
        DatasetHeader {
            config: config.clone(),
            kind: match kind {
                MapKind::RangeDoppler => RecordKind::RdMap,
                MapKind::RangeAzimuth => RecordKind::RaMap,
            },
            dims: vec![
                config.range_bins(),
                match kind {
                    MapKind::RangeDoppler => config.num_chirps,
                    MapKind::RangeAzimuth => crate::config::ANGLE_BINS,
                },
            ],
            squash,
            gt_keys: Vec::new(),
        }
    }

    /// Header for latent feature vectors.
    pub fn latent(config: &RadarConfig) -> Self {
        DatasetHeader {
            config: config.clone(),
            kind: RecordKind::Latent,
            dims: vec![crate::vae::LATENT_DIM],
            squash: None,
            gt_keys: Vec::new(),
        }
    }

    pub fn with_gt_keys(mut self, keys: &[&str]) -> Self {
        self.gt_keys = keys.iter().map(|k| k.to_string()).collect();
        self
    }
}

/// One stored record: f32 payload plus per-key ground-truth scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub values: Vec<f32>,
    pub gt: Vec<f64>,
}

impl Record {
    pub fn from_frame(frame: &AdcFrame) -> Record {
        Record {
            values: frame.samples().iter().map(|&v| v as f32).collect(),
            gt: Vec::new(),
        }
    }

    pub fn from_map(map: &RadarMap) -> Record {
        Record {
            values: map.values().iter().map(|&v| v as f32).collect(),
            gt: Vec::new(),
        }
    }

    pub fn with_gt(mut self, gt: Vec<f64>) -> Record {
        self.gt = gt;
        self
    }

    /// Rebuild an [`AdcFrame`] (f32 storage widened back to f64).
    pub fn to_frame(&self, header: &DatasetHeader) -> Result<AdcFrame> {
        if header.kind != RecordKind::Adc {
            return Err(Error::validation(format!(
                "record kind {} is not adc",
                header.kind.name()
            )));
        }
        AdcFrame::from_samples(
            self.values.iter().map(|&v| v as f64).collect(),
            header.config.clone(),
        )
    }

    /// Rebuild a [`RadarMap`]; the scale follows the header squash stats.
    pub fn to_map(&self, header: &DatasetHeader) -> Result<RadarMap> {
        let kind = match header.kind {
            RecordKind::RdMap => MapKind::RangeDoppler,
            RecordKind::RaMap => MapKind::RangeAzimuth,
            other => {
                return Err(Error::validation(format!(
                    "record kind {} is not a map",
                    other.name()
                )))
            }
        };
        let scale = if header.squash.is_some() {
            MapScale::Squashed
        } else {
            MapScale::Raw
        };
        RadarMap::new(
            kind,
            scale,
            self.values.iter().map(|&v| v as f64).collect(),
            header.dims[0],
            header.dims[1],
        )
    }
}

/// An in-memory dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(header: DatasetHeader) -> Self {
        Dataset {
            header,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: Record) -> Result<()> {
        validate_record(&self.header, &record)?;
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn validate_record(header: &DatasetHeader, record: &Record) -> Result<()> {
    if record.values.len() != header.record_len() {
        return Err(Error::shape(
            format!("{} values per record", header.record_len()),
            record.values.len().to_string(),
        ));
    }
    if record.gt.len() != header.gt_keys.len() {
        return Err(Error::shape(
            format!("{} ground-truth scalars", header.gt_keys.len()),
            record.gt.len().to_string(),
        ));
    }
    Ok(())
}

/// Write a dataset to `path`.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    for r in &dataset.records {
        validate_record(&dataset.header, r)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, &dataset.header, dataset.records.len() as u64)?;
    for r in &dataset.records {
        write_record(&mut w, &dataset.header, r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_header<W: Write>(w: &mut W, h: &DatasetHeader, count: u64) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let c = &h.config;
    for v in [c.num_chirps, c.num_tx, c.num_rx, c.samples_per_chirp] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for v in [
        c.start_frequency,
        c.frequency_slope,
        c.sample_rate,
        c.adc_start_time,
        c.ramp_end_time,
        c.idle_time,
        c.frame_rate,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[h.kind.tag()])?;
    match &h.squash {
        None => w.write_all(&[0u8])?,
        Some(s) => {
            w.write_all(&[1u8])?;
            w.write_all(&s.mean.to_le_bytes())?;
            w.write_all(&s.std.to_le_bytes())?;
        }
    }
    w.write_all(&(h.gt_keys.len() as u32).to_le_bytes())?;
    for key in &h.gt_keys {
        w.write_all(&(key.len() as u32).to_le_bytes())?;
        w.write_all(key.as_bytes())?;
    }
    w.write_all(&(h.dims.len() as u32).to_le_bytes())?;
    for &d in &h.dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&count.to_le_bytes())?;
    Ok(())
}

fn write_record<W: Write>(w: &mut W, h: &DatasetHeader, r: &Record) -> Result<()> {
    w.write_all(&(h.dims.len() as u32).to_le_bytes())?;
    for &d in &h.dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    // payload as one little-endian block
    let mut bytes = Vec::with_capacity(4 * r.values.len());
    for v in &r.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    for g in &r.gt {
        w.write_all(&g.to_le_bytes())?;
    }
    Ok(())
}

struct Counting<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Counting<R> {
    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::format(
                self.offset,
                format!("truncated file while reading {what}"),
            )),
            Err(e) => Err(e.into()),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b, what)?;
        Ok(b[0])
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }
}

fn read_header<R: Read>(r: &mut Counting<R>) -> Result<(DatasetHeader, u64)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:02x?}")));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let num_chirps = r.u32("num_chirps")? as usize;
    let num_tx = r.u32("num_tx")? as usize;
    let num_rx = r.u32("num_rx")? as usize;
    let samples_per_chirp = r.u32("samples_per_chirp")? as usize;
    let config = RadarConfig {
        num_chirps,
        num_tx,
        num_rx,
        samples_per_chirp,
        start_frequency: r.f64("start_frequency")?,
        frequency_slope: r.f64("frequency_slope")?,
        sample_rate: r.f64("sample_rate")?,
        adc_start_time: r.f64("adc_start_time")?,
        ramp_end_time: r.f64("ramp_end_time")?,
        idle_time: r.f64("idle_time")?,
        frame_rate: r.f64("frame_rate")?,
    };
    let kind_off = r.offset;
    let kind = RecordKind::from_tag(r.u8("record kind")?, kind_off)?;
    let squash = match r.u8("squash flag")? {
        0 => None,
        1 => {
            let mean = r.f64("squash mean")?;
            let std = r.f64("squash std")?;
            Some(SquashStats { mean, std })
        }
        other => {
            return Err(Error::format(
                kind_off + 1,
                format!("bad squash flag {other}"),
            ))
        }
    };
    let n_keys = r.u32("gt key count")? as usize;
    if n_keys > 64 {
        return Err(Error::format(r.offset - 4, "implausible gt key count".to_string()));
    }
    let mut gt_keys = Vec::with_capacity(n_keys);
    for _ in 0..n_keys {
        let off = r.offset;
        let len = r.u32("gt key length")? as usize;
        if len > 256 {
            return Err(Error::format(off, "implausible gt key length".to_string()));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf, "gt key")?;
        gt_keys.push(
            String::from_utf8(buf)
                .map_err(|_| Error::format(off, "gt key is not UTF-8".to_string()))?,
        );
    }
    let ndim = r.u32("ndim")? as usize;
    if ndim == 0 || ndim > 8 {
        return Err(Error::format(r.offset - 4, format!("bad ndim {ndim}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(r.u32("dim")? as usize);
    }
    let count = r.u64("record count")?;
    Ok((
        DatasetHeader {
            config,
            kind,
            dims,
            squash,
            gt_keys,
        },
        count,
    ))
}

fn read_record<R: Read>(r: &mut Counting<R>, h: &DatasetHeader) -> Result<Record> {
    let off = r.offset;
    let ndim = r.u32("record ndim")? as usize;
    if ndim != h.dims.len() {
        return Err(Error::format(
            off,
            format!("record ndim {ndim} does not match header {}", h.dims.len()),
        ));
    }
    for (i, &expect) in h.dims.iter().enumerate() {
        let got = r.u32("record dim")? as usize;
        if got != expect {
            return Err(Error::format(
                off,
                format!("record dim[{i}] = {got}, header says {expect}"),
            ));
        }
    }
    let len = h.record_len();
    let mut bytes = vec![0u8; 4 * len];
    r.read_exact(&mut bytes, "record payload")?;
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mut gt = Vec::with_capacity(h.gt_keys.len());
    for _ in 0..h.gt_keys.len() {
        gt.push(r.f64("ground-truth scalar")?);
    }
    Ok(Record { values, gt })
}

/// Read an entire dataset; rejects truncated files and trailing bytes.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    let mut r = Counting {
        inner: BufReader::new(file),
        offset: 0,
    };
    let (header, count) = read_header(&mut r)?;
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        records.push(read_record(&mut r, &header)?);
    }
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra)? != 0 {
        return Err(Error::format(
            r.offset,
            "trailing bytes after last record".to_string(),
        ));
    }
    Ok(Dataset { header, records })
}

/// Random-access reader: records are fixed-size, so any index can be
/// fetched without touching its predecessors.
pub struct DatasetReader {
    file: File,
    header: DatasetHeader,
    count: u64,
    data_offset: u64,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let mut r = Counting {
            inner: BufReader::new(&file),
            offset: 0,
        };
        let (header, count) = read_header(&mut r)?;
        let data_offset = r.offset;
        let expected = data_offset + count * header.record_bytes();
        let actual = file.metadata()?.len();
        if actual != expected {
            return Err(Error::format(
                actual.min(expected),
                format!("file is {actual} bytes, header implies {expected}"),
            ));
        }
        Ok(DatasetReader {
            file,
            header,
            count,
            data_offset,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn record(&mut self, index: usize) -> Result<Record> {
        if index as u64 >= self.count {
            return Err(Error::Bounds {
                name: "record index",
                value: index,
                limit: self.count as usize,
            });
        }
        let offset = self.data_offset + index as u64 * self.header.record_bytes();
        self.file.seek(SeekFrom::Start(offset))?;
        let mut r = Counting {
            inner: BufReader::new(&self.file),
            offset,
        };
        read_record(&mut r, &self.header)
    }
}

// ---------------------------------------------------------------------
// external import
// ---------------------------------------------------------------------

/// Storage element type of an external raw file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalDtype {
    I16,
    I32,
    F32,
    F64,
}

impl ExternalDtype {
    fn size(self) -> usize {
        match self {
            ExternalDtype::I16 => 2,
            ExternalDtype::I32 => 4,
            ExternalDtype::F32 => 4,
            ExternalDtype::F64 => 8,
        }
    }
}

/// Axis roles of an external ADC layout, outermost first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Chirp,
    Rx,
    Sample,
}

/// Plain-text description of an externally recorded raw ADC file:
///
/// ```text
/// dims = 128,4,256
/// order = chirp,rx,sample
/// dtype = i16
/// endian = little
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutDescriptor {
    pub dims: [usize; 3],
    pub order: [Axis; 3],
    pub dtype: ExternalDtype,
    pub little_endian: bool,
}

impl LayoutDescriptor {
    pub fn parse(text: &str) -> Result<Self> {
        let mut dims: Option<[usize; 3]> = None;
        let mut order: Option<[Axis; 3]> = None;
        let mut dtype: Option<ExternalDtype> = None;
        let mut endian: Option<bool> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::validation(format!("descriptor line {}: expected key=value", lineno + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "dims" => {
                    let parts: Vec<usize> = value
                        .split(',')
                        .map(|p| p.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::validation(format!("bad dims {value:?}")))?;
                    if parts.len() != 3 {
                        return Err(Error::validation("dims must have 3 entries"));
                    }
                    dims = Some([parts[0], parts[1], parts[2]]);
                }
                "order" => {
                    let parts: Vec<&str> = value.split(',').map(|p| p.trim()).collect();
                    if parts.len() != 3 {
                        return Err(Error::validation("order must have 3 entries"));
                    }
                    let mut axes = [Axis::Chirp; 3];
                    for (i, p) in parts.iter().enumerate() {
                        axes[i] = match *p {
                            "chirp" => Axis::Chirp,
                            "rx" | "antenna" => Axis::Rx,
                            "sample" => Axis::Sample,
                            other => {
                                return Err(Error::validation(format!("unknown axis {other:?}")))
                            }
                        };
                    }
                    let mut seen = [false; 3];
                    for a in axes {
                        let i = a as usize;
                        if seen[i] {
                            return Err(Error::validation("order repeats an axis"));
                        }
                        seen[i] = true;
                    }
                    order = Some(axes);
                }
                "dtype" => {
                    dtype = Some(match value {
                        "i16" => ExternalDtype::I16,
                        "i32" => ExternalDtype::I32,
                        "f32" => ExternalDtype::F32,
                        "f64" => ExternalDtype::F64,
                        other => {
                            return Err(Error::validation(format!("unknown dtype {other:?}")))
                        }
                    });
                }
                "endian" => {
                    endian = Some(match value {
                        "little" => true,
                        "big" => false,
                        other => {
                            return Err(Error::validation(format!("unknown endianness {other:?}")))
                        }
                    });
                }
                other => return Err(Error::validation(format!("unknown descriptor key {other:?}"))),
            }
        }
        Ok(LayoutDescriptor {
            dims: dims.ok_or_else(|| Error::validation("descriptor missing dims"))?,
            order: order.ok_or_else(|| Error::validation("descriptor missing order"))?,
            dtype: dtype.ok_or_else(|| Error::validation("descriptor missing dtype"))?,
            little_endian: endian.unwrap_or(true),
        })
    }

    pub fn parse_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn dim_of(&self, axis: Axis) -> usize {
        self.dims[self.order.iter().position(|&a| a == axis).unwrap()]
    }
}

/// Convert an external raw ADC file into a container dataset, validating
/// the layout against the radar configuration.
pub fn import_external(
    path: &Path,
    descriptor: &LayoutDescriptor,
    config: &RadarConfig,
) -> Result<Dataset> {
    config.validate()?;
    let (n_chirps, n_rx, n_samples) = (
        descriptor.dim_of(Axis::Chirp),
        descriptor.dim_of(Axis::Rx),
        descriptor.dim_of(Axis::Sample),
    );
    if n_chirps != config.num_chirps || n_rx != config.num_rx || n_samples != config.samples_per_chirp
    {
        return Err(Error::shape(
            format!(
                "{}x{}x{} (chirp x rx x sample)",
                config.num_chirps, config.num_rx, config.samples_per_chirp
            ),
            format!("{n_chirps}x{n_rx}x{n_samples}"),
        ));
    }

    let bytes = std::fs::read(path)?;
    let elem = descriptor.dtype.size();
    let frame_elems: usize = descriptor.dims.iter().product();
    let frame_bytes = frame_elems * elem;
    if frame_bytes == 0 || bytes.len() % frame_bytes != 0 {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "file size {} is not a multiple of the {frame_bytes}-byte frame",
                bytes.len()
            ),
        ));
    }
    let n_frames = bytes.len() / frame_bytes;

    // strides of each source axis in elements
    let mut strides = [0usize; 3]; // indexed by Axis
    let mut acc = 1usize;
    for i in (0..3).rev() {
        strides[descriptor.order[i] as usize] = acc;
        acc *= descriptor.dims[i];
    }

    let read_elem = |raw: &[u8], idx: usize| -> f32 {
        let at = idx * elem;
        let le = descriptor.little_endian;
        match descriptor.dtype {
            ExternalDtype::I16 => {
                let b = [raw[at], raw[at + 1]];
                (if le {
                    i16::from_le_bytes(b)
                } else {
                    i16::from_be_bytes(b)
                }) as f32
            }
            ExternalDtype::I32 => {
                let b = [raw[at], raw[at + 1], raw[at + 2], raw[at + 3]];
                (if le {
                    i32::from_le_bytes(b)
                } else {
                    i32::from_be_bytes(b)
                }) as f32
            }
            ExternalDtype::F32 => {
                let b = [raw[at], raw[at + 1], raw[at + 2], raw[at + 3]];
                if le {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                }
            }
            ExternalDtype::F64 => {
                let mut b = [0u8; 8];
                b.copy_from_slice(&raw[at..at + 8]);
                (if le {
                    f64::from_le_bytes(b)
                } else {
                    f64::from_be_bytes(b)
                }) as f32
            }
        }
    };

    let mut dataset = Dataset::new(DatasetHeader::adc(config));
    for f in 0..n_frames {
        let raw = &bytes[f * frame_bytes..(f + 1) * frame_bytes];
        let mut values = vec![0.0f32; frame_elems];
        let mut out = 0usize;
        for chirp in 0..n_chirps {
            for rx in 0..n_rx {
                for sample in 0..n_samples {
                    let src = chirp * strides[Axis::Chirp as usize]
                        + rx * strides[Axis::Rx as usize]
                        + sample * strides[Axis::Sample as usize];
                    values[out] = read_elem(raw, src);
                    out += 1;
                }
            }
        }
        dataset.push(Record { values, gt: Vec::new() })?;
    }
    Ok(dataset)
}
