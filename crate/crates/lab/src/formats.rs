//! On-disk formats: CSV exports, workload and family files, and the binary
//! message container.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, ensure, Context, Result};
use cellprobe_core::chronogram::{ProblemKind, ProfileRow};
use cellprobe_core::family::{QueryFamily, QueryFamilyParams};
use cellprobe_core::field::{FieldVector, PrimeModulus};
use cellprobe_core::game::{BitBuf, EncodingMessage, MessageHeader, Section, SectionKind};
use cellprobe_core::lattice::Point;
use cellprobe_core::memory::{ProbeEntry, ProbeKind};
use cellprobe_core::structures::{Query, Update, WorkloadOp};

pub const TRACE_HEADER: [&str; 4] = ["op_id", "kind", "address", "epoch_tag"];
pub const WORKLOAD_HEADER: [&str; 4] = ["op", "arg1", "arg2", "arg3"];
pub const PROFILE_HEADER: [&str; 4] = ["epoch", "queries_sampled", "mean_t_i", "max_t_i"];
pub const GRID_HEADER: [&str; 4] = ["grid_j", "mu", "gamma", "hitting_number"];
pub const TRIALS_HEADER: [&str; 4] = ["trial", "|Q|", "rank", "well_separated_fraction"];
pub const LATTICE_HEADER: [&str; 3] = ["j", "x", "y"];

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    Ok(w)
}

fn csv_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    ensure!(found == header, "{}: expected columns {:?}, found {:?}", path.display(), header, found);
    Ok(r)
}

pub fn write_trace(path: &Path, entries: &[ProbeEntry]) -> Result<()> {
    let mut w = csv_writer(path, &TRACE_HEADER)?;
    for e in entries {
        let kind = match e.kind {
            ProbeKind::Read => "read",
            ProbeKind::Write => "write",
        };
        let tag = e.epoch_tag.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([e.op_id.to_string(), kind.into(), e.address.to_string(), tag])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<ProbeEntry>> {
    let mut r = csv_reader(path, &TRACE_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let kind = match &rec[1] {
                "read" => ProbeKind::Read,
                "write" => ProbeKind::Write,
                other => bail!("unknown probe kind {other:?}"),
            };
            Ok(ProbeEntry {
                op_id: rec[0].parse()?,
                kind,
                address: rec[2].parse()?,
                epoch_tag: if rec[3].is_empty() { None } else { Some(rec[3].parse()?) },
            })
        })
        .collect()
}

pub fn write_workload(path: &Path, ops: &[WorkloadOp]) -> Result<()> {
    let mut w = csv_writer(path, &WORKLOAD_HEADER)?;
    for op in ops {
        let rec: [String; 4] = match *op {
            WorkloadOp::Update(Update::Assign { index, weight }) => {
                ["aupd".into(), index.to_string(), weight.to_string(), String::new()]
            }
            WorkloadOp::Query(Query::Vector(j)) => ["aqry".into(), j.to_string(), String::new(), String::new()],
            WorkloadOp::Update(Update::Insert { point, weight }) => {
                ["oins".into(), point.x.to_string(), point.y.to_string(), weight.to_string()]
            }
            WorkloadOp::Query(Query::Dominance(p)) => ["oqry".into(), p.x.to_string(), p.y.to_string(), String::new()],
        };
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_workload(path: &Path) -> Result<Vec<WorkloadOp>> {
    let mut r = csv_reader(path, &WORKLOAD_HEADER)?;
    let mut ops = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<u64> {
            rec[i]
                .parse()
                .with_context(|| format!("workload row {}: column {} is not an integer", line + 1, WORKLOAD_HEADER[i]))
        };
        let op = match &rec[0] {
            "aupd" => WorkloadOp::Update(Update::Assign {
                index: num(1)? as usize,
                weight: num(2)?,
            }),
            "aqry" => WorkloadOp::Query(Query::Vector(num(1)? as usize)),
            "oins" => WorkloadOp::Update(Update::Insert {
                point: Point::new(num(1)?, num(2)?),
                weight: num(3)?,
            }),
            "oqry" => WorkloadOp::Query(Query::Dominance(Point::new(num(1)?, num(2)?))),
            other => bail!("workload row {}: unknown op {other:?}", line + 1),
        };
        ops.push(op);
    }
    Ok(ops)
}

pub fn write_profile(path: &Path, rows: &[ProfileRow]) -> Result<()> {
    let mut w = csv_writer(path, &PROFILE_HEADER)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.queries_sampled.to_string(),
            format!("{:.6}", r.mean),
            r.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub grid_j: u32,
    pub mu: f64,
    pub gamma: f64,
    pub hitting_number: usize,
}

pub fn write_grid(path: &Path, rows: &[GridRow]) -> Result<()> {
    let mut w = csv_writer(path, &GRID_HEADER)?;
    for r in rows {
        w.write_record([
            r.grid_j.to_string(),
            format!("{:.6}", r.mu),
            format!("{:.6}", r.gamma),
            r.hitting_number.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub queries: usize,
    pub rank: usize,
    pub well_separated_fraction: f64,
}

pub fn write_trials(path: &Path, rows: &[TrialRow]) -> Result<()> {
    let mut w = csv_writer(path, &TRIALS_HEADER)?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.queries.to_string(),
            r.rank.to_string(),
            format!("{:.6}", r.well_separated_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Header `n Δ c seed`, then one line of `n` zeros and ones per vector.
pub fn write_family(path: &Path, family: &QueryFamily) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let p = family.params();
    writeln!(w, "{} {} {} {}", p.n, p.modulus.value(), p.independence_constant, p.seed)?;
    for v in family.vectors() {
        let line: String = v.coords().iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_family(path: &Path) -> Result<Arc<QueryFamily>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty family file"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    ensure!(fields.len() == 4, "family header must be `n delta c seed`");
    let n: usize = fields[0].parse()?;
    let modulus = PrimeModulus::new(fields[1].parse()?)?;
    let params = QueryFamilyParams::new(n, modulus, fields[2].parse()?, fields[3].parse()?)?;
    let mut vectors = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        ensure!(line.len() == n, "family line {} has {} characters, expected {n}", i + 2, line.len());
        let coords = line
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(anyhow!("family line {} has character {c:?}", i + 2)),
            })
            .collect::<Result<Vec<u64>>>()?;
        vectors.push(FieldVector::new(modulus, coords)?);
    }
    Ok(Arc::new(QueryFamily::from_vectors(params, vectors)?))
}

const MAGIC: &[u8; 4] = b"CPMS";

/// Little-endian header, then per section: code (u8), declared bit length
/// (u64), byte length (u32) and the bytes. Padding bits in the last byte of a
/// section are zero and are not counted.
pub fn message_to_bytes(msg: &EncodingMessage) -> Vec<u8> {
    let h = &msg.header;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&h.version.to_le_bytes());
    out.push(match h.kind {
        ProblemKind::Artificial => 0,
        ProblemKind::Orc => 1,
    });
    out.extend_from_slice(&h.n.to_le_bytes());
    out.extend_from_slice(&h.beta.to_bits().to_le_bytes());
    out.extend_from_slice(&h.istar.to_le_bytes());
    out.extend_from_slice(&h.modulus.to_le_bytes());
    out.extend_from_slice(&h.seed.to_le_bytes());
    out.push(h.flag as u8);
    out.extend_from_slice(&(msg.sections.len() as u16).to_le_bytes());
    for s in &msg.sections {
        out.push(s.kind.code());
        out.extend_from_slice(&(s.bits.len() as u64).to_le_bytes());
        out.extend_from_slice(&(s.bits.bytes().len() as u32).to_le_bytes());
        out.extend_from_slice(s.bits.bytes());
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        ensure!(self.pos + n <= self.data.len(), "message truncated at byte {}", self.pos);
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into()?))
    }
}

pub fn message_from_bytes(data: &[u8]) -> Result<EncodingMessage> {
    let mut c = Cursor { data, pos: 0 };
    ensure!(c.take(4)? == MAGIC, "not a message file");
    let version = c.u16()?;
    let kind = match c.u8()? {
        0 => ProblemKind::Artificial,
        1 => ProblemKind::Orc,
        k => bail!("unknown problem kind {k}"),
    };
    let header = MessageHeader {
        version,
        kind,
        n: c.u64()?,
        beta: f64::from_bits(c.u64()?),
        istar: c.u32()?,
        modulus: c.u64()?,
        seed: c.u64()?,
        flag: match c.u8()? {
            0 => false,
            1 => true,
            f => bail!("flag byte {f}"),
        },
    };
    let count = c.u16()?;
    let mut sections = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let code = c.u8()?;
        let kind = SectionKind::from_code(code).ok_or_else(|| anyhow!("unknown section code {code}"))?;
        let bits = c.u64()? as usize;
        let len = c.u32()? as usize;
        let bytes = c.take(len)?.to_vec();
        sections.push(Section {
            kind,
            bits: BitBuf::from_parts(bytes, bits)?,
        });
    }
    ensure!(c.pos == data.len(), "{} trailing bytes after the last section", data.len() - c.pos);
    Ok(EncodingMessage { header, sections })
}

pub fn write_message(path: &Path, msg: &EncodingMessage) -> Result<()> {
    std::fs::write(path, message_to_bytes(msg)).with_context(|| format!("writing {}", path.display()))
}

pub fn read_message(path: &Path) -> Result<EncodingMessage> {
    let mut data = Vec::new();
    File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut data)?;
    message_from_bytes(&data)
}
