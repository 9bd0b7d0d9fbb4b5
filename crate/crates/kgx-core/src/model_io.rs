//! Versioned binary files for embedding models and evaluators.
//!
//! Both formats are little-endian: a fixed header, row-major `f64` tables,
//! then the name dictionary (length-prefixed UTF-8 strings). Round-trips are
//! bit-exact; `f32` models widen losslessly on write and narrow back on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::evaluator::EvaluatorModel;
use crate::kge::{EmbeddingModel, ModelKind};
use crate::scalar::Scalar;

const MODEL_MAGIC: &[u8; 4] = b"KGXM";
const EVALUATOR_MAGIC: &[u8; 4] = b"KGXE";
const FORMAT_VERSION: u32 = 1;

/// Longest name accepted when reading a dictionary; guards against garbage.
const MAX_NAME_BYTES: u64 = 1 << 20;

pub fn save_model<S: Scalar, P: AsRef<Path>>(model: &EmbeddingModel<S>, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u8(model.kind().code())?;
    w.write_u64::<LittleEndian>(model.num_entities() as u64)?;
    w.write_u64::<LittleEndian>(model.num_relations() as u64)?;
    w.write_u64::<LittleEndian>(model.dim() as u64)?;
    w.write_f64::<LittleEndian>(model.gamma().widen())?;
    write_table(&mut w, model.entity_table())?;
    write_table(&mut w, model.relation_table())?;
    write_names(&mut w, model.entity_names())?;
    write_names(&mut w, model.relation_names())?;
    w.flush()?;
    Ok(())
}

pub fn load_model<S: Scalar, P: AsRef<Path>>(path: P) -> Result<EmbeddingModel<S>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::ModelFormat("bad magic, not a model file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let kind = ModelKind::from_code(r.read_u8()?)
        .ok_or_else(|| Error::ModelFormat("unknown model kind".into()))?;
    let num_entities = r.read_u64::<LittleEndian>()? as usize;
    let num_relations = r.read_u64::<LittleEndian>()? as usize;
    let dim = r.read_u64::<LittleEndian>()? as usize;
    let gamma = S::of(r.read_f64::<LittleEndian>()?);
    let entity_rows = read_table::<S, _>(&mut r, num_entities * kind.entity_width(dim))?;
    let relation_rows = read_table::<S, _>(&mut r, num_relations * kind.relation_width(dim))?;
    let entity_names = read_names(&mut r, num_entities)?;
    let relation_names = read_names(&mut r, num_relations)?;
    expect_eof(&mut r)?;
    EmbeddingModel::from_parts(
        kind,
        dim,
        gamma,
        entity_rows,
        relation_rows,
        entity_names,
        relation_names,
    )
}

pub fn save_evaluator<S: Scalar, P: AsRef<Path>>(
    evaluator: &EvaluatorModel<S>,
    path: P,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(EVALUATOR_MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u8(evaluator.teacher_kind().code())?;
    w.write_u64::<LittleEndian>(evaluator.layers() as u64)?;
    w.write_u64::<LittleEndian>(evaluator.dim() as u64)?;
    w.write_u64::<LittleEndian>(evaluator.input_dim() as u64)?;
    w.write_u64::<LittleEndian>(evaluator.num_relations() as u64)?;
    write_table(&mut w, evaluator.params())?;
    write_names(&mut w, evaluator.relation_names())?;
    w.flush()?;
    Ok(())
}

pub fn load_evaluator<S: Scalar, P: AsRef<Path>>(path: P) -> Result<EvaluatorModel<S>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != EVALUATOR_MAGIC {
        return Err(Error::ModelFormat("bad magic, not an evaluator file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let teacher_kind = ModelKind::from_code(r.read_u8()?)
        .ok_or_else(|| Error::ModelFormat("unknown teacher kind".into()))?;
    let layers = r.read_u64::<LittleEndian>()? as usize;
    let dim = r.read_u64::<LittleEndian>()? as usize;
    let input_dim = r.read_u64::<LittleEndian>()? as usize;
    let num_relations = r.read_u64::<LittleEndian>()? as usize;
    let param_len =
        EvaluatorModel::<S>::param_len(layers, num_relations, dim, input_dim).ok_or_else(
            || Error::ModelFormat("inconsistent evaluator dimensions".into()),
        )?;
    let params = read_table::<S, _>(&mut r, param_len)?;
    let relation_names = read_names(&mut r, num_relations)?;
    expect_eof(&mut r)?;
    EvaluatorModel::from_parts(teacher_kind, layers, dim, input_dim, params, relation_names)
}

fn write_table<S: Scalar, W: Write>(w: &mut W, table: &[S]) -> Result<()> {
    for &v in table {
        w.write_f64::<LittleEndian>(v.widen())?;
    }
    Ok(())
}

fn read_table<S: Scalar, R: Read>(r: &mut R, len: usize) -> Result<Vec<S>> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(S::of(r.read_f64::<LittleEndian>()?));
    }
    Ok(out)
}

fn write_names<W: Write>(w: &mut W, names: &[String]) -> Result<()> {
    for name in names {
        w.write_u64::<LittleEndian>(name.len() as u64)?;
        w.write_all(name.as_bytes())?;
    }
    Ok(())
}

fn read_names<R: Read>(r: &mut R, count: usize) -> Result<Vec<String>> {
    let mut names = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.read_u64::<LittleEndian>()?;
        if len > MAX_NAME_BYTES {
            return Err(Error::ModelFormat(format!("name length {len} out of range")));
        }
        let mut buf = vec![0u8; len as usize];
        r.read_exact(&mut buf)?;
        names.push(
            String::from_utf8(buf)
                .map_err(|_| Error::ModelFormat("name is not valid UTF-8".into()))?,
        );
    }
    Ok(names)
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::ModelFormat("trailing data after dictionary".into())),
    }
}
