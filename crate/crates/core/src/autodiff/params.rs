use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};

const MAGIC: &[u8; 4] = b"CGPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Named tensors with fixed shapes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterSet {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor, trainable: bool) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(invalid(format!("duplicate parameter name {name:?}")));
        }
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            tensor,
            trainable,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.params[i].tensor)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| invalid(format!("missing parameter {name:?}")))
    }

    /// Replace a tensor's values; the shape may not change.
    pub fn set(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| invalid(format!("missing parameter {name:?}")))?;
        let p = &mut self.params[i];
        if p.tensor.shape() != tensor.shape() {
            return Err(Error::ShapeMismatch {
                op: "ParameterSet::set",
                lhs: p.tensor.shape().to_vec(),
                rhs: tensor.shape().to_vec(),
            });
        }
        p.tensor = tensor;
        Ok(())
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| invalid(format!("missing parameter {name:?}")))?;
        self.params[i].trainable = trainable;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Register every tensor as a leaf of `g`.
    pub fn bind(&self, g: &mut Graph) -> Result<BoundParams> {
        let vars = self
            .params
            .iter()
            .map(|p| g.leaf(p.tensor.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundParams {
            vars,
            index: self.index.clone(),
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for p in &self.params {
            let name = p.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(p.tensor.rank() as u32).to_le_bytes())?;
            for &d in p.tensor.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in p.tensor.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Loaded tensors are all marked trainable; owners reset the flags.
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let corrupt = |reason: &str| Error::CorruptFile {
            path: "<parameter stream>".into(),
            reason: reason.to_string(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)?;
        let mut set = Self::new();
        for _ in 0..count {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| corrupt("name is not UTF-8"))?;
            let rank = read_u32(&mut r)? as usize;
            let shape = (0..rank)
                .map(|_| read_u32(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            set.insert(&name, Tensor::new(shape, data)?, true)?;
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f)).map_err(|e| match e {
            Error::CorruptFile { reason, .. } => Error::CorruptFile {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Graph handles for a bound [`ParameterSet`].
pub struct BoundParams {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| invalid(format!("missing parameter {name:?}")))
    }

    /// Handles in the same order as [`ParameterSet::iter`].
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}
