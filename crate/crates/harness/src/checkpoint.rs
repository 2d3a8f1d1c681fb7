//! Fixed-layout binary field checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "YMLABCKP"
//! version    u32
//! n          u32      sites per axis
//! length     f64      period
//! group      u32      0 = u1, 1 = su2
//! dim        u32      algebra components per field
//! t, s       f64, f64
//! count      u32      number of fields
//! names      count × (u16 length, UTF-8 bytes)
//! payload    count·dim·n³ f64, field-major, then algebra index, then x-fastest sites
//! ```

use std::path::Path;

use ymlab::algebra::GroupKind;
use ymlab::dynamics::CauchyState;
use ymlab::heatflow::FlowState;
use ymlab::lattice::Lattice;
use ymlab::mkg::MkgState;
use ymlab::spectral::field::{AlgField, VecField};

use crate::error::HarnessError;

pub const MAGIC: [u8; 8] = *b"YMLABCKP";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldCheckpoint {
    pub n: usize,
    pub length: f64,
    pub group: GroupKind,
    pub dim: usize,
    pub t: f64,
    pub s: f64,
    pub fields: Vec<(String, AlgField)>,
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn named_vec(prefix: &str, v: &VecField) -> Vec<(String, AlgField)> {
    v.iter()
        .zip(AXES)
        .map(|(f, ax)| (format!("{prefix}_{ax}"), f.clone()))
        .collect()
}

/// Splits a two-component scalar into real one-component fields.
fn named_scalar(prefix: &str, f: &AlgField) -> Vec<(String, AlgField)> {
    vec![
        (format!("{prefix}_re"), AlgField::from_comps(vec![f.comps[0].clone()])),
        (format!("{prefix}_im"), AlgField::from_comps(vec![f.comps[1].clone()])),
    ]
}

fn err<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Checkpoint(msg.into()))
}

impl FieldCheckpoint {
    fn header(lat: &Lattice, t: f64, s: f64, fields: Vec<(String, AlgField)>) -> Self {
        Self {
            n: lat.grid().n(),
            length: lat.grid().length(),
            group: lat.spec().kind(),
            dim: lat.dim(),
            t,
            s,
            fields,
        }
    }

    pub fn from_cauchy(lat: &Lattice, state: &CauchyState) -> Self {
        let mut f = named_vec("a", &state.a);
        f.extend(named_vec("e", &state.e));
        Self::header(lat, state.t, 0.0, f)
    }

    pub fn from_flow(lat: &Lattice, t: f64, state: &FlowState) -> Self {
        let mut f = named_vec("a", &state.a);
        f.extend(named_vec("b", &state.b));
        Self::header(lat, t, state.s, f)
    }

    pub fn from_mkg(lat: &Lattice, state: &MkgState) -> Self {
        let mut f = named_vec("a", &state.a);
        f.extend(named_vec("e", &state.e));
        f.extend(named_scalar("phi", &state.phi));
        f.extend(named_scalar("phi_t", &state.phi_t));
        Self::header(lat, state.t, 0.0, f)
    }

    pub fn field(&self, name: &str) -> Result<&AlgField, HarnessError> {
        match self.fields.iter().find(|(n, _)| n == name) {
            Some((_, f)) => Ok(f),
            None => err(format!("checkpoint has no field {name}")),
        }
    }

    fn vec(&self, prefix: &str) -> Result<VecField, HarnessError> {
        let get = |ax: &str| self.field(&format!("{prefix}_{ax}")).cloned();
        Ok([get("x")?, get("y")?, get("z")?])
    }

    fn scalar(&self, prefix: &str) -> Result<AlgField, HarnessError> {
        let re = self.field(&format!("{prefix}_re"))?;
        let im = self.field(&format!("{prefix}_im"))?;
        Ok(AlgField::from_comps(vec![re.comps[0].clone(), im.comps[0].clone()]))
    }

    pub fn to_cauchy(&self) -> Result<CauchyState, HarnessError> {
        Ok(CauchyState::new(self.t, self.vec("a")?, self.vec("e")?))
    }

    pub fn to_flow(&self) -> Result<FlowState, HarnessError> {
        Ok(FlowState {
            s: self.s,
            a: self.vec("a")?,
            b: self.vec("b")?,
        })
    }

    pub fn to_mkg(&self) -> Result<MkgState, HarnessError> {
        Ok(MkgState::new(
            self.t,
            self.vec("a")?,
            self.vec("e")?,
            self.scalar("phi")?,
            self.scalar("phi_t")?,
        ))
    }

    pub fn payload_len(&self) -> usize {
        self.fields.len() * self.dim * self.n.pow(3) * 8
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, HarnessError> {
        let n3 = self.n.pow(3);
        for (name, f) in &self.fields {
            if f.dim() != self.dim || f.comps.iter().any(|c| c.len() != n3) {
                return err(format!("field {name} does not match the {}-component {}³ layout", self.dim, self.n));
            }
            if name.len() > u16::MAX as usize {
                return err("field name too long");
            }
        }
        let mut out = Vec::with_capacity(64 + self.payload_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&self.length.to_le_bytes());
        let code: u32 = match self.group {
            GroupKind::U1 => 0,
            GroupKind::Su2 => 1,
        };
        out.extend_from_slice(&code.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&self.s.to_le_bytes());
        out.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for (name, _) in &self.fields {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for (_, f) in &self.fields {
            for c in &f.comps {
                for x in c {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HarnessError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return err("bad magic");
        }
        let version = r.u32()?;
        if version != VERSION {
            return err(format!("unsupported version {version}, expected {VERSION}"));
        }
        let n = r.u32()? as usize;
        if n == 0 || !n.is_power_of_two() {
            return err(format!("bad grid size {n}"));
        }
        let length = r.f64()?;
        let group = match r.u32()? {
            0 => GroupKind::U1,
            1 => GroupKind::Su2,
            g => return err(format!("unknown group code {g}")),
        };
        let dim = r.u32()? as usize;
        let expect_dim = match group {
            GroupKind::U1 => 1,
            GroupKind::Su2 => 3,
        };
        if dim != expect_dim {
            return err(format!("dimension {dim} does not match group {}", group.name()));
        }
        let t = r.f64()?;
        let s = r.f64()?;
        let count = r.u32()? as usize;
        let mut names = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u16()? as usize;
            let raw = r.take(len)?;
            match std::str::from_utf8(raw) {
                Ok(s) => names.push(s.to_string()),
                Err(_) => return err("field name is not UTF-8"),
            }
        }
        let n3 = n.pow(3);
        let need = count * dim * n3 * 8;
        if bytes.len() - r.pos != need {
            return err(format!("payload has {} bytes, expected {need}", bytes.len() - r.pos));
        }
        let mut fields = Vec::with_capacity(count);
        for name in names {
            let comps = (0..dim)
                .map(|_| (0..n3).map(|_| r.f64()).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            fields.push((name, AlgField::from_comps(comps)));
        }
        Ok(Self {
            n,
            length,
            group,
            dim,
            t,
            s,
            fields,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], HarnessError> {
        if self.pos + k > self.bytes.len() {
            return err("truncated checkpoint");
        }
        let out = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, HarnessError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("two bytes")))
    }

    fn u32(&mut self) -> Result<u32, HarnessError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn f64(&mut self) -> Result<f64, HarnessError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}
