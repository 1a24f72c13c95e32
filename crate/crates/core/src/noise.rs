//! Recorded noise increments and the little-endian binary container shared by noise
//! paths, ensembles, and control paths.

use std::io::{Read, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linear::PropagatorTable;
use crate::real::Real;

/// Increments of one exact step for one half-lattice mode: the Gaussian pair `η` added to
/// `(û, p̂)` and the white-noise increment `ΔW` it was drawn jointly with. `ΔW` is what the
/// Girsanov pairing consumes; the increments at `−n` are the conjugates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Increment<T> {
    pub eta_u: Complex<T>,
    pub eta_p: Complex<T>,
    pub dw: Complex<T>,
}

/// Per-step noise increments of one trajectory, over the half-lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath<T> {
    grid: GridSpec,
    h: f64,
    seed: u64,
    data: Vec<Increment<T>>,
}

impl<T: Real> NoisePath<T> {
    pub fn new(grid: GridSpec, h: f64, seed: u64) -> Self {
        Self { grid, h, seed, data: Vec::new() }
    }

    /// `steps` steps of zero increments.
    pub fn zeros(grid: GridSpec, h: f64, steps: usize) -> Self {
        Self { grid, h, seed: 0, data: vec![Increment::default(); steps * grid.half_len()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> usize {
        self.data.len() / self.grid.half_len()
    }

    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.h
    }

    pub fn step(&self, k: usize) -> &[Increment<T>] {
        let w = self.grid.half_len();
        &self.data[k * w..(k + 1) * w]
    }

    pub fn push_step(&mut self, increments: &[Increment<T>]) -> Result<()> {
        if increments.len() != self.grid.half_len() {
            return Err(Error::GridMismatch(format!(
                "{} increments for {} half-lattice modes",
                increments.len(),
                self.grid.half_len()
            )));
        }
        self.data.extend_from_slice(increments);
        Ok(())
    }

    pub(crate) fn check_compatible(&self, grid: &GridSpec, h: f64) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::GridMismatch("noise path grid differs".into()));
        }
        if (self.h - h).abs() > 1e-12 * h {
            return Err(Error::StepMismatch { control: 0, control_dt: h, noise: self.steps(), noise_dt: self.h });
        }
        Ok(())
    }

    /// Merges `factor` consecutive steps into one: `η ← Σ_j S(δ)^{m−1−j} η_j` and `ΔW` adds.
    /// The result drives a step `factor·δ` exactly as the fine steps drive the linear system.
    pub fn coarsen(&self, factor: usize, fine: &PropagatorTable<T>) -> Result<Self> {
        self.check_compatible(fine.grid(), fine.step())?;
        if factor == 0 || self.steps() % factor != 0 {
            return Err(Error::InvalidArgument(format!("{} steps do not split into blocks of {factor}", self.steps())));
        }
        let w = self.grid.half_len();
        let mut out = Self { grid: self.grid, h: self.h * factor as f64, seed: self.seed, data: Vec::with_capacity(self.data.len() / factor) };
        for block in 0..self.steps() / factor {
            let mut acc = vec![Increment::<T>::default(); w];
            for j in 0..factor {
                let step = self.step(block * factor + j);
                for ((a, inc), e) in acc.iter_mut().zip(step).zip(fine.entries()) {
                    let m = &e.propagator;
                    let u = a.eta_u * m[0][0] + a.eta_p * m[0][1] + inc.eta_u;
                    let p = a.eta_u * m[1][0] + a.eta_p * m[1][1] + inc.eta_p;
                    *a = Increment { eta_u: u, eta_p: p, dw: a.dw + inc.dw };
                }
            }
            out.data.extend(acc);
        }
        Ok(out)
    }

    /// Steps `[from, to)` as a new path.
    pub fn slice(&self, from: usize, to: usize) -> Self {
        let w = self.grid.half_len();
        Self { grid: self.grid, h: self.h, seed: self.seed, data: self.data[from * w..to * w].to_vec() }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = ContainerHeader::new(ContainerKind::Noise, &self.grid, self.h, self.steps() as u64, self.seed, 6 * self.grid.half_len() as u64);
        let mut values = Vec::with_capacity(self.data.len() * 6);
        for inc in &self.data {
            for c in [inc.eta_u, inc.eta_p, inc.dw] {
                values.push(c.re.as_f64());
                values.push(c.im.as_f64());
            }
        }
        write_container(w, &header, &values)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (header, values) = read_container(r)?;
        header.expect(ContainerKind::Noise)?;
        let grid = header.grid()?;
        if header.record_len != 6 * grid.half_len() as u64 {
            return Err(Error::Format("record length does not match the half-lattice".into()));
        }
        let c = |k: usize| Complex::new(T::lit(values[k]), T::lit(values[k + 1]));
        let data = (0..values.len() / 6)
            .map(|i| Increment { eta_u: c(6 * i), eta_p: c(6 * i + 2), dw: c(6 * i + 4) })
            .collect();
        Ok(Self { grid, h: header.h, seed: header.seed, data })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum ContainerKind {
    Noise = 1,
    Ensemble = 2,
    Control = 3,
}

/// Header of the binary container: magic `GDYN`, version, kind, grid, step size, record
/// count, seed, and the number of `f64` values per record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainerHeader {
    pub kind: u32,
    pub dim: u32,
    pub points: u64,
    pub dispersion: f64,
    pub h: f64,
    pub records: u64,
    pub seed: u64,
    pub record_len: u64,
}

const MAGIC: &[u8; 4] = b"GDYN";
const VERSION: u32 = 1;

impl ContainerHeader {
    pub fn new(kind: ContainerKind, grid: &GridSpec, h: f64, records: u64, seed: u64, record_len: u64) -> Self {
        Self {
            kind: kind as u32,
            dim: grid.dim() as u32,
            points: grid.points() as u64,
            dispersion: grid.dispersion(),
            h,
            records,
            seed,
            record_len,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim as usize, self.points as usize, self.dispersion)
    }

    pub fn expect(&self, kind: ContainerKind) -> Result<()> {
        if self.kind != kind as u32 {
            return Err(Error::Format(format!("expected container kind {}, found {}", kind as u32, self.kind)));
        }
        Ok(())
    }
}

pub fn write_container<W: Write>(w: &mut W, header: &ContainerHeader, values: &[f64]) -> Result<()> {
    if values.len() as u64 != header.records * header.record_len {
        return Err(Error::Format("payload length does not match the header".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&header.kind.to_le_bytes())?;
    w.write_all(&header.dim.to_le_bytes())?;
    w.write_all(&header.points.to_le_bytes())?;
    w.write_all(&header.dispersion.to_le_bytes())?;
    w.write_all(&header.h.to_le_bytes())?;
    w.write_all(&header.records.to_le_bytes())?;
    w.write_all(&header.seed.to_le_bytes())?;
    w.write_all(&header.record_len.to_le_bytes())?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_container<R: Read>(r: &mut R) -> Result<(ContainerHeader, Vec<f64>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut u32_ = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut b4)?;
        Ok(u32::from_le_bytes(b4))
    };
    let version = u32_(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let kind = u32_(r)?;
    let dim = u32_(r)?;
    let mut u64_ = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let points = u64_(r)?;
    let dispersion = f64::from_bits(u64_(r)?);
    let h = f64::from_bits(u64_(r)?);
    let records = u64_(r)?;
    let seed = u64_(r)?;
    let record_len = u64_(r)?;
    let header = ContainerHeader { kind, dim, points, dispersion, h, records, seed, record_len };
    let count = records
        .checked_mul(record_len)
        .filter(|&c| c < 1 << 40)
        .ok_or_else(|| Error::Format("implausible payload size".into()))? as usize;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}
