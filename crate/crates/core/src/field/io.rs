//! Binary and CSV serialization of paths and noise fields.

use std::io::{Read, Write};

use ndarray::Array2;

use super::{FieldPath, NoiseField, SamplerKind, SpaceTimeGrid};
use crate::error::{Error, Result};
use crate::green::BoundaryCondition;

const PATH_MAGIC: &[u8; 8] = b"SHEPATH\0";
const NOISE_MAGIC: &[u8; 8] = b"SHENOIS\0";
const VERSION: u32 = 1;

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn put_grid(w: &mut impl Write, g: &SpaceTimeGrid) -> Result<()> {
    put_f64(w, g.t_start)?;
    put_f64(w, g.t_max)?;
    put_u64(w, g.nt as u64)?;
    put_f64(w, g.x_start)?;
    put_f64(w, g.x_end)?;
    put_u64(w, g.nx as u64)
}

fn get_grid(r: &mut impl Read) -> Result<SpaceTimeGrid> {
    let t_start = get_f64(r)?;
    let t_max = get_f64(r)?;
    let nt = get_u64(r)? as usize;
    let x_start = get_f64(r)?;
    let x_end = get_f64(r)?;
    let nx = get_u64(r)? as usize;
    SpaceTimeGrid::window(t_start, t_max, nt, x_start, x_end, nx).map_err(|e| Error::Format(e.to_string()))
}

fn header(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let v = u32::from_le_bytes(v);
    if v != VERSION {
        return Err(Error::Format(format!("unsupported version {v}")));
    }
    Ok(())
}

fn bc_code(bc: BoundaryCondition) -> u8 {
    match bc {
        BoundaryCondition::Dirichlet => 0,
        BoundaryCondition::Neumann => 1,
    }
}

fn bc_from(c: u8) -> Result<BoundaryCondition> {
    match c {
        0 => Ok(BoundaryCondition::Dirichlet),
        1 => Ok(BoundaryCondition::Neumann),
        _ => Err(Error::Format(format!("unknown boundary code {c}"))),
    }
}

/// Header (magic, version, grid, bc, seed, path index, sampler, truncation)
/// followed by row-major little-endian f64 values.
pub fn write_path(w: &mut impl Write, p: &FieldPath) -> Result<()> {
    w.write_all(PATH_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_grid(w, &p.grid)?;
    w.write_all(&[bc_code(p.bc), p.sampler.code()])?;
    put_u64(w, p.seed)?;
    put_u64(w, p.path_index)?;
    put_u64(w, p.truncation.map_or(0, |t| t as u64))?;
    for v in p.values.iter() {
        put_f64(w, *v)?;
    }
    Ok(())
}

pub fn read_path(r: &mut impl Read) -> Result<FieldPath> {
    header(r, PATH_MAGIC)?;
    let grid = get_grid(r)?;
    let mut codes = [0u8; 2];
    r.read_exact(&mut codes)?;
    let bc = bc_from(codes[0])?;
    let sampler = SamplerKind::from_code(codes[1])?;
    let seed = get_u64(r)?;
    let path_index = get_u64(r)?;
    let trunc = get_u64(r)?;
    let mut data = Vec::with_capacity((grid.nt + 1) * (grid.nx + 1));
    for _ in 0..(grid.nt + 1) * (grid.nx + 1) {
        data.push(get_f64(r)?);
    }
    let values = Array2::from_shape_vec((grid.nt + 1, grid.nx + 1), data).map_err(|e| Error::Format(e.to_string()))?;
    Ok(FieldPath {
        grid,
        values,
        bc,
        seed,
        path_index,
        sampler,
        truncation: (trunc > 0).then_some(trunc as usize),
    })
}

pub fn write_noise(w: &mut impl Write, n: &NoiseField) -> Result<()> {
    w.write_all(NOISE_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_grid(w, &n.grid)?;
    for v in &n.widths {
        put_f64(w, *v)?;
    }
    for v in n.increments.iter() {
        put_f64(w, *v)?;
    }
    Ok(())
}

pub fn read_noise(r: &mut impl Read) -> Result<NoiseField> {
    header(r, NOISE_MAGIC)?;
    let grid = get_grid(r)?;
    let widths = (0..=grid.nx).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
    let data = (0..grid.nt * (grid.nx + 1)).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
    let increments = Array2::from_shape_vec((grid.nt, grid.nx + 1), data).map_err(|e| Error::Format(e.to_string()))?;
    Ok(NoiseField {
        grid,
        widths,
        increments,
    })
}

/// CSV with columns t, x, u.
pub fn write_path_csv(w: &mut impl Write, p: &FieldPath) -> Result<()> {
    writeln!(w, "t,x,u")?;
    for i in 0..=p.grid.nt {
        for j in 0..=p.grid.nx {
            writeln!(w, "{},{},{}", p.grid.time(i), p.grid.pos(j), p.values[[i, j]])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FiniteDifferenceSampler;

    #[test]
    fn binary_round_trip() {
        let g = SpaceTimeGrid::new(0.01, 20, 8).unwrap();
        let (p, n) = FiniteDifferenceSampler::new(g, BoundaryCondition::Neumann).unwrap().sample(3, 7);
        let mut buf = Vec::new();
        write_path(&mut buf, &p).unwrap();
        assert_eq!(read_path(&mut buf.as_slice()).unwrap(), p);
        let mut buf = Vec::new();
        write_noise(&mut buf, &n).unwrap();
        assert_eq!(read_noise(&mut buf.as_slice()).unwrap(), n);
    }

    #[test]
    fn corrupt_header_rejected() {
        let mut buf = b"NOTAPATH\x01\x00\x00\x00".to_vec();
        buf.extend([0u8; 64]);
        assert!(matches!(read_path(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_has_one_line_per_node() {
        let g = SpaceTimeGrid::new(0.1, 2, 2).unwrap();
        let p = FieldPath::from_fn(g, BoundaryCondition::Dirichlet, |t, x| t + x);
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &p).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 10);
    }
}
