//! Bit-exact restart files.
//!
//! Layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `GFDC` |
//! | 4     | u32 version (= 1) |
//! | 4 + 4 | u32 nx, ny |
//! | 1     | u8 boundary code |
//! | 9 × 8 | f64 dx, dy, g, H, f0, beta, r, rho0, time |
//! | 1     | u8 flags: bit 0 nonlinear, bit 1 tracer present |
//! | …     | u, v, eta, [tracer] as row-major f64 in their staggered shapes |

use alloc::vec::Vec;

use crate::field::Field;
use crate::grid::{Boundary, Grid};
use crate::params::PhysParams;
use crate::state::State;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"GFDC";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 1 + 9 * 8 + 1;

const FLAG_NONLINEAR: u8 = 1;
const FLAG_TRACER: u8 = 2;

pub fn serialize(state: &State, grid: &Grid, params: &PhysParams) -> Result<Vec<u8>> {
    state.check_shapes(grid)?;
    let n_fields = if state.tracer.is_some() { 4 } else { 3 };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n_fields * (grid.nx() + 1) * (grid.ny() + 1));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.ny() as u32).to_le_bytes());
    out.push(grid.boundary().code());
    for x in [grid.dx(), grid.dy(), params.g, params.h, params.f0, params.beta, params.r, params.rho0, state.time] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let mut flags = 0;
    if params.nonlinear {
        flags |= FLAG_NONLINEAR;
    }
    if state.tracer.is_some() {
        flags |= FLAG_TRACER;
    }
    out.push(flags);
    for f in [&state.u, &state.v, &state.eta].into_iter().chain(state.tracer.as_ref()) {
        for x in f.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::TruncatedPayload { needed: end, available: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn field(&mut self, (nx, ny): (usize, usize)) -> Result<Field> {
        let raw = self.take(8 * nx * ny)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Field::from_vec(nx, ny, data).expect("length checked by take"))
    }
}

pub fn restore(bytes: &[u8]) -> Result<(State, Grid, PhysParams)> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let nx = r.u32()? as usize;
    let ny = r.u32()? as usize;
    let code = r.u8()?;
    let boundary = Boundary::from_code(code)
        .ok_or_else(|| Error::MalformedCheckpoint(alloc::format!("unknown boundary code {code}")))?;
    let dx = r.f64()?;
    let dy = r.f64()?;
    let grid = Grid::new(nx, ny, dx, dy, boundary)?;
    let mut params = PhysParams {
        g: r.f64()?,
        h: r.f64()?,
        f0: r.f64()?,
        beta: r.f64()?,
        r: r.f64()?,
        rho0: r.f64()?,
        nonlinear: false,
    };
    let time = r.f64()?;
    let flags = r.u8()?;
    params.nonlinear = flags & FLAG_NONLINEAR != 0;
    let u = r.field(grid.u_shape())?;
    let v = r.field(grid.v_shape())?;
    let eta = r.field(grid.eta_shape())?;
    let tracer = if flags & FLAG_TRACER != 0 { Some(r.field(grid.eta_shape())?) } else { None };
    if r.pos != bytes.len() {
        return Err(Error::MalformedCheckpoint(alloc::format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((State { u, v, eta, tracer, time }, grid, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step, StepConfig};
    use proptest::prelude::*;

    fn sample(seed: u64, boundary: Boundary, tracer: bool) -> (State, Grid, PhysParams) {
        let grid = Grid::new(9, 12, 1.5e4, 1e4, boundary).unwrap();
        let mut s = State::rest(&grid);
        let mut x = seed | 1;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            f64::from_bits((x >> 12) | 0x3FF0_0000_0000_0000) - 1.5
        };
        for f in [&mut s.u, &mut s.v, &mut s.eta] {
            f.as_mut_slice().iter_mut().for_each(|v| *v = next() * 1e-2);
        }
        if tracer {
            s.tracer = Some(Field::from_fn(9, 12, |i, j| (i * j) as f64));
        }
        s.time = 1234.5;
        let params = PhysParams { beta: 1.7e-11, nonlinear: seed % 2 == 0, r: 1e-7, ..Default::default() };
        (s, grid, params)
    }

    #[test]
    fn header_layout_is_fixed() {
        let (s, g, p) = sample(3, Boundary::ChannelPeriodicX, true);
        let bytes = serialize(&s, &g, &p).unwrap();
        assert_eq!(&bytes[..4], b"GFDC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 9);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 12);
        assert_eq!(bytes[16], 2);
        assert_eq!(f64::from_le_bytes(bytes[17..25].try_into().unwrap()), 1.5e4);
        assert_eq!(f64::from_le_bytes(bytes[81..89].try_into().unwrap()), 1234.5);
        assert_eq!(bytes[89], FLAG_TRACER);
        let payload = (9 * 12 + 9 * 13 + 9 * 12 + 9 * 12) * 8;
        assert_eq!(bytes.len(), HEADER_LEN + payload);
        assert_eq!(f64::from_le_bytes(bytes[90..98].try_into().unwrap()), s.u[(0, 0)]);
    }

    #[test]
    fn corrupted_inputs_are_rejected() {
        let (s, g, p) = sample(5, Boundary::ClosedBasin, false);
        let mut bytes = serialize(&s, &g, &p).unwrap();
        assert!(matches!(restore(&bytes[..bytes.len() - 3]), Err(Error::TruncatedPayload { .. })));
        assert!(matches!(restore(&bytes[..10]), Err(Error::TruncatedPayload { .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(restore(&extra), Err(Error::MalformedCheckpoint(_))));
        bytes[4] = 2;
        assert_eq!(restore(&bytes).unwrap_err(), Error::VersionMismatch(2));
        bytes[0] = b'X';
        assert_eq!(restore(&bytes).unwrap_err(), Error::BadMagic);
        assert_eq!(restore(&[]).unwrap_err(), Error::BadMagic);
    }

    #[test]
    fn restart_midway_is_bitwise_identical() {
        let (s, g, p) = sample(8, Boundary::ClosedBasin, true);
        let cfg = StepConfig::new(20.0, 40);
        let full = step(&s, &g, &p, &cfg).unwrap();
        let half_cfg = StepConfig::new(20.0, 20);
        let mid = step(&s, &g, &p, &half_cfg).unwrap();
        let (restored, g2, p2) = restore(&serialize(&mid, &g, &p).unwrap()).unwrap();
        let resumed = step(&restored, &g2, &p2, &half_cfg).unwrap();
        assert!(full.bit_eq(&resumed));
    }

    proptest! {
        #[test]
        fn roundtrip_is_bitwise(seed in any::<u64>(), b in 0u8..3, tracer in any::<bool>()) {
            let (s, g, p) = sample(seed, Boundary::from_code(b).unwrap(), tracer);
            let (s2, g2, p2) = restore(&serialize(&s, &g, &p).unwrap()).unwrap();
            prop_assert!(s.bit_eq(&s2));
            prop_assert_eq!(g, g2);
            prop_assert_eq!(p, p2);
        }
    }
}
