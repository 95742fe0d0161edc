//! Single-file binary snapshots.
//!
//! A UTF-8 header of `key value` lines, starting with the magic line
//! `VPGRAV1` and closed by `end`, followed by the row-major payload as
//! little-endian `f64`:
//!
//! ```text
//! VPGRAV1
//! role steady
//! dims 1 1 128 12 12 64
//! beta 1.5
//! g 10
//! timestamp 1760000000
//! meta L3 1.85
//! end
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::distribution::{DensityField, Distribution, Role};
use crate::error::{Error, Result};
use crate::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use crate::io::format_real;

pub const MAGIC: &str = "VPGRAV1";

/// Longest header accepted when reading.
const MAX_HEADER: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// `steady`, `perturbation`, `total`, `density`, `potential`, `boundary`, ...
    pub role: String,
    pub dims: Vec<usize>,
    pub beta: f64,
    pub g: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub metadata: BTreeMap<String, f64>,
    pub data: Vec<f64>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn grid_metadata(spatial: &SpatialGrid) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("L3".to_string(), spatial.l3()),
        ("refinement".to_string(), spatial.refinement()),
    ])
}

impl Snapshot {
    pub fn new(
        role: &str,
        dims: Vec<usize>,
        beta: f64,
        g: f64,
        data: Vec<f64>,
    ) -> Result<Snapshot> {
        let snap = Snapshot {
            role: role.to_string(),
            dims,
            beta,
            g,
            timestamp: now(),
            metadata: BTreeMap::new(),
            data,
        };
        snap.check()?;
        Ok(snap)
    }

    /// Dims `n1 n2 n3 m1 m2 m3`.
    pub fn from_distribution(f: &Distribution, g: f64) -> Snapshot {
        let s = &f.grid.spatial;
        let m = f.grid.velocity.counts();
        let mut metadata = grid_metadata(s);
        metadata.insert("vmax".into(), f.grid.velocity.vmax());
        Snapshot {
            role: f.role.tag().to_string(),
            dims: vec![s.n1(), s.n2(), s.n3(), m[0], m[1], m[2]],
            beta: f.beta,
            g,
            timestamp: now(),
            metadata,
            data: f.values().to_vec(),
        }
    }

    /// Node values on the spatial grid, dims `n1 n2 n3`.
    pub fn from_spatial(
        role: &str,
        grid: &SpatialGrid,
        beta: f64,
        g: f64,
        values: &[f64],
    ) -> Result<Snapshot> {
        let mut snap = Snapshot::new(
            role,
            vec![grid.n1(), grid.n2(), grid.n3()],
            beta,
            g,
            values.to_vec(),
        )?;
        snap.metadata = grid_metadata(grid);
        Ok(snap)
    }

    pub fn meta(&self, key: &str) -> Result<f64> {
        self.metadata
            .get(key)
            .copied()
            .ok_or_else(|| format_err(format!("snapshot lacks metadata {key}")))
    }

    fn spatial_grid(&self) -> Result<SpatialGrid> {
        let d = &self.dims;
        SpatialGrid::new(d[0], d[1], d[2], self.meta("L3")?, self.meta("refinement")?)
    }

    pub fn to_distribution(&self) -> Result<Distribution> {
        let role = Role::from_tag(&self.role)
            .ok_or_else(|| format_err(format!("{} is not a distribution", self.role)))?;
        if self.dims.len() != 6 {
            return Err(format_err("a distribution snapshot has six dimensions"));
        }
        let d = &self.dims;
        let grid = PhaseGrid::new(
            self.spatial_grid()?,
            VelocityGrid::new([d[3], d[4], d[5]], self.meta("vmax")?)?,
        );
        Distribution::from_values(grid, role, self.beta, self.data.clone())
    }

    pub fn to_density(&self) -> Result<DensityField> {
        if self.dims.len() != 3 {
            return Err(format_err("a spatial snapshot has three dimensions"));
        }
        DensityField::from_values(self.spatial_grid()?, self.data.clone())
    }

    fn check(&self) -> Result<()> {
        if self.role.is_empty() || self.role.chars().any(char::is_whitespace) {
            return Err(format_err("snapshot role must be one nonempty word"));
        }
        if let Some(k) = self
            .metadata
            .keys()
            .find(|k| k.is_empty() || k.chars().any(char::is_whitespace))
        {
            return Err(format_err(format!(
                "metadata key {k:?} must be one nonempty word"
            )));
        }
        let expected = self.dims.iter().try_fold(1usize, |a, d| a.checked_mul(*d));
        if expected != Some(self.data.len()) {
            return Err(format_err(format!(
                "payload holds {} values but the dimensions {:?} need {}",
                self.data.len(),
                self.dims,
                expected.map_or_else(|| "more than usize::MAX".into(), |e| e.to_string())
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check()?;
        let dims: Vec<String> = self.dims.iter().map(usize::to_string).collect();
        let mut header = format!(
            "{MAGIC}\nrole {}\ndims {}\nbeta {}\ng {}\ntimestamp {}\n",
            self.role,
            dims.join(" "),
            format_real(self.beta),
            format_real(self.g),
            self.timestamp
        );
        for (k, v) in &self.metadata {
            header.push_str(&format!("meta {k} {}\n", format_real(*v)));
        }
        header.push_str("end\n");
        let mut out = header.into_bytes();
        out.reserve(8 * self.data.len());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Snapshot> {
        if !bytes.starts_with(format!("{MAGIC}\n").as_bytes()) {
            return Err(format_err("missing VPGRAV1 magic"));
        }
        let window = &bytes[..bytes.len().min(MAX_HEADER)];
        let end = window
            .windows(5)
            .position(|w| w == b"\nend\n")
            .ok_or_else(|| format_err("header is not terminated by an end line"))?;
        let header =
            std::str::from_utf8(&bytes[..end]).map_err(|_| format_err("header is not UTF-8"))?;
        let payload = &bytes[end + 5..];

        let (mut role, mut dims, mut beta, mut g, mut timestamp) = (None, None, None, None, None);
        let mut metadata = BTreeMap::new();
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| format_err(format!("bad real {s:?}")))
        };
        for line in header.lines().skip(1) {
            let (key, rest) = line
                .split_once(' ')
                .ok_or_else(|| format_err(format!("bad header line {line:?}")))?;
            match key {
                "role" => role = Some(rest.to_string()),
                "dims" => {
                    let d: std::result::Result<Vec<usize>, _> =
                        rest.split(' ').map(str::parse).collect();
                    dims = Some(d.map_err(|_| format_err(format!("bad dims {rest:?}")))?);
                }
                "beta" => beta = Some(real(rest)?),
                "g" => g = Some(real(rest)?),
                "timestamp" => {
                    timestamp = Some(
                        rest.parse()
                            .map_err(|_| format_err(format!("bad timestamp {rest:?}")))?,
                    );
                }
                "meta" => {
                    let (k, v) = rest
                        .split_once(' ')
                        .ok_or_else(|| format_err(format!("bad meta line {line:?}")))?;
                    metadata.insert(k.to_string(), real(v)?);
                }
                _ => return Err(format_err(format!("unknown header key {key:?}"))),
            }
        }
        let missing = |k: &str| format_err(format!("header lacks {k}"));
        let dims: Vec<usize> = dims.ok_or_else(|| missing("dims"))?;
        if !payload.len().is_multiple_of(8) {
            return Err(format_err("payload length is not a multiple of 8 bytes"));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let snap = Snapshot {
            role: role.ok_or_else(|| missing("role"))?,
            dims,
            beta: beta.ok_or_else(|| missing("beta"))?,
            g: g.ok_or_else(|| missing("g"))?,
            timestamp: timestamp.ok_or_else(|| missing("timestamp"))?,
            metadata,
            data,
        };
        snap.check()?;
        Ok(snap)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Snapshot> {
        Snapshot::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        let mut s = Snapshot::new(
            "density",
            vec![2, 3],
            1.5,
            9.81,
            vec![0.1, -0.0, 1e-310, f64::MAX, 3.0, -7.25],
        )
        .unwrap();
        s.metadata.insert("L3".into(), 2.0);
        s
    }

    #[test]
    fn bytes_round_trip() {
        let s = sample();
        let back = Snapshot::from_bytes(&s.to_bytes().unwrap()).unwrap();
        assert_eq!(back.role, s.role);
        assert_eq!(back.metadata, s.metadata);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.data), bits(&s.data));
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut b = sample().to_bytes().unwrap();
        b[6] = b'2';
        assert!(matches!(Snapshot::from_bytes(&b), Err(Error::Format(_))));
    }

    #[test]
    fn short_payload_is_rejected() {
        let b = sample().to_bytes().unwrap();
        assert!(Snapshot::from_bytes(&b[..b.len() - 8]).is_err());
        assert!(Snapshot::from_bytes(&b[..b.len() - 3]).is_err());
        assert!(Snapshot::new("x", vec![2, 2], 1.0, 1.0, vec![0.0; 3]).is_err());
    }
}
