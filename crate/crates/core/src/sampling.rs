//! Inverse-CDF sampling from Fourier densities and simulation of the
//! wrapped model `Y = X + ε mod 1`.

use std::io::{BufRead, Read, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierDensity, NoiseKind, NoiseModel};

const BINARY_MAGIC: &[u8; 8] = b"CIRCSMP1";

/// Largest double strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded, splittable generator. Children are derived from
/// `(seed, index)` only, so a replication's stream does not depend on
/// scheduling.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn seed_from(seed: u64) -> Self {
        SimRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for replication `index`.
    pub fn child(&self, index: u64) -> SimRng {
        SimRng::seed_from(splitmix64(self.seed ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F))))
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Tabulation settings for the inverse-CDF sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub grid_points: usize,
    /// Density values in `[-tolerance, 0)` are clamped to zero; anything
    /// lower is rejected.
    pub negativity_tolerance: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            grid_points: 1 << 14,
            negativity_tolerance: 1e-9,
        }
    }
}

/// Tabulated CDF of a certified density, inverted by binary search and
/// linear interpolation.
#[derive(Debug, Clone)]
pub struct InverseCdfSampler {
    cdf: Vec<f64>,
}

impl InverseCdfSampler {
    pub fn new(f: &FourierDensity, cfg: &SamplerConfig) -> Result<Self> {
        if !f.is_certified_nonnegative() {
            return Err(Error::NotCertified { l1: f.tail_l1() });
        }
        if cfg.grid_points < 2 {
            return Err(Error::InvalidParameter("sampler grid needs at least 2 points".into()));
        }
        let m = cfg.grid_points;
        let h = 1.0 / m as f64;
        let mut values = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let x = i as f64 * h;
            let v = f.evaluate(x);
            if v < -cfg.negativity_tolerance {
                return Err(Error::NegativeDensity { x, value: v });
            }
            values.push(v.max(0.0));
        }
        let mut cdf = Vec::with_capacity(m + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::InvalidDensity("density integrates to zero on the grid".into()));
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(InverseCdfSampler { cdf })
    }

    /// Maps a uniform `u ∈ [0, 1)` to a draw from the density.
    pub fn quantile(&self, u: f64) -> f64 {
        let m = self.cdf.len() - 1;
        // first index with cdf > u, so that cdf[i-1] <= u < cdf[i]
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, m);
        let (lo, hi) = (self.cdf[i - 1], self.cdf[i]);
        let t = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
        let x = ((i - 1) as f64 + t) / m as f64;
        x.clamp(0.0, BELOW_ONE)
    }

    pub fn draw(&self, rng: &mut SimRng) -> f64 {
        self.quantile(rng.uniform())
    }
}

/// Rejection sampler for a certified density against the uniform
/// envelope `1 + Σ_{j≠0} |f_j| >= sup f`. Needs no tabulation, so it suits
/// densities used for only a handful of draws.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    f: FourierDensity,
    envelope: f64,
}

impl RejectionSampler {
    pub fn new(f: FourierDensity) -> Result<Self> {
        if !f.is_certified_nonnegative() {
            return Err(Error::NotCertified { l1: f.tail_l1() });
        }
        let envelope = 1.0 + f.tail_l1();
        Ok(RejectionSampler { f, envelope })
    }

    pub fn draw(&self, rng: &mut SimRng) -> f64 {
        loop {
            let x = rng.uniform();
            if rng.uniform() * self.envelope <= self.f.evaluate(x) {
                return x;
            }
        }
    }
}

/// Tabulated sampler for the noise, or `None` for direct observations.
pub fn noise_sampler(eps: &NoiseModel, cfg: &SamplerConfig) -> Result<Option<InverseCdfSampler>> {
    match eps.kind() {
        NoiseKind::Direct => Ok(None),
        _ => {
            let d = eps.density().ok_or(Error::NotSimulatable)?;
            Ok(Some(InverseCdfSampler::new(d, cfg)?))
        }
    }
}

/// `x + e mod 1`, kept in `[0, 1)`.
pub fn wrap_add(x: f64, e: f64) -> f64 {
    let s = x + e;
    let r = s - s.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `n` observations on the circle with their origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularSample {
    values: Vec<f64>,
    seed: Option<u64>,
    provenance: String,
}

impl CircularSample {
    /// Wraps externally obtained values, which must lie in `[0, 1)`.
    pub fn from_values(values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("value #{i} = {v} is outside [0, 1)")));
        }
        Ok(CircularSample {
            values,
            seed: None,
            provenance: provenance.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// One value per line with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.values {
            writeln!(w, "{v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, provenance: impl Into<String>) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v = t
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
            values.push(v);
        }
        Self::from_values(values, provenance)
    }

    /// Binary layout: magic `CIRCSMP1`, `n` (u64 LE), seed (u64 LE), then
    /// `n` little-endian doubles.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        w.write_all(&self.seed.unwrap_or(0).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let seed = u64::from_le_bytes(word);
        let mut values = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        let mut s = Self::from_values(values, "binary")?;
        s.seed = Some(seed);
        Ok(s)
    }
}

/// `n` i.i.d. draws from `f`.
pub fn sample_density(f: &FourierDensity, n: usize, rng: &mut SimRng) -> Result<CircularSample> {
    if n == 0 {
        return Err(Error::SampleTooSmall { n, min: 1 });
    }
    let sampler = InverseCdfSampler::new(f, &SamplerConfig::default())?;
    let values = (0..n).map(|_| sampler.draw(rng)).collect();
    Ok(CircularSample {
        values,
        seed: Some(rng.seed()),
        provenance: format!("density(K={})", f.max_freq()),
    })
}

/// Reusable sampler for `Y = X + ε mod 1`.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    signal: InverseCdfSampler,
    noise: Option<InverseCdfSampler>,
    label: String,
}

impl ModelSampler {
    pub fn new(f: &FourierDensity, eps: &NoiseModel, cfg: &SamplerConfig) -> Result<Self> {
        let signal = InverseCdfSampler::new(f, cfg)?;
        let noise = noise_sampler(eps, cfg)?;
        Ok(ModelSampler {
            signal,
            noise,
            label: format!("model(f: K={}, eps: {})", f.max_freq(), eps.describe()),
        })
    }

    pub fn draw(&self, rng: &mut SimRng) -> f64 {
        let x = self.signal.draw(rng);
        match &self.noise {
            Some(s) => wrap_add(x, s.draw(rng)),
            None => x,
        }
    }

    /// Draws `n` values into `out` (cleared first).
    pub fn fill(&self, n: usize, rng: &mut SimRng, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..n).map(|_| self.draw(rng)));
    }

    pub fn sample(&self, n: usize, rng: &mut SimRng) -> CircularSample {
        CircularSample {
            values: (0..n).map(|_| self.draw(rng)).collect(),
            seed: Some(rng.seed()),
            provenance: self.label.clone(),
        }
    }
}

/// `n` i.i.d. draws of `Y = X + ε mod 1` with `X ~ f`, `ε ~ eps`.
pub fn sample_model(f: &FourierDensity, eps: &NoiseModel, n: usize, rng: &mut SimRng) -> Result<CircularSample> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    Ok(ModelSampler::new(f, eps, &SamplerConfig::default())?.sample(n, rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_add_examples() {
        assert!((wrap_add(0.7, 0.5) - 0.2).abs() < 1e-15);
        assert_eq!(wrap_add(0.3, 0.0), 0.3);
        assert!(wrap_add(BELOW_ONE, BELOW_ONE) < 1.0);
        assert_eq!(wrap_add(0.5, 0.5), 0.0);
    }

    #[test]
    fn child_streams_are_deterministic_and_distinct() {
        let root = SimRng::seed_from(7);
        let a: Vec<u64> = (0..4).map(|_| root.child(3).next_u64()).collect();
        assert!(a.iter().all(|&x| x == a[0]));
        assert_ne!(root.child(3).next_u64(), root.child(4).next_u64());
        assert_ne!(root.child(0).seed(), root.seed());
    }

    #[test]
    fn quantile_of_uniform_is_identity() {
        let s = InverseCdfSampler::new(&FourierDensity::uniform(2), &SamplerConfig::default()).unwrap();
        for u in [0.0, 0.1, 0.5, 0.999] {
            assert!((s.quantile(u) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_uncertified_and_tiny_n() {
        let f = FourierDensity::from_real_tail(&[0.6]).unwrap();
        let mut rng = SimRng::seed_from(1);
        assert!(matches!(sample_density(&f, 10, &mut rng), Err(Error::NotCertified { .. })));
        let u = FourierDensity::uniform(0);
        assert!(sample_density(&u, 0, &mut rng).is_err());
        let one = sample_density(&u, 1, &mut rng).unwrap();
        assert_eq!(one.len(), 1);
        assert!(sample_model(&u, &NoiseModel::direct(), 1, &mut rng).is_err());
        let profile = NoiseModel::mild(1.0).unwrap();
        assert!(matches!(sample_model(&u, &profile, 5, &mut rng), Err(Error::NotSimulatable)));
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let f = FourierDensity::from_real_tail(&[0.3, 0.1]).unwrap();
        let s = sample_density(&f, 50, &mut SimRng::seed_from(9)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = CircularSample::read_csv(&buf[..], "csv").unwrap();
        assert_eq!(back.values(), s.values());
        let mut bin = Vec::new();
        s.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 24 + 8 * 50);
        let back = CircularSample::read_binary(&bin[..]).unwrap();
        assert_eq!(back.values(), s.values());
        assert_eq!(back.seed(), Some(9));
        assert!(CircularSample::read_binary(&b"NOTMAGIC"[..]).is_err());
    }
}
