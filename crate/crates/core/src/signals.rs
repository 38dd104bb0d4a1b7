//! Seeded white input and noise sequences.
//!
//! Every sequence is drawn from a ChaCha8 stream keyed by a 64-bit seed and a
//! 64-bit stream id, so a Monte Carlo realization can hand out independent,
//! replayable substreams per role (input, process noise, measurement noise,
//! simulation noise) without any shared generator state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistributionKind {
    #[serde(rename = "Gaussian", alias = "GaussianWhite", alias = "gaussian")]
    GaussianWhite,
    #[serde(rename = "Uniform", alias = "UniformWhite", alias = "uniform")]
    UniformWhite,
}

/// Zero-mean white distribution with a given variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub kind: DistributionKind,
    pub variance: f64,
}

impl Distribution {
    pub fn gaussian(variance: f64) -> Self {
        Self {
            kind: DistributionKind::GaussianWhite,
            variance,
        }
    }

    pub fn uniform(variance: f64) -> Self {
        Self {
            kind: DistributionKind::UniformWhite,
            variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0) || !self.variance.is_finite() {
            return Err(Error::NegativeVariance(self.variance));
        }
        Ok(())
    }

    /// Half-width `L = sqrt(3 var)` of the uniform support `[-L, L]`.
    pub fn half_width(&self) -> f64 {
        (3.0 * self.variance).sqrt()
    }

    /// Fourth moment `E{x^4}`.
    pub fn fourth_moment(&self) -> f64 {
        match self.kind {
            DistributionKind::GaussianWhite => 3.0 * self.variance * self.variance,
            DistributionKind::UniformWhite => 1.8 * self.variance * self.variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

/// What a substream is used for inside one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Input,
    ProcessNoise,
    MeasurementNoise,
    /// Process-noise realization `s` of a simulated binding function.
    Simulation(u32),
}

impl StreamRole {
    fn code(self) -> u64 {
        match self {
            StreamRole::Input => 1,
            StreamRole::ProcessNoise => 2,
            StreamRole::MeasurementNoise => 3,
            StreamRole::Simulation(s) => 16 + u64::from(s),
        }
    }
}

/// A (seed, stream) pair identifying one reproducible sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: Seed,
    pub stream: u64,
}

impl From<Seed> for StreamKey {
    fn from(seed: Seed) -> Self {
        StreamKey { seed, stream: 0 }
    }
}

impl Seed {
    /// Seed of Monte Carlo realization `r` under this master seed.
    pub fn for_realization(self, r: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(r.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    pub fn stream(self, role: StreamRole) -> StreamKey {
        StreamKey {
            seed: self,
            stream: role.code(),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn rng_for(key: StreamKey) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed.0);
    rng.set_stream(key.stream);
    rng
}

/// Draws `n` i.i.d. zero-mean samples from `dist`.
pub fn gen_white(dist: &Distribution, n: usize, key: impl Into<StreamKey>) -> Result<Vec<f64>> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("sequence length must be at least 1".into()));
    }
    let mut rng = rng_for(key.into());
    let out = match dist.kind {
        DistributionKind::GaussianWhite => {
            let sd = dist.variance.sqrt();
            (0..n)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
        DistributionKind::UniformWhite => {
            let l = dist.half_width();
            (0..n)
                .map(|_| l * (2.0 * rng.random::<f64>() - 1.0))
                .collect()
        }
    };
    Ok(out)
}
