//! Seeded sampling of random tensors.
//!
//! Entries come from a counter-based generator: each draw is a pure function
//! of (master seed, stream id, draw index), so any entry can be produced in
//! isolation, in any order, on any number of threads, with bit-identical
//! results.  Gaussian variates use the inverse CDF (Wichura's AS 241
//! rational approximation, accurate to roughly 1e-15) rather than rejection
//! sampling, keeping the draw-index accounting exact.
//!
//! All three entry distributions have mean `mu` and unit variance
//! E[|x - mu|^2] = 1; they differ in the squared-entry mean
//! xi = E[(x - mu)^2] and the third absolute moment rho = E[|x - mu|^3]
//! that drive the concentration statistics.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::Tensor;

/// Sampling kinds for the entry noise x - mu.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    /// Standard complex Gaussian: independent N(0, 1/2) real and imaginary
    /// parts.  xi = 0, rho = (3/4) sqrt(pi).
    ComplexGaussian,
    /// Standard real Gaussian N(0, 1).  xi = 1, rho = 2 sqrt(2/pi).
    RealGaussian,
    /// Fair +-1 sign.  xi = 1, rho = 1.
    ShiftedRademacher,
}

/// An entry distribution: a noise kind shifted to mean `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryDistribution {
    pub kind: DistributionKind,
    #[serde(with = "crate::wire::cpair")]
    pub mu: Complex64,
    /// Squared-entry mean xi = E[(x - mu)^2].
    #[serde(with = "crate::wire::cpair")]
    pub xi: Complex64,
    /// Third absolute moment rho = E[|x - mu|^3]; always >= 1 here.
    pub rho: f64,
}

impl EntryDistribution {
    /// Attach the distribution constants for `kind` shifted by `mu`.
    pub fn new(kind: DistributionKind, mu: Complex64) -> Self {
        let (xi, rho) = match kind {
            DistributionKind::ComplexGaussian => (0.0, 0.75 * std::f64::consts::PI.sqrt()),
            DistributionKind::RealGaussian => {
                (1.0, 2.0 * (2.0 / std::f64::consts::PI).sqrt())
            }
            DistributionKind::ShiftedRademacher => (1.0, 1.0),
        };
        EntryDistribution {
            kind,
            mu,
            xi: Complex64::new(xi, 0.0),
            rho,
        }
    }
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_id,
        }
    }

    /// Derive a related stream (used for per-trial streams in experiments).
    pub fn substream(&self, offset: u64) -> SeedSpec {
        SeedSpec {
            master_seed: self.master_seed,
            stream_id: mix(self.stream_id ^ mix(offset ^ 0xa076_1d64_78bd_642f)),
        }
    }
}

/// SplitMix-style 64-bit finalizer: bijective, avalanche-complete.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_key(seed: &SeedSpec) -> u64 {
    mix(seed.master_seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
        ^ mix(seed.stream_id.wrapping_mul(0xd134_2543_de82_ef95).wrapping_add(0x6374_1870_18ad_5257))
}

/// Raw 64-bit draw at a counter position.
fn raw_draw(key: u64, index: u64) -> u64 {
    mix(mix(key ^ index.wrapping_mul(0xd134_2543_de82_ef95)).wrapping_add(index))
}

fn uniform_keyed(key: u64, index: u64) -> f64 {
    ((raw_draw(key, index) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw strictly inside (0, 1): top 53 bits offset by half an ulp.
pub fn uniform(seed: &SeedSpec, index: u64) -> f64 {
    uniform_keyed(stream_key(seed), index)
}

/// Inverse of the standard normal CDF (Wichura's algorithm AS 241, PPND16).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_1e4)
            * r
            + 4.592_195_393_154_987_15e4)
            * r
            + 1.373_169_376_550_946_1e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_854_5e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_6;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_9e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Random-access view of one stream of i.i.d. entries, with the stream key
/// derived once.  Entry `m` is a pure function of (distribution, key, m), so
/// any subset of a tensor's entries can be regenerated without materializing
/// the rest.
#[derive(Debug, Clone, Copy)]
pub struct EntryStream<'a> {
    dist: &'a EntryDistribution,
    key: u64,
}

impl<'a> EntryStream<'a> {
    pub fn new(dist: &'a EntryDistribution, seed: &SeedSpec) -> Self {
        Self {
            dist,
            key: stream_key(seed),
        }
    }

    /// The entry at a given flat ordinal (row-major layout position).  Every
    /// entry consumes two counter slots regardless of kind, so layouts agree
    /// across distributions.
    pub fn at(&self, ordinal: u64) -> Complex64 {
        let u0 = uniform_keyed(self.key, 2 * ordinal);
        match self.dist.kind {
            DistributionKind::ComplexGaussian => {
                let u1 = uniform_keyed(self.key, 2 * ordinal + 1);
                let scale = std::f64::consts::FRAC_1_SQRT_2;
                Complex64::new(
                    self.dist.mu.re + inverse_normal_cdf(u0) * scale,
                    self.dist.mu.im + inverse_normal_cdf(u1) * scale,
                )
            }
            DistributionKind::RealGaussian => {
                Complex64::new(self.dist.mu.re + inverse_normal_cdf(u0), self.dist.mu.im)
            }
            DistributionKind::ShiftedRademacher => {
                let sign = if u0 < 0.5 { -1.0 } else { 1.0 };
                Complex64::new(self.dist.mu.re + sign, self.dist.mu.im)
            }
        }
    }
}

/// Convenience wrapper: one entry of the stream identified by `seed`.
pub fn entry_at(dist: &EntryDistribution, seed: &SeedSpec, ordinal: u64) -> Complex64 {
    EntryStream::new(dist, seed).at(ordinal)
}

/// Sample a full order-d tensor with i.i.d. entries.
pub fn sample_tensor(
    dist: &EntryDistribution,
    order: usize,
    dim: usize,
    seed: &SeedSpec,
) -> Result<Tensor> {
    // Validate the shape before doing any drawing.
    let probe = Tensor::ones(order, dim)?;
    let len = probe.entries().len();
    let stream = EntryStream::new(dist, seed);
    let entries: Vec<Complex64> = (0..len as u64)
        .into_par_iter()
        .map(|m| stream.at(m))
        .collect();
    Tensor::new(order, dim, entries)
}

/// Recenter a shifted sample: R - mu J, the zero-mean perturbation A.
pub fn centered(r: &Tensor, mu: Complex64) -> Result<Tensor> {
    r.affine_combine(-mu, Complex64::new(1.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Oracle: standard normal CDF by Simpson integration of the density
    /// from -12 (where the tail is ~2e-33) to x.
    fn normal_cdf_oracle(x: f64) -> f64 {
        let lo = -12.0f64;
        let steps = 48_000; // even
        let h = (x - lo) / steps as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = phi(lo) + phi(x);
        for i in 1..steps {
            let t = lo + i as f64 * h;
            acc += phi(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn inverse_normal_known_quantiles() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        let cases = [
            (0.975, 1.959963984540054),
            (0.75, 0.6744897501960817),
            (0.999, 3.090232306167813),
            (0.1, -1.2815515655446004),
            (1e-9, -5.997807015007974),
        ];
        for (p, want) in cases {
            let got = inverse_normal_cdf(p);
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "p={p}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn inverse_normal_round_trips_integrated_cdf() {
        for &p in &[0.001, 0.01, 0.2, 0.5, 0.77, 0.95, 0.9995] {
            let x = inverse_normal_cdf(p);
            let back = normal_cdf_oracle(x);
            assert!((back - p).abs() < 1e-10, "p={p}: round trip {back}");
        }
    }

    #[test]
    fn uniform_draws_live_strictly_inside_unit_interval() {
        let seed = SeedSpec::new(42, 0);
        let mut min = 1.0f64;
        let mut max = 0.0f64;
        for i in 0..1_000_000u64 {
            let u = uniform(&seed, i);
            min = min.min(u);
            max = max.max(u);
        }
        assert!(min > 0.0 && max < 1.0);
        // Mean of U(0,1) is 1/2 with sd 1/sqrt(12): allow 5 standard errors.
        let mean: f64 =
            (0..1_000_000u64).map(|i| uniform(&seed, i)).sum::<f64>() / 1e6;
        assert!((mean - 0.5).abs() < 5.0 * 0.2887 / 1000.0);
    }

    #[test]
    fn draws_are_reproducible_and_stream_separated() {
        let dist = EntryDistribution::new(DistributionKind::ComplexGaussian, c(1.0, 0.5));
        let s1 = SeedSpec::new(7, 1);
        let a = sample_tensor(&dist, 3, 4, &s1).unwrap();
        let b = sample_tensor(&dist, 3, 4, &s1).unwrap();
        assert_eq!(a, b);
        let s2 = SeedSpec::new(7, 2);
        let other = sample_tensor(&dist, 3, 4, &s2).unwrap();
        assert_ne!(a, other);
        // Entry streaming matches tensor materialization exactly.
        for (m, e) in a.entries().iter().enumerate() {
            assert_eq!(*e, entry_at(&dist, &s1, m as u64));
        }
    }

    #[test]
    fn independent_streams_are_uncorrelated() {
        let seed_x = SeedSpec::new(99, 0);
        let seed_y = SeedSpec::new(99, 1);
        let n = 200_000u64;
        let mut cross = 0.0;
        for i in 0..n {
            cross += (uniform(&seed_x, i) - 0.5) * (uniform(&seed_y, i) - 0.5);
        }
        // Each product has sd 1/12; the mean has sd 1/(12 sqrt n).
        let bound = 5.0 / (12.0 * (n as f64).sqrt());
        assert!((cross / n as f64).abs() < bound);
    }

    #[test]
    fn distribution_constants() {
        let cg = EntryDistribution::new(DistributionKind::ComplexGaussian, c(0.0, 0.0));
        assert_eq!(cg.xi, c(0.0, 0.0));
        assert!((cg.rho - 1.329340388179137).abs() < 1e-12);
        let rg = EntryDistribution::new(DistributionKind::RealGaussian, c(0.0, 0.0));
        assert_eq!(rg.xi, c(1.0, 0.0));
        assert!((rg.rho - 1.5957691216057308).abs() < 1e-12);
        let sr = EntryDistribution::new(DistributionKind::ShiftedRademacher, c(0.0, 0.0));
        assert_eq!(sr.xi, c(1.0, 0.0));
        assert_eq!(sr.rho, 1.0);
        for d in [cg, rg, sr] {
            assert!(d.rho >= 1.0, "third absolute moment is at least 1");
        }
    }

    #[test]
    fn rho_matches_numeric_integration() {
        // Real Gaussian: E|g|^3 = 2 * integral_0^inf x^3 phi(x) dx.
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let steps = 60_000;
        let hi = 14.0;
        let h = hi / steps as f64;
        let mut acc = 0.0;
        for i in 0..=steps {
            let t = i as f64 * h;
            let w = if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * t * t * t * phi(t);
        }
        let real_rho = 2.0 * acc * h / 3.0;
        assert!((real_rho - 1.5957691216057308).abs() < 1e-10);
        // Complex Gaussian: |g| is Rayleigh with sigma^2 = 1/2; integrate
        // r^3 * (r / sigma^2) exp(-r^2 / (2 sigma^2)).
        let sigma2 = 0.5;
        let density = |r: f64| r / sigma2 * (-r * r / (2.0 * sigma2)).exp();
        let mut acc = 0.0;
        for i in 0..=steps {
            let r = i as f64 * h;
            let w = if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * r * r * r * density(r);
        }
        let complex_rho = acc * h / 3.0;
        assert!((complex_rho - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn sample_moments_match_distribution() {
        // 10^6 aggregated entries per kind; 5-standard-error bands.
        let n = 100; // d = 2, 100x100 = 10^4 entries per tensor
        let trials = 100;
        for kind in [
            DistributionKind::ComplexGaussian,
            DistributionKind::RealGaussian,
            DistributionKind::ShiftedRademacher,
        ] {
            let mu = c(0.7, -0.3);
            let dist = EntryDistribution::new(kind, mu);
            let mut mean = c(0.0, 0.0);
            let mut var = 0.0;
            let mut sq = c(0.0, 0.0);
            let mut count = 0.0;
            for trial in 0..trials {
                let seed = SeedSpec::new(1234, trial);
                let t = sample_tensor(&dist, 2, n, &seed).unwrap();
                for e in t.entries() {
                    let g = e - mu;
                    mean += g;
                    var += g.norm_sqr();
                    sq += g * g;
                    count += 1.0;
                }
            }
            mean /= count;
            var /= count;
            sq /= count;
            let band = 5.0 / count.sqrt();
            assert!(mean.re.abs() < band && mean.im.abs() < band, "{kind:?} mean {mean}");
            match kind {
                DistributionKind::ShiftedRademacher => assert_eq!(var, 1.0),
                _ => assert!((var - 1.0).abs() < 3.0 * band, "{kind:?} var {var}"),
            }
            let xi = dist.xi;
            assert!(
                (sq - xi).norm() < 5.0 * band,
                "{kind:?} squared mean {sq} vs xi {xi}"
            );
        }
    }

    #[test]
    fn centered_removes_the_mean() {
        let mu = c(2.0, 1.0);
        let dist = EntryDistribution::new(DistributionKind::ComplexGaussian, mu);
        let seed = SeedSpec::new(5, 0);
        let r = sample_tensor(&dist, 3, 32, &seed).unwrap();
        let a = centered(&r, mu).unwrap();
        let count = a.entries().len() as f64;
        let mean = a.total_sum() / count;
        let band = 5.0 / count.sqrt();
        assert!(mean.norm() < band, "centered mean {mean}");
        // Entrywise: centered + mu reproduces the sample.
        let back = a.affine_combine(mu, c(1.0, 0.0)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn substreams_differ() {
        let base = SeedSpec::new(77, 3);
        assert_ne!(base.substream(0), base.substream(1));
        assert_eq!(base.substream(5), base.substream(5));
    }
}
