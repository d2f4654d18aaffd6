//! Length-aware reward shaping.
//!
//! A hard cap `L` pays `score * 1[len <= L]`. Randomized clipping draws the
//! cap from a distribution `D` instead, which in expectation pays
//! `score * (1 - F_D(len))`, where `F_D(len) = P(L < len)`.
//!
//! The Gaussian family is used as-is, without truncation to nonnegative caps.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClipDistribution {
    Hard { limit: f64 },
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std_dev: f64 },
    TruncExp { rate: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid clip distribution: {0}")]
pub struct DistributionError(String);

impl ClipDistribution {
    pub fn validate(&self) -> Result<(), DistributionError> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match *self {
            ClipDistribution::Hard { limit } => finite(&[limit]) && limit > 0.0,
            ClipDistribution::Uniform { low, high } => {
                finite(&[low, high]) && 0.0 <= low && low < high
            }
            ClipDistribution::Gaussian { mean, std_dev } => {
                finite(&[mean, std_dev]) && std_dev > 0.0
            }
            ClipDistribution::TruncExp { rate, upper } => {
                finite(&[rate, upper]) && rate > 0.0 && upper > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(DistributionError(format!("{self}")))
        }
    }

    /// Draws one cap.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            ClipDistribution::Hard { limit } => limit,
            ClipDistribution::Uniform { low, high } => rng.random_range(low..high),
            ClipDistribution::Gaussian { mean, std_dev } => Normal::new(mean, std_dev)
                .expect("validated distribution")
                .sample(rng),
            ClipDistribution::TruncExp { rate, upper } => {
                // Inverse CDF of Exp(rate) conditioned on [0, upper].
                let mass = -(-rate * upper).exp_m1();
                let u: f64 = rng.random();
                -(-u * mass).ln_1p() / rate
            }
        }
    }
}

impl fmt::Display for ClipDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClipDistribution::Hard { limit } => write!(f, "hard:{limit}"),
            ClipDistribution::Uniform { low, high } => write!(f, "uniform:{low}:{high}"),
            ClipDistribution::Gaussian { mean, std_dev } => write!(f, "gaussian:{mean}:{std_dev}"),
            ClipDistribution::TruncExp { rate, upper } => write!(f, "truncexp:{rate}:{upper}"),
        }
    }
}

/// Parses `hard:L`, `uniform:a:b`, `gaussian:mu:sigma` or `truncexp:rate:upper`.
impl FromStr for ClipDistribution {
    type Err = DistributionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let params: Vec<f64> = parts
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DistributionError(format!("{s}: {e}")))?;
        let dist = match (kind.as_str(), params.as_slice()) {
            ("hard", &[limit]) => ClipDistribution::Hard { limit },
            ("uniform", &[low, high]) => ClipDistribution::Uniform { low, high },
            ("gaussian", &[mean, std_dev]) => ClipDistribution::Gaussian { mean, std_dev },
            ("truncexp", &[rate, upper]) => ClipDistribution::TruncExp { rate, upper },
            _ => return Err(DistributionError(format!("unrecognized spec {s:?}"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// `score * 1[length <= limit]`.
pub fn hard_clip_reward(correct: bool, length: f64, limit: f64) -> f64 {
    if correct && length <= limit {
        1.0
    } else {
        0.0
    }
}

/// `P(L < length)` for `L ~ dist`.
pub fn cap_cdf(dist: &ClipDistribution, length: f64) -> f64 {
    match *dist {
        ClipDistribution::Hard { limit } => {
            if length > limit {
                1.0
            } else {
                0.0
            }
        }
        ClipDistribution::Uniform { low, high } => {
            if length <= low {
                0.0
            } else if length >= high {
                1.0
            } else {
                (length - low) / (high - low)
            }
        }
        ClipDistribution::Gaussian { mean, std_dev } => {
            0.5 * libm::erfc(-(length - mean) / (std_dev * std::f64::consts::SQRT_2))
        }
        ClipDistribution::TruncExp { rate, upper } => {
            if length <= 0.0 {
                0.0
            } else if length >= upper {
                1.0
            } else {
                ((-rate * length).exp_m1() / (-rate * upper).exp_m1()).clamp(0.0, 1.0)
            }
        }
    }
}

/// Expected reward under a random cap: `score * (1 - F_D(length))`.
pub fn rc_reward(correct: bool, length: f64, dist: &ClipDistribution) -> f64 {
    if !correct {
        return 0.0;
    }
    match *dist {
        // Piecewise form, exact at the breakpoints.
        ClipDistribution::Uniform { low, high } => {
            if length <= low {
                1.0
            } else if length < high {
                (high - length) / (high - low)
            } else {
                0.0
            }
        }
        _ => 1.0 - cap_cdf(dist, length),
    }
}

/// Monte Carlo estimate of `E_{L ~ D}[hard_clip_reward(score, length, L)]`.
pub fn rc_reward_mc(
    correct: bool,
    length: f64,
    dist: &ClipDistribution,
    samples: u64,
    seed: u64,
) -> f64 {
    if !correct || samples == 0 {
        return 0.0;
    }
    if let ClipDistribution::Hard { limit } = *dist {
        return hard_clip_reward(correct, length, limit);
    }
    let mut rng = seed::rng(seed);
    let hits = (0..samples)
        .filter(|_| length <= dist.sample(&mut rng))
        .count();
    hits as f64 / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RC: ClipDistribution = ClipDistribution::Uniform {
        low: 60_000.0,
        high: 90_000.0,
    };

    #[test]
    fn hard_clip_boundary() {
        assert_eq!(hard_clip_reward(true, 89_999.0, 90_000.0), 1.0);
        assert_eq!(hard_clip_reward(true, 90_000.0, 90_000.0), 1.0);
        assert_eq!(hard_clip_reward(true, 90_001.0, 90_000.0), 0.0);
        assert_eq!(hard_clip_reward(false, 10.0, 90_000.0), 0.0);
    }

    #[test]
    fn uniform_branches() {
        assert_eq!(cap_cdf(&RC, 60_000.0), 0.0);
        assert_eq!(cap_cdf(&RC, 90_000.0), 1.0);
        assert_eq!(rc_reward(true, 60_000.0, &RC), 1.0);
        assert_eq!(rc_reward(true, 75_000.0, &RC), 0.5);
        assert_eq!(rc_reward(true, 90_000.0, &RC), 0.0);
        assert_eq!(rc_reward(false, 75_000.0, &RC), 0.0);
        assert_eq!(rc_reward(true, 67_500.0, &RC), 0.75);
    }

    #[test]
    fn gaussian_cdf_is_half_at_mean_and_matches_tables() {
        let g = ClipDistribution::Gaussian {
            mean: 50_000.0,
            std_dev: 5_000.0,
        };
        assert!((cap_cdf(&g, 50_000.0) - 0.5).abs() < 1e-15);
        // Standard normal table values at z = 1 and z = -2.
        assert!((cap_cdf(&g, 55_000.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((cap_cdf(&g, 40_000.0) - 0.022_750_131_948_179_2).abs() < 1e-12);
    }

    #[test]
    fn truncexp_cdf_endpoints() {
        let d = ClipDistribution::TruncExp {
            rate: 1e-4,
            upper: 90_000.0,
        };
        assert_eq!(cap_cdf(&d, 0.0), 0.0);
        assert_eq!(cap_cdf(&d, 90_000.0), 1.0);
        let mid = cap_cdf(&d, 10_000.0);
        let expected = (1.0 - (-1.0f64).exp()) / (1.0 - (-9.0f64).exp());
        assert!((mid - expected).abs() < 1e-12);
    }

    #[test]
    fn hard_distribution_reduces_to_hard_clip() {
        let d = ClipDistribution::Hard { limit: 1_000.0 };
        for len in [0.0, 999.0, 1_000.0, 1_001.0, 5_000.0] {
            assert_eq!(rc_reward(true, len, &d), hard_clip_reward(true, len, 1_000.0));
            assert_eq!(rc_reward_mc(true, len, &d, 7, 1), hard_clip_reward(true, len, 1_000.0));
        }
    }

    #[test]
    fn mc_matches_uniform_midpoint() {
        let est = rc_reward_mc(true, 75_000.0, &RC, 1_000_000, 12);
        assert!((est - 0.5).abs() <= 0.002, "{est}");
        assert_eq!(rc_reward_mc(false, 75_000.0, &RC, 1_000, 12), 0.0);
    }

    #[test]
    fn parses_cli_specs() {
        assert_eq!("uniform:60000:90000".parse::<ClipDistribution>().unwrap(), RC);
        assert!("uniform:9:1".parse::<ClipDistribution>().is_err());
        assert!("gaussian:1:0".parse::<ClipDistribution>().is_err());
        assert!("poisson:3".parse::<ClipDistribution>().is_err());
        let d: ClipDistribution = "truncexp:0.001:5000".parse().unwrap();
        assert_eq!(d.to_string().parse::<ClipDistribution>().unwrap(), d);
    }

    fn any_dist() -> impl Strategy<Value = ClipDistribution> {
        prop_oneof![
            (1.0..1e5f64).prop_map(|limit| ClipDistribution::Hard { limit }),
            (0.0..5e4f64, 1.0..5e4f64).prop_map(|(low, w)| ClipDistribution::Uniform { low, high: low + w }),
            (0.0..1e5f64, 1.0..2e4f64).prop_map(|(mean, std_dev)| ClipDistribution::Gaussian { mean, std_dev }),
            (1e-6..1e-2f64, 1.0..1e5f64).prop_map(|(rate, upper)| ClipDistribution::TruncExp { rate, upper }),
        ]
    }

    proptest! {
        #[test]
        fn reward_is_bounded_and_nonincreasing(dist in any_dist(), a in 0.0..2e5f64, b in 0.0..2e5f64) {
            let (short, long) = if a <= b { (a, b) } else { (b, a) };
            let r_short = rc_reward(true, short, &dist);
            let r_long = rc_reward(true, long, &dist);
            prop_assert!((0.0..=1.0).contains(&r_short));
            prop_assert!(r_long <= r_short + 1e-15);
            prop_assert_eq!(rc_reward(false, short, &dist), 0.0);
            prop_assert!(cap_cdf(&dist, long) + 1e-15 >= cap_cdf(&dist, short));
        }

        #[test]
        fn uniform_closed_form_matches_cdf_route(low in 0.0..5e4f64, w in 1.0..5e4f64, t in 0.0..1.0f64) {
            let dist = ClipDistribution::Uniform { low, high: low + w };
            let len = low + t * w;
            prop_assert!((rc_reward(true, len, &dist) - (1.0 - cap_cdf(&dist, len))).abs() < 1e-12);
        }
    }
}
