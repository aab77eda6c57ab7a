//! Seeded synthetic instances and weight perturbation.
//!
//! All randomness comes from `ChaCha8Rng`, so a config and seed pin down the
//! instance bytes on every platform.

use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use thiserror::Error;

use crate::graph::{BipartiteInstance, CapacityRule, GraphError, RawEdge};

/// Lower clamp for perturbed and exponential weights.
pub const MIN_WEIGHT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("infeasible generator config: {0}")]
    InfeasibleConfig(String),
    #[error("noise variance must be finite and non-negative, got {0}")]
    InvalidVariance(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DegreeDist {
    /// Every ad is adjacent to every consumer.
    Full,
    Fixed(usize),
    Uniform {
        min: usize,
        max: usize,
    },
    /// Truncated continuous power law on `[min, max]`, floored.
    PowerLaw {
        exponent: f64,
        min: usize,
        max: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightDist {
    Uniform {
        low: f64,
        high: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Integers in `low..=high`; ties are frequent by design.
    Integer {
        low: u32,
        high: u32,
    },
    /// Weights taken in edge order (ad ascending, consumer ascending).
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub num_ads: usize,
    pub num_consumers: usize,
    pub degrees: DegreeDist,
    pub weights: WeightDist,
    pub capacity: CapacityRule,
    pub seed: u64,
}

impl GeneratorConfig {
    /// The two-ad worked example as a generator config.
    pub fn fig1() -> Self {
        GeneratorConfig {
            num_ads: 2,
            num_consumers: 4,
            degrees: DegreeDist::Full,
            weights: WeightDist::Explicit(vec![8.0, 6.0, 4.0, 2.0, 3.0, 7.0, 1.0, 9.0]),
            capacity: CapacityRule::Uniform { ad: 2, consumer: 1 },
            seed: 0,
        }
    }
}

fn infeasible(msg: impl Into<String>) -> GenError {
    GenError::InfeasibleConfig(msg.into())
}

impl DegreeDist {
    fn validate(&self, num_consumers: usize) -> Result<(), GenError> {
        let max = match *self {
            DegreeDist::Full => return Ok(()),
            DegreeDist::Fixed(d) => d,
            DegreeDist::Uniform { min, max } | DegreeDist::PowerLaw { min, max, .. } => {
                if min > max {
                    return Err(infeasible(format!("degree range {min}..={max} is empty")));
                }
                max
            }
        };
        if let DegreeDist::PowerLaw { exponent, min, .. } = *self {
            if !(exponent.is_finite() && exponent > 0.0) || min == 0 {
                return Err(infeasible("power law needs exponent > 0 and min >= 1"));
            }
        }
        if max > num_consumers {
            return Err(infeasible(format!(
                "degree {max} exceeds {num_consumers} consumers"
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, num_consumers: usize) -> usize {
        match *self {
            DegreeDist::Full => num_consumers,
            DegreeDist::Fixed(d) => d,
            DegreeDist::Uniform { min, max } => rng.random_range(min..=max),
            DegreeDist::PowerLaw { exponent, min, max } => {
                let u: f64 = rng.random();
                let (lo, hi) = (min as f64, (max + 1) as f64);
                let x = if (exponent - 1.0).abs() < 1e-12 {
                    lo * (hi / lo).powf(u)
                } else {
                    let e = 1.0 - exponent;
                    ((hi.powf(e) - lo.powf(e)) * u + lo.powf(e)).powf(1.0 / e)
                };
                (x.floor() as usize).clamp(min, max)
            }
        }
    }
}

impl WeightDist {
    fn validate(&self) -> Result<(), GenError> {
        match *self {
            WeightDist::Uniform { low, high }
                if !(low > 0.0 && high >= low && high.is_finite()) =>
            {
                Err(infeasible(format!(
                    "uniform weights need 0 < low <= high, got {low}..{high}"
                )))
            }
            WeightDist::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => Err(
                infeasible(format!("exponential rate must be positive, got {rate}")),
            ),
            WeightDist::Integer { low, high } if low == 0 || high < low => Err(infeasible(
                format!("integer weights need 1 <= low <= high, got {low}..={high}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Generates an instance from `config`.
pub fn generate(config: &GeneratorConfig) -> Result<BipartiteInstance, GenError> {
    config.degrees.validate(config.num_consumers)?;
    config.weights.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let exp = match config.weights {
        WeightDist::Exponential { rate } => {
            Some(Exp::new(rate).map_err(|e| infeasible(e.to_string()))?)
        }
        _ => None,
    };
    let mut explicit = match &config.weights {
        WeightDist::Explicit(w) => Some(w.iter().copied()),
        _ => None,
    };

    let mut edges = Vec::new();
    for ad in 0..config.num_ads {
        let mut consumers: Vec<usize> = match config.degrees {
            DegreeDist::Full => (0..config.num_consumers).collect(),
            ref d => {
                let k = d.sample(&mut rng, config.num_consumers);
                index::sample(&mut rng, config.num_consumers, k).into_vec()
            }
        };
        consumers.sort_unstable();
        for c in consumers {
            let w = match &config.weights {
                WeightDist::Uniform { low, high } => {
                    if low == high {
                        *low
                    } else {
                        rng.random_range(*low..*high)
                    }
                }
                WeightDist::Exponential { .. } => exp
                    .as_ref()
                    .expect("built above")
                    .sample(&mut rng)
                    .max(MIN_WEIGHT),
                WeightDist::Integer { low, high } => rng.random_range(*low..=*high) as f64,
                WeightDist::Explicit(_) => explicit
                    .as_mut()
                    .and_then(Iterator::next)
                    .ok_or_else(|| infeasible("explicit weight list is too short"))?,
            };
            edges.push(RawEdge::new(ad, c, w));
        }
    }
    if explicit.is_some_and(|mut it| it.next().is_some()) {
        return Err(infeasible("explicit weight list is too long"));
    }
    Ok(BipartiteInstance::build(
        config.num_ads,
        config.num_consumers,
        &edges,
        config.capacity.clone(),
    )?)
}

/// Adds `N(0, sigma_sq)` noise to every weight, clamping at [`MIN_WEIGHT`].
/// Topology and capacities are unchanged.
pub fn perturb(
    instance: &BipartiteInstance,
    sigma_sq: f64,
    seed: u64,
) -> Result<BipartiteInstance, GenError> {
    if !(sigma_sq >= 0.0 && sigma_sq.is_finite()) {
        return Err(GenError::InvalidVariance(sigma_sq));
    }
    if sigma_sq == 0.0 {
        return Ok(instance.clone());
    }
    let noise =
        Normal::new(0.0, sigma_sq.sqrt()).map_err(|_| GenError::InvalidVariance(sigma_sq))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = instance
        .edges()
        .map(|e| (e.weight + noise.sample(&mut rng)).max(MIN_WEIGHT))
        .collect();
    Ok(instance.with_weights(weights))
}

fn parts(s: &str) -> Vec<&str> {
    s.split(':').map(str::trim).collect()
}

fn field<T: FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("invalid {what} `{s}`"))
}

impl FromStr for DegreeDist {
    type Err = String;

    /// `full`, `fixed:K`, `uniform:MIN:MAX` or `powerlaw:EXP:MIN:MAX`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match parts(s).as_slice() {
            ["full"] => Ok(DegreeDist::Full),
            ["fixed", k] => Ok(DegreeDist::Fixed(field(k, "degree")?)),
            ["uniform", lo, hi] => Ok(DegreeDist::Uniform {
                min: field(lo, "degree")?,
                max: field(hi, "degree")?,
            }),
            ["powerlaw", e, lo, hi] => Ok(DegreeDist::PowerLaw {
                exponent: field(e, "exponent")?,
                min: field(lo, "degree")?,
                max: field(hi, "degree")?,
            }),
            _ => Err(format!(
                "unknown degree distribution `{s}` (full | fixed:K | uniform:MIN:MAX | powerlaw:EXP:MIN:MAX)"
            )),
        }
    }
}

impl FromStr for WeightDist {
    type Err = String;

    /// `uniform:LOW:HIGH`, `exp:RATE` or `int:LOW:HIGH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match parts(s).as_slice() {
            ["uniform", lo, hi] => Ok(WeightDist::Uniform {
                low: field(lo, "weight")?,
                high: field(hi, "weight")?,
            }),
            ["exp", r] => Ok(WeightDist::Exponential {
                rate: field(r, "rate")?,
            }),
            ["int", lo, hi] => Ok(WeightDist::Integer {
                low: field(lo, "weight")?,
                high: field(hi, "weight")?,
            }),
            _ => Err(format!(
                "unknown weight distribution `{s}` (uniform:LOW:HIGH | exp:RATE | int:LOW:HIGH)"
            )),
        }
    }
}

/// `half-degree` or `uniform:AD:CONSUMER`.
pub fn parse_capacity_rule(s: &str) -> Result<CapacityRule, String> {
    match parts(s).as_slice() {
        ["half-degree"] => Ok(CapacityRule::HalfDegree),
        ["uniform", a, c] => Ok(CapacityRule::Uniform {
            ad: field(a, "capacity")?,
            consumer: field(c, "capacity")?,
        }),
        _ => Err(format!(
            "unknown capacity rule `{s}` (half-degree | uniform:AD:CONSUMER)"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fig1_instance;
    use crate::io::format_instance;

    fn config(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            num_ads: 20,
            num_consumers: 300,
            degrees: DegreeDist::PowerLaw {
                exponent: 2.0,
                min: 3,
                max: 100,
            },
            weights: WeightDist::Uniform {
                low: 1.0,
                high: 5.0,
            },
            capacity: CapacityRule::HalfDegree,
            seed,
        }
    }

    #[test]
    fn fig1_preset() {
        assert_eq!(generate(&GeneratorConfig::fig1()).unwrap(), fig1_instance());
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = format_instance(&generate(&config(7)).unwrap());
        let b = format_instance(&generate(&config(7)).unwrap());
        let c = format_instance(&generate(&config(8)).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degrees_within_range() {
        let g = generate(&config(3)).unwrap();
        for a in 0..g.num_ads() {
            assert!((3..=100).contains(&g.ad_degree(a)));
            assert!(g.ad_capacity(a) >= 1 && g.ad_capacity(a) <= g.ad_degree(a));
        }
    }

    #[test]
    fn infeasible_configs() {
        let mut c = config(1);
        c.degrees = DegreeDist::Fixed(301);
        assert!(matches!(generate(&c), Err(GenError::InfeasibleConfig(_))));
        let mut c = config(1);
        c.weights = WeightDist::Uniform {
            low: 0.0,
            high: 1.0,
        };
        assert!(matches!(generate(&c), Err(GenError::InfeasibleConfig(_))));
        let mut c = GeneratorConfig::fig1();
        c.weights = WeightDist::Explicit(vec![1.0; 7]);
        assert!(matches!(generate(&c), Err(GenError::InfeasibleConfig(_))));
    }

    #[test]
    fn perturb_keeps_topology() {
        let g = generate(&config(5)).unwrap();
        assert_eq!(perturb(&g, 0.0, 1).unwrap(), g);
        let p = perturb(&g, 0.1, 1).unwrap();
        assert_eq!(p, perturb(&g, 0.1, 1).unwrap());
        assert_eq!(p.ad_capacities(), g.ad_capacities());
        assert_eq!(p.consumer_capacities(), g.consumer_capacities());
        let same_topology = p
            .edges()
            .zip(g.edges())
            .all(|(x, y)| (x.ad, x.consumer) == (y.ad, y.consumer));
        assert!(same_topology);
        assert!(p.edges().zip(g.edges()).any(|(x, y)| x.weight != y.weight));
        assert!(matches!(
            perturb(&g, -1.0, 1),
            Err(GenError::InvalidVariance(_))
        ));
    }

    #[test]
    fn perturb_clamps_at_epsilon() {
        let g =
            BipartiteInstance::build(1, 1, &[RawEdge::new(0, 0, 0.01)], CapacityRule::HalfDegree)
                .unwrap();
        // a huge variance makes a large negative draw all but certain for some seed
        let clamped = (0..64)
            .map(|s| perturb(&g, 1e6, s).unwrap().weight(0, 0).unwrap())
            .find(|&w| w == MIN_WEIGHT);
        assert_eq!(clamped, Some(MIN_WEIGHT));
    }

    #[test]
    fn parses_distributions() {
        assert_eq!("full".parse::<DegreeDist>(), Ok(DegreeDist::Full));
        assert_eq!(
            "powerlaw:2.5:2:50".parse::<DegreeDist>(),
            Ok(DegreeDist::PowerLaw {
                exponent: 2.5,
                min: 2,
                max: 50
            })
        );
        assert_eq!(
            "int:1:5".parse::<WeightDist>(),
            Ok(WeightDist::Integer { low: 1, high: 5 })
        );
        assert!("zipf:1".parse::<WeightDist>().is_err());
        assert_eq!(
            parse_capacity_rule("uniform:2:1"),
            Ok(CapacityRule::Uniform { ad: 2, consumer: 1 })
        );
    }
}
