//! The labeling oracle: holds the hidden utility weights and answers
//! comparison queries under a noise model, counting every label served.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::{Embedding, Label, QueryPair, WeightVector};
use crate::noise::{NoiseKind, NoiseModel};

pub struct Oracle {
    w_star: WeightVector,
    noise: NoiseModel,
    embedding: Embedding,
    rng: ChaCha8Rng,
    query_count: u64,
}

impl Oracle {
    pub fn new(
        w_star: WeightVector,
        noise: NoiseModel,
        embedding: Embedding,
        seed: u64,
    ) -> Result<Self> {
        if embedding.output_dim() != w_star.dim() {
            return Err(Error::DimensionMismatch {
                expected: w_star.dim(),
                got: embedding.output_dim(),
            });
        }
        Ok(Self {
            w_star,
            noise,
            embedding,
            rng: ChaCha8Rng::seed_from_u64(seed),
            query_count: 0,
        })
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn dim(&self) -> usize {
        self.w_star.dim()
    }

    /// Number of labels served so far, repetitions included.
    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    /// The hidden weights. Learners must not call this; it exists for
    /// evaluation and instrumentation.
    pub fn w_star(&self) -> &WeightVector {
        &self.w_star
    }

    fn margin(&self, pair: &QueryPair) -> f64 {
        self.w_star.margin(pair.delta())
    }

    /// One label, `1` with probability `F(w* . delta)`.
    pub fn query(&mut self, pair: &QueryPair) -> Label {
        self.query_count += 1;
        let margin = self.margin(pair);
        Label::from_bool(self.noise.sample_flip(margin, &mut self.rng))
    }

    /// Sum of `t` independent labels for the same pair.
    ///
    /// The sum is drawn from its exact `Binomial(t, F(margin))` law rather
    /// than `t` separate Bernoulli draws; the query counter still advances by
    /// `t`.
    pub fn repeated_query(&mut self, pair: &QueryPair, t: u64) -> Result<u64> {
        if t == 0 {
            return Err(Error::Usage("repetition count must be at least 1".into()));
        }
        self.query_count += t;
        let margin = self.margin(pair);
        let p = match self.noise.kind() {
            NoiseKind::Zero if margin > 0.0 => return Ok(t),
            NoiseKind::Zero if margin < 0.0 => return Ok(0),
            _ => self.noise.cdf(margin),
        };
        let binom = Binomial::new(t, p)
            .map_err(|e| Error::Numerical(format!("binomial({t}, {p}): {e}")))?;
        Ok(binom.sample(&mut self.rng))
    }

    /// Flip probability `F(-|w* . delta|)` of the pair's label.
    pub fn eta(&self, pair: &QueryPair) -> Result<f64> {
        if self.noise.is_zero() {
            return Err(Error::Unsupported(
                "flip probability is undefined for zero noise".into(),
            ));
        }
        Ok(self.noise.cdf(-self.margin(pair).abs()))
    }
}
