//! Domain types shared by every learner: simplex weight vectors, input
//! embeddings, comparison pairs, labels and datasets.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `sum(w) == 1`.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;
/// Components at or above this negative value are clipped to zero.
pub const SIMPLEX_CLIP_TOL: f64 = -1e-12;
/// Slack allowed when testing membership of the input box.
pub const BOX_TOL: f64 = 1e-12;
/// Default bound on `|embed(invert(v)) - v|_inf`.
const RANK_TOL: f64 = 1e-10;
pub const DEFAULT_ROUND_TRIP_TOL: f64 = 1e-10;

/// A point on the probability simplex: the weights of a linear utility.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(mut w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::Domain(format!(
                "weight vector needs at least 2 components, got {}",
                w.len()
            )));
        }
        for (i, c) in w.iter_mut().enumerate() {
            if !c.is_finite() {
                return Err(Error::Domain(format!("component {i} is not finite")));
            }
            if *c < 0.0 {
                if *c >= SIMPLEX_CLIP_TOL {
                    *c = 0.0;
                } else {
                    return Err(Error::Domain(format!("component {i} is negative ({c})")));
                }
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::Domain(format!("components sum to {sum}, not 1")));
        }
        Ok(Self(w))
    }

    /// The centroid `(1/m, ..., 1/m)`.
    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    /// The `j`-th vertex of the simplex.
    pub fn vertex(m: usize, j: usize) -> Result<Self> {
        if j >= m {
            return Err(Error::Domain(format!("vertex {j} out of range for m={m}")));
        }
        let mut w = vec![0.0; m];
        w[j] = 1.0;
        Self::new(w)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Utility margin `w . delta`.
    pub fn margin(&self, delta: &[f64]) -> f64 {
        dot(&self.0, delta)
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        WeightVector::new(v).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Serialized form of an [`Embedding`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// Lower corner of the input box (affine only, defaults to zeros).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    /// Upper corner of the input box (affine only, defaults to ones).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Identity,
    Affine,
}

#[derive(Debug, Clone)]
struct Affine {
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// `A^T (A A^T)^{-1}`
    pinv: DMatrix<f64>,
}

/// A known map from candidate profiles `x` in an input box to features in
/// `[0,1]^m`. Only the identity and full-row-rank affine maps are supported,
/// both of which can be inverted exactly.
#[derive(Debug, Clone)]
pub struct Embedding {
    affine: Option<Affine>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    output_dim: usize,
    round_trip_tol: f64,
}

impl Embedding {
    /// Identity on `[0,1]^m`.
    pub fn identity(m: usize) -> Self {
        Self {
            affine: None,
            lo: vec![0.0; m],
            hi: vec![1.0; m],
            output_dim: m,
            round_trip_tol: DEFAULT_ROUND_TRIP_TOL,
        }
    }

    /// `x -> A x + b` on the box `[lo, hi]`. `a` is given row-major, `m x d`.
    pub fn affine(a: Vec<Vec<f64>>, b: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let m = a.len();
        if m < 2 {
            return Err(Error::Usage(
                "affine embedding needs at least 2 output rows".into(),
            ));
        }
        let d = a[0].len();
        if a.iter().any(|row| row.len() != d) {
            return Err(Error::Usage(
                "affine matrix rows have unequal length".into(),
            ));
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: b.len(),
            });
        }
        if lo.len() != d || hi.len() != d {
            return Err(Error::Usage(format!("input box must have {d} coordinates")));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::Usage("input box has lo > hi".into()));
        }
        let a = DMatrix::from_fn(m, d, |i, j| a[i][j]);
        let sv = a.singular_values();
        let (smin, smax) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| {
            (lo.min(*s), hi.max(*s))
        });
        if m > d || !(smin > RANK_TOL * smax) {
            return Err(Error::Usage("affine matrix is not full row rank".into()));
        }
        let chol = (&a * a.transpose())
            .cholesky()
            .ok_or_else(|| Error::Usage("affine matrix is not full row rank".into()))?;
        let pinv = a.transpose() * chol.inverse();

        // Image of the box, coordinate by coordinate.
        for i in 0..m {
            let (mut min, mut max) = (b[i], b[i]);
            for j in 0..d {
                let (p, q) = (a[(i, j)] * lo[j], a[(i, j)] * hi[j]);
                min += p.min(q);
                max += p.max(q);
            }
            if min < -BOX_TOL || max > 1.0 + BOX_TOL {
                return Err(Error::Usage(format!(
                    "affine image of the input box leaves [0,1] on output {i}: [{min}, {max}]"
                )));
            }
        }
        Ok(Self {
            affine: Some(Affine {
                a,
                b: DVector::from_vec(b),
                pinv,
            }),
            lo,
            hi,
            output_dim: m,
            round_trip_tol: DEFAULT_ROUND_TRIP_TOL,
        })
    }

    pub fn from_config(cfg: &EmbeddingConfig, m: usize) -> Result<Self> {
        match cfg.kind {
            EmbeddingKind::Identity => {
                if cfg.a.is_some() || cfg.b.is_some() {
                    return Err(Error::Usage("identity embedding takes no A or b".into()));
                }
                Ok(Self::identity(m))
            }
            EmbeddingKind::Affine => {
                let a = cfg
                    .a
                    .clone()
                    .ok_or_else(|| Error::Usage("affine embedding needs A".into()))?;
                let b = cfg
                    .b
                    .clone()
                    .ok_or_else(|| Error::Usage("affine embedding needs b".into()))?;
                if a.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        got: a.len(),
                    });
                }
                let d = a.first().map_or(0, Vec::len);
                let lo = cfg.lo.clone().unwrap_or_else(|| vec![0.0; d]);
                let hi = cfg.hi.clone().unwrap_or_else(|| vec![1.0; d]);
                Self::affine(a, b, lo, hi)
            }
        }
    }

    pub fn with_round_trip_tol(mut self, tol: f64) -> Self {
        self.round_trip_tol = tol;
        self
    }

    pub fn is_identity(&self) -> bool {
        self.affine.is_none()
    }

    pub fn input_dim(&self) -> usize {
        self.lo.len()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_box(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    fn check_in_box(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        for (j, ((v, l), h)) in x.iter().zip(&self.lo).zip(&self.hi).enumerate() {
            if !(*v >= l - BOX_TOL && *v <= h + BOX_TOL) {
                return Err(Error::Domain(format!(
                    "input coordinate {j} = {v} outside [{l}, {h}]"
                )));
            }
        }
        Ok(())
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_in_box(x)?;
        Ok(match &self.affine {
            None => x.to_vec(),
            Some(aff) => {
                let y = &aff.a * DVector::from_column_slice(x) + &aff.b;
                y.iter().map(|v| v.clamp(0.0, 1.0)).collect()
            }
        })
    }

    /// A preimage of `v` inside the input box (the minimum-norm solution for
    /// affine maps).
    pub fn invert(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim,
                got: v.len(),
            });
        }
        let x: Vec<f64> = match &self.affine {
            None => v.to_vec(),
            Some(aff) => {
                let rhs = DVector::from_column_slice(v) - &aff.b;
                (&aff.pinv * rhs).iter().copied().collect()
            }
        };
        for (j, ((xj, l), h)) in x.iter().zip(&self.lo).zip(&self.hi).enumerate() {
            if !(*xj >= l - BOX_TOL && *xj <= h + BOX_TOL) {
                return Err(Error::NoPreimage(format!(
                    "preimage coordinate {j} = {xj} outside [{l}, {h}]"
                )));
            }
        }
        let x: Vec<f64> = x
            .iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .map(|((xj, l), h)| xj.clamp(*l, *h))
            .collect();
        let back = self.embed(&x)?;
        let err = back
            .iter()
            .zip(v)
            .fold(0.0_f64, |acc, (p, q)| acc.max((p - q).abs()));
        if !(err < self.round_trip_tol) {
            return Err(Error::NoPreimage(format!(
                "round-trip error {err:e} exceeds tolerance {:e}",
                self.round_trip_tol
            )));
        }
        Ok(x)
    }
}

/// A comparison query `(x, x')` together with its embedded difference
/// `phi(x') - phi(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPair {
    x: Vec<f64>,
    x_prime: Vec<f64>,
    delta: Vec<f64>,
}

impl QueryPair {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn x_prime(&self) -> &[f64] {
        &self.x_prime
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }
}

pub fn make_pair(e: &Embedding, x: &[f64], x_prime: &[f64]) -> Result<QueryPair> {
    let a = e.embed(x)?;
    let b = e.embed(x_prime)?;
    let delta = b.iter().zip(&a).map(|(p, q)| p - q).collect();
    Ok(QueryPair {
        x: x.to_vec(),
        x_prime: x_prime.to_vec(),
        delta,
    })
}

/// Comparison outcome: `1` means `x'` was preferred over `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Zero,
    One,
}

impl Label {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Label::One
        } else {
            Label::Zero
        }
    }

    pub fn is_one(self) -> bool {
        self == Label::One
    }

    /// `+1` for `One`, `-1` for `Zero`.
    pub fn sign(self) -> f64 {
        match self {
            Label::One => 1.0,
            Label::Zero => -1.0,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Zero),
            1 => Ok(Label::One),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Zero => 0,
            Label::One => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub pair: QueryPair,
    pub y: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub distribution: String,
    pub seed: Option<u64>,
}

/// An ordered, non-empty list of labeled comparisons.
#[derive(Debug, Clone)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct JsonlRecord {
    x: Vec<f64>,
    x_prime: Vec<f64>,
    y: Label,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>, meta: DatasetMeta) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Usage(
                "dataset must contain at least one example".into(),
            ));
        }
        let m = examples[0].pair.delta.len();
        if let Some(bad) = examples.iter().find(|e| e.pair.delta.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: bad.pair.delta.len(),
            });
        }
        Ok(Self { examples, meta })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Embedded dimension `m`.
    pub fn dim(&self) -> usize {
        self.examples[0].pair.delta.len()
    }

    /// One JSON object `{"x":[..],"x_prime":[..],"y":0|1}` per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.examples {
            let rec = JsonlRecord {
                x: e.pair.x.clone(),
                x_prime: e.pair.x_prime.clone(),
                y: e.y,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, embedding: &Embedding, meta: DatasetMeta) -> Result<Self> {
        let mut examples = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: JsonlRecord = serde_json::from_str(&line)?;
            let pair = make_pair(embedding, &rec.x, &rec.x_prime)?;
            examples.push(LabeledExample { pair, y: rec.y });
        }
        Self::new(examples, meta)
    }
}
