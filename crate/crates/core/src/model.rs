//! Polymer models, disorder sampling and finite boxes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::scalar::Real;

/// Which of the two polymers occupies a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// One polymer: per-site potentials and hoppings.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymerSpec<T> {
    potentials: Vec<T>,
    hoppings: Vec<T>,
}

impl<T: Real> PolymerSpec<T> {
    pub fn new(potentials: Vec<T>, hoppings: Vec<T>) -> Result<Self> {
        if potentials.is_empty() {
            return Err(Error::invalid("polymer must have at least one site"));
        }
        if potentials.len() != hoppings.len() {
            return Err(Error::invalid(format!(
                "polymer has {} potentials but {} hoppings",
                potentials.len(),
                hoppings.len()
            )));
        }
        if let Some(t) = hoppings.iter().find(|t| !(**t > T::zero())) {
            return Err(Error::invalid(format!("hopping {t} is not strictly positive")));
        }
        if potentials.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite potential"));
        }
        Ok(Self {
            potentials,
            hoppings,
        })
    }

    /// Number of lattice sites.
    pub fn len(&self) -> usize {
        self.potentials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty()
    }

    pub fn potentials(&self) -> &[T] {
        &self.potentials
    }

    pub fn hoppings(&self) -> &[T] {
        &self.hoppings
    }
}

/// Two polymers and the probability of the plus polymer.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymerModel<T> {
    plus: PolymerSpec<T>,
    minus: PolymerSpec<T>,
    p_plus: T,
}

impl<T: Real> PolymerModel<T> {
    pub fn new(plus: PolymerSpec<T>, minus: PolymerSpec<T>, p_plus: T) -> Result<Self> {
        if !(p_plus > T::zero() && p_plus < T::one()) {
            return Err(Error::invalid(format!(
                "probability {p_plus} outside the open interval (0, 1)"
            )));
        }
        Ok(Self { plus, minus, p_plus })
    }

    pub fn plus(&self) -> &PolymerSpec<T> {
        &self.plus
    }

    pub fn minus(&self) -> &PolymerSpec<T> {
        &self.minus
    }

    pub fn polymer(&self, sign: Sign) -> &PolymerSpec<T> {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    pub fn p_plus(&self) -> T {
        self.p_plus
    }

    pub fn p_minus(&self) -> T {
        T::one() - self.p_plus
    }

    /// `⟨c±⟩ = p c₊ + (1 − p) c₋`.
    pub fn average(&self, plus: T, minus: T) -> T {
        self.p_plus * plus + self.p_minus() * minus
    }

    /// Mean polymer length `⟨L±⟩`.
    pub fn mean_length(&self) -> T {
        self.average(
            T::from_usize(self.plus.len()).unwrap(),
            T::from_usize(self.minus.len()).unwrap(),
        )
    }
}

/// Random dimer model: both polymers are two sites with potential `±V`.
pub fn dimer_preset<T: Real>(v: T, p: T) -> Result<PolymerModel<T>> {
    if !(v > T::zero() && v <= T::one()) {
        return Err(Error::invalid(format!("dimer strength V = {v} outside (0, 1]")));
    }
    let one = T::one();
    PolymerModel::new(
        PolymerSpec::new(vec![v, v], vec![one, one])?,
        PolymerSpec::new(vec![-v, -v], vec![one, one])?,
        p,
    )
}

/// Anderson–Bernoulli model: single-site polymers with potential `±V`.
pub fn anderson_preset<T: Real>(v: T, p: T) -> Result<PolymerModel<T>> {
    PolymerModel::new(
        PolymerSpec::new(vec![v], vec![T::one()])?,
        PolymerSpec::new(vec![-v], vec![T::one()])?,
        p,
    )
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &["dimer", "anderson"];

/// Looks a preset up by name.
pub fn preset<T: Real>(name: &str, v: T, p: T) -> Result<PolymerModel<T>> {
    match name {
        "dimer" => dimer_preset(v, p),
        "anderson" => anderson_preset(v, p),
        other => Err(Error::invalid(format!(
            "unknown preset `{other}`; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// A disorder realization: block signs and polymer node positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub signs: Vec<Sign>,
    /// `nodes[0] = 0`, `nodes[k]` = total length of the first `k` blocks.
    pub nodes: Vec<usize>,
    pub seed: u64,
    pub realization_index: u64,
}

impl Configuration {
    /// Builds a configuration from explicit signs.
    pub fn from_signs<T: Real>(model: &PolymerModel<T>, signs: Vec<Sign>) -> Self {
        let nodes = node_positions(model, &signs);
        Self {
            signs,
            nodes,
            seed: 0,
            realization_index: 0,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.signs.len()
    }

    /// Total number of sites covered by the blocks.
    pub fn num_sites(&self) -> usize {
        *self.nodes.last().unwrap_or(&0)
    }
}

fn node_positions<T: Real>(model: &PolymerModel<T>, signs: &[Sign]) -> Vec<usize> {
    let mut nodes = Vec::with_capacity(signs.len() + 1);
    nodes.push(0);
    let mut pos = 0;
    for s in signs {
        pos += model.polymer(*s).len();
        nodes.push(pos);
    }
    nodes
}

pub(crate) fn draw_sign<T: Real, R: Rng>(rng: &mut R, p_plus: T) -> Sign {
    if rng.random_bool(p_plus.as_f64()) {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Samples `num_blocks` iid Bernoulli signs from the `(seed, realization_index)` substream.
pub fn sample_configuration<T: Real>(
    model: &PolymerModel<T>,
    num_blocks: usize,
    seed: u64,
    realization_index: u64,
) -> Result<Configuration> {
    if num_blocks == 0 {
        return Err(Error::invalid("num_blocks must be at least 1"));
    }
    let mut rng = substream(seed, realization_index);
    let signs: Vec<Sign> = (0..num_blocks)
        .map(|_| draw_sign(&mut rng, model.p_plus()))
        .collect();
    let nodes = node_positions(model, &signs);
    Ok(Configuration {
        signs,
        nodes,
        seed,
        realization_index,
    })
}

/// Samples blocks until they cover at least `num_sites` sites.
///
/// Draws come from the same substream as [`sample_configuration`], so the
/// first blocks agree with a block-count sample of the same realization.
pub fn sample_configuration_for_sites<T: Real>(
    model: &PolymerModel<T>,
    num_sites: usize,
    seed: u64,
    realization_index: u64,
) -> Result<Configuration> {
    if num_sites == 0 {
        return Err(Error::invalid("num_sites must be at least 1"));
    }
    let mut rng = substream(seed, realization_index);
    let mut signs = Vec::new();
    let mut covered = 0;
    while covered < num_sites {
        let s = draw_sign(&mut rng, model.p_plus());
        covered += model.polymer(s).len();
        signs.push(s);
    }
    let nodes = node_positions(model, &signs);
    Ok(Configuration {
        signs,
        nodes,
        seed,
        realization_index,
    })
}

/// Potentials and hoppings laid along the lattice.
///
/// `hoppings[n]` is `t(n)`, the bond between sites `n − 1` and `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSequences<T> {
    pub potentials: Vec<T>,
    pub hoppings: Vec<T>,
}

impl<T: Real> LatticeSequences<T> {
    pub fn num_sites(&self) -> usize {
        self.potentials.len()
    }

    /// Restriction to the first `num_sites` sites.
    pub fn truncated(mut self, num_sites: usize) -> Self {
        self.potentials.truncate(num_sites);
        self.hoppings.truncate(num_sites);
        self
    }

    /// Deterministic chain with constant potential and unit hopping.
    pub fn constant(num_sites: usize, potential: T) -> Self {
        Self {
            potentials: vec![potential; num_sites],
            hoppings: vec![T::one(); num_sites],
        }
    }
}

/// Concatenates the per-block tuples in block order.
pub fn build_sequences<T: Real>(
    model: &PolymerModel<T>,
    config: &Configuration,
) -> Result<LatticeSequences<T>> {
    if config.nodes.len() != config.signs.len() + 1 || config.nodes.first() != Some(&0) {
        return Err(Error::invalid("configuration nodes do not match its blocks"));
    }
    let mut potentials = Vec::with_capacity(config.num_sites());
    let mut hoppings = Vec::with_capacity(config.num_sites());
    for (k, s) in config.signs.iter().enumerate() {
        let poly = model.polymer(*s);
        if config.nodes[k + 1] - config.nodes[k] != poly.len() {
            return Err(Error::invalid(format!(
                "block {k} spans {} sites but polymer {} has length {}",
                config.nodes[k + 1] - config.nodes[k],
                s.symbol(),
                poly.len()
            )));
        }
        potentials.extend_from_slice(poly.potentials());
        hoppings.extend_from_slice(poly.hoppings());
    }
    Ok(LatticeSequences {
        potentials,
        hoppings,
    })
}

/// Size of a finite box, in sites or in whole polymer blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxSize {
    Sites(usize),
    Blocks(usize),
}

/// Samples a configuration and lays it out on a box starting at the origin.
pub fn sample_box<T: Real>(
    model: &PolymerModel<T>,
    size: BoxSize,
    seed: u64,
    realization_index: u64,
) -> Result<(Configuration, LatticeSequences<T>)> {
    match size {
        BoxSize::Blocks(n) => {
            let config = sample_configuration(model, n, seed, realization_index)?;
            let seq = build_sequences(model, &config)?;
            Ok((config, seq))
        }
        BoxSize::Sites(n) => {
            let config = sample_configuration_for_sites(model, n, seed, realization_index)?;
            let seq = build_sequences(model, &config)?.truncated(n);
            Ok((config, seq))
        }
    }
}
