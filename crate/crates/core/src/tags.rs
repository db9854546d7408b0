//! Layer/concept vocabulary and operator provenance tags.
//!
//! Every meta-modeling operation in this crate is attributable to a
//! transition between layers (system, data, model) and concepts
//! (quantitative parameters, functional characteristics, structure).
//! [`OperatorTag`] captures that transition and round-trips through a
//! compact string form such as `Γ_{D→M}^{Ξ→Φ}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Modeling layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    #[serde(rename = "S")]
    System,
    #[serde(rename = "D")]
    Data,
    #[serde(rename = "M")]
    Model,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::System, Layer::Data, Layer::Model];

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::System => "S",
            Layer::Data => "D",
            Layer::Model => "M",
        }
    }
}

impl FromStr for Layer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" => Ok(Layer::System),
            "D" => Ok(Layer::Data),
            "M" => Ok(Layer::Model),
            other => Err(Error::Parse(format!("unknown layer '{other}'"))),
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Modeling concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Concept {
    /// Quantitative parameters, Ξ.
    #[serde(rename = "Xi")]
    Quantitative,
    /// Functional characteristics, Φ.
    #[serde(rename = "Phi")]
    Functional,
    /// Structure, Σ.
    #[serde(rename = "Sigma")]
    Structural,
}

impl Concept {
    pub const ALL: [Concept; 3] = [
        Concept::Quantitative,
        Concept::Functional,
        Concept::Structural,
    ];

    /// Greek letter used in the rendered tag.
    pub fn symbol(self) -> &'static str {
        match self {
            Concept::Quantitative => "Ξ",
            Concept::Functional => "Φ",
            Concept::Structural => "Σ",
        }
    }

    fn from_symbol(s: &str) -> Result<Self> {
        match s {
            "Ξ" | "Xi" => Ok(Concept::Quantitative),
            "Φ" | "Phi" => Ok(Concept::Functional),
            "Σ" | "Sigma" => Ok(Concept::Structural),
            other => Err(Error::Parse(format!("unknown concept '{other}'"))),
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Provenance tag of a meta-modeling operation: which layer/concept
/// transition it performs, and whether it acts in the application/analysis
/// direction (primed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OperatorTag {
    pub source_layer: Layer,
    pub target_layer: Layer,
    pub source_concept: Concept,
    pub target_concept: Concept,
    pub primed: bool,
}

impl OperatorTag {
    pub fn new(
        source_layer: Layer,
        target_layer: Layer,
        source_concept: Concept,
        target_concept: Concept,
    ) -> Self {
        OperatorTag {
            source_layer,
            target_layer,
            source_concept,
            target_concept,
            primed: false,
        }
    }

    /// Intra-layer tag with a single concept.
    pub fn intra(layer: Layer, concept: Concept) -> Self {
        OperatorTag::new(layer, layer, concept, concept)
    }

    pub fn primed(mut self) -> Self {
        self.primed = true;
        self
    }

    /// All 162 enumerable tags (3 × 3 layers × 3 × 3 concepts × primed).
    pub fn enumerate() -> Vec<OperatorTag> {
        let mut out = Vec::with_capacity(162);
        for &sl in &Layer::ALL {
            for &tl in &Layer::ALL {
                for &sc in &Concept::ALL {
                    for &tc in &Concept::ALL {
                        for primed in [false, true] {
                            let mut t = OperatorTag::new(sl, tl, sc, tc);
                            t.primed = primed;
                            out.push(t);
                        }
                    }
                }
            }
        }
        out
    }

    /// Render as `Γ[']_{L1→L2}^{A1→A2}`, with the arrow omitted when
    /// source equals target on that axis.
    pub fn render(&self) -> String {
        let prime = if self.primed { "'" } else { "" };
        let layers = if self.source_layer == self.target_layer {
            self.source_layer.as_str().to_string()
        } else {
            format!("{}→{}", self.source_layer, self.target_layer)
        };
        let concepts = if self.source_concept == self.target_concept {
            self.source_concept.symbol().to_string()
        } else {
            format!("{}→{}", self.source_concept, self.target_concept)
        };
        format!("Γ{prime}_{{{layers}}}^{{{concepts}}}")
    }

    pub fn parse(s: &str) -> Result<Self> {
        let err = || Error::Parse(format!("malformed operator tag '{s}'"));
        let rest = s.strip_prefix('Γ').ok_or_else(err)?;
        let (primed, rest) = match rest.strip_prefix('\'') {
            Some(r) => (true, r),
            None => (false, rest),
        };
        let rest = rest.strip_prefix("_{").ok_or_else(err)?;
        let (layers, rest) = rest.split_once('}').ok_or_else(err)?;
        let rest = rest.strip_prefix("^{").ok_or_else(err)?;
        let concepts = rest.strip_suffix('}').ok_or_else(err)?;

        let (sl, tl) = match layers.split_once('→') {
            Some((a, b)) => (a.parse()?, b.parse()?),
            None => {
                let l: Layer = layers.parse()?;
                (l, l)
            }
        };
        let (sc, tc) = match concepts.split_once('→') {
            Some((a, b)) => (Concept::from_symbol(a)?, Concept::from_symbol(b)?),
            None => {
                let c = Concept::from_symbol(concepts)?;
                (c, c)
            }
        };
        let mut tag = OperatorTag::new(sl, tl, sc, tc);
        tag.primed = primed;
        Ok(tag)
    }
}

impl fmt::Display for OperatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for OperatorTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OperatorTag::parse(s)
    }
}

impl Serialize for OperatorTag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for OperatorTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        OperatorTag::parse(&s).map_err(serde::de::Error::custom)
    }
}
