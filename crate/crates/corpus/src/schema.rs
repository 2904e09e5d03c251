//! The entity and relation inventory, and the BIO label codec built on it.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityType {
    Drug,
    Strength,
    Form,
    Dosage,
    Frequency,
    Route,
    Duration,
    Reason,
    Ade,
}

impl EntityType {
    pub const ALL: [EntityType; 9] = [
        EntityType::Drug,
        EntityType::Strength,
        EntityType::Form,
        EntityType::Dosage,
        EntityType::Frequency,
        EntityType::Route,
        EntityType::Duration,
        EntityType::Reason,
        EntityType::Ade,
    ];

    /// Attribute types, in relation-head order.
    pub const ATTRIBUTES: [EntityType; 8] = [
        EntityType::Strength,
        EntityType::Form,
        EntityType::Dosage,
        EntityType::Frequency,
        EntityType::Route,
        EntityType::Duration,
        EntityType::Reason,
        EntityType::Ade,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityType::Drug => "Drug",
            EntityType::Strength => "Strength",
            EntityType::Form => "Form",
            EntityType::Dosage => "Dosage",
            EntityType::Frequency => "Frequency",
            EntityType::Route => "Route",
            EntityType::Duration => "Duration",
            EntityType::Reason => "Reason",
            EntityType::Ade => "ADE",
        }
    }

    pub fn is_drug(self) -> bool {
        self == EntityType::Drug
    }

    /// The relation an attribute of this type takes part in; `None` for drugs.
    pub fn relation(self) -> Option<RelationType> {
        RelationType::ALL.into_iter().find(|r| r.attribute() == self)
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown entity type {s:?}"))
    }
}

/// One of the eight attribute-to-drug relations. The discriminant is the
/// relation head index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationType {
    StrengthDrug,
    FormDrug,
    DosageDrug,
    FrequencyDrug,
    RouteDrug,
    DurationDrug,
    ReasonDrug,
    AdeDrug,
}

impl RelationType {
    pub const ALL: [RelationType; 8] = [
        RelationType::StrengthDrug,
        RelationType::FormDrug,
        RelationType::DosageDrug,
        RelationType::FrequencyDrug,
        RelationType::RouteDrug,
        RelationType::DurationDrug,
        RelationType::ReasonDrug,
        RelationType::AdeDrug,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn attribute(self) -> EntityType {
        EntityType::ATTRIBUTES[self.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationType::StrengthDrug => "Strength-Drug",
            RelationType::FormDrug => "Form-Drug",
            RelationType::DosageDrug => "Dosage-Drug",
            RelationType::FrequencyDrug => "Frequency-Drug",
            RelationType::RouteDrug => "Route-Drug",
            RelationType::DurationDrug => "Duration-Drug",
            RelationType::ReasonDrug => "Reason-Drug",
            RelationType::AdeDrug => "ADE-Drug",
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown relation type {s:?}"))
    }
}

/// Number of BIO classes: O plus B/I for each entity type.
pub const NUM_LABELS: usize = 2 * EntityType::ALL.len() + 1;

/// A BIO tag. Ids: O = 0, B-X = 1 + 2·X, I-X = 2 + 2·X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    O,
    B(EntityType),
    I(EntityType),
}

impl Label {
    pub fn id(self) -> u8 {
        match self {
            Label::O => 0,
            Label::B(t) => 1 + 2 * t.index() as u8,
            Label::I(t) => 2 + 2 * t.index() as u8,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        if id == 0 {
            return Some(Label::O);
        }
        let t = EntityType::from_index((id as usize - 1) / 2)?;
        Some(if id % 2 == 1 { Label::B(t) } else { Label::I(t) })
    }

    pub fn entity(self) -> Option<EntityType> {
        match self {
            Label::O => None,
            Label::B(t) | Label::I(t) => Some(t),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::O => f.write_str("O"),
            Label::B(t) => write!(f, "B-{t}"),
            Label::I(t) => write!(f, "I-{t}"),
        }
    }
}
