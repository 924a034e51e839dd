//! Scalar values and column types shared by the engine, the transform
//! bridge and the CLI.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::xml::{serialize_xml, XmlDoc};
use crate::xpath::format_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnType {
    String,
    Number,
    Xml,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::String => "string",
            ColumnType::Number => "number",
            ColumnType::Xml => "xml",
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColumnType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "string" => Ok(ColumnType::String),
            "number" => Ok(ColumnType::Number),
            "xml" => Ok(ColumnType::Xml),
            other => Err(format!("unknown type `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Number(f64),
    String(String),
    Xml(Arc<XmlDoc>),
}

impl Value {
    pub fn xml(doc: XmlDoc) -> Self {
        Value::Xml(Arc::new(doc))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn column_type(&self) -> Option<ColumnType> {
        match self {
            Value::Null => None,
            Value::Number(_) => Some(ColumnType::Number),
            Value::String(_) => Some(ColumnType::String),
            Value::Xml(_) => Some(ColumnType::Xml),
        }
    }

    pub fn as_xml(&self) -> Option<&Arc<XmlDoc>> {
        match self {
            Value::Xml(d) => Some(d),
            _ => None,
        }
    }

    /// Canonical grouping/equality key: Null equals Null, XML compares by
    /// canonical serialization.
    pub fn key(&self) -> ValueKey {
        match self {
            Value::Null => ValueKey::Null,
            Value::Number(n) => ValueKey::Number(number_bits(*n)),
            Value::String(s) => ValueKey::String(s.clone()),
            Value::Xml(d) => ValueKey::Xml(serialize_xml(d)),
        }
    }

    /// Text form used in row documents and tabular output; None for Null.
    pub fn to_text(&self) -> Option<String> {
        match self {
            Value::Null => None,
            Value::Number(n) => Some(format_number(*n)),
            Value::String(s) => Some(s.clone()),
            Value::Xml(d) => Some(serialize_xml(d)),
        }
    }
}

impl PartialEq for Value {
    /// Structural equality (Null == Null); SQL comparison lives in the engine.
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::String(s)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<XmlDoc> for Value {
    fn from(d: XmlDoc) -> Self {
        Value::xml(d)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_text() {
            Some(t) => f.write_str(&t),
            None => f.write_str("NULL"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueKey {
    Null,
    Number(u64),
    String(String),
    Xml(String),
}

fn number_bits(n: f64) -> u64 {
    if n == 0.0 {
        0f64.to_bits()
    } else if n.is_nan() {
        f64::NAN.to_bits()
    } else {
        n.to_bits()
    }
}
