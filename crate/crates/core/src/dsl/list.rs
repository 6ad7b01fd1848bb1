//! Registry `L`: integer list functions used to cluster sensor agents.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Registry, RegistryId, StageFault, ValueKind};

pub const HEAD: u8 = 1;
pub const REST: u8 = 2;
pub const LAST: u8 = 3;
pub const REVERSE: u8 = 4;
pub const SORT: u8 = 5;
pub const SUM: u8 = 6;
pub const COUNT: u8 = 7;
pub const MAXIMUM: u8 = 8;
pub const MINIMUM: u8 = 9;

/// A value of the list language: a single integer or a list of integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ListValue {
    Int(i64),
    List(Vec<i64>),
}

impl ListValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            ListValue::Int(_) => ValueKind::Scalar,
            ListValue::List(_) => ValueKind::List,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            ListValue::Int(v) => Some(*v),
            ListValue::List(_) => None,
        }
    }
}

impl From<Vec<i64>> for ListValue {
    fn from(v: Vec<i64>) -> Self {
        ListValue::List(v)
    }
}

impl From<i64> for ListValue {
    fn from(v: i64) -> Self {
        ListValue::Int(v)
    }
}

/// Evaluator for registry `L`. Arithmetic wraps on overflow.
#[derive(Debug, Clone, Copy, Default)]
pub struct ListRegistry;

impl Registry for ListRegistry {
    type Value = ListValue;

    fn id(&self) -> RegistryId {
        RegistryId::L
    }

    fn apply(&self, index: u8, input: &ListValue) -> Result<ListValue, StageFault> {
        let ListValue::List(xs) = input else {
            return Err(StageFault::KindMismatch { expected: ValueKind::List, found: input.kind() });
        };
        let non_empty = || if xs.is_empty() { Err(StageFault::EmptyList) } else { Ok(()) };
        Ok(match index {
            HEAD => {
                non_empty()?;
                ListValue::Int(xs[0])
            }
            REST => {
                non_empty()?;
                ListValue::List(xs[1..].to_vec())
            }
            LAST => {
                non_empty()?;
                ListValue::Int(xs[xs.len() - 1])
            }
            REVERSE => ListValue::List(xs.iter().rev().copied().collect()),
            SORT => {
                let mut v = xs.clone();
                v.sort_unstable();
                ListValue::List(v)
            }
            SUM => ListValue::Int(xs.iter().fold(0i64, |acc, x| acc.wrapping_add(*x))),
            COUNT => ListValue::Int(xs.len() as i64),
            MAXIMUM => ListValue::Int(*xs.iter().max().ok_or(StageFault::EmptyList)?),
            MINIMUM => ListValue::Int(*xs.iter().min().ok_or(StageFault::EmptyList)?),
            _ => return Err(StageFault::Malformed("unknown list function")),
        })
    }
}
