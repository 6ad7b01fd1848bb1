use serde::{Deserialize, Serialize};

use super::AttrValue;

/// `(count, std, representative)` for one attribute of a context.
///
/// Numbers and times use the population standard deviation and the mean.
/// Text uses the modal value (first seen wins ties); its spread is
/// `sqrt(p * (1 - p))` with `p` the share of members differing from the
/// mode, so a homogeneous column has spread 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeAggregate {
    pub count: usize,
    pub std: f64,
    pub representative: AttrValue,
}

/// Aggregates a homogeneous column; `None` for an empty one.
pub fn aggregate(values: &[AttrValue]) -> Option<AttributeAggregate> {
    let first = values.first()?;
    let count = values.len();
    let n = count as f64;
    match first {
        AttrValue::Text(_) => {
            let mut mode: Option<(&str, usize)> = None;
            for v in values {
                let AttrValue::Text(s) = v else { continue };
                let c = values.iter().filter(|o| matches!(o, AttrValue::Text(t) if t == s)).count();
                if mode.is_none_or(|(_, best)| c > best) {
                    mode = Some((s, c));
                }
            }
            let (mode, hits) = mode?;
            let p = (count - hits) as f64 / n;
            Some(AttributeAggregate {
                count,
                std: libm::sqrt(p * (1.0 - p)),
                representative: AttrValue::Text(mode.into()),
            })
        }
        AttrValue::Number(_) | AttrValue::Time(_) => {
            let xs = values.iter().filter_map(AttrValue::numeric);
            let mean = xs.clone().sum::<f64>() / n;
            let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let representative = match first {
                AttrValue::Time(_) => AttrValue::Time(mean),
                _ => AttrValue::Number(mean),
            };
            Some(AttributeAggregate { count, std: libm::sqrt(var), representative })
        }
    }
}
