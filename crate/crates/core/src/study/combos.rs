use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::imaging::ChannelLabel;

pub const MAX_CHANNELS: usize = 16;

/// A nonempty set of channel labels in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CombinationId(Vec<ChannelLabel>);

impl CombinationId {
    pub fn new(mut labels: Vec<ChannelLabel>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Parameter("a combination needs at least one channel".into()));
        }
        labels.sort_by_key(|l| l.canonical_key());
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter(format!("duplicate channel in combination {}", CombinationId(labels))));
        }
        Ok(Self(labels))
    }

    pub fn labels(&self) -> &[ChannelLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_feature(&self) -> bool {
        self.0.iter().any(|l| matches!(l, ChannelLabel::Feature(_)))
    }
}

impl fmt::Display for CombinationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for CombinationId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s.split('+').map(|p| p.trim().parse()).collect::<Result<_>>()?)
    }
}

impl Serialize for CombinationId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// All `2^N - 1` nonempty subsets, ordered by bitmask over the canonically
/// sorted labels.
pub fn enumerate_combinations(labels: &[ChannelLabel]) -> Result<Vec<CombinationId>> {
    if labels.is_empty() || labels.len() > MAX_CHANNELS {
        return Err(Error::Parameter(format!(
            "combination search needs 1 to {MAX_CHANNELS} channels, got {}",
            labels.len()
        )));
    }
    let mut sorted = labels.to_vec();
    sorted.sort_by_key(|l| l.canonical_key());
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Parameter("duplicate channel labels".into()));
    }
    Ok((1u32..1 << sorted.len())
        .map(|mask| {
            CombinationId(
                sorted
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &l)| l)
                    .collect(),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn channel_array(k: u8) -> Vec<ChannelLabel> {
        let mut v = vec![ChannelLabel::Nr532, ChannelLabel::Nr266, ChannelLabel::R266];
        v.extend((1..=k).map(ChannelLabel::Feature));
        v
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate_combinations(&channel_array(3)).unwrap().len(), 63);
        assert_eq!(enumerate_combinations(&channel_array(2)).unwrap().len(), 31);
        assert_eq!(enumerate_combinations(&[ChannelLabel::R266]).unwrap().len(), 1);
        assert!(enumerate_combinations(&[]).is_err());
    }

    #[test]
    fn every_subset_once() {
        for n in 1..=10u8 {
            let labels: Vec<ChannelLabel> = (1..=n).map(ChannelLabel::Feature).collect();
            let combos = enumerate_combinations(&labels).unwrap();
            let distinct: BTreeSet<_> = combos.iter().cloned().collect();
            assert_eq!(distinct.len(), (1 << n) - 1);
            // Brute-force oracle: a subset is determined by its bitmask.
            for (mask, c) in (1usize..1 << n).zip(&combos) {
                let want: Vec<ChannelLabel> = (0..n as usize).filter(|i| mask >> i & 1 == 1).map(|i| labels[i]).collect();
                assert_eq!(c.labels(), want.as_slice());
            }
        }
    }

    #[test]
    fn canonical_order_and_text() {
        let c = CombinationId::new(vec![ChannelLabel::Feature(3), ChannelLabel::R266, ChannelLabel::Nr532, ChannelLabel::Feature(1)]).unwrap();
        assert_eq!(c.to_string(), "NR532+R266+m_f1+m_f3");
        assert_eq!("NR532+R266+m_f1+m_f3".parse::<CombinationId>().unwrap(), c);
        assert!(CombinationId::new(vec![ChannelLabel::R266, ChannelLabel::R266]).is_err());
        let shuffled = [ChannelLabel::Feature(1), ChannelLabel::R266, ChannelLabel::Nr532];
        assert_eq!(enumerate_combinations(&shuffled).unwrap()[0].labels(), &[ChannelLabel::Nr532]);
    }
}
