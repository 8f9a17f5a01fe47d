use serde::{Deserialize, Serialize};

/// Out-of-range sample policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Half-sample symmetric: `d c b a | a b c d | d c b a`.
    #[default]
    Reflect,
    /// Edge value repeated: `a a a | a b c d | d d d`.
    Replicate,
}

impl Boundary {
    /// Maps a possibly out-of-range coordinate onto `0..n`.
    #[inline]
    pub fn index(self, i: isize, n: usize) -> usize {
        let n_i = n as isize;
        match self {
            Boundary::Replicate => i.clamp(0, n_i - 1) as usize,
            Boundary::Reflect => {
                let period = 2 * n_i;
                let m = i.rem_euclid(period);
                (if m < n_i { m } else { period - 1 - m }) as usize
            }
        }
    }

    /// Lookup table for coordinates `-pad .. n + pad`.
    pub(crate) fn table(self, n: usize, pad: usize) -> Vec<usize> {
        (-(pad as isize)..(n + pad) as isize)
            .map(|i| self.index(i, n))
            .collect()
    }
}

impl std::str::FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reflect" => Ok(Boundary::Reflect),
            "replicate" => Ok(Boundary::Replicate),
            other => Err(format!("unknown boundary mode {other:?}")),
        }
    }
}
