//! Synthetic data and insert/delete/query scripts.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::database::SketchId;
use crate::error::{Error, Result};
use crate::format::SketchFile;
use crate::sketch::AlphabetConfig;

/// `count` sketches with i.i.d. uniform symbols; the same seed gives the same file.
pub fn uniform_sketches(config: AlphabetConfig, count: usize, seed: u64) -> SketchFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = config.sigma();
    let symbols = (0..count * config.len())
        .map(|_| rng.gen_range(0..sigma) as u8)
        .collect();
    SketchFile::from_symbols(config, symbols).expect("symbols are below sigma")
}

/// One script step. Inserts and queries name an input record, deletes name
/// the id an earlier insert was assigned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Insert(usize),
    Delete(SketchId),
    Query(usize),
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Insert(i) => write!(f, "I {i}"),
            Op::Delete(id) => write!(f, "D {id}"),
            Op::Query(i) => write!(f, "Q {i}"),
        }
    }
}

impl FromStr for Op {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let mut parts = line.split_whitespace();
        let (Some(tag), Some(arg), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("expected '<I|D|Q> <number>', got {line:?}"));
        };
        let n: u64 = arg.parse().map_err(|_| format!("bad number {arg:?}"))?;
        match tag {
            "I" => Ok(Op::Insert(n as usize)),
            "D" => Ok(Op::Delete(n)),
            "Q" => Ok(Op::Query(n as usize)),
            _ => Err(format!("unknown operation {tag:?}")),
        }
    }
}

/// Parses a script; blank lines and lines starting with `#` are skipped.
pub fn parse_script(text: &str) -> Result<Vec<Op>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.parse().map_err(|message| Error::Parse {
                line: i + 1,
                message,
            })
        })
        .collect()
}

pub fn format_script(ops: &[Op]) -> String {
    ops.iter().map(|op| format!("{op}\n")).collect()
}

/// Random script over `records` input records with insert:delete:query
/// weights 5:3:2. Deletes only target live ids (a delete drawn while nothing
/// is live becomes an insert), assuming ids are handed out 0, 1, 2, ...
pub fn random_script(records: usize, ops: usize, seed: u64) -> Vec<Op> {
    assert!(records > 0, "script needs at least one input record");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut live: Vec<SketchId> = Vec::new();
    let mut next_id: SketchId = 0;
    (0..ops)
        .map(|_| match rng.gen_range(0..10) {
            5..=7 if !live.is_empty() => {
                let k = rng.gen_range(0..live.len());
                Op::Delete(live.swap_remove(k))
            }
            8 | 9 => Op::Query(rng.gen_range(0..records)),
            _ => {
                live.push(next_id);
                next_id += 1;
                Op::Insert(rng.gen_range(0..records))
            }
        })
        .collect()
}
