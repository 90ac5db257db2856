//! Set partitions of subsystem indices and the coarsening relations between them.
//!
//! A partition groups subsystem indices into disjoint nonempty blocks. Coarsening
//! moves are discarding subsystems and combining blocks; the reachability relations
//! they induce drive the hierarchy and monogamy checks elsewhere in the crate.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Partitions with more parties than this are rejected by the enumeration
/// routines; Bell numbers grow too fast beyond it (Bell(6) = 203).
pub const MAX_ENUM_PARTIES: usize = 6;

const MAX_BIPARTITION_PARTIES: usize = 16;

/// Disjoint nonempty blocks of subsystem indices, held in canonical form:
/// indices sorted within each block, blocks sorted by their first index.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.blocks.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let blocks = Vec::<Vec<usize>>::deserialize(deserializer)?;
        Partition::new(blocks).map_err(serde::de::Error::custom)
    }
}

impl Partition {
    /// Canonicalizes and validates the given blocks.
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        let mut seen = BTreeSet::new();
        let mut canon: Vec<Vec<usize>> = Vec::with_capacity(blocks.len());
        for mut block in blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            block.sort_unstable();
            for &p in &block {
                if !seen.insert(p) {
                    return Err(Error::InvalidPartition(format!(
                        "subsystem {p} appears in more than one block"
                    )));
                }
            }
            canon.push(block);
        }
        canon.sort();
        Ok(Partition { blocks: canon })
    }

    /// The finest partition of `m` subsystems: every index its own block.
    pub fn finest(m: usize) -> Self {
        Partition {
            blocks: (0..m).map(|i| vec![i]).collect(),
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// All subsystem indices covered by this partition, sorted.
    pub fn parties(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn party_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// True when the partition covers exactly the indices 0..m.
    pub fn covers(&self, m: usize) -> bool {
        self.parties() == (0..m).collect::<Vec<_>>()
    }

    /// Renders blocks with the given subsystem labels, joined by `|`.
    pub fn format(&self, labels: &[impl AsRef<str>]) -> Result<String> {
        let mut parts = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let mut s = String::new();
            for &i in block {
                let label = labels.get(i).ok_or_else(|| {
                    Error::InvalidArgument(format!("no label for subsystem index {i}"))
                })?;
                s.push_str(label.as_ref());
            }
            parts.push(s);
        }
        Ok(parts.join("|"))
    }

    /// Parses a partition string like `"AB|C|D"` against the given labels.
    ///
    /// Labels are matched greedily (longest first) so multi-character labels
    /// work without separators inside a block. Surrounding whitespace is
    /// trimmed; anything else must be a label or `|`.
    pub fn parse(input: &str, labels: &[impl AsRef<str>]) -> Result<Self> {
        let s = input.trim();
        let base = input.len() - input.trim_start().len();
        if s.is_empty() {
            return Err(Error::PartitionParse {
                pos: 0,
                msg: "empty partition string".into(),
            });
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        let mut used = BTreeSet::new();
        let mut i = 0;
        while i < s.len() {
            let rest = &s[i..];
            if rest.starts_with('|') {
                if current.is_empty() {
                    return Err(Error::PartitionParse {
                        pos: base + i,
                        msg: "empty block".into(),
                    });
                }
                blocks.push(std::mem::take(&mut current));
                i += 1;
                continue;
            }
            let mut matched: Option<(usize, usize)> = None; // (label index, byte length)
            for (idx, label) in labels.iter().enumerate() {
                let l = label.as_ref();
                if !l.is_empty() && rest.starts_with(l) {
                    match matched {
                        Some((_, len)) if len >= l.len() => {}
                        _ => matched = Some((idx, l.len())),
                    }
                }
            }
            match matched {
                Some((idx, len)) => {
                    if !used.insert(idx) {
                        return Err(Error::PartitionParse {
                            pos: base + i,
                            msg: format!("subsystem {:?} appears twice", labels[idx].as_ref()),
                        });
                    }
                    current.push(idx);
                    i += len;
                }
                None => {
                    return Err(Error::PartitionParse {
                        pos: base + i,
                        msg: format!(
                            "no subsystem label matches {:?}",
                            rest.chars().next().map(String::from).unwrap_or_default()
                        ),
                    });
                }
            }
        }
        if current.is_empty() {
            return Err(Error::PartitionParse {
                pos: base + s.len(),
                msg: "empty block".into(),
            });
        }
        blocks.push(current);
        Partition::new(blocks)
    }
}

/// Default single-letter subsystem labels A, B, C, ...
pub fn default_labels(m: usize) -> Result<Vec<String>> {
    if m > 26 {
        return Err(Error::InvalidArgument(format!(
            "default labels cover at most 26 subsystems, got {m}"
        )));
    }
    Ok((0..m).map(|i| ((b'A' + i as u8) as char).to_string()).collect())
}

/// Which elementary moves a coarsening may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoarsenMoves {
    DiscardOnly,
    CombineOnly,
    Any,
}

/// Move set plus the inner-discard policy.
///
/// `allow_inner_discard` controls whether a single party may be dropped from
/// inside a multi-party block (true by default); with it off, discards remove
/// whole blocks only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoarsenMode {
    pub moves: CoarsenMoves,
    pub allow_inner_discard: bool,
}

impl CoarsenMode {
    pub fn discard() -> Self {
        CoarsenMode {
            moves: CoarsenMoves::DiscardOnly,
            allow_inner_discard: true,
        }
    }

    pub fn combine() -> Self {
        CoarsenMode {
            moves: CoarsenMoves::CombineOnly,
            allow_inner_discard: true,
        }
    }

    pub fn any() -> Self {
        CoarsenMode {
            moves: CoarsenMoves::Any,
            allow_inner_discard: true,
        }
    }

    pub fn without_inner_discard(mut self) -> Self {
        self.allow_inner_discard = false;
        self
    }
}

impl Default for CoarsenMode {
    fn default() -> Self {
        CoarsenMode::any()
    }
}

/// Strict coarsening test: can `y` be reached from `x` by at least one move
/// permitted by `mode`? Uses closed-form reachability, not search.
pub fn is_coarser(x: &Partition, y: &Partition, mode: CoarsenMode) -> bool {
    if x == y {
        return false;
    }
    let xp: BTreeSet<usize> = x.parties().into_iter().collect();
    let yp: BTreeSet<usize> = y.parties().into_iter().collect();
    if !yp.is_subset(&xp) {
        return false;
    }
    // Index of the y-block holding each surviving party.
    let block_of = |p: usize| -> Option<usize> {
        y.blocks().iter().position(|b| b.contains(&p))
    };
    match mode.moves {
        CoarsenMoves::CombineOnly => {
            if xp != yp {
                return false;
            }
            // Every x-block must sit whole inside a single y-block.
            x.blocks().iter().all(|xb| {
                let home = block_of(xb[0]);
                xb.iter().all(|&p| block_of(p) == home)
            })
        }
        CoarsenMoves::DiscardOnly => {
            if mode.allow_inner_discard {
                // Each y-block inside a distinct x-block: discards never merge.
                let mut homes = BTreeSet::new();
                y.blocks().iter().all(|yb| {
                    match x.blocks().iter().position(|xb| yb.iter().all(|p| xb.contains(p))) {
                        Some(h) => homes.insert(h),
                        None => false,
                    }
                })
            } else {
                // Whole-block discards: y's blocks are a subset of x's.
                y.blocks().iter().all(|yb| x.blocks().contains(yb))
            }
        }
        CoarsenMoves::Any => {
            if mode.allow_inner_discard {
                // Survivors of each x-block must stay together in one y-block.
                x.blocks().iter().all(|xb| {
                    let mut survivors = xb.iter().filter(|p| yp.contains(p));
                    match survivors.next() {
                        None => true,
                        Some(&first) => {
                            let home = block_of(first);
                            survivors.all(|&p| block_of(p) == home)
                        }
                    }
                })
            } else {
                // Each x-block is either dropped entirely or lands whole in one
                // y-block, and y-blocks are unions of x-blocks.
                let tiled = x.blocks().iter().all(|xb| {
                    let inside: Vec<_> = xb.iter().filter(|p| yp.contains(p)).collect();
                    if inside.is_empty() {
                        return true;
                    }
                    if inside.len() != xb.len() {
                        return false;
                    }
                    let home = block_of(xb[0]);
                    xb.iter().all(|&p| block_of(p) == home)
                });
                tiled
            }
        }
    }
}

/// Bell number B(n): how many set partitions an n-element set has.
pub fn bell_number(n: usize) -> u64 {
    // Bell triangle.
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// All set partitions of the given subsystem indices, canonical and sorted.
///
/// Guarded at [`MAX_ENUM_PARTIES`] parties.
pub fn all_partitions(parties: &[usize]) -> Result<Vec<Partition>> {
    let mut items: Vec<usize> = parties.to_vec();
    items.sort_unstable();
    items.dedup();
    if items.len() != parties.len() {
        return Err(Error::InvalidArgument(
            "duplicate subsystem index in partition enumeration".into(),
        ));
    }
    if items.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot enumerate partitions of an empty set".into(),
        ));
    }
    if items.len() > MAX_ENUM_PARTIES {
        return Err(Error::SizeLimit(format!(
            "partition enumeration capped at {} parties, got {} (Bell({}) = {})",
            MAX_ENUM_PARTIES,
            items.len(),
            items.len(),
            bell_number(items.len()),
        )));
    }
    // Restricted growth strings: a[i] <= 1 + max(a[0..i]).
    let n = items.len();
    let mut out = Vec::with_capacity(bell_number(n) as usize);
    let mut rgs = vec![0usize; n];
    loop {
        let nblocks = rgs.iter().copied().max().unwrap() + 1;
        let mut blocks = vec![Vec::new(); nblocks];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(items[i]);
        }
        out.push(Partition::new(blocks)?);
        // Next RGS in lexicographic order.
        let mut i = n;
        loop {
            if i == 1 {
                out.sort();
                return Ok(out);
            }
            i -= 1;
            let cap = 1 + rgs[..i].iter().copied().max().unwrap();
            if rgs[i] < cap {
                rgs[i] += 1;
                for v in rgs[i + 1..].iter_mut() {
                    *v = 0;
                }
                break;
            }
        }
    }
}

/// All 2-block partitions of subsystems 0..m, canonical and sorted.
/// There are 2^(m-1) - 1 of them.
pub fn all_bipartitions(m: usize) -> Result<Vec<Partition>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "bipartitions need at least 2 subsystems, got {m}"
        )));
    }
    if m > MAX_BIPARTITION_PARTIES {
        return Err(Error::SizeLimit(format!(
            "bipartition enumeration capped at {MAX_BIPARTITION_PARTIES} subsystems, got {m}"
        )));
    }
    // Subsets containing index 0 so each cut appears once.
    let mut out = Vec::with_capacity((1usize << (m - 1)) - 1);
    for mask in 0..(1u32 << (m - 1)) {
        let mut left = vec![0usize];
        let mut right = Vec::new();
        for i in 1..m {
            if mask & (1 << (i - 1)) != 0 {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        if right.is_empty() {
            continue;
        }
        out.push(Partition::new(vec![left, right])?);
    }
    out.sort();
    Ok(out)
}

/// All partitions strictly coarser than `x` under `mode`, over every nonempty
/// subset of x's parties. Canonical and sorted.
pub fn coarser_partitions(x: &Partition, mode: CoarsenMode) -> Result<Vec<Partition>> {
    let parties = x.parties();
    if parties.len() > MAX_ENUM_PARTIES {
        return Err(Error::SizeLimit(format!(
            "coarsening enumeration capped at {} parties, got {}",
            MAX_ENUM_PARTIES,
            parties.len()
        )));
    }
    let mut out = Vec::new();
    for mask in 1u32..(1 << parties.len()) {
        let subset: Vec<usize> = parties
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &p)| p)
            .collect();
        for z in all_partitions(&subset)? {
            if is_coarser(x, &z, mode) {
                out.push(z);
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// The set of partitions coarser than `x` that lose part of `y`: every z with
/// x coarser-than z (any moves) whose parties miss at least one party of `y`.
///
/// Single-block partitions are excluded; with no split they support no measure.
/// Requires `y` equal to `x` or reachable from it under any-moves with the
/// same inner-discard policy.
pub fn xi_set(x: &Partition, y: &Partition, allow_inner_discard: bool) -> Result<Vec<Partition>> {
    let mode = CoarsenMode {
        moves: CoarsenMoves::Any,
        allow_inner_discard,
    };
    if x != y && !is_coarser(x, y, mode) {
        return Err(Error::Relation(
            "xi_set requires the first partition to be strictly coarsenable to the second".into(),
        ));
    }
    let yp: BTreeSet<usize> = y.parties().into_iter().collect();
    let out = coarser_partitions(x, mode)?
        .into_iter()
        .filter(|z| {
            let zp: BTreeSet<usize> = z.parties().into_iter().collect();
            z.block_count() >= 2 && !yp.is_subset(&zp)
        })
        .collect();
    Ok(out)
}
