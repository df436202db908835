//! Binary Merkle tree with domain-separated leaves and promoted odd nodes.

use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{hash_parts, Digest};

const LEAF: u8 = 0x00;
const NODE: u8 = 0x01;

pub fn leaf_hash(index: u64, data: &[u8]) -> Digest {
    hash_parts(&[&[LEAF], &index.to_be_bytes(), data])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    hash_parts(&[&[NODE], left.as_bytes(), right.as_bytes()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// Sibling sits to the left of the running hash.
    Left(Digest),
    Right(Digest),
    /// Current node had no sibling at this level and moves up unchanged.
    Promoted,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MerklePath {
    pub steps: Vec<Step>,
}

impl MerklePath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn encode(&self, w: Writer) -> Writer {
        let mut w = w.u32(self.steps.len() as u32);
        for s in &self.steps {
            w = match s {
                Step::Left(d) => w.u8(0).digest(d),
                Step::Right(d) => w.u8(1).digest(d),
                Step::Promoted => w.u8(2),
            };
        }
        w
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let n = r.u32()? as usize;
        if n > 64 {
            return Err(CodecError::Invalid(format!("path of {n} levels")));
        }
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            steps.push(match r.u8()? {
                0 => Step::Left(r.digest()?),
                1 => Step::Right(r.digest()?),
                2 => Step::Promoted,
                t => return Err(CodecError::Invalid(format!("path step tag {t}"))),
            });
        }
        Ok(MerklePath { steps })
    }
}

fn next_level(level: &[Digest]) -> Vec<Digest> {
    level
        .chunks(2)
        .map(|pair| match pair {
            [l, r] => node_hash(l, r),
            [single] => *single,
            _ => unreachable!(),
        })
        .collect()
}

/// Root over already-hashed leaves. Panics on an empty slice.
pub fn root(leaves: &[Digest]) -> Digest {
    assert!(!leaves.is_empty(), "Merkle tree needs at least one leaf");
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = next_level(&level);
    }
    level[0]
}

pub fn path(leaves: &[Digest], index: usize) -> MerklePath {
    assert!(index < leaves.len());
    let mut steps = Vec::new();
    let mut level = leaves.to_vec();
    let mut i = index;
    while level.len() > 1 {
        let step = if i % 2 == 1 {
            Step::Left(level[i - 1])
        } else if i + 1 < level.len() {
            Step::Right(level[i + 1])
        } else {
            Step::Promoted
        };
        steps.push(step);
        level = next_level(&level);
        i /= 2;
    }
    MerklePath { steps }
}

/// Checks `leaf` sits at `index` of a `count`-leaf tree with root `root`.
///
/// The shape of the path must match what `index` and `count` dictate.
pub fn verify(root: &Digest, index: u64, count: u64, leaf: &Digest, path: &MerklePath) -> bool {
    if count == 0 || index >= count {
        return false;
    }
    let mut acc = *leaf;
    let mut i = index;
    let mut n = count;
    let mut steps = path.steps.iter();
    while n > 1 {
        let Some(step) = steps.next() else {
            return false;
        };
        acc = match (i % 2 == 1, i + 1 < n, step) {
            (true, _, Step::Left(s)) => node_hash(s, &acc),
            (false, true, Step::Right(s)) => node_hash(&acc, s),
            (false, false, Step::Promoted) => acc,
            _ => return false,
        };
        i /= 2;
        n = n.div_ceil(2);
    }
    steps.next().is_none() && acc == *root
}

/// Number of levels for `count` leaves.
pub fn depth(count: u64) -> usize {
    let mut n = count;
    let mut d = 0;
    while n > 1 {
        n = n.div_ceil(2);
        d += 1;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash;

    fn leaves(n: usize) -> Vec<Digest> {
        (0..n).map(|i| leaf_hash(i as u64, &[i as u8])).collect()
    }

    #[test]
    fn single_leaf_is_root() {
        let l = leaves(1);
        assert_eq!(root(&l), l[0]);
        assert!(path(&l, 0).is_empty());
        assert!(verify(&l[0], 0, 1, &l[0], &MerklePath::default()));
    }

    #[test]
    fn three_leaves_by_hand() {
        let l = leaves(3);
        let expected = node_hash(&node_hash(&l[0], &l[1]), &l[2]);
        assert_eq!(root(&l), expected);
        assert_eq!(path(&l, 2).steps, vec![Step::Promoted, Step::Left(node_hash(&l[0], &l[1]))]);
    }

    #[test]
    fn every_path_verifies_and_has_log_depth() {
        for n in 1..=40usize {
            let l = leaves(n);
            let r = root(&l);
            let want = (n as f64).log2().ceil() as usize;
            assert_eq!(depth(n as u64), want);
            for i in 0..n {
                let p = path(&l, i);
                assert_eq!(p.len(), want, "n={n} i={i}");
                assert!(verify(&r, i as u64, n as u64, &l[i], &p));
                // wrong index or count fails
                if n > 1 {
                    assert!(!verify(&r, ((i + 1) % n) as u64, n as u64, &l[i], &p));
                }
                assert!(!verify(&r, i as u64, n as u64, &hash(b"x"), &p));
            }
        }
    }

    #[test]
    fn padding_a_path_is_rejected() {
        let l = leaves(4);
        let r = root(&l);
        let mut p = path(&l, 1);
        p.steps.push(Step::Promoted);
        assert!(!verify(&r, 1, 4, &l[1], &p));
        let mut p = path(&l, 3);
        p.steps.pop();
        assert!(!verify(&r, 3, 4, &l[3], &p));
    }

    #[test]
    fn path_codec() {
        let l = leaves(7);
        let p = path(&l, 6);
        let bytes = p.encode(Writer::new()).finish();
        let mut rd = Reader::new(&bytes);
        assert_eq!(MerklePath::decode(&mut rd).unwrap(), p);
        rd.finish().unwrap();
    }
}
