//! K-mer primitives: 2-bit packing, canonical orientation, windowed
//! enumeration over reads, and prefix partitioning for parallel counting.
//!
//! Bases pack as A=0, C=1, G=2, T=3 with the first base in the highest
//! occupied bit pair, so integer order on packed words of equal length is
//! exactly lexicographic order on the base strings. A k-mer is stored in
//! *canonical* orientation: the lexicographic minimum of the window and its
//! reverse complement. k must be odd (a palindrome could otherwise equal its
//! own reverse complement) and at most [`MAX_K`].

use std::fmt;

/// Largest supported k. Two bits per base keeps any odd k through 63 in a
/// single `u128`.
pub const MAX_K: usize = 63;

/// Packs one ASCII base. Case-insensitive; anything outside ACGT (Ns,
/// ambiguity codes) is `None`.
#[inline]
pub fn encode_base(b: u8) -> Option<u8> {
    match b {
        b'A' | b'a' => Some(0),
        b'C' | b'c' => Some(1),
        b'G' | b'g' => Some(2),
        b'T' | b't' => Some(3),
        _ => None,
    }
}

/// Unpacks a 2-bit code to its uppercase ASCII base.
#[inline]
pub fn decode_base(code: u8) -> u8 {
    debug_assert!(code < 4);
    b"ACGT"[code as usize]
}

/// Complements one ASCII base, preserving N.
#[inline]
pub fn complement(b: u8) -> u8 {
    match b {
        b'A' | b'a' => b'T',
        b'C' | b'c' => b'G',
        b'G' | b'g' => b'C',
        b'T' | b't' => b'A',
        other => other,
    }
}

/// Reverse complement of an ASCII sequence.
pub fn revcomp(seq: &[u8]) -> Vec<u8> {
    seq.iter().rev().map(|&b| complement(b)).collect()
}

#[inline]
pub(crate) fn mask(k: usize) -> u128 {
    (1u128 << (2 * k)) - 1
}

/// Reverses the 2-bit groups of `word` (low `2k` bits) and complements them.
#[inline]
pub(crate) fn revcomp_word(word: u128, k: usize) -> u128 {
    // Complement first (XOR over the occupied bits), then reverse the 2-bit
    // groups of the whole u128 and shift the result back down.
    let mut x = word ^ mask(k);
    x = ((x & 0x3333_3333_3333_3333_3333_3333_3333_3333) << 2)
        | ((x >> 2) & 0x3333_3333_3333_3333_3333_3333_3333_3333);
    x = ((x & 0x0F0F_0F0F_0F0F_0F0F_0F0F_0F0F_0F0F_0F0F) << 4)
        | ((x >> 4) & 0x0F0F_0F0F_0F0F_0F0F_0F0F_0F0F_0F0F_0F0F);
    x = x.swap_bytes();
    x >> (128 - 2 * k)
}

/// A k-mer in canonical orientation.
///
/// `word` holds the lexicographically smaller of the window and its reverse
/// complement. Two canonical k-mers of the same k compare exactly as their
/// base strings do.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKmer {
    word: u128,
    k: u8,
}

impl CanonicalKmer {
    /// Canonicalizes an ACGT window. `None` if the window contains a non-ACGT
    /// base. Panics if `seq.len()` is even or exceeds [`MAX_K`]: a legal k is
    /// part of the caller's contract, a dirty base is data.
    pub fn from_bases(seq: &[u8]) -> Option<CanonicalKmer> {
        let k = seq.len();
        assert!(k % 2 == 1 && k <= MAX_K, "k must be odd and <= {}", MAX_K);
        let mut fwd = 0u128;
        for &b in seq {
            fwd = (fwd << 2) | u128::from(encode_base(b)?);
        }
        let rc = revcomp_word(fwd, k);
        Some(CanonicalKmer {
            word: fwd.min(rc),
            k: k as u8,
        })
    }

    /// Rebuilds from a packed canonical word, for readers of the on-disk
    /// table. The word must already be canonical.
    pub fn from_word(word: u128, k: usize) -> CanonicalKmer {
        assert!(k % 2 == 1 && k <= MAX_K);
        debug_assert!(word <= revcomp_word(word, k));
        CanonicalKmer { word, k: k as u8 }
    }

    /// Canonicalizes a packed word of either strand; the flag reports
    /// whether the stored orientation is the reverse complement of the
    /// input.
    pub fn canonicalize_word(word: u128, k: usize) -> (CanonicalKmer, bool) {
        assert!(k % 2 == 1 && k <= MAX_K);
        let rc = revcomp_word(word, k);
        if word <= rc {
            (CanonicalKmer { word, k: k as u8 }, false)
        } else {
            (CanonicalKmer { word: rc, k: k as u8 }, true)
        }
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k as usize
    }

    #[inline]
    pub fn word(&self) -> u128 {
        self.word
    }

    /// ASCII bases in canonical orientation.
    pub fn bases(&self) -> Vec<u8> {
        let k = self.k();
        (0..k)
            .map(|i| decode_base(((self.word >> (2 * (k - 1 - i))) & 3) as u8))
            .collect()
    }
}

impl fmt::Display for CanonicalKmer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(std::str::from_utf8(&self.bases()).unwrap())
    }
}

impl fmt::Debug for CanonicalKmer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalKmer({})", self)
    }
}

/// One k-mer occurrence in a read, with its single-base neighbors expressed
/// in the k-mer's canonical orientation. When the window was flipped, the
/// read base *after* the window becomes the canonical *left* neighbor (and is
/// complemented), and vice versa. A neighbor is `None` at a read boundary or
/// when the neighboring base is not ACGT.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KmerInstance {
    pub kmer: CanonicalKmer,
    /// Window start offset in the read.
    pub pos: usize,
    /// True when the canonical orientation is the reverse complement of the
    /// window as read.
    pub flipped: bool,
    /// (base, quality) preceding the canonical k-mer.
    pub left: Option<(u8, u8)>,
    /// (base, quality) following the canonical k-mer.
    pub right: Option<(u8, u8)>,
}

/// Walks every k-window of a read, skipping windows that contain a non-ACGT
/// base, and hands each canonical instance to `f`. `quals` must be the same
/// length as `bases` when present; a missing quality string reports quality 0
/// for the neighbors.
pub fn for_each_kmer<F: FnMut(KmerInstance)>(bases: &[u8], quals: Option<&[u8]>, k: usize, mut f: F) {
    assert!(k % 2 == 1 && k <= MAX_K, "k must be odd and <= {}", MAX_K);
    if let Some(q) = quals {
        assert_eq!(q.len(), bases.len(), "quality length mismatch");
    }
    if bases.len() < k {
        return;
    }
    let m = mask(k);
    let mut fwd = 0u128;
    let mut rc = 0u128;
    let mut run = 0usize; // consecutive ACGT bases ending at the current position
    for (end, &b) in bases.iter().enumerate() {
        match encode_base(b) {
            Some(code) => {
                fwd = ((fwd << 2) | u128::from(code)) & m;
                rc = (rc >> 2) | (u128::from(3 ^ code) << (2 * (k - 1)));
                run += 1;
            }
            None => {
                run = 0;
                continue;
            }
        }
        if run < k {
            continue;
        }
        let start = end + 1 - k;
        let flipped = rc < fwd;
        let kmer = CanonicalKmer {
            word: fwd.min(rc),
            k: k as u8,
        };
        let neighbor = |idx: usize| -> Option<(u8, u8)> {
            let b = *bases.get(idx)?;
            encode_base(b)?;
            Some((b, quals.map_or(0, |q| q[idx] )))
        };
        let before = if start > 0 { neighbor(start - 1) } else { None };
        let after = neighbor(end + 1);
        let (left, right) = if flipped {
            let comp = |n: Option<(u8, u8)>| n.map(|(b, q)| (complement(b), q));
            (comp(after), comp(before))
        } else {
            (before, after)
        };
        f(KmerInstance { kmer, pos: start, flipped, left, right });
    }
}

/// Collecting wrapper around [`for_each_kmer`].
pub fn enumerate_kmers(bases: &[u8], quals: Option<&[u8]>, k: usize) -> Vec<KmerInstance> {
    let mut out = Vec::new();
    for_each_kmer(bases, quals, k, |inst| out.push(inst));
    out
}

/// Deterministic bucket for a canonical k-mer, from a fixed-width prefix of
/// the packed word. Canonical words are biased toward small prefixes, so the
/// prefix is mixed before reduction to keep buckets balanced.
pub fn prefix_partition(kmer: &CanonicalKmer, num_buckets: usize) -> usize {
    assert!(num_buckets > 0);
    let k = kmer.k();
    let w = k.min(16); // prefix width in bases
    let prefix = (kmer.word >> (2 * (k - w))) as u64;
    // splitmix64 finalizer
    let mut z = prefix.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z % num_buckets as u64) as usize
}
